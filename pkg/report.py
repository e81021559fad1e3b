"""
Run reports for the command-line driver.

A RunReport collects what one subcommand did: input digests, per-VC
verdicts, adequacy outcomes and the proof-check result. It renders two
ways: a human summary for stdout and a structured `key: value` text for
`--report`. The structured rendering is deterministic; the wall-clock
duration only appears in the summary.
"""
import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

logger = logging.getLogger(__name__)

REPORT_FORMAT = "relverify-report 1"


@dataclass
class VCResult:
    """Verdict of a single verification condition."""
    id: int
    name: str
    kind: str
    verdict: str                      # valid, counterexample, unknown
    detail: str = ""


@dataclass
class AdequacyResult:
    product: str
    mode: str
    verdict: str
    pairs_checked: int = 0
    detail: str = ""


@dataclass
class ProofResult:
    status: str                       # proved, proved-with-assumptions, error
    nodes: int = 0
    rules: List[str] = field(default_factory=list)
    error_path: str = ""
    error: str = ""
    assumptions: List[str] = field(default_factory=list)


@dataclass
class RunReport:
    """Everything a run decided, in input order."""
    subcommand: str
    inputs: List[Tuple[str, str]] = field(default_factory=list)     # (path, sha256)
    options: List[Tuple[str, str]] = field(default_factory=list)
    vcs: List[VCResult] = field(default_factory=list)
    adequacy: List[AdequacyResult] = field(default_factory=list)
    proof: Optional[ProofResult] = None
    checks: List[Tuple[str, str]] = field(default_factory=list)     # (name, outcome) of direct checks
    notes: List[str] = field(default_factory=list)
    exit_code: int = 0
    duration: float = 0.0             # seconds; summary only

    def add_input(self, file_path: str):
        self.inputs.append((file_path, file_digest(file_path)))

    def add_option(self, name: str, value):
        self.options.append((name, str(value)))

    @property
    def vc_counts(self) -> Tuple[int, int, int]:
        valid = sum(1 for vc in self.vcs if vc.verdict == "valid")
        failed = sum(1 for vc in self.vcs if vc.verdict == "counterexample")
        unknown = sum(1 for vc in self.vcs if vc.verdict == "unknown")
        return valid, failed, unknown


def file_digest(file_path: str) -> str:
    digest = hashlib.sha256()
    with open(file_path, 'rb') as handle:
        for chunk in iter(lambda: handle.read(65536), b''):
            digest.update(chunk)
    return digest.hexdigest()


# =============================================================================
# RENDERING
# =============================================================================

def render_summary(report: RunReport) -> str:
    """Human-readable run summary, framed like the rest of the tool's output."""
    lines = ["", "=" * 60, "SUMMARY", "=" * 60, f"Command: {report.subcommand}"]
    for path, _ in report.inputs:
        lines.append(f"Input: {path}")
    if report.vcs:
        valid, failed, unknown = report.vc_counts
        lines.append(f"VCs: {len(report.vcs)} ({valid} valid, {failed} counterexample, {unknown} unknown)")
        for vc in report.vcs:
            if vc.verdict != "valid":
                lines.append(f"  [{vc.verdict.upper()}] #{vc.id} {vc.name}: {vc.detail}")
    for result in report.adequacy:
        text = f"Adequacy ({result.product}, {result.mode}): {result.verdict}"
        lines.append(f"{text} after {result.pairs_checked} trace pairs")
        if result.detail:
            lines.append(f"  {result.detail}")
    for name, outcome in report.checks:
        lines.append(f"{name}: {outcome}")
    if report.proof is not None:
        proof = report.proof
        lines.append(f"Proof: {proof.status} ({proof.nodes} nodes checked)")
        if proof.error:
            lines.append(f"  at {proof.error_path}: {proof.error}")
        for assumption in proof.assumptions:
            lines.append(f"  assuming {assumption}")
    lines.extend(report.notes)
    lines.append(f"Time: {report.duration:.2f}s")
    lines.append(f"Exit code: {report.exit_code}")
    return "\n".join(lines)


def _field(key: str, value) -> str:
    text = str(value).replace("\n", "\\n")
    return f"{key}: {text}"


def render_structured(report: RunReport) -> str:
    """Stable `key: value` blocks separated by blank lines."""
    blocks: List[List[str]] = [[
        _field("format", REPORT_FORMAT),
        _field("subcommand", report.subcommand),
        _field("exit_code", report.exit_code),
    ]]
    for path, digest in report.inputs:
        blocks.append([_field("input", path), _field("sha256", digest)])
    if report.options:
        blocks.append([_field(f"option.{name}", value) for name, value in report.options])
    if report.vcs:
        valid, failed, unknown = report.vc_counts
        blocks.append([_field("vcs.total", len(report.vcs)), _field("vcs.valid", valid),
                       _field("vcs.counterexample", failed), _field("vcs.unknown", unknown)])
    for vc in report.vcs:
        block = [_field("vc", vc.id), _field("name", vc.name), _field("kind", vc.kind),
                 _field("verdict", vc.verdict)]
        if vc.detail:
            block.append(_field("detail", vc.detail))
        blocks.append(block)
    for result in report.adequacy:
        block = [_field("adequacy", result.product), _field("mode", result.mode),
                 _field("verdict", result.verdict), _field("pairs_checked", result.pairs_checked)]
        if result.detail:
            block.append(_field("detail", result.detail))
        blocks.append(block)
    for name, outcome in report.checks:
        blocks.append([_field("check", name), _field("outcome", outcome)])
    if report.proof is not None:
        proof = report.proof
        block = [_field("proof", proof.status), _field("nodes", proof.nodes),
                 _field("rules", " ".join(proof.rules))]
        if proof.error:
            block += [_field("error_path", proof.error_path), _field("error", proof.error)]
        block += [_field("assumption", assumption) for assumption in proof.assumptions]
        blocks.append(block)
    for note in report.notes:
        blocks.append([_field("note", note)])
    return "\n\n".join("\n".join(block) for block in blocks) + "\n"


def write_report(report: RunReport, file_path: str) -> Path:
    path = Path(file_path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_structured(report), encoding='utf-8')
    logger.debug("report written to %s", path)
    return path
