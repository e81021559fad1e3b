#!/usr/bin/env python3
"""
Relational Verifier

Checks unary and relational specs of while-language programs with the
inductive assertion method over product automata, checks proof trees in
relational Hoare logic, and emits SMT-LIB for the generated verification
conditions. Entailments are decided by exhaustive enumeration over a
bounded integer domain.

Usage:
    python main.py verify-unary <prog> <spec> [options]
    python main.py verify-rel <prog> <prog2> <rspec> [options]
    python main.py adequacy <prog> <prog2> [options]
    python main.py check-proof <proof> [options]
    python main.py emit-smt <prog> [<prog2>] <spec> [options]
    python main.py run <prog> [--init x=3,y=1]
    python main.py --help

Exit codes: 0 all valid / proved, 1 counterexample, unknown, witness or
proof error, 2 usage, parse, well-formedness, annotation or I/O error.
"""
import argparse
import logging
import sys
import time
from typing import Dict, List, Optional, Tuple

from automaton import build_automaton, unary_vcs
from derivations import load_derivation, node_path
from discharge import Domain, DEFAULT_BUDGET, discharge_all
from errors import AnnotationError, ParseError, UnknownResult, WellFormednessError
from product import (
    AdequacyMode, AdequacyVerdict, Alignment, ProductKind, check_adequacy_bounded,
    check_rel_non_stuck, construct_product, relational_vcs,
)
from program_parser import InputLoader
from proofcheck import check_derivation
from report import AdequacyResult, ProofResult, RunReport, VCResult, render_summary, write_report
from semantics import Limits, Store, dump_trace, run_bounded
from smtlib import write_smt_files
from syntax_ops import all_vars

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


# =============================================================================
# FLAG PARSING
# =============================================================================

def parse_range(text: str) -> Tuple[int, int]:
    """`lo..hi` with optional signs."""
    lo, sep, hi = text.partition('..')
    if not sep:
        raise argparse.ArgumentTypeError(f"expected lo..hi, got {text!r}")
    try:
        lo_value, hi_value = int(lo), int(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integer bounds, got {text!r}") from None
    if lo_value > hi_value:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return lo_value, hi_value


def parse_var_range(text: str) -> Tuple[str, Tuple[int, int]]:
    name, sep, bounds = text.partition('=')
    if not sep or not name.strip():
        raise argparse.ArgumentTypeError(f"expected name=lo..hi, got {text!r}")
    return name.strip(), parse_range(bounds)


def parse_init(text: str) -> Dict[str, int]:
    values: Dict[str, int] = {}
    for item in filter(None, (part.strip() for part in text.split(','))):
        name, sep, value = item.partition('=')
        try:
            values[name.strip()] = int(value)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected x=value, got {item!r}") from None
        if not sep:
            raise argparse.ArgumentTypeError(f"expected x=value, got {item!r}")
    return values


def build_domain(args) -> Domain:
    lo, hi = args.domain
    limits = Limits(*args.int_range) if args.int_range else Limits()
    overrides = dict(args.var_domain or [])
    return Domain(lo, hi, overrides, limits, args.budget, args.fuel)


def load_alignment(loader: InputLoader, args, report: RunReport) -> Optional[Alignment]:
    if not args.align:
        return None
    report.add_input(args.align)
    return Alignment(loader.alignment(args.align))


def record_options(report: RunReport, args, names: List[str]):
    for name in names:
        value = getattr(args, name, None)
        if value is None or value is False:
            continue
        if name in ('domain', 'int_range'):
            value = f"{value[0]}..{value[1]}"
        elif name == 'var_domain':
            value = " ".join(f"{var}={lo}..{hi}" for var, (lo, hi) in value)
        report.add_option(name.replace('_', '-'), value)


def add_verdicts(report: RunReport, results) -> bool:
    """Record discharge results; True when every VC is valid."""
    for vc, verdict in results:
        detail = "" if verdict.is_valid else verdict.describe()
        report.vcs.append(VCResult(vc.id, vc.name, vc.kind.value, verdict.kind.value, detail))
    return all(verdict.is_valid for _, verdict in results)


# =============================================================================
# COMMANDS
# =============================================================================

def verify_unary(args, report: RunReport) -> int:
    loader = InputLoader()
    for path in (args.program, args.spec):
        report.add_input(path)
    program = loader.program(args.program)
    spec = loader.spec(args.spec)
    anno = {}
    if args.anno:
        report.add_input(args.anno)
        anno = loader.annotation(args.anno)
    d = build_domain(args)
    record_options(report, args, ['domain', 'var_domain', 'int_range', 'fuel', 'budget', 'route',
                                  'non_stuck', 'cut_branches'])

    automaton = build_automaton(program, args.cut_branches)
    print(f"Cutpoints: {', '.join(automaton.cutpoints)}")
    print(f"Segments: {len(automaton.segments)}")
    vcs = unary_vcs(automaton, anno, spec, args.non_stuck, d.limits)
    print(f"Discharging {len(vcs)} VC(s) over {d.lo}..{d.hi}")
    ok = add_verdicts(report, discharge_all(vcs, d, args.route, args.jobs))
    return EXIT_OK if ok else EXIT_FAILED


def _product(loader: InputLoader, args, report: RunReport):
    left = loader.program(args.program)
    right = loader.program(args.program2)
    alignment = load_alignment(loader, args, report)
    kind = ProductKind(args.product)
    a = build_automaton(left, args.cut_branches)
    a2 = build_automaton(right, args.cut_branches)
    p = construct_product(kind, a, a2, alignment)
    print(f"Product {kind.value}: {len(p.reachable)} reachable pairs, {len(p.edges)} transitions")
    return left, right, p


def verify_rel(args, report: RunReport) -> int:
    loader = InputLoader()
    for path in (args.program, args.program2, args.rspec):
        report.add_input(path)
    rspec = loader.rel_spec(args.rspec)
    ranno = {}
    if args.ranno:
        report.add_input(args.ranno)
        ranno = loader.rel_annotation(args.ranno)
    d = build_domain(args)
    record_options(report, args, ['product', 'domain', 'var_domain', 'int_range', 'fuel', 'budget',
                                  'route', 'rel_non_stuck', 'cut_branches'])
    left, right, p = _product(loader, args, report)

    vcs = relational_vcs(p, ranno, rspec)
    print(f"Discharging {len(vcs)} VC(s) over {d.lo}..{d.hi}")
    ok = add_verdicts(report, discharge_all(vcs, d, args.route, args.jobs))
    if args.rel_non_stuck:
        check = check_rel_non_stuck(left, right, rspec.pre, d)
        outcome = "holds" if check.holds else f"violated: {check.violation.describe()}"
        report.checks.append(("rel-non-stuck", f"{outcome} ({check.pairs_checked} pairs)"))
        ok = ok and check.holds
    return EXIT_OK if ok else EXIT_FAILED


def adequacy(args, report: RunReport) -> int:
    loader = InputLoader()
    for path in (args.program, args.program2):
        report.add_input(path)
    d = build_domain(args)
    record_options(report, args, ['product', 'mode', 'domain', 'var_domain', 'fuel', 'cut_branches'])
    _, _, p = _product(loader, args, report)

    mode = AdequacyMode(args.mode)
    result = check_adequacy_bounded(p, d, args.fuel, mode)
    detail = ""
    if result.verdict is not AdequacyVerdict.ADEQUATE:
        left = " ".join(state.label for state in result.left_trace)
        right = " ".join(state.label for state in result.right_trace)
        detail = f"left trace: {left}; right trace: {right}"
        if args.trace:
            print("Left trace:")
            for state in result.left_trace:
                print(f"  {state}")
            print("Right trace:")
            for state in result.right_trace:
                print(f"  {state}")
    report.adequacy.append(AdequacyResult(p.kind.value, mode.value, result.verdict.value,
                                          result.pairs_checked, detail))
    return EXIT_OK if result.passed else EXIT_FAILED


def check_proof(args, report: RunReport) -> int:
    report.add_input(args.proof)
    derivation = load_derivation(args.proof)
    d = build_domain(args)
    record_options(report, args, ['domain', 'var_domain', 'int_range', 'fuel', 'budget'])

    result = check_derivation(derivation, d)
    proof = ProofResult(result.status, result.nodes_checked, result.rules,
                        assumptions=list(result.assumptions))
    if result.error is not None:
        proof.error_path = node_path(result.error.path)
        proof.error = f"({result.error.rule}) {result.error.reason}"
        if result.error.counterexample:
            proof.error += f"; {result.error.counterexample}"
    report.proof = proof
    return EXIT_OK if result.ok else EXIT_FAILED


def emit_smt(args, report: RunReport) -> int:
    loader = InputLoader()
    for path in args.files:
        report.add_input(path)
    d = build_domain(args)
    record_options(report, args, ['product', 'int_range', 'cut_branches', 'out_dir'])
    if len(args.files) == 2:
        program = loader.program(args.files[0])
        spec = loader.spec(args.files[1])
        anno = {}
        if args.anno:
            report.add_input(args.anno)
            anno = loader.annotation(args.anno)
        vcs = unary_vcs(build_automaton(program, args.cut_branches), anno, spec, args.non_stuck,
                        d.limits)
    elif len(args.files) == 3:
        args.program, args.program2 = args.files[0], args.files[1]
        rspec = loader.rel_spec(args.files[2])
        ranno = {}
        if args.ranno:
            report.add_input(args.ranno)
            ranno = loader.rel_annotation(args.ranno)
        _, _, p = _product(loader, args, report)
        vcs = relational_vcs(p, ranno, rspec)
    else:
        raise WellFormednessError("emit-smt takes <prog> <spec> or <prog> <prog2> <rspec>")
    written = write_smt_files(vcs, args.out_dir, d.limits)
    for path in written:
        print(f"  {path}")
    report.notes.append(f"SMT-LIB files: {len(written)} in {args.out_dir}")
    return EXIT_OK


def run(args, report: RunReport) -> int:
    loader = InputLoader()
    report.add_input(args.program)
    program = loader.program(args.program)
    d = build_domain(args)
    values = {name: 0 for name in all_vars(program)}
    values.update(args.init or {})
    start = Store(values)
    outcomes = run_bounded(program, start, args.fuel, d.step_limits)
    print(f"Initial store: {start}")
    for number, outcome in enumerate(outcomes, start=1):
        line = f"Run {number}: {outcome.kind.value}"
        if outcome.terminated:
            line += f" with {outcome.final_store}"
        elif outcome.reason:
            line += f" ({outcome.reason})"
        print(line)
        if args.trace:
            print(dump_trace(outcome.trace))
    terminated = sum(1 for o in outcomes if o.terminated)
    report.checks.append(("runs", f"{len(outcomes)} ({terminated} terminated)"))
    return EXIT_OK


COMMANDS = {
    'verify-unary': verify_unary,
    'verify-rel': verify_rel,
    'adequacy': adequacy,
    'check-proof': check_proof,
    'emit-smt': emit_smt,
    'run': run,
}


# =============================================================================
# ARGUMENT PARSER
# =============================================================================

def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--domain', type=parse_range, default=(0, 4), metavar='LO..HI',
                        help='Enumeration domain for every variable (default: 0..4)')
    common.add_argument('--var-domain', type=parse_var_range, action='append', metavar='X=LO..HI',
                        help='Domain override for one variable (repeatable)')
    common.add_argument('--int-range', type=parse_range, metavar='LO..HI',
                        help='Bounded integer range of program values (default: -1024..1023)')
    common.add_argument('--fuel', type=int, default=1000, metavar='N',
                        help='Step bound for runs and explorations (default: 1000)')
    common.add_argument('--budget', type=int, default=DEFAULT_BUDGET, metavar='N',
                        help=f'Maximum enumerated store tuples per VC (default: {DEFAULT_BUDGET})')
    common.add_argument('--report', metavar='PATH', help='Write a structured report to PATH')
    common.add_argument('-v', '--verbose', action='store_true', help='Enable verbose output')
    return common


def _product_flags() -> argparse.ArgumentParser:
    flags = argparse.ArgumentParser(add_help=False)
    flags.add_argument('--product', choices=[kind.value for kind in ProductKind],
                       default=ProductKind.EAGER_LOCKSTEP.value, help='Product construction')
    flags.add_argument('--align', metavar='FILE', help='Alignment conditions for conditional products')
    flags.add_argument('--cut-branches', action='store_true',
                       help='Also place cutpoints at branch joins')
    return flags


def _discharge_flags() -> argparse.ArgumentParser:
    flags = argparse.ArgumentParser(add_help=False)
    flags.add_argument('--route', choices=['exec', 'wp'], default='exec',
                       help='Discharge route: run the segment or evaluate its wp (default: exec)')
    flags.add_argument('--jobs', type=int, default=1, metavar='N', help='Parallel discharge workers')
    return flags


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Relational Verifier",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s verify-unary p0.whl fact.spec --anno p0.anno          Unary IAM check
  %(prog)s verify-rel p0.whl p1.whl maj.rspec --product only-lockstep \\
      --ranno inv1.rann --domain 5..8                            Relational check
  %(prog)s adequacy p0.whl p1.whl --product sequenced --mode weak
  %(prog)s check-proof maj.rpf --domain 4..8                     Check a proof tree
  %(prog)s emit-smt p0.whl fact.spec --anno p0.anno --out-dir smt
  %(prog)s run p0.whl --init x=5 --trace                         Run the interpreter
        """
    )
    common, product, discharge = _common_flags(), _product_flags(), _discharge_flags()
    subparsers = parser.add_subparsers(dest='command', help='Commands')

    unary = subparsers.add_parser('verify-unary', parents=[common, discharge],
                                  help='Verify a unary spec with cutpoint annotations')
    unary.add_argument('program', help='Program file (.whl)')
    unary.add_argument('spec', help='Spec file with pre: and post:')
    unary.add_argument('--anno', metavar='FILE', help='Cutpoint annotation file')
    unary.add_argument('--non-stuck', action='store_true', help='Also generate non-stuck VCs')
    unary.add_argument('--cut-branches', action='store_true',
                       help='Also place cutpoints at branch joins')

    rel = subparsers.add_parser('verify-rel', parents=[common, product, discharge],
                                help='Verify a relational spec over a product')
    rel.add_argument('program', help='Left program file')
    rel.add_argument('program2', help='Right program file')
    rel.add_argument('rspec', help='Relational spec file')
    rel.add_argument('--ranno', metavar='FILE', help='Relational annotation of cutpoint pairs')
    rel.add_argument('--rel-non-stuck', action='store_true',
                     help='Also check that no run from pre-related stores gets stuck')

    adequate = subparsers.add_parser('adequacy', parents=[common, product],
                                     help='Bounded adequacy check of a product')
    adequate.add_argument('program', help='Left program file')
    adequate.add_argument('program2', help='Right program file')
    adequate.add_argument('--mode', choices=[mode.value for mode in AdequacyMode],
                          default=AdequacyMode.ADEQUATE.value, help='Adequacy notion to check')
    adequate.add_argument('--trace', action='store_true', help='Print witness traces')

    proof = subparsers.add_parser('check-proof', parents=[common], help='Check a derivation file')
    proof.add_argument('proof', help='Proof file (.rpf)')

    smt = subparsers.add_parser('emit-smt', parents=[common, product],
                                help='Write SMT-LIB files for the generated VCs')
    smt.add_argument('files', nargs='+', help='<prog> <spec> or <prog> <prog2> <rspec>')
    smt.add_argument('--anno', metavar='FILE', help='Cutpoint annotation (unary)')
    smt.add_argument('--ranno', metavar='FILE', help='Relational annotation')
    smt.add_argument('--non-stuck', action='store_true', help='Also emit non-stuck VCs')
    smt.add_argument('--out-dir', default='smt', metavar='DIR', help='Output directory (default: smt)')

    interp = subparsers.add_parser('run', parents=[common], help='Run a program on one store')
    interp.add_argument('program', help='Program file (.whl)')
    interp.add_argument('--init', type=parse_init, metavar='X=V,...',
                        help='Initial values (others start at 0)')
    interp.add_argument('--trace', action='store_true', help='Print every configuration')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE

    if args.command is None:
        parser.print_help()
        return EXIT_USAGE

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format='%(levelname)s %(name)s: %(message)s')

    report = RunReport(args.command)
    started = time.perf_counter()
    try:
        report.exit_code = COMMANDS[args.command](args, report)
    except (ParseError, WellFormednessError, AnnotationError, OSError, ValueError) as e:
        print(f"Error: {e}", file=sys.stderr)
        if args.verbose:
            import traceback
            traceback.print_exc()
        return EXIT_USAGE
    except UnknownResult as e:
        print(f"Unknown: {e}", file=sys.stderr)
        report.notes.append(f"unknown: {e}")
        report.exit_code = EXIT_FAILED

    report.duration = time.perf_counter() - started
    print(render_summary(report))
    if args.report:
        write_report(report, args.report)
        print(f"\nReport: {args.report}")
    return report.exit_code


if __name__ == '__main__':
    sys.exit(main())
