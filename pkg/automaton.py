"""
Cutpoint automata: control-flow graph construction, segment enumeration
and unary verification conditions.

Cutpoints are init, fin and one label per loop header (L1, L2, ... in
textual order). With ``cut_branches`` every if/choice entry also becomes
a cutpoint (B1, B2, ...).
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, List, Mapping, Optional, Set, Tuple

from errors import AnnotationError, WellFormednessError
from models import (
    IntLit, Var, BinOp, IntOp, Cmp, And, Or, Not, Implies,
    Skip, Assign, Havoc, Seq, If, While, Choice, VarBlock, CallSite,
    Guard, Segment, Spec, VC, VCKind, Command, TRUE,
)
from semantics import (
    INIT, FIN, Store, Limits, DEFAULT_LIMITS, exec_segment, segment_sticks,
)
from syntax_ops import all_vars, block_locals, fresh_name, formula_vars, int_vars, rename_var

logger = logging.getLogger(__name__)

_ZERO = IntLit(0)


@dataclass
class _Graph:
    """Raw control-flow graph; edges carry a path step or None for epsilon."""
    edges: List[Tuple[int, Optional[object], int]] = field(default_factory=list)
    labels: Dict[int, str] = field(default_factory=dict)
    loop_guards: Dict[str, object] = field(default_factory=dict)
    node_count: int = 2
    loops: int = 0
    branches: int = 0

    def node(self) -> int:
        self.node_count += 1
        return self.node_count - 1


@dataclass
class Automaton:
    """Cutpoint automaton of one command."""
    command: Command
    cutpoints: Tuple[str, ...]
    segments: Tuple[Segment, ...]
    universe: Tuple[str, ...]
    loop_guards: Dict[str, object]
    locals: Tuple[str, ...] = ()

    def outgoing(self, label: str) -> List[Segment]:
        return [seg for seg in self.segments if seg.source == label]

    def incoming(self, label: str) -> List[Segment]:
        return [seg for seg in self.segments if seg.target == label]

    def segment(self, name: str) -> Segment:
        for seg in self.segments:
            if seg.name == name:
                return seg
        raise KeyError(name)


@dataclass(frozen=True)
class State:
    """Automaton-level configuration: a cutpoint label and a store."""
    label: str
    store: Store

    def __str__(self) -> str:
        return f"{self.label} | {self.store}"


# =============================================================================
# CONSTRUCTION
# =============================================================================

def _alpha_rename_locals(c: Command, avoid: Set[str]) -> Tuple[Command, List[str]]:
    """Give every var-block local a program-wide unique name."""
    introduced: List[str] = []

    def walk(node: Command) -> Command:
        if isinstance(node, VarBlock):
            body = walk(node.body)
            renamed = []
            for name in node.locals:
                new = fresh_name(f"{name}_", avoid)
                avoid.add(new)
                introduced.append(new)
                body = rename_var(body, name, new)
                renamed.append(new)
            return VarBlock(tuple(renamed), body)
        if isinstance(node, Seq):
            return Seq(walk(node.first), walk(node.second))
        if isinstance(node, Choice):
            return Choice(walk(node.left), walk(node.right))
        if isinstance(node, If):
            return If(node.guard, walk(node.then), walk(node.orelse))
        if isinstance(node, While):
            return While(node.guard, walk(node.body))
        return node

    return walk(c), introduced


def _emit(g: _Graph, c: Command, entry: int, exit_: int, cut_branches: bool):
    if isinstance(c, Skip):
        g.edges.append((entry, None, exit_))
    elif isinstance(c, (Assign, Havoc)):
        g.edges.append((entry, c, exit_))
    elif isinstance(c, Seq):
        middle = g.node()
        _emit(g, c.first, entry, middle, cut_branches)
        _emit(g, c.second, middle, exit_, cut_branches)
    elif isinstance(c, (If, Choice)):
        if cut_branches and entry not in g.labels:
            g.branches += 1
            g.labels[entry] = f"B{g.branches}"
        first, second = g.node(), g.node()
        if isinstance(c, If):
            g.edges.append((entry, Guard(c.guard, True), first))
            g.edges.append((entry, Guard(c.guard, False), second))
            _emit(g, c.then, first, exit_, cut_branches)
            _emit(g, c.orelse, second, exit_, cut_branches)
        else:
            g.edges.append((entry, None, first))
            g.edges.append((entry, None, second))
            _emit(g, c.left, first, exit_, cut_branches)
            _emit(g, c.right, second, exit_, cut_branches)
    elif isinstance(c, While):
        header = g.node()
        g.loops += 1
        label = f"L{g.loops}"
        g.labels[header] = label
        g.loop_guards[label] = c.guard
        body_entry = g.node()
        g.edges.append((entry, None, header))
        g.edges.append((header, Guard(c.guard, True), body_entry))
        g.edges.append((header, Guard(c.guard, False), exit_))
        _emit(g, c.body, body_entry, header, cut_branches)
    elif isinstance(c, VarBlock):
        current = entry
        for name in c.locals:
            following = g.node()
            g.edges.append((current, Assign(name, _ZERO), following))
            current = following
        _emit(g, c.body, current, exit_, cut_branches)
    elif isinstance(c, CallSite):
        raise WellFormednessError(f"inline call sites before building an automaton: {c}")
    else:
        raise TypeError(f"not a command: {c!r}")


def _segments_from(g: _Graph, start: int, outgoing: Mapping[int, list]) -> List[Tuple[int, tuple]]:
    found: List[Tuple[int, tuple]] = []

    def walk(node: int, path: tuple):
        for step, target in outgoing.get(node, []):
            extended = path + ((step,) if step is not None else ())
            if target in g.labels:
                found.append((target, extended))
            else:
                walk(target, extended)

    walk(start, ())
    return found


def build_automaton(c: Command, cut_branches: bool = False) -> Automaton:
    """Cutpoint automaton of c; call sites must already be inlined."""
    avoid = set(all_vars(c)) | block_locals(c)
    renamed, introduced = _alpha_rename_locals(c, avoid)

    g = _Graph()
    g.labels[0] = INIT
    g.labels[1] = FIN
    _emit(g, renamed, 0, 1, cut_branches)

    outgoing: Dict[int, list] = {}
    for source, step, target in g.edges:
        outgoing.setdefault(source, []).append((step, target))

    order = {label: index for index, label in enumerate(_label_order(g.labels.values()))}
    raw: List[Tuple[str, str, tuple]] = []
    for node, label in sorted(g.labels.items(), key=lambda item: order[item[1]]):
        if label == FIN:
            continue
        for target, path in _segments_from(g, node, outgoing):
            raw.append((label, g.labels[target], path))

    counts: Dict[Tuple[str, str], int] = {}
    for source, target, _ in raw:
        counts[(source, target)] = counts.get((source, target), 0) + 1
    seen: Dict[Tuple[str, str], int] = {}
    segments = []
    for source, target, path in raw:
        key = (source, target)
        index = 0
        if counts[key] > 1:
            seen[key] = seen.get(key, 0) + 1
            index = seen[key]
        segments.append(Segment(source, target, path, index))

    cutpoints = tuple(sorted(g.labels.values(), key=lambda label: order[label]))
    universe = tuple(sorted(set(all_vars(c)) | set(introduced)))
    logger.debug("automaton: %d cutpoints, %d segments", len(cutpoints), len(segments))
    return Automaton(renamed, cutpoints, tuple(segments), universe, dict(g.loop_guards),
                     tuple(introduced))


def _label_order(labels) -> List[str]:
    def key(label: str):
        if label == INIT:
            return (0, 0)
        if label == FIN:
            return (3, 0)
        return (1 if label.startswith("L") else 2, int(label[1:]))
    return sorted(labels, key=key)


# =============================================================================
# ANALYSIS
# =============================================================================

def live_in(c: Command, live_out: FrozenSet[str]) -> FrozenSet[str]:
    """Variables whose initial value can influence c's behaviour or live_out."""
    if isinstance(c, Skip):
        return live_out
    if isinstance(c, Assign):
        return (live_out - {c.target}) | frozenset(int_vars(c.rhs))
    if isinstance(c, Havoc):
        return live_out - {c.target}
    if isinstance(c, Seq):
        return live_in(c.first, live_in(c.second, live_out))
    if isinstance(c, If):
        return (frozenset(formula_vars(c.guard)) | live_in(c.then, live_out)
                | live_in(c.orelse, live_out))
    if isinstance(c, Choice):
        return live_in(c.left, live_out) | live_in(c.right, live_out)
    if isinstance(c, While):
        live = live_out | frozenset(formula_vars(c.guard))
        while True:
            updated = live | live_in(c.body, live)
            if updated == live:
                return live
            live = updated
    if isinstance(c, VarBlock):
        hidden = frozenset(c.locals)
        return (live_in(c.body, live_out - hidden) - hidden) | (live_out & hidden)
    if isinstance(c, CallSite):
        return (live_out - {c.result}) | frozenset(c.args)
    raise TypeError(f"not a command: {c!r}")


def relevant_inputs(c: Command) -> FrozenSet[str]:
    """Upward-exposed reads: the only initial values a run depends on."""
    return live_in(c, frozenset(all_vars(c)))


def _may_stick(e, limits: Limits) -> bool:
    """Only variables and in-range literals are sure to fit."""
    if isinstance(e, Var):
        return False
    return not (isinstance(e, IntLit) and limits.contains(e.value))


def _guard_may_stick(p) -> bool:
    if isinstance(p, Cmp):
        return _has_division(p.left) or _has_division(p.right)
    if isinstance(p, (And, Or, Implies)):
        return _guard_may_stick(p.left) or _guard_may_stick(p.right)
    if isinstance(p, Not):
        return _guard_may_stick(p.operand)
    return False


def _has_division(e) -> bool:
    if isinstance(e, BinOp):
        return e.op in (IntOp.DIV, IntOp.MOD) or _has_division(e.left) or _has_division(e.right)
    return False


def segment_may_stick(seg: Segment, limits: Limits = DEFAULT_LIMITS) -> bool:
    """Syntactic check: computed or out-of-range values can overflow, divisions can fail."""
    for item in seg.path:
        if isinstance(item, Assign) and _may_stick(item.rhs, limits):
            return True
        if isinstance(item, Guard) and _guard_may_stick(item.cond):
            return True
    return False


# =============================================================================
# VERIFICATION CONDITIONS
# =============================================================================

def resolve_annotation(a: Automaton, anno: Mapping[str, object], spec: Spec) -> Dict[str, object]:
    """Total annotation over a's cutpoints, with init/fin pinned to the spec."""
    resolved: Dict[str, object] = {}
    for label in a.cutpoints:
        if label == INIT:
            resolved[label] = spec.pre
        elif label == FIN:
            resolved[label] = spec.post
        elif label in anno:
            resolved[label] = anno[label]
        else:
            raise AnnotationError(f"missing annotation for cutpoint {label}")
    for label in (INIT, FIN):
        if label in anno and anno[label] != resolved[label]:
            logger.warning("annotation for %s replaced by the spec %s", label,
                           "precondition" if label == INIT else "postcondition")
    for label in anno:
        if label not in a.cutpoints:
            logger.warning("annotation for unknown cutpoint %s ignored", label)
    return resolved


def unary_vcs(a: Automaton, anno: Mapping[str, object], spec: Spec,
              non_stuck: bool = False, limits: Limits = DEFAULT_LIMITS) -> List[VC]:
    """One VC per segment, plus non-stuck side VCs when requested."""
    resolved = resolve_annotation(a, anno, spec)
    vcs: List[VC] = []
    for seg in a.segments:
        vcs.append(VC(len(vcs) + 1, seg.name, VCKind.SEGMENT, seg.source, seg.target,
                      resolved[seg.source], seg, resolved[seg.target]))
    if non_stuck:
        for seg in a.segments:
            if segment_may_stick(seg, limits):
                vcs.append(VC(len(vcs) + 1, f"non-stuck {seg.name}", VCKind.NON_STUCK,
                              seg.source, seg.target, resolved[seg.source], seg, TRUE))
    logger.debug("generated %d unary VCs", len(vcs))
    return vcs


# =============================================================================
# AUTOMATON-LEVEL RUNS
# =============================================================================

class RunEnd(Enum):
    TERMINATED = "terminated"
    STUCK = "stuck"
    CUTOFF = "cutoff"


def successors(a: Automaton, state: State, limits: Limits = DEFAULT_LIMITS) -> List[Tuple[Segment, State]]:
    result = []
    for seg in a.outgoing(state.label):
        for store in exec_segment(seg, state.store, limits):
            result.append((seg, State(seg.target, store)))
    return result


def automaton_runs(a: Automaton, store: Store, fuel: int,
                   limits: Limits = DEFAULT_LIMITS) -> List[Tuple[Tuple[State, ...], RunEnd]]:
    """Maximal automaton traces of at most `fuel` segment steps from init."""
    runs = []
    stack = [(State(INIT, store),)]
    while stack:
        trace = stack.pop()
        last = trace[-1]
        if last.label == FIN:
            runs.append((trace, RunEnd.TERMINATED))
            continue
        following = successors(a, last, limits)
        if not following:
            runs.append((trace, RunEnd.STUCK))
        elif len(trace) - 1 >= fuel:
            runs.append((trace, RunEnd.CUTOFF))
        else:
            for _, state in reversed(following):
                stack.append(trace + (state,))
    return runs


def stuck_reason(a: Automaton, state: State, limits: Limits = DEFAULT_LIMITS) -> Optional[str]:
    """Why some outgoing segment sticks from this state, if one does."""
    for seg in a.outgoing(state.label):
        reason = segment_sticks(seg, state.store, limits)
        if reason:
            return f"{seg.name}: {reason}"
    return None

