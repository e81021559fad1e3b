"""
Pre-products of two cutpoint automata, relational verification conditions,
product exploration, bounded adequacy checks and direct relational checks.

A product state pairs a left automaton state with a right one. Each
product transition is joint (both sides take a segment), left-only or
right-only (the other side stays put); which shapes are enabled at a
cutpoint pair is fixed by the product kind and, for the conditional
kinds, by alignment conditions evaluated on the store pair.
"""
import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from automaton import (
    Automaton, RunEnd, State, automaton_runs, relevant_inputs,
)
from discharge import Domain, enumerate_stores, eval_rel
from errors import AnnotationError, WellFormednessError
from models import (
    Cmp, CmpOp, IntLit, Var, And, Not, Left, Right,
    Segment, SegmentPair, RelSpec, VC, VCKind, Command, TRUE, FALSE, conj, disj,
)
from semantics import INIT, FIN, Store, OutcomeKind, exec_segment, run_bounded
from syntax_ops import all_vars, rel_vars

logger = logging.getLogger(__name__)

Pair = Tuple[str, str]


class ProductKind(Enum):
    ONLY_LOCKSTEP = "only-lockstep"
    EAGER_LOCKSTEP = "eager-lockstep"
    INTERLEAVED = "interleaved"
    MAXIMAL = "maximal"
    SEQUENCED = "sequenced"
    SIMPLE_CONDITION = "simple-cond"
    THREE_CONDITION = "3cond"


class Shape(Enum):
    JOINT = "joint"
    LEFT = "left"
    RIGHT = "right"


def format_pair(pair: Pair) -> str:
    return f"({pair[0]},{pair[1]})"


@dataclass
class Alignment:
    """Alignment conditions by letter (l, r, b or ac), optionally guarded by a cutpoint pair."""
    entries: Dict[str, Dict[Optional[Pair], object]] = field(default_factory=dict)

    def condition(self, letter: str, pair: Pair):
        table = self.entries.get(letter, {})
        if pair in table:
            return table[pair]
        return table.get(None, FALSE)

    def formulas(self) -> Iterable:
        for table in self.entries.values():
            yield from table.values()


@dataclass(frozen=True)
class ProductEdge:
    """Product transition between cutpoint pairs, enabled when its condition holds."""
    shape: Shape
    source: Pair
    target: Pair
    left: Optional[Segment]
    right: Optional[Segment]
    condition: object = TRUE

    @property
    def payload(self) -> SegmentPair:
        return SegmentPair(self.left, self.right)

    @property
    def moves_left(self) -> bool:
        return self.shape is not Shape.RIGHT

    @property
    def moves_right(self) -> bool:
        return self.shape is not Shape.LEFT


@dataclass
class PreProduct:
    left: Automaton
    right: Automaton
    kind: ProductKind
    alignment: Optional[Alignment]
    edges: Tuple[ProductEdge, ...]
    reachable: Tuple[Pair, ...]

    def outgoing(self, pair: Pair) -> List[ProductEdge]:
        return [edge for edge in self.edges if edge.source == pair]

    @property
    def entry(self) -> Pair:
        return (INIT, INIT)

    @property
    def exit(self) -> Pair:
        return (FIN, FIN)


@dataclass(frozen=True)
class ProductState:
    left: State
    right: State

    @property
    def pair(self) -> Pair:
        return (self.left.label, self.right.label)

    def __str__(self) -> str:
        return f"{format_pair(self.pair)} | {self.left.store} | {self.right.store}"


# =============================================================================
# CONSTRUCTION
# =============================================================================

def _negate(p):
    if p == TRUE:
        return FALSE
    if p == FALSE:
        return TRUE
    return Not(p)


def shape_conditions(kind: ProductKind, alignment: Optional[Alignment], pair: Pair) -> List[Tuple[Shape, object]]:
    """Shapes a product of this kind may take at a cutpoint pair, with their conditions."""
    left, right = pair
    if kind is ProductKind.ONLY_LOCKSTEP:
        return [(Shape.JOINT, TRUE)]
    if kind is ProductKind.EAGER_LOCKSTEP:
        shapes = [(Shape.JOINT, TRUE)]
        if right == FIN:
            shapes.append((Shape.LEFT, TRUE))
        if left == FIN:
            shapes.append((Shape.RIGHT, TRUE))
        return shapes
    if kind is ProductKind.INTERLEAVED:
        return [(Shape.LEFT, TRUE), (Shape.RIGHT, TRUE)]
    if kind is ProductKind.MAXIMAL:
        return [(Shape.JOINT, TRUE), (Shape.LEFT, TRUE), (Shape.RIGHT, TRUE)]
    if kind is ProductKind.SEQUENCED:
        shapes = []
        if right == INIT:
            shapes.append((Shape.LEFT, TRUE))
        if left == FIN:
            shapes.append((Shape.RIGHT, TRUE))
        return shapes
    alignment = alignment or Alignment()
    if kind is ProductKind.SIMPLE_CONDITION:
        ac = alignment.condition('ac', pair)
        return [(Shape.JOINT, ac), (Shape.LEFT, _negate(ac)), (Shape.RIGHT, _negate(ac))]
    return [(Shape.LEFT, alignment.condition('l', pair)),
            (Shape.JOINT, alignment.condition('b', pair)),
            (Shape.RIGHT, alignment.condition('r', pair))]


def _check_alignment(kind: ProductKind, alignment: Optional[Alignment], a: Automaton, a2: Automaton):
    if kind not in (ProductKind.SIMPLE_CONDITION, ProductKind.THREE_CONDITION):
        return
    if alignment is None:
        raise WellFormednessError(f"product kind {kind.value} needs an alignment")
    letters = {'ac'} if kind is ProductKind.SIMPLE_CONDITION else {'l', 'r', 'b'}
    extra = set(alignment.entries) - letters
    if extra:
        raise WellFormednessError(
            f"alignment letters {sorted(extra)} do not apply to a {kind.value} product")
    for formula in alignment.formulas():
        left, right = rel_vars(formula)
        unknown = sorted((left - set(a.universe)) | (right - set(a2.universe)))
        if unknown:
            raise WellFormednessError(
                f"alignment condition {formula} mentions unknown variables: {', '.join(unknown)}")


def _edges_at(kind, alignment, a: Automaton, a2: Automaton, pair: Pair) -> List[ProductEdge]:
    edges = []
    for shape, condition in shape_conditions(kind, alignment, pair):
        if condition == FALSE:
            continue
        if shape is Shape.JOINT:
            for seg in a.outgoing(pair[0]):
                for seg2 in a2.outgoing(pair[1]):
                    edges.append(ProductEdge(shape, pair, (seg.target, seg2.target), seg, seg2, condition))
        elif shape is Shape.LEFT:
            for seg in a.outgoing(pair[0]):
                edges.append(ProductEdge(shape, pair, (seg.target, pair[1]), seg, None, condition))
        else:
            for seg2 in a2.outgoing(pair[1]):
                edges.append(ProductEdge(shape, pair, (pair[0], seg2.target), None, seg2, condition))
    return edges


def construct_product(kind: ProductKind, a: Automaton, a2: Automaton,
                      alignment: Optional[Alignment] = None) -> PreProduct:
    """Pre-product of a and a2 restricted to cutpoint pairs reachable from (init, init)."""
    _check_alignment(kind, alignment, a, a2)
    start = (INIT, INIT)
    order = [start]
    seen = {start}
    edges: List[ProductEdge] = []
    queue = deque([start])
    while queue:
        pair = queue.popleft()
        for edge in _edges_at(kind, alignment, a, a2, pair):
            edges.append(edge)
            if edge.target not in seen:
                seen.add(edge.target)
                order.append(edge.target)
                queue.append(edge.target)
    logger.debug("%s product: %d reachable pairs, %d edges", kind.value, len(order), len(edges))
    return PreProduct(a, a2, kind, alignment, tuple(edges), tuple(order))


# =============================================================================
# RELATIONAL VERIFICATION CONDITIONS
# =============================================================================

def resolve_rel_annotation(p: PreProduct, ranno: Mapping[Pair, object], rspec: RelSpec) -> Dict[Pair, object]:
    """Annotation of every reachable pair; entry and exit pinned to the spec."""
    resolved: Dict[Pair, object] = {}
    for pair in p.reachable:
        if pair == p.entry:
            resolved[pair] = rspec.pre
        elif pair == p.exit:
            resolved[pair] = rspec.post
        elif pair in ranno:
            resolved[pair] = ranno[pair]
        else:
            raise AnnotationError(f"missing annotation for reachable cutpoint pair {format_pair(pair)}")
    if p.exit not in resolved:
        resolved[p.exit] = rspec.post
    for pair, formula in ranno.items():
        if pair in (p.entry, p.exit) and formula != resolved[pair]:
            logger.warning("annotation for %s replaced by the spec", format_pair(pair))
        elif pair not in resolved:
            logger.warning("annotation for unreachable pair %s ignored", format_pair(pair))
    return resolved


def annotation_of(resolved: Mapping[Pair, object], pair: Pair):
    return resolved.get(pair, FALSE)


def _hypothesis(anno, condition):
    return anno if condition == TRUE else And(anno, condition)


def coverage_formula(p: PreProduct, pair: Pair):
    """Three-condition loop coverage: b with agreeing guards, or an enabled one-sided step continues its loop."""
    e = p.left.loop_guards[pair[0]]
    e2 = p.right.loop_guards[pair[1]]
    b_cond = p.alignment.condition('b', pair)
    l_cond = p.alignment.condition('l', pair)
    r_cond = p.alignment.condition('r', pair)
    options = [(b_cond, And(Left(e), Right(e2))),
               (b_cond, And(Left(Not(e)), Right(Not(e2)))),
               (l_cond, Left(e)),
               (r_cond, Right(e2))]
    return disj(*[guard if cond == TRUE else And(cond, guard)
                  for cond, guard in options if cond != FALSE])


def progress_formula(p: PreProduct, pair: Pair):
    """Disjunction of the conditions of the shapes that can still move at a pair."""
    left_moves = bool(p.left.outgoing(pair[0]))
    right_moves = bool(p.right.outgoing(pair[1]))
    options = []
    for shape, condition in shape_conditions(p.kind, p.alignment, pair):
        if condition == FALSE:
            continue
        if shape is Shape.JOINT and not (left_moves and right_moves):
            continue
        if shape is Shape.LEFT and not left_moves:
            continue
        if shape is Shape.RIGHT and not right_moves:
            continue
        options.append(condition)
    if TRUE in options or any(_negate(c) in options for c in options):
        return TRUE
    return disj(*options) if options else FALSE


def relational_vcs(p: PreProduct, ranno: Mapping[Pair, object], rspec: RelSpec) -> List[VC]:
    """One VC per product transition.

    Conditional products add a coverage VC at each three-condition loop pair
    and a progress VC at every other non-final pair whose conditions may stall.
    """
    resolved = resolve_rel_annotation(p, ranno, rspec)
    if p.exit not in p.reachable:
        logger.warning("exit pair %s is unreachable; no VC reaches the postcondition", format_pair(p.exit))
    vcs: List[VC] = []
    for edge in p.edges:
        name = f"{edge.shape.value} {format_pair(edge.source)}->{format_pair(edge.target)} [{edge.payload}]"
        vcs.append(VC(len(vcs) + 1, name, VCKind.PRODUCT, edge.source, edge.target,
                      _hypothesis(resolved[edge.source], edge.condition), edge.payload,
                      annotation_of(resolved, edge.target)))
    if p.kind in (ProductKind.SIMPLE_CONDITION, ProductKind.THREE_CONDITION):
        for pair in p.reachable:
            if pair == p.exit:
                continue
            if (p.kind is ProductKind.THREE_CONDITION
                    and pair[0] in p.left.loop_guards and pair[1] in p.right.loop_guards):
                vcs.append(VC(len(vcs) + 1, f"coverage {format_pair(pair)}", VCKind.COVERAGE,
                              pair, pair, resolved[pair], None, coverage_formula(p, pair)))
                continue
            progress = progress_formula(p, pair)
            if progress != TRUE:
                vcs.append(VC(len(vcs) + 1, f"progress {format_pair(pair)}", VCKind.PROGRESS,
                              pair, pair, resolved[pair], None, progress))
    logger.debug("generated %d relational VCs", len(vcs))
    return vcs


# =============================================================================
# PRODUCT STATES AND TRACES
# =============================================================================

class _EdgeIndex:
    def __init__(self, p: PreProduct):
        self.by_source: Dict[Pair, List[ProductEdge]] = {}
        for edge in p.edges:
            self.by_source.setdefault(edge.source, []).append(edge)


def product_successors(p: PreProduct, state: ProductState, d: Domain,
                       index: Optional[_EdgeIndex] = None) -> List[Tuple[ProductEdge, ProductState]]:
    """Enabled product transitions from a concrete product state."""
    index = index or _EdgeIndex(p)
    limits = d.step_limits
    result = []
    s, t = state.left.store, state.right.store
    for edge in index.by_source.get(state.pair, []):
        if edge.condition != TRUE and not eval_rel(edge.condition, s, t, d):
            continue
        lefts = exec_segment(edge.left, s, limits) if edge.left else [s]
        rights = exec_segment(edge.right, t, limits) if edge.right else [t]
        for after in lefts:
            for after2 in rights:
                result.append((edge, ProductState(State(edge.target[0], after),
                                                  State(edge.target[1], after2))))
    return result


def project(trace: Sequence[ProductState], side: str) -> Tuple[State, ...]:
    """Side projection of a product trace with stuttering steps removed."""
    states = [ps.left if side in ("L", "left") else ps.right for ps in trace]
    result: List[State] = []
    for state in states:
        if not result or result[-1] != state:
            result.append(state)
    return tuple(result)


def initial_stores(a: Automaton, names: Iterable[str], d: Domain) -> List[Store]:
    """Stores over a's universe: the given names enumerated, the rest fixed at the domain floor."""
    names = sorted(set(names) & set(a.universe))
    fixed = {name: d.lo for name in a.universe if name not in names}
    return [Store({**fixed, **varying.as_dict()}) for varying in enumerate_stores(names, d)]


def initial_pairs(p: PreProduct, pre, d: Domain, reduce: bool = False) -> List[Tuple[Store, Store]]:
    """Initial store pairs satisfying pre, enumerated over the universes (or relevant inputs)."""
    pre_left, pre_right = rel_vars(pre)
    if reduce:
        left_names = relevant_inputs(p.left.command) | pre_left | _condition_vars(p)[0]
        right_names = relevant_inputs(p.right.command) | pre_right | _condition_vars(p)[1]
    else:
        left_names, right_names = p.left.universe, p.right.universe
    lefts = initial_stores(p.left, left_names, d)
    rights = initial_stores(p.right, right_names, d)
    return [(s, t) for s in lefts for t in rights if eval_rel(pre, s, t, d)]


def _condition_vars(p: PreProduct) -> Tuple[Set[str], Set[str]]:
    left: Set[str] = set()
    right: Set[str] = set()
    if p.alignment is not None:
        for formula in p.alignment.formulas():
            l_vars, r_vars = rel_vars(formula)
            left |= l_vars
            right |= r_vars
    return left, right


@dataclass
class Exploration:
    """Reachable product states grouped by cutpoint pair."""
    reached: Dict[Pair, Set[Tuple[Store, Store]]]
    stuck: List[ProductState]
    complete: bool

    def states_at(self, pair: Pair) -> List[Tuple[Store, Store]]:
        return sorted(self.reached.get(pair, set()), key=lambda st: (st[0], st[1]))


def explore_product(p: PreProduct, pre, d: Domain, fuel: Optional[int] = None,
                    reduce: bool = False) -> Exploration:
    """Breadth-first exploration of the product from every initial pair satisfying pre."""
    fuel = d.fuel if fuel is None else fuel
    index = _EdgeIndex(p)
    reached: Dict[Pair, Set[Tuple[Store, Store]]] = {}
    stuck: List[ProductState] = []
    frontier = []
    for s, t in initial_pairs(p, pre, d, reduce):
        reached.setdefault(p.entry, set()).add((s, t))
        frontier.append(ProductState(State(INIT, s), State(INIT, t)))
    complete = True
    depth = 0
    while frontier:
        if depth >= fuel:
            complete = False
            break
        following = []
        for state in frontier:
            if state.pair == p.exit:
                continue
            successors = product_successors(p, state, d, index)
            if not successors:
                stuck.append(state)
            for _, after in successors:
                bucket = reached.setdefault(after.pair, set())
                key = (after.left.store, after.right.store)
                if key not in bucket:
                    bucket.add(key)
                    following.append(after)
        frontier = following
        depth += 1
    logger.debug("explored %d product states (complete=%s)",
                 sum(len(v) for v in reached.values()), complete)
    return Exploration(reached, stuck, complete)


def pinned_state(s: Store, t: Store):
    """Relational formula satisfied exactly by the store pair (s, t)."""
    atoms = [Left(Cmp(CmpOp.EQ, Var(name), IntLit(value))) for name, value in s.as_dict().items()]
    atoms += [Right(Cmp(CmpOp.EQ, Var(name), IntLit(value))) for name, value in t.as_dict().items()]
    atoms.sort(key=str)
    return conj(*atoms)


def strongest_annotation(p: PreProduct, exploration: Exploration) -> Dict[Pair, object]:
    """Annotation listing exactly the explored states at each reachable pair."""
    annotation = {}
    for pair in p.reachable:
        states = exploration.states_at(pair)
        annotation[pair] = disj(*[pinned_state(s, t) for s, t in states]) if states else FALSE
    return annotation


# =============================================================================
# DIRECT RELATIONAL CHECKS
# =============================================================================

@dataclass(frozen=True)
class RelViolation:
    left: Store
    right: Store
    final_left: Optional[Store] = None
    final_right: Optional[Store] = None
    reason: Optional[str] = None

    def describe(self) -> str:
        text = f"left: {self.left}; right: {self.right}"
        if self.final_left is not None:
            text += f"; left final: {self.final_left}; right final: {self.final_right}"
        if self.reason:
            text += f"; {self.reason}"
        return text


@dataclass
class RelCheck:
    violation: Optional[RelViolation]
    pairs_checked: int
    cutoffs: int

    @property
    def holds(self) -> bool:
        return self.violation is None


def _direct_pairs(c: Command, c2: Command, pre, d: Domain, post=None) -> List[Tuple[Store, Store]]:
    pre_left, pre_right = rel_vars(pre)
    # variables the post mentions but neither command touches keep their initial values
    post_left, post_right = rel_vars(post) if post is not None else (set(), set())
    left_names = sorted(relevant_inputs(c) | pre_left | (post_left - all_vars(c)))
    right_names = sorted(relevant_inputs(c2) | pre_right | (post_right - all_vars(c2)))
    left_fixed = {name: d.lo for name in all_vars(c) if name not in left_names}
    right_fixed = {name: d.lo for name in all_vars(c2) if name not in right_names}
    pairs = []
    for s in enumerate_stores(left_names, d):
        full = Store({**left_fixed, **s.as_dict()})
        for t in enumerate_stores(right_names, d):
            full2 = Store({**right_fixed, **t.as_dict()})
            if eval_rel(pre, full, full2, d):
                pairs.append((full, full2))
    return pairs


def check_relational_bounded(c: Command, c2: Command, rspec: RelSpec, d: Domain,
                             fuel: Optional[int] = None) -> RelCheck:
    """Basic semantics: every pair of terminated runs from pre-related stores satisfies post."""
    fuel = d.fuel if fuel is None else fuel
    limits = d.step_limits
    pairs = _direct_pairs(c, c2, rspec.pre, d, rspec.post)
    cutoffs = 0
    for s, t in pairs:
        lefts = run_bounded(c, s, fuel, limits)
        rights = run_bounded(c2, t, fuel, limits)
        cutoffs += sum(1 for o in lefts + rights if o.kind is OutcomeKind.CUTOFF)
        for outcome in lefts:
            if not outcome.terminated:
                continue
            for outcome2 in rights:
                if outcome2.terminated and not eval_rel(rspec.post, outcome.final_store,
                                                        outcome2.final_store, d):
                    return RelCheck(RelViolation(s, t, outcome.final_store, outcome2.final_store),
                                    len(pairs), cutoffs)
    return RelCheck(None, len(pairs), cutoffs)


def check_rel_non_stuck(c: Command, c2: Command, pre, d: Domain,
                        fuel: Optional[int] = None) -> RelCheck:
    """Non-stuck semantics, bounded: no run of either side from pre-related stores gets stuck."""
    fuel = d.fuel if fuel is None else fuel
    limits = d.step_limits
    pairs = _direct_pairs(c, c2, pre, d)
    cutoffs = 0
    for s, t in pairs:
        for side, command, store in (("left", c, s), ("right", c2, t)):
            for outcome in run_bounded(command, store, fuel, limits):
                if outcome.kind is OutcomeKind.CUTOFF:
                    cutoffs += 1
                elif outcome.kind is OutcomeKind.STUCK:
                    return RelCheck(RelViolation(s, t, reason=f"{side} side stuck: {outcome.reason}"),
                                    len(pairs), cutoffs)
    return RelCheck(None, len(pairs), cutoffs)


# =============================================================================
# ADEQUACY
# =============================================================================

class AdequacyMode(Enum):
    ADEQUATE = "adequate"
    WEAK = "weak"


class AdequacyVerdict(Enum):
    ADEQUATE = "adequate"
    WEAKLY_ADEQUATE_ONLY = "weakly-adequate-only"
    WITNESS = "witness"


@dataclass
class AdequacyReport:
    verdict: AdequacyVerdict
    mode: AdequacyMode
    left_trace: Tuple[State, ...] = ()
    right_trace: Tuple[State, ...] = ()
    pairs_checked: int = 0

    @property
    def passed(self) -> bool:
        if self.mode is AdequacyMode.WEAK:
            return self.verdict is not AdequacyVerdict.WITNESS
        return self.verdict is AdequacyVerdict.ADEQUATE


def covers(p: PreProduct, trace: Sequence[State], trace2: Sequence[State], d: Domain,
           fuel: int, index: Optional[_EdgeIndex] = None) -> bool:
    """Whether some product trace T has trace <= left(T) and trace2 <= right(T)."""
    index = index or _EdgeIndex(p)
    n, n2 = len(trace), len(trace2)
    start = (1, 1, ProductState(trace[0], trace2[0]))
    if n == 1 and n2 == 1:
        return True
    seen = {start}
    frontier = [start]
    depth = 0
    limit = n + n2 + fuel
    while frontier and depth < limit:
        following = []
        for i, j, state in frontier:
            for edge, after in product_successors(p, state, d, index):
                ni, nj = i, j
                if edge.moves_left and i < n:
                    if after.left != trace[i]:
                        continue
                    ni = i + 1
                if edge.moves_right and j < n2:
                    if after.right != trace2[j]:
                        continue
                    nj = j + 1
                if ni == n and nj == n2:
                    return True
                node = (ni, nj, after)
                if node not in seen:
                    seen.add(node)
                    following.append(node)
        frontier = following
        depth += 1
    return False


def check_adequacy_bounded(p: PreProduct, d: Domain, fuel: int,
                           mode: AdequacyMode = AdequacyMode.ADEQUATE) -> AdequacyReport:
    """Search for a pair of runs that no product trace covers."""
    limits = d.step_limits
    index = _EdgeIndex(p)
    cond_left, cond_right = _condition_vars(p)
    lefts = initial_stores(p.left, relevant_inputs(p.left.command) | cond_left, d)
    rights = initial_stores(p.right, relevant_inputs(p.right.command) | cond_right, d)
    first_partial: Optional[Tuple[tuple, tuple]] = None
    checked = 0
    for s in lefts:
        left_runs = automaton_runs(p.left, s, fuel, limits)
        for t in rights:
            right_runs = automaton_runs(p.right, t, fuel, limits)
            for trace, end in left_runs:
                for trace2, end2 in right_runs:
                    both_terminated = end is RunEnd.TERMINATED and end2 is RunEnd.TERMINATED
                    if mode is AdequacyMode.WEAK and not both_terminated:
                        continue
                    if not both_terminated and first_partial is not None:
                        continue
                    checked += 1
                    if covers(p, trace, trace2, d, fuel, index):
                        continue
                    if both_terminated:
                        logger.debug("uncovered terminated pair from %s / %s", s, t)
                        return AdequacyReport(AdequacyVerdict.WITNESS, mode, trace, trace2, checked)
                    first_partial = (trace, trace2)
    if first_partial is not None:
        return AdequacyReport(AdequacyVerdict.WEAKLY_ADEQUATE_ONLY, mode,
                              first_partial[0], first_partial[1], checked)
    return AdequacyReport(AdequacyVerdict.ADEQUATE, mode, pairs_checked=checked)
