"""
Formula evaluation, weakest preconditions of segments, and discharge of
verification conditions by bounded exhaustive enumeration.

Two routes decide a VC: ``exec`` runs the payload from every hypothesis
store, ``wp`` evaluates hypothesis => wp(payload, conclusion). Both walk
stores in the same lexicographic order (left variables sorted, then
right variables sorted), so they report the same first counterexample.
"""
import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

from errors import UnknownResult
from models import (
    IntLit, Var, BinOp, App, Sided, Side, IntOp, CmpOp,
    BoolLit, Cmp, And, Or, Not, Implies,
    Left, Right, Agree, AgreeAll, Both, Converse, Compose,
    Assign, Havoc, Guard, Segment, SegmentPair, VC, VCKind, TRUE,
)
from semantics import (
    Store, Limits, DEFAULT_LIMITS, OutcomeKind, compare, eval_bool, eval_int,
    exec_segment, run_bounded, segment_sticks,
)
from syntax_ops import Callee, all_vars, formula_vars, int_vars, rel_vars, subst_rel, subst_unary

logger = logging.getLogger(__name__)

DEFAULT_BUDGET = 2_000_000


# =============================================================================
# DOMAIN AND FUNCTION SYMBOLS
# =============================================================================

class SymbolTable:
    """Interpretations of uninterpreted function symbols by commands.

    Values are memoized per (symbol, args) in a write-once map: a racing
    writer computes the same value, so the first stored result wins.
    """

    def __init__(self):
        self._callees: Dict[str, Callee] = {}
        self._memo: Dict[Tuple[str, Tuple[int, ...]], int] = {}
        self.domain: Optional["Domain"] = None

    def define(self, name: str, callee: Callee):
        self._callees[name] = callee

    def __contains__(self, name: str) -> bool:
        return name in self._callees

    def names(self) -> List[str]:
        return sorted(self._callees)

    def __call__(self, name: str, args: Tuple[int, ...]) -> int:
        if name not in self._callees:
            raise UnknownResult(f"function symbol {name!r} has no interpretation")
        return interpret_symbol(name, self._callees[name], args, self.domain)

    def memo(self) -> Dict[Tuple[str, Tuple[int, ...]], int]:
        return self._memo


@dataclass
class Domain:
    """Finite store domain used for enumeration, havoc and composition."""
    lo: int = 0
    hi: int = 4
    overrides: Dict[str, Tuple[int, int]] = field(default_factory=dict)
    limits: Limits = DEFAULT_LIMITS
    budget: int = DEFAULT_BUDGET
    fuel: int = 1000
    symbols: Optional[SymbolTable] = None

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty domain {self.lo}..{self.hi}")
        if self.symbols is not None:
            self.symbols.domain = self

    def values(self, name: str) -> range:
        lo, hi = self.overrides.get(name, (self.lo, self.hi))
        return range(lo, hi + 1)

    def contains(self, name: str, value: int) -> bool:
        return value in self.values(name)

    @property
    def step_limits(self) -> Limits:
        """Limits whose havoc range is this domain."""
        overrides = tuple((name, lo, hi) for name, (lo, hi) in sorted(self.overrides.items()))
        return replace(self.limits, havoc_lo=self.lo, havoc_hi=self.hi, havoc_overrides=overrides)

    @property
    def interp(self):
        return self.symbols

    def with_symbols(self, symbols: SymbolTable) -> "Domain":
        return replace(self, symbols=symbols)


def interpret_symbol(f: str, c: Callee, args: Tuple[int, ...], d: "Domain") -> int:
    """Final value of the callee's result when run on args; memoized per (f, args)."""
    table = d.symbols if d is not None else None
    key = (f, tuple(args))
    if table is not None and key in table.memo():
        return table.memo()[key]
    if len(args) != len(c.params):
        raise UnknownResult(f"{f} expects {len(c.params)} arguments, got {len(args)}")
    if d is not None:
        for param, value in zip(c.params, args):
            if not d.contains(param, value):
                raise UnknownResult(f"{f}{tuple(args)}: argument {value} outside the domain")
    lo = d.lo if d is not None else 0
    fuel = d.fuel if d is not None else 1000
    limits = d.step_limits if d is not None else DEFAULT_LIMITS
    values = {name: lo for name in all_vars(c.body) | {c.result}}
    values.update(zip(c.params, args))
    results = set()
    for outcome in run_bounded(c.body, Store(values), fuel, limits):
        if outcome.kind is OutcomeKind.CUTOFF:
            raise UnknownResult(f"{f}{tuple(args)}: callee cut off after {fuel} steps")
        if outcome.kind is OutcomeKind.TERMINATED:
            results.add(outcome.final_store[c.result])
    if not results:
        raise UnknownResult(f"{f}{tuple(args)}: callee gets stuck")
    if len(results) > 1:
        raise UnknownResult(f"{f}{tuple(args)}: callee result is nondeterministic")
    value = results.pop()
    if table is not None:
        value = table.memo().setdefault(key, value)
    return value


# =============================================================================
# EVALUATION
# =============================================================================

def eval_unary(p, s: Store, d: Optional[Domain] = None) -> bool:
    """Truth of a one-store formula; division by zero yields 0."""
    return eval_bool(p, s, strict=False, interp=d.interp if d else None)


def _eval_term(e, s: Store, t: Store, interp) -> int:
    if isinstance(e, IntLit):
        return e.value
    if isinstance(e, Sided):
        return eval_int(e.expr, s if e.side is Side.LEFT else t, strict=False, interp=interp)
    if isinstance(e, BinOp):
        left = _eval_term(e.left, s, t, interp)
        right = _eval_term(e.right, s, t, interp)
        if e.op is IntOp.ADD:
            return left + right
        if e.op is IntOp.SUB:
            return left - right
        if e.op is IntOp.MUL:
            return left * right
        if right == 0:
            return 0
        return left // right if e.op is IntOp.DIV else left % right
    if isinstance(e, App):
        if interp is None:
            raise UnknownResult(f"function symbol {e.func!r} has no interpretation")
        return interp(e.func, tuple(_eval_term(a, s, t, interp) for a in e.args))
    raise TypeError(f"unexpected term in relational comparison: {e}")


def eval_rel(r, s: Store, t: Store, d: Optional[Domain] = None) -> bool:
    """Truth of a relational formula at the store pair (s, t)."""
    interp = d.interp if d else None
    if isinstance(r, BoolLit):
        return r.value
    if isinstance(r, Cmp):
        return compare(r.op, _eval_term(r.left, s, t, interp), _eval_term(r.right, s, t, interp))
    if isinstance(r, And):
        return eval_rel(r.left, s, t, d) and eval_rel(r.right, s, t, d)
    if isinstance(r, Or):
        return eval_rel(r.left, s, t, d) or eval_rel(r.right, s, t, d)
    if isinstance(r, Implies):
        return (not eval_rel(r.left, s, t, d)) or eval_rel(r.right, s, t, d)
    if isinstance(r, Not):
        return not eval_rel(r.operand, s, t, d)
    if isinstance(r, Left):
        return eval_bool(r.pred, s, strict=False, interp=interp)
    if isinstance(r, Right):
        return eval_bool(r.pred, t, strict=False, interp=interp)
    if isinstance(r, Agree):
        return eval_int(r.expr, s, False, interp) == eval_int(r.expr, t, False, interp)
    if isinstance(r, AgreeAll):
        return all(s[name] == t[name] for name in r.names)
    if isinstance(r, Both):
        return (eval_bool(r.pred, s, strict=False, interp=interp)
                and eval_bool(r.pred, t, strict=False, interp=interp))
    if isinstance(r, Converse):
        return eval_rel(r.body, t, s, d)
    if isinstance(r, Compose):
        return composition_witness(r, s, t, d) is not None
    raise TypeError(f"not a relational formula: {r!r}")


def composition_witness(r: Compose, s: Store, t: Store, d: Optional[Domain]) -> Optional[Store]:
    """First middle store m with first(s, m) and second(m, t), if any."""
    if d is None:
        raise UnknownResult("composition needs a finite domain for the middle store")
    names = sorted(rel_vars(r.first)[1] | rel_vars(r.second)[0])
    for middle in enumerate_stores(names, d):
        if eval_rel(r.first, s, middle, d) and eval_rel(r.second, middle, t, d):
            return middle
    return None


def evaluate(p, s: Store, t: Optional[Store], d: Optional[Domain] = None) -> bool:
    return eval_unary(p, s, d) if t is None else eval_rel(p, s, t, d)


# =============================================================================
# WEAKEST PRECONDITIONS
# =============================================================================

def defined(e):
    """Formula that holds exactly when strict evaluation of e does not divide by zero."""
    parts = []

    def walk(node):
        if isinstance(node, BinOp):
            walk(node.left)
            walk(node.right)
            literal = isinstance(node.right, IntLit) and node.right.value != 0
            if node.op in (IntOp.DIV, IntOp.MOD) and not literal:
                parts.append(Cmp(CmpOp.NE, node.right, IntLit(0)))

    walk(e)
    return _conj(parts)


def defined_guard(p):
    if isinstance(p, Cmp):
        return _conj([q for q in (defined(p.left), defined(p.right)) if q != TRUE])
    if isinstance(p, (And, Or, Implies)):
        return _conj([q for q in (defined_guard(p.left), defined_guard(p.right)) if q != TRUE])
    if isinstance(p, Not):
        return defined_guard(p.operand)
    return TRUE


def in_range(e, limits: Limits):
    """Range condition for an assigned value; trivial for variables and in-range literals."""
    if isinstance(e, Var) or (isinstance(e, IntLit) and limits.contains(e.value)):
        return TRUE
    return And(Cmp(CmpOp.LE, IntLit(limits.lo), e), Cmp(CmpOp.LE, e, IntLit(limits.hi)))


def _conj(parts: Sequence):
    parts = [p for p in parts if p != TRUE]
    if not parts:
        return TRUE
    result = parts[0]
    for part in parts[1:]:
        result = And(result, part)
    return result


def _guarded(condition, body):
    return body if condition == TRUE else Implies(condition, body)


def _polarized(item: Guard):
    return item.cond if item.polarity else Not(item.cond)


def wp_path(path: Iterable, post, limits: Limits = DEFAULT_LIMITS, side: Optional[Side] = None,
            safe: bool = False):
    """Backward transformer of a straight-line path.

    With a side, post is relational and the path runs on that store only.
    With safe, the result also demands that no step sticks (unary only).
    """
    result = post
    for item in reversed(tuple(path)):
        if isinstance(item, Guard):
            ok = defined_guard(item.cond)
            cond = _polarized(item)
            if safe:
                result = _conj([ok, Implies(cond, result)])
            elif side is None:
                result = _guarded(_conj([ok, cond]), result)
            else:
                result = _guarded(_lift(_conj([ok, cond]), side), result)
        elif isinstance(item, Assign):
            ok = _conj([defined(item.rhs), in_range(item.rhs, limits)])
            body = _substitute(result, item.target, item.rhs, side)
            if safe:
                result = _conj([ok, body])
            elif side is None:
                result = _guarded(ok, body)
            else:
                result = _guarded(_lift(ok, side), body)
        elif isinstance(item, Havoc):
            result = _conj([_substitute(result, item.target, IntLit(v), side)
                            for v in limits.havoc_range(item.target)])
        else:
            raise TypeError(f"unexpected path step: {item!r}")
    return result


def _lift(p, side: Side):
    if p == TRUE:
        return p
    return Left(p) if side is Side.LEFT else Right(p)


def _substitute(q, x: str, e, side: Optional[Side]):
    if side is None:
        return subst_unary(q, x, e)
    if side is Side.LEFT:
        return subst_rel(q, x, e, None, None)
    return subst_rel(q, None, None, x, e)


def wp_segment(payload, post, limits: Limits = DEFAULT_LIMITS):
    """wp of a segment (unary) or a segment pair (relational; right first, then left)."""
    if payload is None:
        return post
    if isinstance(payload, Segment):
        return wp_path(payload.path, post, limits)
    result = post
    if payload.right is not None:
        result = wp_path(payload.right.path, result, limits, Side.RIGHT)
    if payload.left is not None:
        result = wp_path(payload.left.path, result, limits, Side.LEFT)
    return result


def vc_formula(vc: VC, limits: Limits = DEFAULT_LIMITS):
    """The VC folded to one implication."""
    if vc.kind is VCKind.NON_STUCK:
        return Implies(vc.hypothesis, wp_path(vc.payload.path, TRUE, limits, safe=True))
    return Implies(vc.hypothesis, wp_segment(vc.payload, vc.conclusion, limits))


# =============================================================================
# ENUMERATION
# =============================================================================

class VerdictKind(Enum):
    VALID = "valid"
    COUNTEREXAMPLE = "counterexample"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    left: Optional[Store] = None
    right: Optional[Store] = None
    middle: Optional[Store] = None
    post_left: Optional[Store] = None
    post_right: Optional[Store] = None
    reason: Optional[str] = None

    @property
    def is_valid(self) -> bool:
        return self.kind is VerdictKind.VALID

    def describe(self) -> str:
        if self.kind is VerdictKind.VALID:
            return "valid"
        if self.kind is VerdictKind.UNKNOWN:
            return f"unknown: {self.reason}"
        parts = [f"left: {self.left}"]
        if self.right is not None:
            parts.append(f"right: {self.right}")
        if self.middle is not None:
            parts.append(f"middle: {self.middle}")
        if self.post_left is not None:
            parts.append(f"left after: {self.post_left}")
        if self.post_right is not None:
            parts.append(f"right after: {self.post_right}")
        if self.reason:
            parts.append(self.reason)
        return "counterexample " + "; ".join(parts)


VALID = Verdict(VerdictKind.VALID)


def unknown(reason: str) -> Verdict:
    return Verdict(VerdictKind.UNKNOWN, reason=reason)


def enumerate_stores(names: Sequence[str], d: Domain) -> Iterator[Store]:
    """All stores over names (in the given order) drawn from the domain, lexicographically."""
    names = list(names)
    for values in itertools.product(*(d.values(name) for name in names)):
        yield Store(dict(zip(names, values)))


def space_size(names: Iterable[str], d: Domain) -> int:
    size = 1
    for name in names:
        size *= len(d.values(name))
    return size


def _path_vars(seg: Optional[Segment]) -> set:
    names = set()
    if seg is None:
        return names
    for item in seg.path:
        if isinstance(item, Guard):
            names |= formula_vars(item.cond)
        elif isinstance(item, Assign):
            names |= int_vars(item.rhs) | {item.target}
        else:
            names.add(item.target)
    return names


def vc_variables(vc: VC) -> Tuple[List[str], Optional[List[str]]]:
    """Variables to enumerate: (left, right); right is None for a unary VC."""
    if not vc.relational:
        names = formula_vars(vc.hypothesis) | formula_vars(vc.conclusion)
        if isinstance(vc.payload, Segment):
            names |= _path_vars(vc.payload)
        return sorted(names), None
    left_h, right_h = rel_vars(vc.hypothesis)
    left_c, right_c = rel_vars(vc.conclusion)
    left = left_h | left_c
    right = right_h | right_c
    if isinstance(vc.payload, SegmentPair):
        left |= _path_vars(vc.payload.left)
        right |= _path_vars(vc.payload.right)
    return sorted(left), sorted(right)


def conjuncts(p) -> List:
    if isinstance(p, And):
        return conjuncts(p.left) + conjuncts(p.right)
    return [p]


def disjuncts(p) -> List:
    if isinstance(p, Or):
        return disjuncts(p.left) + disjuncts(p.right)
    return [p]


def _pin(atom) -> Optional[Tuple[Optional[Side], str, int]]:
    side = None
    if isinstance(atom, Left):
        side, atom = Side.LEFT, atom.pred
    elif isinstance(atom, Right):
        side, atom = Side.RIGHT, atom.pred
    if (isinstance(atom, Cmp) and atom.op is CmpOp.EQ and isinstance(atom.left, Var)
            and isinstance(atom.right, IntLit)):
        return side, atom.left.name, atom.right.value
    return None


def _collect_pins(atoms, strict: bool):
    """Values pinned by equality atoms; None when strict and a non-pin atom occurs,
    False when two pins contradict."""
    left_values: Dict[str, int] = {}
    right_values: Dict[str, int] = {}
    for atom in atoms:
        pin = _pin(atom)
        if pin is None:
            if strict:
                return None
            continue
        side, name, value = pin
        target = right_values if side is Side.RIGHT else left_values
        if target.get(name, value) != value:
            return False
        target[name] = value
    return left_values, right_values


def _point(pins, left: List[str], right: Optional[List[str]]):
    left_values, right_values = pins
    if not set(left) <= set(left_values):
        return None
    if right is not None and not set(right) <= set(right_values):
        return None
    return (Store({n: left_values[n] for n in left}),
            Store({n: right_values[n] for n in right}) if right is not None else None)


def _pinned_points(hypothesis, left: List[str], right: Optional[List[str]]):
    """Candidate stores when the hypothesis pins every enumerated variable, else None."""
    parts = conjuncts(hypothesis)
    pins = _collect_pins(parts, strict=False)
    if pins is False:
        return []
    point = _point(pins, left, right)
    if point is not None:
        return [point]
    for part in parts:
        if not isinstance(part, Or):
            continue
        points = []
        for option in disjuncts(part):
            if option == BoolLit(False):
                continue
            option_pins = _collect_pins(conjuncts(option), strict=True)
            if option_pins is False:
                continue
            candidate = _point(option_pins, left, right) if option_pins else None
            if candidate is None:
                break
            points.append(candidate)
        else:
            return sorted(set(points), key=lambda pair: (pair[0], pair[1] or Store()))
    return None


def _candidates(vc: VC, d: Domain, hypothesis=None) -> Iterator[Tuple[Store, Optional[Store]]]:
    """Stores (pairs) satisfying the hypothesis, in lexicographic order."""
    hypothesis = vc.hypothesis if hypothesis is None else hypothesis
    left, right = vc_variables(vc)
    pinned = _pinned_points(hypothesis, left, right)
    if pinned is not None:
        for s, t in pinned:
            if evaluate(hypothesis, s, t, d):
                yield s, t
        return
    total = space_size(left, d) * (space_size(right, d) if right is not None else 1)
    if total > d.budget:
        raise UnknownResult(f"{total} stores exceed the enumeration budget of {d.budget}")
    if right is None:
        for s in enumerate_stores(left, d):
            if eval_unary(hypothesis, s, d):
                yield s, None
        return
    left_only = []
    mixed = []
    for part in conjuncts(hypothesis):
        (left_only if not rel_vars(part)[1] and not isinstance(part, Compose) else mixed).append(part)
    empty = Store()
    right_stores = list(enumerate_stores(right, d))
    for s in enumerate_stores(left, d):
        if not all(eval_rel(part, s, empty, d) for part in left_only):
            continue
        for t in right_stores:
            if all(eval_rel(part, s, t, d) for part in mixed):
                yield s, t


def _middle(hypothesis, s: Store, t: Store, d: Domain) -> Optional[Store]:
    for part in conjuncts(hypothesis):
        if isinstance(part, Compose):
            return composition_witness(part, s, t, d)
    return None


def _exec_check(vc: VC, s: Store, t: Optional[Store], d: Domain) -> Optional[Verdict]:
    limits = d.step_limits
    payload = vc.payload
    if vc.kind is VCKind.NON_STUCK:
        reason = segment_sticks(payload, s, limits)
        if reason:
            return Verdict(VerdictKind.COUNTEREXAMPLE, left=s, reason=reason)
        return None
    if payload is None:
        if not evaluate(vc.conclusion, s, t, d):
            return Verdict(VerdictKind.COUNTEREXAMPLE, left=s, right=t)
        return None
    if isinstance(payload, Segment):
        for after in exec_segment(payload, s, limits):
            if not eval_unary(vc.conclusion, after, d):
                return Verdict(VerdictKind.COUNTEREXAMPLE, left=s, post_left=after)
        return None
    lefts = exec_segment(payload.left, s, limits) if payload.left else [s]
    rights = exec_segment(payload.right, t, limits) if payload.right else [t]
    for after_left in lefts:
        for after_right in rights:
            if not eval_rel(vc.conclusion, after_left, after_right, d):
                return Verdict(VerdictKind.COUNTEREXAMPLE, left=s, right=t,
                               post_left=after_left, post_right=after_right)
    return None


def discharge_enumerate(vc: VC, d: Domain) -> Verdict:
    """Exec route: run the payload from every hypothesis store."""
    try:
        for s, t in _candidates(vc, d):
            failure = _exec_check(vc, s, t, d)
            if failure is not None:
                middle = _middle(vc.hypothesis, s, t, d) if t is not None else None
                return replace(failure, middle=middle) if middle is not None else failure
    except UnknownResult as exc:
        return unknown(exc.reason)
    return VALID


def discharge_wp(vc: VC, d: Domain) -> Verdict:
    """Wp route: evaluate hypothesis => wp(payload, conclusion) at every store."""
    try:
        limits = d.step_limits
        if vc.kind is VCKind.NON_STUCK:
            goal = wp_path(vc.payload.path, TRUE, limits, safe=True)
        else:
            goal = wp_segment(vc.payload, vc.conclusion, limits)
        for s, t in _candidates(vc, d):
            if not evaluate(goal, s, t, d):
                # replay the payload for the post-states
                failure = _exec_check(vc, s, t, d) or Verdict(VerdictKind.COUNTEREXAMPLE, left=s, right=t)
                middle = _middle(vc.hypothesis, s, t, d) if t is not None else None
                return replace(failure, middle=middle) if middle is not None else failure
    except UnknownResult as exc:
        return unknown(exc.reason)
    return VALID


ROUTES = {'exec': discharge_enumerate, 'wp': discharge_wp}


def discharge(vc: VC, d: Domain, route: str = 'exec') -> Verdict:
    verdict = ROUTES[route](vc, d)
    logger.debug("VC %d %s: %s", vc.id, vc.name, verdict.describe())
    return verdict


def _discharge_job(job):
    vc, d, route = job
    return discharge(vc, d, route)


def discharge_all(vcs: Sequence[VC], d: Domain, route: str = 'exec',
                  jobs: int = 1) -> List[Tuple[VC, Verdict]]:
    """Discharge every VC; results come back in VC order whatever the worker count."""
    if jobs <= 1 or len(vcs) <= 1:
        return [(vc, discharge(vc, d, route)) for vc in vcs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        verdicts = list(pool.map(_discharge_job, [(vc, d, route) for vc in vcs]))
    return list(zip(vcs, verdicts))


def check_entailment(hypothesis, conclusion, d: Domain, relational: bool) -> Verdict:
    """Validity of hypothesis => conclusion over the domain."""
    source = ('pre', 'pre') if relational else 'pre'
    vc = VC(0, "entailment", VCKind.SEGMENT, source, source, hypothesis, None, conclusion)
    return discharge_enumerate(vc, d)
