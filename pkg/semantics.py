"""
Stores, small-step semantics, bounded runs and segment execution.

Runtime faults are modelled as stuck configurations: a step from a
configuration whose command divides by zero, or assigns a value outside
the bounded integer range, has no successor.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Tuple, Union

from errors import UnknownResult, WellFormednessError
from models import (
    IntLit, Var, BinOp, App, Sided, IntOp, CmpOp,
    BoolLit, Cmp, And, Or, Not, Implies,
    Skip, Assign, Havoc, Seq, If, While, Choice, VarBlock, CallSite,
    Guard, Segment, Command,
)

logger = logging.getLogger(__name__)

INIT = "init"
FIN = "fin"


class Store:
    """Immutable total map from variable names to integers."""
    __slots__ = ('_values', '_key')

    def __init__(self, values: Mapping[str, int] = None):
        self._values: Dict[str, int] = dict(values or {})
        self._key = tuple(sorted(self._values.items()))

    @classmethod
    def of(cls, **values: int) -> "Store":
        return cls(values)

    def __getitem__(self, name: str) -> int:
        try:
            return self._values[name]
        except KeyError:
            raise WellFormednessError(f"variable {name!r} is not in the store") from None

    def __contains__(self, name: str) -> bool:
        return name in self._values

    def get(self, name: str, default: Optional[int] = None) -> Optional[int]:
        return self._values.get(name, default)

    def set(self, name: str, value: int) -> "Store":
        values = dict(self._values)
        values[name] = value
        return Store(values)

    def without(self, names: Iterable[str]) -> "Store":
        names = set(names)
        return Store({k: v for k, v in self._values.items() if k not in names})

    def restrict(self, names: Iterable[str]) -> "Store":
        names = set(names)
        return Store({k: v for k, v in self._values.items() if k in names})

    def names(self) -> Tuple[str, ...]:
        return tuple(name for name, _ in self._key)

    def as_dict(self) -> Dict[str, int]:
        return dict(self._values)

    def __eq__(self, other) -> bool:
        return isinstance(other, Store) and self._key == other._key

    def __lt__(self, other: "Store") -> bool:
        return self._key < other._key

    def __hash__(self) -> int:
        return hash(self._key)

    def __repr__(self) -> str:
        return f"Store({self})"

    def __str__(self) -> str:
        return ", ".join(f"{name}={value}" for name, value in self._key)


@dataclass(frozen=True)
class Limits:
    """Bounded integer range for stored values and the range havoc draws from."""
    lo: int = -1024
    hi: int = 1023
    havoc_lo: int = 0
    havoc_hi: int = 4
    havoc_overrides: Tuple[Tuple[str, int, int], ...] = ()

    def contains(self, value: int) -> bool:
        return self.lo <= value <= self.hi

    def havoc_range(self, name: str) -> range:
        for var, lo, hi in self.havoc_overrides:
            if var == name:
                return range(lo, hi + 1)
        return range(self.havoc_lo, self.havoc_hi + 1)


DEFAULT_LIMITS = Limits()


# =============================================================================
# EXPRESSION EVALUATION
# =============================================================================

class Stuck(Exception):
    """Raised internally when strict evaluation divides by zero."""


def eval_int(e, s: Store, strict: bool = True, interp=None) -> int:
    """Evaluate an integer expression.

    Strict evaluation (commands) raises Stuck on a zero divisor; lenient
    evaluation (formulas) makes x div 0 and x mod 0 equal to 0. `interp`
    maps (symbol, args) to a value for function applications.
    """
    if isinstance(e, IntLit):
        return e.value
    if isinstance(e, Var):
        return s[e.name]
    if isinstance(e, BinOp):
        left = eval_int(e.left, s, strict, interp)
        right = eval_int(e.right, s, strict, interp)
        op = e.op
        if op is IntOp.ADD:
            return left + right
        if op is IntOp.SUB:
            return left - right
        if op is IntOp.MUL:
            return left * right
        if right == 0:
            if strict:
                raise Stuck("division by zero")
            return 0
        return left // right if op is IntOp.DIV else left % right
    if isinstance(e, App):
        if interp is None:
            raise UnknownResult(f"function symbol {e.func!r} has no interpretation")
        args = tuple(eval_int(a, s, strict, interp) for a in e.args)
        return interp(e.func, args)
    if isinstance(e, Sided):
        raise TypeError(f"side-tagged term in a one-store expression: {e}")
    raise TypeError(f"not an integer expression: {e!r}")


def compare(op: CmpOp, left: int, right: int) -> bool:
    if op is CmpOp.EQ:
        return left == right
    if op is CmpOp.NE:
        return left != right
    if op is CmpOp.LT:
        return left < right
    if op is CmpOp.LE:
        return left <= right
    if op is CmpOp.GT:
        return left > right
    return left >= right


def eval_bool(p, s: Store, strict: bool = True, interp=None) -> bool:
    """Evaluate a one-store boolean expression (both operands always evaluated when strict)."""
    if isinstance(p, BoolLit):
        return p.value
    if isinstance(p, Cmp):
        return compare(p.op, eval_int(p.left, s, strict, interp), eval_int(p.right, s, strict, interp))
    if isinstance(p, Not):
        return not eval_bool(p.operand, s, strict, interp)
    if strict:
        left = eval_bool(p.left, s, strict, interp)
        right = eval_bool(p.right, s, strict, interp)
    else:
        left = eval_bool(p.left, s, strict, interp)
        if isinstance(p, And) and not left:
            return False
        if isinstance(p, Or) and left:
            return True
        if isinstance(p, Implies) and not left:
            return True
        right = eval_bool(p.right, s, strict, interp)
    if isinstance(p, And):
        return left and right
    if isinstance(p, Or):
        return left or right
    if isinstance(p, Implies):
        return (not left) or right
    raise TypeError(f"not a one-store formula: {p!r}")


# =============================================================================
# SMALL-STEP SEMANTICS
# =============================================================================

@dataclass(frozen=True)
class _Scope:
    """Runtime continuation of a var block: restores shadowed values on exit."""
    locals: Tuple[str, ...]
    saved: Tuple[Tuple[str, Optional[int]], ...]
    inner: object


Control = Union[Command, _Scope, str]


@dataclass(frozen=True)
class Config:
    control: Control
    store: Store


class OutcomeKind(Enum):
    TERMINATED = "terminated"
    STUCK = "stuck"
    CUTOFF = "cutoff"


@dataclass(frozen=True)
class Outcome:
    kind: OutcomeKind
    trace: Tuple[Config, ...]
    reason: Optional[str] = None

    @property
    def final_store(self) -> Store:
        return self.trace[-1].store

    @property
    def terminated(self) -> bool:
        return self.kind is OutcomeKind.TERMINATED


def assign_value(name: str, rhs, s: Store, limits: Limits) -> Tuple[Optional[Store], Optional[str]]:
    """Store after `name := rhs`, or (None, reason) when the assignment sticks."""
    try:
        value = eval_int(rhs, s, strict=True)
    except Stuck as exc:
        return None, str(exc)
    if not limits.contains(value):
        return None, f"overflow: {name} := {value} outside [{limits.lo}, {limits.hi}]"
    return s.set(name, value), None


def _guard_value(guard, s: Store) -> Tuple[Optional[bool], Optional[str]]:
    try:
        return eval_bool(guard, s, strict=True), None
    except Stuck as exc:
        return None, str(exc)


def _successors(cfg: Config, limits: Limits) -> Tuple[List[Config], Optional[str]]:
    control, s = cfg.control, cfg.store
    if control == FIN:
        return [], None
    if isinstance(control, Skip):
        return [Config(FIN, s)], None
    if isinstance(control, Assign):
        after, reason = assign_value(control.target, control.rhs, s, limits)
        return ([Config(FIN, after)], None) if after is not None else ([], reason)
    if isinstance(control, Havoc):
        return [Config(FIN, s.set(control.target, v)) for v in limits.havoc_range(control.target)], None
    if isinstance(control, Seq):
        successors, reason = _successors(Config(control.first, s), limits)
        result = []
        for succ in successors:
            if succ.control == FIN:
                result.append(Config(control.second, succ.store))
            else:
                result.append(Config(Seq(succ.control, control.second), succ.store))
        return result, reason
    if isinstance(control, If):
        value, reason = _guard_value(control.guard, s)
        if value is None:
            return [], reason
        return [Config(control.then if value else control.orelse, s)], None
    if isinstance(control, While):
        value, reason = _guard_value(control.guard, s)
        if value is None:
            return [], reason
        if value:
            return [Config(Seq(control.body, control), s)], None
        return [Config(FIN, s)], None
    if isinstance(control, Choice):
        if control.left == control.right:
            return [Config(control.left, s)], None
        return [Config(control.left, s), Config(control.right, s)], None
    if isinstance(control, VarBlock):
        saved = tuple((name, s.get(name)) for name in control.locals)
        entered = s
        for name in control.locals:
            entered = entered.set(name, 0)
        return [Config(_Scope(control.locals, saved, control.body), entered)], None
    if isinstance(control, _Scope):
        successors, reason = _successors(Config(control.inner, s), limits)
        result = []
        for succ in successors:
            if succ.control == FIN:
                restored = succ.store.without(control.locals)
                for name, value in control.saved:
                    if value is not None:
                        restored = restored.set(name, value)
                result.append(Config(FIN, restored))
            else:
                result.append(Config(_Scope(control.locals, control.saved, succ.control), succ.store))
        return result, reason
    if isinstance(control, CallSite):
        raise WellFormednessError(f"call site without a linked callee: {control}")
    raise TypeError(f"unknown control: {control!r}")


def step(cfg: Config, limits: Limits = DEFAULT_LIMITS) -> List[Config]:
    """Successor configurations; empty when cfg is final or stuck."""
    return _successors(cfg, limits)[0]


def run_bounded(c: Command, s: Store, fuel: int, limits: Limits = DEFAULT_LIMITS) -> List[Outcome]:
    """All maximal traces of at most `fuel` transitions from (c, s)."""
    if fuel < 1:
        raise ValueError("fuel must be positive")
    outcomes: List[Outcome] = []
    stack = [[Config(c, s)]]
    while stack:
        trace = stack.pop()
        while True:
            current = trace[-1]
            if current.control == FIN:
                outcomes.append(Outcome(OutcomeKind.TERMINATED, tuple(trace)))
                break
            successors, reason = _successors(current, limits)
            if not successors:
                outcomes.append(Outcome(OutcomeKind.STUCK, tuple(trace), reason))
                break
            if len(trace) - 1 >= fuel:
                outcomes.append(Outcome(OutcomeKind.CUTOFF, tuple(trace)))
                break
            for extra in reversed(successors[1:]):
                stack.append(trace + [extra])
            trace.append(successors[0])
    return outcomes


def final_stores(c: Command, s: Store, fuel: int, limits: Limits = DEFAULT_LIMITS) -> List[Store]:
    """Distinct final stores of the terminated runs."""
    seen = []
    for outcome in run_bounded(c, s, fuel, limits):
        if outcome.terminated and outcome.final_store not in seen:
            seen.append(outcome.final_store)
    return seen


# =============================================================================
# SEGMENTS
# =============================================================================

def exec_segment(seg: Segment, s: Store, limits: Limits = DEFAULT_LIMITS) -> List[Store]:
    """Stores reachable along the segment when its branch conditions hold."""
    frontier = [s]
    for item in seg.path:
        following: List[Store] = []
        for current in frontier:
            if isinstance(item, Guard):
                value, _ = _guard_value(item.cond, current)
                if value is not None and value == item.polarity:
                    following.append(current)
            elif isinstance(item, Assign):
                after, _ = assign_value(item.target, item.rhs, current, limits)
                if after is not None:
                    following.append(after)
            elif isinstance(item, Havoc):
                following.extend(current.set(item.target, v) for v in limits.havoc_range(item.target))
            else:
                raise TypeError(f"unexpected path step: {item!r}")
        frontier = following
        if not frontier:
            break
    unique: List[Store] = []
    for store in frontier:
        if store not in unique:
            unique.append(store)
    return unique


def segment_sticks(seg: Segment, s: Store, limits: Limits = DEFAULT_LIMITS) -> Optional[str]:
    """Reason the segment gets stuck from s while its branch conditions hold, if it does."""
    frontier = [s]
    for item in seg.path:
        following: List[Store] = []
        for current in frontier:
            if isinstance(item, Guard):
                value, reason = _guard_value(item.cond, current)
                if value is None:
                    return reason
                if value == item.polarity:
                    following.append(current)
            elif isinstance(item, Assign):
                after, reason = assign_value(item.target, item.rhs, current, limits)
                if after is None:
                    return reason
                following.append(after)
            else:
                following.extend(current.set(item.target, v) for v in limits.havoc_range(item.target))
        frontier = following
    return None


def _control_text(control: Control) -> str:
    if isinstance(control, _Scope):
        return f"{_control_text(control.inner)} [scope {', '.join(control.locals)}]"
    if isinstance(control, Seq) and isinstance(control.first, (_Scope, Seq)):
        return f"({_control_text(control.first)}); {control.second}"
    return str(control)


def dump_trace(trace: Iterable[Config]) -> str:
    """One line per configuration: the remaining command (or label), then `| x=…, y=…`."""
    return "\n".join(f"{_control_text(cfg.control)} | {cfg.store}" for cfg in trace)
