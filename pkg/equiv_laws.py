"""
Unconditional equivalence laws: command rewrites that keep the store
traces of a command unchanged.

Commands are kept with right-nested sequences; every rewrite result is
renormalized, and positions are paths of child indices into the
normalized command (Seq: 0 first, 1 second; If: 0 then, 1 else;
While and VarBlock: 0 body; Choice: 0 left, 1 right).
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Set, Tuple

from errors import WellFormednessError
from models import (
    And, Skip, Seq, If, While, Choice, VarBlock, Command, seq,
)
from program_parser import parse_formula
from semantics import Limits, DEFAULT_LIMITS, OutcomeKind, Store, run_bounded
from syntax_ops import all_vars, block_locals, fresh_name, rename_var

logger = logging.getLogger(__name__)

Path = Tuple[int, ...]


class EquivLaw(Enum):
    SKIP_LEFT = "SkipLeft"          # skip; C  ~  C
    SKIP_RIGHT = "SkipRight"        # C; skip  ~  C
    LOOP_SPLIT = "LoopSplit"        # while e do C od  ~  while e do C; while e /\ e0 do C od od
    LOOP_PEEL = "LoopPeel"          # while e do C od  ~  if e then C fi; while e do C od
    VAR_RENAME = "VarRename"        # var x in C ni  ~  var x' in C[x'/x] ni
    LOOP_SEQ_SPLIT = "LoopSeqSplit"  # while e do C od  ~  while e /\ b do C od; while e do C od


class Direction(Enum):
    FORWARD = "fwd"
    BACKWARD = "bwd"


@dataclass(frozen=True)
class RewriteStep:
    """One law application; `arg` carries e0 / b for the split laws and `x` or `x:x'` for VarRename."""
    law: EquivLaw
    path: Path = ()
    direction: Direction = Direction.FORWARD
    arg: Optional[str] = None

    def __str__(self) -> str:
        text = f"{self.law.value} at {format_path(self.path)} {self.direction.value}"
        return f"{text} [{self.arg}]" if self.arg else text


def format_path(path: Path) -> str:
    return ".".join(str(i) for i in path) if path else "root"


def parse_path(text: str) -> Path:
    text = text.strip()
    if text in ("", "root", "."):
        return ()
    try:
        return tuple(int(part) for part in text.split("."))
    except ValueError:
        raise WellFormednessError(f"bad command path {text!r}") from None


# =============================================================================
# SEQUENCE NORMALIZATION AND NAVIGATION
# =============================================================================

def flatten_seq(c: Command) -> List[Command]:
    """Statements of a sequence, left to right, with nested sequences spliced in."""
    if isinstance(c, Seq):
        return flatten_seq(c.first) + flatten_seq(c.second)
    return [c]


def normalize(c: Command) -> Command:
    """Right-associate every sequence in c."""
    if isinstance(c, Seq):
        return seq(*[normalize(part) for part in flatten_seq(c)])
    if isinstance(c, If):
        return If(c.guard, normalize(c.then), normalize(c.orelse))
    if isinstance(c, While):
        return While(c.guard, normalize(c.body))
    if isinstance(c, Choice):
        return Choice(normalize(c.left), normalize(c.right))
    if isinstance(c, VarBlock):
        return VarBlock(c.locals, normalize(c.body))
    return c


def _children(c: Command) -> List[Command]:
    if isinstance(c, Seq):
        return [c.first, c.second]
    if isinstance(c, If):
        return [c.then, c.orelse]
    if isinstance(c, Choice):
        return [c.left, c.right]
    if isinstance(c, (While, VarBlock)):
        return [c.body]
    return []


def _rebuild(c: Command, index: int, child: Command) -> Command:
    if isinstance(c, Seq):
        return Seq(child, c.second) if index == 0 else Seq(c.first, child)
    if isinstance(c, If):
        return If(c.guard, child, c.orelse) if index == 0 else If(c.guard, c.then, child)
    if isinstance(c, Choice):
        return Choice(child, c.right) if index == 0 else Choice(c.left, child)
    if isinstance(c, While):
        return While(c.guard, child)
    return VarBlock(c.locals, child)


def subterm(c: Command, path: Path) -> Command:
    for index in path:
        children = _children(c)
        if index >= len(children):
            raise WellFormednessError(f"path {format_path(path)} leaves the command at {c}")
        c = children[index]
    return c


def replace_at(c: Command, path: Path, replacement: Command) -> Command:
    if not path:
        return replacement
    children = _children(c)
    if path[0] >= len(children):
        raise WellFormednessError(f"path {format_path(path)} leaves the command at {c}")
    return _rebuild(c, path[0], replace_at(children[path[0]], path[1:], replacement))


# =============================================================================
# LAWS
# =============================================================================

def _mismatch(law: EquivLaw, c: Command) -> WellFormednessError:
    return WellFormednessError(f"{law.value} does not match: {c}")


def _split_last(c: Command) -> Tuple[Command, Command]:
    """(everything but the last statement, the last statement) of a sequence."""
    parts = flatten_seq(c)
    if len(parts) < 2:
        raise WellFormednessError(f"not a sequence: {c}")
    return seq(*parts[:-1]), parts[-1]


def _needs_arg(step: RewriteStep) -> str:
    if not step.arg:
        raise WellFormednessError(f"{step.law.value} needs a guard argument")
    return step.arg


def _apply_forward(step: RewriteStep, c: Command, whole: Command) -> Command:
    law = step.law
    if law is EquivLaw.SKIP_LEFT:
        if isinstance(c, Seq) and isinstance(c.first, Skip):
            return c.second
        raise _mismatch(law, c)
    if law is EquivLaw.SKIP_RIGHT:
        parts = flatten_seq(c)
        if len(parts) >= 2 and isinstance(parts[-1], Skip):
            return seq(*parts[:-1])
        raise _mismatch(law, c)
    if law is EquivLaw.LOOP_SPLIT:
        if not isinstance(c, While):
            raise _mismatch(law, c)
        extra = parse_formula(_needs_arg(step))
        return While(c.guard, seq(*flatten_seq(c.body), While(And(c.guard, extra), c.body)))
    if law is EquivLaw.LOOP_PEEL:
        if not isinstance(c, While):
            raise _mismatch(law, c)
        return Seq(If(c.guard, c.body, Skip()), c)
    if law is EquivLaw.LOOP_SEQ_SPLIT:
        if not isinstance(c, While):
            raise _mismatch(law, c)
        extra = parse_formula(_needs_arg(step))
        return Seq(While(And(c.guard, extra), c.body), c)
    if law is EquivLaw.VAR_RENAME:
        return _rename_local(step, c, whole)
    raise _mismatch(law, c)


def _apply_backward(step: RewriteStep, c: Command, whole: Command) -> Command:
    law = step.law
    if law is EquivLaw.SKIP_LEFT:
        return Seq(Skip(), c)
    if law is EquivLaw.SKIP_RIGHT:
        return seq(*flatten_seq(c), Skip())
    if law is EquivLaw.LOOP_SPLIT:
        if isinstance(c, While) and isinstance(c.body, Seq):
            body, inner = _split_last(c.body)
            if (isinstance(inner, While) and inner.body == body and isinstance(inner.guard, And)
                    and inner.guard.left == c.guard):
                return While(c.guard, body)
        raise _mismatch(law, c)
    if law is EquivLaw.LOOP_PEEL:
        if isinstance(c, Seq):
            rest = flatten_seq(c.second)
            peeled, loop = c.first, rest[0]
            if (isinstance(peeled, If) and isinstance(peeled.orelse, Skip) and isinstance(loop, While)
                    and peeled.guard == loop.guard and peeled.then == loop.body):
                return seq(loop, *rest[1:])
        raise _mismatch(law, c)
    if law is EquivLaw.LOOP_SEQ_SPLIT:
        if isinstance(c, Seq):
            rest = flatten_seq(c.second)
            first, loop = c.first, rest[0]
            if (isinstance(first, While) and isinstance(loop, While) and first.body == loop.body
                    and isinstance(first.guard, And) and first.guard.left == loop.guard):
                return seq(loop, *rest[1:])
        raise _mismatch(law, c)
    if law is EquivLaw.VAR_RENAME:
        return _rename_local(step, c, whole)
    raise _mismatch(law, c)


def _rename_local(step: RewriteStep, c: Command, whole: Command) -> Command:
    if not isinstance(c, VarBlock):
        raise _mismatch(step.law, c)
    old, _, new = (step.arg or c.locals[0]).partition(':')
    old, new = old.strip(), new.strip()
    if old not in c.locals:
        raise WellFormednessError(f"{old!r} is not declared by: {c}")
    taken = set(all_vars(whole)) | block_locals(whole) | set(all_vars(c.body))
    if not new:
        new = fresh_name(old, taken)
    elif new in taken:
        raise WellFormednessError(f"VarRename target {new!r} is not fresh")
    locals_ = tuple(new if name == old else name for name in c.locals)
    return VarBlock(locals_, rename_var(c.body, old, new))


def rewrite_uequiv(c: Command, step: RewriteStep) -> Command:
    """Apply one law at a position of the normalized command; the result is normalized."""
    c = normalize(c)
    target = subterm(c, step.path)
    if step.direction is Direction.FORWARD:
        rewritten = _apply_forward(step, target, c)
    else:
        rewritten = _apply_backward(step, target, c)
    result = normalize(replace_at(c, step.path, rewritten))
    logger.debug("%s: %s  ~>  %s", step, c, result)
    return result


def rewrite_chain(c: Command, steps: Sequence[RewriteStep]) -> Command:
    for step in steps:
        c = rewrite_uequiv(c, step)
    return normalize(c)


# =============================================================================
# BOUNDED TRACE EQUIVALENCE
# =============================================================================

def _store_trace(outcome, names: Set[str]) -> Tuple[Store, ...]:
    trace: List[Store] = []
    for cfg in outcome.trace:
        store = cfg.store.restrict(names)
        if not trace or trace[-1] != store:
            trace.append(store)
    return tuple(trace)


def _trace_set(c: Command, s: Store, fuel: int, limits: Limits, names: Set[str]):
    traces = set()
    cutoffs = 0
    for outcome in run_bounded(c, s, fuel, limits):
        if outcome.kind is OutcomeKind.CUTOFF:
            cutoffs += 1
            continue
        traces.add((outcome.kind, _store_trace(outcome, names)))
    return traces, cutoffs


def trace_equivalent(c: Command, d: Command, stores: Iterable[Store], fuel: int,
                     limits: Limits = DEFAULT_LIMITS) -> Optional[Store]:
    """First initial store on which c and d differ in destuttered store traces, else None.

    Traces are projected onto the variables both commands see from outside
    their var blocks; runs cut off by fuel are left out of the comparison.
    """
    names = (set(all_vars(c)) | set(all_vars(d))) - block_locals(c) - block_locals(d)
    cutoffs = 0
    for s in stores:
        left, cut = _trace_set(c, s, fuel, limits, names)
        right, cut2 = _trace_set(d, s, fuel, limits, names)
        cutoffs += cut + cut2
        if left != right:
            return s
    if cutoffs:
        logger.debug("trace comparison skipped %d cut-off runs", cutoffs)
    return None
