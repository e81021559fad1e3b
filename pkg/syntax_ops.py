"""
Syntactic operations: substitution, variable analysis, auxiliary
variable erasure, renaming and call-site inlining.
"""
from dataclasses import dataclass
from typing import FrozenSet, Iterable, Optional, Set, Tuple

from errors import WellFormednessError
from models import (
    IntLit, Var, BinOp, App, Sided, Side, CmpOp,
    BoolLit, Cmp, And, Or, Not, Implies,
    Left, Right, Agree, AgreeAll, Both, Converse, Compose,
    Skip, Assign, Havoc, Seq, If, While, Choice, VarBlock, CallSite,
    Command, conj, seq,
)


# =============================================================================
# SUBSTITUTION
# =============================================================================

def subst_int(e, x: str, r):
    """Replace variable x by expression r inside an integer expression."""
    if isinstance(e, IntLit):
        return e
    if isinstance(e, Var):
        return r if e.name == x else e
    if isinstance(e, BinOp):
        return BinOp(e.op, subst_int(e.left, x, r), subst_int(e.right, x, r))
    if isinstance(e, App):
        return App(e.func, tuple(subst_int(a, x, r) for a in e.args))
    raise TypeError(f"unexpected term in one-store expression: {e}")


def subst_unary(p, x: str, e):
    """Replace every free occurrence of x in a one-store formula by e.

    Formulas are quantifier-free, so no capture can happen.
    """
    if isinstance(p, BoolLit):
        return p
    if isinstance(p, Cmp):
        return Cmp(p.op, subst_int(p.left, x, e), subst_int(p.right, x, e))
    if isinstance(p, And):
        return And(subst_unary(p.left, x, e), subst_unary(p.right, x, e))
    if isinstance(p, Or):
        return Or(subst_unary(p.left, x, e), subst_unary(p.right, x, e))
    if isinstance(p, Implies):
        return Implies(subst_unary(p.left, x, e), subst_unary(p.right, x, e))
    if isinstance(p, Not):
        return Not(subst_unary(p.operand, x, e))
    raise TypeError(f"not a one-store formula: {p}")


def _subst_side(e, x: Optional[str], r, x2: Optional[str], r2):
    if isinstance(e, IntLit):
        return e
    if isinstance(e, Sided):
        if e.side is Side.LEFT:
            return e if x is None else Sided(Side.LEFT, subst_int(e.expr, x, r))
        return e if x2 is None else Sided(Side.RIGHT, subst_int(e.expr, x2, r2))
    if isinstance(e, BinOp):
        return BinOp(e.op, _subst_side(e.left, x, r, x2, r2), _subst_side(e.right, x, r, x2, r2))
    raise TypeError(f"unexpected term in relational comparison: {e}")


def subst_rel(r, x: Optional[str], e, x2: Optional[str] = None, e2=None):
    """Relational substitution: x by e on the left store, x2 by e2 on the right.

    Either side may be None, meaning that store is untouched. An agreement
    whose two sides end up different is expanded to L(..) = R(..).
    """
    if isinstance(r, BoolLit):
        return r
    if isinstance(r, Left):
        return r if x is None else Left(subst_unary(r.pred, x, e))
    if isinstance(r, Right):
        return r if x2 is None else Right(subst_unary(r.pred, x2, e2))
    if isinstance(r, Cmp):
        return Cmp(r.op, _subst_side(r.left, x, e, x2, e2), _subst_side(r.right, x, e, x2, e2))
    if isinstance(r, Agree):
        left = r.expr if x is None else subst_int(r.expr, x, e)
        right = r.expr if x2 is None else subst_int(r.expr, x2, e2)
        if left == right:
            return Agree(left)
        return Cmp(CmpOp.EQ, Sided(Side.LEFT, left), Sided(Side.RIGHT, right))
    if isinstance(r, AgreeAll):
        if x not in r.names and x2 not in r.names:
            return r
        return conj(*(subst_rel(Agree(Var(name)), x, e, x2, e2) for name in r.names))
    if isinstance(r, Both):
        left = r.pred if x is None else subst_unary(r.pred, x, e)
        right = r.pred if x2 is None else subst_unary(r.pred, x2, e2)
        if left == right:
            return Both(left)
        return And(Left(left), Right(right))
    if isinstance(r, And):
        return And(subst_rel(r.left, x, e, x2, e2), subst_rel(r.right, x, e, x2, e2))
    if isinstance(r, Or):
        return Or(subst_rel(r.left, x, e, x2, e2), subst_rel(r.right, x, e, x2, e2))
    if isinstance(r, Implies):
        return Implies(subst_rel(r.left, x, e, x2, e2), subst_rel(r.right, x, e, x2, e2))
    if isinstance(r, Not):
        return Not(subst_rel(r.operand, x, e, x2, e2))
    if isinstance(r, Converse):
        return Converse(subst_rel(r.body, x2, e2, x, e))
    if isinstance(r, Compose):
        return Compose(subst_rel(r.first, x, e, None, None),
                       subst_rel(r.second, None, None, x2, e2))
    raise TypeError(f"not a relational formula: {r}")


# =============================================================================
# VARIABLE ANALYSIS
# =============================================================================

def int_vars(e) -> Set[str]:
    if isinstance(e, IntLit):
        return set()
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, BinOp):
        return int_vars(e.left) | int_vars(e.right)
    if isinstance(e, App):
        names: Set[str] = set()
        for arg in e.args:
            names |= int_vars(arg)
        return names
    if isinstance(e, Sided):
        return int_vars(e.expr)
    raise TypeError(f"not an integer expression: {e}")


def formula_vars(p) -> Set[str]:
    """Free variables of a one-store formula."""
    if isinstance(p, BoolLit):
        return set()
    if isinstance(p, Cmp):
        return int_vars(p.left) | int_vars(p.right)
    if isinstance(p, (And, Or, Implies)):
        return formula_vars(p.left) | formula_vars(p.right)
    if isinstance(p, Not):
        return formula_vars(p.operand)
    raise TypeError(f"not a one-store formula: {p}")


def _sided_vars(e) -> Tuple[Set[str], Set[str]]:
    if isinstance(e, IntLit):
        return set(), set()
    if isinstance(e, Sided):
        names = int_vars(e.expr)
        return (names, set()) if e.side is Side.LEFT else (set(), names)
    if isinstance(e, BinOp):
        left_a, right_a = _sided_vars(e.left)
        left_b, right_b = _sided_vars(e.right)
        return left_a | left_b, right_a | right_b
    raise TypeError(f"unexpected term in relational comparison: {e}")


def rel_vars(r) -> Tuple[Set[str], Set[str]]:
    """Free variables of a relational formula, split into (left, right)."""
    if isinstance(r, BoolLit):
        return set(), set()
    if isinstance(r, Left):
        return formula_vars(r.pred), set()
    if isinstance(r, Right):
        return set(), formula_vars(r.pred)
    if isinstance(r, Cmp):
        left_a, right_a = _sided_vars(r.left)
        left_b, right_b = _sided_vars(r.right)
        return left_a | left_b, right_a | right_b
    if isinstance(r, Agree):
        names = int_vars(r.expr)
        return set(names), set(names)
    if isinstance(r, AgreeAll):
        return set(r.names), set(r.names)
    if isinstance(r, Both):
        names = formula_vars(r.pred)
        return set(names), set(names)
    if isinstance(r, (And, Or, Implies)):
        left_a, right_a = rel_vars(r.left)
        left_b, right_b = rel_vars(r.right)
        return left_a | left_b, right_a | right_b
    if isinstance(r, Not):
        return rel_vars(r.operand)
    if isinstance(r, Converse):
        left, right = rel_vars(r.body)
        return right, left
    if isinstance(r, Compose):
        return rel_vars(r.first)[0], rel_vars(r.second)[1]
    raise TypeError(f"not a relational formula: {r}")


def symbols_of(p) -> Set[str]:
    """Uninterpreted function symbols occurring in a formula or term."""
    if isinstance(p, App):
        found = {p.func}
        for arg in p.args:
            found |= symbols_of(arg)
        return found
    if isinstance(p, (IntLit, Var, BoolLit, AgreeAll)):
        return set()
    if isinstance(p, (Sided, Agree)):
        return symbols_of(p.expr)
    if isinstance(p, (BinOp, Cmp, And, Or, Implies)):
        return symbols_of(p.left) | symbols_of(p.right)
    if isinstance(p, Not):
        return symbols_of(p.operand)
    if isinstance(p, (Left, Right, Both)):
        return symbols_of(p.pred)
    if isinstance(p, Converse):
        return symbols_of(p.body)
    if isinstance(p, Compose):
        return symbols_of(p.first) | symbols_of(p.second)
    raise TypeError(f"unexpected node: {p!r}")


def command_vars(c: Command) -> Tuple[FrozenSet[str], FrozenSet[str]]:
    """Syntactic (read, written) variable sets; var-block locals excluded."""
    if isinstance(c, Skip):
        return frozenset(), frozenset()
    if isinstance(c, Assign):
        return frozenset(int_vars(c.rhs)), frozenset({c.target})
    if isinstance(c, Havoc):
        return frozenset(), frozenset({c.target})
    if isinstance(c, (Seq, Choice)):
        first, second = (c.first, c.second) if isinstance(c, Seq) else (c.left, c.right)
        read_a, written_a = command_vars(first)
        read_b, written_b = command_vars(second)
        return read_a | read_b, written_a | written_b
    if isinstance(c, If):
        read_a, written_a = command_vars(c.then)
        read_b, written_b = command_vars(c.orelse)
        return frozenset(formula_vars(c.guard)) | read_a | read_b, written_a | written_b
    if isinstance(c, While):
        read, written = command_vars(c.body)
        return frozenset(formula_vars(c.guard)) | read, written
    if isinstance(c, VarBlock):
        read, written = command_vars(c.body)
        hidden = frozenset(c.locals)
        return read - hidden, written - hidden
    if isinstance(c, CallSite):
        return frozenset(c.args), frozenset({c.result})
    raise TypeError(f"not a command: {c!r}")


def all_vars(c: Command) -> FrozenSet[str]:
    read, written = command_vars(c)
    return read | written


def is_deterministic(c: Command) -> bool:
    """No havoc and no choice anywhere in c."""
    if isinstance(c, (Havoc, Choice)):
        return False
    if isinstance(c, Seq):
        return is_deterministic(c.first) and is_deterministic(c.second)
    if isinstance(c, If):
        return is_deterministic(c.then) and is_deterministic(c.orelse)
    if isinstance(c, (While, VarBlock)):
        return is_deterministic(c.body)
    return True


def has_calls(c: Command) -> bool:
    if isinstance(c, CallSite):
        return True
    if isinstance(c, (Seq, Choice)):
        parts = (c.first, c.second) if isinstance(c, Seq) else (c.left, c.right)
        return any(has_calls(part) for part in parts)
    if isinstance(c, If):
        return has_calls(c.then) or has_calls(c.orelse)
    if isinstance(c, (While, VarBlock)):
        return has_calls(c.body)
    return False


# =============================================================================
# AUXILIARY VARIABLES
# =============================================================================

def is_auxiliary(xs: Iterable[str], c: Command) -> bool:
    """True iff every occurrence of xs is inside an assignment to a member of xs."""
    xs = frozenset(xs)
    if not xs:
        return True
    if isinstance(c, Skip):
        return True
    if isinstance(c, Assign):
        return c.target in xs or not (int_vars(c.rhs) & xs)
    if isinstance(c, Havoc):
        return True
    if isinstance(c, Seq):
        return is_auxiliary(xs, c.first) and is_auxiliary(xs, c.second)
    if isinstance(c, Choice):
        return is_auxiliary(xs, c.left) and is_auxiliary(xs, c.right)
    if isinstance(c, If):
        return (not (formula_vars(c.guard) & xs)
                and is_auxiliary(xs, c.then) and is_auxiliary(xs, c.orelse))
    if isinstance(c, While):
        return not (formula_vars(c.guard) & xs) and is_auxiliary(xs, c.body)
    if isinstance(c, VarBlock):
        return is_auxiliary(xs - frozenset(c.locals), c.body)
    if isinstance(c, CallSite):
        return c.result in xs or not (frozenset(c.args) & xs)
    raise TypeError(f"not a command: {c!r}")


def erase_aux(xs: Iterable[str], c: Command) -> Command:
    """Replace every assignment to a member of xs by skip."""
    xs = frozenset(xs)
    if not is_auxiliary(xs, c):
        raise WellFormednessError(f"{{{', '.join(sorted(xs))}}} is not auxiliary in: {c}")
    return _erase(xs, c)


def _erase(xs: FrozenSet[str], c: Command) -> Command:
    if isinstance(c, (Assign, Havoc)):
        return Skip() if c.target in xs else c
    if isinstance(c, CallSite):
        return Skip() if c.result in xs else c
    if isinstance(c, Seq):
        return Seq(_erase(xs, c.first), _erase(xs, c.second))
    if isinstance(c, Choice):
        return Choice(_erase(xs, c.left), _erase(xs, c.right))
    if isinstance(c, If):
        return If(c.guard, _erase(xs, c.then), _erase(xs, c.orelse))
    if isinstance(c, While):
        return While(c.guard, _erase(xs, c.body))
    if isinstance(c, VarBlock):
        return VarBlock(c.locals, _erase(xs - frozenset(c.locals), c.body))
    return c


# =============================================================================
# RENAMING AND INLINING
# =============================================================================

def fresh_name(base: str, avoid: Iterable[str]) -> str:
    """First of base0, base1, ... not in avoid."""
    avoid = set(avoid)
    index = 0
    while f"{base}{index}" in avoid:
        index += 1
    return f"{base}{index}"


def rename_var(c: Command, old: str, new: str) -> Command:
    """Rename free occurrences of a variable in a command."""
    def expr(e):
        return subst_int(e, old, Var(new))

    def guard(g):
        return subst_unary(g, old, Var(new))

    def target(name):
        return new if name == old else name

    if isinstance(c, Skip):
        return c
    if isinstance(c, Assign):
        return Assign(target(c.target), expr(c.rhs))
    if isinstance(c, Havoc):
        return Havoc(target(c.target))
    if isinstance(c, Seq):
        return Seq(rename_var(c.first, old, new), rename_var(c.second, old, new))
    if isinstance(c, Choice):
        return Choice(rename_var(c.left, old, new), rename_var(c.right, old, new))
    if isinstance(c, If):
        return If(guard(c.guard), rename_var(c.then, old, new), rename_var(c.orelse, old, new))
    if isinstance(c, While):
        return While(guard(c.guard), rename_var(c.body, old, new))
    if isinstance(c, VarBlock):
        if old in c.locals:
            return c
        return VarBlock(c.locals, rename_var(c.body, old, new))
    if isinstance(c, CallSite):
        return CallSite(target(c.result), tuple(target(a) for a in c.args))
    raise TypeError(f"not a command: {c!r}")


def block_locals(c: Command) -> Set[str]:
    """Every name declared by a var block somewhere in c."""
    if isinstance(c, VarBlock):
        return set(c.locals) | block_locals(c.body)
    if isinstance(c, (Seq, Choice)):
        parts = (c.first, c.second) if isinstance(c, Seq) else (c.left, c.right)
        return block_locals(parts[0]) | block_locals(parts[1])
    if isinstance(c, If):
        return block_locals(c.then) | block_locals(c.orelse)
    if isinstance(c, While):
        return block_locals(c.body)
    return set()


@dataclass(frozen=True)
class Callee:
    """A command used as a function: reads params, leaves its value in result."""
    params: Tuple[str, ...]
    result: str
    body: Command


def inline_calls(c: Command, callee: Callee) -> Command:
    """Replace each `z := call(a..)` by a var block running the callee body.

    The callee's parameters and result are renamed to fresh locals, so
    arguments that share names with parameters are copied correctly.
    """
    avoid = set(all_vars(c)) | set(all_vars(callee.body)) | block_locals(c) \
        | block_locals(callee.body) | set(callee.params) | {callee.result}
    def fresh(base: str) -> str:
        name = fresh_name(f"{base}_", avoid)
        avoid.add(name)
        return name

    def walk(node: Command) -> Command:
        if isinstance(node, CallSite):
            if len(node.args) != len(callee.params):
                raise WellFormednessError(
                    f"call passes {len(node.args)} arguments, callee expects {len(callee.params)}")
            renaming = {p: fresh(p) for p in callee.params}
            renaming[callee.result] = fresh(callee.result)
            body = callee.body
            # two passes through temporaries keep the renaming simultaneous
            temps = {}
            for old, new in renaming.items():
                temp = fresh("t")
                temps[temp] = new
                body = rename_var(body, old, temp)
            for temp, new in temps.items():
                body = rename_var(body, temp, new)
            copies = [Assign(renaming[p], Var(a)) for p, a in zip(callee.params, node.args)]
            result_local = renaming[callee.result]
            locals_ = tuple(renaming[p] for p in callee.params) + (result_local,)
            return VarBlock(locals_, seq(*copies, body, Assign(node.result, Var(result_local))))
        if isinstance(node, Seq):
            return Seq(walk(node.first), walk(node.second))
        if isinstance(node, Choice):
            return Choice(walk(node.left), walk(node.right))
        if isinstance(node, If):
            return If(node.guard, walk(node.then), walk(node.orelse))
        if isinstance(node, While):
            return While(node.guard, walk(node.body))
        if isinstance(node, VarBlock):
            return VarBlock(node.locals, walk(node.body))
        return node

    return walk(c)
