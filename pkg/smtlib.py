"""
SMT-LIB v2 emission of verification conditions.

A VC is folded to hypothesis => wp(payload, conclusion) and asserted
negated, so `unsat` from a solver means the VC is valid. Left and right
store variables are declared with `_l` / `_r` suffixes; unary VCs use
plain names. Floor division and modulo are encoded exactly on top of the
solver's Euclidean `div` / `mod`.
"""
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Set, Tuple

from models import (
    IntLit, Var, BinOp, App, Sided, Side, IntOp, CmpOp,
    BoolLit, Cmp, And, Or, Not, Implies,
    Left, Right, Agree, AgreeAll, Both, Converse, Compose, VC,
)
from semantics import Limits, DEFAULT_LIMITS
from discharge import vc_formula
from syntax_ops import rel_vars

logger = logging.getLogger(__name__)

_CMP = {CmpOp.EQ: "=", CmpOp.NE: "distinct", CmpOp.LT: "<", CmpOp.LE: "<=",
        CmpOp.GT: ">", CmpOp.GE: ">="}


class _Emitter:
    def __init__(self):
        self.constants: Set[str] = set()
        self.functions: Dict[str, int] = {}
        self.middles = 0

    def name(self, var: str, suffix: Optional[str]) -> str:
        return var if suffix is None else f"{var}_{suffix}"

    def literal(self, value: int) -> str:
        return str(value) if value >= 0 else f"(- {-value})"

    def term(self, e, suffix: Optional[str], sides: Tuple[Optional[str], Optional[str]], bound: Set[str]) -> str:
        if isinstance(e, IntLit):
            return self.literal(e.value)
        if isinstance(e, Var):
            name = self.name(e.name, suffix)
            if name not in bound:
                self.constants.add(name)
            return name
        if isinstance(e, Sided):
            side_suffix = sides[0] if e.side is Side.LEFT else sides[1]
            return self.term(e.expr, side_suffix, sides, bound)
        if isinstance(e, App):
            self.functions[e.func] = len(e.args)
            args = " ".join(self.term(a, suffix, sides, bound) for a in e.args)
            return f"({e.func} {args})"
        if isinstance(e, BinOp):
            a = self.term(e.left, suffix, sides, bound)
            b = self.term(e.right, suffix, sides, bound)
            if e.op is IntOp.ADD:
                return f"(+ {a} {b})"
            if e.op is IntOp.SUB:
                return f"(- {a} {b})"
            if e.op is IntOp.MUL:
                return f"(* {a} {b})"
            positive = isinstance(e.right, IntLit) and e.right.value > 0
            if e.op is IntOp.DIV:
                if positive:
                    return f"(div {a} {b})"
                return f"(ite (= {b} 0) 0 {self._floor_div(a, b)})"
            if positive:
                return f"(mod {a} {b})"
            return f"(ite (= {b} 0) 0 (- {a} (* {b} {self._floor_div(a, b)})))"
        raise TypeError(f"not an integer term: {e!r}")

    def _floor_div(self, a: str, b: str) -> str:
        return f"(ite (< {b} 0) (div (- {a}) (- {b})) (div {a} {b}))"

    def formula(self, p, suffix: Optional[str], sides, bound: Set[str]) -> str:
        if isinstance(p, BoolLit):
            return "true" if p.value else "false"
        if isinstance(p, Cmp):
            return (f"({_CMP[p.op]} {self.term(p.left, suffix, sides, bound)} "
                    f"{self.term(p.right, suffix, sides, bound)})")
        if isinstance(p, And):
            return f"(and {self.formula(p.left, suffix, sides, bound)} {self.formula(p.right, suffix, sides, bound)})"
        if isinstance(p, Or):
            return f"(or {self.formula(p.left, suffix, sides, bound)} {self.formula(p.right, suffix, sides, bound)})"
        if isinstance(p, Implies):
            return f"(=> {self.formula(p.left, suffix, sides, bound)} {self.formula(p.right, suffix, sides, bound)})"
        if isinstance(p, Not):
            return f"(not {self.formula(p.operand, suffix, sides, bound)})"
        if isinstance(p, Left):
            return self.formula(p.pred, sides[0], sides, bound)
        if isinstance(p, Right):
            return self.formula(p.pred, sides[1], sides, bound)
        if isinstance(p, Agree):
            return f"(= {self.term(p.expr, sides[0], sides, bound)} {self.term(p.expr, sides[1], sides, bound)})"
        if isinstance(p, AgreeAll):
            parts = [self.formula(Agree(Var(name)), suffix, sides, bound) for name in p.names]
            if not parts:
                return "true"
            return parts[0] if len(parts) == 1 else f"(and {' '.join(parts)})"
        if isinstance(p, Both):
            return f"(and {self.formula(p.pred, sides[0], sides, bound)} {self.formula(p.pred, sides[1], sides, bound)})"
        if isinstance(p, Converse):
            return self.formula(p.body, suffix, (sides[1], sides[0]), bound)
        if isinstance(p, Compose):
            self.middles += 1
            middle = f"m{self.middles}"
            names = sorted(rel_vars(p.first)[1] | rel_vars(p.second)[0])
            inner = set(bound) | {self.name(n, middle) for n in names}
            first = self.formula(p.first, suffix, (sides[0], middle), inner)
            second = self.formula(p.second, suffix, (middle, sides[1]), inner)
            if not names:
                return f"(and {first} {second})"
            binders = " ".join(f"({self.name(n, middle)} Int)" for n in names)
            return f"(exists ({binders}) (and {first} {second}))"
        raise TypeError(f"not a formula: {p!r}")


def formula_to_smt(p, relational: bool) -> Tuple[str, List[str], Dict[str, int]]:
    """SMT-LIB term for p, with the constants and function symbols it uses."""
    emitter = _Emitter()
    sides = ("l", "r") if relational else (None, None)
    text = emitter.formula(p, None, sides, set())
    return text, sorted(emitter.constants), dict(sorted(emitter.functions.items()))


def emit_smtlib(vc: VC, limits: Limits = DEFAULT_LIMITS) -> str:
    """Byte-stable SMT-LIB script whose `unsat` answer means the VC is valid."""
    goal = vc_formula(vc, limits)
    text, constants, functions = formula_to_smt(goal, vc.relational)
    lines = [f"; vc {vc.id}: {vc.name}", "(set-logic ALL)"]
    lines += [f"(declare-const {name} Int)" for name in constants]
    for name, arity in functions.items():
        lines.append(f"(declare-fun {name} ({' '.join(['Int'] * arity)}) Int)")
    lines.append(f"(assert (not {text}))")
    lines.append("(check-sat)")
    return "\n".join(lines) + "\n"


def write_smt_files(vcs: Sequence[VC], out_dir: str, limits: Limits = DEFAULT_LIMITS) -> List[Path]:
    """Write one `vc<id>.smt2` file per VC."""
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for vc in vcs:
        path = directory / f"vc{vc.id}.smt2"
        path.write_text(emit_smtlib(vc, limits), encoding='utf-8')
        written.append(path)
    logger.debug("wrote %d SMT-LIB files to %s", len(written), directory)
    return written
