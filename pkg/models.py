"""
Data models for the while language, its assertion languages and specs.

Every node is an immutable dataclass, so ASTs compare and hash
structurally. ``str()`` of any node renders the concrete syntax accepted
by ``program_parser``.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple, Union


class Side(Enum):
    """Which store of a pair a term or atom refers to."""
    LEFT = "L"
    RIGHT = "R"

    def other(self) -> "Side":
        return Side.RIGHT if self is Side.LEFT else Side.LEFT


class IntOp(Enum):
    """Integer operators. DIV and MOD use floor semantics."""
    ADD = "+"
    SUB = "-"
    MUL = "*"
    DIV = "div"
    MOD = "mod"


class CmpOp(Enum):
    """Integer comparisons."""
    EQ = "="
    NE = "<>"
    LT = "<"
    LE = "<="
    GT = ">"
    GE = ">="


# =============================================================================
# INTEGER EXPRESSIONS
# =============================================================================

@dataclass(frozen=True)
class IntLit:
    value: int

    def __str__(self) -> str:
        return show_int(self)


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return show_int(self)


@dataclass(frozen=True)
class BinOp:
    op: IntOp
    left: "IntExpr"
    right: "IntExpr"

    def __str__(self) -> str:
        return show_int(self)


@dataclass(frozen=True)
class App:
    """Application of an uninterpreted function symbol (formulas only)."""
    func: str
    args: Tuple["IntExpr", ...]

    def __str__(self) -> str:
        return show_int(self)


@dataclass(frozen=True)
class Sided:
    """Integer term evaluated in one store of a pair, written L(e) or R(e)."""
    side: Side
    expr: "IntExpr"

    def __str__(self) -> str:
        return show_int(self)


IntExpr = Union[IntLit, Var, BinOp, App, Sided]


# =============================================================================
# BOOLEAN EXPRESSIONS AND CONNECTIVES
# The connectives below are shared by unary and relational formulas.
# =============================================================================

@dataclass(frozen=True)
class BoolLit:
    value: bool

    def __str__(self) -> str:
        return show_formula(self)


@dataclass(frozen=True)
class Cmp:
    op: CmpOp
    left: IntExpr
    right: IntExpr

    def __str__(self) -> str:
        return show_formula(self)


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"

    def __str__(self) -> str:
        return show_formula(self)


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"

    def __str__(self) -> str:
        return show_formula(self)


@dataclass(frozen=True)
class Not:
    operand: "Formula"

    def __str__(self) -> str:
        return show_formula(self)


@dataclass(frozen=True)
class Implies:
    left: "Formula"
    right: "Formula"

    def __str__(self) -> str:
        return show_formula(self)


BoolExpr = Union[BoolLit, Cmp, And, Or, Not, Implies]


# =============================================================================
# RELATIONAL ATOMS AND OPERATORS
# =============================================================================

@dataclass(frozen=True)
class Left:
    """Unary predicate on the left store."""
    pred: BoolExpr

    def __str__(self) -> str:
        return show_formula(self)


@dataclass(frozen=True)
class Right:
    """Unary predicate on the right store."""
    pred: BoolExpr

    def __str__(self) -> str:
        return show_formula(self)


@dataclass(frozen=True)
class Agree:
    """The expression has the same value in both stores."""
    expr: IntExpr

    def __str__(self) -> str:
        return show_formula(self)


@dataclass(frozen=True)
class AgreeAll:
    """Pointwise agreement on a set of variables (kept sorted)."""
    names: Tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, 'names', tuple(sorted(set(self.names))))

    def __str__(self) -> str:
        return show_formula(self)


@dataclass(frozen=True)
class Both:
    """A unary formula holding in each store separately."""
    pred: BoolExpr

    def __str__(self) -> str:
        return show_formula(self)


@dataclass(frozen=True)
class Converse:
    body: "RelFormula"

    def __str__(self) -> str:
        return show_formula(self)


@dataclass(frozen=True)
class Compose:
    first: "RelFormula"
    second: "RelFormula"

    def __str__(self) -> str:
        return show_formula(self)


Formula = BoolExpr
RelFormula = Union[BoolLit, Cmp, And, Or, Not, Implies, Left, Right, Agree, AgreeAll, Both,
                   Converse, Compose]

RELATIONAL_ATOMS = (Left, Right, Agree, AgreeAll, Both, Converse, Compose)


# =============================================================================
# COMMANDS
# =============================================================================

@dataclass(frozen=True)
class Skip:
    def __str__(self) -> str:
        return show_command(self)


@dataclass(frozen=True)
class Assign:
    target: str
    rhs: IntExpr

    def __str__(self) -> str:
        return show_command(self)


@dataclass(frozen=True)
class Havoc:
    target: str

    def __str__(self) -> str:
        return show_command(self)


@dataclass(frozen=True)
class Seq:
    first: "Command"
    second: "Command"

    def __str__(self) -> str:
        return show_command(self)


@dataclass(frozen=True)
class If:
    guard: BoolExpr
    then: "Command"
    orelse: "Command"

    def __str__(self) -> str:
        return show_command(self)


@dataclass(frozen=True)
class While:
    guard: BoolExpr
    body: "Command"

    def __str__(self) -> str:
        return show_command(self)


@dataclass(frozen=True)
class Choice:
    left: "Command"
    right: "Command"

    def __str__(self) -> str:
        return show_command(self)


@dataclass(frozen=True)
class VarBlock:
    locals: Tuple[str, ...]
    body: "Command"

    def __str__(self) -> str:
        return show_command(self)


@dataclass(frozen=True)
class CallSite:
    result: str
    args: Tuple[str, ...]

    def __str__(self) -> str:
        return show_command(self)


Command = Union[Skip, Assign, Havoc, Seq, If, While, Choice, VarBlock, CallSite]


@dataclass(frozen=True)
class Guard:
    """Branch condition on a segment path; polarity False means the negation holds."""
    cond: BoolExpr
    polarity: bool

    def __str__(self) -> str:
        text = show_formula(self.cond)
        return f"[{text}]" if self.polarity else f"[~({text})]"


PathStep = Union[Guard, Assign, Havoc]


@dataclass(frozen=True)
class Segment:
    """Loop-free path between two consecutive cutpoints."""
    source: str
    target: str
    path: Tuple[PathStep, ...]
    index: int = 0          # position among segments sharing the same source and target

    @property
    def name(self) -> str:
        suffix = f".{self.index}" if self.index else ""
        return f"{self.source}->{self.target}{suffix}"

    def __str__(self) -> str:
        body = "; ".join(str(step) for step in self.path) or "skip"
        return f"{self.name}: {body}"


@dataclass(frozen=True)
class SegmentPair:
    """Payload of a product transition; None on a side means that side stays put."""
    left: Optional[Segment]
    right: Optional[Segment]

    def __str__(self) -> str:
        left = self.left.name if self.left else "stay"
        right = self.right.name if self.right else "stay"
        return f"{left} | {right}"


class VCKind(Enum):
    SEGMENT = "segment"
    NON_STUCK = "non-stuck"
    PRODUCT = "product"
    COVERAGE = "coverage"
    PROGRESS = "progress"


@dataclass(frozen=True)
class VC:
    """Proof obligation: hypothesis, then the payload, establishes the conclusion."""
    id: int
    name: str
    kind: VCKind
    source: object          # cutpoint label, or label pair for product VCs
    target: object
    hypothesis: object
    payload: Union[Segment, SegmentPair, None]
    conclusion: object

    @property
    def relational(self) -> bool:
        return isinstance(self.payload, SegmentPair) or isinstance(self.source, tuple)


@dataclass(frozen=True)
class Spec:
    """Unary spec <pre><post>."""
    pre: Formula
    post: Formula


@dataclass(frozen=True)
class RelSpec:
    """Relational spec <pre><post> over a pair of stores."""
    pre: RelFormula
    post: RelFormula


# =============================================================================
# CONSTRUCTION HELPERS
# =============================================================================

TRUE = BoolLit(True)
FALSE = BoolLit(False)


def conj(*parts):
    """Left-nested conjunction; an empty conjunction is true."""
    if not parts:
        return TRUE
    result = parts[0]
    for part in parts[1:]:
        result = And(result, part)
    return result


def disj(*parts):
    """Left-nested disjunction; an empty disjunction is false."""
    if not parts:
        return FALSE
    result = parts[0]
    for part in parts[1:]:
        result = Or(result, part)
    return result


def iff(left, right):
    return Or(And(left, right), And(Not(left), Not(right)))


def seq(*commands) -> Command:
    """Right-nested sequence, the shape the parser produces."""
    if not commands:
        return Skip()
    result = commands[-1]
    for command in reversed(commands[:-1]):
        result = Seq(command, result)
    return result


def is_relational(p) -> bool:
    """True when p contains a relational atom or a side-tagged term."""
    if isinstance(p, RELATIONAL_ATOMS):
        return True
    if isinstance(p, Cmp):
        return _has_sided(p.left) or _has_sided(p.right)
    if isinstance(p, (And, Or, Implies)):
        return is_relational(p.left) or is_relational(p.right)
    if isinstance(p, Not):
        return is_relational(p.operand)
    return False


def _has_sided(e) -> bool:
    if isinstance(e, Sided):
        return True
    if isinstance(e, BinOp):
        return _has_sided(e.left) or _has_sided(e.right)
    if isinstance(e, App):
        return any(_has_sided(a) for a in e.args)
    return False


# =============================================================================
# PRETTY PRINTER
# =============================================================================

_INT_PREC = {IntOp.ADD: 1, IntOp.SUB: 1, IntOp.MUL: 2, IntOp.DIV: 2, IntOp.MOD: 2}
_ATOM = 9


def _int_prec(e) -> int:
    return _INT_PREC[e.op] if isinstance(e, BinOp) else _ATOM


def show_int(e) -> str:
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Sided):
        return f"{e.side.value}({show_int(e.expr)})"
    if isinstance(e, App):
        return f"{e.func}({', '.join(show_int(a) for a in e.args)})"
    if isinstance(e, BinOp):
        prec = _INT_PREC[e.op]
        left = show_int(e.left)
        if _int_prec(e.left) < prec:
            left = f"({left})"
        right = show_int(e.right)
        if _int_prec(e.right) <= prec:
            right = f"({right})"
        return f"{left} {e.op.value} {right}"
    raise TypeError(f"not an integer expression: {e!r}")


def _formula_prec(p) -> int:
    if isinstance(p, Implies):
        return 1
    if isinstance(p, Or):
        return 2
    if isinstance(p, And):
        return 3
    return _ATOM


def _binary(p, symbol: str, prec: int, right_assoc: bool = False) -> str:
    left = show_formula(p.left)
    right = show_formula(p.right)
    left_prec = _formula_prec(p.left)
    right_prec = _formula_prec(p.right)
    if left_prec < prec or (right_assoc and left_prec == prec):
        left = f"({left})"
    if right_prec < prec or (not right_assoc and right_prec == prec):
        right = f"({right})"
    return f"{left} {symbol} {right}"


def show_formula(p) -> str:
    if isinstance(p, BoolLit):
        return "true" if p.value else "false"
    if isinstance(p, Cmp):
        return f"{show_int(p.left)} {p.op.value} {show_int(p.right)}"
    if isinstance(p, And):
        return _binary(p, "/\\", 3)
    if isinstance(p, Or):
        return _binary(p, "\\/", 2)
    if isinstance(p, Implies):
        return _binary(p, "=>", 1, right_assoc=True)
    if isinstance(p, Not):
        return f"~({show_formula(p.operand)})"
    if isinstance(p, Left):
        return f"L({show_formula(p.pred)})"
    if isinstance(p, Right):
        return f"R({show_formula(p.pred)})"
    if isinstance(p, Agree):
        return f"A({show_int(p.expr)})"
    if isinstance(p, AgreeAll):
        return "AA{" + ", ".join(p.names) + "}"
    if isinstance(p, Both):
        return f"both({show_formula(p.pred)})"
    if isinstance(p, Converse):
        return f"conv({show_formula(p.body)})"
    if isinstance(p, Compose):
        return f"comp({show_formula(p.first)}, {show_formula(p.second)})"
    raise TypeError(f"not a formula: {p!r}")


def show_command(c) -> str:
    if isinstance(c, Skip):
        return "skip"
    if isinstance(c, Assign):
        return f"{c.target} := {show_int(c.rhs)}"
    if isinstance(c, Havoc):
        return f"havoc {c.target}"
    if isinstance(c, Seq):
        first = show_command(c.first)
        if isinstance(c.first, Seq):
            first = f"({first})"
        return f"{first}; {show_command(c.second)}"
    if isinstance(c, If):
        if isinstance(c.orelse, Skip):
            return f"if {show_formula(c.guard)} then {show_command(c.then)} fi"
        return (f"if {show_formula(c.guard)} then {show_command(c.then)} "
                f"else {show_command(c.orelse)} fi")
    if isinstance(c, While):
        return f"while {show_formula(c.guard)} do {show_command(c.body)} od"
    if isinstance(c, Choice):
        return f"choice {show_command(c.left)} or {show_command(c.right)} end"
    if isinstance(c, VarBlock):
        return f"var {', '.join(c.locals)} in {show_command(c.body)} ni"
    if isinstance(c, CallSite):
        return f"{c.result} := call({', '.join(c.args)})"
    raise TypeError(f"not a command: {c!r}")
