"""
Judgments, derivation trees, the rule catalog and the proof file format.

A proof file holds optional `(define NAME value)` forms followed by one
derivation:

    (derivation
      (rule RelConseq)
      (conclusion (rel "x := x + 1" "x := x + 1" "A(x)" "A(x)"))
      (premises (derivation ...) ...)
      (side (vars g) ...))

Conclusions are `(unary C P Q)` or `(rel C C' R S)`. Any position takes a
string in concrete syntax, `(ref NAME)`, `(load "file.whl")` for commands,
or a formula macro: `(subst P x "e")`, `(subst-rel R x "e" x' "e'")` with
`_` for an untouched side, `(and A B ..)`, `(or A B ..)`, `(not A)`.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from equiv_laws import Direction, EquivLaw, RewriteStep, parse_path
from errors import ParseError
from models import Command, Not, conj, disj, seq
from program_parser import Mode, parse_formula, parse_int_expr, parse_program, parse_rel_formula
from syntax_ops import subst_rel, subst_unary

logger = logging.getLogger(__name__)


# =============================================================================
# JUDGMENTS AND DERIVATIONS
# =============================================================================

@dataclass(frozen=True)
class UnaryJudgment:
    """C : <pre><post>"""
    command: Command
    pre: object
    post: object

    def __str__(self) -> str:
        return f"{self.command} : <{self.pre}> <{self.post}>"


@dataclass(frozen=True)
class RelJudgment:
    """C | C' : <pre><post>"""
    left: Command
    right: Command
    pre: object
    post: object

    def __str__(self) -> str:
        return f"{self.left} | {self.right} : <{self.pre}> <{self.post}>"


Judgment = Union[UnaryJudgment, RelJudgment]


@dataclass
class Derivation:
    rule: str
    conclusion: Judgment
    premises: List["Derivation"] = field(default_factory=list)
    side: Dict[str, object] = field(default_factory=dict)
    line: int = field(default=0, compare=False)

    def walk(self, path: Tuple[int, ...] = ()):
        """(path, node) for every node, parents before their premises."""
        yield path, self
        for index, premise in enumerate(self.premises):
            yield from premise.walk(path + (index,))

    def rules_used(self) -> List[str]:
        return sorted({node.rule for _, node in self.walk()})


def node_path(path: Tuple[int, ...]) -> str:
    return "root" + "".join(f".{i}" for i in path)


# =============================================================================
# RULE CATALOG
# =============================================================================

class Soundness(Enum):
    BASIC = "basic"
    TERMINATION = "basic-with-termination-assumption"
    BOUNDED = "bounded"


@dataclass(frozen=True)
class RuleInfo:
    name: str
    arity: int
    relational: bool
    side_conditions: Tuple[str, ...] = ()
    soundness: Soundness = Soundness.BASIC


def _rule(name, arity, relational, *conditions, soundness=Soundness.BASIC) -> Tuple[str, RuleInfo]:
    return name, RuleInfo(name, arity, relational, tuple(conditions), soundness)


RULES: Dict[str, RuleInfo] = dict([
    # unary
    _rule("Skip", 0, False),
    _rule("Assign", 0, False),
    _rule("Havoc", 0, False, "P => Q[v/x] for every havoc value v"),
    _rule("Seq", 2, False),
    _rule("If", 2, False),
    _rule("Choice", 2, False),
    _rule("While", 1, False),
    _rule("Conseq", 1, False, "P => R", "S => Q"),
    _rule("Conj", 2, False),
    _rule("Disj", 2, False),
    _rule("Frame", 1, False, "FV(R) disjoint from Vars(C)"),
    _rule("AuxVar", 1, False, "vars not free in P, Q", "vars auxiliary in C"),
    _rule("ExistsPre", 1, False, "x not free in Q", "x not in Vars(C)", "P' => exists x. P"),
    _rule("Call", 0, False, "inside a CmdFun client premise"),
    # relational, diagonal
    _rule("DSkip", 0, True),
    _rule("DAssign", 0, True),
    _rule("DSeq", 2, True),
    _rule("DIf4", 4, True),
    _rule("AltAgree", 2, True, "R => L(e) = R(e')"),
    _rule("IterAgree", 1, True, "Q => L(e) = R(e')"),
    _rule("EagerWhile", 3, True),
    _rule("While3", 3, True, "Q => L(e) = R(e') \\/ Lrel /\\ L(e) \\/ Rrel /\\ R(e')"),
    # relational, one side and mixed
    _rule("LAssign", 0, True),
    _rule("LSeq", 2, True),
    _rule("LIf", 2, True),
    _rule("WhSeq", 2, True, "Q /\\ L(~e) => R"),
    # unary to relational and back
    _rule("SeqProd", 1, True, "C and C' have disjoint variables"),
    _rule("Embed", 2, True),
    _rule("Erefl", 1, True, "C deterministic"),
    _rule("Ecorr", 2, False, "C terminates from P", soundness=Soundness.TERMINATION),
    # spec manipulation
    _rule("RelConseq", 1, True, "P => R", "S => Q"),
    _rule("RelFrame", 1, True, "FV(R) disjoint from Vars(C, C')"),
    _rule("Swap", 1, True),
    _rule("Comp", 2, True, "middle command terminates", soundness=Soundness.TERMINATION),
    _rule("RelConj", 2, True),
    _rule("RelDisj", 2, True),
    _rule("Rewrite", 1, True, "each side rewrites by an equivalence law chain"),
    _rule("CmdFun", 3, False, "f fresh", "C does not write its parameters",
          "axiom R => S(f(x), f(x')) over the domain"),
    _rule("Explore", 0, True, "exhaustive bounded product exploration", soundness=Soundness.BOUNDED),
])


# =============================================================================
# S-EXPRESSIONS
# =============================================================================

@dataclass(frozen=True)
class Atom:
    text: str
    line: int
    quoted: bool = False


@dataclass
class SList:
    items: List[object]
    line: int

    @property
    def head(self) -> Optional[str]:
        if self.items and isinstance(self.items[0], Atom) and not self.items[0].quoted:
            return self.items[0].text
        return None


def read_sexprs(text: str) -> List[object]:
    """Parse every top-level s-expression; `;` starts a comment."""
    stack: List[SList] = []
    top: List[object] = []
    i, line, n = 0, 1, len(text)
    while i < n:
        ch = text[i]
        if ch == '\n':
            line += 1
            i += 1
        elif ch in ' \t\r':
            i += 1
        elif ch == ';':
            while i < n and text[i] != '\n':
                i += 1
        elif ch == '(':
            stack.append(SList([], line))
            i += 1
        elif ch == ')':
            if not stack:
                raise ParseError("unbalanced ')'", line, 1)
            done = stack.pop()
            (stack[-1].items if stack else top).append(done)
            i += 1
        elif ch == '"':
            start_line = line
            i += 1
            chars = []
            while i < n and text[i] != '"':
                # only \" and \\ are escapes, so /\ and \/ read literally
                if text[i] == '\\' and i + 1 < n and text[i + 1] in '"\\':
                    i += 1
                if text[i] == '\n':
                    line += 1
                chars.append(text[i])
                i += 1
            if i >= n:
                raise ParseError("unterminated string", start_line, 1)
            i += 1
            (stack[-1].items if stack else top).append(Atom(''.join(chars), start_line, True))
        else:
            start = i
            while i < n and text[i] not in ' \t\r\n();"':
                i += 1
            (stack[-1].items if stack else top).append(Atom(text[start:i], line))
    if stack:
        raise ParseError("unbalanced '('", stack[-1].line, 1)
    return top


# =============================================================================
# PROOF READER
# =============================================================================

_COMMAND, _UNARY, _RELATIONAL = "command", "unary", "relational"


class ProofReader:
    """Builds a Derivation from proof text; `base_dir` resolves `(load ..)` paths."""

    def __init__(self, base_dir: Optional[str] = None):
        self.base_dir = Path(base_dir) if base_dir else Path('.')
        self.defines: Dict[str, object] = {}
        self._cache: Dict[Tuple[str, str], object] = {}

    def read(self, text: str) -> Derivation:
        forms = read_sexprs(text)
        derivation = None
        for form in forms:
            if not isinstance(form, SList):
                raise ParseError(f"unexpected atom {form.text!r} at top level", form.line, 1)
            if form.head == 'define':
                if len(form.items) != 3 or not isinstance(form.items[1], Atom):
                    raise ParseError("expected (define NAME value)", form.line, 1)
                self.defines[form.items[1].text] = form.items[2]
            elif form.head == 'derivation':
                if derivation is not None:
                    raise ParseError("a proof file holds a single derivation", form.line, 1)
                derivation = self.derivation(form)
            else:
                raise ParseError(f"unexpected top-level form {form.head!r}", form.line, 1)
        if derivation is None:
            raise ParseError("no (derivation ...) form found")
        return derivation

    # -------------------------------------------------------------------------
    # Derivation nodes
    # -------------------------------------------------------------------------

    def derivation(self, form: SList) -> Derivation:
        fields: Dict[str, SList] = {}
        for item in form.items[1:]:
            if not isinstance(item, SList) or item.head not in ('rule', 'conclusion', 'premises', 'side'):
                raise ParseError("expected (rule ..), (conclusion ..), (premises ..) or (side ..)",
                                 getattr(item, 'line', form.line), 1)
            fields[item.head] = item
        if 'rule' not in fields or 'conclusion' not in fields:
            raise ParseError("derivation needs (rule ..) and (conclusion ..)", form.line, 1)
        rule = self._atom(fields['rule'].items[1:2], fields['rule'].line)
        premises = []
        if 'premises' in fields:
            for item in fields['premises'].items[1:]:
                if not isinstance(item, SList) or item.head != 'derivation':
                    raise ParseError("premises must be derivations", fields['premises'].line, 1)
                premises.append(self.derivation(item))
        side = self.side(fields['side']) if 'side' in fields else {}
        return Derivation(rule, self.conclusion(fields['conclusion']), premises, side, form.line)

    def conclusion(self, form: SList) -> Judgment:
        if len(form.items) != 2 or not isinstance(form.items[1], SList):
            raise ParseError("expected (conclusion (unary ..)) or (conclusion (rel ..))", form.line, 1)
        body = form.items[1]
        parts = body.items[1:]
        if body.head == 'unary' and len(parts) == 3:
            return UnaryJudgment(self.value(parts[0], _COMMAND), self.value(parts[1], _UNARY),
                                 self.value(parts[2], _UNARY))
        if body.head == 'rel' and len(parts) == 4:
            return RelJudgment(self.value(parts[0], _COMMAND), self.value(parts[1], _COMMAND),
                               self.value(parts[2], _RELATIONAL), self.value(parts[3], _RELATIONAL))
        raise ParseError("expected (unary C P Q) or (rel C C' R S)", body.line, 1)

    def side(self, form: SList) -> Dict[str, object]:
        side: Dict[str, object] = {}
        for entry in form.items[1:]:
            if not isinstance(entry, SList) or entry.head is None:
                raise ParseError("side entries look like (key value ..)", form.line, 1)
            key, args = entry.head, entry.items[1:]
            if key in ('vars', 'params'):
                side[key] = tuple(self._atom([arg], entry.line) for arg in args)
            elif key in ('var', 'symbol', 'result', 'product'):
                side[key] = self._atom(args, entry.line)
            elif key == 'fuel':
                try:
                    side[key] = int(self._atom(args, entry.line))
                except ValueError:
                    raise ParseError("fuel must be an integer", entry.line, 1) from None
            elif key in ('l', 'r'):
                if len(args) != 1:
                    raise ParseError(f"({key} ..) takes one formula", entry.line, 1)
                side[key] = self.value(args[0], _RELATIONAL)
            elif key in ('left', 'right'):
                side[key] = tuple(self.step(arg) for arg in args)
            else:
                raise ParseError(f"unknown side entry {key!r}", entry.line, 1)
        return side

    def step(self, form) -> RewriteStep:
        if not isinstance(form, SList) or not form.items:
            raise ParseError("rewrite steps look like (Law \"path\" fwd)", getattr(form, 'line', 0), 1)
        items = [self._atom([item], form.line) for item in form.items]
        try:
            law = EquivLaw(items[0])
            path = parse_path(items[1]) if len(items) > 1 else ()
            direction = Direction(items[2]) if len(items) > 2 else Direction.FORWARD
        except ValueError as exc:
            raise ParseError(f"bad rewrite step: {exc}", form.line, 1) from None
        arg = items[3] if len(items) > 3 else None
        return RewriteStep(law, path, direction, arg)

    # -------------------------------------------------------------------------
    # Values
    # -------------------------------------------------------------------------

    def _atom(self, items, line: int) -> str:
        if len(items) != 1 or not isinstance(items[0], Atom):
            raise ParseError("expected a single name", line, 1)
        return items[0].text

    def value(self, form, kind: str):
        if isinstance(form, Atom):
            if not form.quoted:
                raise ParseError(f"expected a string or a form, got {form.text!r}", form.line, 1)
            return self._parse(form.text, kind, form.line)
        head = form.head
        args = form.items[1:]
        if head == 'ref':
            name = self._atom(args, form.line)
            if name not in self.defines:
                raise ParseError(f"undefined name {name!r}", form.line, 1)
            key = (name, kind)
            if key not in self._cache:
                self._cache[key] = self.value(self.defines[name], kind)
            return self._cache[key]
        if head == 'load' and kind == _COMMAND:
            path = self.base_dir / self._atom(args, form.line)
            if not path.exists():
                raise FileNotFoundError(f"Input file not found: {path}")
            return parse_program(path.read_text(encoding='utf-8'))
        if head in ('and', 'or') and kind != _COMMAND:
            parts = [self.value(arg, kind) for arg in args]
            return conj(*parts) if head == 'and' else disj(*parts)
        if head == 'not' and kind != _COMMAND and len(args) == 1:
            return Not(self.value(args[0], kind))
        if head == 'subst' and kind == _UNARY and len(args) == 3:
            body = self.value(args[0], _UNARY)
            return subst_unary(body, self._atom(args[1:2], form.line), self._int(args[2]))
        if head == 'subst-rel' and kind == _RELATIONAL and len(args) == 5:
            body = self.value(args[0], _RELATIONAL)
            x, e = self._side_subst(args[1], args[2], form.line)
            x2, e2 = self._side_subst(args[3], args[4], form.line)
            return subst_rel(body, x, e, x2, e2)
        raise ParseError(f"unexpected form {head!r} for a {kind} value", form.line, 1)

    def _side_subst(self, name, expr, line: int):
        var = self._atom([name], line)
        if var == '_':
            return None, None
        return var, self._int(expr)

    def _int(self, form):
        if not isinstance(form, Atom):
            raise ParseError("expected an integer expression string", form.line, 1)
        return parse_int_expr(form.text, Mode.UNARY)

    def _parse(self, text: str, kind: str, line: int):
        if kind == _COMMAND:
            return parse_program(text, line)
        if kind == _UNARY:
            return parse_formula(text, line)
        return parse_rel_formula(text, line)


def read_derivation(text: str, base_dir: Optional[str] = None) -> Derivation:
    return ProofReader(base_dir).read(text)


def load_derivation(file_path: str) -> Derivation:
    """Read a proof file; `(load ..)` paths are relative to its directory."""
    path = Path(file_path)
    if not path.exists():
        raise FileNotFoundError(f"Input file not found: {file_path}")
    return read_derivation(path.read_text(encoding='utf-8'), str(path.parent))


# =============================================================================
# PROOF WRITER
# =============================================================================

def _quote(value) -> str:
    text = str(value).replace('\\', '\\\\').replace('"', '\\"')
    return f'"{text}"'


def _format_step(step: RewriteStep) -> str:
    path = ".".join(str(i) for i in step.path)
    parts = [step.law.value, _quote(path), step.direction.value]
    if step.arg:
        parts.append(_quote(step.arg))
    return "(" + " ".join(parts) + ")"


def _format_side(key: str, value) -> str:
    if key in ('vars', 'params'):
        return f"({key} {' '.join(value)})"
    if key in ('left', 'right'):
        return f"({key} {' '.join(_format_step(step) for step in value)})"
    if key in ('l', 'r'):
        return f"({key} {_quote(value)})"
    return f"({key} {value})"


def format_derivation(d: Derivation, indent: int = 0) -> str:
    """Proof-file text for d; reading it back gives an equal tree."""
    pad = "  " * indent
    j = d.conclusion
    if isinstance(j, UnaryJudgment):
        conclusion = f"(unary {_quote(j.command)} {_quote(j.pre)} {_quote(j.post)})"
    else:
        conclusion = f"(rel {_quote(j.left)} {_quote(j.right)} {_quote(j.pre)} {_quote(j.post)})"
    lines = [f"{pad}(derivation", f"{pad}  (rule {d.rule})", f"{pad}  (conclusion {conclusion})"]
    if d.premises:
        lines.append(f"{pad}  (premises")
        lines += [format_derivation(premise, indent + 2) for premise in d.premises]
        lines.append(f"{pad}  )")
    if d.side:
        entries = " ".join(_format_side(key, value) for key, value in d.side.items())
        lines.append(f"{pad}  (side {entries})")
    lines[-1] += ")"
    return "\n".join(lines)


def describe_rule(name: str) -> str:
    info = RULES[name]
    conditions = "; ".join(info.side_conditions) or "none"
    return f"{name}: {info.arity} premise(s), side conditions: {conditions}, sound: {info.soundness.value}"



def expand_whseq(node: Derivation) -> Derivation:
    """WhSeq as a derived rule: LoopSeqSplit on the left, then DSeq over its two premises.

    The loop-exit entailment of the native rule is not needed by the expansion.
    """
    if node.rule != "WhSeq" or len(node.premises) != 2:
        raise ValueError(f"not a WhSeq node: {node.rule}")
    j = node.conclusion
    first, second = node.premises
    guard = first.conclusion.left.guard
    split = RewriteStep(EquivLaw.LOOP_SEQ_SPLIT, (), Direction.FORWARD, str(guard.right))
    left = seq(first.conclusion.left, second.conclusion.left)
    dseq = Derivation("DSeq", RelJudgment(left, j.right, j.pre, j.post), [first, second])
    return Derivation("Rewrite", j, [dseq], {'left': (split,)}, node.line)
