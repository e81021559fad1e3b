"""
Parser for the while language, its formulas and the keyed input files.

Programs (.whl), unary specs (.spec), relational specs (.rspec),
annotations (.anno), relational annotations (.rann) and alignments
(.align) all share one tokenizer and one recursive-descent expression
parser.

Unary minus binds tighter than `*`, `div` and `mod`: `- 3 mod 2` is
`(-3) mod 2` and `- x mod 2` is `(0 - x) mod 2`. A minus directly before
a literal folds into a negative literal; any other operand becomes
`0 - operand`. Write `-(3 mod 2)` for the other grouping.
"""
import re
from enum import Enum
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Tuple

from errors import ParseError
from models import (
    IntLit, Var, BinOp, App, Sided, IntOp, CmpOp, Side,
    BoolLit, Cmp, And, Or, Not, Implies,
    Left, Right, Agree, AgreeAll, Both, Converse, Compose,
    Skip, Assign, Havoc, Seq, If, While, Choice, VarBlock, CallSite,
    Spec, RelSpec, Command, Formula, RelFormula,
)


class Mode(Enum):
    """Which expression language is being parsed."""
    COMMAND = "command"        # guards and right-hand sides: no symbols, no relational atoms
    UNARY = "unary"            # one-store formulas, function symbols allowed
    RELATIONAL = "relational"  # two-store formulas


KEYWORDS = {
    'skip', 'havoc', 'if', 'then', 'else', 'fi', 'while', 'do', 'od',
    'choice', 'or', 'end', 'var', 'in', 'ni', 'call', 'div', 'mod',
    'and', 'not', 'true', 'false',
    'L', 'R', 'A', 'AA', 'both', 'conv', 'comp',
}

# Tokens that close a statement sequence
_SEQ_CLOSERS = {'od', 'fi', 'else', 'or', 'end', 'ni', ')'}

_CMP_OPS = {op.value: op for op in CmpOp}

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<sym>:=|<=|>=|<>|/\\|\\/|=>|[(){},;:+\-*/=<>~@])
""", re.VERBOSE)

_COMMENT_RE = re.compile(r"\(\*.*?\*\)", re.DOTALL)


class Token(NamedTuple):
    kind: str     # int, ident, sym, eof
    text: str
    line: int
    column: int


def strip_comments(text: str) -> str:
    """Blank out (* ... *) comments, keeping line and column positions."""
    def blank(match):
        return re.sub(r"[^\n]", " ", match.group(0))

    cleaned = _COMMENT_RE.sub(blank, text)
    if "(*" in cleaned:
        line = cleaned[:cleaned.index("(*")].count("\n") + 1
        raise ParseError("unterminated comment", line, 1)
    return cleaned


def tokenize(text: str, first_line: int = 1) -> List[Token]:
    """Split text into tokens, ending with an eof token."""
    text = strip_comments(text)
    tokens = []
    pos = 0
    line = first_line
    line_start = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if not match:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = match.lastgroup
        value = match.group(0)
        if kind != 'ws':
            tokens.append(Token(kind, value, line, pos - line_start + 1))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            line_start = pos + value.rindex("\n") + 1
        pos = match.end()
    tokens.append(Token('eof', '', line, pos - line_start + 1))
    return tokens


def _is_int(node) -> bool:
    return isinstance(node, (IntLit, Var, BinOp, App, Sided))


class _Parser:
    """Recursive-descent parser over a token list."""

    def __init__(self, text: str, first_line: int = 1):
        self.tokens = tokenize(text, first_line)
        self.pos = 0

    # -------------------------------------------------------------------------
    # Token helpers
    # -------------------------------------------------------------------------

    def peek(self, offset: int = 0) -> Token:
        index = min(self.pos + offset, len(self.tokens) - 1)
        return self.tokens[index]

    def advance(self) -> Token:
        token = self.peek()
        if token.kind != 'eof':
            self.pos += 1
        return token

    def at(self, text: str, offset: int = 0) -> bool:
        token = self.peek(offset)
        return token.kind in ('sym', 'ident') and token.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.advance()
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.error(f"expected {text!r}")
        return self.advance()

    def error(self, message: str, token: Optional[Token] = None) -> ParseError:
        token = token or self.peek()
        found = token.text if token.kind != 'eof' else 'end of input'
        return ParseError(f"{message}, found {found!r}", token.line, token.column)

    def expect_eof(self):
        if self.peek().kind != 'eof':
            raise self.error("unexpected trailing input")

    def identifier(self) -> str:
        token = self.peek()
        if token.kind != 'ident':
            raise self.error("expected identifier")
        if token.text in KEYWORDS:
            raise ParseError(f"reserved word {token.text!r} used as a variable",
                             token.line, token.column)
        self.advance()
        return token.text

    def identifier_list(self, closer: Optional[str] = None) -> List[str]:
        names = []
        if closer and self.at(closer):
            return names
        names.append(self.identifier())
        while self.accept(','):
            names.append(self.identifier())
        return names

    # -------------------------------------------------------------------------
    # Commands
    # -------------------------------------------------------------------------

    def sequence(self) -> Command:
        statements = [self.statement()]
        while self.accept(';'):
            token = self.peek()
            if token.kind == 'eof' or token.text in _SEQ_CLOSERS:
                break
            statements.append(self.statement())
        result = statements[-1]
        for statement in reversed(statements[:-1]):
            result = Seq(statement, result)
        return result

    def statement(self) -> Command:
        token = self.peek()
        if self.accept('skip'):
            return Skip()
        if self.accept('havoc'):
            return Havoc(self.identifier())
        if self.accept('if'):
            guard = self.guard()
            self.expect('then')
            then = self.sequence()
            orelse = self.sequence() if self.accept('else') else Skip()
            self.expect('fi')
            return If(guard, then, orelse)
        if self.accept('while'):
            guard = self.guard()
            self.expect('do')
            body = self.sequence()
            self.expect('od')
            return While(guard, body)
        if self.accept('choice'):
            left = self.sequence()
            self.expect('or')
            right = self.sequence()
            self.expect('end')
            return Choice(left, right)
        if self.accept('var'):
            names = self.identifier_list()
            if len(set(names)) != len(names):
                raise ParseError("duplicate local in var block", token.line, token.column)
            self.expect('in')
            body = self.sequence()
            self.expect('ni')
            return VarBlock(tuple(names), body)
        if self.accept('('):
            inner = self.sequence()
            self.expect(')')
            return inner
        if token.kind == 'ident':
            if token.text in KEYWORDS and not self.at(':=', 1):
                raise self.error("expected a statement")
            target = self.identifier()
            self.expect(':=')
            if self.accept('call'):
                self.expect('(')
                args = self.identifier_list(closer=')')
                self.expect(')')
                return CallSite(target, tuple(args))
            rhs_token = self.peek()
            rhs = self.arith(Mode.COMMAND)
            if not _is_int(rhs):
                raise ParseError("right-hand side must be integer-typed",
                                 rhs_token.line, rhs_token.column)
            return Assign(target, rhs)
        raise self.error("expected a statement")

    def guard(self):
        token = self.peek()
        node = self.expression(Mode.COMMAND)
        if _is_int(node):
            raise ParseError("guard must be boolean-typed", token.line, token.column)
        return node

    # -------------------------------------------------------------------------
    # Expressions
    # -------------------------------------------------------------------------

    def expression(self, mode: Mode):
        left = self.disjunction(mode)
        if self.at('=>'):
            token = self.advance()
            right = self.expression(mode)
            self._require_bool(left, token)
            self._require_bool(right, token)
            return Implies(left, right)
        return left

    def disjunction(self, mode: Mode):
        left = self.conjunction(mode)
        while self.at('\\/') or self.at('or'):
            # 'or' also separates choice branches; a non-boolean left side ends the formula
            if self.at('or') and _is_int(left):
                break
            token = self.advance()
            right = self.conjunction(mode)
            self._require_bool(left, token)
            self._require_bool(right, token)
            left = Or(left, right)
        return left

    def conjunction(self, mode: Mode):
        left = self.negation(mode)
        while self.at('/\\') or self.at('and'):
            token = self.advance()
            right = self.negation(mode)
            self._require_bool(left, token)
            self._require_bool(right, token)
            left = And(left, right)
        return left

    def negation(self, mode: Mode):
        if self.at('~') or self.at('not'):
            token = self.advance()
            operand = self.negation(mode)
            self._require_bool(operand, token)
            return Not(operand)
        return self.comparison(mode)

    def comparison(self, mode: Mode):
        left = self.arith(mode)
        token = self.peek()
        if token.kind == 'sym' and token.text in _CMP_OPS:
            self.advance()
            right = self.arith(mode)
            self._require_int(left, token)
            self._require_int(right, token)
            return Cmp(_CMP_OPS[token.text], left, right)
        return left

    def arith(self, mode: Mode):
        left = self.term(mode)
        while self.at('+') or self.at('-'):
            token = self.advance()
            right = self.term(mode)
            self._require_int(left, token)
            self._require_int(right, token)
            op = IntOp.ADD if token.text == '+' else IntOp.SUB
            left = BinOp(op, left, right)
        return left

    def term(self, mode: Mode):
        left = self.unary(mode)
        while self.at('*') or self.at('div') or self.at('mod') or self.at('/'):
            token = self.advance()
            right = self.unary(mode)
            self._require_int(left, token)
            self._require_int(right, token)
            if token.text == '*':
                op = IntOp.MUL
            elif token.text == 'mod':
                op = IntOp.MOD
            else:
                op = IntOp.DIV
            left = BinOp(op, left, right)
        return left

    def unary(self, mode: Mode):
        # binds tighter than the multiplicative operators
        if self.at('-'):
            token = self.advance()
            if self.peek().kind == 'int':
                return IntLit(-int(self.advance().text))
            operand = self.unary(mode)
            self._require_int(operand, token)
            return BinOp(IntOp.SUB, IntLit(0), operand)
        return self.atom(mode)

    def atom(self, mode: Mode):
        token = self.peek()
        if token.kind == 'int':
            self.advance()
            return IntLit(int(token.text))
        if self.accept('true'):
            return BoolLit(True)
        if self.accept('false'):
            return BoolLit(False)
        if self.accept('('):
            inner = self.expression(mode)
            self.expect(')')
            return inner
        if token.kind == 'ident' and token.text in ('L', 'R', 'A', 'AA', 'both', 'conv', 'comp'):
            if mode is not Mode.RELATIONAL:
                raise ParseError(f"relational atom {token.text!r} outside a relational formula",
                                 token.line, token.column)
            return self.relational_atom()
        if token.kind == 'ident':
            name = self.identifier()
            if self.at('('):
                if mode is Mode.COMMAND:
                    raise ParseError(f"function symbol {name!r} not allowed in commands",
                                     token.line, token.column)
                if mode is Mode.RELATIONAL:
                    raise ParseError(f"{name!r} must appear inside L(...) or R(...)",
                                     token.line, token.column)
                self.advance()
                args = []
                if not self.at(')'):
                    args.append(self._int_argument(mode))
                    while self.accept(','):
                        args.append(self._int_argument(mode))
                self.expect(')')
                return App(name, tuple(args))
            if mode is Mode.RELATIONAL:
                raise ParseError(f"variable {name!r} must appear inside L(...), R(...) or A(...)",
                                 token.line, token.column)
            return Var(name)
        raise self.error("expected an expression")

    def relational_atom(self):
        token = self.advance()
        keyword = token.text
        if keyword == 'AA':
            self.expect('{')
            names = self.identifier_list(closer='}')
            self.expect('}')
            return AgreeAll(tuple(names))
        self.expect('(')
        if keyword in ('L', 'R'):
            inner = self.expression(Mode.UNARY)
            self.expect(')')
            side = Side.LEFT if keyword == 'L' else Side.RIGHT
            if _is_int(inner):
                return Sided(side, inner)
            return Left(inner) if side is Side.LEFT else Right(inner)
        if keyword == 'A':
            inner = self._int_argument(Mode.UNARY)
            self.expect(')')
            return Agree(inner)
        if keyword == 'both':
            inner = self.expression(Mode.UNARY)
            self.expect(')')
            self._require_bool(inner, token)
            return Both(inner)
        if keyword == 'conv':
            inner = self.expression(Mode.RELATIONAL)
            self.expect(')')
            self._require_bool(inner, token)
            return Converse(inner)
        first = self.expression(Mode.RELATIONAL)
        self.expect(',')
        second = self.expression(Mode.RELATIONAL)
        self.expect(')')
        self._require_bool(first, token)
        self._require_bool(second, token)
        return Compose(first, second)

    def _int_argument(self, mode: Mode):
        token = self.peek()
        node = self.expression(mode)
        self._require_int(node, token)
        return node

    def _require_int(self, node, token: Token):
        if not _is_int(node):
            raise ParseError(f"integer operand expected near {token.text!r}", token.line, token.column)

    def _require_bool(self, node, token: Token):
        if _is_int(node):
            raise ParseError(f"boolean operand expected near {token.text!r}", token.line, token.column)


# =============================================================================
# TEXT ENTRY POINTS
# =============================================================================

def parse_program(text: str, first_line: int = 1) -> Command:
    """Parse a command; raises ParseError with line/column."""
    parser = _Parser(text, first_line)
    command = parser.sequence()
    parser.expect_eof()
    return command


def parse_int_expr(text: str, mode: Mode = Mode.UNARY):
    parser = _Parser(text)
    token = parser.peek()
    node = parser.expression(mode)
    parser.expect_eof()
    if not _is_int(node):
        raise ParseError("expected an integer expression", token.line, token.column)
    return node


def parse_formula(text: str, first_line: int = 1) -> Formula:
    """Parse a one-store formula."""
    return _parse_bool(text, Mode.UNARY, first_line)


def parse_rel_formula(text: str, first_line: int = 1) -> RelFormula:
    """Parse a two-store formula in bracket style: L(e), R(e), A(e), AA{..}, both(P)."""
    return _parse_bool(text, Mode.RELATIONAL, first_line)


def _parse_bool(text: str, mode: Mode, first_line: int):
    parser = _Parser(text, first_line)
    token = parser.peek()
    node = parser.expression(mode)
    parser.expect_eof()
    if _is_int(node):
        raise ParseError("formula must be boolean-typed", token.line, token.column)
    return node


# =============================================================================
# KEYED FILES
# =============================================================================

def keyed_entries(text: str) -> List[Tuple[str, str, int]]:
    """Split `key: body` lines; indented lines continue the previous body.

    Returns (key, body, line number of the key) triples.
    """
    entries: List[List] = []
    for number, raw in enumerate(strip_comments(text).split("\n"), start=1):
        if not raw.strip():
            continue
        if raw[0] in " \t":
            if not entries:
                raise ParseError("continuation line without a key", number, 1)
            entries[-1][1] += "\n" + raw
            continue
        if ':' not in raw:
            raise ParseError("expected 'key: value'", number, 1)
        key, body = raw.split(':', 1)
        entries.append([key.strip(), body, number])
    return [(key, body, line) for key, body, line in entries]


def parse_label_pair(key: str, line: int = 0) -> Tuple[str, str]:
    """Parse `(c,c')` into a cutpoint pair."""
    key = key.strip()
    if not (key.startswith('(') and key.endswith(')')):
        raise ParseError(f"expected a cutpoint pair '(c,c)', got {key!r}", line, 1)
    parts = [part.strip() for part in key[1:-1].split(',')]
    if len(parts) != 2 or not all(parts):
        raise ParseError(f"expected a cutpoint pair '(c,c)', got {key!r}", line, 1)
    return parts[0], parts[1]


def parse_spec_text(text: str, relational: bool = False):
    """Parse `pre:` / `post:` lines into a Spec or RelSpec."""
    parse = parse_rel_formula if relational else parse_formula
    found: Dict[str, object] = {}
    for key, body, line in keyed_entries(text):
        if key not in ('pre', 'post'):
            raise ParseError(f"unknown spec key {key!r}", line, 1)
        if key in found:
            raise ParseError(f"duplicate spec key {key!r}", line, 1)
        found[key] = parse(body, line)
    for key in ('pre', 'post'):
        if key not in found:
            raise ParseError(f"spec is missing '{key}:'")
    if relational:
        return RelSpec(found['pre'], found['post'])
    return Spec(found['pre'], found['post'])


def parse_annotation_text(text: str) -> Dict[str, Formula]:
    """Parse `L1: <formula>` lines."""
    annotation: Dict[str, Formula] = {}
    for key, body, line in keyed_entries(text):
        if key in annotation:
            raise ParseError(f"duplicate annotation for {key!r}", line, 1)
        annotation[key] = parse_formula(body, line)
    return annotation


def parse_rel_annotation_text(text: str) -> Dict[Tuple[str, str], RelFormula]:
    """Parse `(L1,L1): <relformula>` lines."""
    annotation: Dict[Tuple[str, str], RelFormula] = {}
    for key, body, line in keyed_entries(text):
        pair = parse_label_pair(key, line)
        if pair in annotation:
            raise ParseError(f"duplicate annotation for {key!r}", line, 1)
        annotation[pair] = parse_rel_formula(body, line)
    return annotation


ALIGNMENT_LETTERS = ('l', 'r', 'b', 'ac')


def parse_alignment_text(text: str) -> Dict[str, Dict[Optional[Tuple[str, str]], RelFormula]]:
    """Parse alignment conditions.

    `l: f` applies to every cutpoint pair; `l@(L1,L1): f` only to that pair.
    """
    conditions: Dict[str, Dict[Optional[Tuple[str, str]], RelFormula]] = {}
    for key, body, line in keyed_entries(text):
        letter, _, guard = key.partition('@')
        letter = letter.strip()
        if letter not in ALIGNMENT_LETTERS:
            raise ParseError(f"unknown alignment condition {letter!r}", line, 1)
        pair = parse_label_pair(guard, line) if guard else None
        per_letter = conditions.setdefault(letter, {})
        if pair in per_letter:
            raise ParseError(f"duplicate alignment condition {key!r}", line, 1)
        per_letter[pair] = parse_rel_formula(body, line)
    if 'ac' in conditions and any(letter in conditions for letter in ('l', 'r', 'b')):
        raise ParseError("an alignment uses either 'ac' or 'l'/'r'/'b', not both")
    return conditions


class InputLoader:
    """Reads verification inputs from disk."""

    def _read(self, file_path: str) -> str:
        path = Path(file_path)
        if not path.exists():
            raise FileNotFoundError(f"Input file not found: {file_path}")
        return path.read_text(encoding='utf-8')

    def program(self, file_path: str) -> Command:
        return parse_program(self._read(file_path))

    def spec(self, file_path: str) -> Spec:
        return parse_spec_text(self._read(file_path))

    def rel_spec(self, file_path: str) -> RelSpec:
        return parse_spec_text(self._read(file_path), relational=True)

    def annotation(self, file_path: str) -> Dict[str, Formula]:
        return parse_annotation_text(self._read(file_path))

    def rel_annotation(self, file_path: str) -> Dict[Tuple[str, str], RelFormula]:
        return parse_rel_annotation_text(self._read(file_path))

    def alignment(self, file_path: str):
        return parse_alignment_text(self._read(file_path))

    def text(self, file_path: str) -> str:
        return self._read(file_path)
