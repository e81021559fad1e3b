"""
Proof checker for unary and relational Hoare-logic derivations.

Every node must instantiate its rule schema exactly: premises and
conclusion are matched syntactically (sequences are compared as flat
statement lists), entailment side conditions are discharged over the
bounded domain, and variable conditions are checked on the syntax.
Premises are checked before the node that uses them, so the first error
reported sits at the deepest failing node.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

from automaton import build_automaton
from derivations import RULES, Derivation, RelJudgment, UnaryJudgment, node_path
from discharge import (
    Domain, SymbolTable, VerdictKind, check_entailment, enumerate_stores, eval_rel, eval_unary,
    space_size,
)
from equiv_laws import flatten_seq, normalize, rewrite_chain
from errors import UnknownResult, WellFormednessError
from models import (
    App, BinOp, BoolLit, Cmp, IntLit, Sided, Var,
    And, Or, Not, Implies, Left, Right, Agree, AgreeAll, Both, Converse, Compose,
    Skip, Assign, Havoc, If, While, Choice, VarBlock, CallSite,
    Command, conj, disj, iff,
)
from product import ProductKind, construct_product, explore_product
from semantics import OutcomeKind, Store, run_bounded
from syntax_ops import (
    Callee, all_vars, command_vars, erase_aux, formula_vars, has_calls, inline_calls,
    is_auxiliary, is_deterministic, rel_vars, subst_rel, subst_unary, symbols_of,
)

logger = logging.getLogger(__name__)

Path = Tuple[int, ...]

# products whose exploration covers every pair of terminated runs
_EXPLORE_KINDS = (ProductKind.EAGER_LOCKSTEP, ProductKind.INTERLEAVED, ProductKind.MAXIMAL,
                  ProductKind.SEQUENCED)


@dataclass
class CheckError:
    path: Path
    rule: str
    reason: str
    counterexample: Optional[str] = None

    def __str__(self) -> str:
        text = f"{node_path(self.path)} ({self.rule}): {self.reason}"
        return f"{text}; {self.counterexample}" if self.counterexample else text


@dataclass
class CheckResult:
    error: Optional[CheckError]
    assumptions: List[str] = field(default_factory=list)
    nodes_checked: int = 0
    rules: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def status(self) -> str:
        if self.error is not None:
            return "error"
        return "proved-with-assumptions" if self.assumptions else "proved"


class _Reject(Exception):
    def __init__(self, reason: str, counterexample: Optional[str] = None):
        super().__init__(reason)
        self.reason = reason
        self.counterexample = counterexample


@dataclass(frozen=True)
class _Client:
    """Context of a CmdFun client premise: call sites stand for the linked callee."""
    symbol: str
    callee: Callee


# =============================================================================
# SMALL HELPERS
# =============================================================================

def _same(actual, expected, what: str):
    if actual != expected:
        raise _Reject(f"{what}: expected {expected}, found {actual}")


def _same_command(actual: Command, expected: Command, what: str):
    _same(normalize(actual), normalize(expected), what)


def _splits(whole: Command, first: Command, second: Command) -> bool:
    return flatten_seq(normalize(whole)) == flatten_seq(normalize(first)) + flatten_seq(normalize(second))


def _unary(j, what: str) -> UnaryJudgment:
    if not isinstance(j, UnaryJudgment):
        raise _Reject(f"{what} must be a unary judgment")
    return j


def _rel(j, what: str) -> RelJudgment:
    if not isinstance(j, RelJudgment):
        raise _Reject(f"{what} must be a relational judgment")
    return j


def _is(c, kind, what: str):
    if not isinstance(c, kind):
        raise _Reject(f"{what} must be a {kind.__name__.lower()} command, found {c}")
    return c


def _strip_sided(e):
    if isinstance(e, Sided):
        return e.expr
    if isinstance(e, BinOp):
        return BinOp(e.op, _strip_sided(e.left), _strip_sided(e.right))
    if isinstance(e, App):
        return App(e.func, tuple(_strip_sided(a) for a in e.args))
    return e


def merge_sides(r):
    """One-store reading of a relational formula over disjoint variables."""
    if isinstance(r, BoolLit):
        return r
    if isinstance(r, (Left, Right)):
        return r.pred
    if isinstance(r, Cmp):
        return Cmp(r.op, _strip_sided(r.left), _strip_sided(r.right))
    if isinstance(r, (And, Or, Implies)):
        return type(r)(merge_sides(r.left), merge_sides(r.right))
    if isinstance(r, Not):
        return Not(merge_sides(r.operand))
    raise _Reject(f"{r} relates the two stores and has no one-store reading")


def _agreement_names(p) -> Optional[frozenset]:
    """Variables of a conjunction of plain agreements, or None."""
    if isinstance(p, AgreeAll):
        return frozenset(p.names)
    if isinstance(p, Agree) and isinstance(p.expr, Var):
        return frozenset({p.expr.name})
    if isinstance(p, And):
        left, right = _agreement_names(p.left), _agreement_names(p.right)
        if left is not None and right is not None:
            return left | right
    return None


# =============================================================================
# CHECKER
# =============================================================================

class ProofChecker:
    """Checks derivation trees over a bounded domain."""

    def __init__(self, d: Domain):
        self.domain = d
        self.assumptions: List[str] = []
        self.nodes = 0
        self._handlers: Dict[str, Callable] = {
            name: getattr(self, f"_rule_{name.lower()}") for name in RULES
        }

    def check(self, node: Derivation) -> CheckResult:
        error = self._check(node, (), self.domain, None)
        result = CheckResult(error, list(self.assumptions), self.nodes, node.rules_used())
        if error:
            logger.debug("proof rejected at %s", error)
        return result

    def _check(self, node: Derivation, path: Path, d: Domain, ctx: Optional[_Client]) -> Optional[CheckError]:
        self.nodes += 1
        try:
            info = RULES.get(node.rule)
            if info is None:
                raise _Reject(f"unknown rule {node.rule!r}")
            if len(node.premises) != info.arity:
                raise _Reject(f"{node.rule} takes {info.arity} premise(s), found {len(node.premises)}")
            contexts = self._premise_contexts(node, d, ctx)
        except _Reject as exc:
            return CheckError(path, node.rule, exc.reason, exc.counterexample)
        except (WellFormednessError, UnknownResult) as exc:
            return CheckError(path, node.rule, str(exc))
        for index, premise in enumerate(node.premises):
            inner_d, inner_ctx = contexts[index]
            error = self._check(premise, path + (index,), inner_d, inner_ctx)
            if error is not None:
                return error
        try:
            premises = [premise.conclusion for premise in node.premises]
            self._handlers[node.rule](node, node.conclusion, premises, d, ctx, path)
        except _Reject as exc:
            return CheckError(path, node.rule, exc.reason, exc.counterexample)
        except (WellFormednessError, UnknownResult) as exc:
            return CheckError(path, node.rule, str(exc))
        return None

    def _premise_contexts(self, node: Derivation, d: Domain, ctx):
        contexts = [(d, ctx)] * len(node.premises)
        if node.rule == 'CmdFun':
            client_d, client = self._link(node, d)
            contexts[2] = (client_d, client)
        return contexts

    # -------------------------------------------------------------------------
    # Side-condition machinery
    # -------------------------------------------------------------------------

    def _entails(self, hypothesis, conclusion, d: Domain, relational: bool, what: str):
        verdict = check_entailment(hypothesis, conclusion, d, relational)
        if verdict.is_valid:
            return
        if verdict.kind is VerdictKind.UNKNOWN:
            raise _Reject(f"side condition {what} undecided: {verdict.reason}")
        raise _Reject(f"side condition {what} fails: {hypothesis} => {conclusion}", verdict.describe())

    def _stores(self, names, d: Domain):
        names = sorted(names)
        size = space_size(names, d)
        if size > d.budget:
            raise _Reject(f"{size} stores exceed the enumeration budget {d.budget}")
        return enumerate_stores(names, d)

    def _terminates(self, c: Command, pre, d: Domain, what: str, path: Path):
        """Some run of c terminates from every store satisfying pre, within fuel."""
        names = set(all_vars(c)) | formula_vars(pre)
        count = 0
        for s in self._stores(names, d):
            if not eval_unary(pre, s, d):
                continue
            count += 1
            outcomes = run_bounded(c, s, d.fuel, d.step_limits)
            if not any(o.kind is OutcomeKind.TERMINATED for o in outcomes):
                cut = any(o.kind is OutcomeKind.CUTOFF for o in outcomes)
                reason = f"cut off after {d.fuel} steps" if cut else "gets stuck"
                raise _Reject(f"{what} `{c}` {reason} from {s}")
        self.assumptions.append(
            f"{node_path(path)}: {what} `{c}` terminates (bounded: {count} stores, fuel {d.fuel})")

    # -------------------------------------------------------------------------
    # Unary rules
    # -------------------------------------------------------------------------

    def _rule_skip(self, node, j, ps, d, ctx, path):
        j = _unary(j, "conclusion")
        _is(j.command, Skip, "command")
        _same(j.pre, j.post, "precondition")

    def _rule_assign(self, node, j, ps, d, ctx, path):
        j = _unary(j, "conclusion")
        c = _is(j.command, Assign, "command")
        _same(j.pre, subst_unary(j.post, c.target, c.rhs), "precondition")

    def _rule_havoc(self, node, j, ps, d, ctx, path):
        j = _unary(j, "conclusion")
        c = _is(j.command, Havoc, "command")
        weakest = conj(*[subst_unary(j.post, c.target, IntLit(v))
                         for v in d.step_limits.havoc_range(c.target)])
        self._entails(j.pre, weakest, d, False, "P => Q[v/x]")

    def _rule_seq(self, node, j, ps, d, ctx, path):
        j = _unary(j, "conclusion")
        p0, p1 = _unary(ps[0], "premise 0"), _unary(ps[1], "premise 1")
        if not _splits(j.command, p0.command, p1.command):
            raise _Reject(f"`{j.command}` is not `{p0.command}` followed by `{p1.command}`")
        _same(p0.pre, j.pre, "premise 0 precondition")
        _same(p1.post, j.post, "premise 1 postcondition")
        _same(p1.pre, p0.post, "intermediate assertion")

    def _rule_if(self, node, j, ps, d, ctx, path):
        j = _unary(j, "conclusion")
        c = _is(j.command, If, "command")
        p0, p1 = _unary(ps[0], "premise 0"), _unary(ps[1], "premise 1")
        _same_command(p0.command, c.then, "premise 0 command")
        _same_command(p1.command, c.orelse, "premise 1 command")
        _same(p0.pre, And(j.pre, c.guard), "premise 0 precondition")
        _same(p1.pre, And(j.pre, Not(c.guard)), "premise 1 precondition")
        _same(p0.post, j.post, "premise 0 postcondition")
        _same(p1.post, j.post, "premise 1 postcondition")

    def _rule_choice(self, node, j, ps, d, ctx, path):
        j = _unary(j, "conclusion")
        c = _is(j.command, Choice, "command")
        p0, p1 = _unary(ps[0], "premise 0"), _unary(ps[1], "premise 1")
        _same_command(p0.command, c.left, "premise 0 command")
        _same_command(p1.command, c.right, "premise 1 command")
        _same(p0.pre, j.pre, "premise 0 precondition")
        _same(p1.pre, j.pre, "premise 1 precondition")
        _same(j.post, Or(p0.post, p1.post), "postcondition")

    def _rule_while(self, node, j, ps, d, ctx, path):
        j = _unary(j, "conclusion")
        c = _is(j.command, While, "command")
        p0 = _unary(ps[0], "premise 0")
        _same_command(p0.command, c.body, "premise command")
        _same(p0.pre, And(j.pre, c.guard), "premise precondition")
        _same(p0.post, j.pre, "premise postcondition")
        _same(j.post, And(j.pre, Not(c.guard)), "postcondition")

    def _rule_conseq(self, node, j, ps, d, ctx, path):
        j = _unary(j, "conclusion")
        p0 = _unary(ps[0], "premise 0")
        _same_command(p0.command, j.command, "premise command")
        self._entails(j.pre, p0.pre, d, False, "P => R")
        self._entails(p0.post, j.post, d, False, "S => Q")

    def _rule_conj(self, node, j, ps, d, ctx, path):
        j = _unary(j, "conclusion")
        p0, p1 = _unary(ps[0], "premise 0"), _unary(ps[1], "premise 1")
        for i, p in enumerate((p0, p1)):
            _same_command(p.command, j.command, f"premise {i} command")
            _same(p.pre, j.pre, f"premise {i} precondition")
        _same(j.post, And(p0.post, p1.post), "postcondition")

    def _rule_disj(self, node, j, ps, d, ctx, path):
        j = _unary(j, "conclusion")
        p0, p1 = _unary(ps[0], "premise 0"), _unary(ps[1], "premise 1")
        for i, p in enumerate((p0, p1)):
            _same_command(p.command, j.command, f"premise {i} command")
            _same(p.post, j.post, f"premise {i} postcondition")
        _same(j.pre, Or(p0.pre, p1.pre), "precondition")

    def _rule_frame(self, node, j, ps, d, ctx, path):
        j = _unary(j, "conclusion")
        p0 = _unary(ps[0], "premise 0")
        _same_command(p0.command, j.command, "premise command")
        if not isinstance(j.pre, And):
            raise _Reject("precondition must be P /\\ R")
        frame = j.pre.right
        _same(j.pre, And(p0.pre, frame), "precondition")
        _same(j.post, And(p0.post, frame), "postcondition")
        clash = formula_vars(frame) & set(all_vars(j.command))
        if clash:
            raise _Reject(f"frame {frame} mentions variables of the command: {', '.join(sorted(clash))}")

    def _rule_auxvar(self, node, j, ps, d, ctx, path):
        j = _unary(j, "conclusion")
        p0 = _unary(ps[0], "premise 0")
        xs = tuple(node.side.get('vars', ()))
        if not xs:
            raise _Reject("AuxVar needs (side (vars ..))")
        block = _is(p0.command, VarBlock, "premise command")
        _same(set(block.locals), set(xs), "var block locals")
        free = (formula_vars(j.pre) | formula_vars(j.post)) & set(xs)
        if free:
            raise _Reject(f"auxiliary variables occur in the spec: {', '.join(sorted(free))}")
        if not is_auxiliary(xs, block.body):
            raise _Reject(f"{', '.join(xs)} not auxiliary in `{block.body}`")
        _same_command(j.command, erase_aux(xs, block.body), "erased command")
        _same(p0.pre, j.pre, "premise precondition")
        _same(p0.post, j.post, "premise postcondition")

    def _rule_existspre(self, node, j, ps, d, ctx, path):
        j = _unary(j, "conclusion")
        p0 = _unary(ps[0], "premise 0")
        x = node.side.get('var')
        if not x:
            raise _Reject("ExistsPre needs (side (var x))")
        _same_command(p0.command, j.command, "premise command")
        _same(p0.post, j.post, "premise postcondition")
        if x in formula_vars(j.post):
            raise _Reject(f"{x} is free in the postcondition")
        if x in all_vars(j.command):
            raise _Reject(f"{x} is a variable of the command")
        witness = disj(*[subst_unary(p0.pre, x, IntLit(v)) for v in d.values(x)])
        self._entails(j.pre, witness, d, False, f"P' => exists {x}. P")

    def _rule_call(self, node, j, ps, d, ctx, path):
        j = _unary(j, "conclusion")
        c = _is(j.command, CallSite, "command")
        if ctx is None:
            raise _Reject("call site outside a CmdFun client premise")
        if len(c.args) != len(ctx.callee.params):
            raise _Reject(f"call passes {len(c.args)} arguments, {ctx.symbol} takes {len(ctx.callee.params)}")
        value = App(ctx.symbol, tuple(Var(a) for a in c.args))
        _same(j.pre, subst_unary(j.post, c.result, value), "precondition")

    # -------------------------------------------------------------------------
    # Relational diagonal rules
    # -------------------------------------------------------------------------

    def _rule_dskip(self, node, j, ps, d, ctx, path):
        j = _rel(j, "conclusion")
        _is(j.left, Skip, "left command")
        _is(j.right, Skip, "right command")
        _same(j.pre, j.post, "precondition")

    def _rule_dassign(self, node, j, ps, d, ctx, path):
        j = _rel(j, "conclusion")
        c = _is(j.left, Assign, "left command")
        c2 = _is(j.right, Assign, "right command")
        _same(j.pre, subst_rel(j.post, c.target, c.rhs, c2.target, c2.rhs), "precondition")

    def _rule_dseq(self, node, j, ps, d, ctx, path):
        j = _rel(j, "conclusion")
        p0, p1 = _rel(ps[0], "premise 0"), _rel(ps[1], "premise 1")
        if not _splits(j.left, p0.left, p1.left):
            raise _Reject(f"`{j.left}` is not `{p0.left}` followed by `{p1.left}`")
        if not _splits(j.right, p0.right, p1.right):
            raise _Reject(f"`{j.right}` is not `{p0.right}` followed by `{p1.right}`")
        _same(p0.pre, j.pre, "premise 0 precondition")
        _same(p1.post, j.post, "premise 1 postcondition")
        _same(p1.pre, p0.post, "intermediate relation")

    def _branch_premise(self, p: RelJudgment, left, right, pre, post, what: str):
        _same_command(p.left, left, f"{what} left command")
        _same_command(p.right, right, f"{what} right command")
        _same(p.pre, pre, f"{what} precondition")
        _same(p.post, post, f"{what} postcondition")

    def _rule_dif4(self, node, j, ps, d, ctx, path):
        j = _rel(j, "conclusion")
        c = _is(j.left, If, "left command")
        c2 = _is(j.right, If, "right command")
        e, e2 = c.guard, c2.guard
        ps = [_rel(p, f"premise {i}") for i, p in enumerate(ps)]
        self._branch_premise(ps[0], c.then, c2.then, conj(j.pre, Left(e), Right(e2)), j.post, "premise 0")
        self._branch_premise(ps[1], c.orelse, c2.orelse, conj(j.pre, Left(Not(e)), Right(Not(e2))),
                             j.post, "premise 1")
        self._branch_premise(ps[2], c.then, c2.orelse, conj(j.pre, Left(e), Right(Not(e2))),
                             j.post, "premise 2")
        self._branch_premise(ps[3], c.orelse, c2.then, conj(j.pre, Left(Not(e)), Right(e2)),
                             j.post, "premise 3")

    def _rule_altagree(self, node, j, ps, d, ctx, path):
        j = _rel(j, "conclusion")
        c = _is(j.left, If, "left command")
        c2 = _is(j.right, If, "right command")
        e, e2 = c.guard, c2.guard
        p0, p1 = _rel(ps[0], "premise 0"), _rel(ps[1], "premise 1")
        self._branch_premise(p0, c.then, c2.then, conj(j.pre, Left(e), Right(e2)), j.post, "premise 0")
        self._branch_premise(p1, c.orelse, c2.orelse, conj(j.pre, Left(Not(e)), Right(Not(e2))),
                             j.post, "premise 1")
        self._entails(j.pre, iff(Left(e), Right(e2)), d, True, "R => L(e) = R(e')")

    def _loop_post(self, j: RelJudgment, e, e2):
        _same(j.post, conj(j.pre, Left(Not(e)), Right(Not(e2))), "postcondition")

    def _rule_iteragree(self, node, j, ps, d, ctx, path):
        j = _rel(j, "conclusion")
        c = _is(j.left, While, "left command")
        c2 = _is(j.right, While, "right command")
        e, e2 = c.guard, c2.guard
        self._loop_post(j, e, e2)
        self._branch_premise(_rel(ps[0], "premise 0"), c.body, c2.body,
                             conj(j.pre, Left(e), Right(e2)), j.pre, "premise 0")
        self._entails(j.pre, iff(Left(e), Right(e2)), d, True, "Q => L(e) = R(e')")

    def _rule_eagerwhile(self, node, j, ps, d, ctx, path):
        j = _rel(j, "conclusion")
        c = _is(j.left, While, "left command")
        c2 = _is(j.right, While, "right command")
        e, e2 = c.guard, c2.guard
        q = j.pre
        self._loop_post(j, e, e2)
        ps = [_rel(p, f"premise {i}") for i, p in enumerate(ps)]
        self._branch_premise(ps[0], c.body, c2.body, conj(q, Left(e), Right(e2)), q, "premise 0")
        self._branch_premise(ps[1], c.body, Skip(), conj(q, Left(e), Right(Not(e2))), q, "premise 1")
        self._branch_premise(ps[2], Skip(), c2.body, conj(q, Left(Not(e)), Right(e2)), q, "premise 2")

    def _rule_while3(self, node, j, ps, d, ctx, path):
        j = _rel(j, "conclusion")
        c = _is(j.left, While, "left command")
        c2 = _is(j.right, While, "right command")
        if 'l' not in node.side or 'r' not in node.side:
            raise _Reject("While3 needs (side (l ..) (r ..))")
        lrel, rrel = node.side['l'], node.side['r']
        e, e2 = c.guard, c2.guard
        q = j.pre
        self._loop_post(j, e, e2)
        ps = [_rel(p, f"premise {i}") for i, p in enumerate(ps)]
        self._branch_premise(ps[0], c.body, c2.body,
                             conj(q, Left(e), Right(e2), Not(lrel), Not(rrel)), q, "premise 0")
        self._branch_premise(ps[1], c.body, Skip(), conj(q, lrel, Left(e)), q, "premise 1")
        self._branch_premise(ps[2], Skip(), c2.body, conj(q, rrel, Right(e2)), q, "premise 2")
        covered = disj(iff(Left(e), Right(e2)), And(lrel, Left(e)), And(rrel, Right(e2)))
        self._entails(q, covered, d, True, "loop coverage")

    # -------------------------------------------------------------------------
    # One-side and mixed rules
    # -------------------------------------------------------------------------

    def _rule_lassign(self, node, j, ps, d, ctx, path):
        j = _rel(j, "conclusion")
        c = _is(j.left, Assign, "left command")
        _is(j.right, Skip, "right command")
        _same(j.pre, subst_rel(j.post, c.target, c.rhs), "precondition")

    def _rule_lseq(self, node, j, ps, d, ctx, path):
        j = _rel(j, "conclusion")
        p0, p1 = _rel(ps[0], "premise 0"), _rel(ps[1], "premise 1")
        _is(p0.right, Skip, "premise 0 right command")
        if not _splits(j.left, p0.left, p1.left):
            raise _Reject(f"`{j.left}` is not `{p0.left}` followed by `{p1.left}`")
        _same_command(p1.right, j.right, "premise 1 right command")
        _same(p0.pre, j.pre, "premise 0 precondition")
        _same(p1.post, j.post, "premise 1 postcondition")
        _same(p1.pre, p0.post, "intermediate relation")

    def _rule_lif(self, node, j, ps, d, ctx, path):
        j = _rel(j, "conclusion")
        c = _is(j.left, If, "left command")
        p0, p1 = _rel(ps[0], "premise 0"), _rel(ps[1], "premise 1")
        self._branch_premise(p0, c.then, j.right, And(j.pre, Left(c.guard)), j.post, "premise 0")
        self._branch_premise(p1, c.orelse, j.right, And(j.pre, Left(Not(c.guard))), j.post, "premise 1")

    def _rule_whseq(self, node, j, ps, d, ctx, path):
        j = _rel(j, "conclusion")
        loop = _is(j.left, While, "left command")
        p0, p1 = _rel(ps[0], "premise 0"), _rel(ps[1], "premise 1")
        first = _is(p0.left, While, "premise 0 left command")
        if not (isinstance(first.guard, And) and first.guard.left == loop.guard):
            raise _Reject(f"premise 0 loop guard must be `{loop.guard} /\\ b`, found `{first.guard}`")
        _same_command(first.body, loop.body, "premise 0 loop body")
        _same_command(p1.left, loop, "premise 1 left command")
        if not _splits(j.right, p0.right, p1.right):
            raise _Reject(f"`{j.right}` is not `{p0.right}` followed by `{p1.right}`")
        _same(p0.pre, j.pre, "premise 0 precondition")
        _same(p1.pre, p0.post, "intermediate relation")
        _same(p1.post, j.post, "premise 1 postcondition")
        self._entails(And(p0.post, Left(Not(loop.guard))), j.post, d, True, "Q /\\ L(~e) => R")

    # -------------------------------------------------------------------------
    # Between unary and relational judgments
    # -------------------------------------------------------------------------

    def _rule_seqprod(self, node, j, ps, d, ctx, path):
        j = _rel(j, "conclusion")
        p0 = _unary(ps[0], "premise 0")
        shared = set(all_vars(j.left)) & set(all_vars(j.right))
        if shared:
            raise _Reject(f"commands share variables: {', '.join(sorted(shared))}")
        left_f, right_f = rel_vars(j.pre)
        left_g, right_g = rel_vars(j.post)
        lefts, rights = left_f | left_g, right_f | right_g
        crossing = (lefts & (rights | set(all_vars(j.right)))) | (rights & set(all_vars(j.left)))
        if crossing:
            raise _Reject(f"spec mixes the two stores on: {', '.join(sorted(crossing))}")
        if not _splits(p0.command, j.left, j.right):
            raise _Reject(f"premise command must be `{j.left}; {j.right}`")
        _same(p0.pre, merge_sides(j.pre), "premise precondition")
        _same(p0.post, merge_sides(j.post), "premise postcondition")

    def _rule_embed(self, node, j, ps, d, ctx, path):
        j = _rel(j, "conclusion")
        p0, p1 = _unary(ps[0], "premise 0"), _unary(ps[1], "premise 1")
        _same_command(p0.command, j.left, "premise 0 command")
        _same_command(p1.command, j.right, "premise 1 command")
        _same(j.pre, And(Left(p0.pre), Right(p1.pre)), "precondition")
        _same(j.post, And(Left(p0.post), Right(p1.post)), "postcondition")

    def _rule_erefl(self, node, j, ps, d, ctx, path):
        j = _rel(j, "conclusion")
        p0 = _unary(ps[0], "premise 0")
        _same_command(j.left, p0.command, "left command")
        _same_command(j.right, p0.command, "right command")
        if not is_deterministic(p0.command):
            raise _Reject(f"`{p0.command}` is not deterministic")
        reads, writes = command_vars(p0.command)
        _same(j.pre, And(AgreeAll(tuple(reads | writes)), Both(p0.pre)), "precondition")
        _same(j.post, AgreeAll(tuple(writes)), "postcondition")

    def _rule_ecorr(self, node, j, ps, d, ctx, path):
        j = _unary(j, "conclusion")
        p0, p1 = _unary(ps[0], "premise 0"), _rel(ps[1], "premise 1")
        reads, writes = command_vars(p0.command)
        reads2, writes2 = command_vars(j.command)
        _same_command(p1.left, p0.command, "premise 1 left command")
        _same_command(p1.right, j.command, "premise 1 right command")
        agreement = AgreeAll(tuple(reads | writes | reads2 | writes2))
        _same(p1.pre, And(agreement, Both(p0.pre)), "premise 1 precondition")
        _same(p1.post, AgreeAll(tuple(writes | writes2)), "premise 1 postcondition")
        _same(p0.pre, j.pre, "premise 0 precondition")
        _same(p0.post, j.post, "premise 0 postcondition")
        self._terminates(p0.command, j.pre, d, "Ecorr source", path)

    # -------------------------------------------------------------------------
    # Spec manipulation
    # -------------------------------------------------------------------------

    def _same_commands(self, p: RelJudgment, j: RelJudgment, what: str):
        _same_command(p.left, j.left, f"{what} left command")
        _same_command(p.right, j.right, f"{what} right command")

    def _rule_relconseq(self, node, j, ps, d, ctx, path):
        j = _rel(j, "conclusion")
        p0 = _rel(ps[0], "premise 0")
        self._same_commands(p0, j, "premise")
        self._entails(j.pre, p0.pre, d, True, "P => R")
        self._entails(p0.post, j.post, d, True, "S => Q")

    def _rule_relframe(self, node, j, ps, d, ctx, path):
        j = _rel(j, "conclusion")
        p0 = _rel(ps[0], "premise 0")
        self._same_commands(p0, j, "premise")
        if not isinstance(j.pre, And):
            raise _Reject("precondition must be P /\\ R")
        frame = j.pre.right
        _same(j.pre, And(p0.pre, frame), "precondition")
        _same(j.post, And(p0.post, frame), "postcondition")
        left, right = rel_vars(frame)
        clash = (left | right) & (set(all_vars(j.left)) | set(all_vars(j.right)))
        if clash:
            raise _Reject(f"frame {frame} mentions variables of the commands: {', '.join(sorted(clash))}")

    def _rule_swap(self, node, j, ps, d, ctx, path):
        j = _rel(j, "conclusion")
        p0 = _rel(ps[0], "premise 0")
        _same_command(j.left, p0.right, "left command")
        _same_command(j.right, p0.left, "right command")
        _same(j.pre, Converse(p0.pre), "precondition")
        _same(j.post, Converse(p0.post), "postcondition")

    def _rule_comp(self, node, j, ps, d, ctx, path):
        j = _rel(j, "conclusion")
        p0, p1 = _rel(ps[0], "premise 0"), _rel(ps[1], "premise 1")
        _same_command(p0.left, j.left, "premise 0 left command")
        _same_command(p1.right, j.right, "premise 1 right command")
        _same_command(p1.left, p0.right, "middle command")
        _same(j.pre, Compose(p0.pre, p1.pre), "precondition")
        _same(j.post, Compose(p0.post, p1.post), "postcondition")
        self._terminates(p0.right, BoolLit(True), d, "Comp middle command", path)

    def _rule_relconj(self, node, j, ps, d, ctx, path):
        j = _rel(j, "conclusion")
        p0, p1 = _rel(ps[0], "premise 0"), _rel(ps[1], "premise 1")
        for i, p in enumerate((p0, p1)):
            self._same_commands(p, j, f"premise {i}")
            _same(p.pre, j.pre, f"premise {i} precondition")
        _same(j.post, And(p0.post, p1.post), "postcondition")

    def _rule_reldisj(self, node, j, ps, d, ctx, path):
        j = _rel(j, "conclusion")
        p0, p1 = _rel(ps[0], "premise 0"), _rel(ps[1], "premise 1")
        for i, p in enumerate((p0, p1)):
            self._same_commands(p, j, f"premise {i}")
            _same(p.post, j.post, f"premise {i} postcondition")
        _same(j.pre, Or(p0.pre, p1.pre), "precondition")

    def _rule_rewrite(self, node, j, ps, d, ctx, path):
        p0 = ps[0]
        left_steps = node.side.get('left', ())
        right_steps = node.side.get('right', ())
        if isinstance(j, UnaryJudgment):
            p0 = _unary(p0, "premise 0")
            if right_steps:
                raise _Reject("a unary Rewrite has only (left ..) steps")
            _same(rewrite_chain(j.command, left_steps), normalize(p0.command), "rewritten command")
        else:
            p0 = _rel(p0, "premise 0")
            _same(rewrite_chain(j.left, left_steps), normalize(p0.left), "rewritten left command")
            _same(rewrite_chain(j.right, right_steps), normalize(p0.right), "rewritten right command")
        _same(p0.pre, j.pre, "premise precondition")
        _same(p0.post, j.post, "premise postcondition")

    # -------------------------------------------------------------------------
    # Linking a command as a function
    # -------------------------------------------------------------------------

    def _link(self, node: Derivation, d: Domain):
        """Validate CmdFun's own conditions; returns the client premise context."""
        j = _unary(node.conclusion, "conclusion")
        f = node.side.get('symbol')
        params = tuple(node.side.get('params', ()))
        result = node.side.get('result')
        if not f or not result:
            raise _Reject("CmdFun needs (side (symbol f) (params ..) (result z))")
        p0 = _rel(node.premises[0].conclusion, "premise 0")
        c = p0.left
        if has_calls(c):
            raise _Reject(f"linked command `{c}` contains call sites")
        if d.symbols is not None and f in d.symbols:
            raise _Reject(f"{f} is not fresh")
        if f in symbols_of(j.pre) | symbols_of(j.post):
            raise _Reject(f"{f} is not fresh: it occurs in the conclusion")
        _, writes = command_vars(c)
        if writes & set(params):
            raise _Reject(f"`{c}` writes its parameters: {', '.join(sorted(writes & set(params)))}")
        if writes - {result}:
            raise _Reject(f"`{c}` writes more than {result}: {', '.join(sorted(writes - {result}))}")
        table = SymbolTable()
        callee = Callee(params, result, c)
        table.define(f, callee)
        return d.with_symbols(table), _Client(f, callee)

    def _rule_cmdfun(self, node, j, ps, d, ctx, path):
        j = _unary(j, "conclusion")
        client_d, client = self._link(node, d)
        callee = client.callee
        params, result, c = callee.params, callee.result, callee.body
        p0, p1, p2 = _rel(ps[0], "premise 0"), _rel(ps[1], "premise 1"), _unary(ps[2], "premise 2")
        for i, p in enumerate((p0, p1)):
            _same_command(p.left, c, f"premise {i} left command")
            _same_command(p.right, c, f"premise {i} right command")
        if _agreement_names(p0.pre) != frozenset(params):
            raise _Reject(f"premise 0 precondition must be agreement on {', '.join(params)}, found {p0.pre}")
        if _agreement_names(p0.post) != frozenset({result}):
            raise _Reject(f"premise 0 postcondition must be agreement on {result}, found {p0.post}")
        left, right = rel_vars(p1.pre)
        if (left | right) - set(params):
            raise _Reject(f"premise 1 precondition mentions non-parameters: {p1.pre}")
        left, right = rel_vars(p1.post)
        if (left | right) - {result}:
            raise _Reject(f"premise 1 postcondition mentions more than {result}: {p1.post}")
        _same_command(p2.command, j.command, "premise 2 command")
        _same(p2.pre, j.pre, "premise 2 precondition")
        _same(p2.post, j.post, "premise 2 postcondition")
        self._defining_spec(client, client_d)
        self._axiom(client, p1.pre, p1.post, client_d)
        self._linked_replay(j, callee, d)

    def _defining_spec(self, client: _Client, d: Domain):
        """C : <true><z = f(x)> with f interpreted by running C."""
        callee = client.callee
        names = set(all_vars(callee.body)) | set(callee.params) | {callee.result}
        for s in self._stores(names, d):
            args = tuple(s[p] for p in callee.params)
            expected = d.symbols(client.symbol, args)
            for outcome in run_bounded(callee.body, s, d.fuel, d.step_limits):
                if outcome.terminated and outcome.final_store[callee.result] != expected:
                    raise _Reject(f"defining spec fails: from {s} the command ends with "
                                  f"{callee.result}={outcome.final_store[callee.result]}, "
                                  f"{client.symbol}{args} = {expected}")

    def _axiom(self, client: _Client, pre, post, d: Domain):
        """forall x, x'. R(x, x') => S(f(x), f(x')) over the domain."""
        callee = client.callee
        for s in self._stores(callee.params, d):
            for t in self._stores(callee.params, d):
                if not eval_rel(pre, s, t, d):
                    continue
                fs = Store({callee.result: d.symbols(client.symbol, tuple(s[p] for p in callee.params))})
                ft = Store({callee.result: d.symbols(client.symbol, tuple(t[p] for p in callee.params))})
                if not eval_rel(post, fs, ft, d):
                    raise _Reject(f"axiom {pre} => {post} fails for {client.symbol}",
                                  f"left: {s}; right: {t}; left result: {fs}; right result: {ft}")

    def _linked_replay(self, j: UnaryJudgment, callee: Callee, d: Domain):
        linked = inline_calls(j.command, callee)
        names = set(all_vars(linked)) | formula_vars(j.pre) | formula_vars(j.post)
        for s in self._stores(names, d):
            if not eval_unary(j.pre, s, d):
                continue
            for outcome in run_bounded(linked, s, d.fuel, d.step_limits):
                if outcome.terminated and not eval_unary(j.post, outcome.final_store, d):
                    raise _Reject("linked program violates the conclusion",
                                  f"from {s} to {outcome.final_store}")

    # -------------------------------------------------------------------------
    # Exhaustive leaves
    # -------------------------------------------------------------------------

    def _rule_explore(self, node, j, ps, d, ctx, path):
        j = _rel(j, "conclusion")
        try:
            kind = ProductKind(node.side.get('product', ProductKind.EAGER_LOCKSTEP.value))
        except ValueError:
            raise _Reject(f"unknown product kind {node.side.get('product')!r}") from None
        if kind not in _EXPLORE_KINDS:
            raise _Reject(f"{kind.value} products do not cover every run pair")
        fuel = node.side.get('fuel', d.fuel)
        p = construct_product(kind, build_automaton(j.left), build_automaton(j.right))
        exploration = explore_product(p, j.pre, d, fuel, reduce=True)
        if not exploration.complete:
            raise _Reject(f"exploration cut off after {fuel} product steps")
        for s, t in exploration.states_at(p.exit):
            if not eval_rel(j.post, s, t, d):
                raise _Reject("explored final pair violates the postcondition",
                              f"left final: {s}; right final: {t}")
        self.assumptions.append(
            f"{node_path(path)}: Explore closed by bounded exploration over "
            f"{d.lo}..{d.hi} ({kind.value}, fuel {fuel})")


def check_derivation(d: Derivation, dom: Domain) -> CheckResult:
    """Check every node of d; the first error carries the failing node's path."""
    return ProofChecker(dom).check(d)


def check_cmdfun(node: Derivation, dom: Domain) -> CheckResult:
    if node.rule != 'CmdFun':
        return CheckResult(CheckError((), node.rule, "not a CmdFun node"))
    return check_derivation(node, dom)
