"""
Tests for the command equivalence laws and bounded trace comparison.
"""
import os
import sys

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from equiv_laws import (
    Direction, EquivLaw, RewriteStep, flatten_seq, format_path, normalize, parse_path,
    replace_at, rewrite_chain, rewrite_uequiv, subterm, trace_equivalent,
)
from errors import WellFormednessError
from models import And, Assign, If, IntLit, Seq, Skip, VarBlock, While
from program_parser import parse_formula, parse_program
from semantics import Store

LOOP = parse_program("while x > 0 do x := x - 1 od")
STORES = [Store.of(x=v, y=0) for v in range(4)]


def _step(law, path=(), direction=Direction.FORWARD, arg=None):
    return RewriteStep(law, path, direction, arg)


def _fails(c, step):
    try:
        rewrite_uequiv(c, step)
    except WellFormednessError:
        return
    raise AssertionError(f"{step} should not apply to {c}")


def test_normalize():
    """Test sequence flattening and right association."""
    a, b, c = Assign('x', IntLit(1)), Assign('y', IntLit(2)), Skip()
    left_nested = Seq(Seq(a, b), c)
    assert flatten_seq(left_nested) == [a, b, c]
    assert normalize(left_nested) == Seq(a, Seq(b, c))
    assert normalize(While(LOOP.guard, left_nested)) == While(LOOP.guard, Seq(a, Seq(b, c)))

    print("[PASS] Sequences normalize to right-nested form")


def test_paths():
    """Test navigation by child-index paths."""
    c = parse_program("y := 0; if x > 0 then y := 1 else y := 2 fi")
    assert subterm(c, (1, 1)) == Assign('y', IntLit(2))
    replaced = replace_at(c, (1, 0), Skip())
    assert str(replaced) == "y := 0; if x > 0 then skip else y := 2 fi", f"Got {replaced}"

    assert parse_path("1.0") == (1, 0)
    assert parse_path("root") == () and parse_path("") == ()
    assert format_path(()) == "root" and format_path((1, 0)) == "1.0"

    for bad in (lambda: subterm(c, (0, 0)), lambda: parse_path("first")):
        try:
            bad()
            raise AssertionError("expected WellFormednessError")
        except WellFormednessError:
            pass

    print("[PASS] Paths address subcommands")


def test_forward_laws():
    """Test each law applied left to right."""
    step = _step(EquivLaw.SKIP_LEFT)
    assert rewrite_uequiv(parse_program("skip; x := 1"), step) == Assign('x', IntLit(1))
    _fails(parse_program("x := 1"), step)

    assert rewrite_uequiv(parse_program("x := 1; skip"), _step(EquivLaw.SKIP_RIGHT)) == Assign('x', IntLit(1))

    peeled = rewrite_uequiv(LOOP, _step(EquivLaw.LOOP_PEEL))
    assert peeled == Seq(If(LOOP.guard, LOOP.body, Skip()), LOOP), f"Got {peeled}"

    split = rewrite_uequiv(LOOP, _step(EquivLaw.LOOP_SEQ_SPLIT, arg="x > 2"))
    assert split == Seq(While(And(LOOP.guard, parse_formula("x > 2")), LOOP.body), LOOP), f"Got {split}"

    nested = rewrite_uequiv(LOOP, _step(EquivLaw.LOOP_SPLIT, arg="x > 2"))
    inner = While(And(LOOP.guard, parse_formula("x > 2")), LOOP.body)
    assert nested == While(LOOP.guard, Seq(LOOP.body, inner)), f"Got {nested}"
    _fails(LOOP, _step(EquivLaw.LOOP_SPLIT))
    _fails(parse_program("skip"), _step(EquivLaw.LOOP_PEEL))

    c = parse_program("y := 0; while x > 0 do x := x - 1 od")
    at_loop = rewrite_uequiv(c, _step(EquivLaw.LOOP_PEEL, path=(1,)))
    assert str(at_loop) == "y := 0; if x > 0 then x := x - 1 fi; while x > 0 do x := x - 1 od", f"Got {at_loop}"

    print("[PASS] Laws rewrite forward")


def test_backward_laws():
    """Test that each law read right to left undoes the forward rewrite."""
    cases = [
        (parse_program("skip; x := 1"), _step(EquivLaw.SKIP_LEFT)),
        (parse_program("x := 1; skip"), _step(EquivLaw.SKIP_RIGHT)),
        (LOOP, _step(EquivLaw.LOOP_PEEL)),
        (LOOP, _step(EquivLaw.LOOP_SEQ_SPLIT, arg="x > 2")),
        (LOOP, _step(EquivLaw.LOOP_SPLIT, arg="x > 2")),
    ]
    for original, forward in cases:
        rewritten = rewrite_uequiv(original, forward)
        backward = RewriteStep(forward.law, forward.path, Direction.BACKWARD, forward.arg)
        assert rewrite_uequiv(rewritten, backward) == normalize(original), f"{forward.law.value} does not invert"

    _fails(LOOP, _step(EquivLaw.LOOP_PEEL, direction=Direction.BACKWARD))
    _fails(parse_program("x := 1; y := 2"), _step(EquivLaw.LOOP_SEQ_SPLIT, direction=Direction.BACKWARD))

    print("[PASS] Backward laws invert forward laws")


def test_var_rename():
    """Test renaming a block local."""
    block = parse_program("var a in a := x; y := a ni")
    renamed = rewrite_uequiv(block, _step(EquivLaw.VAR_RENAME, arg="a:b"))
    assert renamed == parse_program("var b in b := x; y := b ni"), f"Got {renamed}"

    fresh = rewrite_uequiv(block, _step(EquivLaw.VAR_RENAME))
    assert isinstance(fresh, VarBlock) and fresh.locals == ('a0',), f"Got {fresh}"

    _fails(block, _step(EquivLaw.VAR_RENAME, arg="a:x"))
    _fails(block, _step(EquivLaw.VAR_RENAME, arg="q:r"))
    _fails(LOOP, _step(EquivLaw.VAR_RENAME))

    print("[PASS] Block locals rename to fresh names")


def test_rewrite_chain():
    """Test a chain of steps."""
    c = parse_program("skip; while x > 0 do x := x - 1 od")
    result = rewrite_chain(c, [_step(EquivLaw.SKIP_LEFT), _step(EquivLaw.LOOP_PEEL)])
    assert result == Seq(If(LOOP.guard, LOOP.body, Skip()), LOOP), f"Got {result}"
    assert rewrite_chain(c, []) == normalize(c)

    print("[PASS] Rewrite chains compose")


def test_trace_equivalence():
    """Test that the laws keep store traces and that real changes are caught."""
    for step in (_step(EquivLaw.LOOP_PEEL), _step(EquivLaw.LOOP_SEQ_SPLIT, arg="x > 2"),
                 _step(EquivLaw.LOOP_SPLIT, arg="x > 1")):
        rewritten = rewrite_uequiv(LOOP, step)
        assert trace_equivalent(LOOP, rewritten, STORES, 200) is None, f"{step.law.value} changes traces"

    block = parse_program("var a in a := x; y := a ni")
    renamed = rewrite_uequiv(block, _step(EquivLaw.VAR_RENAME, arg="a:b"))
    assert trace_equivalent(block, renamed, STORES, 50) is None

    differs = trace_equivalent(parse_program("x := x + 1"), parse_program("x := x + 2"), STORES, 10)
    assert differs == Store.of(x=0, y=0), f"Got {differs}"

    print("[PASS] Rewrites keep store traces")


def run_all_tests():
    """Run all tests."""
    print("Testing equivalence laws...\n")

    test_normalize()
    test_paths()
    test_forward_laws()
    test_backward_laws()
    test_var_rename()
    test_rewrite_chain()
    test_trace_equivalence()

    print("\n" + "=" * 50)
    print("All equivalence law tests passed!")
    print("=" * 50)


if __name__ == '__main__':
    run_all_tests()
