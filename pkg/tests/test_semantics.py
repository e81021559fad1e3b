"""
Tests for stores, the small-step semantics and segment execution.
"""
import os
import sys

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from errors import WellFormednessError
from models import Assign, Guard, Segment, Cmp, CmpOp, Var, IntLit, BinOp, IntOp
from program_parser import InputLoader, parse_program, parse_int_expr
from semantics import (
    FIN, Limits, OutcomeKind, Store, Stuck,
    dump_trace, eval_int, exec_segment, final_stores, run_bounded, segment_sticks,
)

DATA = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'test_data')


def _program(name):
    return InputLoader().program(os.path.join(DATA, name))


def test_store():
    """Test that stores compare by content and print sorted."""
    s = Store.of(y=1, x=0)
    assert s == Store.of(x=0, y=1)
    assert str(s) == "x=0, y=1", f"Got {s}"
    assert s.set('x', 5)['x'] == 5 and s['x'] == 0, "set must not mutate"
    assert s.restrict(['x']) == Store.of(x=0)
    assert s.without(['x']) == Store.of(y=1)
    assert Store.of(x=0) < Store.of(x=1)
    assert len({Store.of(x=1), Store.of(x=1)}) == 1

    try:
        s['z']
        raise AssertionError("expected WellFormednessError")
    except WellFormednessError:
        pass

    print("[PASS] Stores behave as immutable maps")


def test_benchmark_programs():
    """Test the final stores of the four loop programs."""
    expected = {
        'p0.whl': Store.of(x=3, y=0, z=6),
        'p1.whl': Store.of(x=3, y=0, z=8),
        'p2.whl': Store.of(x=3, y=0, z=6, w=5),
        'p3.whl': Store.of(x=3, y=0, z=8, w=7),
    }
    for name, final in expected.items():
        outcomes = run_bounded(_program(name), Store.of(x=3), 500)
        assert len(outcomes) == 1, f"{name}: expected one run, got {len(outcomes)}"
        assert outcomes[0].kind is OutcomeKind.TERMINATED, f"{name}: {outcomes[0].kind}"
        assert outcomes[0].final_store == final, f"{name}: got {outcomes[0].final_store}"

    outcome = run_bounded(_program('p0.whl'), Store.of(x=5), 500)[0]
    assert outcome.final_store['z'] == 120

    print("[PASS] Loop programs compute their results")


def test_runtime_faults():
    """Test that division by zero and overflow get stuck instead of raising."""
    outcome = run_bounded(parse_program("x := 1 div y"), Store.of(x=0, y=0), 10)[0]
    assert outcome.kind is OutcomeKind.STUCK and outcome.reason == "division by zero", f"Got {outcome}"

    outcome = run_bounded(parse_program("x := x * 20"), Store.of(x=1), 10, Limits(lo=0, hi=10))[0]
    assert outcome.kind is OutcomeKind.STUCK
    assert outcome.reason == "overflow: x := 20 outside [0, 10]", f"Got {outcome.reason}"

    outcome = run_bounded(parse_program("if 1 div x = 0 then skip fi"), Store.of(x=0), 10)[0]
    assert outcome.kind is OutcomeKind.STUCK

    try:
        run_bounded(parse_program("z := call(x)"), Store.of(x=0), 10)
        raise AssertionError("expected WellFormednessError")
    except WellFormednessError:
        pass

    print("[PASS] Runtime faults are stuck configurations")


def test_fuel():
    """Test the fuel cutoff."""
    outcomes = run_bounded(parse_program("while true do skip od"), Store(), 10)
    assert len(outcomes) == 1 and outcomes[0].kind is OutcomeKind.CUTOFF
    assert len(outcomes[0].trace) == 11, f"Got {len(outcomes[0].trace)} configurations"

    try:
        run_bounded(parse_program("skip"), Store(), 0)
        raise AssertionError("expected ValueError")
    except ValueError:
        pass

    print("[PASS] Fuel bounds the number of transitions")


def test_nondeterminism():
    """Test havoc and choice."""
    finals = final_stores(parse_program("havoc x"), Store.of(x=9), 10)
    assert sorted(s['x'] for s in finals) == [0, 1, 2, 3, 4], f"Got {finals}"

    limits = Limits(havoc_overrides=(('x', 7, 8),))
    finals = final_stores(parse_program("havoc x"), Store.of(x=9), 10, limits)
    assert sorted(s['x'] for s in finals) == [7, 8], f"Got {finals}"

    finals = final_stores(parse_program("choice x := 1 or x := 2 end"), Store(), 10)
    assert sorted(finals) == [Store.of(x=1), Store.of(x=2)], f"Got {finals}"

    finals = final_stores(parse_program("choice x := 1 or x := 1 end"), Store(), 10)
    assert finals == [Store.of(x=1)]

    print("[PASS] Havoc and choice branch correctly")


def test_var_block():
    """Test that locals start at zero and the shadowed value comes back."""
    c = parse_program("var a in y := a; a := x; y := y + a + 1 ni")
    assert final_stores(c, Store.of(x=2, a=7), 20) == [Store.of(x=2, a=7, y=3)]
    assert final_stores(c, Store.of(x=2), 20) == [Store.of(x=2, y=3)]

    print("[PASS] Var blocks scope their locals")


def test_evaluation():
    """Test floor division and lenient evaluation in formulas."""
    assert eval_int(parse_int_expr("-7 div 2"), Store()) == -4
    assert eval_int(parse_int_expr("-7 mod 2"), Store()) == 1
    assert eval_int(parse_int_expr("x div 0"), Store.of(x=3), strict=False) == 0
    try:
        eval_int(parse_int_expr("x mod 0"), Store.of(x=3))
        raise AssertionError("expected Stuck")
    except Stuck:
        pass

    print("[PASS] Integer evaluation follows floor semantics")


def test_segments():
    """Test execution of a single loop-body segment."""
    y, z = Var('y'), Var('z')
    body = Segment('L1', 'L1', (
        Guard(Cmp(CmpOp.NE, y, IntLit(0)), True),
        Assign('z', BinOp(IntOp.MUL, z, y)),
        Assign('y', BinOp(IntOp.SUB, y, IntLit(1))),
    ))
    assert body.name == "L1->L1"
    assert exec_segment(body, Store.of(y=2, z=3)) == [Store.of(y=1, z=6)]
    assert exec_segment(body, Store.of(y=0, z=3)) == []
    assert segment_sticks(body, Store.of(y=2, z=3)) is None

    risky = Segment('L1', 'fin', (Assign('z', BinOp(IntOp.DIV, z, y)),), index=2)
    assert risky.name == "L1->fin.2"
    assert segment_sticks(risky, Store.of(y=0, z=3)) == "division by zero"
    assert exec_segment(risky, Store.of(y=0, z=3)) == []

    print("[PASS] Segments execute along their path")


def test_dump_trace():
    """Test the trace rendering used by the run subcommand."""
    outcome = run_bounded(parse_program("x := 1; y := 2"), Store(), 10)[0]
    lines = dump_trace(outcome.trace).split("\n")
    assert lines == ["x := 1; y := 2 | ", "y := 2 | x=1", f"{FIN} | x=1, y=2"], f"Got {lines}"

    # block locals show their scope until the block exits
    outcome = run_bounded(parse_program("var t in t := 1; x := t ni; y := x"), Store(), 20)[0]
    lines = dump_trace(outcome.trace).split("\n")
    assert lines == ["var t in t := 1; x := t ni; y := x | ",
                     "(t := 1; x := t [scope t]); y := x | t=0",
                     "(x := t [scope t]); y := x | t=1",
                     "y := x | x=1",
                     f"{FIN} | x=1, y=1"], f"Got {lines}"

    print("[PASS] Traces render one configuration per line")


def run_all_tests():
    """Run all tests."""
    print("Testing semantics...\n")

    test_store()
    test_benchmark_programs()
    test_runtime_faults()
    test_fuel()
    test_nondeterminism()
    test_var_block()
    test_evaluation()
    test_segments()
    test_dump_trace()

    print("\n" + "=" * 50)
    print("All semantics tests passed!")
    print("=" * 50)


if __name__ == '__main__':
    run_all_tests()
