"""
Tests for cutpoint automata and unary verification conditions.
"""
import os
import sys

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from automaton import (
    RunEnd, State, automaton_runs, build_automaton, live_in, relevant_inputs,
    segment_may_stick, stuck_reason, unary_vcs,
)
from errors import AnnotationError, WellFormednessError
from models import Assign, Guard, IntLit, Var, VCKind
from program_parser import InputLoader, parse_program
from semantics import FIN, INIT, Limits, Store

DATA = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'test_data')
LOADER = InputLoader()


def _program(name):
    return LOADER.program(os.path.join(DATA, name))


def test_loop_automaton():
    """Test cutpoints and segments of the factorial loop."""
    a = build_automaton(_program('p0.whl'))
    assert a.cutpoints == (INIT, 'L1', FIN), f"Got {a.cutpoints}"
    assert [s.name for s in a.segments] == ['init->L1', 'L1->L1', 'L1->fin']
    assert a.universe == ('x', 'y', 'z')

    body = a.segment('L1->L1')
    assert isinstance(body.path[0], Guard) and body.path[0].polarity
    assert [str(step) for step in body.path[1:]] == ['z := z * y', 'y := y - 1']
    assert a.segment('L1->fin').path == (Guard(a.loop_guards['L1'], False),)
    assert [s.name for s in a.outgoing('L1')] == ['L1->L1', 'L1->fin']

    print("[PASS] Loop automaton has one segment per path")


def test_parallel_segments():
    """Test that segments sharing endpoints get an index."""
    a = build_automaton(_program('p2.whl'))
    assert [s.name for s in a.segments] == ['init->L1', 'L1->L1.1', 'L1->L1.2', 'L1->fin']
    multiply = a.segment('L1->L1.1')
    assert [str(step) for step in multiply.path[2:]] == ['z := z * y', 'y := y - 1', 'w := w + 1']

    print("[PASS] Parallel segments are numbered")


def test_nested_loops():
    """Test label order for nested loops."""
    c = parse_program("while x > 0 do while y > 0 do y := y - 1 od; x := x - 1 od")
    a = build_automaton(c)
    assert a.cutpoints == (INIT, 'L1', 'L2', FIN), f"Got {a.cutpoints}"
    names = [s.name for s in a.segments]
    assert names == ['init->L1', 'L1->L2', 'L1->fin', 'L2->L2', 'L2->L1'], f"Got {names}"

    print("[PASS] Nested loops number outside in")


def test_branch_cutpoints():
    """Test optional cutpoints at branches."""
    c = parse_program("x := x + 1; if x > 0 then y := 1 else y := 0 fi")
    assert build_automaton(c).cutpoints == (INIT, FIN)

    a = build_automaton(c, cut_branches=True)
    assert a.cutpoints == (INIT, 'B1', FIN), f"Got {a.cutpoints}"
    assert [s.name for s in a.segments] == ['init->B1', 'B1->fin.1', 'B1->fin.2']

    print("[PASS] Branches become cutpoints on request")


def test_var_block_locals():
    """Test that block locals get program-wide unique names."""
    a = build_automaton(parse_program("var a in a := x; y := a ni"))
    assert a.locals == ('a_0',), f"Got {a.locals}"
    assert a.universe == ('a_0', 'x', 'y'), f"Got {a.universe}"
    assert a.segments[0].path == (
        Assign('a_0', IntLit(0)), Assign('a_0', Var('x')), Assign('y', Var('a_0')))

    try:
        build_automaton(parse_program("z := call(x)"))
        raise AssertionError("expected WellFormednessError")
    except WellFormednessError:
        pass

    print("[PASS] Var-block locals are renamed apart")


def test_live_variables():
    """Test the liveness analysis used to shrink enumeration."""
    assert relevant_inputs(_program('p0.whl')) == frozenset({'x'})
    assert relevant_inputs(_program('p2.whl')) == frozenset({'x'})
    c = parse_program("if a > 0 then b := c else skip fi")
    assert live_in(c, frozenset({'b'})) == frozenset({'a', 'b', 'c'})
    assert live_in(parse_program("havoc b"), frozenset({'b'})) == frozenset()

    print("[PASS] Live variables are computed correctly")


def test_unary_vcs():
    """Test VC generation for the factorial spec."""
    a = build_automaton(_program('p0.whl'))
    spec = LOADER.spec(os.path.join(DATA, 'p0.spec'))
    anno = LOADER.annotation(os.path.join(DATA, 'p0.anno'))

    vcs = unary_vcs(a, anno, spec)
    assert [vc.name for vc in vcs] == ['init->L1', 'L1->L1', 'L1->fin']
    assert [vc.id for vc in vcs] == [1, 2, 3]
    assert vcs[0].hypothesis == spec.pre and vcs[0].conclusion == anno['L1']
    assert vcs[2].conclusion == spec.post
    assert all(vc.kind is VCKind.SEGMENT and not vc.relational for vc in vcs)

    vcs = unary_vcs(a, anno, spec, non_stuck=True)
    assert len(vcs) == 4 and vcs[3].name == 'non-stuck L1->L1', f"Got {[vc.name for vc in vcs]}"
    assert vcs[3].kind is VCKind.NON_STUCK

    try:
        unary_vcs(a, {}, spec)
        raise AssertionError("expected AnnotationError")
    except AnnotationError as exc:
        assert str(exc) == "missing annotation for cutpoint L1", f"Got {exc}"

    print("[PASS] Unary VCs follow the segments")


def test_may_stick():
    """Test the syntactic stuck-freedom filter."""
    a = build_automaton(_program('p2.whl'))
    flagged = [s.name for s in a.segments if segment_may_stick(s)]
    assert flagged == ['L1->L1.1', 'L1->L1.2'], f"Got {flagged}"

    def only_segment(text):
        return build_automaton(parse_program(text)).segments[0]

    assert not segment_may_stick(only_segment("x := y"))
    assert not segment_may_stick(only_segment("x := 7"))
    assert segment_may_stick(only_segment("x := 7"), Limits(hi=5))
    assert segment_may_stick(only_segment("x := 5000"))
    assert segment_may_stick(only_segment("x := -5000"))

    print("[PASS] Computed and out-of-range values are flagged")


def test_automaton_runs():
    """Test runs at the granularity of segments."""
    a = build_automaton(_program('p0.whl'))
    runs = automaton_runs(a, Store.of(x=2), 20)
    assert len(runs) == 1
    trace, end = runs[0]
    assert end is RunEnd.TERMINATED
    assert [state.label for state in trace] == [INIT, 'L1', 'L1', 'L1', FIN]
    assert trace[-1].store == Store.of(x=2, y=0, z=2)

    runs = automaton_runs(a, Store.of(x=4), 2)
    assert runs[0][1] is RunEnd.CUTOFF

    a = build_automaton(parse_program("x := 10 div y"))
    runs = automaton_runs(a, Store.of(x=0, y=0), 5)
    assert runs[0][1] is RunEnd.STUCK
    reason = stuck_reason(a, State(INIT, Store.of(x=0, y=0)))
    assert reason == "init->fin: division by zero", f"Got {reason}"

    print("[PASS] Automaton runs follow the program runs")


def run_all_tests():
    """Run all tests."""
    print("Testing cutpoint automata...\n")

    test_loop_automaton()
    test_parallel_segments()
    test_nested_loops()
    test_branch_cutpoints()
    test_var_block_locals()
    test_live_variables()
    test_unary_vcs()
    test_may_stick()
    test_automaton_runs()

    print("\n" + "=" * 50)
    print("All automaton tests passed!")
    print("=" * 50)


if __name__ == '__main__':
    run_all_tests()
