"""
Tests for SMT-LIB emission.
"""
import os
import sys
import tempfile

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from automaton import build_automaton, unary_vcs
from models import AgreeAll, RelSpec
from program_parser import InputLoader, parse_formula, parse_program, parse_rel_formula
from product import Alignment, ProductKind, construct_product, relational_vcs
from smtlib import emit_smtlib, formula_to_smt, write_smt_files

DATA = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'test_data')
LOADER = InputLoader()


def _golden(name):
    with open(os.path.join(DATA, 'smt', name), encoding='utf-8') as handle:
        return handle.read()


def _automaton(name):
    return build_automaton(LOADER.program(os.path.join(DATA, name)))


def _p0_vcs():
    a = _automaton('p0.whl')
    return unary_vcs(a, LOADER.annotation(os.path.join(DATA, 'p0.anno')),
                     LOADER.spec(os.path.join(DATA, 'p0.spec')))


def test_unary_terms():
    """Test the translation of unary formulas."""
    text, constants, functions = formula_to_smt(parse_formula("x mod 2 = 1 /\\ ~(y <= x)"), False)
    assert text == "(and (= (mod x 2) 1) (not (<= y x)))", f"Got {text}"
    assert constants == ['x', 'y'] and functions == {}

    text, _, _ = formula_to_smt(parse_formula("x div y = 1"), False)
    expected = "(= (ite (= y 0) 0 (ite (< y 0) (div (- x) (- y)) (div x y))) 1)"
    assert text == expected, f"Got {text}"

    text, constants, functions = formula_to_smt(parse_formula("f(x, 1) <> -3 => true"), False)
    assert text == "(=> (distinct (f x 1) (- 3)) true)", f"Got {text}"
    assert constants == ['x'] and functions == {'f': 2}

    print("[PASS] Unary formulas translate to SMT-LIB terms")


def test_relational_terms():
    """Test the translation of relational atoms."""
    text, constants, _ = formula_to_smt(parse_rel_formula("A(x) /\\ L(y > 0)"), True)
    assert text == "(and (= x_l x_r) (> y_l 0))", f"Got {text}"
    assert constants == ['x_l', 'x_r', 'y_l']

    text, _, _ = formula_to_smt(parse_rel_formula("conv(L(x) < R(y))"), True)
    assert text == "(< x_r y_l)", f"Got {text}"

    text, _, _ = formula_to_smt(parse_rel_formula("both(x >= 0)"), True)
    assert text == "(and (>= x_l 0) (>= x_r 0))", f"Got {text}"

    text, constants, _ = formula_to_smt(parse_rel_formula("comp(A(x), A(x))"), True)
    assert text == "(exists ((x_m1 Int)) (and (= x_l x_m1) (= x_m1 x_r)))", f"Got {text}"
    assert constants == ['x_l', 'x_r'], "the middle store is bound, not declared"

    assert formula_to_smt(AgreeAll(()), True)[0] == "true"

    print("[PASS] Relational formulas translate with side suffixes")


def test_unary_goldens():
    """Test the scripts for the factorial VCs against the golden files."""
    vcs = _p0_vcs()
    for vc in vcs:
        script = emit_smtlib(vc)
        assert script == _golden(f'p0_vc{vc.id}.smt2'), f"VC {vc.id} differs:\n{script}"

    print("[PASS] Unary scripts match the golden files")


def test_relational_golden():
    """Test the script of a lockstep VC."""
    a = build_automaton(parse_program("x := x + 1"))
    p = construct_product(ProductKind.ONLY_LOCKSTEP, a, a)
    rspec = RelSpec(parse_rel_formula("A(x)"), parse_rel_formula("A(x)"))
    vcs = relational_vcs(p, {}, rspec)
    assert len(vcs) == 1
    script = emit_smtlib(vcs[0])
    assert script == _golden('incr_vc1.smt2'), f"Got:\n{script}"

    print("[PASS] Relational script matches the golden file")


def test_coverage_golden():
    """Test the script of a three-condition coverage VC."""
    p = construct_product(ProductKind.THREE_CONDITION, _automaton('p0.whl'), _automaton('p2.whl'),
                          Alignment(LOADER.alignment(os.path.join(DATA, 'p0_p2.align'))))
    vcs = relational_vcs(p, LOADER.rel_annotation(os.path.join(DATA, 'p0_p2.rann')),
                         LOADER.rel_spec(os.path.join(DATA, 'p0_p2.rspec')))
    coverage = [vc for vc in vcs if vc.name == "coverage (L1,L1)"]
    assert len(coverage) == 1 and coverage[0].id == 11
    script = emit_smtlib(coverage[0])
    assert script == _golden('p0_p2_coverage.smt2'), f"Got:\n{script}"

    print("[PASS] Coverage script matches the golden file")


def test_write_files():
    """Test one file per VC, and byte-stable output."""
    vcs = _p0_vcs()
    with tempfile.TemporaryDirectory() as tmp:
        out = os.path.join(tmp, 'smt')
        written = write_smt_files(vcs, out)
        assert [p.name for p in written] == ['vc1.smt2', 'vc2.smt2', 'vc3.smt2']
        for path in written:
            assert path.read_text(encoding='utf-8') == _golden(f'p0_{path.name}')
        write_smt_files(vcs, out)
        assert sorted(os.listdir(out)) == ['vc1.smt2', 'vc2.smt2', 'vc3.smt2']

    print("[PASS] SMT-LIB files are written per VC")


def run_all_tests():
    """Run all tests."""
    print("Testing SMT-LIB emission...\n")

    test_unary_terms()
    test_relational_terms()
    test_unary_goldens()
    test_relational_golden()
    test_coverage_golden()
    test_write_files()

    print("\n" + "=" * 50)
    print("All SMT-LIB tests passed!")
    print("=" * 50)


if __name__ == '__main__':
    run_all_tests()
