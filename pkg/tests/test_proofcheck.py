"""
Tests for the derivation checker: the proof corpus and mutated proofs.
"""
import copy
import dataclasses
import os
import sys

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from derivations import RULES, load_derivation, read_derivation
from discharge import Domain
from program_parser import parse_formula, parse_rel_formula
from proofcheck import check_cmdfun, check_derivation

PROOFS = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'test_data', 'proofs')

# proofs that lean on a bounded termination or exploration step
WITH_ASSUMPTIONS = {'unary_auxvar_ecorr', 'erefl_comp', 'majorization'}


def _proof(name):
    return load_derivation(os.path.join(PROOFS, f'{name}.rpf'))


def _domain(name):
    return Domain(0, 8) if name == 'majorization' else Domain(0, 4)


def _node(d, path):
    for index in path:
        d = d.premises[index]
    return d


def _mutate(name, path, **changes):
    """Copy of a corpus proof with the conclusion at path changed."""
    d = copy.deepcopy(_proof(name))
    node = _node(d, path)
    node.conclusion = dataclasses.replace(node.conclusion, **changes)
    return d


def _rejected(d, path, rule, dom=None):
    result = check_derivation(d, dom or Domain(0, 4))
    assert not result.ok, "mutated proof must be rejected"
    assert result.status == "error"
    assert result.error.path == path, f"Expected {path}, got {result.error}"
    assert result.error.rule == rule, f"Expected {rule}, got {result.error}"
    return result.error


def test_corpus():
    """Test that every proof in the corpus checks."""
    names = sorted(f[:-4] for f in os.listdir(PROOFS) if f.endswith('.rpf'))
    assert len(names) == 18, f"Got {names}"
    for name in names:
        result = check_derivation(_proof(name), _domain(name))
        assert result.ok, f"{name}: {result.error}"
        expected = "proved-with-assumptions" if name in WITH_ASSUMPTIONS else "proved"
        assert result.status == expected, f"{name}: {result.status} {result.assumptions}"
        assert result.nodes_checked > 0

    print("[PASS] Every corpus proof checks")


def test_rule_coverage():
    """Test that the corpus uses every rule of the catalog."""
    used = set()
    for f in os.listdir(PROOFS):
        if f.endswith('.rpf'):
            used |= set(load_derivation(os.path.join(PROOFS, f)).rules_used())
    missing = set(RULES) - used
    assert not missing, f"Rules without a proof: {sorted(missing)}"
    assert len(RULES) == 39

    print("[PASS] The corpus exercises every rule")


def test_assumptions():
    """Test that bounded steps are reported with their node path."""
    result = check_derivation(_proof('majorization'), Domain(0, 8))
    assert len(result.assumptions) == 1, f"Got {result.assumptions}"
    assert result.assumptions[0].startswith("root.1: Explore closed by bounded exploration over 0..8")

    result = check_derivation(_proof('erefl_comp'), Domain(0, 4))
    assert any(a.startswith("root.0: Comp middle command") for a in result.assumptions), \
        f"Got {result.assumptions}"

    print("[PASS] Bounded steps are listed as assumptions")


def test_unary_mutations():
    """Test that broken unary nodes are reported at the deepest failing node."""
    d = _mutate('unary_if', (0, 0), pre=parse_formula("x + 2 >= 1"))
    _rejected(d, (0, 0), 'Assign')

    d = copy.deepcopy(_proof('unary_if'))
    branch = _node(d, (1,))
    branch.premises.reverse()
    _rejected(d, (1,), 'If')

    d = _mutate('unary_while_frame', (),
                pre=parse_formula("y >= 0 /\\ y = 3"),
                post=parse_formula("y >= 0 /\\ ~(y > 0) /\\ y = 3"))
    error = _rejected(d, (), 'Frame')
    assert "mentions variables of the command: y" in error.reason, f"Got {error}"

    d = _mutate('unary_havoc_choice', (0,), post=parse_formula("x >= 1"))
    error = _rejected(d, (0,), 'Havoc')
    assert error.counterexample is not None

    print("[PASS] Unary mutations are rejected")


def test_relational_mutations():
    """Test that broken relational nodes are reported with their rule."""
    d = _mutate('rel_branches', (1,), pre=parse_rel_formula("true"))
    _rejected(d, (1,), 'AltAgree')

    d = _mutate('rel_branches', (0, 2, 0), pre=parse_rel_formula("A(1)"))
    _rejected(d, (0, 2, 0), 'DAssign')

    d = _mutate('rel_left_side', (1, 1, 0), post=parse_rel_formula("L(y <= 2)"))
    _rejected(d, (1, 1, 0), 'DSkip')

    d = _mutate('monotonicity', (), post=parse_rel_formula("L(z) < R(z)"))
    error = _rejected(d, (), 'RelConseq')
    assert error.counterexample and error.counterexample.startswith("counterexample left:"), f"Got {error}"
    assert str(error).startswith("root (RelConseq): side condition S => Q fails")

    d = copy.deepcopy(_proof('while3'))
    del _node(d, (0,)).side['r']
    error = _rejected(d, (0,), 'While3')
    assert "needs (side" in error.reason

    d = _mutate('whseq_native', (), post=parse_rel_formula("A(x) /\\ L(x >= 0)"))
    _rejected(d, (), 'WhSeq')

    d = _mutate('erefl_comp', (0, 1), pre=parse_rel_formula("A(x + 1)"))
    _rejected(d, (0, 1), 'DAssign')

    print("[PASS] Relational mutations are rejected")


def test_cmdfun_mutations():
    """Test the freshness and arity conditions of linking."""
    d = _mutate('cmdfun_symmetric', (), post=parse_formula("u = eq(x, y)"))
    error = _rejected(d, (), 'CmdFun')
    assert "not fresh" in error.reason, f"Got {error}"

    d = copy.deepcopy(_proof('cmdfun_symmetric'))
    d.side['params'] = ('a',)
    error = _rejected(d, (2, 0, 0), 'Call')
    assert "takes 1" in error.reason, f"Got {error}"

    assert check_cmdfun(_proof('cmdfun_symmetric'), Domain(0, 4)).ok
    assert not check_cmdfun(_proof('unary_if'), Domain(0, 4)).ok

    print("[PASS] CmdFun linking conditions are enforced")


def test_bounded_mutations():
    """Test rejection by exploration and by a wrong rewrite chain."""
    d = _mutate('majorization', (1,), pre=parse_rel_formula("A(x) /\\ L(x = 3)"))
    error = _rejected(d, (1,), 'Explore', Domain(0, 8))
    assert "violates the postcondition" in error.reason, f"Got {error}"
    assert error.counterexample.startswith("left final:")

    with open(os.path.join(PROOFS, 'whseq_split.rpf'), encoding='utf-8') as handle:
        text = handle.read()
    assert 'fwd "x > 2"' in text
    d = read_derivation(text.replace('fwd "x > 2"', 'fwd "x > 3"'), PROOFS)
    _rejected(d, (), 'Rewrite')

    print("[PASS] Bounded and rewriting mutations are rejected")


def run_all_tests():
    """Run all tests."""
    print("Testing the proof checker...\n")

    test_corpus()
    test_rule_coverage()
    test_assumptions()
    test_unary_mutations()
    test_relational_mutations()
    test_cmdfun_mutations()
    test_bounded_mutations()

    print("\n" + "=" * 50)
    print("All proof checker tests passed!")
    print("=" * 50)


if __name__ == '__main__':
    run_all_tests()
