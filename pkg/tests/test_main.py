"""
Tests for the command-line driver: exit codes, reports and output files.
"""
import contextlib
import io
import os
import sys
import tempfile

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from main import EXIT_FAILED, EXIT_OK, EXIT_USAGE, main, parse_init, parse_range

DATA = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'test_data')


def _path(*parts):
    return os.path.join(DATA, *parts)


def _run(*argv):
    """Exit code and captured stdout of one CLI invocation."""
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main(list(argv))
    return code, out.getvalue()


def test_flag_parsing():
    """Test the range and store flag parsers."""
    assert parse_range("-2..3") == (-2, 3)
    assert parse_init("x=3, y=-1") == {'x': 3, 'y': -1}

    code, _ = _run('verify-unary', _path('p0.whl'), _path('p0.spec'), '--domain', '5..1')
    assert code == EXIT_USAGE, f"Got {code}"
    code, _ = _run()
    assert code == EXIT_USAGE

    print("[PASS] Flags parse and bad flags are usage errors")


def test_verify_unary():
    """Test exit codes of the unary check."""
    code, out = _run('verify-unary', _path('p0.whl'), _path('p0.spec'), '--anno', _path('p0.anno'))
    assert code == EXIT_OK, f"Got {code}\n{out}"
    assert "VCs: 3 (3 valid, 0 counterexample, 0 unknown)" in out, out

    code, out = _run('verify-unary', _path('p0.whl'), _path('p0.spec'), '--anno', _path('p0_weak.anno'),
                     '--route', 'wp')
    assert code == EXIT_FAILED, f"Got {code}"
    assert "[COUNTEREXAMPLE] #1 init->L1" in out, out

    code, _ = _run('verify-unary', _path('p0.whl'), _path('p0.spec'))
    assert code == EXIT_USAGE, "a missing annotation is an input error"

    code, _ = _run('verify-unary', _path('missing.whl'), _path('p0.spec'))
    assert code == EXIT_USAGE

    print("[PASS] verify-unary exit codes")


def test_verify_rel():
    """Test the relational check of the majorization spec."""
    code, out = _run('verify-rel', _path('p0.whl'), _path('p1.whl'), _path('maj.rspec'),
                     '--product', 'only-lockstep', '--ranno', _path('maj_inv.rann'), '--domain', '5..8')
    assert code == EXIT_OK, f"Got {code}\n{out}"
    assert "VCs: 5 (5 valid" in out, out

    code, _ = _run('verify-rel', _path('p0.whl'), _path('p1.whl'), _path('maj_naive.rspec'),
                   '--product', 'only-lockstep', '--ranno', _path('maj_naive.rann'))
    assert code == EXIT_FAILED

    # both sides stall at the loop pair
    with tempfile.TemporaryDirectory() as tmp:
        files = {'stall.align': "b@(init,init): true\nb@(L1,L1): false\n",
                 'stall.rann': "(L1,L1): A(y)\n",
                 'stall.rspec': "pre: A(x)\npost: L(z) = R(z)\n"}
        for name, text in files.items():
            with open(os.path.join(tmp, name), 'w', encoding='utf-8') as f:
                f.write(text)
        code, out = _run('verify-rel', _path('p0.whl'), _path('p1.whl'), os.path.join(tmp, 'stall.rspec'),
                         '--product', '3cond', '--align', os.path.join(tmp, 'stall.align'),
                         '--ranno', os.path.join(tmp, 'stall.rann'))
    assert code == EXIT_FAILED, f"Got {code}\n{out}"
    assert "[COUNTEREXAMPLE] #2 coverage (L1,L1)" in out, out

    print("[PASS] verify-rel exit codes")


def test_adequacy():
    """Test the adequacy subcommand."""
    code, out = _run('adequacy', _path('p0.whl'), _path('p1.whl'), '--product', 'eager-lockstep',
                     '--fuel', '200')
    assert code == EXIT_OK, out
    code, out = _run('adequacy', _path('p0.whl'), _path('p1.whl'), '--product', 'only-lockstep',
                     '--fuel', '200')
    assert code == EXIT_FAILED and "witness" in out.lower(), out

    print("[PASS] adequacy exit codes")


def test_check_proof():
    """Test proof checking and the structured report."""
    with tempfile.TemporaryDirectory() as tmp:
        report = os.path.join(tmp, 'proof.txt')
        code, _ = _run('check-proof', _path('proofs', 'rel_diagonal.rpf'), '--report', report)
        assert code == EXIT_OK
        with open(report, encoding='utf-8') as handle:
            text = handle.read()
        assert text.startswith("format: relverify-report 1\nsubcommand: check-proof\nexit_code: 0\n"), text
        assert "proof: proved\n" in text

    code, _ = _run('check-proof', _path('proofs', 'missing.rpf'))
    assert code == EXIT_USAGE

    print("[PASS] check-proof exit codes and report")


def test_report_determinism():
    """Test that two identical runs write identical reports."""
    texts = []
    with tempfile.TemporaryDirectory() as tmp:
        for name in ('a.txt', 'b.txt'):
            report = os.path.join(tmp, name)
            code, _ = _run('verify-unary', _path('p0.whl'), _path('p0.spec'),
                           '--anno', _path('p0_weak.anno'), '--report', report)
            assert code == EXIT_FAILED
            with open(report, encoding='utf-8') as handle:
                texts.append(handle.read())
    assert texts[0] == texts[1]
    assert "vcs.counterexample: 2" in texts[0], texts[0]

    print("[PASS] Reports are deterministic")


def test_emit_smt():
    """Test SMT-LIB output through the CLI."""
    with tempfile.TemporaryDirectory() as tmp:
        code, _ = _run('emit-smt', _path('p0.whl'), _path('p0.spec'), '--anno', _path('p0.anno'),
                       '--out-dir', tmp)
        assert code == EXIT_OK
        assert sorted(os.listdir(tmp)) == ['vc1.smt2', 'vc2.smt2', 'vc3.smt2']
        with open(os.path.join(tmp, 'vc2.smt2'), encoding='utf-8') as handle, \
                open(_path('smt', 'p0_vc2.smt2'), encoding='utf-8') as golden:
            assert handle.read() == golden.read()

        code, _ = _run('emit-smt', _path('p0.whl'), '--out-dir', tmp)
        assert code == EXIT_USAGE

    print("[PASS] emit-smt writes one file per VC")


def test_run():
    """Test the interpreter subcommand."""
    code, out = _run('run', _path('p0.whl'), '--init', 'x=3')
    assert code == EXIT_OK
    assert "Run 1: terminated with x=3, y=0, z=6" in out, out

    code, out = _run('run', _path('p0.whl'), '--init', 'x=1', '--trace')
    assert code == EXIT_OK
    assert "while y <> 0 do z := z * y; y := y - 1 od | x=1, y=1, z=1" in out, out

    print("[PASS] run prints the final store")


def run_all_tests():
    """Run all tests."""
    print("Testing the command-line driver...\n")

    test_flag_parsing()
    test_verify_unary()
    test_verify_rel()
    test_adequacy()
    test_check_proof()
    test_report_determinism()
    test_emit_smt()
    test_run()

    print("\n" + "=" * 50)
    print("All CLI tests passed!")
    print("=" * 50)


if __name__ == '__main__':
    run_all_tests()
