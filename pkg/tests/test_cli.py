"""Tests for the command-line interface."""

import json

import pytest

from src.formats.instance_format import format_instance
from src.main import EXIT_INVALID_INPUT, EXIT_OK, EXIT_RESOURCE_LIMIT, EXIT_VIOLATED, main
from src.utils.report import render


@pytest.fixture
def ex33_path(instances_dir):
    return str(instances_dir / "ex33.qcsp")


@pytest.fixture
def false2_path(instances_dir):
    return str(instances_dir / "false2.qcsp")


@pytest.fixture
def golden_path(instances_dir):
    return str(instances_dir / "ex33_derivation.jpf")


@pytest.fixture
def qbf_files(tmp_path, qbf_false, qbf_true, nonprenex):
    """The QCBF fixtures written out as documents."""
    paths = {}
    for name, formula in (("false", qbf_false), ("true", qbf_true), ("nonprenex", nonprenex)):
        path = tmp_path / f"{name}.qcbf"
        path.write_text(format_instance(formula), encoding="utf-8")
        paths[name] = str(path)
    return paths


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestEval:
    """The eval subcommand."""

    def test_true_and_false(self, capsys, ex33_path, false2_path):
        """Verdicts print as true or false."""
        assert run(capsys, "eval", ex33_path)[:2] == (EXIT_OK, "true\n")
        assert run(capsys, "eval", false2_path)[:2] == (EXIT_OK, "false\n")

    def test_missing_file(self, capsys, tmp_path):
        """Unreadable inputs exit with status 1."""
        code, _, err = run(capsys, "eval", str(tmp_path / "missing.qcsp"))
        assert code == EXIT_INVALID_INPUT
        assert err.startswith("error: ")

    def test_parse_error(self, capsys, tmp_path):
        """Parse errors exit with status 1 and name the line."""
        path = tmp_path / "broken.qcbf"
        path.write_text("FORMULA\n(exists x (clause x)\n", encoding="utf-8")
        code, _, err = run(capsys, "eval", str(path))
        assert code == EXIT_INVALID_INPUT
        assert "line 2" in err

    def test_json_error(self, capsys, tmp_path):
        """With --json errors go to stdout as JSON."""
        code, out, _ = run(capsys, "eval", "--json", str(tmp_path / "missing.qcsp"))
        assert code == EXIT_INVALID_INPUT
        assert json.loads(out)["exit"] == EXIT_INVALID_INPUT


class TestCheck:
    """The check subcommand."""

    def test_golden_proof(self, capsys, ex33_path, golden_path):
        """The golden derivation checks but does not refute."""
        code, out, _ = run(capsys, "check", ex33_path, "--proof", golden_path)
        assert code == EXIT_OK
        assert out == "valid, width=2, length=7\n"

    def test_hash_mismatch(self, capsys, tmp_path, ex33_path, golden_path):
        """A proof about another instance is rejected with status 2."""
        text = open(golden_path, encoding="utf-8").read()
        lines = [
            "instance: " + "0" * 64 if line.startswith("instance:") else line
            for line in text.splitlines()
        ]
        tampered = tmp_path / "tampered.jpf"
        tampered.write_text("\n".join(lines) + "\n", encoding="utf-8")
        code, out, _ = run(capsys, "check", ex33_path, "--proof", str(tampered))
        assert code == EXIT_VIOLATED
        assert "instance hash mismatch" in out

    def test_invalid_step(self, capsys, tmp_path, ex33_path, golden_path):
        """Invalid steps are listed with their numbers."""
        text = open(golden_path, encoding="utf-8").read()
        broken = tmp_path / "broken.jpf"
        broken.write_text(text.replace("rows={(a),(b),(c)}", "rows={(a)}"), encoding="utf-8")
        code, out, _ = run(capsys, "check", ex33_path, "--proof", str(broken))
        assert code == EXIT_VIOLATED
        assert out.startswith("invalid")
        assert "step 7: row-mismatch" in out


class TestProve:
    """The prove subcommand."""

    def test_true_instance(self, capsys, ex33_path):
        """True instances have no refutation."""
        assert run(capsys, "prove", ex33_path)[1] == "TRUE: no refutation\n"

    def test_refutation_checks(self, capsys, tmp_path, false2_path):
        """A written refutation passes check."""
        output = str(tmp_path / "false2.jpf")
        code, out, _ = run(capsys, "prove", false2_path, "-o", output)
        assert code == EXIT_OK
        assert out.startswith("FALSE: judgement refutation")
        code, out, _ = run(capsys, "check", false2_path, "--proof", output)
        assert code == EXIT_OK
        assert ", refutes" in out

    def test_qbf_refutation(self, capsys, tmp_path, qbf_files):
        """QCBF refutations are clause proofs."""
        output = str(tmp_path / "false.jpf")
        code, out, _ = run(capsys, "prove", qbf_files["false"], "-o", output)
        assert out.startswith("FALSE: clause refutation")
        code, out, _ = run(capsys, "check", qbf_files["false"], "--proof", output)
        assert code == EXIT_OK
        assert ", refutes" in out


class TestRefuteAndTrace:
    """The refute and trace subcommands."""

    def test_refute(self, capsys, qbf_files):
        """The false formula has a four-node trace."""
        code, out, _ = run(capsys, "refute", qbf_files["false"])
        assert code == EXIT_OK
        assert out.startswith("FALSE: refuting trace with 4 node(s), depth 2\nS=[] a={}\n")

    def test_true_formula(self, capsys, qbf_files):
        """True formulas have no refuting trace."""
        assert run(capsys, "refute", qbf_files["true"])[1] == (
            "no refuting trace: the formula is true\n"
        )

    def test_random_policy(self, capsys, qbf_files):
        """Seeded random search also refutes."""
        code, out, _ = run(capsys, "refute", qbf_files["nonprenex"], "--policy", "random:7")
        assert code == EXIT_OK
        assert out.startswith("FALSE")

    def test_step_limit(self, capsys, qbf_files):
        """Running out of steps exits with status 3."""
        code, _, err = run(capsys, "refute", qbf_files["false"], "--max-steps", "1")
        assert code == EXIT_RESOURCE_LIMIT
        assert "error:" in err

    def test_qcsp_input(self, capsys, ex33_path):
        """refute needs a QCBF document."""
        assert run(capsys, "refute", ex33_path)[0] == EXIT_INVALID_INPUT

    def test_trace_check(self, capsys, tmp_path, qbf_files):
        """A written trace validates."""
        output = str(tmp_path / "false.trace")
        run(capsys, "refute", qbf_files["false"], "-o", output)
        code, out, _ = run(capsys, "trace", qbf_files["false"], "--trace", output)
        assert code == EXIT_OK
        assert out == "valid trace, 4 node(s)\n"

    def test_invalid_trace(self, capsys, tmp_path, qbf_files):
        """Invalid traces exit with status 2 and name the problem."""
        path = tmp_path / "bad.trace"
        path.write_text("S=[] a={}\n", encoding="utf-8")
        code, out, _ = run(capsys, "trace", qbf_files["false"], "--trace", str(path))
        assert code == EXIT_VIOLATED
        assert "missing-clause" in out


class TestConsistency:
    """The consistency subcommand."""

    def test_inconsistent(self, capsys, false2_path):
        """false2 is inconsistent at k = 2."""
        code, out, _ = run(capsys, "consistency", false2_path, "-k", "2")
        assert code == EXIT_OK
        assert out == "INCONSISTENT (k=2)\n"

    def test_consistent_at_one(self, capsys, false2_path):
        """false2 is consistent at k = 1."""
        assert run(capsys, "consistency", false2_path, "-k", "1")[1] == "CONSISTENT (k=1)\n"

    def test_json(self, capsys, false2_path):
        """JSON reports carry the empty entries."""
        code, out, _ = run(capsys, "consistency", false2_path, "-k", "2", "--json")
        data = json.loads(out)
        assert data["command"] == "consistency"
        assert data["consistent"] is False
        assert "2 [x]" in data["empty"]

    def test_table(self, capsys, ex33_path):
        """--table dumps one line per entry."""
        out = run(capsys, "consistency", ex33_path, "-k", "1", "--table")[1]
        assert out.startswith("CONSISTENT (k=1)\n1 [] : {()}\n")

    def test_refutation(self, capsys, tmp_path, false2_path):
        """--refutation writes a width-k refutation that checks."""
        output = str(tmp_path / "width2.jpf")
        code, out, _ = run(
            capsys, "consistency", false2_path, "-k", "2", "--refutation", "-o", output
        )
        assert code == EXIT_OK
        assert f"written to {output}" in out
        code, out, _ = run(capsys, "check", false2_path, "--proof", output)
        assert code == EXIT_OK
        assert ", refutes" in out

    def test_bad_k(self, capsys, ex33_path):
        """k must be at least 1."""
        assert run(capsys, "consistency", ex33_path, "-k", "0")[0] == EXIT_INVALID_INPUT


class TestTranslateAndConvert:
    """translate, simqres and convert."""

    def test_translate(self, capsys, qbf_files):
        """Clause leaves become Boolean relations."""
        code, out, _ = run(capsys, "translate", qbf_files["false"])
        assert code == EXIT_OK
        assert "C4 : bool bool" in out
        assert "(atom C4 x y)" in out

    def test_simqres(self, capsys, qbf_files):
        """The empty clause and (-x) are in the closure of the false formula."""
        assert run(capsys, "simqres", qbf_files["false"])[1].startswith("derived () in")
        assert run(capsys, "simqres", qbf_files["false"], "--clause=-x")[1].startswith(
            "derived (-x) in"
        )

    def test_simqres_not_derivable(self, capsys, qbf_files):
        """The true formula's closure lacks the empty clause."""
        out = run(capsys, "simqres", qbf_files["true"])[1]
        assert out == "() is not in the resolution closure\n"

    def test_simqres_not_prenex(self, capsys, qbf_files):
        """Closure simulation refuses non-prenex formulas."""
        assert run(capsys, "simqres", qbf_files["nonprenex"])[0] == EXIT_INVALID_INPUT

    def test_convert_round_trip(self, capsys, tmp_path, qbf_files):
        """Trace to clause proof to trace and to a judgement proof."""
        formula = qbf_files["false"]
        trace_path = str(tmp_path / "t.trace")
        proof_path = str(tmp_path / "p.jpf")
        back_path = str(tmp_path / "back.trace")
        qcsp_path = str(tmp_path / "q.jpf")
        run(capsys, "refute", formula, "-o", trace_path)
        code, out, _ = run(capsys, "convert", formula, "--trace", trace_path, "-o", proof_path)
        assert code == EXIT_OK
        assert out.startswith("clause proof with 6 step(s)")
        code, out, _ = run(
            capsys, "convert", formula, "--proof", proof_path, "--to", "trace", "-o", back_path
        )
        assert out.startswith("trace with 4 node(s)")
        assert run(capsys, "trace", formula, "--trace", back_path)[0] == EXIT_OK
        code, out, _ = run(
            capsys, "convert", formula, "--proof", proof_path, "--to", "qcsp", "-o", qcsp_path
        )
        assert code == EXIT_OK
        assert out.startswith("judgement proof with")


class TestRender:
    """Report rendering."""

    def test_text(self):
        """Templates produce the documented lines."""
        assert render("eval", {"verdict": False}) == "false\n"
        assert render("error", {"message": "boom", "exit": 1}) == "error: boom\n"

    def test_json(self):
        """JSON output includes the command name."""
        data = json.loads(render("eval", {"verdict": True}, as_json=True))
        assert data == {"command": "eval", "verdict": True}
