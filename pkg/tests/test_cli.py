import json
import math
import subprocess
import sys

import pytest

from llad.cli import main, parse_args

from support import ROOT, dg, g, grad_g

G = str(ROOT / "examples" / "g.lina")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv, "--json")
    assert code == 0, err
    return json.loads(out)


@pytest.fixture
def llt(tmp_path):
    def write(text, name="t.llt"):
        p = tmp_path / name
        p.write_text(text)
        return str(p)
    return write


class TestArgs:
    def test_nested(self):
        assert parse_args("x=1.5, y=(1,(2,3)), u=()") == {"x": 1.5, "y": (1.0, (2.0, 3.0)),
                                                          "u": ()}

    def test_empty(self):
        assert parse_args(None) == {}


class TestLinearA:
    def test_check(self, capsys):
        d = run_json(capsys, "check", G)
        assert d["primal_type"] == "R" and d["tangent_type"] == "1"
        assert d["primal_env"] == {"x": "R", "y": "R"}
        assert d["linear_b_sort"] == "p"

    def test_eval(self, capsys):
        d = run_json(capsys, "eval", G, "--args", "x=0.5,y=2.0")
        assert d["primal"] == pytest.approx(g(0.5, 2.0))

    def test_workload(self, capsys):
        assert run_json(capsys, "workload", G) == {"jax_workload": 4, "translated_workload": 4}

    def test_qcheck(self, capsys):
        d = run_json(capsys, "qcheck", G)
        assert d["m"] == 4 and d["safe"] is True
        assert d["decorated_type"] == "!R * (1 & (Top -o^1 Top))"

    def test_grad(self, capsys):
        d = run_json(capsys, "grad", G, "--args", "x=0.5,y=2.0", "--cotangent", "2.0")
        assert d["variables"] == ["x", "y"]
        assert d["value"] == pytest.approx(g(0.5, 2.0))
        assert d["gradient"] == pytest.approx(grad_g(0.5, 2.0, 2.0))

    def test_grad_skip_unzip(self, capsys):
        d = run_json(capsys, "grad", G, "--args", "x=1.0,y=-1.0", "--skip-unzip")
        assert d["skip_unzip"] is True
        assert d["gradient"] == pytest.approx(grad_g(1.0, -1.0, 1.0))

    def test_grad_missing_input(self, capsys):
        code, _, err = run(capsys, "grad", G, "--args", "x=1.0")
        assert code == 1 and "y" in err

    @pytest.mark.parametrize("stage", ["translate", "forward", "unzip", "transpose"])
    def test_stages_typecheck(self, capsys, stage):
        d = run_json(capsys, stage, G)
        assert d["term"] and d["type"]

    def test_oracle_check(self, capsys):
        d = run_json(capsys, "oracle-check", G, "--trials", "5", "--seed", "3")
        assert d == {"trials": 5, "seed": 3, "failures": [], "ok": True}

    def test_tangent_program(self, capsys, tmp_path):
        p = tmp_path / "d.lina"
        p.write_text("## env: x : R, x' : R\nlet (y; y') = (sin(x); x') in (y; y')\n")
        d = run_json(capsys, "eval", str(p), "--args", "x=0.5,x'=2.0")
        assert d == {"primal": pytest.approx(math.sin(0.5)), "tangent": 2.0}

    def test_text_output(self, capsys):
        code, out, _ = run(capsys, "workload", G)
        assert code == 0
        assert out.strip() == "jax workload 4, translated workload 4"


class TestCalculus:
    def test_check(self, capsys, llt):
        d = run_json(capsys, "check", llt("## env: !x : R\n(lam y : R . <y, y>) (dot* x 2.0)\n"))
        assert d["type"] == "R & R" and d["safe"] is True

    def test_eval(self, capsys, llt):
        f = llt("## env: !x : R\n(lam y : R . <y, y>) (dot* x 2.0)\n")
        d = run_json(capsys, "eval", f, "--args", "x=1.5")
        assert d["value"] == [3.0, 3.0]
        assert (d["flops"], d["banked_flops"], d["steps"]) == (1, 0, 2)

    def test_eval_trace(self, capsys, llt):
        d = run_json(capsys, "eval", llt("(lam x : R . <x, x>) (dot+ <3.0, 2.0>)\n"), "--trace")
        assert [s["kind"] for s in d["trace"]] == ["beta-plus", "beta-lam"]

    def test_qcheck(self, capsys, llt):
        d = run_json(capsys, "qcheck", llt("(lam x : R . <x, x>) (dot+ <3.0, 2.0>)\n"))
        assert d["m"] == 1 and d["decorated_type"] == "R & R"

    def test_workload(self, capsys, llt):
        assert run_json(capsys, "workload", llt("dot+ <dot* 2.0 3.0, 1.0>\n")) == {"workload": 2}


class TestErrors:
    def test_parse_error(self, capsys, tmp_path):
        p = tmp_path / "bad.lina"
        p.write_text("let v = sin(x) in\n")
        code, _, err = run(capsys, "check", str(p))
        assert code == 1 and err.startswith("parse error")

    def test_type_error(self, capsys, llt):
        code, _, err = run(capsys, "check", llt("dot+ 1.0\n"))
        assert code == 1 and "TypeMismatch" in err

    def test_linearity_error(self, capsys, llt):
        code, _, err = run(capsys, "check", llt("lam x : R . (x, x)\n"))
        assert code == 1 and "Linearity" in err

    def test_unknown_language(self, capsys, tmp_path):
        p = tmp_path / "prog.txt"
        p.write_text("1.0")
        assert run(capsys, "check", str(p))[0] == 1
        assert run(capsys, "check", str(p), "--lang", "llt")[0] == 0

    def test_missing_file(self, capsys):
        assert run(capsys, "check", "/nonexistent.lina")[0] != 0


def test_console_script():
    r = subprocess.run([sys.executable, "-m", "llad.cli", "workload", G, "--json"],
                       capture_output=True, text=True, check=True)
    assert json.loads(r.stdout)["jax_workload"] == 4


def test_gradient_pairs_with_tangents(capsys):
    d = run_json(capsys, "grad", G, "--args", "x=0.3,y=0.7")
    gx, gy = d["gradient"]
    assert gx * 0.4 + gy * -1.2 == pytest.approx(dg(0.3, 0.4, 0.7, -1.2))


SCHEMA = json.loads((ROOT / "docs" / "cli-json-schema.json").read_text())


def _conforms(data, name):
    d = SCHEMA["$defs"][name]
    return set(d["required"]) <= data.keys() <= d["properties"].keys()


class TestSchema:
    @pytest.mark.parametrize("argv, name", [
        (["check", G], "check_lina"),
        (["qcheck", G], "qcheck"),
        (["eval", G, "--args", "x=1.0,y=2.0"], "eval_lina"),
        (["translate", G], "term_report"),
        (["forward", G], "term_report"),
        (["unzip", G], "term_report"),
        (["transpose", G], "term_report"),
        (["grad", G, "--args", "x=1.0,y=2.0"], "grad"),
        (["workload", G], "workload_lina"),
        (["oracle-check", G, "--trials", "2"], "oracle_check"),
    ])
    def test_linear_a_outputs(self, capsys, argv, name):
        assert _conforms(run_json(capsys, *argv), name)

    @pytest.mark.parametrize("cmd, name", [
        ("check", "check_llt"), ("qcheck", "qcheck"), ("workload", "workload_llt"),
    ])
    def test_calculus_outputs(self, capsys, llt, cmd, name):
        assert _conforms(run_json(capsys, cmd, llt("dot+ <1.0, 2.0>\n")), name)

    def test_eval_trace_output(self, capsys, llt):
        d = run_json(capsys, "eval", llt("dot+ <1.0, 2.0>\n"), "--trace")
        assert _conforms(d, "eval_llt")
        assert set(d["trace"][0]) >= {"kind", "redex_path", "term_size"}

    def test_every_command_documented(self):
        from llad.cli import cli
        assert set(SCHEMA["properties"]) == set(cli.commands)
