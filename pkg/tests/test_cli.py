import json
import math
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from qqsphere.cli import main
from qqsphere.core import parse_problem, serialize_point, serialize_problem, Problem
from qqsphere.schemas import COMMANDS, schema_for


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def validate(cmd, text):
    schema = schema_for(cmd)
    jsonschema.Draft202012Validator.check_schema(schema)
    for line in text.splitlines():
        jsonschema.validate(json.loads(line), schema)


def error_of(err):
    lines = err.strip().splitlines()
    assert len(lines) == 1
    doc = json.loads(lines[0])
    validate("error", lines[0])
    return doc


@pytest.fixture
def fig(tmp_path, capsys):
    path = tmp_path / "p.json"
    assert run(capsys, "gen", "--kind", "figure1", "--beta", 0.25, "--out", path)[0] == 0
    return path


@pytest.fixture
def diag_files(tmp_path):
    p = Problem(np.diag([0.0, 1.0]), 1.0)
    pf = tmp_path / "d.json"
    pf.write_text(serialize_problem(p))
    zf = tmp_path / "z.json"
    zf.write_text(serialize_point(np.sqrt([0.75, 0.25])))
    return pf, zf


class TestSchemas:
    @pytest.mark.parametrize("cmd", list(COMMANDS) + ["error"])
    def test_print_schema(self, capsys, cmd):
        code, out, _ = run(capsys, cmd, "--print-schema") if cmd != "error" else run(capsys, "--print-schema")
        assert code == 0
        schema = json.loads(out)
        jsonschema.Draft202012Validator.check_schema(schema)
        assert schema["$id"].endswith("/v1")


class TestCommands:
    def test_gen_roundtrip(self, fig, capsys):
        validate("gen", fig.read_text())
        p = parse_problem(fig.read_text())
        assert p.n == 3 and p.beta == 0.25

    def test_gen_kinds(self, capsys):
        for kind in ("diagonal-uniform", "rank-one", "dense-symmetric", "dense-hermitian"):
            code, out, _ = run(capsys, "gen", "--kind", kind, "--n", 4, "--beta", 1, "--seed", 3)
            assert code == 0
            validate("gen", out)

    def test_solve_and_certify(self, fig, tmp_path, capsys):
        code, out, _ = run(capsys, "solve", fig, "--seed", 2)
        assert code == 0
        validate("solve", out)
        doc = json.loads(out)
        assert doc["grad_norm"] <= 1e-10
        zf = tmp_path / "z.json"
        zf.write_text(json.dumps(doc["z"]))
        code, out, _ = run(capsys, "certify", fig, zf)
        assert code == 0
        validate("certify", out)
        assert json.loads(out)["certificate"]["label"] != "NotStationary"

    def test_certify_example(self, diag_files, capsys):
        code, out, _ = run(capsys, "certify", *diag_files)
        doc = json.loads(out)
        assert doc["certificate"]["label"] == "StrictLocalMin"
        assert doc["certificate"]["global_ok"] == "Certified"
        assert doc["fourth_order_necessary"]["kind"] == "NecessaryPass"

    def test_diag(self, diag_files, capsys):
        code, out, _ = run(capsys, "diag", diag_files[0])
        assert code == 0
        validate("diag", out)
        rows = [json.loads(l) for l in out.splitlines()]
        assert [r["f"] for r in rows] == pytest.approx([0.4375, 0.5, 1.0])

    def test_diag_not_diagonal(self, fig, capsys):
        code, _, err = run(capsys, "diag", fig)
        assert code == 2 and error_of(err)["error"] == "NotDiagonal"

    def test_rankone(self, capsys):
        code, out, _ = run(capsys, "rankone", "[1, 1, 1]", "--beta", 1)
        assert code == 0
        validate("rankone", out)
        doc = json.loads(out)
        assert doc["mode"] == "Orthogonal" and doc["f_star"] == pytest.approx(1 / 6)
        code, out, _ = run(capsys, "rankone", '{"re": [3, 1, 1], "im": [0, 0, 0]}', "--beta", 1, "--starts", 100)
        validate("rankone", out)
        assert json.loads(out)["mode"] == "ConsistentNumeric"

    def test_classify(self, tmp_path, capsys):
        pf = tmp_path / "p.json"
        pf.write_text(serialize_problem(Problem(np.diag([2.0, 1.0, 0.0]), 0.1)))
        zf = tmp_path / "z.json"
        zf.write_text(serialize_point(np.array([1.0, 0.0, 0.0])))
        code, out, _ = run(capsys, "classify", pf, zf, "--kind", "small", "--gamma", 1)
        assert code == 0
        validate("classify", out)
        doc = json.loads(out)
        assert "R3" in doc["label"]["region"]
        assert doc["negative_direction"]["hf"] == pytest.approx(-2.2)

    def test_classify_no_gap(self, tmp_path, capsys):
        pf = tmp_path / "p.json"
        pf.write_text(serialize_problem(Problem(np.eye(3), 0.1)))
        zf = tmp_path / "z.json"
        zf.write_text(serialize_point(np.array([1.0, 0.0, 0.0])))
        code, _, err = run(capsys, "classify", pf, zf, "--kind", "small")
        assert code == 4 and error_of(err)["error"] == "NoSpectralGap"

    def test_count_critical(self, fig, capsys):
        code, out, _ = run(capsys, "count-critical", fig, "--starts", 10000, "--seed", 1)
        assert code == 0
        validate("count-critical", out)
        summary = json.loads(out.splitlines()[-1])["summary"]
        assert (summary["n_stationary"], summary["n_minima"]) == (6, 2)

    def test_kl(self, tmp_path, capsys):
        pf = tmp_path / "p.json"
        pf.write_text(serialize_problem(Problem(np.diag([1.0, 1.0, 2.0]), 1.0)))
        zf = tmp_path / "z.json"
        zf.write_text(serialize_point(np.array([1.0, 1.0, 0.0]) / math.sqrt(2)))
        code, out, _ = run(capsys, "kl", pf, zf)
        assert code == 0
        validate("kl", out)
        assert 0.2 <= json.loads(out)["theta_hat"] <= 0.3

    def test_counterexample(self, tmp_path, capsys):
        out_path = tmp_path / "ce.json"
        code, out, _ = run(capsys, "counterexample", "--n", 5, "--C", 1, "--eps", 0.25, "--out", out_path)
        assert code == 0
        validate("counterexample", out)
        doc = json.loads(out)
        assert doc["grad_norm"] <= 1e-10 and abs(doc["mu_min"]) <= 1e-8
        code, cert, _ = run(capsys, "certify", out_path, tmp_path / "ce_point.json")
        assert json.loads(cert)["certificate"]["grad_norm"] <= 1e-10

    def test_perturb(self, tmp_path, capsys):
        pf = tmp_path / "p.json"
        pf.write_text(serialize_problem(Problem(np.diag(np.linspace(0, 1, 8)), 1.0)))
        code, out, _ = run(capsys, "perturb", pf, "--sigma", 0.01, "--seed", 1)
        assert code == 0
        validate("perturb", out)
        assert json.loads(out)["holds"]

    def test_landscape_grid(self, fig, tmp_path, capsys):
        g = tmp_path / "grid.csv"
        code, out, _ = run(capsys, "landscape-grid", fig, "--res", "400x200", "--out", g)
        assert code == 0
        lines = g.read_text().splitlines()
        assert lines[0] == "phi,theta,f" and len(lines) == 80001
        phi, th, f = map(float, lines[1 + 7].split(","))
        z = np.array([math.cos(phi), math.sin(phi) * math.cos(th), math.sin(phi) * math.sin(th)])
        A = np.array([[1.0, 0, 1], [0, 1, 0], [1, 0, 1]])
        assert f == pytest.approx(0.5 * z @ A @ z + 0.125 * np.sum(z ** 4), abs=1e-15)

    def test_landscape_grid_rejects(self, tmp_path, capsys):
        pf = tmp_path / "p.json"
        pf.write_text(serialize_problem(Problem(np.eye(4), 1.0)))
        code, _, err = run(capsys, "landscape-grid", pf)
        assert code == 2 and error_of(err)["error"] == "DimensionMismatch"


class TestErrors:
    def test_unknown_flag(self, fig, capsys):
        code, _, err = run(capsys, "diag", fig, "--bogus", 1)
        assert code == 2 and error_of(err)["exit_code"] == 2

    def test_missing_command(self, capsys):
        code, _, err = run(capsys)
        assert code == 2 and error_of(err)

    def test_bad_file(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        code, _, err = run(capsys, "diag", bad)
        assert code == 2 and error_of(err)["error"] == "MalformedDocument"

    def test_threads(self, fig, capsys):
        assert run(capsys, "diag", fig, "--threads", 0)[0] == 2

    def test_every_command_accepts_seed_and_out(self, capsys):
        from qqsphere.cli import build_parser
        sub = build_parser()._subparsers._group_actions[0].choices
        for name in COMMANDS:
            opts = {o for a in sub[name]._actions for o in a.option_strings}
            assert {"--seed", "--out", "--print-schema", "--threads"} <= opts


class TestReproducible:
    def test_byte_identical(self, fig, tmp_path, capsys):
        outs = []
        for k in range(2):
            o = tmp_path / f"cat{k}.jsonl"
            assert run(capsys, "count-critical", fig, "--starts", 500, "--seed", 4, "--out", o)[0] == 0
            outs.append(o.read_bytes())
        assert outs[0] == outs[1]

    def test_solve_identical(self, fig, capsys):
        a = run(capsys, "solve", fig, "--seed", 5)[1]
        b = run(capsys, "solve", fig, "--seed", 5)[1]
        assert a == b

    def test_module_entry(self, fig):
        r = subprocess.run([sys.executable, "-m", "qqsphere", "diag", str(fig)], capture_output=True, text=True)
        assert r.returncode == 2 and json.loads(r.stderr)["error"] == "NotDiagonal"
