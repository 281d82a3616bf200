"""End-to-end tests of the command-line interface.

Commands run in-process through main(argv); one test goes through a real
subprocess to cover the module entry point.  All inputs are written as the
JSON files the CLI documents, all outputs re-parsed through the serializer
(which doubles as the round-trip schema check).
"""

import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from conftest import GENERIC_G2_TAU
from thetalab import serialize
from thetalab.bilinear import ResidualReport, as_riemann_matrix
from thetalab.cli import main
from thetalab.kummer import FlexReport
from thetalab.search import SearchProblem, SearchResult, fit_hierarchy
from thetalab.serialize import load_jet, load_tau


def run(argv, out=None):
    args = [str(a) for a in argv]
    if out is not None:
        args += ["--out", str(out)]
    code = main(args)
    doc = json.loads(out.read_text()) if out is not None and out.exists() else None
    return code, doc


def write_tau(path, tau):
    rows = [[[z.real, z.imag] for z in np.asarray(row, dtype=complex)] for row in tau]
    path.write_text(json.dumps({"tau": rows}))
    return path


def jet_file_from_search(search_doc, path, with_a=False):
    jet = dict(search_doc["best_jet"])
    if with_a:
        jet["a"] = search_doc["a"]
    path.write_text(json.dumps(jet))
    return path


@pytest.fixture(scope="module")
def g1_env(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli-g1")
    tau = write_tau(d / "tau.json", [[1j]])
    fit_out = d / "fit.json"
    hist = d / "hist.csv"
    code, doc = run(["kp-search", "--tau", tau, "--seed", 42, "--restarts", 4,
                     "--iterations", 300, "--tol", "1e-9", "--threads", 2,
                     "--history", hist], out=fit_out)
    assert code == 0
    jet = jet_file_from_search(doc, d / "jet.json")
    return {"dir": d, "tau": tau, "fit": doc, "fit_path": fit_out,
            "jet": jet, "hist": hist}


@pytest.fixture(scope="module")
def g2_env(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli-g2")
    tau = write_tau(d / "tau.json", GENERIC_G2_TAU)
    product = write_tau(d / "product.json", [[1j, 0.0], [0.0, 2j]])

    code, op_doc = run(["one-point-search", "--tau", tau, "--seed", 5,
                        "--restarts", 3, "--iterations", 400, "--tol", "1e-7",
                        "--threads", 3], out=d / "op_fit.json")
    assert code == 0
    op_jet = jet_file_from_search(op_doc, d / "op_jet.json", with_a=True)

    code, kp_doc = run(["kp-search", "--tau", tau, "--seed", 11, "--restarts", 4,
                        "--iterations", 400, "--tol", "1e-7", "--threads", 4],
                       out=d / "kp_fit.json")
    assert code == 0
    kp_jet = jet_file_from_search(kp_doc, d / "kp_jet.json")
    return {"dir": d, "tau": tau, "product": product,
            "op_fit": op_doc, "op_jet": op_jet,
            "kp_fit": kp_doc, "kp_jet": kp_jet}


@pytest.fixture(scope="module")
def germ_env(g1_env, tmp_path_factory):
    d = tmp_path_factory.mktemp("cli-germ")
    rm = as_riemann_matrix(load_tau(g1_env["tau"]))
    jet, _ = load_jet(g1_env["jet"])
    problem = SearchProblem(tau=rm, target="hierarchy", jet=jet, free_vars=(),
                            sample_count=80, seed=7, restarts=2, iterations=400,
                            tolerance=1e-8)
    result = fit_hierarchy(problem, jet_order=3)
    germ = d / "germ.json"
    germ.write_text(json.dumps(serialize.jet_to_dict(result.best_jet)))
    return {"dir": d, "tau": g1_env["tau"], "germ": germ}


class TestThetaEval:
    def test_origin_matches_naive_sum(self, g1_env, tmp_path):
        code, doc = run(["theta-eval", "--tau", g1_env["tau"]], out=tmp_path / "t.json")
        assert code == 0
        naive = 1.0 + 2.0 * math.fsum(math.exp(-math.pi * n * n) for n in range(1, 101))
        got = complex(doc["reports"][0]["value"]["re"], doc["reports"][0]["value"]["im"])
        assert abs(got - naive) <= 1e-12 * abs(naive)
        assert 0.0 < doc["reports"][0]["error_bound"] < 1e-10

    def test_empty_point_list(self, g1_env, tmp_path):
        pts = tmp_path / "pts.json"
        pts.write_text(json.dumps({"points": []}))
        code, doc = run(["theta-eval", "--tau", g1_env["tau"], "--points", pts],
                        out=tmp_path / "t.json")
        assert code == 0
        assert doc["reports"] == [] and doc["count"] == 0

    def test_derivative_requests(self, g1_env, tmp_path):
        from thetalab.engine import theta_eval

        z = np.array([0.1 + 0.05j])
        u = np.array([1.0 + 0.0j])
        pts = tmp_path / "pts.json"
        pts.write_text(json.dumps({
            "points": [[[0.1, 0.05]]],
            "derivatives": [[[1.0]], [[1.0], [1.0]]],
        }))
        code, doc = run(["theta-eval", "--tau", g1_env["tau"], "--points", pts],
                        out=tmp_path / "t.json")
        assert code == 0
        rm = as_riemann_matrix(load_tau(g1_env["tau"]))
        jet = theta_eval(z, rm, [(u,), (u, u)])
        scale = math.exp(jet.scale_exponent)
        rep = doc["reports"][0]
        assert len(rep["derivs"]) == 2
        for entry, req in zip(rep["derivs"], [(u,), (u, u)]):
            got = complex(entry["value"]["re"], entry["value"]["im"])
            want = scale * jet.d(req)
            assert abs(got - want) <= 1e-12 * max(1.0, abs(want))


class TestErrorChannel:
    def test_non_symmetric_tau(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"tau": [[[0, 1], [0.3, 0.2]], [[0.1, 0.2], [0, 2]]]}))
        code = main(["theta-eval", "--tau", str(bad)])
        err = json.loads(capsys.readouterr().err)
        assert code == 2
        assert err["error"] == "TAU_NOT_SYMMETRIC"
        assert err["schema"] == serialize.SCHEMA_ID

    def test_missing_jet_is_input_error(self, g1_env, capsys):
        code = main(["kp-residual", "--tau", str(g1_env["tau"])])
        err = json.loads(capsys.readouterr().err)
        assert code == 2 and err["error"] == "INVALID_INPUT"

    def test_shift_vector_required(self, g1_env, capsys):
        code = main(["one-point-residual", "--tau", str(g1_env["tau"]),
                     "--jet", str(g1_env["jet"])])
        err = json.loads(capsys.readouterr().err)
        assert code == 2 and err["error"] == "INVALID_INPUT"
        assert "'a'" in err["message"]

    def test_malformed_tau_file(self, tmp_path, capsys):
        bad = tmp_path / "garbage.json"
        bad.write_text("not json at all")
        code = main(["decomp", "--tau", str(bad)])
        err = json.loads(capsys.readouterr().err)
        assert code == 2 and err["error"] == "INVALID_INPUT"

    def test_usage_error_is_json(self, capsys):
        code = main(["no-such-command"])
        err = json.loads(capsys.readouterr().err)
        assert code == 2 and err["error"] == "INVALID_INPUT"

    def test_missing_file_is_input_error(self, tmp_path, capsys):
        code = main(["theta-eval", "--tau", str(tmp_path / "absent.json")])
        err = json.loads(capsys.readouterr().err)
        assert code == 2 and err["error"] == "INVALID_INPUT"


class TestResidualCommands:
    def test_kp_residual_passes_on_fitted_jet(self, g1_env, tmp_path):
        code, doc = run(["kp-residual", "--tau", g1_env["tau"], "--jet", g1_env["jet"],
                         "--samples", 50, "--seed", 7, "--tol", "1e-9"],
                        out=tmp_path / "r.json")
        assert code == 0
        assert doc["pass"] is True and doc["which"] == "kp"
        assert doc["max_residual"] <= 1e-9
        assert doc["count"] == 50 and len(doc["residuals"]) == 50

    def test_kp_residual_fails_on_junk_jet(self, g1_env, tmp_path):
        junk = tmp_path / "junk.json"
        junk.write_text(json.dumps({"U": [1.0], "V": [[0.3, 0.1]],
                                    "W": [[0.2, -0.4]], "d": 0.0}))
        code, doc = run(["kp-residual", "--tau", g1_env["tau"], "--jet", junk,
                         "--samples", 30, "--seed", 1, "--tol", "1e-6"],
                        out=tmp_path / "r.json")
        assert code == 1
        assert doc["pass"] is False and doc["max_residual"] > 1e-6

    def test_dressed_form_matches_plain_one_point(self, g2_env, tmp_path):
        jet = json.loads(g2_env["op_jet"].read_text())
        c = complex(jet["c"]["re"], jet["c"]["im"])
        jet["A"] = [0.0, 0.0]
        jet["B"] = [-c.real, -c.imag]
        dressed = tmp_path / "dressed.json"
        dressed.write_text(json.dumps(jet))
        code_p, doc_p = run(["one-point-residual", "--tau", g2_env["tau"],
                             "--jet", g2_env["op_jet"], "--samples", 40,
                             "--seed", 9, "--tol", "1e-7"], out=tmp_path / "p.json")
        code_ab, doc_ab = run(["pab-residual", "--tau", g2_env["tau"],
                               "--jet", dressed, "--samples", 40,
                               "--seed", 9, "--tol", "1e-7"], out=tmp_path / "ab.json")
        assert code_p == 0 and code_ab == 0
        for rp, rab in zip(doc_p["residuals"], doc_ab["residuals"]):
            assert abs(rp - rab) <= 1e-12

    def test_longeq_on_sampled_divisor_points(self, g2_env, tmp_path):
        code, doc = run(["longeq", "--tau", g2_env["tau"], "--jet", g2_env["kp_jet"],
                         "--samples", 12, "--seed", 3, "--tol", "1e-6"],
                        out=tmp_path / "l.json")
        assert code == 0
        assert doc["count"] == 12 and doc["max_residual"] <= 1e-6

    def test_hierarchy_scan_and_exponent_gate(self, germ_env, tmp_path):
        base = ["hierarchy", "--tau", germ_env["tau"], "--jet", germ_env["germ"],
                "--samples", 24, "--seed", 4, "--tol", "1e-2", "--epsilon", "1e-2",
                "--scan", "1e-3,3.16e-3,1e-2,3.16e-2,1e-1"]
        code, doc = run(base + ["--min-exponent", "3.5"], out=tmp_path / "h.json")
        assert code == 0
        assert doc["scan"]["exponent"] >= 3.5
        assert len(doc["scan"]["per_epsilon"]) == 5
        # residuals must decay monotonically along the grid
        vals = [r for _, r in doc["scan"]["per_epsilon"]]
        assert vals == sorted(vals)
        code, doc = run(base + ["--min-exponent", "10"], out=tmp_path / "h2.json")
        assert code == 1 and doc["pass"] is False


class TestSearchCommands:
    def test_g1_fit_report(self, g1_env):
        doc = g1_env["fit"]
        assert doc["converged"] is True
        assert doc["best_residual"] <= 1e-9
        assert doc["best_jet"]["U"] == [{"re": 1.0, "im": 0.0}]
        assert doc["problem"]["target"] == "hirota"
        assert doc["note"] is None

    def test_history_csv(self, g1_env):
        with open(g1_env["hist"], newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["restart", "iterations", "objective"]
        assert len(rows) == 1 + 4
        for k, row in enumerate(rows[1:]):
            assert int(row[0]) == k
            assert int(row[1]) > 0
            assert float(row[2]) < 1e-18

    def test_deterministic_reruns(self, g1_env, tmp_path):
        code, doc = run(["kp-search", "--tau", g1_env["tau"], "--seed", 42,
                         "--restarts", 4, "--iterations", 300, "--tol", "1e-9",
                         "--threads", 1], out=tmp_path / "again.json")
        assert code == 0
        assert doc == g1_env["fit"]

    def test_sample_floor_is_enforced(self, g1_env, capsys):
        code = main(["kp-search", "--tau", str(g1_env["tau"]), "--samples", "10"])
        err = json.loads(capsys.readouterr().err)
        assert code == 2 and err["error"] == "INVALID_INPUT"

    def test_one_point_report_carries_shift_and_note(self, g2_env):
        doc = g2_env["op_fit"]
        assert doc["converged"] is True and doc["best_residual"] <= 1e-7
        assert doc["a"] is not None and len(doc["a"]) == 2
        assert "irreducib" in doc["note"]


class TestTheoremChain:
    """Fitted one-point data drives flex and weil1 to passing verdicts."""

    def test_flex_passes_at_a_half_point(self, g2_env, tmp_path):
        code, doc = run(["flex", "--tau", g2_env["tau"], "--jet", g2_env["op_jet"],
                         "--order", 2, "--tol", "1e-6"], out=tmp_path / "f.json")
        assert code == 0
        assert doc["pass"] is True
        assert doc["rank_ratio"] <= 1e-6
        assert len(doc["tested_halves"]) == 16
        assert sum(h["pass"] for h in doc["tested_halves"]) >= 1

    def test_weil1_passes_on_intersection_samples(self, g2_env, tmp_path):
        code, doc = run(["weil", "--which", "weil1", "--tau", g2_env["tau"],
                         "--jet", g2_env["op_jet"], "--samples", 20, "--seed", 1,
                         "--tol", "1e-6", "--repeats"], out=tmp_path / "w.json")
        assert code == 0
        assert doc["pass"] is True and doc["count"] == 20
        assert doc["max_residual"] <= 1e-6
        assert all(p["kind"] == "ThetaCapThetaA" for p in doc["points"])


class TestNovikovChain:
    """Fitted four-term data drives weil and longeq to passing verdicts."""

    def test_weil_passes_on_located_points(self, g2_env, tmp_path):
        code, doc = run(["weil", "--which", "weil", "--tau", g2_env["tau"],
                         "--jet", g2_env["kp_jet"], "--samples", 8, "--seed", 2,
                         "--tol", "1e-6"], out=tmp_path / "w.json")
        assert code == 0
        assert doc["pass"] is True and doc["count"] >= 1
        assert doc["max_residual"] <= 1e-6
        assert "under-sampled" in (doc["note"] or "")

    def test_longeq_on_fifty_theta_samples(self, g2_env, tmp_path):
        code, doc = run(["longeq", "--tau", g2_env["tau"], "--jet", g2_env["kp_jet"],
                         "--samples", 50, "--seed", 3, "--tol", "1e-6"],
                        out=tmp_path / "l.json")
        assert code == 0
        assert doc["count"] == 50 and doc["max_residual"] <= 1e-6


class TestFlexCommand:
    def test_genus1_trivial_pass_with_note(self, g1_env, tmp_path):
        jet = tmp_path / "jet.json"
        jet.write_text(json.dumps({"U": [1.0], "V": [[0.3, -0.2]],
                                   "a": [[0.21, 0.13]]}))
        code, doc = run(["flex", "--tau", g1_env["tau"], "--jet", jet],
                        out=tmp_path / "f.json")
        assert code == 0
        assert doc["pass"] is True
        assert "genus 1" in doc["note"]
        assert len(doc["tested_halves"]) == 4

    def test_order3_requires_explicit_germ(self, g1_env, tmp_path, capsys):
        jet = tmp_path / "jet.json"
        jet.write_text(json.dumps({"U": [1.0], "V": [[0.3, -0.2]],
                                   "W": [[0.1, 0.0]], "a": [[0.21, 0.13]]}))
        code = main(["flex", "--tau", str(g1_env["tau"]), "--jet", str(jet),
                     "--order", "3"])
        err = json.loads(capsys.readouterr().err)
        assert code == 2 and "zeta_coeffs" in err["message"]

    def test_order3_uses_germ_coefficients(self, germ_env, tmp_path):
        jet = json.loads(germ_env["germ"].read_text())
        jet["a"] = [[0.21, 0.13]]
        path = tmp_path / "jet.json"
        path.write_text(json.dumps(jet))
        code, doc = run(["flex", "--tau", germ_env["tau"], "--jet", path,
                         "--order", 3], out=tmp_path / "f.json")
        assert code == 0 and doc["order"] == "third"


class TestDecomp:
    def test_product_is_flagged(self, g2_env, tmp_path, capsys):
        code, doc = run(["decomp", "--tau", g2_env["product"], "--tol", "1e-10"],
                        out=tmp_path / "d.json")
        assert code == 1
        assert doc["verdict"] == "DECOMPOSABLE"
        assert doc["indicator"] <= 1e-10

    def test_generic_matrix_passes(self, g2_env, tmp_path):
        code, doc = run(["decomp", "--tau", g2_env["tau"]], out=tmp_path / "d.json")
        assert code == 0
        assert doc["verdict"] == "INDECOMPOSABLE"
        assert doc["indicator"] >= 1e-2


class TestGrid:
    def test_zero_nodes_header_only(self, g1_env, tmp_path):
        out = tmp_path / "g.csv"
        code = main(["grid", "--tau", str(g1_env["tau"]), "--jet", str(g1_env["jet"]),
                     "--shape", "0,4,4", "--out", str(out)])
        assert code == 0
        assert out.read_text().strip() == "x,y,t,re_u,im_u"

    def test_zero_direction_gives_constant_field(self, g1_env, tmp_path):
        jet = tmp_path / "jet.json"
        jet.write_text(json.dumps({"U": [0.0], "V": [[0.2, 0.0]],
                                   "W": [[0.1, 0.0]], "c": [0.37, -0.11]}))
        out = tmp_path / "g.csv"
        code = main(["grid", "--tau", str(g1_env["tau"]), "--jet", str(jet),
                     "--shape", "3,2,2", "--out", str(out)])
        assert code == 0
        with open(out, newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        assert len(rows) == 12
        for row in rows:
            assert abs(float(row[3]) - 0.37) <= 1e-14
            assert abs(float(row[4]) + 0.11) <= 1e-14

    def test_pole_sentinel_row(self, g1_env, tmp_path):
        jet = tmp_path / "jet.json"
        # base point sits exactly on the theta divisor for tau = i
        jet.write_text(json.dumps({"U": [1.0], "V": [[0.3, 0.0]],
                                   "W": [[0.2, 0.0]], "c": 0.1,
                                   "z0": [[0.5, 0.5]]}))
        out = tmp_path / "g.csv"
        code = main(["grid", "--tau", str(g1_env["tau"]), "--jet", str(jet),
                     "--shape", "3,1,1", "--step", "0.05,0.05,0.05",
                     "--out", str(out)])
        assert code == 0
        with open(out, newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        assert rows[0][3] == "pole" and rows[0][4] == "pole"
        for row in rows[1:]:
            float(row[3]), float(row[4])  # finite numbers after the pole

    def test_node_ordering_and_counts(self, g1_env, tmp_path):
        out = tmp_path / "g.csv"
        code = main(["grid", "--tau", str(g1_env["tau"]), "--jet", str(g1_env["jet"]),
                     "--shape", "2,2,3", "--step", "0.1,0.2,0.3",
                     "--origin", "1,2,3", "--out", str(out)])
        assert code == 0
        with open(out, newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        assert len(rows) == 12
        # t varies fastest, then y, then x; origin offsets all coordinates
        assert [float(v) for v in rows[0][:3]] == pytest.approx([1.0, 2.0, 3.0])
        assert [float(v) for v in rows[1][:3]] == pytest.approx([1.0, 2.0, 3.3])
        assert [float(v) for v in rows[3][:3]] == pytest.approx([1.0, 2.2, 3.0])
        assert [float(v) for v in rows[6][:3]] == pytest.approx([1.1, 2.0, 3.0])


class TestRoundTrip:
    def test_emitted_reports_reparse(self, g1_env, g2_env, tmp_path):
        _, residual = run(["kp-residual", "--tau", g1_env["tau"],
                           "--jet", g1_env["jet"], "--samples", 10, "--seed", 0,
                           "--tol", "1e-9"], out=tmp_path / "r.json")
        _, flex = run(["flex", "--tau", g2_env["tau"], "--jet", g2_env["op_jet"]],
                      out=tmp_path / "f.json")
        assert isinstance(serialize.parse_report(json.dumps(residual)), ResidualReport)
        assert isinstance(serialize.parse_report(json.dumps(flex)), FlexReport)
        assert isinstance(serialize.parse_report(json.dumps(g1_env["fit"])), SearchResult)
        restored = serialize.parse_report(json.dumps(g2_env["op_fit"]))
        assert isinstance(restored, SearchResult)
        assert restored.converged and restored.a is not None
        with pytest.raises(Exception):
            serialize.parse_report(json.dumps({"schema": "other-v9", "kind": "x"}))

    def test_console_entry_point(self, g1_env, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "thetalab.cli", "theta-eval",
             "--tau", str(g1_env["tau"])],
            capture_output=True, text=True, timeout=120,
        )
        assert proc.returncode == 0
        doc = json.loads(proc.stdout)
        assert doc["kind"] == "theta-report" and doc["schema"] == serialize.SCHEMA_ID
