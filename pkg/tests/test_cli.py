"""End-to-end tests for the command line interface.

Frozen orientation values used below:

* benchmark design p=(0.2,0.8), a=(0.24,0.09): share 0.5, inclusion
  (1, 0.375); with tau=(1,3) the estimand is 2.2, so support bounds
  (0, 10) give the interval [1.1, 6.1].
* two-point tau (0,1) with masses (2/3,1/3) at mu0=0.25: threshold 0.75,
  kept share 8/9, atom kept fractionally at 2/3.
* staggered panel, 20 units, group shares (0.7, 0.25, 0.05): event-study
  representation gives the share 89/264 and representativeness 89/480;
  the interacted representation has a negative weight, so no causal
  representation exists there.
"""

import json
from pathlib import Path

import numpy as np
import pytest

from estimand_audit import cli
from estimand_audit.data_io import MicroSample

BENCH_CSV = "label,p,a,w0,tau\n1,0.2,0.24,1.0,\n2,0.8,0.09,1.0,\n"
BENCH_TAU_CSV = "label,p,a,w0,tau\n1,0.2,0.24,1.0,1.0\n2,0.8,0.09,1.0,3.0\n"
TWO_POINT_CSV = (
    "label,p,a,w0,tau\n"
    "lo,0.6666666666666666,1.0,1.0,0.0\n"
    "hi,0.3333333333333333,1.0,1.0,1.0\n"
)
PROPENSITY_CSV = "label,mass,p\n1,0.2,0.4\n2,0.8,0.1\n"

SPEC_JSON = json.dumps({
    "family": "unconfoundedness",
    "seed": 0,
    "noise_scale": 0.0,
    "cells": [
        {"label": "1", "mass": 0.5, "p": 0.4},
        {"label": "2", "mass": 0.5, "p": 0.27},
    ],
})


def panel_csv():
    lines = ["unit,g,y1,y2,y3"]
    for i in range(14):
        lines.append(f"a{i:02d},2,0.0,1.0,1.5")
    for i in range(5):
        lines.append(f"b{i},3,0.0,0.5,2.0")
    lines.append("c0,inf,0.0,0.5,1.0")
    return "\n".join(lines) + "\n"


def micro_csv(path):
    xs = ["1"] * 200 + ["2"] * 800
    ds = [1] * 80 + [0] * 120 + [1] * 80 + [0] * 720
    MicroSample(x=np.asarray(xs), d=ds).to_csv(path)
    return str(path)


def run(*args):
    return cli.main([str(a) for a in args])


class TestAuditDesign:
    def test_benchmark_json(self, tmp_path):
        src = tmp_path / "bench.csv"
        src.write_text(BENCH_CSV)
        out = tmp_path / "report.json"
        assert run("audit", "--design", src, "--json", out, "--quiet") == 0
        payload = json.loads(out.read_text())
        assert payload["schema_version"] == 1
        assert payload["family"] == "design"
        assert payload["uniform"]["exists"] is True
        assert payload["uniform"]["p_internal"] == pytest.approx(0.5, abs=1e-12)
        assert payload["uniform"]["p_representative"] == pytest.approx(0.5, abs=1e-12)
        assert payload["uniform"]["a_max"] == pytest.approx(0.24, abs=1e-12)
        assert payload["uniform"]["inclusion"] == pytest.approx([1.0, 0.375], abs=1e-12)
        assert payload["moments"]["mu"] is None
        assert payload["moments"]["pop_w0"] == pytest.approx(1.0)
        assert payload["fixed_tau"] is None
        assert payload["bounds"] is None

    def test_human_table(self, tmp_path, capsys):
        src = tmp_path / "bench.csv"
        src.write_text(BENCH_CSV)
        assert run("audit", "--design", src) == 0
        text = capsys.readouterr().out
        assert "uniformly in tau0" in text
        assert "given tau0" in text
        assert "P(W*=1)" in text
        assert "P(W*=1 | W0=1)" in text

    def test_quiet_silences_stdout(self, tmp_path, capsys):
        src = tmp_path / "bench.csv"
        src.write_text(BENCH_CSV)
        assert run("audit", "--design", src, "--quiet") == 0
        assert capsys.readouterr().out == ""

    def test_matches_golden_file(self, tmp_path):
        src = tmp_path / "bench.csv"
        src.write_text(BENCH_CSV)
        out = tmp_path / "report.json"
        run("audit", "--design", src, "--json", out, "--quiet")
        got = json.loads(out.read_text())
        golden = Path(__file__).parent / "data" / "golden_audit.json"
        want = json.loads(golden.read_text())
        assert _approx_equal(got, want)


def _approx_equal(got, want):
    if isinstance(want, dict):
        return set(got) == set(want) and all(
            _approx_equal(got[k], want[k]) for k in want
        )
    if isinstance(want, list):
        return len(got) == len(want) and all(
            _approx_equal(g, w) for g, w in zip(got, want)
        )
    if isinstance(want, float):
        return got == pytest.approx(want, rel=1e-12, abs=1e-12)
    return got == want


class TestAuditFamilies:
    def test_propensity_input(self, tmp_path):
        src = tmp_path / "pt.csv"
        src.write_text(PROPENSITY_CSV)
        out = tmp_path / "r.json"
        assert run("audit", "--family", "ols_ate", "--propensities", src,
                   "--json", out, "--quiet") == 0
        payload = json.loads(out.read_text())
        assert payload["family"] == "ols_ate"
        assert payload["uniform"]["p_internal"] == pytest.approx(0.5, abs=1e-12)

    def test_event_study_panel(self, tmp_path):
        src = tmp_path / "panel.csv"
        src.write_text(panel_csv())
        out = tmp_path / "r.json"
        assert run("audit", "--family", "twfe_h", "--panel", src,
                   "--json", out, "--quiet") == 0
        payload = json.loads(out.read_text())
        assert payload["uniform"]["exists"] is True
        assert payload["uniform"]["p_internal"] == pytest.approx(89 / 264, abs=1e-10)
        assert payload["uniform"]["p_representative"] == pytest.approx(89 / 480, abs=1e-10)
        assert payload["moments"]["pop_w0"] == pytest.approx(0.55, abs=1e-12)

    def test_interacted_panel_nonexistence_is_not_an_error(self, tmp_path):
        src = tmp_path / "panel.csv"
        src.write_text(panel_csv())
        out = tmp_path / "r.json"
        assert run("audit", "--family", "twfe_cdh", "--panel", src,
                   "--json", out, "--quiet") == 0
        payload = json.loads(out.read_text())
        assert payload["uniform"]["exists"] is False
        assert payload["uniform"]["p_internal"] == 0.0
        assert payload["uniform"]["p_representative"] == 0.0
        assert payload["uniform"]["inclusion"] is None

    def test_groups_input(self, tmp_path):
        src = tmp_path / "groups.csv"
        src.write_text("g,share\n2,0.7\n3,0.25\ninf,0.05\n")
        out = tmp_path / "r.json"
        assert run("audit", "--family", "twfe_h", "--groups", src,
                   "--json", out, "--quiet") == 0
        payload = json.loads(out.read_text())
        assert payload["uniform"]["p_internal"] == pytest.approx(89 / 264, abs=1e-10)


class TestAuditFixedTau:
    def test_two_point_trim(self, tmp_path):
        src = tmp_path / "two.csv"
        src.write_text(TWO_POINT_CSV)
        out = tmp_path / "r.json"
        assert run("audit", "--design", src, "--mu0", "0.25",
                   "--json", out, "--quiet") == 0
        ft = json.loads(out.read_text())["fixed_tau"]
        assert ft["mu0"] == pytest.approx(0.25)
        assert ft["trim"]["direction"] == "above"
        assert ft["trim"]["alpha"] == pytest.approx(0.75, abs=1e-12)
        assert ft["trim"]["atom_fraction"] == pytest.approx(2 / 3, abs=1e-12)
        assert ft["report"]["p_internal"] == pytest.approx(8 / 9, abs=1e-12)
        assert ft["agreement"] is True
        solvers = ft["solvers"]
        for key in ("closed_form", "mass_reduction", "brute_force"):
            assert solvers[key] == pytest.approx(8 / 9, abs=1e-9)

    def test_tau_flag_attaches_values(self, tmp_path):
        src = tmp_path / "pt.csv"
        src.write_text(PROPENSITY_CSV)
        out = tmp_path / "r.json"
        assert run("audit", "--family", "ols_ate", "--propensities", src,
                   "--tau", "1,3", "--mu0", "1.5", "--json", out, "--quiet") == 0
        ft = json.loads(out.read_text())["fixed_tau"]
        assert ft["report"]["p_internal"] == pytest.approx(4 / 15, abs=1e-10)
        assert ft["trim"]["alpha"] == pytest.approx(1.5, abs=1e-12)

    def test_mu0_without_tau_is_a_domain_error(self, tmp_path, capsys):
        src = tmp_path / "bench.csv"
        src.write_text(BENCH_CSV)
        assert run("audit", "--design", src, "--mu0", "0.5") == 1
        assert "tau" in capsys.readouterr().err


class TestAuditBounds:
    def test_interval(self, tmp_path):
        src = tmp_path / "bench.csv"
        src.write_text(BENCH_TAU_CSV)
        out = tmp_path / "r.json"
        assert run("audit", "--design", src, "--b-lo", "0", "--b-hi", "10",
                   "--json", out, "--quiet") == 0
        payload = json.loads(out.read_text())
        assert payload["moments"]["mu"] == pytest.approx(2.2, abs=1e-12)
        ate = payload["bounds"]["ate"]
        assert ate["lo"] == pytest.approx(1.1, abs=1e-12)
        assert ate["hi"] == pytest.approx(6.1, abs=1e-12)
        assert ate["width"] == pytest.approx(5.0, abs=1e-12)

    def test_half_specified_support_is_a_usage_error(self, tmp_path):
        src = tmp_path / "bench.csv"
        src.write_text(BENCH_TAU_CSV)
        with pytest.raises(SystemExit) as err:
            run("audit", "--design", src, "--b-lo", "0")
        assert err.value.code == 2


class TestBoundsCommand:
    def test_decomposition_and_general(self, tmp_path):
        src = tmp_path / "bench.csv"
        src.write_text(BENCH_TAU_CSV)
        out = tmp_path / "r.json"
        assert run("bounds", "--design", src, "--b-lo", "0", "--b-hi", "10",
                   "--json", out, "--quiet") == 0
        payload = json.loads(out.read_text())
        assert payload["ate"]["lo"] == pytest.approx(1.1, abs=1e-12)
        assert payload["decomposition"]["omega_plus"] == pytest.approx(1.0)
        assert payload["decomposition"]["omega_minus"] == pytest.approx(0.0)
        assert payload["decomposition"]["mu_plus"] == pytest.approx(2.2, abs=1e-12)
        general = payload["general"]
        assert general["lo"] == pytest.approx(1.1, abs=1e-12)
        assert general["hi"] == pytest.approx(6.1, abs=1e-12)

    def test_mu_flag_supplies_the_estimand(self, tmp_path):
        src = tmp_path / "bench.csv"
        src.write_text(BENCH_CSV)
        out = tmp_path / "r.json"
        assert run("bounds", "--design", src, "--mu", "2.2", "--b-lo", "0",
                   "--b-hi", "10", "--json", out, "--quiet") == 0
        payload = json.loads(out.read_text())
        assert payload["ate"]["hi"] == pytest.approx(6.1, abs=1e-12)

    def test_missing_estimand_value(self, tmp_path, capsys):
        src = tmp_path / "bench.csv"
        src.write_text(BENCH_CSV)
        assert run("bounds", "--design", src, "--b-lo", "0", "--b-hi", "10") == 1
        assert "error" in capsys.readouterr().err


class TestEstimateCommand:
    def test_plug_in_share(self, tmp_path):
        data = micro_csv(tmp_path / "m.csv")
        out = tmp_path / "r.json"
        assert run("estimate", "--data", data, "--family", "ols_ate",
                   "--json", out, "--quiet") == 0
        payload = json.loads(out.read_text())
        assert payload["n"] == 1000
        assert payload["p_hat"] == pytest.approx(0.5, abs=1e-12)
        assert payload["trimmed_cells"] == []
        counts = {c["label"]: c["count"] for c in payload["cells"]}
        assert counts == {"1": 200, "2": 800}

    def test_family_is_required(self, tmp_path):
        data = micro_csv(tmp_path / "m.csv")
        with pytest.raises(SystemExit) as err:
            run("estimate", "--data", data)
        assert err.value.code == 2


class TestBootstrapCommand:
    def test_json_draws(self, tmp_path):
        data = micro_csv(tmp_path / "m.csv")
        out = tmp_path / "r.json"
        assert run("bootstrap", "--data", data, "--family", "ols_ate",
                   "--B", "40", "--alpha", "0.05", "--seed", "3",
                   "--json", out, "--quiet") == 0
        payload = json.loads(out.read_text())
        assert payload["n_draws"] == 40
        assert len(payload["draws"]) == 40
        assert payload["ci"]["lo"] == 0.0
        assert 0.0 <= payload["ci"]["hi"] <= 1.0

    def test_seed_reproducibility(self, tmp_path):
        data = micro_csv(tmp_path / "m.csv")
        out1, out2 = tmp_path / "r1.json", tmp_path / "r2.json"
        run("bootstrap", "--data", data, "--family", "ols_ate", "--B", "25",
            "--seed", "11", "--json", out1, "--quiet")
        run("bootstrap", "--data", data, "--family", "ols_ate", "--B", "25",
            "--seed", "11", "--json", out2, "--quiet")
        assert out1.read_bytes() == out2.read_bytes()


class TestSimulateCommand:
    def test_byte_identical_with_seed(self, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text(SPEC_JSON)
        f1, f2 = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run("simulate", "--spec", spec, "--n", "200", "--seed", "7",
                   "--out", f1) == 0
        assert run("simulate", "--spec", spec, "--n", "200", "--seed", "7",
                   "--out", f2) == 0
        assert f1.read_bytes() == f2.read_bytes()
        assert f1.read_text().splitlines()[0] == "x,d,y"

    def test_seed_changes_output(self, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text(SPEC_JSON)
        f1, f2 = tmp_path / "a.csv", tmp_path / "b.csv"
        run("simulate", "--spec", spec, "--n", "200", "--seed", "7", "--out", f1)
        run("simulate", "--spec", spec, "--n", "200", "--seed", "8", "--out", f2)
        assert f1.read_bytes() != f2.read_bytes()

    def test_stdout_stream(self, tmp_path, capsys):
        spec = tmp_path / "spec.json"
        spec.write_text(SPEC_JSON)
        assert run("simulate", "--spec", spec, "--n", "5", "--seed", "1") == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "x,d,y"
        assert len(lines) == 6


class TestFigureData:
    def test_weight_profile_columns(self, tmp_path):
        src = tmp_path / "bench.csv"
        src.write_text(BENCH_CSV)
        out = tmp_path / "fig1.csv"
        assert run("figure-data", "--which", "fig1", "--design", src,
                   "--out", out) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "x,f_X,a_f_X_over_a_max"
        rows = [line.split(",") for line in lines[1:]]
        assert [float(r[1]) for r in rows] == pytest.approx([0.2, 0.8])
        assert [float(r[2]) for r in rows] == pytest.approx([0.2, 0.3], abs=1e-12)

    def test_constant_weights_coincide(self, tmp_path):
        src = tmp_path / "flat.csv"
        src.write_text("label,p,a,w0,tau\n1,0.25,0.3,1.0,\n2,0.75,0.3,1.0,\n")
        out = tmp_path / "fig1.csv"
        run("figure-data", "--which", "fig1", "--design", src, "--out", out)
        for line in out.read_text().splitlines()[1:]:
            _, f_x, scaled = line.split(",")
            assert float(scaled) == pytest.approx(float(f_x), abs=1e-12)

    def test_trim_region(self, tmp_path):
        src = tmp_path / "two.csv"
        src.write_text(TWO_POINT_CSV)
        out = tmp_path / "fig2.csv"
        assert run("figure-data", "--which", "fig2", "--design", src,
                   "--mu0", "0.25", "--out", out) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "tau,mass,kept,alpha"
        rows = [line.split(",") for line in lines[1:]]
        assert [float(r[0]) for r in rows] == [0.0, 1.0]
        assert float(rows[0][2]) == pytest.approx(1.0, abs=1e-12)
        assert float(rows[1][2]) == pytest.approx(2 / 3, abs=1e-12)
        for r in rows:
            assert float(r[3]) == pytest.approx(0.75, abs=1e-12)

    def test_full_support_when_mu0_is_the_mean(self, tmp_path):
        src = tmp_path / "two.csv"
        src.write_text(TWO_POINT_CSV)
        out = tmp_path / "fig2.csv"
        mu0 = repr(1 / 3)
        assert run("figure-data", "--which", "fig2", "--design", src,
                   "--mu0", mu0, "--out", out) == 0
        rows = [line.split(",") for line in out.read_text().splitlines()[1:]]
        assert all(float(r[2]) == 1.0 for r in rows)
        assert all(r[3] == "" for r in rows)

    def test_fig2_requires_tau(self, tmp_path, capsys):
        src = tmp_path / "bench.csv"
        src.write_text(BENCH_CSV)
        assert run("figure-data", "--which", "fig2", "--design", src) == 1
        assert "tau" in capsys.readouterr().err


class TestUsageErrors:
    def test_design_and_family_conflict(self, tmp_path):
        src = tmp_path / "bench.csv"
        src.write_text(BENCH_CSV)
        with pytest.raises(SystemExit) as err:
            run("audit", "--design", src, "--family", "ols_ate")
        assert err.value.code == 2

    def test_family_without_its_input(self):
        with pytest.raises(SystemExit) as err:
            run("audit", "--family", "ols_ate")
        assert err.value.code == 2

    def test_domain_errors_exit_one(self, tmp_path, capsys):
        src = tmp_path / "bad.csv"
        src.write_text("label,p,a,w0,tau\n1,0.4,0.2,1.0,\n2,0.4,0.1,1.0,\n")
        assert run("audit", "--design", src) == 1
        assert "error" in capsys.readouterr().err
