"""Tests for the wcp-prior command line."""

from __future__ import annotations

import json
import math

import pytest


def _run(capsys, *argv):
    from wcp_prior.cli import main

    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


# ---------------------------------------------------------------------------
# dist
# ---------------------------------------------------------------------------


class TestDist:
    def test_univariate(self, capsys):
        code, out, _ = _run(capsys, "dist", "--family", "sd", "--theta", "0.5")
        assert code == 0
        parsed = json.loads(out)
        assert parsed == {"distance": 0.5, "family": "sd", "params": [0.5]}

    def test_bivariate_without_rates(self, capsys):
        code, out, _ = _run(capsys, "dist", "--family", "gaussian-two-step", "--theta", "0", "0.5")
        assert code == 0
        assert json.loads(out)["distance"] == pytest.approx(0.5)

    def test_output_file(self, capsys, out_dir):
        path = out_dir / "d.json"
        code, out, _ = _run(capsys, "dist", "--family", "gaussian-2d", "--theta", "3", "4", "-o", str(path))
        assert code == 0
        assert out == ""
        assert json.loads(path.read_text())["distance"] == pytest.approx(5.0)

    def test_unknown_hyperparameter_is_a_usage_error(self, capsys):
        code, _, err = _run(capsys, "dist", "--family", "sd", "--n", "5", "--theta", "0.5")
        assert code == 2
        assert "does not take" in err

    def test_wrong_parameter_count(self, capsys):
        code, _, _ = _run(capsys, "dist", "--family", "gaussian-2d", "--theta", "1")
        assert code == 2

    def test_missing_family(self, capsys):
        from wcp_prior.cli import main

        with pytest.raises(SystemExit) as exc:
            main(["dist", "--theta", "0.5"])
        assert exc.value.code == 2


# ---------------------------------------------------------------------------
# prior
# ---------------------------------------------------------------------------


class TestPrior:
    def test_table_and_sidecar(self, capsys, out_dir):
        from wcp_prior.io import read_json, read_table

        path = out_dir / "sd.csv"
        code, _, _ = _run(capsys, "prior", "--family", "sd", "--eta", "2", "--points", "50", "-o", str(path))
        assert code == 0
        header, data = read_table(path)
        assert header == ["theta", "density", "cdf"]
        assert data.shape == (50, 3)
        sidecar = read_json(out_dir / "sd.json")
        assert sidecar["family"] == "sd"
        assert sidecar["hyperparameters"] == {"eta": 2.0}
        assert "written_at" in sidecar["metadata"]

    def test_json_to_stdout(self, capsys):
        code, out, _ = _run(capsys, "prior", "--family", "gaussian-2d", "--eta", "10", "--points", "4", "--format", "json")
        assert code == 0
        parsed = json.loads(out)
        assert parsed["header"] == ["theta1", "theta2", "density"]
        assert len(parsed["rows"]) == 16
        assert parsed["provenance"]["grid"] == "midpoints"

    def test_numeric_needs_eps(self, capsys):
        code, _, err = _run(capsys, "prior", "--family", "gpd-2d", "--eta", "20", "--numeric")
        assert code == 2
        assert "--eps" in err

    def test_missing_rate(self, capsys):
        code, _, err = _run(capsys, "prior", "--family", "sd")
        assert code == 2
        assert "eta" in err

    @pytest.mark.slow
    def test_numeric_writes_mesh(self, capsys, out_dir):
        from wcp_prior.io import read_json

        path = out_dir / "gpd.csv"
        code, _, _ = _run(
            capsys, "prior", "--family", "gpd-2d", "--eta", "20", "--numeric", "--eps", "0.05", "-o", str(path)
        )
        assert code == 0
        assert (out_dir / "gpd.mesh").exists()
        sidecar = read_json(out_dir / "gpd.json")
        assert sidecar["numeric"] is True
        assert 0.0 <= sidecar["tv_to_analytic"] < 0.5


# ---------------------------------------------------------------------------
# calibrate
# ---------------------------------------------------------------------------


class TestCalibrate:
    def test_gpd_tail(self, capsys):
        code, out, _ = _run(capsys, "calibrate", "--family", "gpd-tail", "--U", "0.5", "--alpha", "0.01")
        assert code == 0
        parsed = json.loads(out)
        assert parsed["eta"] == pytest.approx(-math.log(0.01), rel=1e-6)
        assert parsed["direction"] == "above"

    def test_ar1(self, capsys):
        code, out, _ = _run(
            capsys, "calibrate", "--family", "ar1", "--n", "10", "--sigma", "0.1", "--U", "0.9", "--alpha", "0.9"
        )
        assert code == 0
        assert json.loads(out)["eta"] == pytest.approx(13.44, abs=0.1)

    def test_infeasible_target_is_a_computational_failure(self, capsys):
        code, _, err = _run(capsys, "calibrate", "--family", "gpd-tail", "--U", "0", "--alpha", "0.1")
        assert code == 1
        assert err.startswith("error:")

    def test_alpha_out_of_range(self, capsys):
        code, _, _ = _run(capsys, "calibrate", "--family", "gpd-tail", "--U", "0.5", "--alpha", "1.5")
        assert code == 2

    def test_multivariate_family(self, capsys):
        code, _, _ = _run(capsys, "calibrate", "--family", "gaussian-2d", "--U", "0.5", "--alpha", "0.1")
        assert code == 2


# ---------------------------------------------------------------------------
# tv-study
# ---------------------------------------------------------------------------


class TestTvStudy:
    def test_family_without_numeric_construction(self, capsys):
        code, _, err = _run(capsys, "tv-study", "--family", "sd", "--eta", "1", "--eps-list", "0.1")
        assert code == 2
        assert "numerical" in err

    def test_bad_width_list(self, capsys):
        from wcp_prior.cli import main

        with pytest.raises(SystemExit):
            main(["tv-study", "--family", "gpd-2d", "--eta", "20", "--eps-list", "0.1,abc"])

    @pytest.mark.slow
    def test_records_in_order(self, capsys):
        code, out, _ = _run(capsys, "tv-study", "--family", "gpd-2d", "--eta", "20", "--eps-list", "0.1,0.05")
        assert code == 0
        records = json.loads(out)
        assert [r["epsilon"] for r in records] == [0.1, 0.05]
        assert all(set(r) == {"epsilon", "tv", "runtime_ms"} for r in records)
        assert all(0.0 <= r["tv"] <= 1.0 for r in records)


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


class TestSimulate:
    def _config(self, out_dir):
        path = out_dir / "study.json"
        path.write_text(
            json.dumps(
                {
                    "model": "ar1",
                    "true_params": [0.9],
                    "n_obs": 10,
                    "replicates": 3,
                    "priors": [{"name": "wcp"}, {"name": "uniform"}],
                    "seed": 11,
                }
            )
        )
        return path

    def test_table_and_summary(self, capsys, out_dir):
        from wcp_prior.io import read_json

        table = out_dir / "estimates.csv"
        code, _, _ = _run(capsys, "simulate", "--config", str(self._config(out_dir)), "-o", str(table))
        assert code == 0
        lines = table.read_text().splitlines()
        assert lines[0] == "replicate,prior,phi"
        assert len(lines) == 7
        summary = read_json(out_dir / "estimates.json")
        assert summary["config"]["seed"] == 11
        assert set(summary["priors"]) == {"wcp", "uniform"}

    def test_seed_override(self, capsys, out_dir):
        from wcp_prior.io import read_json

        table = out_dir / "estimates.csv"
        summary = out_dir / "summary.json"
        code, _, _ = _run(
            capsys,
            "simulate",
            "--config",
            str(self._config(out_dir)),
            "--seed",
            "5",
            "-o",
            str(table),
            "--summary",
            str(summary),
        )
        assert code == 0
        assert read_json(summary)["config"]["seed"] == 5

    def test_invalid_config(self, capsys, out_dir):
        path = out_dir / "bad.json"
        path.write_text(json.dumps({"model": "ar1", "true_params": [0.9, 0.1], "n_obs": 10}))
        code, _, _ = _run(capsys, "simulate", "--config", str(path))
        assert code == 2

    def test_missing_config(self, capsys, out_dir):
        code, _, err = _run(capsys, "simulate", "--config", str(out_dir / "absent.json"))
        assert code == 2
        assert "cannot read config" in err
