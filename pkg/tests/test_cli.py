"""Command-line interface: file round trips and exit codes."""

import csv
import os

import numpy as np
import pytest

from simselex.cli import main


@pytest.fixture
def linear_files(tmp_path):
    rng = np.random.default_rng(0)
    n, p = 80, 6
    X = rng.standard_normal((n, p))
    U = 0.3 * rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[:2] = 1.0
    y = X @ beta + 0.2 * rng.standard_normal(n)
    w_path = tmp_path / "w.csv"
    y_path = tmp_path / "y.csv"
    np.savetxt(w_path, X + U, delimiter=",")
    np.savetxt(y_path, y[:, None], delimiter=",")
    return str(w_path), str(y_path), tmp_path


def read_coef_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestFitCommands:
    def test_fit_naive_roundtrip(self, linear_files):
        w, y, tmp = linear_files
        out = str(tmp / "coef.csv")
        rc = main(["fit-naive", "--w", w, "--y", y, "--sigma-u", "0.09",
                   "--out", out])
        assert rc == 0
        rows = read_coef_csv(out)
        assert len(rows) == 6
        assert {r["index"] for r in rows} == {str(i) for i in range(6)}
        estimates = np.array([float(r["estimate"]) for r in rows])
        assert np.argmax(np.abs(estimates)) in (0, 1)

    def test_fit_simselex_roundtrip(self, linear_files):
        w, y, tmp = linear_files
        out = str(tmp / "coef.csv")
        rc = main(["--seed", "3", "fit", "--w", w, "--y", y, "--sigma-u", "0.09",
                   "--b", "3", "--out", out])
        assert rc == 0
        rows = read_coef_csv(out)
        selected = [int(r["index"]) for r in rows if r["selected"] == "1"]
        for r in rows:
            if r["selected"] == "1":
                assert r["extrapolant"] == "quadratic"
        assert set(selected) >= {0, 1}

    def test_fit_corrected_roundtrip(self, linear_files):
        w, y, tmp = linear_files
        out = str(tmp / "coef.csv")
        rc = main(["fit-corrected", "--w", w, "--y", y, "--sigma-u", "0.09",
                   "--out", out])
        assert rc == 0
        assert os.path.exists(out)

    def test_missing_file_is_config_error(self, tmp_path):
        rc = main(["fit-naive", "--w", "/nonexistent.csv", "--y", "/nope.csv",
                   "--sigma-u", "0.1", "--out", str(tmp_path / "o.csv")])
        assert rc == 2

    def test_bad_sigma_u_is_config_error(self, linear_files):
        w, y, tmp = linear_files
        rc = main(["fit-naive", "--w", w, "--y", y, "--sigma-u", "not-a-number",
                   "--out", str(tmp / "o.csv")])
        assert rc == 2

    def test_zero_events_is_numerical_error(self, tmp_path):
        rng = np.random.default_rng(1)
        np.savetxt(tmp_path / "w.csv", rng.standard_normal((20, 3)), delimiter=",")
        outcome = np.column_stack([np.abs(rng.standard_normal(20)) + 0.1,
                                   np.zeros(20)])
        np.savetxt(tmp_path / "y.csv", outcome, delimiter=",")
        rc = main(["fit-naive", "--model", "cox", "--w", str(tmp_path / "w.csv"),
                   "--y", str(tmp_path / "y.csv"), "--sigma-u", "0.1",
                   "--out", str(tmp_path / "o.csv")])
        assert rc == 3


class TestMicroarray:
    def test_pipeline(self, tmp_path):
        rng = np.random.default_rng(2)
        n, p = 60, 15
        mu = rng.standard_normal((n, p))
        mu[:, 0] += 2.0 * (rng.random(n) < 0.5)
        var = np.full((n, p), 0.05)
        var[:, -3:] = 10.0   # three hopelessly noisy genes
        y = (rng.random(n) < 0.5).astype(float)
        np.savetxt(tmp_path / "m.csv", mu, delimiter=",")
        np.savetxt(tmp_path / "v.csv", var, delimiter=",")
        np.savetxt(tmp_path / "y.csv", y[:, None], delimiter=",")
        out = str(tmp_path / "coef.csv")
        kept = str(tmp_path / "kept.csv")
        rc = main(["microarray", "--means", str(tmp_path / "m.csv"),
                   "--vars", str(tmp_path / "v.csv"),
                   "--y", str(tmp_path / "y.csv"), "--nsr-cutoff", "0.5",
                   "--b", "2", "--out", out, "--kept-out", kept])
        assert rc == 0
        kept_idx = np.loadtxt(kept, dtype=int)
        assert len(kept_idx) == 12
        assert not set(kept_idx) & {12, 13, 14}
        assert len(read_coef_csv(out)) == 12


class TestReproduce:
    def test_custom_config_roundtrip(self, tmp_path):
        ini = tmp_path / "exp.ini"
        ini.write_text(
            "[experiment]\n"
            "model = linear\n"
            "n = 60\n"
            "p = 6\n"
            "theta = 1,1\n"
            "sigma_u = 0.3\n"
            "sigma_eps = 0.2\n"
            "estimators = true,naive\n"
            "replicates = 2\n"
            "b = 2\n"
            "m = 3\n"
            "seed = 5\n"
        )
        out = tmp_path / "results"
        rc = main(["reproduce", "--table", "1", "--config", str(ini),
                   "--out", str(out)])
        assert rc == 0
        files = list(out.glob("*.csv"))
        assert any(f.name == "custom.csv" for f in files)
        # byte-identical rerun
        body1 = (out / "custom.csv").read_bytes()
        rc = main(["reproduce", "--table", "1", "--config", str(ini),
                   "--out", str(out)])
        assert rc == 0
        assert (out / "custom.csv").read_bytes() == body1

    def test_unknown_config_key_rejected(self, tmp_path):
        ini = tmp_path / "exp.ini"
        ini.write_text("[experiment]\nmodel = linear\nwhatever = 3\n")
        rc = main(["reproduce", "--table", "1", "--config", str(ini),
                   "--out", str(tmp_path / "r")])
        assert rc == 2


class TestSplineCli:
    def test_spline_fit_with_curves(self, tmp_path):
        rng = np.random.default_rng(5)
        n, p = 150, 4
        X = rng.uniform(-3, 3, (n, p))
        y = 3.0 * X[:, 3] + 0.5 * rng.standard_normal(n)
        np.savetxt(tmp_path / "w.csv", X, delimiter=",")
        np.savetxt(tmp_path / "y.csv", y[:, None], delimiter=",")
        out = str(tmp_path / "coef.csv")
        curves = str(tmp_path / "curves.csv")
        rc = main(["fit", "--model", "spline", "--w", str(tmp_path / "w.csv"),
                   "--y", str(tmp_path / "y.csv"), "--sigma-u", "0.0",
                   "--b", "2", "--out", out, "--curves-out", curves])
        assert rc == 0
        rows = read_coef_csv(out)
        assert len(rows) == 4 * 9
        with open(curves, newline="") as fh:
            curve_rows = list(csv.DictReader(fh))
        covs = {int(r["covariate"]) for r in curve_rows}
        assert 3 in covs
        per_cov = sum(1 for r in curve_rows if int(r["covariate"]) == 3)
        assert per_cov == 201
