import json
import subprocess
import sys

import numpy as np
import pytest

from hwfr import cli, inference, io
from hwfr.errors import ConvergenceError


def run(*args):
    return cli.run([str(a) for a in args])


def tree_bytes(d):
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def sim(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert run("simulate", "--out", out, "--design", "1d", "--x-type", "bspline",
               "--beta-case", "2", "--n", 50, "--p", 32, "--snr", 9, "--seed", 7) == 0
    return out


def test_simulate_self_consistent(sim):
    ds, ids, manifest = io.read_dataset(sim / "data")
    beta = io.read_grid(sim / "beta_true.csv")
    _, rows = io.read_csv(sim / "truth.csv")
    g = np.array([float(r[1]) for r in rows])
    np.testing.assert_array_equal(g, ds.predictors @ beta / 32)
    assert manifest["design"]["seed"] == 7
    assert (sim / "beta_true.png").stat().st_size > 0


def test_simulate_same_seed_byte_identical(sim, tmp_path):
    assert run("simulate", "--out", tmp_path, "--config", sim / "resolved_config.json") == 0
    assert tree_bytes(tmp_path) == tree_bytes(sim)


def test_simulate_3d_writes_volumes(tmp_path):
    assert run("simulate", "--out", tmp_path, "--design", "3d", "--dims", 4, "--n", 6) == 0
    assert len(list((tmp_path / "data" / "volumes").glob("*.hwv"))) == 6
    assert io.read_grid(tmp_path / "beta_true.hwv").shape == (4, 4, 4)


def test_fit_records_selection_and_reruns_identically(sim, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("fit", "--out", a, "--data", sim / "data", "--tune", "cv", "--k", 5) == 0
    meta = json.loads((a / "fit.json").read_text())
    assert {"level", "lambda", "df", "kkt_violation", "tuning_seed"} <= set(meta)
    assert meta["kkt_violation"] <= 1e-7
    cfg = json.loads((a / "resolved_config.json").read_text())
    assert "out" not in cfg and "threads" not in cfg
    assert run("fit", "--out", b, "--config", a / "resolved_config.json", "--threads", 3) == 0
    assert tree_bytes(a) == tree_bytes(b)
    eta_rows = io.read_csv(a / "eta.csv")[1]
    assert len(eta_rows) == meta["df"]


def test_fit_lambda_max_is_zero(sim, tmp_path):
    assert run("fit", "--out", tmp_path, "--data", sim / "data", "--lambda-max") == 0
    assert not io.read_grid(tmp_path / "beta_hat.csv").any()
    assert io.read_csv(tmp_path / "eta.csv")[1] == []


def test_predict_matches_fitted_values(sim, tmp_path):
    f = tmp_path / "fit"
    assert run("fit", "--out", f, "--data", sim / "data", "--tune", "bic") == 0
    assert run("predict", "--out", tmp_path / "p", "--fit", f, "--data", sim / "data") == 0
    pred = io.read_csv(tmp_path / "p" / "predictions.csv")[1]
    fitted = io.read_csv(f / "fitted.csv")[1]
    np.testing.assert_allclose([float(r[1]) for r in pred], [float(r[2]) for r in fitted],
                               atol=1e-12)


def test_permute_outputs(sim, tmp_path):
    assert run("permute", "--out", tmp_path, "--data", sim / "data", "--n-perm", 40,
               "--alpha", 0.05, "--fast") == 0
    for name in ("lower_band", "upper_band", "rejection_mask", "global_rejection_mask"):
        assert (tmp_path / f"{name}.csv").exists()
    rej = io.read_grid(tmp_path / "rejection_mask.csv")
    glob = io.read_grid(tmp_path / "global_rejection_mask.csv")
    assert np.all(glob <= rej)
    assert (tmp_path / "bands.png").exists()


def test_bootstrap_and_export(sim, tmp_path):
    assert run("bootstrap", "--out", tmp_path / "b", "--data", sim / "data", "--b", 4,
               "--tune", "fixed", "--level", 2, "--lambda", 1e-4) == 0
    bif = io.read_grid(tmp_path / "b" / "bif.csv")
    assert bif.max() <= 4
    assert run("export", "--out", tmp_path / "e", "--input", tmp_path / "b" / "bif.csv",
               "--format", "top", "--top-q", 0.25, "--name", "bif") == 0
    header, rows = io.read_csv(tmp_path / "e" / "bif_top.csv")
    assert header == ["rank", "j", "bif"] and len(rows) == 8
    vals = [float(r[2]) for r in rows]
    assert vals == sorted(vals, reverse=True)


def test_export_curve_and_slice(tmp_path):
    g1 = np.linspace(-1, 1, 16)
    io.write_grid(tmp_path / "c", g1, "beta_hat")
    assert run("export", "--out", tmp_path / "e", "--input", tmp_path / "c.csv",
               "--name", "beta_hat") == 0
    header, rows = io.read_csv(tmp_path / "e" / "c.csv")
    assert header == ["t", "beta_hat"] and len(rows) == 16
    vol = np.random.default_rng(0).standard_normal((4, 4, 8))
    io.write_volume(tmp_path / "v.hwv", vol)
    assert run("export", "--out", tmp_path / "e", "--input", tmp_path / "v.hwv",
               "--format", "slice", "--axis", "w", "--index", 3) == 0
    header, rows = io.read_csv(tmp_path / "e" / "v_w3.csv")
    assert header == ["u", "v", "value"]
    got = np.array([float(r[2]) for r in rows]).reshape(4, 4)
    np.testing.assert_array_equal(got, vol[:, :, 3])


def test_r2_command(sim, tmp_path):
    assert run("r2", "--out", tmp_path, "--data", sim / "data", "--outer-k", 3,
               "--inner-k", 3) == 0
    res = json.loads((tmp_path / "r2.json").read_text())
    assert np.isfinite(res["r2_predictive"]) and np.isfinite(res["r2_standard"])


def test_study_command(tmp_path):
    assert run("study", "--out", tmp_path, "--reps", 2, "--n", 40, "--p", 32,
               "--methods", "cv,bic", "--n-test", 100) == 0
    header, rows = io.read_csv(tmp_path / "summary.csv")
    assert [r[0] for r in rows] == ["cv", "bic"]
    assert (tmp_path / "mean_beta.png").exists()


def test_convert_with_padding(tmp_path):
    arr = np.random.default_rng(1).standard_normal((2, 5, 6, 3))
    np.save(tmp_path / "scans.npy", arr)
    assert run("convert", "--out", tmp_path / "o", "--input", tmp_path / "scans.npy", "--pad") == 0
    meta = json.loads((tmp_path / "o" / "convert.json").read_text())
    assert meta["shape"] == [8, 8, 4]
    vol = io.read_volume(tmp_path / "o" / "volumes" / "s0001.hwv")
    o = meta["padding"]["offsets"]
    np.testing.assert_array_equal(vol[o[0]:o[0] + 5, o[1]:o[1] + 6, o[2]:o[2] + 3], arr[1])


# -- configuration and exit codes -------------------------------------------------

def test_precedence_flags_over_file_over_defaults(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"command": "simulate", "n": 12, "p": 16}))
    assert run("simulate", "--out", tmp_path / "o", "--config", cfg, "--p", 8) == 0
    resolved = json.loads((tmp_path / "o" / "resolved_config.json").read_text())
    assert (resolved["n"], resolved["p"], resolved["snr"]) == (12, 8, 9.0)


def test_config_errors_exit_2(tmp_path, sim):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"nope": 1}))
    assert run("simulate", "--out", tmp_path / "o", "--config", bad) == 2
    bad.write_text(json.dumps({"command": "fit"}))
    assert run("simulate", "--out", tmp_path / "o", "--config", bad) == 2
    assert run("simulate", "--out", tmp_path / "o", "--p", 100) == 2
    assert run("fit", "--out", tmp_path / "o", "--data", sim / "data", "--tune", "fixed") == 2
    assert run("fit", "--out", tmp_path / "o", "--data", sim / "data", "--levels", "9") == 2
    assert run("permute", "--out", tmp_path / "o", "--data", sim / "data", "--n-perm", 10) == 2
    assert run("fit", "--out", tmp_path / "o") == 2


def test_io_errors_exit_4(tmp_path):
    assert run("fit", "--out", tmp_path / "o", "--data", tmp_path / "missing") == 4
    assert run("simulate", "--out", tmp_path / "o", "--config", tmp_path / "missing.json") == 4
    (tmp_path / "junk.hwv").write_bytes(b"nope")
    assert run("export", "--out", tmp_path / "o", "--input", tmp_path / "junk.hwv",
               "--format", "slice") == 4


def test_non_convergence_exit_3(sim, tmp_path, monkeypatch):
    def fail(*a, **k):
        raise ConvergenceError("did not converge", lambda_=0.1)
    monkeypatch.setattr(inference, "fit_selected", fail)
    assert run("fit", "--out", tmp_path, "--data", sim / "data") == 3


def test_threads_env_fallback(sim, tmp_path, monkeypatch):
    monkeypatch.setenv("HWFR_THREADS", "2")
    assert run("fit", "--out", tmp_path / "a", "--data", sim / "data", "--tune", "aic") == 0
    monkeypatch.setenv("HWFR_THREADS", "1")
    assert run("fit", "--out", tmp_path / "b", "--data", sim / "data", "--tune", "aic") == 0
    assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")


def test_console_script_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "hwfr.cli", "simulate", "--out", str(tmp_path),
                        "--n", "5", "--p", "8"], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    r = subprocess.run([sys.executable, "-m", "hwfr.cli", "simulate", "--out", str(tmp_path),
                        "--p", "7"], capture_output=True, text=True)
    assert r.returncode == 2
    assert "power of 2" in r.stderr
