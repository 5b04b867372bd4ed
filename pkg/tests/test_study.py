import numpy as np
import pytest

from hwfr import plotting, simgen, study


def test_identification_rates():
    sup = np.array([1, 1, 0, 0, 0], bool)
    est = np.array([1, 0, 0, 1, 0], bool)
    assert study.identification(est, sup) == (50.0, pytest.approx(200 / 3))
    nz, z = study.identification(est, np.zeros(5, bool))
    assert np.isnan(nz) and z == 60.0


def test_validation_sample_shares_population():
    d = simgen.SimDesign1D(n=40, p=32, seed=1)
    ds, truth = simgen.gen_1d(d)
    val = study.draw_validation(d, truth, 40, 5)
    assert val.predictors.shape == ds.predictors.shape
    again = study.draw_validation(d, truth, 40, 5)
    np.testing.assert_array_equal(val.responses, again.responses)


def test_study_thread_invariant():
    d = simgen.SimDesign1D(n=40, p=32, seed=2)
    a = study.run_study(d, 2, ("sv", "cv"), n_test=100)
    b = study.run_study(d, 2, ("sv", "cv"), n_test=100, threads=2)
    assert a.records == b.records
    rows = a.summary()
    assert [r["method"] for r in rows] == ["sv", "cv"]
    assert all(r["reps"] == 2 for r in rows)
    assert a.mean_beta["cv"].shape == (32,)


def test_rejection_study_small():
    d = simgen.SimDesign1D(n=50, p=32, seed=3)
    rej = study.run_rejection_study(d, 2, n_perm=40)
    assert rej.pointwise_frequency.shape == (32,)
    assert np.all(rej.global_frequency <= rej.pointwise_frequency)
    assert rej.subset_violations == 0


def test_figures_are_deterministic(tmp_path):
    t = simgen.midpoints(32)
    beta = simgen.beta_1d(t, 2)
    a = plotting.curve_figure(t, {"x": np.sin(t)}, tmp_path / "a.png", truth=beta,
                              regions=plotting.true_regions(t, beta != 0))
    b = plotting.curve_figure(t, {"x": np.sin(t)}, tmp_path / "b.png", truth=beta,
                              regions=plotting.true_regions(t, beta != 0))
    assert a.read_bytes() == b.read_bytes()
    vol = simgen.beta_3d_grid((8, 8, 8))
    c = plotting.slice_figure({"beta": vol}, tmp_path / "c.png")
    assert c.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_true_regions():
    t = simgen.midpoints(10)
    regions = plotting.true_regions(t, np.array([0, 1, 1, 0, 0, 0, 1, 1, 1, 1], bool))
    assert regions == [pytest.approx((0.1, 0.3)), pytest.approx((0.6, 1.0))]


def test_support_ratio_edge_cases():
    beta = np.array([0.0, 1.0, 1.0, 0.0])
    make = lambda f: study.RejectionStudy(np.array(f), np.zeros(4), beta, 0, 1)
    assert make([0.1, 0.6, 0.6, 0.1]).support_ratio() == pytest.approx(6.0)
    assert make([0.0, 0.5, 0.0, 0.0]).support_ratio() == np.inf
    assert np.isnan(make([0.0, 0.0, 0.0, 0.0]).support_ratio())
