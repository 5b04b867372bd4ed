import numpy as np
import pytest

from hwfr import funreg, haar, lasso
from hwfr.funreg import FunctionalDataset
from oracles import haar_matrix_1d


def dataset_1d(n=30, p=16, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    return FunctionalDataset(X, rng.standard_normal(n))


def test_constant_curves_keep_only_approximation_column():
    p, L = 16, 4
    ds = FunctionalDataset(np.ones((5, p)), np.arange(5.0))
    d = funreg.build_design(ds, L)
    np.testing.assert_array_equal(d.kept_columns, [0])
    np.testing.assert_allclose(d.matrix[:, 0], 1 / np.sqrt(p), rtol=1e-14)


def test_design_matches_basis_matrix_oracle():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((3, 8))
    d = funreg.build_design(FunctionalDataset(X, np.zeros(3)), 3)
    np.testing.assert_allclose(d.matrix, X @ haar_matrix_1d(8, 3).T / 8, atol=1e-14)
    assert d.grid_measure == 1 / 8


def test_screening_removes_second_half_columns():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((10, 16))
    X[:, 8:] = 0.0
    d = funreg.build_design(FunctionalDataset(X, rng.standard_normal(10)), 2)
    G = haar_matrix_1d(16, 2)
    second_half_only = np.flatnonzero(~G[:, :8].any(axis=1))
    assert second_half_only.size > 0
    assert not np.isin(second_half_only, d.kept_columns).any()
    # and every kept column is genuinely nonzero
    assert np.all(np.any(d.matrix != 0, axis=0))


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        FunctionalDataset(np.ones((3, 8)), np.ones(4))
    with pytest.raises(ValueError):
        FunctionalDataset(np.ones((3, 4, 4)), np.ones(3))


def test_reconstruct_zero_and_unit():
    basis = haar.BasisSpec((16,), 4)
    assert not funreg.reconstruct_beta(np.zeros(16), np.arange(16), basis).values.any()
    field = funreg.reconstruct_beta(np.array([1.0]), np.array([0]), basis)
    np.testing.assert_allclose(field.values, 1 / 4, rtol=1e-14)


def test_reconstruct_index_mismatch():
    basis = haar.BasisSpec((8,), 1)
    with pytest.raises(ValueError):
        funreg.reconstruct_beta(np.ones(3), np.arange(2), basis)
    with pytest.raises(ValueError):
        funreg.reconstruct_beta(np.ones(2), np.array([0, 9]), basis)


@pytest.mark.parametrize("shape, level", [((64,), 1), ((64,), 6), ((8, 4, 16), 2)])
def test_adjoint_identity(shape, level):
    rng = np.random.default_rng(3)
    X = rng.standard_normal((4,) + shape)
    d = funreg.build_design(FunctionalDataset(X, np.zeros(4)), level, screen=False)
    eta = rng.standard_normal(d.matrix.shape[1])
    beta = funreg.reconstruct_beta(eta, d.kept_columns, d.basis).values
    lhs = X.reshape(4, -1) @ beta.ravel() / np.prod(shape)
    np.testing.assert_allclose(lhs, d.matrix @ eta, atol=1e-10)


def test_lambda_max_fit_is_zero():
    ds = dataset_1d()
    d = funreg.build_design(ds, 2)
    fit = funreg.fit_functional(ds, 2, lasso.lambda_max(d.matrix, ds.responses))
    assert not fit.beta_field.values.any()
    assert not fit.beta_field.support_mask.any()
    np.testing.assert_allclose(funreg.predict(fit, ds.predictors), ds.responses.mean())


def test_noiseless_representable_beta_is_recovered():
    p, L = 16, 2
    rng = np.random.default_rng(4)
    beta = np.repeat(rng.standard_normal(p >> L), 2 ** L)   # constant on blocks of 4
    X = rng.standard_normal((60, p))
    y = 0.3 + X @ beta / p
    ds = FunctionalDataset(X, y)
    fit = funreg.fit_functional(ds, L, 1e-12, tol=1e-14)
    np.testing.assert_allclose(fit.beta_field.values, beta, atol=1e-6)


def test_predict_reproduces_solver_fitted_values():
    ds = dataset_1d(40, 32, 5)
    fit = funreg.fit_functional(ds, 3, 0.02)
    direct = fit.lasso_fit.predict(fit.design.matrix)
    np.testing.assert_allclose(funreg.predict(fit, ds.predictors), direct, atol=1e-10)


def test_predict_dimension_mismatch():
    ds = dataset_1d()
    fit = funreg.fit_functional(ds, 1, 0.1)
    with pytest.raises(ValueError):
        funreg.predict(fit, np.ones((2, 8)))


def test_response_shift_moves_only_the_intercept():
    ds = dataset_1d(40, 32, 6)
    a = funreg.fit_functional(ds, 3, 0.01)
    b = funreg.fit_functional(ds.with_responses(ds.responses + 5.0), 3, 0.01)
    np.testing.assert_allclose(b.lasso_fit.coefficients, a.lasso_fit.coefficients, atol=1e-9)
    assert b.intercept - a.intercept == pytest.approx(5.0, abs=1e-9)


def test_sparsity_transfers_to_grid_locally():
    """Zero coefficients for every basis function touching a region give
    exact zeros there."""
    p, L = 32, 5
    G = haar_matrix_1d(p, L)
    region = slice(16, 24)
    eta = np.random.default_rng(7).standard_normal(p)
    eta[G[:, region].any(axis=1)] = 0.0
    field = funreg.reconstruct_beta(eta, np.arange(p), haar.BasisSpec((p,), L))
    assert np.all(field.values[region] == 0.0)


def test_3d_pipeline_shapes():
    rng = np.random.default_rng(8)
    X = rng.standard_normal((20, 4, 4, 8))
    ds = FunctionalDataset(X, rng.standard_normal(20))
    fit = funreg.fit_functional(ds, 2, 0.01)
    assert fit.beta_field.values.shape == (4, 4, 8)
    assert fit.design.grid_measure == 1 / 128
    assert funreg.predict(fit, X[:3]).shape == (3,)


# -- padding ---------------------------------------------------------------

def test_padding_arithmetic():
    rec = funreg.padding_for((160, 160, 96))
    assert rec.padded_shape == (256, 256, 128)
    assert rec.offsets[2] == 16
    assert rec.pad_widths[2] == (16, 16)


def test_padding_identity_for_dyadic():
    vol = np.random.default_rng(9).standard_normal((8, 4, 16))
    padded, rec = funreg.pad_to_dyadic(vol)
    assert rec.offsets == (0, 0, 0)
    np.testing.assert_array_equal(padded, vol)


def test_padding_roundtrip():
    vol = np.random.default_rng(10).standard_normal((5, 12, 3))
    padded, rec = funreg.pad_to_dyadic(vol)
    assert padded.shape == (8, 16, 4)
    np.testing.assert_array_equal(rec.crop(padded), vol)
    assert padded.sum() == pytest.approx(vol.sum())
    stack = rec.pad(np.stack([vol, 2 * vol]))
    np.testing.assert_array_equal(rec.crop(stack)[1], 2 * vol)
