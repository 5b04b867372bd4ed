"""Functional linear model on a Haar basis.

The integral of a predictor against the coefficient function is discretized
with the rectangle rule on the sampling grid, and the quadrature weight is
folded into the design matrix.  The fitted wavelet coefficients are
therefore the Haar coefficients of the grid samples of the estimated
coefficient function, and inverting them needs no further rescaling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import haar, lasso


@dataclass(frozen=True, eq=False)
class FunctionalDataset:
    """``n`` predictors on a common grid, stacked along axis 0, plus responses."""

    predictors: np.ndarray
    responses: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.predictors, dtype=float)
        y = np.asarray(self.responses, dtype=float).ravel()
        if X.ndim not in (2, 4):
            raise ValueError(f"predictors must be (n, p) or (n, nu, nv, nw), got {X.shape}")
        if X.shape[0] != y.shape[0]:
            raise ValueError("number of predictors and responses differ")
        if X.shape[0] < 2:
            raise ValueError("need at least two subjects")
        object.__setattr__(self, "predictors", X)
        object.__setattr__(self, "responses", y)

    @property
    def n(self) -> int:
        return self.predictors.shape[0]

    @property
    def grid_shape(self) -> tuple:
        return self.predictors.shape[1:]

    def subset(self, idx) -> "FunctionalDataset":
        idx = np.asarray(idx)
        return FunctionalDataset(self.predictors[idx], self.responses[idx])

    def with_responses(self, y) -> "FunctionalDataset":
        return FunctionalDataset(self.predictors, y)


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    matrix: np.ndarray
    kept_columns: np.ndarray
    basis: haar.BasisSpec
    grid_measure: float

    @property
    def p_full(self) -> int:
        return self.basis.size

    def expand(self, eta: np.ndarray) -> np.ndarray:
        """Zero-fill kept-column coefficients back to all ``p`` positions."""
        full = np.zeros(self.p_full)
        full[self.kept_columns] = eta
        return full

    def transform(self, predictors) -> np.ndarray:
        """Design rows for new predictors, restricted to the kept columns."""
        X = np.asarray(predictors, dtype=float)
        if X.shape[1:] != self.basis.shape:
            raise ValueError(f"predictor grid {X.shape[1:]} does not match {self.basis.shape}")
        coef = haar.forward_batch(X, self.basis.shape, self.basis.level)
        return self.grid_measure * coef[:, self.kept_columns]


@dataclass(frozen=True, eq=False)
class CoefficientField:
    values: np.ndarray

    @property
    def support_mask(self) -> np.ndarray:
        return self.values != 0


@dataclass(frozen=True, eq=False)
class FunctionalFit:
    lasso_fit: lasso.LassoFit
    design: DesignMatrix
    beta_field: CoefficientField

    @property
    def basis(self) -> haar.BasisSpec:
        return self.design.basis

    @property
    def level(self) -> int:
        return self.design.basis.level

    @property
    def lambda_(self) -> float:
        return self.lasso_fit.lambda_

    @property
    def intercept(self) -> float:
        return self.lasso_fit.intercept

    @property
    def df(self) -> int:
        return self.lasso_fit.df

    @property
    def eta_full(self) -> np.ndarray:
        return self.design.expand(self.lasso_fit.coefficients)


def default_grid_measure(shape) -> float:
    return 1.0 / float(np.prod(shape))


def build_design(dataset: FunctionalDataset, level: int, grid_measure: float | None = None,
                 screen: bool = True) -> DesignMatrix:
    """Scaled Haar coefficients of every predictor, with all-zero columns removed."""
    shape = dataset.grid_shape
    basis = haar.BasisSpec(shape, level)
    gm = default_grid_measure(shape) if grid_measure is None else float(grid_measure)
    full = gm * haar.forward_batch(dataset.predictors, shape, level)
    if screen:
        kept = np.flatnonzero(np.any(full != 0, axis=0))
    else:
        kept = np.arange(full.shape[1])
    return DesignMatrix(np.ascontiguousarray(full[:, kept]), kept, basis, gm)


def reconstruct_beta(eta_hat, kept_columns, basis: haar.BasisSpec) -> CoefficientField:
    eta_hat = np.asarray(eta_hat, dtype=float)
    kept_columns = np.asarray(kept_columns, dtype=int)
    if eta_hat.shape != kept_columns.shape:
        raise ValueError("coefficient length does not match the kept-column map")
    if kept_columns.size and (kept_columns.min() < 0 or kept_columns.max() >= basis.size):
        raise ValueError("kept-column index outside the basis")
    full = np.zeros(basis.size)
    full[kept_columns] = eta_hat
    return CoefficientField(haar.inverse_batch(full, basis.shape, basis.level))


def fit_design(design: DesignMatrix, responses, lambda_: float, *, init=None,
               tol: float = lasso.DEFAULT_TOL,
               max_sweeps: int = lasso.DEFAULT_MAX_SWEEPS) -> FunctionalFit:
    problem = lasso.LassoProblem(design.matrix, responses, lambda_)
    lf = lasso.fit(problem, init=init, tol=tol, max_sweeps=max_sweeps)
    beta = reconstruct_beta(lf.coefficients, design.kept_columns, design.basis)
    return FunctionalFit(lf, design, beta)


def fit_functional(dataset: FunctionalDataset, level: int, lambda_: float, *,
                   grid_measure: float | None = None, tol: float = lasso.DEFAULT_TOL,
                   max_sweeps: int = lasso.DEFAULT_MAX_SWEEPS) -> FunctionalFit:
    """Build the design at ``level``, solve the Lasso at ``lambda_`` and map back."""
    design = build_design(dataset, level, grid_measure)
    return fit_design(design, dataset.responses, lambda_, tol=tol, max_sweeps=max_sweeps)


def predict(fit: FunctionalFit, new_predictors) -> np.ndarray:
    X = np.asarray(new_predictors, dtype=float)
    if X.shape[1:] != fit.basis.shape:
        raise ValueError(f"predictor grid {X.shape[1:]} does not match {fit.basis.shape}")
    flat = X.reshape(X.shape[0], -1)
    return fit.intercept + fit.design.grid_measure * (flat @ fit.beta_field.values.ravel())


# -- padding for non-dyadic volumes ----------------------------------------

@dataclass(frozen=True)
class Padding:
    original_shape: tuple
    padded_shape: tuple
    offsets: tuple

    @property
    def pad_widths(self) -> tuple:
        """``(before, after)`` zero counts per axis."""
        return tuple((o, P - s - o) for o, P, s in
                     zip(self.offsets, self.padded_shape, self.original_shape))

    def crop(self, grid: np.ndarray) -> np.ndarray:
        """Undo the padding on the trailing axes of ``grid``."""
        nd = len(self.original_shape)
        sl = tuple(slice(o, o + s) for o, s in zip(self.offsets, self.original_shape))
        return grid[(Ellipsis,) + sl] if grid.ndim > nd else grid[sl]

    def pad(self, grid: np.ndarray) -> np.ndarray:
        grid = np.asarray(grid, dtype=float)
        nd = len(self.original_shape)
        lead = grid.shape[:-nd]
        out = np.zeros(lead + self.padded_shape)
        sl = tuple(slice(o, o + s) for o, s in zip(self.offsets, self.original_shape))
        out[(Ellipsis,) + sl] = grid
        return out


def next_power_of_two(n: int) -> int:
    n = int(n)
    if n < 1:
        raise ValueError("dimension must be positive")
    return 1 << (n - 1).bit_length()


def padding_for(shape) -> Padding:
    shape = tuple(int(s) for s in shape)
    padded = tuple(max(next_power_of_two(s), 2) for s in shape)
    offsets = tuple((P - s) // 2 for P, s in zip(padded, shape))
    return Padding(shape, padded, offsets)


def pad_to_dyadic(volume):
    """Center ``volume`` in a zero array whose sides are powers of 2.

    Returns the padded grid and the :class:`Padding` record that maps it back.
    """
    volume = np.asarray(volume, dtype=float)
    rec = padding_for(volume.shape)
    return rec.pad(volume), rec
