"""Permutation tests, bootstrap inclusion frequencies and predictive R^2.

Every randomized replicate draws from its own stream derived from
``(seed, replicate index)``, so the results do not depend on how replicates
are spread over threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import funreg, tuning
from ._util import derive_seed, pmap
from .errors import ConvergenceError
from .funreg import FunctionalDataset
from .tuning import SelectionSpec


class PipelineError(RuntimeError):
    """A replicate (permutation or bootstrap sample) failed."""

    def __init__(self, message, index):
        super().__init__(message)
        self.index = index


def fit_selected(dataset: FunctionalDataset, spec: SelectionSpec, *, grid_measure=None,
                 threads=None):
    """Run the selector and refit on the whole sample at the chosen pair."""
    tr = tuning.select(dataset, spec, grid_measure=grid_measure, threads=threads)
    fit = funreg.fit_functional(dataset, tr.best_level, tr.best_lambda, grid_measure=grid_measure)
    if not fit.lasso_fit.converged:
        raise ConvergenceError(
            f"final fit did not converge (level {tr.best_level}, lambda {tr.best_lambda:.6g})",
            lambda_=tr.best_lambda)
    return tr, fit


def _rank(fraction: float, count: int) -> int:
    # nearest rank, guarded against 0.025 * 200 = 5.000000000000001
    return max(int(math.ceil(round(fraction * count, 9))), 1)


# -- permutation test -----------------------------------------------------

@dataclass(frozen=True, eq=False)
class PermutationResult:
    beta_hat: np.ndarray
    lower_band: np.ndarray
    upper_band: np.ndarray
    rejection_mask: np.ndarray
    n_perm: int
    alpha: float
    global_max_quantile: float
    global_rejection_mask: np.ndarray
    max_statistics: np.ndarray
    selected_level: int
    selected_lambda: float
    fast: bool
    seed: int
    draws: np.ndarray | None = None


def permutation_bands(draws: np.ndarray, alpha: float):
    """Nearest-rank ``alpha/2`` and ``1 - alpha/2`` pointwise bands.

    With 200 draws at ``alpha = 0.05`` these are the 5th smallest and the
    5th largest value at each grid point.
    """
    m = draws.shape[0]
    k = _rank(alpha / 2, m)
    s = np.sort(draws, axis=0)
    return s[k - 1], s[m - k]


def max_statistic_threshold(draws: np.ndarray, alpha: float) -> tuple:
    """Per-draw ``max |beta_perm|`` and its nearest-rank ``1 - alpha`` quantile."""
    m = draws.shape[0]
    M = np.abs(draws.reshape(m, -1)).max(axis=1)
    k = _rank(alpha, m)
    return M, float(np.sort(M)[m - k])


def permutation_test(dataset: FunctionalDataset, selection: SelectionSpec | None = None,
                     n_perm: int = 200, alpha: float = 0.05, seed: int = 0, *,
                     fast: bool = False, keep_draws: bool = False, grid_measure=None,
                     threads=None) -> PermutationResult:
    """Pointwise and max-statistic permutation tests of ``beta(t) = 0``.

    Each permutation shuffles the responses and reruns the same selection
    and fit as the original data.  ``fast=True`` instead reuses the
    originally selected ``(level, lambda)`` for every permutation; this is
    much cheaper but is not the re-tuned procedure.
    """
    selection = selection or SelectionSpec()
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if n_perm < 2 / alpha:
        raise ValueError(f"n_perm must be at least 2/alpha = {2 / alpha:g}")
    n = dataset.n
    y = dataset.responses

    def pipeline(spec, perm):
        _, fit = fit_selected(dataset.with_responses(y[perm]), spec, grid_measure=grid_measure)
        return fit

    original = pipeline(selection, np.arange(n))
    spec = selection
    if fast:
        spec = SelectionSpec("fixed", level=original.level, lambda_=original.lambda_,
                             seed=selection.seed)

    def one(b):
        perm = np.random.default_rng(derive_seed(seed, b)).permutation(n)
        try:
            return pipeline(spec, perm).beta_field.values
        except Exception as exc:  # noqa: BLE001 - re-raised with the index
            raise PipelineError(f"permutation {b} failed: {exc}", b) from exc

    draws = np.array(pmap(one, range(n_perm), threads))
    beta = original.beta_field.values
    lower, upper = permutation_bands(draws, alpha)
    M, q = max_statistic_threshold(draws, alpha)
    return PermutationResult(
        beta_hat=beta,
        lower_band=lower,
        upper_band=upper,
        rejection_mask=(beta < lower) | (beta > upper),
        n_perm=int(n_perm),
        alpha=float(alpha),
        global_max_quantile=q,
        global_rejection_mask=np.abs(beta) > q,
        max_statistics=M,
        selected_level=original.level,
        selected_lambda=original.lambda_,
        fast=bool(fast),
        seed=int(seed),
        draws=draws if keep_draws else None,
    )


# -- bootstrap -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BootstrapResult:
    inclusion_frequency: np.ndarray
    B: int
    selections: list      # (level, lambda) per bootstrap sample
    support_sizes: np.ndarray
    seed: int


def bootstrap_inclusion(dataset: FunctionalDataset, B: int = 100,
                        selection: SelectionSpec | None = None, seed: int = 0, *,
                        grid_measure=None, threads=None) -> BootstrapResult:
    """Count, per grid point, the resamples whose fitted coefficient is nonzero."""
    selection = selection or SelectionSpec()
    if B < 1:
        raise ValueError("B must be at least 1")
    n = dataset.n

    def one(b):
        idx = np.random.default_rng(derive_seed(seed, b)).integers(0, n, size=n)
        try:
            tr, fit = fit_selected(dataset.subset(idx), selection, grid_measure=grid_measure)
        except Exception as exc:  # noqa: BLE001
            raise PipelineError(f"bootstrap sample {b} failed: {exc}", b) from exc
        return (tr.best_level, tr.best_lambda), fit.beta_field.support_mask

    out = pmap(one, range(B), threads)
    masks = np.array([m for _, m in out])
    return BootstrapResult(
        inclusion_frequency=masks.sum(axis=0).astype(np.int64),
        B=int(B),
        selections=[s for s, _ in out],
        support_sizes=masks.reshape(B, -1).sum(axis=1),
        seed=int(seed),
    )


# -- predictive R^2 ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PredictiveR2Result:
    r2_predictive: float
    r2_standard: float
    folds: list
    predictions: np.ndarray
    selections: list
    seed: int


def r_squared(y, y_hat) -> float:
    y = np.asarray(y, dtype=float)
    r = y - np.asarray(y_hat, dtype=float)
    tss = float(np.sum((y - y.mean()) ** 2))
    return 1.0 - float(r @ r) / tss


def predictive_r2(dataset: FunctionalDataset, outer_k: int = 10, inner_k: int = 5, seed: int = 0,
                  *, grid: tuning.TuningGrid | None = None, grid_measure=None,
                  threads=None) -> PredictiveR2Result:
    """Outer k-fold prediction error with the tuning redone by inner CV in each
    training portion; also the in-sample R^2 of the full-data CV-tuned fit."""
    n = dataset.n
    if n < outer_k:
        raise ValueError(f"need at least {outer_k} observations for {outer_k}-fold CV")
    grid = grid or tuning.TuningGrid()
    folds = tuning.kfold_indices(n, outer_k, seed)
    for f in folds:
        if n - f.size < max(inner_k, 2):
            raise ValueError("outer training fold too small for inner cross-validation")

    def one(f):
        test = folds[f]
        train = np.setdiff1d(np.arange(n), test)
        spec = SelectionSpec("cv", k=inner_k, grid=grid, seed=derive_seed(seed, 1, f))
        tr, fit = fit_selected(dataset.subset(train), spec, grid_measure=grid_measure)
        return (tr.best_level, tr.best_lambda), funreg.predict(fit, dataset.predictors[test])

    out = pmap(one, range(outer_k), threads)
    pred = np.empty(n)
    for f, (_, p) in enumerate(out):
        pred[folds[f]] = p
    full_spec = SelectionSpec("cv", k=inner_k, grid=grid, seed=derive_seed(seed, 2))
    _, full_fit = fit_selected(dataset, full_spec, grid_measure=grid_measure, threads=threads)
    y = dataset.responses
    return PredictiveR2Result(
        r2_predictive=r_squared(y, pred),
        r2_standard=r_squared(y, funreg.predict(full_fit, dataset.predictors)),
        folds=folds,
        predictions=pred,
        selections=[s for s, _ in out],
        seed=int(seed),
    )
