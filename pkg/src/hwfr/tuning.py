"""Joint choice of decomposition level and lambda.

Selectors: separate validation set (benchmark only, it needs a second
sample), k-fold CV, AIC and BIC.  Every selector fills a score table over
the full ``(level, lambda)`` grid and picks its minimum; ties go to the
smaller df, then the larger lambda, then the smaller level.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import haar, lasso
from ._util import derive_seed, pmap
from .funreg import DesignMatrix, FunctionalDataset, default_grid_measure

CRITERIA = ("sv", "cv", "aic", "bic")


@dataclass(frozen=True)
class TuningGrid:
    """Levels to search and, optionally, a fixed lambda grid per level.

    Levels default to every admissible level; lambda grids default to the
    log-spaced path below the full-data ``lambda_max`` at each level.
    """

    levels: tuple | None = None
    lambdas: dict | None = None
    n_lambdas: int = lasso.DEFAULT_N_LAMBDAS
    lambda_min_ratio: float = lasso.DEFAULT_LAMBDA_MIN_RATIO

    def resolve_levels(self, shape) -> list:
        lmax = haar.max_level(shape)
        if self.levels is None:
            return list(range(1, lmax + 1))
        levels = [int(L) for L in self.levels]
        if not levels:
            raise ValueError("empty level grid")
        for L in levels:
            if not 1 <= L <= lmax:
                raise ValueError(f"level {L} inadmissible for grid {tuple(shape)}")
        return levels

    def lambdas_for(self, level: int, design: np.ndarray, y) -> np.ndarray:
        if self.lambdas is not None and level in self.lambdas:
            lams = np.asarray(self.lambdas[level], dtype=float)
            if lams.size == 0:
                raise ValueError(f"empty lambda grid at level {level}")
            return lams
        n, p = design.shape
        ratio = lasso.resolve_min_ratio(self.lambda_min_ratio, n, p)
        return lasso.default_lambdas(lasso.lambda_max(design, y), self.n_lambdas, ratio)


@dataclass(frozen=True, eq=False)
class TuningResult:
    criterion: str
    best_level: int
    best_lambda: float
    score_table: np.ndarray  # structured: level, lambda, score, df
    seed: int | None = None
    sigma2: dict = field(default_factory=dict)

    def rows(self):
        return [(int(r["level"]), float(r["lambda"]), float(r["score"]), int(r["df"]))
                for r in self.score_table]

    @property
    def best_score(self) -> float:
        return float(self.score_table["score"][best_index(self.score_table)])


TABLE_DTYPE = np.dtype([("level", "i8"), ("lambda", "f8"), ("score", "f8"), ("df", "i8")])


def best_index(table: np.ndarray) -> int:
    # lexsort keys go from last (primary) to first
    order = np.lexsort((table["level"], -table["lambda"], table["df"], table["score"]))
    return int(order[0])


def _table(blocks) -> np.ndarray:
    rows = [(L, lam, s, d) for L, lams, scores, dfs in blocks
            for lam, s, d in zip(lams, scores, dfs)]
    if not rows:
        raise ValueError("empty tuning grid")
    return np.array(rows, dtype=TABLE_DTYPE)


def _result(criterion, table, seed=None, sigma2=None) -> TuningResult:
    i = best_index(table)
    return TuningResult(criterion, int(table["level"][i]), float(table["lambda"][i]),
                        table, seed, dict(sigma2 or {}))


# -- shared machinery -------------------------------------------------------

class _LevelCache:
    """Scaled Haar coefficients of every subject at every requested level."""

    def __init__(self, dataset: FunctionalDataset, grid_measure: float | None = None):
        self.dataset = dataset
        self.shape = dataset.grid_shape
        self.gm = default_grid_measure(self.shape) if grid_measure is None else grid_measure
        self._full = {}

    def full(self, level: int) -> np.ndarray:
        if level not in self._full:
            self._full[level] = self.gm * haar.forward_batch(
                self.dataset.predictors, self.shape, level)
        return self._full[level]

    def design(self, level: int, rows=None) -> DesignMatrix:
        F = self.full(level)
        if rows is not None:
            F = F[rows]
        kept = np.flatnonzero(np.any(F != 0, axis=0))
        return DesignMatrix(np.ascontiguousarray(F[:, kept]), kept,
                            haar.BasisSpec(self.shape, level), self.gm)


def _path(design: DesignMatrix, y, lambdas, tol, max_sweeps):
    return lasso.fit_path(design.matrix, y, lambdas, tol=tol, max_sweeps=max_sweeps, strict=False)


def _path_predict(path, design: DesignMatrix, F_rows: np.ndarray) -> np.ndarray:
    """Predictions (rows x lambdas) for full-coefficient rows ``F_rows``."""
    return F_rows[:, design.kept_columns] @ path.coefficients.T + path.intercepts


def kfold_indices(n: int, k: int, seed) -> list:
    """Seeded shuffle split into ``k`` contiguous blocks of near-equal size."""
    if k < 2:
        raise ValueError("k must be at least 2")
    if k > n:
        raise ValueError(f"cannot form {k} folds from {n} observations")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(b) for b in np.array_split(perm, k)]


# -- selectors ---------------------------------------------------------

def select_sv(train: FunctionalDataset, validation: FunctionalDataset,
              grid: TuningGrid | None = None, *, grid_measure=None, threads=None,
              tol=lasso.DEFAULT_TOL, max_sweeps=lasso.DEFAULT_MAX_SWEEPS) -> TuningResult:
    """Minimize mean squared prediction error on a separate validation sample."""
    grid = grid or TuningGrid()
    if validation.grid_shape != train.grid_shape:
        raise ValueError("training and validation grids differ")
    levels = grid.resolve_levels(train.grid_shape)
    tr = _LevelCache(train, grid_measure)
    va = _LevelCache(validation, tr.gm)
    y, yv = train.responses, validation.responses

    def run(L):
        design = tr.design(L)
        lams = grid.lambdas_for(L, design.matrix, y)
        path = _path(design, y, lams, tol, max_sweeps)
        pred = _path_predict(path, design, va.full(L))
        mse = np.mean((yv[:, None] - pred) ** 2, axis=0)
        return L, lams, mse, path.df

    return _result("sv", _table(pmap(run, levels, threads)))


def select_cv(dataset: FunctionalDataset, k: int = 5, grid: TuningGrid | None = None,
              seed: int = 0, *, grid_measure=None, threads=None, tol=lasso.DEFAULT_TOL,
              max_sweeps=lasso.DEFAULT_MAX_SWEEPS) -> TuningResult:
    """k-fold CV over the ``(level, lambda)`` grid.

    The lambda grid of each level comes from the full sample, so every fold
    is scored on the same grid.  The score is the mean over folds of the
    held-out MSE; df in the table is that of the full-sample fit.
    """
    grid = grid or TuningGrid()
    levels = grid.resolve_levels(dataset.grid_shape)
    folds = kfold_indices(dataset.n, k, seed)
    cache = _LevelCache(dataset, grid_measure)
    y = dataset.responses
    n = dataset.n

    lam_grid = {}
    for L in levels:
        lam_grid[L] = grid.lambdas_for(L, cache.design(L).matrix, y)

    def run(job):
        L, f = job
        if f is None:
            return _path(cache.design(L), y, lam_grid[L], tol, max_sweeps).df
        test = folds[f]
        train = np.setdiff1d(np.arange(n), test)
        design = cache.design(L, train)
        path = _path(design, y[train], lam_grid[L], tol, max_sweeps)
        pred = _path_predict(path, design, cache.full(L)[test])
        return np.mean((y[test, None] - pred) ** 2, axis=0)

    for L in levels:
        cache.full(L)
    jobs = [(L, f) for L in levels for f in [None] + list(range(k))]
    out = dict(zip(jobs, pmap(run, jobs, threads)))
    blocks = []
    for L in levels:
        scores = np.mean([out[(L, f)] for f in range(k)], axis=0)
        blocks.append((L, lam_grid[L], scores, out[(L, None)]))
    return _result("cv", _table(blocks), seed=seed)


def information_criterion(rss, df, n: int, sigma2: float, criterion: str):
    """``rss/(n sigma2) + c df / n`` with ``c = 2`` (AIC) or ``log n`` (BIC)."""
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    rss = np.asarray(rss, dtype=float)
    df = np.asarray(df, dtype=float)
    if criterion == "aic":
        c = 2.0
    elif criterion == "bic":
        c = np.log(n)
    else:
        raise ValueError(f"unknown criterion {criterion!r}")
    return rss / (n * sigma2) + c * df / n


def _rss_of(fit, dataset):
    from .funreg import predict
    r = dataset.responses - predict(fit, dataset.predictors)
    return float(r @ r)


def score_aic(fit, dataset: FunctionalDataset, sigma2_hat: float) -> float:
    return float(information_criterion(_rss_of(fit, dataset), fit.df, dataset.n, sigma2_hat, "aic"))


def score_bic(fit, dataset: FunctionalDataset, sigma2_hat: float) -> float:
    return float(information_criterion(_rss_of(fit, dataset), fit.df, dataset.n, sigma2_hat, "bic"))


def select_ic(dataset: FunctionalDataset, criterion: str = "bic", grid: TuningGrid | None = None,
              seed: int = 0, *, sigma2=None, sigma2_mode: str = "global", cv_k: int = 5,
              grid_measure=None, threads=None, tol=lasso.DEFAULT_TOL,
              max_sweeps=lasso.DEFAULT_MAX_SWEEPS) -> TuningResult:
    """AIC or BIC selection over the ``(level, lambda)`` grid.

    The noise variance comes from refitted cross-validation: one estimate for
    the whole grid (``sigma2_mode='global'``, first-stage selection over all
    levels) or one per level (``'per_level'``).  ``sigma2`` may supply it
    directly, as a number or as a ``{level: value}`` mapping.
    """
    if criterion not in ("aic", "bic"):
        raise ValueError(f"criterion must be 'aic' or 'bic', got {criterion!r}")
    if sigma2_mode not in ("global", "per_level"):
        raise ValueError(f"sigma2_mode must be 'global' or 'per_level', got {sigma2_mode!r}")
    grid = grid or TuningGrid()
    levels = grid.resolve_levels(dataset.grid_shape)
    cache = _LevelCache(dataset, grid_measure)
    y = dataset.responses
    for L in levels:
        cache.full(L)
    common = dict(k=cv_k, grid=TuningGrid(tuple(levels), grid.lambdas, grid.n_lambdas,
                                          grid.lambda_min_ratio),
                  grid_measure=cache.gm, tol=tol, max_sweeps=max_sweeps, _cache=cache)
    if sigma2 is None:
        if sigma2_mode == "global":
            s2 = refitted_cv_details(dataset, None, seed, **common).sigma2
            sigma2 = {L: s2 for L in levels}
        else:
            sigma2 = {L: refitted_cv_details(dataset, L, seed, **common).sigma2 for L in levels}
    elif np.isscalar(sigma2):
        sigma2 = {L: float(sigma2) for L in levels}

    def run(L):
        design = cache.design(L)
        lams = grid.lambdas_for(L, design.matrix, y)
        path = _path(design, y, lams, tol, max_sweeps)
        resid = y[:, None] - path.predict(design.matrix)
        rss = np.sum(resid ** 2, axis=0)
        return L, lams, information_criterion(rss, path.df, dataset.n, sigma2[L], criterion), path.df

    blocks = pmap(run, levels, threads)
    return _result(criterion, _table(blocks), seed=seed, sigma2={L: sigma2[L] for L in levels})


# -- refitted cross-validation variance --------------------------------------

@dataclass(frozen=True)
class Sigma2Estimate:
    sigma2: float
    halves: tuple          # per-half variance estimates
    support_sizes: tuple   # refit support size per half
    truncated: bool        # a support was cut to keep the refit overdetermined


def refitted_cv_details(dataset: FunctionalDataset, level: int | None = None, seed: int = 0, *,
                        k: int = 5, grid: TuningGrid | None = None, grid_measure=None,
                        tol=lasso.DEFAULT_TOL, max_sweeps=lasso.DEFAULT_MAX_SWEEPS,
                        _cache=None) -> Sigma2Estimate:
    """Split in halves; select a support on one half with a CV-tuned Lasso,
    refit least squares with intercept on the other half, swap, average.

    With ``level=None`` the first-stage CV searches the levels of ``grid``
    jointly with lambda; otherwise the level is held fixed.  Each half's
    estimate is ``RSS / (m - |S| - 1)`` for a half of size ``m``.
    """
    n = dataset.n
    if n < 4:
        raise ValueError("refitted cross-validation needs at least 4 observations")
    grid = grid or TuningGrid()
    cache = _cache or _LevelCache(dataset, grid_measure)
    key = 0 if level is None else int(level)
    perm = np.random.default_rng(derive_seed(seed, 0, key)).permutation(n)
    halves = (np.sort(perm[: n // 2]), np.sort(perm[n // 2:]))
    levels = grid.levels if level is None else (level,)
    sub_grid = TuningGrid(levels=levels, lambdas=grid.lambdas if level is not None else None,
                          n_lambdas=grid.n_lambdas, lambda_min_ratio=grid.lambda_min_ratio)
    estimates, sizes, truncated = [], [], False
    for h, (sel, ref) in enumerate(((halves[0], halves[1]), (halves[1], halves[0]))):
        part = dataset.subset(sel)
        tr = select_cv(part, min(k, part.n), sub_grid, derive_seed(seed, 1, key, h),
                       grid_measure=cache.gm, tol=tol, max_sweeps=max_sweeps)
        L = tr.best_level
        F = cache.full(L)
        sel_cache = _LevelCache(part, cache.gm)
        sel_cache._full[L] = F[sel]
        design = sel_cache.design(L)
        lf = lasso.fit(lasso.LassoProblem(design.matrix, part.responses, tr.best_lambda),
                       tol=tol, max_sweeps=max_sweeps)
        nz = np.flatnonzero(lf.coefficients)
        support = design.kept_columns[nz]
        m = ref.size
        cap = max(m - 2, 0)
        if support.size > cap:
            truncated = True
            keep = np.argsort(-np.abs(lf.coefficients[nz]), kind="stable")[:cap]
            support = support[np.sort(keep)]
        Z = np.column_stack([np.ones(m), F[ref][:, support]])
        yr = dataset.responses[ref]
        coef, *_ = np.linalg.lstsq(Z, yr, rcond=None)
        r = yr - Z @ coef
        estimates.append(float(r @ r) / (m - support.size - 1))
        sizes.append(int(support.size))
    return Sigma2Estimate(float(np.mean(estimates)), tuple(estimates), tuple(sizes), truncated)


def refitted_cv_sigma2(dataset: FunctionalDataset, level: int | None = None, seed: int = 0,
                       **kwargs) -> float:
    """Refitted cross-validation estimate of the response noise variance."""
    return refitted_cv_details(dataset, level, seed, **kwargs).sigma2


# -- dispatch ----------------------------------------------------------

@dataclass(frozen=True)
class SelectionSpec:
    """How to pick ``(level, lambda)``; ``method='fixed'`` skips tuning."""

    method: str = "cv"
    k: int = 5
    grid: TuningGrid = field(default_factory=TuningGrid)
    seed: int = 0
    level: int | None = None
    lambda_: float | None = None

    def __post_init__(self):
        if self.method not in ("cv", "aic", "bic", "fixed"):
            raise ValueError(f"unsupported selection method {self.method!r}")
        if self.method == "fixed" and (self.level is None or self.lambda_ is None):
            raise ValueError("fixed selection needs level and lambda")


def select(dataset: FunctionalDataset, spec: SelectionSpec, *, grid_measure=None,
           threads=None) -> TuningResult:
    if spec.method == "cv":
        return select_cv(dataset, spec.k, spec.grid, spec.seed, grid_measure=grid_measure,
                         threads=threads)
    if spec.method in ("aic", "bic"):
        return select_ic(dataset, spec.method, spec.grid, spec.seed, cv_k=spec.k,
                         grid_measure=grid_measure, threads=threads)
    table = np.array([(spec.level, spec.lambda_, np.nan, -1)], dtype=TABLE_DTYPE)
    return TuningResult("fixed", int(spec.level), float(spec.lambda_), table, spec.seed)
