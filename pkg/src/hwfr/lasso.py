"""Lasso by cyclic coordinate descent.

The objective is ``(1/n) ||Y - b0 - C eta||^2 + 2 lam ||eta||_1``; the
intercept is unpenalized and profiled out by centering.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numba import njit

from .errors import ConvergenceError

DEFAULT_TOL = 1e-7
DEFAULT_MAX_SWEEPS = 100_000
DEFAULT_N_LAMBDAS = 100
DEFAULT_LAMBDA_MIN_RATIO = None  # 1e-4 when n >= p, else 1e-2


def resolve_min_ratio(ratio, n: int, p: int) -> float:
    if ratio is not None:
        return float(ratio)
    return 1e-4 if n >= p else 1e-2


@njit(nogil=True, cache=True)
def _sweep(X, r, beta, col_sq, lam, idx, n):
    maxd = 0.0
    for jj in range(idx.shape[0]):
        j = idx[jj]
        cs = col_sq[j]
        if cs == 0.0:
            continue
        bj = beta[j]
        g = 0.0
        for i in range(n):
            g += X[i, j] * r[i]
        z = g / n + cs * bj
        if z > lam:
            nb = (z - lam) / cs
        elif z < -lam:
            nb = (z + lam) / cs
        else:
            nb = 0.0
        d = nb - bj
        if d != 0.0:
            for i in range(n):
                r[i] -= d * X[i, j]
            beta[j] = nb
            if abs(d) > maxd:
                maxd = abs(d)
    return maxd


@njit(nogil=True, cache=True)
def _kkt(X, r, beta, lam, n):
    worst = 0.0
    for j in range(X.shape[1]):
        g = 0.0
        for i in range(n):
            g += X[i, j] * r[i]
        g /= n
        if beta[j] > 0.0:
            v = abs(g - lam)
        elif beta[j] < 0.0:
            v = abs(g + lam)
        else:
            v = abs(g) - lam
        if v > worst:
            worst = v
    return worst


@njit(nogil=True, cache=True)
def _objective(r, beta, lam, n):
    s = 0.0
    for i in range(r.shape[0]):
        s += r[i] * r[i]
    a = 0.0
    for j in range(beta.shape[0]):
        a += abs(beta[j])
    return s / n + 2.0 * lam * a


@njit(nogil=True, cache=True)
def _coordinate_descent(X, r, beta, col_sq, lam, tol, kkt_tol, max_sweeps, history):
    """Active-set cycling: sweep the support to convergence, then verify with
    a full sweep and a KKT check.  Returns (sweeps, converged, kkt)."""
    n, p = X.shape
    every = np.arange(p)
    record = history.shape[0] > 1
    sweeps = 0
    kkt = np.inf
    while sweeps < max_sweeps:
        maxd = _sweep(X, r, beta, col_sq, lam, every, n)
        if record:
            history[sweeps] = _objective(r, beta, lam, n)
        sweeps += 1
        if maxd <= tol * (1.0 + np.max(np.abs(beta))):
            kkt = _kkt(X, r, beta, lam, n)
            if kkt <= kkt_tol:
                return sweeps, True, kkt
            continue
        active = np.nonzero(beta)[0]
        while sweeps < max_sweeps:
            maxd = _sweep(X, r, beta, col_sq, lam, active, n)
            if record:
                history[sweeps] = _objective(r, beta, lam, n)
            sweeps += 1
            if maxd <= tol * (1.0 + np.max(np.abs(beta))):
                break
    kkt = _kkt(X, r, beta, lam, n)
    return sweeps, False, kkt


class _Prepared:
    """Centered, column-major copy of the design shared across lambdas."""

    def __init__(self, design: np.ndarray, response: np.ndarray, intercept: bool):
        self.n = design.shape[0]
        if intercept:
            self.x_mean = design.mean(axis=0)
            self.y_mean = float(response.mean())
        else:
            self.x_mean = np.zeros(design.shape[1])
            self.y_mean = 0.0
        self.X = np.asfortranarray(design - self.x_mean)
        self.y = response - self.y_mean
        self.col_sq = np.einsum("ij,ij->j", self.X, self.X) / self.n
        self.lambda_max = float(np.max(np.abs(self.X.T @ self.y)) / self.n) if design.shape[1] else 0.0


@dataclass(frozen=True, eq=False)
class LassoProblem:
    design: np.ndarray
    response: np.ndarray
    lambda_: float = 0.0
    intercept: bool = True

    def __post_init__(self):
        C = np.asarray(self.design, dtype=float)
        y = np.asarray(self.response, dtype=float).ravel()
        if C.ndim != 2:
            raise ValueError("design must be a 2D array")
        if C.shape[0] != y.shape[0]:
            raise ValueError(f"design has {C.shape[0]} rows but response has {y.shape[0]} entries")
        if C.shape[0] < 2:
            raise ValueError("need at least two observations")
        if not (np.all(np.isfinite(C)) and np.all(np.isfinite(y))):
            raise ValueError("design and response must be finite")
        if not np.isfinite(self.lambda_) or self.lambda_ < 0:
            raise ValueError(f"lambda must be a nonnegative real, got {self.lambda_}")
        object.__setattr__(self, "design", C)
        object.__setattr__(self, "response", y)
        object.__setattr__(self, "lambda_", float(self.lambda_))

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def p(self) -> int:
        return self.design.shape[1]

    @cached_property
    def prepared(self) -> _Prepared:
        return _Prepared(self.design, self.response, self.intercept)

    @property
    def lambda_max(self) -> float:
        return self.prepared.lambda_max

    def with_lambda(self, lam: float) -> "LassoProblem":
        new = LassoProblem(self.design, self.response, lam, self.intercept)
        new.__dict__["prepared"] = self.prepared
        return new

    def objective(self, intercept: float, coefficients: np.ndarray) -> float:
        r = self.response - intercept - self.design @ coefficients
        return float(r @ r / self.n + 2.0 * self.lambda_ * np.abs(coefficients).sum())


@dataclass(frozen=True, eq=False)
class LassoFit:
    intercept: float
    coefficients: np.ndarray
    lambda_: float
    objective_value: float
    n_iter: int
    max_kkt_violation: float
    converged: bool = True
    tol: float = DEFAULT_TOL
    objective_history: np.ndarray = field(default=None, repr=False)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.coefficients)

    @property
    def df(self) -> int:
        return int(np.count_nonzero(self.coefficients))

    def predict(self, design: np.ndarray) -> np.ndarray:
        return self.intercept + np.asarray(design, dtype=float) @ self.coefficients


def lambda_max(design, response, intercept: bool = True) -> float:
    """Smallest lambda at which the all-zero model is optimal."""
    return LassoProblem(design, response, 0.0, intercept).lambda_max


def fit(problem: LassoProblem, init=None, tol: float = DEFAULT_TOL,
        max_sweeps: int = DEFAULT_MAX_SWEEPS, kkt_tol: float | None = None,
        record_objective: bool = False) -> LassoFit:
    """Solve one Lasso problem by coordinate descent.

    Parameters
    ----------
    problem : LassoProblem
    init : array_like, optional
        Warm-start coefficients.
    tol : float
        Stop once the largest coefficient change of a sweep is at most
        ``tol * (1 + max|eta|)`` and the KKT residual is at most ``kkt_tol``.
    max_sweeps : int
        Budget of coordinate sweeps; on exhaustion the fit is returned with
        ``converged=False``.
    kkt_tol : float, optional
        Defaults to ``tol``.
    record_objective : bool
        Keep the objective value after every sweep in ``objective_history``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    kkt_tol = tol if kkt_tol is None else kkt_tol
    prep = problem.prepared
    lam = problem.lambda_
    p = problem.p
    beta = np.zeros(p) if init is None else np.array(init, dtype=float, copy=True)
    if beta.shape != (p,):
        raise ValueError(f"init must have length {p}")
    history = np.zeros(max_sweeps if record_objective else 1)

    if lam >= prep.lambda_max and init is None:
        # closed form: the zero model satisfies the KKT conditions
        sweeps, converged = 0, True
        r = prep.y.copy()
        kkt = _kkt(prep.X, r, beta, lam, prep.n) if p else 0.0
    elif p == 0:
        sweeps, converged, kkt = 0, True, 0.0
    else:
        r = prep.y - prep.X @ beta
        sweeps, converged, kkt = _coordinate_descent(
            prep.X, r, beta, prep.col_sq, lam, tol, kkt_tol, int(max_sweeps), history)
    b0 = prep.y_mean - float(prep.x_mean @ beta)
    return LassoFit(
        intercept=b0,
        coefficients=beta,
        lambda_=lam,
        objective_value=problem.objective(b0, beta),
        n_iter=int(sweeps),
        max_kkt_violation=max(float(kkt), 0.0),
        converged=bool(converged),
        tol=kkt_tol,
        objective_history=history[:sweeps].copy() if record_objective else None,
    )


def kkt_violation(fit_: LassoFit, problem: LassoProblem) -> float:
    """Largest KKT residual of ``fit_`` on ``problem``; zero at an exact optimum."""
    C = problem.design
    eta = np.asarray(fit_.coefficients, dtype=float)
    if C.shape[1] != eta.shape[0]:
        raise ValueError("coefficient length does not match design")
    r = problem.response - fit_.intercept - C @ eta
    g = C.T @ r / problem.n
    lam = problem.lambda_
    res = np.where(eta > 0, np.abs(g - lam), np.where(eta < 0, np.abs(g + lam), np.abs(g) - lam))
    return float(max(res.max(initial=0.0), 0.0))


def default_lambdas(lam_max: float, n_lambdas: int = DEFAULT_N_LAMBDAS,
                    min_ratio: float = 1e-4) -> np.ndarray:
    if lam_max <= 0:
        lam_max = 1.0
    return np.geomspace(lam_max, lam_max * min_ratio, n_lambdas)


@dataclass(frozen=True, eq=False)
class LambdaPath:
    lambdas: np.ndarray
    fits: list

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([f.coefficients for f in self.fits])

    @property
    def intercepts(self) -> np.ndarray:
        return np.array([f.intercept for f in self.fits])

    @property
    def df(self) -> np.ndarray:
        return np.array([f.df for f in self.fits])

    def predict(self, design) -> np.ndarray:
        """Predictions with one column per lambda."""
        return np.asarray(design, dtype=float) @ self.coefficients.T + self.intercepts


def fit_path(design, response, lambdas=None, *, n_lambdas: int = DEFAULT_N_LAMBDAS,
             lambda_min_ratio: float = DEFAULT_LAMBDA_MIN_RATIO, intercept: bool = True,
             tol: float = DEFAULT_TOL, max_sweeps: int = DEFAULT_MAX_SWEEPS,
             strict: bool = True) -> LambdaPath:
    """Warm-started solutions over a decreasing lambda grid.

    With ``strict`` a non-converged fit raises :class:`ConvergenceError`
    naming the offending lambda.
    """
    base = LassoProblem(design, response, 0.0, intercept)
    if lambdas is None:
        ratio = resolve_min_ratio(lambda_min_ratio, base.n, base.p)
        lambdas = default_lambdas(base.lambda_max, n_lambdas, ratio)
    lambdas = np.asarray(lambdas, dtype=float).ravel()
    if lambdas.size == 0:
        raise ValueError("empty lambda grid")
    if np.any(lambdas < 0) or np.any(np.diff(lambdas) >= 0):
        raise ValueError("lambdas must be nonnegative and strictly decreasing")
    fits = []
    warm = None
    for lam in lambdas:
        f = fit(base.with_lambda(lam), init=warm, tol=tol, max_sweeps=max_sweeps)
        if strict and not f.converged:
            raise ConvergenceError(f"coordinate descent did not converge at lambda={lam:.6g} "
                                   f"after {f.n_iter} sweeps (KKT {f.max_kkt_violation:.3g})",
                                   lambda_=float(lam))
        fits.append(f)
        warm = f.coefficients
    return LambdaPath(lambdas, fits)
