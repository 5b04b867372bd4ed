"""Monte-Carlo replication harness for the simulation designs.

A study runs independent replicates of one design.  Each replicate draws a
training sample, a test sample and, for split-validation tuning, a
validation sample, then records per method the test error against the true
linear predictor and the per-grid-point identification rates.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import funreg, inference, simgen, tuning
from ._util import derive_seed, pmap
from .funreg import FunctionalDataset

METHODS = ("sv", "cv", "aic", "bic")

# offsets for the per-replicate streams
_TEST, _VALIDATION, _TUNING, _PERM = 1, 2, 3, 4


def identification(estimate_mask, true_support):
    """Percentages of true-nonzero points estimated nonzero and of true-zero
    points estimated zero.  ``nan`` when the respective set is empty."""
    est = np.asarray(estimate_mask, dtype=bool).ravel()
    sup = np.asarray(true_support, dtype=bool).ravel()
    nz = 100.0 * est[sup].mean() if sup.any() else float("nan")
    z = 100.0 * (~est[~sup]).mean() if (~sup).any() else float("nan")
    return float(nz), float(z)


def replicate_design(design, rep: int):
    return dataclasses.replace(design, seed=derive_seed(design.seed, rep))


def generate(design):
    if isinstance(design, simgen.SimDesign1D):
        return simgen.gen_1d(design)
    return simgen.gen_3d(design)


def draw_validation(design, truth: simgen.GroundTruth, n: int, seed) -> FunctionalDataset:
    """A second sample from the population of ``truth`` (same beta, same
    noise variances)."""
    X, g = simgen.draw_test(design, truth, n, derive_seed(seed, 0))
    rng = np.random.default_rng(derive_seed(seed, 1))
    y = g + np.sqrt(truth.sigma2) * rng.standard_normal(n)
    return FunctionalDataset(X, y)


@dataclass(frozen=True)
class ReplicateRecord:
    rep: int
    method: str
    mse: float
    nonzero_pct: float
    zero_pct: float
    level: int
    lambda_: float
    df: int


@dataclass(frozen=True, eq=False)
class StudyResult:
    design: object
    records: list
    mean_beta: dict          # method -> average estimated coefficient grid
    true_beta: np.ndarray

    def table(self, method: str) -> np.ndarray:
        """``(reps, 3)`` array of MSE, nonzero %, zero % for one method."""
        return np.array([(r.mse, r.nonzero_pct, r.zero_pct) for r in self.records
                         if r.method == method])

    def summary(self) -> list:
        """Per method: mean and SD of test MSE, mean identification rates."""
        out = []
        for m in dict.fromkeys(r.method for r in self.records):
            t = self.table(m)
            sd = t[:, 0].std(ddof=1) if len(t) > 1 else 0.0
            out.append({"method": m, "reps": len(t), "mse_mean": float(t[:, 0].mean()),
                        "mse_sd": float(sd), "nonzero_pct": float(t[:, 1].mean()),
                        "zero_pct": float(t[:, 2].mean())})
        return out


def run_replicate(design, rep: int, methods=("cv",), n_test: int = 2000, k: int = 5,
                  grid: tuning.TuningGrid | None = None):
    """One replicate: list of :class:`ReplicateRecord` and the fitted grids."""
    d = replicate_design(design, rep)
    data, truth = generate(d)
    X_test, g_test = simgen.draw_test(d, truth, n_test, derive_seed(d.seed, _TEST))
    sup = truth.support
    records, betas = [], {}
    for m in methods:
        tseed = derive_seed(d.seed, _TUNING)
        if m == "sv":
            val = draw_validation(d, truth, data.n, derive_seed(d.seed, _VALIDATION))
            tr = tuning.select_sv(data, val, grid)
        elif m == "cv":
            tr = tuning.select_cv(data, k, grid, seed=tseed)
        elif m in ("aic", "bic"):
            tr = tuning.select_ic(data, m, grid, seed=tseed)
        else:
            raise ValueError(f"unknown method {m!r}")
        fit = funreg.fit_functional(data, tr.best_level, tr.best_lambda)
        mse = float(np.mean((funreg.predict(fit, X_test) - g_test) ** 2))
        nz, z = identification(fit.beta_field.support_mask, sup)
        records.append(ReplicateRecord(rep, m, mse, nz, z, fit.level, fit.lambda_, fit.df))
        betas[m] = fit.beta_field.values
    return records, betas, truth.beta


def run_study(design, reps: int, methods=("cv",), n_test: int = 2000, k: int = 5,
              grid: tuning.TuningGrid | None = None, threads=None) -> StudyResult:
    out = pmap(lambda r: run_replicate(design, r, methods, n_test, k, grid), range(reps), threads)
    records = [rec for recs, _, _ in out for rec in recs]
    mean_beta = {m: np.mean([b[m] for _, b, _ in out], axis=0) for m in methods}
    return StudyResult(design, records, mean_beta, out[0][2])


@dataclass(frozen=True, eq=False)
class RejectionStudy:
    pointwise_frequency: np.ndarray   # fraction of replicates rejecting, per point
    global_frequency: np.ndarray
    true_beta: np.ndarray
    subset_violations: int            # replicates where global is not within pointwise
    reps: int

    def support_ratio(self) -> float:
        """Mean pointwise rejection frequency on the true support over the
        mean on the null points; ``inf`` if only the support rejects and
        ``nan`` if nothing rejects at all."""
        sup = self.true_beta != 0
        null = self.pointwise_frequency[~sup].mean()
        on = self.pointwise_frequency[sup].mean()
        if null == 0:
            return float("inf") if on > 0 else float("nan")
        return float(on / null)


def run_rejection_study(design, reps: int, n_perm: int = 200, alpha: float = 0.05,
                        fast: bool = True, selection: tuning.SelectionSpec | None = None,
                        threads=None) -> RejectionStudy:
    """Repeat the permutation test over independent replicates.

    Replicates run one after another; the permutations inside each run use
    the thread pool.
    """
    point, glob, bad = [], [], 0
    truth_beta = None
    for r in range(reps):
        d = replicate_design(design, r)
        data, truth = generate(d)
        truth_beta = truth.beta
        spec = selection or tuning.SelectionSpec("cv", seed=derive_seed(d.seed, _TUNING))
        res = inference.permutation_test(data, spec, n_perm, alpha, derive_seed(d.seed, _PERM),
                                         fast=fast, threads=threads)
        point.append(res.rejection_mask)
        glob.append(res.global_rejection_mask)
        if np.any(res.global_rejection_mask & ~res.rejection_mask):
            bad += 1
    return RejectionStudy(np.mean(point, axis=0), np.mean(glob, axis=0), truth_beta, bad, reps)
