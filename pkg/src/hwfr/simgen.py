"""Simulation designs: random smooth predictors, sparse coefficient functions
and SNR-controlled responses.

Random numbers come from ``numpy.random.default_rng`` (PCG64) seeded with
the design seed.  Draw order is fixed: predictor coefficients, then
predictor noise, then response noise.  Grids are cell midpoints
``(j - 1/2) / p``.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .funreg import FunctionalDataset
from .haar import is_power_of_two

BSPLINE_INTERIOR_KNOTS = tuple(k / 7 for k in range(1, 7))
BALL_CENTER = 7 * np.pi / 40
BALL_RADIUS = 3 * np.pi / 40
BALL_A, BALL_B, BALL_C = 1 / 8, 40 / 3, np.pi / 6

NOISE_MODES = ("mean_curve", "per_curve")
G_SOURCES = ("clean", "noisy")


def midpoints(p: int) -> np.ndarray:
    return (np.arange(p) + 0.5) / p


def clamped_knots(interior=BSPLINE_INTERIOR_KNOTS, degree: int = 3) -> np.ndarray:
    return np.concatenate([np.zeros(degree + 1), np.asarray(interior, float), np.ones(degree + 1)])


def bspline_basis(t, knots=None, degree: int = 3) -> np.ndarray:
    """Cox-de Boor evaluation of every B-spline basis function at ``t``.

    Returns an array of shape ``t.shape + (n_basis,)``.  The right end of the
    knot span is included in the last nonempty interval, so clamped bases
    form a partition of unity on the closed interval.
    """
    knots = clamped_knots(degree=degree) if knots is None else np.asarray(knots, float)
    t = np.asarray(t, dtype=float)
    flat = np.atleast_1d(t).ravel()
    lo, hi = knots[0], knots[-1]
    if np.any(flat < lo) or np.any(flat > hi) or not np.all(np.isfinite(flat)):
        raise ValueError(f"t must lie in [{lo}, {hi}]")
    m = len(knots) - 1
    B = np.zeros((flat.size, m))
    for i in range(m):
        B[:, i] = (knots[i] <= flat) & (flat < knots[i + 1])
    last = max(i for i in range(m) if knots[i] < knots[i + 1])
    B[flat == hi, :] = 0.0
    B[flat == hi, last] = 1.0
    for k in range(1, degree + 1):
        nxt = np.zeros((flat.size, m - k))
        for i in range(m - k):
            d1 = knots[i + k] - knots[i]
            d2 = knots[i + k + 1] - knots[i + 1]
            if d1 > 0:
                nxt[:, i] += (flat - knots[i]) / d1 * B[:, i]
            if d2 > 0:
                nxt[:, i] += (knots[i + k + 1] - flat) / d2 * B[:, i + 1]
        B = nxt
    return B.reshape(t.shape + (B.shape[1],))


# -- coefficient functions --------------------------------------------------

def beta_1d(t, case: int) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if case == 1:
        inside = (t >= np.pi / 8) & (t < 9 * np.pi / 40)
        return np.where(inside, 0.5 * (np.sin(20 * t - np.pi) + 1), 0.0)
    if case == 2:
        return np.where((t >= 0.2) & (t < 0.3), 1.0, np.where((t >= 0.5) & (t < 0.7), 0.5, 0.0))
    raise ValueError(f"unknown beta case {case}")


def beta_3d(u, v, w) -> np.ndarray:
    u, v, w = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (u, v, w)))
    r2 = (u - BALL_CENTER) ** 2 + (v - BALL_CENTER) ** 2 + (w - BALL_CENTER) ** 2
    val = BALL_A * ((np.sin(BALL_B * u + BALL_C) + 1) * (np.sin(BALL_B * v + BALL_C) + 1)
                    * (np.sin(BALL_B * w + BALL_C) + 1))
    return np.where(r2 <= BALL_RADIUS ** 2, val, 0.0)


def beta_3d_grid(shape) -> np.ndarray:
    axes = [midpoints(d) for d in shape]
    u, v, w = np.meshgrid(*axes, indexing="ij")
    return beta_3d(u, v, w)


# -- designs ------------------------------------------------------------

@dataclass(frozen=True)
class SimDesign1D:
    x_type: str = "bspline"
    beta_case: int = 2
    n: int = 100
    p: int = 128
    snr: float = 9.0
    seed: int = 0
    noise_mode: str = "mean_curve"
    g_from: str = "noisy"

    def __post_init__(self):
        if self.x_type not in ("bspline", "fourier"):
            raise ValueError(f"x_type must be 'bspline' or 'fourier', got {self.x_type!r}")
        if self.beta_case not in (1, 2):
            raise ValueError("beta_case must be 1 or 2")
        if not is_power_of_two(self.p) or self.p < 2:
            raise ValueError("p must be a power of 2")
        _check_common(self)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class SimDesign3D:
    n: int = 400
    dim: int = 32
    snr: float = 9.0
    seed: int = 0
    noise_mode: str = "mean_curve"
    g_from: str = "noisy"

    def __post_init__(self):
        if not is_power_of_two(self.dim) or self.dim < 2:
            raise ValueError("dim must be a power of 2")
        _check_common(self)

    @property
    def shape(self) -> tuple:
        return (self.dim,) * 3

    def to_dict(self):
        return asdict(self)


def _check_common(d):
    if d.n < 2:
        raise ValueError("n must be at least 2")
    if not d.snr > 0:
        raise ValueError("snr must be positive")
    if d.noise_mode not in NOISE_MODES:
        raise ValueError(f"noise_mode must be one of {NOISE_MODES}")
    if d.g_from not in G_SOURCES:
        raise ValueError(f"g_from must be one of {G_SOURCES}")


@dataclass(frozen=True, eq=False)
class GroundTruth:
    beta: np.ndarray
    g: np.ndarray
    sigma2: float
    sigma_e2: float
    x_clean: np.ndarray

    @property
    def support(self) -> np.ndarray:
        return self.beta != 0


def draw_clean_1d(x_type: str, n: int, p: int, rng: np.random.Generator) -> np.ndarray:
    t = midpoints(p)
    if x_type == "fourier":
        a = rng.standard_normal((n, 5))
        F = np.stack([np.ones(p), np.sin(2 * np.pi * t), np.cos(2 * np.pi * t),
                      np.sin(4 * np.pi * t), np.cos(4 * np.pi * t)], axis=1)
        return a @ F.T
    basis = bspline_basis(t)
    a = rng.standard_normal((n, basis.shape[1]))
    return a @ basis.T


def draw_clean_3d(n: int, shape, rng: np.random.Generator) -> np.ndarray:
    a = rng.standard_normal((n, 7))
    u, v, w = (midpoints(d) for d in shape)
    out = np.broadcast_to(a[:, 0, None, None, None], (n,) + tuple(shape)).copy()
    for k, (axis, vals) in enumerate(((0, u), (1, v), (2, w))):
        s, c = np.sin(2 * np.pi * vals), np.cos(2 * np.pi * vals)
        bshape = [1, 1, 1]
        bshape[axis] = -1
        out += a[:, 1 + 2 * k, None, None, None] * s.reshape(bshape)
        out += a[:, 2 + 2 * k, None, None, None] * c.reshape(bshape)
    return out


def predictor_noise_variance(x_clean: np.ndarray, mode: str = "mean_curve") -> np.ndarray | float:
    """Variance of the additive predictor noise.

    ``mean_curve`` pools squared deviations from the across-subject mean
    at each grid point; ``per_curve`` uses each curve's own spread about
    its grid average and returns one variance per subject.
    """
    flat = x_clean.reshape(x_clean.shape[0], -1)
    m = flat.shape[1]
    if mode == "mean_curve":
        dev = flat - flat.mean(axis=0)
        return float(np.sum(np.mean(dev ** 2, axis=0)) / (m - 1))
    if mode == "per_curve":
        dev = flat - flat.mean(axis=1, keepdims=True)
        return np.sum(dev ** 2, axis=1) / (m - 1)
    raise ValueError(f"unknown noise mode {mode!r}")


def integrate(x: np.ndarray, beta: np.ndarray, measure: float) -> np.ndarray:
    """Rectangle-rule integral of every predictor against ``beta``."""
    flat = x.reshape(x.shape[0], -1)
    return measure * (flat @ beta.ravel())


def apply_noise(curves, beta, snr: float, seed=None, *, rng=None, noise_mode: str = "mean_curve",
                g_from: str = "noisy", measure: float | None = None, sigma_e2=None):
    """Add predictor noise and draw responses at the requested SNR.

    Returns ``(noisy, y, g, sigma_e2, sigma2)``.  With ``g_from='clean'``
    the linear predictor uses the noiseless curves.
    """
    if not snr > 0:
        raise ValueError("snr must be positive")
    rng = np.random.default_rng(seed) if rng is None else rng
    x = np.asarray(curves, dtype=float)
    measure = 1.0 / np.prod(x.shape[1:]) if measure is None else measure
    if sigma_e2 is None:
        sigma_e2 = predictor_noise_variance(x, noise_mode)
    sd = np.sqrt(np.asarray(sigma_e2, dtype=float))
    if sd.ndim:
        sd = sd.reshape((-1,) + (1,) * (x.ndim - 1))
    noisy = x + sd * rng.standard_normal(x.shape)
    g = integrate(x if g_from == "clean" else noisy, beta, measure)
    var_g = float(np.var(g, ddof=1))
    if not var_g > 0:
        raise ValueError("linear predictor has zero variance; SNR is undefined")
    sigma2 = var_g / snr
    y = g + np.sqrt(sigma2) * rng.standard_normal(g.shape)
    return noisy, y, g, sigma_e2, sigma2


def gen_1d(design: SimDesign1D):
    """Draw a training set for a 1D design; returns ``(dataset, truth)``."""
    rng = np.random.default_rng(design.seed)
    clean = draw_clean_1d(design.x_type, design.n, design.p, rng)
    beta = beta_1d(midpoints(design.p), design.beta_case)
    noisy, y, g, se2, s2 = apply_noise(clean, beta, design.snr, rng=rng,
                                       noise_mode=design.noise_mode, g_from=design.g_from)
    return FunctionalDataset(noisy, y), GroundTruth(beta, g, s2, se2, clean)


def gen_3d(design: SimDesign3D):
    """Draw a training set of volumes; returns ``(dataset, truth)``."""
    rng = np.random.default_rng(design.seed)
    clean = draw_clean_3d(design.n, design.shape, rng)
    beta = beta_3d_grid(design.shape)
    noisy, y, g, se2, s2 = apply_noise(clean, beta, design.snr, rng=rng,
                                       noise_mode=design.noise_mode, g_from=design.g_from)
    return FunctionalDataset(noisy, y), GroundTruth(beta, g, s2, se2, clean)


def draw_test(design, truth: GroundTruth, n_test: int, seed):
    """Fresh predictors from the same population plus their true linear predictor.

    The predictor noise variance of the training draw is reused.  Responses
    are not drawn: test error is measured against ``g`` directly.
    """
    rng = np.random.default_rng(seed)
    if isinstance(design, SimDesign1D):
        clean = draw_clean_1d(design.x_type, n_test, design.p, rng)
    else:
        clean = draw_clean_3d(n_test, design.shape, rng)
    se2 = truth.sigma_e2
    if np.ndim(se2):
        se2 = predictor_noise_variance(clean, "per_curve")
    sd = np.sqrt(np.asarray(se2, dtype=float))
    if sd.ndim:
        sd = sd.reshape((-1,) + (1,) * (clean.ndim - 1))
    noisy = clean + sd * rng.standard_normal(clean.shape)
    measure = 1.0 / truth.beta.size
    g = integrate(clean if design.g_from == "clean" else noisy, truth.beta, measure)
    return noisy, g


def gen_standin(n: int = 100, shape=(20, 20, 12), snr: float = 9.0, seed: int = 0):
    """Non-dyadic synthetic volumes with zeros outside an ellipsoidal head mask.

    A stand-in for masked scans on an arbitrary voxel grid; pair it with
    :func:`hwfr.funreg.pad_to_dyadic`.
    """
    rng = np.random.default_rng(seed)
    shape = tuple(int(s) for s in shape)
    axes = [midpoints(d) for d in shape]
    u, v, w = np.meshgrid(*axes, indexing="ij")
    mask = ((u - 0.5) / 0.48) ** 2 + ((v - 0.5) / 0.48) ** 2 + ((w - 0.5) / 0.48) ** 2 <= 1.0
    clean = draw_clean_3d(n, shape, rng) * mask
    beta = beta_3d(u, v, w) * mask
    noisy, y, g, se2, s2 = apply_noise(clean, beta, snr, rng=rng)
    noisy = noisy * mask
    return FunctionalDataset(noisy, y), GroundTruth(beta, g, s2, se2, clean)
