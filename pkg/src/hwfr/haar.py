"""Orthonormal Haar wavelet analysis and synthesis in 1D and 3D.

Coefficients are stored as flat vectors.  The 1D layout is
``[A_L | D_L | ... | D_1]``; the 3D layout is
``[A_L | D_L.1 ... D_L.7 | ... | D_1.1 ... D_1.7]`` with each block in
C order over its ``(k, l, m)`` translation indices.  The directional
index ``q`` encodes which axes carry the mother wavelet:
``q = 4*[u is psi] + 2*[v is psi] + [w is psi]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SQRT2 = np.sqrt(2.0)


def is_power_of_two(n: int) -> bool:
    n = int(n)
    return n >= 1 and (n & (n - 1)) == 0


def max_level(shape) -> int:
    """Largest admissible decomposition level for a dyadic grid."""
    return int(np.log2(min(shape)))


def _check_grid(shape, level: int) -> None:
    for d in shape:
        if not is_power_of_two(d):
            raise ValueError(f"grid dimension {d} is not a power of 2")
    if min(shape) < 2:
        raise ValueError("grid dimensions must be at least 2")
    lmax = max_level(shape)
    if not (1 <= int(level) <= lmax):
        raise ValueError(f"level {level} out of range [1, {lmax}] for grid {tuple(shape)}")


@dataclass(frozen=True)
class BasisSpec:
    """Which Haar basis a coefficient vector refers to."""

    shape: tuple
    level: int

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(d) for d in self.shape))
        if len(self.shape) not in (1, 3):
            raise ValueError("only 1D and 3D grids are supported")
        _check_grid(self.shape, self.level)

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def subband_map(self):
        return subband_layout(self.shape, self.level)


def subband_layout(shape, level: int):
    """List of ``(label, (start, stop))`` for every subband, in storage order."""
    shape = tuple(int(d) for d in shape)
    _check_grid(shape, level)
    out = []
    if len(shape) == 1:
        p = shape[0]
        na = p >> level
        out.append((f"A{level}", (0, na)))
        start = na
        for j in range(level, 0, -1):
            nd = p >> j
            out.append((f"D{j}", (start, start + nd)))
            start += nd
        return out
    if len(shape) != 3:
        raise ValueError("only 1D and 3D grids are supported")
    na = int(np.prod([d >> level for d in shape]))
    out.append((f"A{level}", (0, na)))
    start = na
    for j in range(level, 0, -1):
        nb = int(np.prod([d >> j for d in shape]))
        for q in range(1, 8):
            out.append((f"D{j}.{q}", (start, start + nb)))
            start += nb
    return out


@dataclass(frozen=True)
class WaveletCoefficients:
    values: np.ndarray
    level: int
    shape: tuple
    subband_map: list = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(d) for d in self.shape))
        if self.subband_map is None:
            object.__setattr__(self, "subband_map", subband_layout(self.shape, self.level))

    @property
    def ndim(self) -> int:
        return len(self.shape)

    def band(self, label: str) -> np.ndarray:
        for name, (a, b) in self.subband_map:
            if name == label:
                return self.values[..., a:b]
        raise KeyError(label)

    def approximation(self) -> np.ndarray:
        return self.band(f"A{self.level}")


def _as_grid(x, ndim: int) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}D grid, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("grid contains non-finite values")
    return arr


# -- batched kernels; the grid occupies the trailing axes -------------------

def _step(a: np.ndarray, axis: int):
    idx = [slice(None)] * a.ndim
    idx[axis] = slice(0, None, 2)
    even = a[tuple(idx)]
    idx[axis] = slice(1, None, 2)
    odd = a[tuple(idx)]
    return (even + odd) / SQRT2, (even - odd) / SQRT2


def _unstep(lo: np.ndarray, hi: np.ndarray, axis: int) -> np.ndarray:
    shape = list(lo.shape)
    shape[axis] *= 2
    out = np.empty(shape)
    idx = [slice(None)] * lo.ndim
    idx[axis] = slice(0, None, 2)
    out[tuple(idx)] = (lo + hi) / SQRT2
    idx[axis] = slice(1, None, 2)
    out[tuple(idx)] = (lo - hi) / SQRT2
    return out


def dwt1d_batch(x: np.ndarray, level: int) -> np.ndarray:
    """Row-wise 1D transform of an ``(n, p)`` array."""
    x = np.asarray(x, dtype=float)
    _check_grid(x.shape[-1:], level)
    a = x
    details = []
    for _ in range(level):
        a, d = _step(a, -1)
        details.append(d)
    return np.concatenate([a] + details[::-1], axis=-1)


def idwt1d_batch(c: np.ndarray, p: int, level: int) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    _check_grid((p,), level)
    if c.shape[-1] != p:
        raise ValueError(f"expected {p} coefficients, got {c.shape[-1]}")
    na = p >> level
    a = c[..., :na]
    start = na
    for _ in range(level):
        nd = a.shape[-1]
        a = _unstep(a, c[..., start:start + nd], -1)
        start += nd
    return a


def dwt3d_batch(x: np.ndarray, level: int) -> np.ndarray:
    """Transform of an ``(n, nu, nv, nw)`` stack; returns ``(n, nu*nv*nw)``."""
    x = np.asarray(x, dtype=float)
    _check_grid(x.shape[-3:], level)
    lead = x.shape[:-3]
    a = x
    levels = []
    for _ in range(level):
        lu, hu = _step(a, -3)
        bands = {}
        for ubit, au in ((0, lu), (1, hu)):
            lv, hv = _step(au, -2)
            for vbit, av in ((0, lv), (1, hv)):
                lw, hw = _step(av, -1)
                bands[(ubit << 2) | (vbit << 1)] = lw
                bands[(ubit << 2) | (vbit << 1) | 1] = hw
        a = bands[0]
        levels.append([bands[q].reshape(lead + (-1,)) for q in range(1, 8)])
    parts = [a.reshape(lead + (-1,))]
    for blocks in levels[::-1]:
        parts.extend(blocks)
    return np.concatenate(parts, axis=-1)


def idwt3d_batch(c: np.ndarray, shape, level: int) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    shape = tuple(int(d) for d in shape)
    _check_grid(shape, level)
    if c.shape[-1] != int(np.prod(shape)):
        raise ValueError(f"expected {int(np.prod(shape))} coefficients, got {c.shape[-1]}")
    lead = c.shape[:-1]
    sub = tuple(d >> level for d in shape)
    nb = int(np.prod(sub))
    a = c[..., :nb].reshape(lead + sub)
    start = nb
    for _ in range(level):
        bands = {0: a}
        for q in range(1, 8):
            bands[q] = c[..., start:start + nb].reshape(lead + sub)
            start += nb
        halves = {}
        for ubit in (0, 1):
            for vbit in (0, 1):
                q = (ubit << 2) | (vbit << 1)
                halves[(ubit, vbit)] = _unstep(bands[q], bands[q | 1], -1)
        au = {ubit: _unstep(halves[(ubit, 0)], halves[(ubit, 1)], -2) for ubit in (0, 1)}
        a = _unstep(au[0], au[1], -3)
        sub = tuple(2 * s for s in sub)
        nb = int(np.prod(sub))
    return a


# -- public value-in/value-out API -----------------------------------------

def dwt1d(signal, level: int) -> WaveletCoefficients:
    """Level-``level`` orthonormal Haar transform of a length-2^J signal.

    Each round maps consecutive pairs ``(a, b)`` to
    ``((a + b)/sqrt 2, (a - b)/sqrt 2)`` and recurses on the averages.
    """
    x = _as_grid(signal, 1)
    return WaveletCoefficients(dwt1d_batch(x, level), int(level), x.shape)


def idwt1d(coeffs: WaveletCoefficients) -> np.ndarray:
    _validate_map(coeffs)
    return idwt1d_batch(coeffs.values, coeffs.shape[0], coeffs.level)


def dwt3d(volume, level: int) -> WaveletCoefficients:
    """Level-``level`` tensor-product Haar transform of a dyadic volume.

    At each level the pairwise step runs along u, then v, then w, and only
    the all-average block is decomposed further.
    """
    x = _as_grid(volume, 3)
    return WaveletCoefficients(dwt3d_batch(x, level), int(level), x.shape)


def idwt3d(coeffs: WaveletCoefficients) -> np.ndarray:
    _validate_map(coeffs)
    return idwt3d_batch(coeffs.values, coeffs.shape, coeffs.level)


def dwt(grid, level: int) -> WaveletCoefficients:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim == 1:
        return dwt1d(grid, level)
    if grid.ndim == 3:
        return dwt3d(grid, level)
    raise ValueError("only 1D and 3D grids are supported")


def idwt(coeffs: WaveletCoefficients) -> np.ndarray:
    return idwt1d(coeffs) if coeffs.ndim == 1 else idwt3d(coeffs)


def forward_batch(x: np.ndarray, shape, level: int) -> np.ndarray:
    """Transform a stack of grids of the given shape into coefficient rows."""
    if len(shape) == 1:
        return dwt1d_batch(x, level)
    return dwt3d_batch(x, level)


def inverse_batch(c: np.ndarray, shape, level: int) -> np.ndarray:
    if len(shape) == 1:
        return idwt1d_batch(c, shape[0], level)
    return idwt3d_batch(c, shape, level)


def _validate_map(coeffs: WaveletCoefficients) -> None:
    try:
        expected = subband_layout(coeffs.shape, coeffs.level)
    except ValueError as exc:
        raise ValueError(f"malformed coefficient object: {exc}") from None
    got = [(str(lbl), (int(a), int(b))) for lbl, (a, b) in coeffs.subband_map]
    if got != expected:
        raise ValueError("malformed subband map")
    if np.shape(coeffs.values)[-1] != int(np.prod(coeffs.shape)):
        raise ValueError("coefficient count does not match grid size")
