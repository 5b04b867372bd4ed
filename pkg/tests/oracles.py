"""Independent reference implementations used only by the tests.

None of these share code with the package: the Haar bases are built from
the piecewise-constant function definitions, the Lasso reference is an
accelerated proximal-gradient method, and the B-spline reference is the
plain recursive Cox-de Boor formula.
"""

from __future__ import annotations

import itertools

import numpy as np


# -- Haar -------------------------------------------------------------------

def haar_phi(p, j, k):
    """Discrete scaling function at scale ``2**j``: constant on block k."""
    v = np.zeros(p)
    w = 2 ** j
    v[k * w:(k + 1) * w] = 2.0 ** (-j / 2)
    return v


def haar_psi(p, j, k):
    """Discrete mother wavelet at scale ``2**j``: +1 then -1 on block k."""
    v = np.zeros(p)
    w = 2 ** j
    h = w // 2
    v[k * w:k * w + h] = 2.0 ** (-j / 2)
    v[k * w + h:(k + 1) * w] = -(2.0 ** (-j / 2))
    return v


def haar_matrix_1d(p, level):
    """Rows are the analysis functions in ``[A_L | D_L | ... | D_1]`` order."""
    rows = [haar_phi(p, level, k) for k in range(p >> level)]
    for j in range(level, 0, -1):
        rows += [haar_psi(p, j, k) for k in range(p >> j)]
    return np.array(rows)


def haar_matrix_3d(shape, level):
    """Tensor-product analysis functions in ``[A_L | D_L.1..7 | ... | D_1.1..7]``
    order, each block in C order over the translations."""
    nu, nv, nw = shape

    def funcs(j, bits):
        out = []
        for p, b in zip(shape, bits):
            f = haar_psi if b else haar_phi
            out.append([f(p, j, k) for k in range(p >> j)])
        return out

    def block(j, bits):
        fu, fv, fw = funcs(j, bits)
        return [np.einsum("i,j,k->ijk", a, b, c).ravel()
                for a, b, c in itertools.product(fu, fv, fw)]

    rows = block(level, (0, 0, 0))
    for j in range(level, 0, -1):
        for q in range(1, 8):
            rows += block(j, ((q >> 2) & 1, (q >> 1) & 1, q & 1))
    return np.array(rows)


# -- Lasso ------------------------------------------------------------------

def _soft(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def lasso_fista(X, y, lam, n_iter=20000, tol=1e-15):
    """Minimize ``(1/n)||y - b0 - X eta||^2 + 2 lam ||eta||_1`` by FISTA with
    adaptive restart, then polish on the detected support and signs."""
    n, p = X.shape
    xm = X.mean(axis=0)
    ym = y.mean()
    Xc = X - xm
    yc = y - ym
    L = 2.0 * np.linalg.norm(Xc, 2) ** 2 / n
    step = 1.0 / L
    eta = np.zeros(p)
    z = eta.copy()
    t = 1.0
    for _ in range(n_iter):
        grad = -2.0 / n * (Xc.T @ (yc - Xc @ z))
        new = _soft(z - step * grad, 2 * lam * step)
        if np.dot(z - new, new - eta) > 0:   # restart momentum
            t = 1.0
            z = eta.copy()
            continue
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        z = new + (t - 1) / t_new * (new - eta)
        done = np.max(np.abs(new - eta)) <= tol * (1 + np.max(np.abs(new)))
        eta, t = new, t_new
        if done:
            break
    eta = _polish(Xc, yc, lam, eta)
    return ym - xm @ eta, eta


def _polish(Xc, yc, lam, eta):
    """Solve the stationarity equations on the support exactly; keep the
    solution only if it passes the sign and KKT checks."""
    n = Xc.shape[0]
    S = np.flatnonzero(eta)
    if S.size == 0:
        return eta
    s = np.sign(eta[S])
    XS = Xc[:, S]
    try:
        sol = np.linalg.solve(XS.T @ XS / n, XS.T @ yc / n - lam * s)
    except np.linalg.LinAlgError:
        return eta
    cand = np.zeros_like(eta)
    cand[S] = sol
    g = Xc.T @ (yc - Xc @ cand) / n
    ok = np.all(np.sign(sol) == s) and np.max(np.abs(g)) <= lam * (1 + 1e-9)
    return cand if ok else eta


def lasso_objective(X, y, lam, b0, eta):
    r = y - b0 - X @ eta
    return r @ r / X.shape[0] + 2 * lam * np.abs(eta).sum()


# -- B-splines ----------------------------------------------------------------

def cox_de_boor(t, i, k, knots):
    """Value of the i-th B-spline of degree k at t (right-continuous, with
    the last basis function closed at the right end)."""
    if k == 0:
        if knots[i] <= t < knots[i + 1]:
            return 1.0
        if t == knots[-1] and knots[i] < knots[i + 1] == knots[-1]:
            return 1.0
        return 0.0
    out = 0.0
    d1 = knots[i + k] - knots[i]
    if d1 > 0:
        out += (t - knots[i]) / d1 * cox_de_boor(t, i, k - 1, knots)
    d2 = knots[i + k + 1] - knots[i + 1]
    if d2 > 0:
        out += (knots[i + k + 1] - t) / d2 * cox_de_boor(t, i + 1, k - 1, knots)
    return out
