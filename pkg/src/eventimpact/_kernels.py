"""Hot numeric kernels for the EM fits.

Two interchangeable backends: numba-jitted loops (default when numba imports)
and a pure-numpy path. Select explicitly with the EVENTIMPACT_BACKEND
environment variable ("numba" or "numpy") or per call via ``backend=``.
The backends agree to floating-point roundoff, not bitwise; reproducible
byte-level outputs should pin one backend.

Inner-loop convention shared by both backends: the conditional intensity on
day d is mu + sum over lags u = 1..min(L, d) of c[d-u] * lev[per[d-u]] * g[u-1],
i.e. productivity is indexed by the parent day's period and same-day pairs
carry no triggering mass.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = ["active_backend", "em_tied", "em_levels", "intensity_curve"]

_ENV_FLAG = "EVENTIMPACT_BACKEND"

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via EVENTIMPACT_BACKEND
    numba = None
    _HAVE_NUMBA = False


def active_backend(backend: str | None = None) -> str:
    """Resolve the backend name: explicit argument > env flag > auto."""
    choice = backend or os.environ.get(_ENV_FLAG, "auto")
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(f"unknown backend {choice!r}")
    if choice == "numba" and not _HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not importable")
    if choice == "auto":
        return "numba" if _HAVE_NUMBA else "numpy"
    return choice


# --- numpy backend ----------------------------------------------------------

def _intensity_np(c, per, lev, mu, g):
    L = g.shape[0]
    D = c.shape[0]
    lam = np.full(D, mu)
    contrib = c * lev[per]
    for u in range(1, min(L, D - 1) + 1):
        lam[u:] += contrib[:-u] * g[u - 1]
    return lam


def _em_tied_np(c, L, n_days, mu0, K0, g0, tol, max_iter, mu_floor):
    D = c.shape[0]
    total = c.sum()
    mu, K, g = mu0, K0, g0.copy()
    zeros = np.zeros(D, dtype=np.int64)
    n_iter = 0
    converged = False
    for _ in range(max_iter):
        n_iter += 1
        lam = _intensity_np(c, zeros, np.array([K, K, K]), mu, g)
        ratio = np.where(c > 0, c / lam, 0.0)
        bsum = mu * ratio.sum()
        trig = np.zeros(L)
        contrib = c * K
        for u in range(1, min(L, D - 1) + 1):
            trig[u - 1] = g[u - 1] * (contrib[:-u] * ratio[u:]).sum()
        mu_new = max(bsum / n_days, mu_floor)
        tot = trig.sum()
        g_new = trig / tot if tot > 0 else np.full(L, 1.0 / L)
        K_new = tot / total if total > 0 else 0.0
        delta = max(abs(mu_new - mu), abs(K_new - K), np.abs(g_new - g).max())
        mu, K, g = mu_new, K_new, g_new
        if delta < tol:
            converged = True
            break
    return mu, K, g, n_iter, converged


def _em_levels_np(c, per, pts, mu, lev0, g, tol, max_iter):
    D = c.shape[0]
    L = g.shape[0]
    lev = lev0.copy()
    M = np.zeros(3)
    W = np.zeros(3)
    n_iter = 0
    converged = False
    for _ in range(max_iter):
        n_iter += 1
        lam = _intensity_np(c, per, lev, mu, g)
        ratio = np.where(c > 0, c / lam, 0.0)
        M[:] = 0.0
        W[:] = 0.0
        contrib = c * lev[per]
        for u in range(1, min(L, D - 1) + 1):
            w = contrib[:-u] * g[u - 1] * ratio[u:]
            par = per[:-u]
            np.add.at(M, par, w)
            same = par == per[u:]
            np.add.at(W, par[same], w[same])
        lev_new = np.where(pts > 0, M / np.where(pts > 0, pts, 1.0), 0.0)
        delta = np.abs(lev_new - lev).max()
        lev = lev_new
        if delta < tol:
            converged = True
            break
    return lev, M, W, n_iter, converged


# --- numba backend ----------------------------------------------------------

if _HAVE_NUMBA:

    @numba.njit(cache=True)
    def _em_tied_nb(c, L, n_days, mu0, K0, g0, tol, max_iter, mu_floor):
        D = c.shape[0]
        total = 0.0
        for d in range(D):
            total += c[d]
        mu = mu0
        K = K0
        g = g0.copy()
        trig = np.empty(L)
        n_iter = 0
        converged = False
        for _ in range(max_iter):
            n_iter += 1
            bsum = 0.0
            for u in range(L):
                trig[u] = 0.0
            for d in range(D):
                acc = mu
                umax = L if L < d else d
                for u in range(1, umax + 1):
                    acc += c[d - u] * K * g[u - 1]
                if c[d] > 0.0:
                    scale = c[d] / acc
                    bsum += mu * scale
                    for u in range(1, umax + 1):
                        trig[u - 1] += c[d - u] * K * g[u - 1] * scale
            mu_new = bsum / n_days
            if mu_new < mu_floor:
                mu_new = mu_floor
            tot = 0.0
            for u in range(L):
                tot += trig[u]
            delta = abs(mu_new - mu)
            for u in range(L):
                gn = trig[u] / tot if tot > 0.0 else 1.0 / L
                diff = abs(gn - g[u])
                if diff > delta:
                    delta = diff
                g[u] = gn
            K_new = tot / total if total > 0.0 else 0.0
            diff = abs(K_new - K)
            if diff > delta:
                delta = diff
            mu = mu_new
            K = K_new
            if delta < tol:
                converged = True
                break
        return mu, K, g, n_iter, converged

    @numba.njit(cache=True)
    def _em_levels_nb(c, per, pts, mu, lev0, g, tol, max_iter):
        D = c.shape[0]
        L = g.shape[0]
        lev = lev0.copy()
        M = np.empty(3)
        W = np.empty(3)
        n_iter = 0
        converged = False
        for _ in range(max_iter):
            n_iter += 1
            M[0] = 0.0; M[1] = 0.0; M[2] = 0.0
            W[0] = 0.0; W[1] = 0.0; W[2] = 0.0
            for d in range(D):
                acc = mu
                umax = L if L < d else d
                for u in range(1, umax + 1):
                    acc += c[d - u] * lev[per[d - u]] * g[u - 1]
                if c[d] > 0.0:
                    scale = c[d] / acc
                    for u in range(1, umax + 1):
                        w = c[d - u] * lev[per[d - u]] * g[u - 1] * scale
                        M[per[d - u]] += w
                        if per[d - u] == per[d]:
                            W[per[d - u]] += w
            delta = 0.0
            for p in range(3):
                ln = M[p] / pts[p] if pts[p] > 0.0 else 0.0
                diff = abs(ln - lev[p])
                if diff > delta:
                    delta = diff
                lev[p] = ln
            if delta < tol:
                converged = True
                break
        return lev, M, W, n_iter, converged

    @numba.njit(cache=True)
    def _intensity_nb(c, per, lev, mu, g):
        D = c.shape[0]
        L = g.shape[0]
        lam = np.empty(D)
        for d in range(D):
            acc = mu
            umax = L if L < d else d
            for u in range(1, umax + 1):
                acc += c[d - u] * lev[per[d - u]] * g[u - 1]
            lam[d] = acc
        return lam


# --- dispatch ---------------------------------------------------------------

def em_tied(c, L, n_days, mu0, K0, g0, tol, max_iter, mu_floor=1e-10,
            backend: str | None = None):
    """Tied-productivity MISD EM: one global level K, free histogram kernel.

    With tol = 0 the loop runs exactly ``max_iter`` sweeps (bounded burn-in).
    Returns (mu, K, g, iterations, converged).
    """
    c = np.ascontiguousarray(c, dtype=np.float64)
    g0 = np.ascontiguousarray(g0, dtype=np.float64)
    if active_backend(backend) == "numba":
        return _em_tied_nb(c, L, float(n_days), float(mu0), float(K0), g0,
                           float(tol), int(max_iter), float(mu_floor))
    return _em_tied_np(c, L, float(n_days), float(mu0), float(K0), g0,
                       float(tol), int(max_iter), float(mu_floor))


def em_levels(c, per, pts, mu, lev0, g, tol, max_iter, backend: str | None = None):
    """Three-level productivity EM with the background rate and kernel fixed.

    Returns (levels, offspring_mass, within_mass, iterations, converged) where
    the masses come from the final sweep's attribution pass.
    """
    c = np.ascontiguousarray(c, dtype=np.float64)
    per = np.ascontiguousarray(per, dtype=np.int64)
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    lev0 = np.ascontiguousarray(lev0, dtype=np.float64)
    g = np.ascontiguousarray(g, dtype=np.float64)
    if active_backend(backend) == "numba":
        return _em_levels_nb(c, per, pts, float(mu), lev0, g, float(tol), int(max_iter))
    return _em_levels_np(c, per, pts, float(mu), lev0, g, float(tol), int(max_iter))


def intensity_curve(c, per, lev, mu, g, backend: str | None = None):
    """Conditional intensity for every day of the series."""
    c = np.ascontiguousarray(c, dtype=np.float64)
    per = np.ascontiguousarray(per, dtype=np.int64)
    lev = np.ascontiguousarray(lev, dtype=np.float64)
    g = np.ascontiguousarray(g, dtype=np.float64)
    if active_backend(backend) == "numba":
        return _intensity_nb(c, per, lev, float(mu), g)
    return _intensity_np(c, per, lev, float(mu), g)
