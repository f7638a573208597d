"""Box-constrained multi-start minimisation shared by all estimators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.stats import qmc

__all__ = ["ConvergenceError", "MultiStartResult", "multistart_minimize", "boundary_flags", "numerical_hessian"]


class ConvergenceError(RuntimeError):
    """Raised when no optimizer start converged; ``best`` holds the best point."""

    def __init__(self, message, best=None, objective=None):
        super().__init__(message)
        self.best = best
        self.objective = objective


@dataclass
class MultiStartResult:
    x: np.ndarray
    fun: float
    success: bool
    message: str
    n_starts: int
    nfev: int


def to_unit(theta, lo, hi):
    z = np.clip((np.asarray(theta, dtype=float) - lo) / (hi - lo), 1e-12, 1 - 1e-12)
    return np.log(z) - np.log1p(-z)


def from_unit(u, lo, hi):
    return lo + (hi - lo) / (1.0 + np.exp(-np.asarray(u, dtype=float)))


def _safe(fun, theta):
    try:
        v = fun(theta)
    except (FloatingPointError, ValueError, ZeroDivisionError):
        return np.inf
    v = v[0] if isinstance(v, tuple) else v
    return float(v) if np.isfinite(v) else np.inf


def screen_starts(fun, lo, hi, n_bins: int, n_screen: int, seed: int) -> list[np.ndarray]:
    """Best screened point within each of ``n_bins`` slices of every coordinate.

    Stratifying keeps a start in every range of each parameter, so a narrow
    basin is not crowded out by a broad one elsewhere in the box.
    """
    p = len(lo)
    u = qmc.LatinHypercube(d=p, seed=np.random.default_rng(seed)).random(max(n_screen, n_bins))
    cand = lo + (hi - lo) * u
    scores = np.array([_safe(fun, c) for c in cand])
    picks = []
    for a in range(p):
        bins = np.minimum((u[:, a] * n_bins).astype(int), n_bins - 1)
        for b in range(n_bins):
            idx = np.flatnonzero(bins == b)
            if idx.size:
                picks.append(int(idx[np.argmin(scores[idx])]))
    picks = list(dict.fromkeys(picks))
    picks.sort(key=lambda i: scores[i])
    return [cand[i] for i in picks if np.isfinite(scores[i])]


def multistart_minimize(
    fun,
    lo,
    hi,
    jac: bool = False,
    n_starts: int = 5,
    n_screen: int = 256,
    seed: int = 0,
    start=None,
    gtol: float = 1e-9,
    accept_gtol: float = 1e-5,
    maxiter: int = 500,
) -> MultiStartResult:
    """Minimise ``fun`` over the box ``[lo, hi]``.

    Each local search is L-BFGS-B in the logistic transform of the box.
    ``fun(theta)`` returns the objective, or ``(objective, gradient)`` when
    ``jac`` is true; otherwise gradients are finite differences. A search
    counts as converged when L-BFGS-B reports success or its final
    transformed gradient is below ``accept_gtol``.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    p = lo.size
    starts = []
    if start is not None:
        starts.append(np.clip(np.asarray(start, dtype=float), lo, hi))
    if n_starts > 0:
        starts.extend(screen_starts(fun, lo, hi, n_starts, n_screen, seed))
    if not starts:
        raise ValueError("no starting values")

    def wrapped(u):
        th = from_unit(u, lo, hi)
        dth = (th - lo) * (hi - th) / (hi - lo)
        try:
            out = fun(th)
        except (FloatingPointError, ValueError, ZeroDivisionError):
            out = None
        if jac:
            if out is None or not np.isfinite(out[0]):
                return 1e10, np.zeros(p)
            return out[0], np.asarray(out[1]) * dth
        if out is None or not np.isfinite(out):
            return 1e10
        return out

    best, best_ok, nfev = None, False, 0
    for s in starts:
        res = optimize.minimize(
            wrapped,
            to_unit(s, lo, hi),
            jac=True if jac else None,
            method="L-BFGS-B",
            bounds=[(-30.0, 30.0)] * p,
            options={"maxiter": maxiter, "gtol": gtol, "ftol": 1e-13},
        )
        nfev += res.nfev
        ok = bool(res.success) or float(np.max(np.abs(res.jac))) < accept_gtol
        if best is None or res.fun < best.fun:
            best, best_ok = res, ok
    x = from_unit(best.x, lo, hi)
    if not best_ok:
        raise ConvergenceError(f"optimisation did not converge: {best.message}", x, float(best.fun))
    return MultiStartResult(x, float(best.fun), best_ok, str(best.message), len(starts), nfev)


def boundary_flags(theta, names, lo, hi, tol: float = 1e-3) -> dict:
    """Map parameter name to ``"lower"``/``"upper"`` when within ``tol`` of the box edge."""
    flags = {}
    for v, nm, a, b in zip(theta, names, lo, hi):
        span = b - a
        if v - a <= tol * span:
            flags[nm] = "lower"
        elif b - v <= tol * span:
            flags[nm] = "upper"
    return flags


def numerical_hessian(fun, theta, lo, hi, rel_step: float = 1e-4):
    """Finite-difference Hessian with step ``rel_step`` times the box width.

    Central differences are used in the interior. A coordinate whose central
    stencil would leave the box is differenced one-sidedly into the box.
    Returns ``(H, one_sided)`` where ``one_sided`` lists the affected indices.
    """
    theta = np.asarray(theta, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    p = theta.size
    h = rel_step * (hi - lo)
    sgn = np.zeros(p)  # 0 central, +1 forward, -1 backward
    for a in range(p):
        if theta[a] - 2 * h[a] < lo[a]:
            sgn[a] = 1.0
        elif theta[a] + 2 * h[a] > hi[a]:
            sgn[a] = -1.0

    def f(shift):
        return fun(theta + shift)

    f0 = f(np.zeros(p))
    H = np.empty((p, p))
    for a in range(p):
        ea = np.zeros(p)
        ea[a] = h[a]
        if sgn[a] == 0:
            H[a, a] = (f(ea) - 2 * f0 + f(-ea)) / h[a] ** 2
        else:
            s = sgn[a]
            H[a, a] = (f(2 * s * ea) - 2 * f(s * ea) + f0) / h[a] ** 2
    for a in range(p):
        for c in range(a + 1, p):
            ea = np.zeros(p)
            ec = np.zeros(p)
            ea[a] = h[a]
            ec[c] = h[c]
            if sgn[a] == 0 and sgn[c] == 0:
                v = (f(ea + ec) - f(ea - ec) - f(-ea + ec) + f(-ea - ec)) / (4 * h[a] * h[c])
            else:
                sa = sgn[a] if sgn[a] != 0 else 1.0
                sc = sgn[c] if sgn[c] != 0 else 1.0
                v = (f(sa * ea + sc * ec) - f(sa * ea) - f(sc * ec) + f0) / (sa * sc * h[a] * h[c])
            H[a, c] = H[c, a] = v
    return H, [int(a) for a in np.flatnonzero(sgn)]
