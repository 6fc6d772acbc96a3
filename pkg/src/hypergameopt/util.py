"""Small numeric helpers: deterministic low-discrepancy starts and dense Newton."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import NewtonDiverged

_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53)


def halton(index: int, dim: int) -> np.ndarray:
    """Point `index` (1-based) of the Halton sequence in [0, 1)^dim."""
    out = np.empty(dim)
    for d in range(dim):
        base = _PRIMES[d % len(_PRIMES)]
        f, r, i = 1.0, 0.0, index
        while i > 0:
            f /= base
            r += f * (i % base)
            i //= base
        out[d] = r
    return out


def start_points(x0: np.ndarray, n_starts: int, scale: float = 0.5) -> list[np.ndarray]:
    """x0 followed by deterministic low-discrepancy perturbations of it.

    Perturbation size is relative to 1 + |x0| per coordinate, so the spread is
    meaningful for both small and large starting values.
    """
    x0 = np.asarray(x0, dtype=float)
    pts = [x0]
    span = scale * (1.0 + np.abs(x0))
    for s in range(1, n_starts):
        u = halton(s, x0.size)
        pts.append(x0 + span * (2.0 * u - 1.0))
    return pts


def newton(
    fun: Callable[[np.ndarray], np.ndarray],
    jac: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    tol: float = 1e-12,
    max_iter: int = 80,
) -> np.ndarray:
    """Dense Newton with simple backtracking on the residual norm."""
    x = np.asarray(x0, dtype=float).copy()
    f = np.asarray(fun(x), dtype=float)
    if not np.all(np.isfinite(f)):
        raise NewtonDiverged("non-finite residual at the starting point")
    for _ in range(max_iter):
        nrm = np.max(np.abs(f))
        if nrm <= tol:
            return x
        J = np.asarray(jac(x), dtype=float)
        try:
            step = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError as exc:
            raise NewtonDiverged(f"singular Jacobian (residual {nrm:.3e})") from exc
        alpha = 1.0
        for _bt in range(40):
            x_new = x + alpha * step
            f_new = np.asarray(fun(x_new), dtype=float)
            if np.all(np.isfinite(f_new)) and np.max(np.abs(f_new)) < nrm:
                x, f = x_new, f_new
                break
            alpha *= 0.5
        else:
            raise NewtonDiverged(f"line search failed (residual {nrm:.3e})")
    raise NewtonDiverged(f"no convergence in {max_iter} iterations "
                         f"(residual {np.max(np.abs(f)):.3e})")
