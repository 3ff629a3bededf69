"""Positive solutions of ``lap(w) + f w - 1/(2w) = 0`` by damped Newton."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .torus import TorusGrid

log = logging.getLogger(__name__)


class StationaryError(RuntimeError):
    pass


class NoConvergence(StationaryError):
    pass


class PositivityLoss(StationaryError):
    pass


@dataclass(frozen=True)
class StationaryState:
    omega: np.ndarray
    residual_norm: float
    f_used: np.ndarray
    iterations: int = 0
    history: tuple[float, ...] = field(default=(), repr=False)


def stationary_operator(grid: TorusGrid, w, f) -> np.ndarray:
    w = grid.check(w)
    return grid.laplacian(w) + f * w - 0.5 / w


def stationary_residual(grid: TorusGrid, candidate, f) -> float:
    w = grid.check(candidate)
    if np.any(w <= 0):
        raise ValueError("candidate must be strictly positive")
    return float(np.max(np.abs(stationary_operator(grid, w, f))))


def _newton_direction(grid, w, f, F, tol):
    # Jacobian: lap + f + 1/(2 w^2); preconditioned by (lap - c)^-1, c > 0
    c = f + 0.5 / w**2
    shift = float(np.mean(c))
    pre_symbol = 1.0 / (grid.laplacian_symbol - shift)
    shape = grid.shape

    def matvec(x):
        x = x.reshape(shape)
        return (grid.laplacian(x) + c * x).ravel()

    def precond(x):
        return grid.apply_symbol(x.reshape(shape), pre_symbol).ravel()

    A = LinearOperator((grid.size, grid.size), matvec=matvec, dtype=float)
    M = LinearOperator((grid.size, grid.size), matvec=precond, dtype=float)
    b = -F.ravel()
    dx, info = gmres(A, b, M=M, rtol=tol, atol=0.0, restart=min(200, grid.size), maxiter=50)
    if info != 0:
        log.debug("gmres returned info=%d", info)
    return dx.reshape(shape)


def solve_stationary(
    grid: TorusGrid,
    f,
    initial_guess=None,
    *,
    tol: float = 1e-10,
    max_iters: int = 100,
    positivity_floor: float = 1e-6,
    max_halvings: int = 40,
) -> StationaryState:
    """Damped Newton iteration for a positive stationary state.

    Parameters
    ----------
    f : float or array
        Strictly positive source (the blow-up limit ``f_{t1}``).
    initial_guess : array, optional
        Defaults to the constant ``1/sqrt(2 mean(f))``, exact for constant f.

    Raises
    ------
    NoConvergence
        Residual above ``tol`` after ``max_iters`` iterations.
    PositivityLoss
        The line search cannot keep ``min(w) >= positivity_floor``.
    """
    f = np.broadcast_to(np.asarray(f, dtype=float), grid.shape).copy()
    grid.check(f)
    if np.any(f <= 0):
        raise ValueError("source f must be strictly positive")
    if initial_guess is None:
        w = grid.constant(1.0 / np.sqrt(2.0 * np.mean(f)))
    else:
        w = grid.check(initial_guess).copy()
        if np.any(w <= 0):
            raise ValueError("initial guess must be strictly positive")
    F = stationary_operator(grid, w, f)
    res = float(np.max(np.abs(F)))
    history = [res]
    it = 0
    while res > tol:
        if it >= max_iters:
            raise NoConvergence(f"residual {res:.3e} after {it} Newton iterations")
        it += 1
        lin_tol = min(1e-3, 1e-2 * res)
        dw = _newton_direction(grid, w, f, F, lin_tol)
        lam = 1.0
        for _ in range(max_halvings):
            cand = w + lam * dw
            if np.min(cand) >= positivity_floor:
                F_new = stationary_operator(grid, cand, f)
                res_new = float(np.max(np.abs(F_new)))
                if res_new < res:
                    break
            lam *= 0.5
        else:
            if np.min(w + lam * dw) < positivity_floor:
                raise PositivityLoss(f"line search could not keep w >= {positivity_floor}")
            raise NoConvergence(f"line search stalled at residual {res:.3e}")
        w, F, res = cand, F_new, res_new
        history.append(res)
        log.debug("newton %d: residual %.3e (step %.3g)", it, res, lam)
    return StationaryState(w, res, f, it, tuple(history))
