"""Fixed-point solver with damping and Newton fallback.

Solves ``y = F(y)`` for small dense systems.  Plain iteration is tried
first (it contracts whenever ``h * Lipschitz(F)`` is small, the common case
here); on slow or non-contracting behavior the iteration is damped, and a
Newton phase on ``g(y) = y - F(y)`` finishes off stiff cases when a
Jacobian of ``F`` is available.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass
class SolveResult:
    y: np.ndarray
    iterations: int
    residual: float
    converged: bool
    singular: bool = False


def solve_fixed_point(
    map_fn: Callable[[np.ndarray], np.ndarray],
    y0: np.ndarray,
    jac_fn: Callable[[np.ndarray], np.ndarray] | None = None,
    tol: float = 1e-12,
    max_iter: int = 100,
) -> SolveResult:
    """Solve ``y = map_fn(y)`` starting from ``y0``.

    ``jac_fn(y)`` must return the Jacobian of ``map_fn`` at ``y`` (used by
    the Newton fallback).  The returned residual is ``max|y - map_fn(y)|``.
    """
    y = np.asarray(y0, dtype=float).copy()
    prev_step = np.inf
    damped = False
    fy = map_fn(y)
    for iteration in range(1, max_iter + 1):
        step = fy - y
        step_norm = float(np.max(np.abs(step)))
        if step_norm <= tol:
            return SolveResult(fy.copy(), iteration, step_norm, True)
        if step_norm >= prev_step:
            damped = True
        prev_step = step_norm
        y = y + (0.5 * step if damped else step)
        fy = map_fn(y)

    if jac_fn is not None:
        eye = np.eye(y.size)
        for iteration in range(max_iter + 1, max_iter + 51):
            g = y - map_fn(y)
            res = float(np.max(np.abs(g)))
            if res <= tol:
                return SolveResult(y, iteration, res, True)
            try:
                dy = np.linalg.solve(eye - jac_fn(y), g)
            except np.linalg.LinAlgError:
                return SolveResult(y, iteration, res, False, singular=True)
            if not np.all(np.isfinite(dy)):
                return SolveResult(y, iteration, res, False, singular=True)
            y = y - dy

    res = float(np.max(np.abs(y - map_fn(y))))
    return SolveResult(y, max_iter, res, res <= tol)
