"""
Bounded Nelder-Mead simplex search.

Thin layer over `scipy.optimize.minimize(method="Nelder-Mead")` (reflection 1,
expansion 2, contraction 0.5, shrink 0.5; trial points are clipped onto the
box). Adds per-coordinate initial steps, fixed coordinates, a best-so-far
trace and a hard failure on non-finite objective values.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import Bounds, minimize

from ..core.errors import NonFiniteObjectiveError

logger = logging.getLogger(__name__)


@dataclass
class SimplexOptions:
    """Termination and initial-simplex settings.

    `initial_step` is either a scalar or one step per coordinate.

    SciPy ends the search only when both tests pass together: every vertex
    lies within `xtol` of the best one and every value lies within `ftol` of
    the best value. A single satisfied tolerance does not stop the run;
    `max_iters` bounds it either way.
    """

    max_iters: int = 200
    xtol: float = 1e-5
    ftol: float = 1e-6
    initial_step: object = 0.05


@dataclass
class SimplexResult:
    x: np.ndarray
    value: float
    iterations: int
    evaluations: int
    trace: List[float] = field(default_factory=list)


class _TrackedObjective:
    """Counts evaluations, rejects non-finite values and remembers the best point."""

    def __init__(self, objective: Callable[[np.ndarray], float], embed: Callable):
        self.objective = objective
        self.embed = embed
        self.evaluations = 0
        self.best_value = np.inf
        self.best_x: Optional[np.ndarray] = None

    def __call__(self, z: np.ndarray) -> float:
        x = self.embed(z)
        value = float(self.objective(x))
        self.evaluations += 1
        if not np.isfinite(value):
            raise NonFiniteObjectiveError(
                f"Objective returned {value} at {np.round(x, 6).tolist()}"
            )
        if value < self.best_value:
            self.best_value = value
            self.best_x = x.copy()
        return value


def nelder_mead(
    objective: Callable[[np.ndarray], float],
    x0: Sequence[float],
    bounds: Optional[Tuple[Sequence[float], Sequence[float]]] = None,
    options: Optional[SimplexOptions] = None,
    active: Optional[Sequence[bool]] = None,
) -> SimplexResult:
    """Minimize `objective` starting from `x0`.

    Args:
        objective: maps a full parameter vector to a finite scalar
        x0: start point (clipped into the bounds)
        bounds: (lower, upper) arrays, or None for an unbounded search
        options: termination settings
        active: mask of coordinates to optimize; the others stay at x0

    Returns:
        SimplexResult whose value never exceeds objective(x0).
    """
    options = options or SimplexOptions()
    x0 = np.asarray(x0, dtype=np.float64).copy()
    n = x0.size
    mask = np.ones(n, dtype=bool) if active is None else np.asarray(active, dtype=bool)
    if bounds is not None:
        lower = np.asarray(bounds[0], dtype=np.float64)
        upper = np.asarray(bounds[1], dtype=np.float64)
        x0 = np.clip(x0, lower, upper)

    def embed(z: np.ndarray) -> np.ndarray:
        x = x0.copy()
        x[mask] = z
        return x

    tracked = _TrackedObjective(objective, embed)
    start = x0[mask]
    f0 = tracked(start)
    if options.max_iters == 0 or not mask.any():
        return SimplexResult(x0, f0, 0, tracked.evaluations, [f0])

    steps = np.broadcast_to(np.asarray(options.initial_step, dtype=np.float64), (n,))[mask]
    simplex = np.vstack([start, start + np.diag(steps)])
    scipy_bounds = None
    if bounds is not None:
        scipy_bounds = Bounds(lower[mask], upper[mask])
        simplex = np.clip(simplex, lower[mask], upper[mask])
        # A vertex clipped back onto x0 would make the simplex degenerate.
        for k in range(len(steps)):
            if np.array_equal(simplex[k + 1], start):
                simplex[k + 1, k] = start[k] - steps[k]
        simplex = np.clip(simplex, lower[mask], upper[mask])

    trace = [f0]

    def record(_xk) -> None:
        trace.append(tracked.best_value)

    result = minimize(
        tracked,
        start,
        method="Nelder-Mead",
        bounds=scipy_bounds,
        callback=record,
        options={
            "maxiter": options.max_iters,
            "maxfev": max(options.max_iters * 2 * (len(steps) + 1), 1),
            "xatol": options.xtol,
            "fatol": options.ftol,
            "initial_simplex": simplex,
        },
    )
    best_x = tracked.best_x if tracked.best_x is not None else x0
    best_value = tracked.best_value
    if float(result.fun) <= best_value:
        best_x, best_value = embed(np.asarray(result.x)), float(result.fun)
    logger.debug(
        f"Nelder-Mead: f0={f0:.6g} -> {best_value:.6g} after {result.nit} iterations, "
        f"{tracked.evaluations} evaluations"
    )
    return SimplexResult(best_x, best_value, int(result.nit), tracked.evaluations, trace)
