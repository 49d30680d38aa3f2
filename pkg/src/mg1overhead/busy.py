"""Class-restricted busy periods: transform fixed point, means, excess transforms.

``level`` selects which arrivals spawn further work: a level-``l`` busy
period admits arrivals of classes ``0 .. l-1`` only, so ``level = 0`` is
just the initiating work and ``level = n`` is the full busy period.

The transform vector ``b`` (``b_i`` = transform of the level-``l`` busy
period started by one class-i job) is the least nonnegative solution of
``b_i = J_i(theta, b)`` for ``i < l`` with ``b_i = 1`` otherwise.  It is
computed by plain monotone iteration from the depth-zero truncation,
which is what guarantees convergence to the *least* solution; no
acceleration is applied.

Internally the iteration runs on ``u = 1 - b`` with complement kernels, so
``1 - B(theta)`` keeps full relative precision at small ``theta``.  Excess
transforms and moment extraction need exactly that quantity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConvergenceError, DomainError, ModelError
from .loads import load_profile
from .model import SystemConfig
from .sajd import SAJD, job_complement_kernel

__all__ = [
    "BusyFixedPoint",
    "BusySolver",
    "MonotonicityError",
    "solve_busy_fixed_point",
    "busy_transform",
    "busy_mean",
    "excess_transform",
]

# relative floating-point allowance when checking that iterates never decrease
_MONOTONE_SLACK = 1e-14
# steps this small relative to the iterate are rounding noise
_NOISE = 4.0 * 2.0**-52
# admitted loads this close to 1 count as critical at theta = 0
_CRITICAL_BAND = 1e-12

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 1_000_000


class MonotonicityError(ModelError):
    """A fixed-point iterate decreased, which the least-solution argument forbids."""


@dataclass(frozen=True)
class BusyFixedPoint:
    theta: float
    level: int
    b: tuple[float, ...]
    iterations: int
    residual: float
    min_increment: float
    u: tuple[float, ...] = ()


class BusySolver:
    """Busy-period fixed points for one config, memoised per ``(level, theta)``.

    One solver per analysis session; the memo is not locked, so share a
    solver across threads only for reads after it has been filled.
    """

    def __init__(
        self,
        config: SystemConfig,
        tol: float = DEFAULT_TOL,
        max_iter: int = DEFAULT_MAX_ITER,
        rtol: float = 0.0,
    ) -> None:
        self.config = config
        self.tol = tol
        self.rtol = rtol
        self.max_iter = max_iter
        self._kernel = job_complement_kernel(config)
        self._memo: dict[tuple[int, float], BusyFixedPoint] = {}

    def _check_level(self, level: int) -> int:
        if not (isinstance(level, (int, np.integer)) and 0 <= level <= self.config.n):
            raise DomainError(f"level must be in [0, {self.config.n}], got {level!r}")
        return int(level)

    def solve(self, level: int, theta: float) -> BusyFixedPoint:
        level = self._check_level(level)
        theta = float(theta)
        if not theta >= 0.0:
            raise DomainError(f"theta must be >= 0, got {theta!r}")
        key = (level, theta)
        hit = self._memo.get(key)
        if hit is None:
            hit = self._memo[key] = self._iterate(level, theta)
        return hit

    def _iterate(self, level: int, theta: float) -> BusyFixedPoint:
        n, kernel = self.config.n, self._kernel
        pinned = [0.0] * (n - level)
        if level == 0:
            return BusyFixedPoint(theta, 0, (1.0,) * n, 0, 0.0, 0.0, tuple(pinned))
        # u = 1 - b; the depth-zero truncation has every admitted z set to 0
        u = [kernel(i, theta, [1.0] * level + pinned) for i in range(level)] + pinned
        if theta == 0.0 and abs(load_profile(self.config).rho_below(level) - 1.0) <= _CRITICAL_BAND:
            raise ConvergenceError(f"critical load at level {level}: iteration converges sublinearly", math.inf, 0)
        min_increment = math.inf
        residual = previous = math.inf
        for it in range(1, self.max_iter + 1):
            new = [kernel(i, theta, u) for i in range(level)] + pinned
            rises = [new[i] - u[i] for i in range(level)]
            scale = max(u[:level])
            worst = max(rises)
            if worst > _MONOTONE_SLACK * scale:
                raise MonotonicityError(
                    f"iterate decreased by {worst:.3e} at iteration {it} (level={level}, theta={theta})"
                )
            min_increment = min(min_increment, -worst)
            residual = max(abs(r) for r in rises)
            ratio = residual / previous if previous > 0.0 else 0.0
            previous = residual
            u = new
            target = max(self.tol, self.rtol * scale)
            if residual <= _NOISE * scale or (
                (residual < self.tol or residual <= self.rtol * scale)
                # the step is small; also require the geometric tail of later steps to be small
                and ratio < 1.0
                and residual * ratio / (1.0 - ratio) < target
            ):
                b = tuple(1.0 - v for v in u)
                return BusyFixedPoint(theta, level, b, it, residual, min_increment, tuple(u))
        raise ConvergenceError(f"busy fixed point did not converge (level={level}, theta={theta})", residual, self.max_iter)

    def transform(self, sajd: SAJD, level: int, theta: float) -> float:
        """Transform of the level-``level`` busy period started by ``sajd``."""
        return sajd._transform(float(theta), self.solve(level, theta).b)

    def complement(self, sajd: SAJD, level: int, theta: float) -> float:
        """``1 - transform``, accurate for small ``theta``."""
        return sajd._complement(float(theta), self.solve(level, theta).u)

    def mean(self, sajd: SAJD, level: int) -> float:
        """Mean busy period length; ``math.inf`` when the admitted load is >= 1."""
        level = self._check_level(level)
        prof = load_profile(self.config)
        rho_lt = prof.rho_below(level)
        if rho_lt >= 1.0:
            return math.inf
        spawned = sum(sajd.mean_arrivals(j) * prof.effective_size[j] for j in range(level))
        return sajd.mean + spawned / (1.0 - rho_lt)


def solve_busy_fixed_point(
    config: SystemConfig,
    level: int,
    theta: float,
    *,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> BusyFixedPoint:
    return BusySolver(config, tol, max_iter).solve(level, theta)


def busy_transform(sajd: SAJD, config: SystemConfig, level: int, theta: float, solver: BusySolver | None = None) -> float:
    return (solver or BusySolver(config)).transform(sajd, level, theta)


def busy_mean(sajd: SAJD, config: SystemConfig, level: int) -> float:
    return BusySolver(config).mean(sajd, level)


# below this value of theta * mean the direct excess formula loses digits
_SMALL_ARG = 1e-6


def excess_transform(
    base: Callable[[float], float],
    mean: float,
    theta: float,
    complement: Callable[[float], float] | None = None,
) -> float:
    """Transform of the excess (stationary residual) of a law: ``(1 - V(theta)) / (theta E[V])``.

    Pass ``complement`` (``theta -> 1 - V(theta)`` computed without
    cancellation) whenever it is available; it makes the quotient exact to
    rounding at every ``theta``.  Without it, ``theta * mean`` below 1e-6
    switches to a cubic fitted to ``V`` at three nodes spaced 1e-3 / mean
    apart, which replaces the cancelling difference by a finite-difference
    slope.
    """
    if not (mean > 0.0) or math.isinf(mean):
        raise DomainError(f"excess needs a positive finite mean, got {mean!r}")
    theta = float(theta)
    if not theta >= 0.0:
        raise DomainError(f"theta must be >= 0, got {theta!r}")
    if theta == 0.0:
        return 1.0
    if complement is not None:
        return complement(theta) / (theta * mean)
    if theta * mean >= _SMALL_ARG:
        return (1.0 - base(theta)) / (theta * mean)
    spacing = 1e-3 / mean
    xs = np.array([spacing, 2 * spacing, 3 * spacing])
    drops = np.array([base(x) - 1.0 for x in xs])
    c1, c2, c3 = np.linalg.solve(np.vstack([xs, xs**2, xs**3]).T, drops)
    return float(-(c1 + c2 * theta + c3 * theta * theta) / mean)
