"""One-sided finite differences at zero with Richardson extrapolation.

Transforms in this package are only defined for ``theta >= 0``, so every
stencil here looks forward from the origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

__all__ = ["ForwardDerivative", "forward_derivative", "forward_weights"]


@lru_cache(maxsize=None)
def forward_weights(order: int, npoints: int) -> tuple[float, ...]:
    """Weights ``w`` with ``f^(order)(0) ~= sum_j w_j f(j h) / h**order`` on nodes 0..npoints-1."""
    if npoints <= order:
        raise ValueError("need more nodes than the derivative order")
    x = np.arange(npoints, dtype=float)
    vander = np.vander(x, npoints, increasing=True).T
    rhs = np.zeros(npoints)
    rhs[order] = math.factorial(order)
    return tuple(np.linalg.solve(vander, rhs))


@dataclass(frozen=True)
class ForwardDerivative:
    value: float
    error: float
    levels: tuple[float, ...]


def forward_derivative(
    f: Callable[[float], float],
    order: int,
    h: float,
    levels: int = 3,
    accuracy: int = 2,
) -> ForwardDerivative:
    """Estimate ``f^(order)(0)`` from forward stencils of spacing h, h/2, ... .

    ``accuracy`` extra nodes give a base stencil with error O(h**accuracy);
    each Richardson level removes one more power of h.  ``error`` is the
    change made by the last extrapolation step, a conservative estimate of
    the remaining error.
    """
    weights = forward_weights(order, order + accuracy)
    memo: dict[float, float] = {}

    def value_at(x: float) -> float:
        if x not in memo:
            memo[x] = f(x)
        return memo[x]

    raw = []
    for i in range(levels):
        step = h / 2**i
        raw.append(float(sum(w * value_at(j * step) for j, w in enumerate(weights))) / step**order)

    table = [list(raw)]
    for m in range(1, levels):
        factor = 2.0 ** (accuracy + m - 1) - 1.0
        prev = table[-1]
        table.append([prev[i] + (prev[i] - prev[i - 1]) / factor for i in range(1, len(prev))])
    best = table[-1][-1]
    if levels > 1:
        error = abs(best - table[-2][-1])
    else:
        error = math.inf
    return ForwardDerivative(best, error, tuple(raw))
