"""Regenerative estimates assembled from per-busy-cycle feature sums.

Every quantity reported here is a ratio ``sum Y / sum Z`` of two per-cycle
totals.  Cycles are i.i.d., so the delta method gives the standard error
``sqrt(sum (Y - r Z)^2) / sum Z``, which expands into the accumulated
sums of squares and cross-products.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernel as K

__all__ = ["Estimate", "SimEstimates"]


@dataclass(frozen=True)
class Estimate:
    value: float
    se: float

    def z_score(self, target: float) -> float:
        """``(value - target) / se``; 0 when both agree exactly, inf when se is 0 and they differ."""
        diff = self.value - target
        if self.se > 0.0:
            return diff / self.se
        return 0.0 if diff == 0.0 else math.copysign(math.inf, diff)

    def within(self, target: float, n_se: float = 3.0) -> bool:
        return abs(self.z_score(target)) <= n_se

    def to_dict(self) -> dict:
        return {"value": self.value, "se": self.se}


_TIME_KINDS = {"original": K.TIME_SERVE, "pause": K.TIME_PAUSE, "resume": K.TIME_RESUME}


@dataclass
class SimEstimates:
    """Sufficient statistics of a simulation run plus named estimators.

    ``sums``, ``squares`` and ``cross`` hold the per-cycle feature totals,
    their squares and their products with the denominator columns;
    merging two runs just adds them.
    """

    n: int
    thetas: tuple[float, ...]
    cycles: int
    sums: np.ndarray
    squares: np.ndarray
    cross: np.ndarray
    link_hist: np.ndarray
    partial: bool = False
    end_time: float = 0.0
    final_in_system: int = 0
    seed: int | None = None
    trace: object = field(default=None, repr=False)

    def __post_init__(self) -> None:
        dcols = K.denominator_columns(self.n)
        self._dpos = {int(c): i for i, c in enumerate(dcols)}

    # -- raw ratio machinery --------------------------------------------------

    def _base(self, k: int) -> int:
        if not 0 <= k < self.n:
            raise IndexError(f"class index {k} out of range for n={self.n}")
        return K.class_base(self.n, k)

    def ratio(self, y: int, z: int) -> Estimate:
        """Ratio estimate of column ``y`` over denominator column ``z``."""
        d = self._dpos[z]
        sy, sz = self.sums[y], self.sums[z]
        if sz == 0.0:
            return Estimate(math.nan, math.nan)
        r = sy / sz
        syz = self.cross[y, d]
        szz = self.cross[z, d]
        spread = self.squares[y] - 2.0 * r * syz + r * r * szz
        return Estimate(float(r), float(math.sqrt(max(spread, 0.0)) / sz))

    def _theta_index(self, theta: float) -> int:
        for i, t in enumerate(self.thetas):
            if math.isclose(t, theta, rel_tol=1e-12):
                return i
        raise KeyError(f"theta={theta} was not tapped; available {self.thetas}")

    # -- busy cycles ----------------------------------------------------------

    @property
    def total_time(self) -> float:
        return float(self.sums[K.CYCLE_LEN])

    def mean_cycle_length(self) -> Estimate:
        return self.ratio(K.CYCLE_LEN, K.COUNT)

    def mean_busy_period(self) -> Estimate:
        return self.ratio(K.BUSY_LEN, K.COUNT)

    def busy_lst(self, theta: float) -> Estimate:
        """Empirical ``E[exp(-theta B)]`` over full busy periods."""
        return self.ratio(K.BUSY_LST + self._theta_index(theta), K.COUNT)

    def idle_fraction(self) -> Estimate:
        # idle = cycle - busy, so its ratio SE follows from the busy column
        busy = self.busy_fraction()
        return Estimate(1.0 - busy.value, busy.se)

    def busy_fraction(self) -> Estimate:
        return self.ratio(K.BUSY_LEN, K.CYCLE_LEN)

    # -- per class ------------------------------------------------------------

    def completions(self, k: int) -> int:
        return int(round(self.sums[self._base(k) + K.DONE]))

    def response_mean(self, k: int) -> Estimate:
        b = self._base(k)
        return self.ratio(b + K.SUM_T, b + K.DONE)

    def response_second_moment(self, k: int) -> Estimate:
        b = self._base(k)
        return self.ratio(b + K.SUM_T2, b + K.DONE)

    def time_fraction(self, k: int, kind: str) -> Estimate:
        """Long-run fraction of time the server spends on class k in ``kind`` (original, pause, resume)."""
        return self.ratio(self._base(k) + _TIME_KINDS[kind], K.CYCLE_LEN)

    def mean_size(self, k: int) -> Estimate:
        b = self._base(k)
        return self.ratio(b + K.SUM_S, b + K.DONE)

    def mean_effective_size(self, k: int) -> Estimate:
        b = self._base(k)
        return self.ratio(b + K.SUM_R, b + K.DONE)

    def mean_pause_per_job(self, k: int) -> Estimate:
        b = self._base(k)
        return self.ratio(b + K.SUM_C, b + K.DONE)

    def mean_resume_per_job(self, k: int) -> Estimate:
        b = self._base(k)
        return self.ratio(b + K.SUM_D, b + K.DONE)

    def arrivals_per_job(self, i: int, j: int) -> Estimate:
        """``A_hat[i, j]``: mean class-j arrivals during a class-i job's effective service."""
        b = self._base(i)
        self._base(j)
        return self.ratio(b + K.ARRIVALS + j, b + K.DONE)

    def arrival_rate_during(self, i: int, j: int) -> Estimate:
        """``A_hat[i, j] / R_hat[i]``, which should equal ``lambda_j``."""
        b = self._base(i)
        self._base(j)
        return self.ratio(b + K.ARRIVALS + j, b + K.SUM_R)

    def chains(self, k: int) -> int:
        return int(round(self.sums[self._base(k) + K.CHAINS]))

    def links(self, k: int) -> int:
        return int(round(self.sums[self._base(k) + K.LINKS]))

    def mean_links_per_chain(self, k: int) -> float:
        c = self.chains(k)
        return self.links(k) / c if c else math.nan

    def link_success(self, k: int) -> Estimate:
        """Fraction of resumes that succeed: chains over links."""
        b = self._base(k)
        return self.ratio(b + K.CHAINS, b + K.LINKS)

    def link_histogram(self, k: int) -> np.ndarray:
        """Counts of chains by link number; the last bin collects longer chains."""
        self._base(k)
        return self.link_hist[k].copy()

    def early_arrivals(self, k: int) -> int:
        return int(round(self.sums[self._base(k) + K.EARLY]))

    def early_mean(self, k: int) -> Estimate:
        b = self._base(k)
        return self.ratio(b + K.SUM_X, b + K.EARLY)

    def early_second_moment(self, k: int) -> Estimate:
        b = self._base(k)
        return self.ratio(b + K.SUM_X2, b + K.EARLY)

    def early_lst(self, k: int, theta: float) -> Estimate:
        """Empirical ``E[exp(-theta X)]`` over early class-k arrivals."""
        b = self._base(k)
        return self.ratio(b + K.X_LST + self._theta_index(theta), b + K.EARLY)

    # -- combination and output -----------------------------------------------

    def merge(self, other: SimEstimates) -> SimEstimates:
        """Pool two independent runs of the same system."""
        if other.n != self.n or other.thetas != self.thetas:
            raise ValueError("can only merge runs of the same system and theta taps")
        return SimEstimates(
            n=self.n,
            thetas=self.thetas,
            cycles=self.cycles + other.cycles,
            sums=self.sums + other.sums,
            squares=self.squares + other.squares,
            cross=self.cross + other.cross,
            link_hist=self.link_hist + other.link_hist,
            partial=self.partial or other.partial,
            end_time=self.end_time + other.end_time,
            final_in_system=self.final_in_system + other.final_in_system,
            seed=None,
        )

    def to_dict(self) -> dict:
        out: dict = {
            "cycles": self.cycles,
            "partial": self.partial,
            "end_time": self.end_time,
            "final_in_system": self.final_in_system,
            "mean_cycle_length": self.mean_cycle_length().to_dict(),
            "mean_busy_period": self.mean_busy_period().to_dict(),
            "idle_fraction": self.idle_fraction().to_dict(),
            "busy_lst": {str(t): self.busy_lst(t).to_dict() for t in self.thetas},
            "classes": [],
        }
        if self.seed is not None:
            out["seed"] = self.seed
        for k in range(self.n):
            out["classes"].append(
                {
                    "completions": self.completions(k),
                    "response_mean": self.response_mean(k).to_dict(),
                    "response_second_moment": self.response_second_moment(k).to_dict(),
                    "time_fraction": {kind: self.time_fraction(k, kind).to_dict() for kind in _TIME_KINDS},
                    "mean_effective_size": self.mean_effective_size(k).to_dict(),
                    "mean_pause_per_job": self.mean_pause_per_job(k).to_dict(),
                    "mean_resume_per_job": self.mean_resume_per_job(k).to_dict(),
                    "arrivals_per_job": [self.arrivals_per_job(k, j).to_dict() for j in range(self.n)],
                    "chains": self.chains(k),
                    "links": self.links(k),
                    "mean_links_per_chain": _json_float(self.mean_links_per_chain(k)),
                    "early_arrivals": self.early_arrivals(k),
                    "early_mean": self.early_mean(k).to_dict(),
                    "early_lst": {str(t): self.early_lst(k, t).to_dict() for t in self.thetas},
                }
            )
        return _clean(out)


def _json_float(x: float) -> float | None:
    return None if math.isnan(x) or math.isinf(x) else x


def _clean(obj):
    """Replace NaN/inf by None so the dict serialises as strict JSON."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_clean(v) for v in obj]
    if isinstance(obj, float):
        return _json_float(obj)
    return obj
