"""Python entry points of the simulator: argument checks, encoding, seeding."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..durations import (
    Deterministic,
    Distribution,
    Erlang,
    Exponential,
    HyperExponential,
    PointMixture,
    Uniform,
)
from ..errors import DomainError, UnsupportedConfigurationError
from ..model import Mode, SystemConfig
from . import kernel as K
from .estimates import SimEstimates
from .trace import Trace

__all__ = ["SimOptions", "simulate", "structural_counters", "encode_distribution", "stream_states"]

DEFAULT_THETAS = (0.5, 1.0, 2.0)

_MODE_CODES = {
    Mode.PAUSE_RESUME: K.PAUSE_RESUME,
    Mode.REPEAT_DIFFERENT: K.REPEAT_DIFFERENT,
    Mode.REPEAT_IDENTICAL: K.REPEAT_IDENTICAL,
}


@dataclass(frozen=True)
class SimOptions:
    """Run controls.

    The run stops at the arrival that closes busy cycle number
    ``min_busy_cycles``.  If simulated time passes ``max_sim_time`` first,
    the unfinished cycle is discarded and the result is flagged partial.
    """

    seed: int = 0
    min_busy_cycles: int = 100_000
    max_sim_time: float = math.inf
    thetas: tuple[float, ...] = DEFAULT_THETAS
    trace: bool = False

    def __post_init__(self) -> None:
        if not (isinstance(self.seed, (int, np.integer)) and self.seed >= 0):
            raise DomainError(f"seed must be a nonnegative integer, got {self.seed!r}")
        if not (isinstance(self.min_busy_cycles, (int, np.integer)) and self.min_busy_cycles > 0):
            raise DomainError(f"min_busy_cycles must be a positive integer, got {self.min_busy_cycles!r}")
        if not self.max_sim_time > 0.0:
            raise DomainError(f"max_sim_time must be positive, got {self.max_sim_time!r}")
        thetas = tuple(float(t) for t in self.thetas)
        if len(thetas) != K.N_THETAS or any(not t > 0.0 for t in thetas):
            raise DomainError(f"thetas must be {K.N_THETAS} positive values, got {self.thetas!r}")
        object.__setattr__(self, "thetas", thetas)


def _cumulative(probs: tuple[float, ...]) -> list[float]:
    return list(np.cumsum(probs))


def encode_distribution(dist: Distribution) -> tuple[int, list[float]]:
    """Family code and flat parameter list understood by the kernel's sampler."""
    if isinstance(dist, Exponential):
        return K.EXP, [dist.rate]
    if isinstance(dist, Deterministic):
        return K.DET, [dist.value]
    if isinstance(dist, Erlang):
        return K.ERLANG, [float(dist.shape), dist.rate]
    if isinstance(dist, HyperExponential):
        return K.HYPEREXP, [float(len(dist.probs)), *_cumulative(dist.probs), *dist.rates]
    if isinstance(dist, Uniform):
        return K.UNIFORM, [dist.lo, dist.hi]
    if isinstance(dist, PointMixture):
        return K.POINTMIX, [float(len(dist.probs)), *_cumulative(dist.probs), *dist.values]
    raise UnsupportedConfigurationError(f"no sampler for distribution family {type(dist).__name__}")


def _encode_config(config: SystemConfig) -> tuple[np.ndarray, np.ndarray]:
    encoded = [[encode_distribution(d) for d in (c.size, c.pause, c.resume)] for c in config.classes]
    width = max(len(p) for row in encoded for _, p in row)
    codes = np.zeros((config.n, 3), np.int64)
    params = np.zeros((config.n, 3, width))
    for k, row in enumerate(encoded):
        for m, (code, p) in enumerate(row):
            codes[k, m] = code
            params[k, m, : len(p)] = p
    return codes, params


def stream_states(seed: int, streams: int) -> np.ndarray:
    """Independent xoshiro256** states, one row per stream, spawned from ``seed``."""
    children = np.random.SeedSequence(seed).spawn(streams)
    state = np.stack([c.generate_state(4, np.uint64) for c in children])
    # the all-zero state is a fixed point of the generator
    state[(state == 0).all(axis=1), 0] = 1
    return state


def simulate(config: SystemConfig, opts: SimOptions | None = None, **kwargs) -> SimEstimates:
    """Simulate the queue over whole busy cycles and return the cycle statistics.

    ``kwargs`` are forwarded to :class:`SimOptions` when ``opts`` is omitted.
    """
    if opts is None:
        opts = SimOptions(**kwargs)
    elif kwargs:
        raise TypeError("pass either opts or keyword options, not both")
    n = config.n
    codes, params = _encode_config(config)
    rng = stream_states(int(opts.seed), 3 * n)
    out = K.run(
        n,
        _MODE_CODES[config.mode],
        np.asarray(config.lambdas, dtype=float),
        codes,
        params,
        rng,
        int(opts.min_busy_cycles),
        float(opts.max_sim_time),
        np.asarray(opts.thetas),
        K.denominator_columns(n),
        bool(opts.trace),
    )
    sums, squares, cross, cycles, finished, end_time, in_system, hist, *trace = out
    return SimEstimates(
        n=n,
        thetas=opts.thetas,
        cycles=int(cycles),
        sums=sums,
        squares=squares,
        cross=cross,
        link_hist=hist,
        partial=not finished,
        end_time=float(end_time),
        final_in_system=int(in_system),
        seed=int(opts.seed),
        trace=Trace(*trace) if opts.trace else None,
    )


def structural_counters(config: SystemConfig, opts: SimOptions | None = None, **kwargs) -> SimEstimates:
    """Same run as :func:`simulate`; the per-job counters (R, A, links) are always recorded.

    Use :meth:`SimEstimates.arrival_rate_during`, :meth:`SimEstimates.mean_effective_size`
    and :meth:`SimEstimates.link_histogram` on the result.
    """
    return simulate(config, opts, **kwargs)
