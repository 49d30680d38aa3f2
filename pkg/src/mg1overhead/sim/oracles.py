"""Single-job Monte-Carlo oracles for joint transforms.

Each oracle simulates one duration (an overhead chain, or the effective
service of one class-k job) against Poisson arrivals, records the
duration and the per-class arrival counts during it, and estimates
``E[exp(-theta R) prod_i z_i^A_i]`` with its standard error.  Nothing here
uses the analytic transforms, so they serve as independent checks.

Vectorised over jobs with numpy; class-<k arrivals are generated as one
merged stream and split into classes multinomially at the end.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import DomainError
from ..model import Mode, SystemConfig
from .estimates import Estimate

__all__ = ["JointSample", "sample_chains", "sample_jobs"]


@dataclass(frozen=True)
class JointSample:
    """Durations ``r`` (shape m) and arrival counts ``a`` (shape m x n)."""

    r: np.ndarray
    a: np.ndarray

    def transform(self, theta: float, z: Sequence[float]) -> Estimate:
        z = np.asarray(z, dtype=float)
        if z.shape != (self.a.shape[1],):
            raise DomainError(f"z must have length {self.a.shape[1]}")
        with np.errstate(divide="ignore"):
            logz = np.where(z > 0.0, np.log(np.where(z > 0.0, z, 1.0)), -np.inf)
        expo = -theta * self.r + np.where(self.a > 0, self.a * logz, 0.0).sum(axis=1)
        vals = np.exp(expo)
        return Estimate(float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(vals.size)))

    def mean_duration(self) -> Estimate:
        return Estimate(float(self.r.mean()), float(self.r.std(ddof=1) / np.sqrt(self.r.size)))


def _split_higher(gen: np.random.Generator, counts: np.ndarray, config: SystemConfig, k: int) -> np.ndarray:
    """Split merged class-<k arrival counts into per-class columns."""
    lam = np.asarray(config.lambdas[:k])
    return gen.multinomial(counts, lam / lam.sum())


def _finish(gen: np.random.Generator, r: np.ndarray, higher: np.ndarray, config: SystemConfig, k: int) -> JointSample:
    """Attach class >= k arrivals, which are Poisson given the duration."""
    m = r.size
    a = np.zeros((m, config.n), dtype=np.int64)
    if k > 0:
        a[:, :k] = higher
    for i in range(k, config.n):
        a[:, i] = gen.poisson(config.lambdas[i] * r)
    return JointSample(r, a)


def _run_chains(gen: np.random.Generator, config: SystemConfig, k: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Simulate m chains link by link; return lengths and merged class-<k arrival counts."""
    spec = config.classes[k]
    lam_lt = config.lam_below(k)
    length = np.zeros(m)
    arrivals = np.zeros(m, dtype=np.int64)
    active = np.arange(m)
    while active.size:
        c = spec.pause.sample_array(gen, active.size)
        d = spec.resume.sample_array(gen, active.size)
        in_pause = gen.poisson(lam_lt * c)
        in_resume = gen.poisson(lam_lt * d)
        length[active] += c + d
        arrivals[active] += in_pause + in_resume
        active = active[in_resume > 0]
    return length, arrivals


def sample_chains(config: SystemConfig, k: int, m: int, seed: int = 0) -> JointSample:
    """m independent class-k overhead chains, each starting at a pause."""
    config.check_class(k)
    if config.lam_below(k) == 0.0:
        raise DomainError("class k is never preempted, so it has no overhead chains")
    gen = np.random.default_rng(seed)
    length, arrivals = _run_chains(gen, config, k, m)
    return _finish(gen, length, _split_higher(gen, arrivals, config, k), config, k)


def sample_jobs(config: SystemConfig, k: int, m: int, seed: int = 0) -> JointSample:
    """m independent class-k jobs under ``config.mode``, each alone among class >= k."""
    config.check_class(k)
    gen = np.random.default_rng(seed)
    spec = config.classes[k]
    lam_lt = config.lam_below(k)
    size = spec.size.sample_array(gen, m)
    if lam_lt == 0.0:
        return _finish(gen, size, np.zeros((m, 0), dtype=np.int64), config, k)

    if config.mode is Mode.PAUSE_RESUME:
        # one chain per class-<k arrival during original service
        preempts = gen.poisson(lam_lt * size)
        total = int(preempts.sum())
        length, arrivals = _run_chains(gen, config, k, total)
        owner = np.repeat(np.arange(m), preempts)
        r = size + np.bincount(owner, weights=length, minlength=m)
        merged = preempts + np.bincount(owner, weights=arrivals, minlength=m).astype(np.int64)
        return _finish(gen, r, _split_higher(gen, merged, config, k), config, k)

    # repeat modes: each attempt runs until done or the first class-<k arrival
    r = np.zeros(m)
    preempts = np.zeros(m, dtype=np.int64)
    need = size.copy()
    active = np.arange(m)
    while active.size:
        gap = gen.exponential(1.0 / lam_lt, active.size)
        done = need[active] <= gap
        r[active] += np.where(done, need[active], gap)
        failed = active[~done]
        preempts[failed] += 1
        if config.mode is Mode.REPEAT_DIFFERENT:
            need[failed] = spec.size.sample_array(gen, failed.size)
        active = failed
    return _finish(gen, r, _split_higher(gen, preempts, config, k), config, k)
