"""Shared fixtures: canonical configs, random config generators, independent oracles."""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq

from mg1overhead import (
    ClassSpec,
    Deterministic,
    Erlang,
    Exponential,
    HyperExponential,
    Mode,
    PointMixture,
    SystemConfig,
    Uniform,
)
from mg1overhead.loads import load_profile

# the running two-class example: class 2 pays Det(0.1) pauses and Exp(10) resumes
TWO_CLASS = SystemConfig(
    (
        ClassSpec(0.2, Exponential(1.0)),
        ClassSpec(0.5, Exponential(1.0), Deterministic(0.1), Exponential(10.0)),
    )
)
MM1 = SystemConfig((ClassSpec(0.5, Exponential(1.0)),))
PRIORITY_MM1 = SystemConfig((ClassSpec(0.25, Exponential(1.0)), ClassSpec(0.25, Exponential(1.0))))


def random_size(rng: np.random.Generator, mean: float):
    kind = rng.integers(6)
    if kind == 0:
        return Exponential(1.0 / mean)
    if kind == 1:
        shape = int(rng.integers(2, 4))
        return Erlang(shape, shape / mean)
    if kind == 2:
        p = float(rng.uniform(0.2, 0.8))
        m1 = float(rng.uniform(0.3, 0.9)) * mean
        m2 = (mean - p * m1) / (1.0 - p)
        return HyperExponential((p, 1.0 - p), (1.0 / m1, 1.0 / m2))
    if kind == 3:
        return Uniform(0.0, 2.0 * mean)
    if kind == 4:
        return Deterministic(mean)
    lo = float(rng.uniform(0.2, 0.8)) * mean
    p = 0.5
    return PointMixture((lo, 2.0 * mean - lo), (p, 1.0 - p))


def random_overhead(rng: np.random.Generator, mean: float):
    kind = rng.integers(4)
    if kind == 0:
        return Deterministic(mean)
    if kind == 1:
        return Exponential(1.0 / mean)
    if kind == 2:
        return Erlang(2, 2.0 / mean)
    return Uniform(0.0, 2.0 * mean)


def _scale_to_load(classes: list[ClassSpec], mode: Mode, rho: float) -> SystemConfig:
    base = SystemConfig(tuple(classes), mode)

    def gap(f: float) -> float:
        return load_profile(base.scaled(f)).total - rho

    hi = 1.0
    while gap(hi) < 0.0:
        hi *= 2.0
    factor = brentq(gap, 1e-9, hi, xtol=1e-14, rtol=1e-14)
    return base.scaled(factor)


def random_config(
    seed: int,
    n: int | None = None,
    rho: float | None = None,
    overhead: bool = True,
    max_classes: int = 4,
    overhead_mean: tuple[float, float] = (0.02, 0.3),
    rho_range: tuple[float, float] = (0.3, 0.9),
) -> SystemConfig:
    """A random pause-resume config with total effective load ``rho``."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, max_classes + 1)) if n is None else n
    rho = float(rng.uniform(*rho_range)) if rho is None else rho
    classes = []
    for _ in range(n):
        size = random_size(rng, float(rng.uniform(0.5, 2.0)))
        lam = float(rng.uniform(0.2, 1.0))
        if overhead:
            pause = random_overhead(rng, float(rng.uniform(*overhead_mean)))
            resume = random_overhead(rng, float(rng.uniform(*overhead_mean)))
        else:
            pause = resume = Deterministic(0.0)
        classes.append(ClassSpec(lam, size, pause, resume))
    return _scale_to_load(classes, Mode.PAUSE_RESUME, rho)


# -- classical preemptive-resume priority M/G/1 (zero overhead) ------------------


def _mix_lst(config: SystemConfig, hi: int, s: float) -> float:
    lam = config.lambdas[:hi]
    return sum(l * c.size.lst(s) for l, c in zip(lam, config.classes[:hi])) / sum(lam)


def classical_busy(config: SystemConfig, k: int, theta: float) -> float:
    """Transform of an M/G/1 busy period of classes < k, as the root of b = S_mix(theta + lam (1 - b))."""
    lam = config.lam_below(k)
    if lam == 0.0:
        return 1.0
    if theta == 0.0:
        return 1.0
    return brentq(lambda b: b - _mix_lst(config, k, theta + lam * (1.0 - b)), 0.0, 1.0, xtol=1e-16, rtol=1e-15)


def classical_response_transform(config: SystemConfig, k: int, theta: float) -> float:
    """Preemptive-resume priority response transform: a class-<k busy period started by
    the stationary class-<=k workload plus the job's own size."""
    lam_lt = config.lam_below(k)
    eta = theta + lam_lt * (1.0 - classical_busy(config, k, theta))
    lam_le = config.lam_below(k + 1)
    rho_le = sum(c.lam * c.size.mean for c in config.classes[: k + 1])
    if eta == 0.0:
        workload = 1.0
    else:
        workload = (1.0 - rho_le) * eta / (eta - lam_le * (1.0 - _mix_lst(config, k + 1, eta)))
    return workload * config.classes[k].size.lst(eta)


def classical_mean_response(config: SystemConfig, k: int) -> float:
    """Textbook mean response of class k under preemptive-resume priority."""
    rho_lt = sum(c.lam * c.size.mean for c in config.classes[:k])
    rho_le = rho_lt + config.classes[k].lam * config.classes[k].size.mean
    residual = sum(c.lam * c.size.second_moment for c in config.classes[: k + 1]) / 2.0
    return config.classes[k].size.mean / (1.0 - rho_lt) + residual / ((1.0 - rho_lt) * (1.0 - rho_le))


def z_line(name: str, est, target: float) -> str:
    return f"{name}: sim={est.value:.6g} se={est.se:.3g} analytic={target:.6g} z={est.z_score(target):+.2f}"


def close(a: float, b: float, rel: float = 0.0, abs_: float = 0.0) -> bool:
    return math.isclose(a, b, rel_tol=rel, abs_tol=abs_)
