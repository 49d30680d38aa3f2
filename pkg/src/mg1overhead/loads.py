"""Overhead loads, effective loads and the stability verdict."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import UnsupportedConfigurationError
from .model import Mode, SystemConfig
from .numdiff import forward_derivative

__all__ = ["LoadProfile", "StabilityReport", "overhead_loads", "load_profile", "stability_report"]


@dataclass(frozen=True)
class LoadProfile:
    """Per-class loads.  ``rho[k] = sigma[k] + gamma[k] + delta[k] = lam_k E[R_k]``."""

    sigma: tuple[float, ...]
    gamma: tuple[float, ...]
    delta: tuple[float, ...]
    rho: tuple[float, ...]
    effective_size: tuple[float, ...]
    pause_per_job: tuple[float, ...]
    resume_per_job: tuple[float, ...]

    @property
    def total(self) -> float:
        return float(sum(self.rho))

    def rho_below(self, k: int) -> float:
        return float(sum(self.rho[:k]))

    def rho_upto(self, k: int) -> float:
        return float(sum(self.rho[: k + 1]))

    def to_dict(self) -> dict:
        return {
            "sigma": list(self.sigma),
            "gamma": list(self.gamma),
            "delta": list(self.delta),
            "rho": list(self.rho),
            "effective_size": list(self.effective_size),
            "rho_total": self.total,
        }


@dataclass(frozen=True)
class StabilityReport:
    rho: float
    stable: bool
    mean_offspring_matrix: np.ndarray
    spectral_radius: float

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "stable": self.stable,
            "spectral_radius": self.spectral_radius,
            "mean_offspring_matrix": self.mean_offspring_matrix.tolist(),
        }


def overhead_loads(config: SystemConfig, k: int) -> tuple[float, float]:
    """Mean total pause and resume time per class-k job, ``(E[C*_k], E[D*_k])``.

    Each class-<k arrival during original service opens one overhead chain;
    a chain has geometrically many links, ending with probability
    ``D_k~(lam_{<k})`` per resume.
    """
    if config.mode is not Mode.PAUSE_RESUME:
        raise UnsupportedConfigurationError("overhead loads exist only in pause-resume mode")
    config.check_class(k)
    lam_lt = config.lam_below(k)
    if lam_lt == 0.0:
        return 0.0, 0.0
    spec = config.classes[k]
    chains = lam_lt * spec.size.mean
    links = 1.0 / spec.resume.lst(lam_lt)
    return chains * links * spec.pause.mean, chains * links * spec.resume.mean


def _repeat_effective_size(config: SystemConfig, k: int) -> float:
    """``-d/dtheta J_k(theta, 1)`` at 0, from the complement ``1 - J_k`` so the stencil does not cancel."""
    from .sajd import job_sajd

    job = job_sajd(config, k)
    zeros = [0.0] * config.n

    def f(theta: float) -> float:
        return job._complement(theta, zeros)

    h0 = 1e-7 / config.classes[k].size.mean
    crude = f(h0) / h0
    return float(forward_derivative(f, 1, 1e-4 / crude, levels=3).value)


@lru_cache(maxsize=512)
def load_profile(config: SystemConfig) -> LoadProfile:
    sigma, gamma, delta, rho, eff, cstar, dstar = ([] for _ in range(7))
    for k, spec in enumerate(config.classes):
        s = spec.lam * spec.size.mean
        if config.mode is Mode.PAUSE_RESUME:
            c, d = overhead_loads(config, k)
            r = spec.size.mean + c + d
        else:
            c = d = 0.0
            r = _repeat_effective_size(config, k)
        sigma.append(s)
        gamma.append(spec.lam * c)
        delta.append(spec.lam * d)
        rho.append(spec.lam * r)
        eff.append(r)
        cstar.append(c)
        dstar.append(d)
    return LoadProfile(*(tuple(v) for v in (sigma, gamma, delta, rho, eff, cstar, dstar)))


def _power_iteration(m: np.ndarray, tol: float = 1e-15, max_iter: int = 10_000) -> float:
    v = np.ones(m.shape[0])
    estimate = 0.0
    for _ in range(max_iter):
        w = m @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        new = float(v @ w / (v @ v))
        v = w / norm
        if abs(new - estimate) <= tol * max(1.0, abs(new)):
            return new
        estimate = new
    return estimate


def stability_report(config: SystemConfig) -> StabilityReport:
    """Mean offspring matrix ``M[i, j] = lam_j E[R_i]`` and its spectral radius.

    ``M`` is rank one, so its only nonzero eigenvalue is the total effective
    load; the power iteration is kept so a general ``M`` would go through
    the same path.
    """
    prof = load_profile(config)
    m = np.outer(np.asarray(prof.effective_size), np.asarray(config.lambdas))
    rho = prof.total
    return StabilityReport(rho=rho, stable=rho < 1.0, mean_offspring_matrix=m, spectral_radius=_power_iteration(m))
