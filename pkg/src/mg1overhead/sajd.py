"""Service-arrival joint distributions (SAJDs) and their joint transforms.

An SAJD is the joint law of a duration ``R`` and the vector ``A`` of
per-class arrival counts during it.  Its joint transform is

    V(theta, z) = E[exp(-theta R) * prod_i z_i ** A_i],   theta >= 0, z in [0, 1]^n.

The kinds used here are: the standard Poisson SAJD of a duration law, the
job joint distribution of a class (one formula per preemption mode), and
pointwise sums of independent SAJDs, whose transform is the product of the
parts' transforms.

All arguments ``z`` are restricted to the unit box; the busy-period fixed
point never leaves it.
"""

from __future__ import annotations

import abc
import math
from typing import Protocol, Sequence

from .durations import Deterministic, PointMixture
from .errors import DomainError, UnsupportedConfigurationError
from .model import Mode, SystemConfig

__all__ = [
    "DurationLaw",
    "SAJD",
    "PoissonOf",
    "JobJoint",
    "RepeatDifferentJoint",
    "RepeatIdenticalJoint",
    "Sum",
    "job_sajd",
    "poisson_joint_transform",
    "overhead_chain_transform",
    "job_joint_transform",
    "repeat_different_jjt",
    "repeat_identical_jjt",
    "sajd_sum_transform",
    "jjt",
    "check_args",
    "job_kernel",
    "job_complement_kernel",
]


class DurationLaw(Protocol):
    """Anything with a transform, its complement and a mean can seed a Poisson SAJD."""

    @property
    def mean(self) -> float: ...

    def lst(self, theta: float) -> float: ...

    def lst_complement(self, theta: float) -> float: ...


def check_args(config: SystemConfig, theta: float, z: Sequence[float]) -> tuple[float, list[float]]:
    theta = float(theta)
    if not theta >= 0.0:
        raise DomainError(f"theta must be >= 0, got {theta!r}")
    z = [float(v) for v in z]
    if len(z) != config.n:
        raise DomainError(f"z must have length {config.n}, got {len(z)}")
    for i, v in enumerate(z):
        if not 0.0 <= v <= 1.0:
            raise DomainError(f"z[{i}] = {v!r} lies outside [0, 1]")
    return theta, z


def _marked_rate(lams: Sequence[float], z: Sequence[float], lo: int, hi: int) -> float:
    """sum_{lo <= i < hi} lam_i (1 - z_i); zero for an empty range."""
    return sum(lams[i] * (1.0 - z[i]) for i in range(lo, hi))


def _unmarked_rate(lams: Sequence[float], z: Sequence[float], hi: int) -> float:
    """sum_{i < hi} lam_i z_i, i.e. lam_{<hi} * z_{<hi}."""
    return sum(lams[i] * z[i] for i in range(hi))


# -- raw kernels (no argument validation; used by the fixed-point loop) -----


def _chain(config: SystemConfig, k: int, theta: float, z: Sequence[float]) -> float:
    lams, n = config.lambdas, config.n
    spec = config.classes[k]
    mark_ge = _marked_rate(lams, z, k, n)
    full = theta + mark_ge + _marked_rate(lams, z, 0, k)
    # resume succeeds: no class < k arrival at all during it
    succ_arg = theta + mark_ge + config.lam_below(k)
    c_full = spec.pause.lst(full)
    d_succ = spec.resume.lst(succ_arg)
    d_full = spec.resume.lst(full)
    return c_full * d_succ / (1.0 - c_full * (d_full - d_succ))


def _job_pause_resume(config: SystemConfig, k: int, theta: float, z: Sequence[float]) -> float:
    lams, n = config.lambdas, config.n
    mark_ge = _marked_rate(lams, z, k, n)
    arg = theta + mark_ge + config.lam_below(k)
    if k > 0:
        arg -= _unmarked_rate(lams, z, k) * _chain(config, k, theta, z)
    return config.classes[k].size.lst(arg)


def _repeat_term(phi: float, unmarked: float, size_lst: float) -> float:
    if unmarked == 0.0:
        return size_lst
    return size_lst / (1.0 - unmarked / phi * (1.0 - size_lst))


def _job_repeat_different(config: SystemConfig, k: int, theta: float, z: Sequence[float]) -> float:
    lams, n = config.lambdas, config.n
    phi = theta + _marked_rate(lams, z, k, n) + config.lam_below(k)
    return _repeat_term(phi, _unmarked_rate(lams, z, k), config.classes[k].size.lst(phi))


def _size_atoms(config: SystemConfig, k: int) -> list[tuple[float, float]]:
    size = config.classes[k].size
    if isinstance(size, Deterministic):
        return [(size.value, 1.0)]
    if isinstance(size, PointMixture):
        return size.atoms()
    raise UnsupportedConfigurationError(
        f"repeat-identical needs a deterministic or point-mixture size for class {k}, "
        f"got {size.family!r}"
    )


def _job_repeat_identical(config: SystemConfig, k: int, theta: float, z: Sequence[float]) -> float:
    if config.lam_below(k) == 0.0:
        # never preempted, so the size law need not be atomic
        return _job_repeat_different(config, k, theta, z)
    lams, n = config.lambdas, config.n
    phi = theta + _marked_rate(lams, z, k, n) + config.lam_below(k)
    unmarked = _unmarked_rate(lams, z, k)
    return sum(p * _repeat_term(phi, unmarked, math.exp(-phi * s)) for s, p in _size_atoms(config, k))


# -- complement kernels --------------------------------------------------------
#
# Same transforms written for ``u = 1 - z`` and returning ``1 - J``.  Every
# subtraction that would cancel near (theta, z) = (0, 1) is rewritten as a sum
# of nonnegative terms, so results keep full relative precision there.  The
# busy-period solver and the excess transform rely on this.


def _weighted(lams: Sequence[float], u: Sequence[float], lo: int, hi: int) -> float:
    return sum(lams[i] * u[i] for i in range(lo, hi))


def _chain_complement(config: SystemConfig, k: int, theta: float, u: Sequence[float]) -> float:
    lams, n = config.lambdas, config.n
    spec = config.classes[k]
    full = theta + _weighted(lams, u, 0, n)
    # arrivals that leave z unmarked: the gap between the two resume arguments
    gap = sum(lams[i] * (1.0 - u[i]) for i in range(k))
    c = spec.pause._lst(full)
    c_comp = spec.pause._lst_drop(0.0, full)
    d_comp = spec.resume._lst_drop(0.0, full)
    den = 1.0 - c * spec.resume._lst_drop(full, gap)
    return (c_comp + c * d_comp) / den


def _job_pause_resume_complement(config: SystemConfig, k: int, theta: float, u: Sequence[float]) -> float:
    lams, n = config.lambdas, config.n
    arg = theta + _weighted(lams, u, k, n)
    if k > 0:
        oc = _chain_complement(config, k, theta, u)
        arg += sum(lams[i] * (oc + u[i] - oc * u[i]) for i in range(k))
    return config.classes[k].size._lst_drop(0.0, arg)


def _repeat_complement(phi: float, total: float, unmarked: float, size_comp: float) -> float:
    if size_comp == 0.0:
        return 0.0
    return size_comp * (total / phi) / (1.0 - unmarked / phi * size_comp)


def _repeat_rates(config: SystemConfig, k: int, theta: float, u: Sequence[float]) -> tuple[float, float, float]:
    lams, n = config.lambdas, config.n
    marked_ge = _weighted(lams, u, k, n)
    total = theta + marked_ge + _weighted(lams, u, 0, k)
    phi = theta + marked_ge + config.lam_below(k)
    unmarked = sum(lams[i] * (1.0 - u[i]) for i in range(k))
    return phi, total, unmarked


def _job_repeat_different_complement(config: SystemConfig, k: int, theta: float, u: Sequence[float]) -> float:
    phi, total, unmarked = _repeat_rates(config, k, theta, u)
    return _repeat_complement(phi, total, unmarked, config.classes[k].size._lst_drop(0.0, phi))


def _job_repeat_identical_complement(config: SystemConfig, k: int, theta: float, u: Sequence[float]) -> float:
    if config.lam_below(k) == 0.0:
        return _job_repeat_different_complement(config, k, theta, u)
    phi, total, unmarked = _repeat_rates(config, k, theta, u)
    return sum(p * _repeat_complement(phi, total, unmarked, -math.expm1(-phi * s)) for s, p in _size_atoms(config, k))


_COMPLEMENT_KERNELS = {
    Mode.PAUSE_RESUME: _job_pause_resume_complement,
    Mode.REPEAT_DIFFERENT: _job_repeat_different_complement,
    Mode.REPEAT_IDENTICAL: _job_repeat_identical_complement,
}


def job_complement_kernel(config: SystemConfig):
    """Unvalidated ``(k, theta, u) -> 1 - J_k(theta, 1 - u)`` for the config's mode."""
    kernel = _COMPLEMENT_KERNELS[config.mode]
    return lambda k, theta, u: kernel(config, k, theta, u)


_KERNELS = {
    Mode.PAUSE_RESUME: _job_pause_resume,
    Mode.REPEAT_DIFFERENT: _job_repeat_different,
    Mode.REPEAT_IDENTICAL: _job_repeat_identical,
}


def job_kernel(config: SystemConfig):
    """Unvalidated ``(k, theta, z) -> J_k(theta, z)`` for the config's mode."""
    kernel = _KERNELS[config.mode]
    return lambda k, theta, z: kernel(config, k, theta, z)


# -- SAJD objects ------------------------------------------------------------


class SAJD(abc.ABC):
    """A service-arrival joint distribution bound to a system config."""

    config: SystemConfig

    def transform(self, theta: float, z: Sequence[float]) -> float:
        theta, z = check_args(self.config, theta, z)
        return self._transform(theta, z)

    @abc.abstractmethod
    def _transform(self, theta: float, z: Sequence[float]) -> float: ...

    def complement(self, theta: float, u: Sequence[float]) -> float:
        """``1 - transform(theta, 1 - u)``, accurate when the transform is close to 1."""
        theta, u = check_args(self.config, theta, u)
        return self._complement(theta, u)

    @abc.abstractmethod
    def _complement(self, theta: float, u: Sequence[float]) -> float: ...

    @property
    @abc.abstractmethod
    def mean(self) -> float:
        """E[R_V], the mean of the duration component."""

    def mean_arrivals(self, j: int) -> float:
        """E[A_{V,j}].  Every kind here has homogeneous Poisson arrivals, so this is lam_j E[R_V]."""
        return self.config.lambdas[j] * self.mean

    def __add__(self, other: SAJD) -> Sum:
        left = self.parts if isinstance(self, Sum) else (self,)
        right = other.parts if isinstance(other, Sum) else (other,)
        return Sum(left + right)


class PoissonOf(SAJD):
    """Duration ``V`` with conditionally Poisson(lam_i V) arrivals of each class."""

    def __init__(self, config: SystemConfig, law: DurationLaw, label: str | None = None) -> None:
        self.config = config
        self.law = law
        self.label = label

    def _transform(self, theta: float, z: Sequence[float]) -> float:
        return self.law.lst(theta + _marked_rate(self.config.lambdas, z, 0, self.config.n))

    def _complement(self, theta: float, u: Sequence[float]) -> float:
        return self.law.lst_complement(theta + _weighted(self.config.lambdas, u, 0, self.config.n))

    @property
    def mean(self) -> float:
        return float(self.law.mean)

    def __repr__(self) -> str:
        return f"PoissonOf({self.label or self.law!r})"


class _JobBase(SAJD):
    def __init__(self, config: SystemConfig, k: int) -> None:
        self.config = config
        self.k = config.check_class(k)

    @property
    def mean(self) -> float:
        from .loads import load_profile

        return load_profile(self.config).effective_size[self.k]

    def __repr__(self) -> str:
        return f"{type(self).__name__}(k={self.k})"


class JobJoint(_JobBase):
    """Class-k job under pause/resume overhead."""

    def _transform(self, theta: float, z: Sequence[float]) -> float:
        return _job_pause_resume(self.config, self.k, theta, z)

    def _complement(self, theta: float, u: Sequence[float]) -> float:
        return _job_pause_resume_complement(self.config, self.k, theta, u)


class RepeatDifferentJoint(_JobBase):
    """Class-k job that restarts with a fresh size after each preemption."""

    def _transform(self, theta: float, z: Sequence[float]) -> float:
        return _job_repeat_different(self.config, self.k, theta, z)

    def _complement(self, theta: float, u: Sequence[float]) -> float:
        return _job_repeat_different_complement(self.config, self.k, theta, u)


class RepeatIdenticalJoint(_JobBase):
    """Class-k job that restarts with the same size after each preemption."""

    def __init__(self, config: SystemConfig, k: int) -> None:
        super().__init__(config, k)
        if config.lam_below(self.k) > 0.0:
            _size_atoms(config, self.k)

    def _transform(self, theta: float, z: Sequence[float]) -> float:
        return _job_repeat_identical(self.config, self.k, theta, z)

    def _complement(self, theta: float, u: Sequence[float]) -> float:
        return _job_repeat_identical_complement(self.config, self.k, theta, u)


class Sum(SAJD):
    """Pointwise sum of independent SAJDs."""

    def __init__(self, parts: Sequence[SAJD]) -> None:
        parts = tuple(parts)
        if not parts:
            raise DomainError("an SAJD sum needs at least one part")
        if any(p.config is not parts[0].config and p.config != parts[0].config for p in parts):
            raise DomainError("SAJD parts belong to different systems")
        self.parts = parts
        self.config = parts[0].config

    def _transform(self, theta: float, z: Sequence[float]) -> float:
        out = 1.0
        for part in self.parts:
            out *= part._transform(theta, z)
        return out

    def _complement(self, theta: float, u: Sequence[float]) -> float:
        # 1 - prod(1 - c_i), accumulated without forming the product
        out = 0.0
        for part in self.parts:
            c = part._complement(theta, u)
            out = out + c - out * c
        return out

    @property
    def mean(self) -> float:
        return sum(p.mean for p in self.parts)

    def __repr__(self) -> str:
        return " + ".join(repr(p) for p in self.parts)


_JOB_KINDS = {
    Mode.PAUSE_RESUME: JobJoint,
    Mode.REPEAT_DIFFERENT: RepeatDifferentJoint,
    Mode.REPEAT_IDENTICAL: RepeatIdenticalJoint,
}


def job_sajd(config: SystemConfig, k: int) -> SAJD:
    """The class-k job joint distribution for the config's preemption mode."""
    return _JOB_KINDS[config.mode](config, k)


# -- functional API ----------------------------------------------------------


def poisson_joint_transform(config: SystemConfig, law: DurationLaw, theta: float, z: Sequence[float]) -> float:
    return PoissonOf(config, law).transform(theta, z)


def _require_mode(config: SystemConfig, mode: Mode, what: str) -> None:
    if config.mode is not mode:
        raise UnsupportedConfigurationError(f"{what} is defined for {mode.value} mode, config is {config.mode.value}")


def overhead_chain_transform(config: SystemConfig, k: int, theta: float, z: Sequence[float]) -> float:
    """Joint transform of one class-k overhead chain (pause/resume links until a resume succeeds)."""
    _require_mode(config, Mode.PAUSE_RESUME, "the overhead chain")
    config.check_class(k)
    theta, z = check_args(config, theta, z)
    return _chain(config, k, theta, z)


def job_joint_transform(config: SystemConfig, k: int, theta: float, z: Sequence[float]) -> float:
    _require_mode(config, Mode.PAUSE_RESUME, "job_joint_transform")
    return JobJoint(config, k).transform(theta, z)


def repeat_different_jjt(config: SystemConfig, k: int, theta: float, z: Sequence[float]) -> float:
    _require_mode(config, Mode.REPEAT_DIFFERENT, "repeat_different_jjt")
    return RepeatDifferentJoint(config, k).transform(theta, z)


def repeat_identical_jjt(config: SystemConfig, k: int, theta: float, z: Sequence[float]) -> float:
    _require_mode(config, Mode.REPEAT_IDENTICAL, "repeat_identical_jjt")
    return RepeatIdenticalJoint(config, k).transform(theta, z)


def sajd_sum_transform(parts: Sequence[SAJD], theta: float, z: Sequence[float]) -> float:
    return Sum(parts).transform(theta, z)


def jjt(config: SystemConfig, k: int, theta: float, z: Sequence[float]) -> float:
    """Class-k job joint transform in whatever mode the config uses."""
    return job_sajd(config, k).transform(theta, z)
