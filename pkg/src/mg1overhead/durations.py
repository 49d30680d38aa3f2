"""Duration laws with closed-form Laplace-Stieltjes transforms.

Every law used for job sizes, pause overheads and resume overheads is one
of the families below.  Each exposes its first two moments, the transform
``E[exp(-theta V)]`` and its derivative in ``theta``, and two samplers: a
scalar one driven by :class:`random.Random` (used by the event loop, where
per-draw overhead matters) and a vectorised one driven by
:class:`numpy.random.Generator` (used by Monte-Carlo oracles).

Config documents describe a law as ``{"dist": <family>, "params": {...}}``
with family names ``exp``, ``det``, ``erlang``, ``hyperexp``, ``uniform``
and ``pointmix``.
"""

from __future__ import annotations

import abc
import bisect
import math
import random
from dataclasses import dataclass
from functools import partial
from itertools import accumulate
from typing import Any, Callable, ClassVar, Mapping

import numpy as np

from .errors import ConfigError, DomainError

__all__ = [
    "Distribution",
    "Exponential",
    "Deterministic",
    "Erlang",
    "HyperExponential",
    "Uniform",
    "PointMixture",
    "ZERO",
    "lst",
    "lst_deriv",
    "sample",
    "distribution_from_dict",
]


def _check_theta(theta: float) -> float:
    theta = float(theta)
    if not theta >= 0.0:  # also rejects NaN
        raise DomainError(f"transform argument must be >= 0, got {theta!r}")
    return theta


def _exp_drop(rate: float, a: float, h: float) -> float:
    """rate/(rate+a) - rate/(rate+a+h)."""
    return rate * h / ((rate + a) * (rate + a + h))


def _point_drop(value: float, a: float, h: float) -> float:
    """exp(-a v) - exp(-(a+h) v)."""
    return -math.exp(-a * value) * math.expm1(-h * value)


# Gauss-Legendre rule on [0, 1]; exact to rounding for exp(-c u) with c up to ~20
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)
_GL_NODES = 0.5 * (_GL_NODES + 1.0)
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS


class Distribution(abc.ABC):
    """A nonnegative duration law."""

    family: ClassVar[str]
    _registry: ClassVar[dict[str, type[Distribution]]] = {}

    def __init_subclass__(cls, **kwargs: Any) -> None:
        super().__init_subclass__(**kwargs)
        if "family" in cls.__dict__:
            Distribution._registry[cls.family] = cls

    @property
    @abc.abstractmethod
    def mean(self) -> float: ...

    @property
    @abc.abstractmethod
    def second_moment(self) -> float: ...

    @abc.abstractmethod
    def _lst(self, theta: float) -> float: ...

    @abc.abstractmethod
    def _lst_deriv(self, theta: float) -> float: ...

    @abc.abstractmethod
    def sampler(self, rng: random.Random) -> Callable[[], float]:
        """Return a zero-argument callable drawing i.i.d. values from ``rng``."""

    @abc.abstractmethod
    def sample_array(self, gen: np.random.Generator, size: int) -> np.ndarray: ...

    @abc.abstractmethod
    def params(self) -> dict[str, Any]: ...

    def _lst_drop(self, a: float, h: float) -> float:
        return self._lst(a) - self._lst(a + h)

    def lst(self, theta: float) -> float:
        """``E[exp(-theta V)]`` for ``theta >= 0``."""
        return self._lst(_check_theta(theta))

    def lst_drop(self, a: float, h: float) -> float:
        """``lst(a) - lst(a + h)`` without cancellation for small ``h``."""
        return self._lst_drop(_check_theta(a), _check_theta(h))

    def lst_complement(self, theta: float) -> float:
        """``1 - lst(theta)``, accurate to full relative precision near zero."""
        return self._lst_drop(0.0, _check_theta(theta))

    def lst_deriv(self, theta: float) -> float:
        """``d/dtheta E[exp(-theta V)] = -E[V exp(-theta V)]``."""
        return self._lst_deriv(_check_theta(theta))

    def sample(self, rng: random.Random) -> float:
        return self.sampler(rng)()

    @property
    def is_zero(self) -> bool:
        """True when the law is a point mass at zero."""
        return self.mean == 0.0

    def to_dict(self) -> dict[str, Any]:
        return {"dist": self.family, "params": self.params()}


@dataclass(frozen=True)
class Exponential(Distribution):
    rate: float
    family: ClassVar[str] = "exp"

    def __post_init__(self) -> None:
        if not self.rate > 0 or math.isinf(self.rate):
            raise DomainError(f"exponential rate must be positive and finite, got {self.rate!r}")

    @property
    def mean(self) -> float:
        return 1.0 / self.rate

    @property
    def second_moment(self) -> float:
        return 2.0 / self.rate**2

    def _lst(self, theta: float) -> float:
        return self.rate / (self.rate + theta)

    def _lst_deriv(self, theta: float) -> float:
        return -self.rate / (self.rate + theta) ** 2

    def _lst_drop(self, a: float, h: float) -> float:
        return _exp_drop(self.rate, a, h)

    def sampler(self, rng: random.Random) -> Callable[[], float]:
        return partial(rng.expovariate, self.rate)

    def sample_array(self, gen: np.random.Generator, size: int) -> np.ndarray:
        return gen.exponential(1.0 / self.rate, size)

    def params(self) -> dict[str, Any]:
        return {"rate": self.rate}


@dataclass(frozen=True)
class Deterministic(Distribution):
    value: float
    family: ClassVar[str] = "det"

    def __post_init__(self) -> None:
        if not self.value >= 0 or math.isinf(self.value):
            raise DomainError(f"deterministic value must be finite and >= 0, got {self.value!r}")

    @property
    def mean(self) -> float:
        return float(self.value)

    @property
    def second_moment(self) -> float:
        return float(self.value) ** 2

    def _lst(self, theta: float) -> float:
        return math.exp(-theta * self.value)

    def _lst_deriv(self, theta: float) -> float:
        return -self.value * math.exp(-theta * self.value)

    def _lst_drop(self, a: float, h: float) -> float:
        return _point_drop(self.value, a, h)

    def sampler(self, rng: random.Random) -> Callable[[], float]:
        value = float(self.value)
        return lambda: value

    def sample_array(self, gen: np.random.Generator, size: int) -> np.ndarray:
        return np.full(size, float(self.value))

    def params(self) -> dict[str, Any]:
        return {"value": self.value}


ZERO = Deterministic(0.0)


@dataclass(frozen=True)
class Erlang(Distribution):
    shape: int
    rate: float
    family: ClassVar[str] = "erlang"

    def __post_init__(self) -> None:
        if int(self.shape) != self.shape or self.shape < 1:
            raise DomainError(f"erlang shape must be a positive integer, got {self.shape!r}")
        if not self.rate > 0 or math.isinf(self.rate):
            raise DomainError(f"erlang rate must be positive and finite, got {self.rate!r}")
        object.__setattr__(self, "shape", int(self.shape))

    @property
    def mean(self) -> float:
        return self.shape / self.rate

    @property
    def second_moment(self) -> float:
        return self.shape * (self.shape + 1) / self.rate**2

    def _lst(self, theta: float) -> float:
        return (self.rate / (self.rate + theta)) ** self.shape

    def _lst_deriv(self, theta: float) -> float:
        return -self.shape / self.rate * (self.rate / (self.rate + theta)) ** (self.shape + 1)

    def _lst_drop(self, a: float, h: float) -> float:
        # x**k - y**k = (x - y) * sum_i x**(k-1-i) y**i
        x = self.rate / (self.rate + a)
        y = self.rate / (self.rate + a + h)
        return _exp_drop(self.rate, a, h) * sum(x ** (self.shape - 1 - i) * y**i for i in range(self.shape))

    def sampler(self, rng: random.Random) -> Callable[[], float]:
        return partial(rng.gammavariate, self.shape, 1.0 / self.rate)

    def sample_array(self, gen: np.random.Generator, size: int) -> np.ndarray:
        return gen.gamma(self.shape, 1.0 / self.rate, size)

    def params(self) -> dict[str, Any]:
        return {"shape": self.shape, "rate": self.rate}


def _check_probs(probs: tuple[float, ...], what: str) -> None:
    if not probs:
        raise DomainError(f"{what} needs at least one branch")
    if any(not p >= 0 for p in probs):
        raise DomainError(f"{what} probabilities must be >= 0")
    if abs(sum(probs) - 1.0) > 1e-9:
        raise DomainError(f"{what} probabilities must sum to 1, got {sum(probs)!r}")


@dataclass(frozen=True)
class HyperExponential(Distribution):
    probs: tuple[float, ...]
    rates: tuple[float, ...]
    family: ClassVar[str] = "hyperexp"

    def __post_init__(self) -> None:
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        _check_probs(self.probs, "hyperexponential")
        if len(self.probs) != len(self.rates):
            raise DomainError("hyperexponential probs and rates differ in length")
        if any(not r > 0 or math.isinf(r) for r in self.rates):
            raise DomainError("hyperexponential rates must be positive and finite")

    @property
    def mean(self) -> float:
        return sum(p / r for p, r in zip(self.probs, self.rates))

    @property
    def second_moment(self) -> float:
        return sum(2.0 * p / r**2 for p, r in zip(self.probs, self.rates))

    def _lst(self, theta: float) -> float:
        return sum(p * r / (r + theta) for p, r in zip(self.probs, self.rates))

    def _lst_deriv(self, theta: float) -> float:
        return -sum(p * r / (r + theta) ** 2 for p, r in zip(self.probs, self.rates))

    def _lst_drop(self, a: float, h: float) -> float:
        return sum(p * _exp_drop(r, a, h) for p, r in zip(self.probs, self.rates))

    def sampler(self, rng: random.Random) -> Callable[[], float]:
        cum = list(accumulate(self.probs))
        rates = self.rates
        last = len(rates) - 1
        uniform = rng.random
        expo = rng.expovariate

        def draw() -> float:
            return expo(rates[min(bisect.bisect_right(cum, uniform()), last)])

        return draw

    def sample_array(self, gen: np.random.Generator, size: int) -> np.ndarray:
        branch = gen.choice(len(self.rates), size=size, p=self.probs)
        return gen.exponential(1.0, size) / np.asarray(self.rates)[branch]

    def params(self) -> dict[str, Any]:
        return {"probs": list(self.probs), "rates": list(self.rates)}


def _one_minus_exp_over_x(x: float) -> float:
    """(1 - exp(-x)) / x, continuous at 0."""
    if x == 0.0:
        return 1.0
    return -math.expm1(-x) / x


def _d_one_minus_exp_over_x(x: float) -> float:
    """Derivative of (1 - exp(-x)) / x."""
    if abs(x) < 1e-3:
        return -0.5 + x / 3.0 - x * x / 8.0 + x**3 / 30.0
    return (x * math.exp(-x) + math.expm1(-x)) / (x * x)


@dataclass(frozen=True)
class Uniform(Distribution):
    lo: float
    hi: float
    family: ClassVar[str] = "uniform"

    def __post_init__(self) -> None:
        if not (0 <= self.lo < self.hi) or math.isinf(self.hi):
            raise DomainError(f"uniform needs 0 <= lo < hi < inf, got ({self.lo!r}, {self.hi!r})")

    @property
    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def second_moment(self) -> float:
        lo, hi = self.lo, self.hi
        return (lo * lo + lo * hi + hi * hi) / 3.0

    def _lst(self, theta: float) -> float:
        width = self.hi - self.lo
        return math.exp(-theta * self.lo) * _one_minus_exp_over_x(theta * width)

    def _lst_deriv(self, theta: float) -> float:
        width = self.hi - self.lo
        x = theta * width
        shift = math.exp(-theta * self.lo)
        return shift * (width * _d_one_minus_exp_over_x(x) - self.lo * _one_minus_exp_over_x(x))

    def _lst_drop(self, a: float, h: float) -> float:
        lo, width = self.lo, self.hi - self.lo
        if h * self.hi > 0.5:
            return self._lst(a) - self._lst(a + h)
        if a * width <= 20.0:
            # E[exp(-aV)(1 - exp(-hV))] with V = lo + width*u, u on [0, 1]
            v = lo + width * _GL_NODES
            return float(_GL_WEIGHTS @ (np.exp(-a * v) * -np.expm1(-h * v)))
        # large a*width: g(x) - g(x+d) with g(x) = (1 - e^-x)/x has no cancellation here
        x, d = a * width, h * width
        g_gap = (d * -math.expm1(-x) + x * math.exp(-x) * math.expm1(-d)) / (x * (x + d))
        return math.exp(-a * lo) * (g_gap - math.expm1(-h * lo) * _one_minus_exp_over_x(x + d))

    def sampler(self, rng: random.Random) -> Callable[[], float]:
        return partial(rng.uniform, self.lo, self.hi)

    def sample_array(self, gen: np.random.Generator, size: int) -> np.ndarray:
        return gen.uniform(self.lo, self.hi, size)

    def params(self) -> dict[str, Any]:
        return {"lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class PointMixture(Distribution):
    """Finite mixture of point masses: ``values[i]`` with probability ``probs[i]``."""

    values: tuple[float, ...]
    probs: tuple[float, ...]
    family: ClassVar[str] = "pointmix"

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        _check_probs(self.probs, "point mixture")
        if len(self.values) != len(self.probs):
            raise DomainError("point mixture values and probs differ in length")
        if any(not v >= 0 or math.isinf(v) for v in self.values):
            raise DomainError("point mixture values must be finite and >= 0")

    @property
    def mean(self) -> float:
        return sum(p * v for p, v in zip(self.probs, self.values))

    @property
    def second_moment(self) -> float:
        return sum(p * v * v for p, v in zip(self.probs, self.values))

    def _lst(self, theta: float) -> float:
        return sum(p * math.exp(-theta * v) for p, v in zip(self.probs, self.values))

    def _lst_deriv(self, theta: float) -> float:
        return -sum(p * v * math.exp(-theta * v) for p, v in zip(self.probs, self.values))

    def _lst_drop(self, a: float, h: float) -> float:
        return sum(p * _point_drop(v, a, h) for p, v in zip(self.probs, self.values))

    def sampler(self, rng: random.Random) -> Callable[[], float]:
        cum = list(accumulate(self.probs))
        values = self.values
        last = len(values) - 1
        uniform = rng.random
        return lambda: values[min(bisect.bisect_right(cum, uniform()), last)]

    def sample_array(self, gen: np.random.Generator, size: int) -> np.ndarray:
        return np.asarray(self.values)[gen.choice(len(self.values), size=size, p=self.probs)]

    def params(self) -> dict[str, Any]:
        return {"values": list(self.values), "probs": list(self.probs)}

    def atoms(self) -> list[tuple[float, float]]:
        """(value, probability) pairs."""
        return list(zip(self.values, self.probs))


def lst(dist: Distribution, theta: float) -> float:
    return dist.lst(theta)


def lst_deriv(dist: Distribution, theta: float) -> float:
    return dist.lst_deriv(theta)


def sample(dist: Distribution, rng: random.Random) -> float:
    return dist.sample(rng)


def distribution_from_dict(doc: Mapping[str, Any], field: str = "dist") -> Distribution:
    """Build a law from its ``{"dist": ..., "params": {...}}`` document."""
    if not isinstance(doc, Mapping):
        raise ConfigError("distribution must be an object with 'dist' and 'params'", field)
    family = doc.get("dist")
    if family not in Distribution._registry:
        known = ", ".join(sorted(Distribution._registry))
        raise ConfigError(f"unknown distribution family {family!r} (known: {known})", f"{field}.dist")
    params = doc.get("params", {})
    if not isinstance(params, Mapping):
        raise ConfigError("params must be an object", f"{field}.params")
    try:
        return Distribution._registry[family](**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {family!r}: {exc}", f"{field}.params") from exc
    except DomainError as exc:
        raise ConfigError(str(exc), f"{field}.params") from exc
