"""System configuration: job classes, their laws, and the preemption mode.

Classes are indexed from 0.  Index order is priority order: class ``i``
preempts class ``k`` whenever ``i < k``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

from .durations import ZERO, Distribution
from .errors import DomainError

__all__ = ["Mode", "ClassSpec", "SystemConfig"]


class Mode(str, enum.Enum):
    PAUSE_RESUME = "pause-resume"
    REPEAT_DIFFERENT = "repeat-different"
    REPEAT_IDENTICAL = "repeat-identical"


@dataclass(frozen=True)
class ClassSpec:
    lam: float
    size: Distribution
    pause: Distribution = ZERO
    resume: Distribution = ZERO

    def __post_init__(self) -> None:
        if not self.lam > 0:
            raise DomainError(f"arrival rate must be positive, got {self.lam!r}")
        if not self.size.mean > 0:
            raise DomainError("job size must have positive mean")


@dataclass(frozen=True)
class SystemConfig:
    classes: tuple[ClassSpec, ...]
    mode: Mode = Mode.PAUSE_RESUME

    def __post_init__(self) -> None:
        object.__setattr__(self, "classes", tuple(self.classes))
        object.__setattr__(self, "mode", Mode(self.mode))
        if not self.classes:
            raise DomainError("a system needs at least one class")
        if self.mode is not Mode.PAUSE_RESUME:
            for spec in self.classes:
                if not (spec.pause.is_zero and spec.resume.is_zero):
                    raise DomainError(f"{self.mode.value} mode takes no pause/resume overhead")

    @property
    def n(self) -> int:
        return len(self.classes)

    @cached_property
    def lambdas(self) -> tuple[float, ...]:
        return tuple(float(c.lam) for c in self.classes)

    @cached_property
    def _prefix(self) -> tuple[float, ...]:
        out = [0.0]
        for lam in self.lambdas:
            out.append(out[-1] + lam)
        return tuple(out)

    def lam_below(self, k: int) -> float:
        """Total arrival rate of classes with index < k."""
        return self._prefix[k]

    def lam_from(self, k: int) -> float:
        """Total arrival rate of classes with index >= k."""
        return self._prefix[-1] - self._prefix[k]

    @property
    def lam_total(self) -> float:
        return self._prefix[-1]

    def check_class(self, k: int) -> int:
        if not (isinstance(k, int) and 0 <= k < self.n):
            raise DomainError(f"class index must be in [0, {self.n}), got {k!r}")
        return k

    def with_lambda(self, k: int, lam: float) -> SystemConfig:
        classes = list(self.classes)
        old = classes[k]
        classes[k] = ClassSpec(lam, old.size, old.pause, old.resume)
        return SystemConfig(tuple(classes), self.mode)

    def scaled(self, factor: float) -> SystemConfig:
        """Same laws with every arrival rate multiplied by ``factor``."""
        return SystemConfig(
            tuple(ClassSpec(c.lam * factor, c.size, c.pause, c.resume) for c in self.classes),
            self.mode,
        )

    @property
    def zero_overhead(self) -> bool:
        return all(c.pause.is_zero and c.resume.is_zero for c in self.classes)
