"""Per-class response time: extra work on early arrival, the setup composition, moments.

A class-k job's response time splits, through the M/G/1-with-setup view,
into the waiting time of a FCFS queue of class-k "superjobs" (one class-k
job plus all class-<k work it lets in, ``B_{<k}(J_k)``), the superjob
itself, and the extra work ``X*_k`` that an early class-k arrival finds
in front of it.  An arrival is early when no class-k job present has been
served yet.

``X*_k`` is a mixture over what the server is doing when the early job
arrives.  Two constructions are available:

``"corrected"`` (default)
    A resume that fails is represented by the part of it left after the
    first preempting arrival (``remainder_transform``).  The same law is
    the residual of a resume that has seen no preempting arrival yet,
    and class-<k arrivals during that residual join the busy period.
    The probabilities sum to one exactly.

``"full-resume"``
    Uses the whole failed resume ``D^(1)`` in the busy periods that
    follow a failure and adds the stationary excess of a successful
    resume ``(D^(0))_e`` outside the busy period.  With positive resume
    times its probabilities sum to more than one; it is kept for
    comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

from .busy import BusySolver, excess_transform
from .durations import Distribution
from .errors import DegenerateCaseError, DomainError, NumericPrecisionError, UnstableSystemError, UnsupportedConfigurationError
from .loads import load_profile
from .model import Mode, SystemConfig
from .numdiff import forward_derivative
from .sajd import PoissonOf, Sum, job_sajd

__all__ = [
    "VARIANTS",
    "ConditionalResume",
    "MixtureComponent",
    "ExtraWorkMixture",
    "ResponseResult",
    "ResponseAnalysis",
    "resume_conditional_transforms",
    "extra_work_mixture",
    "extra_work_transform",
    "response_transform",
    "response_moments",
]

VARIANTS = ("corrected", "full-resume")

Transform = Callable[[float], float]


@dataclass(frozen=True)
class _Law:
    """A duration law known only through its transform, complement and mean."""

    transform: Transform
    complement: Transform
    mean: float
    name: str = ""

    def lst(self, theta: float) -> float:
        return self.transform(theta)

    def lst_complement(self, theta: float) -> float:
        return self.complement(theta)

    def __repr__(self) -> str:
        return self.name or "law"


# -- conditional resume laws --------------------------------------------------


# relative gap below which the remainder transform switches to its limit form
_NEAR_DIAGONAL = 1e-5


@dataclass(frozen=True)
class ConditionalResume:
    """Class-j resume length split by outcome.

    ``success_prob`` is the chance no class-<j job arrives during the
    resume.  ``remainder`` is the time left in a failed resume after its
    first class-<j arrival.
    """

    j: int
    resume: Distribution
    lam_lt: float
    success_prob: float
    mean_success: float
    mean_failure: float
    mean_remainder: float

    def _require_failures(self) -> None:
        if self.success_prob >= 1.0:
            raise DegenerateCaseError(f"class {self.j} resumes never fail (no preemptors or zero resume time)")

    def success_transform(self, theta: float) -> float:
        if self.success_prob <= 0.0:
            raise DegenerateCaseError(f"class {self.j} resumes never succeed")
        return self.resume.lst(theta + self.lam_lt) / self.success_prob

    def success_complement(self, theta: float) -> float:
        return self.resume.lst_drop(self.lam_lt, theta) / self.success_prob

    def failure_transform(self, theta: float) -> float:
        self._require_failures()
        return self.resume.lst_drop(theta, self.lam_lt) / (1.0 - self.success_prob)

    def failure_complement(self, theta: float) -> float:
        self._require_failures()
        d = self.resume
        return (d.lst_complement(theta) - d.lst_drop(self.lam_lt, theta)) / (1.0 - self.success_prob)

    def remainder_transform(self, theta: float) -> float:
        self._require_failures()
        d, lam = self.resume, self.lam_lt
        gap = float(theta) - lam
        if abs(gap) <= _NEAR_DIAGONAL * max(1.0, lam):
            slope = -d.lst_deriv(0.5 * (theta + lam))
        else:
            slope = d.lst_drop(min(theta, lam), abs(gap)) / abs(gap)
        return lam * slope / (1.0 - self.success_prob)

    def remainder_complement(self, theta: float) -> float:
        self._require_failures()
        lam, fail = self.lam_lt, 1.0 - self.success_prob
        if theta < 0.5 * lam:
            # 1 - lam (D(theta) - D(lam)) / ((1-p)(lam - theta)), regrouped to avoid cancellation
            return (lam * self.resume.lst_complement(theta) - fail * theta) / (fail * (lam - theta))
        return 1.0 - self.remainder_transform(theta)

    @property
    def failure_ratio(self) -> float:
        """Expected failed resumes per successful one, ``(1 - p) / p``."""
        return (1.0 - self.success_prob) / self.success_prob

    def success_law(self) -> _Law:
        return _Law(self.success_transform, self.success_complement, self.mean_success, f"D{self.j}^(0)")

    def failure_law(self) -> _Law:
        return _Law(self.failure_transform, self.failure_complement, self.mean_failure, f"D{self.j}^(1)")

    def remainder_law(self) -> _Law:
        return _Law(self.remainder_transform, self.remainder_complement, self.mean_remainder, f"D{self.j}^rem")


def resume_conditional_transforms(config: SystemConfig, j: int) -> ConditionalResume:
    config.check_class(j)
    d = config.classes[j].resume
    lam = config.lam_below(j)
    p = d.lst(lam)
    slope = d.lst_deriv(lam)
    mean_success = -slope / p if p > 0.0 else math.nan
    if p < 1.0:
        mean_failure = (d.mean + slope) / (1.0 - p)
        # E[D]/(1-p) - 1/lam, grouped as E[lam D - 1 + exp(-lam D)] / (lam (1-p))
        mean_remainder = (lam * d.mean - d.lst_complement(lam)) / (lam * (1.0 - p))
    else:
        mean_failure = mean_remainder = math.nan
    return ConditionalResume(j, d, lam, p, mean_success, mean_failure, mean_remainder)


# -- extra-work mixture --------------------------------------------------------


@dataclass
class MixtureComponent:
    """One case of the mixture; ``complement`` is ``1 - transform``."""

    probability: float
    transform: Transform
    complement: Transform
    label: str
    _mean: float | None = field(default=None, repr=False)

    @property
    def mean(self) -> float:
        if self._mean is None:
            self._mean = _mean_of(self.transform)
        return self._mean


def _mean_of(f: Transform) -> float:
    """``-f'(0)`` by a forward stencil scaled to the law."""
    h = 1e-6
    crude = (1.0 - f(h)) / h
    if crude <= 0.0:
        return 0.0
    return float(-forward_derivative(f, 1, 1e-3 / crude, levels=3).value)


@dataclass
class ExtraWorkMixture:
    k: int
    variant: str
    components: list[MixtureComponent]

    @property
    def total_probability(self) -> float:
        return math.fsum(c.probability for c in self.components)

    def transform(self, theta: float) -> float:
        return math.fsum(c.probability * c.transform(theta) for c in self.components)

    def complement(self, theta: float) -> float:
        """``total_probability - transform(theta)``."""
        return math.fsum(c.probability * c.complement(theta) for c in self.components)

    @property
    def mean(self) -> float:
        return math.fsum(c.probability * c.mean for c in self.components)

    def by_case(self) -> dict[str, float]:
        """Total probability per case letter."""
        out: dict[str, float] = {}
        for c in self.components:
            out[c.label[0]] = out.get(c.label[0], 0.0) + c.probability
        return out


@dataclass(frozen=True)
class ResponseResult:
    k: int
    transform: Transform
    moments: tuple[float, ...]
    waiting_factor: Transform
    superjob_transform: Transform
    extra_work_transform: Transform
    errors: tuple[float, ...] = ()


class ResponseAnalysis:
    """One analysis session: a busy-period memo plus per-class mixtures."""

    def __init__(
        self,
        config: SystemConfig,
        *,
        variant: str = "corrected",
        tol: float = 1e-12,
        rtol: float = 0.0,
    ) -> None:
        if variant not in VARIANTS:
            raise DomainError(f"unknown mixture variant {variant!r}; choose from {VARIANTS}")
        self.config = config
        self.variant = variant
        self.tol = tol
        self.rtol = rtol
        self.solver = BusySolver(config, tol=tol, rtol=rtol)
        self.profile = load_profile(config)
        self._mixtures: dict[int, ExtraWorkMixture] = {}

    def _require_stable(self) -> None:
        if self.profile.total >= 1.0:
            raise UnstableSystemError(f"total effective load {self.profile.total:.6g} >= 1")

    def _require_pause_resume(self) -> None:
        if self.config.mode is not Mode.PAUSE_RESUME:
            raise UnsupportedConfigurationError(
                f"response time is derived for pause-resume mode only, config is {self.config.mode.value}"
            )

    # building blocks

    def _busy(self, sajd, k: int) -> tuple[Transform, Transform]:
        solver = self.solver
        return (lambda theta: solver.transform(sajd, k, theta)), (lambda theta: solver.complement(sajd, k, theta))

    def _excess_of_busy(self, sajd, k: int) -> tuple[Transform, Transform]:
        base, comp = self._busy(sajd, k)
        mean = self.solver.mean(sajd, k)

        def transform(theta: float) -> float:
            return excess_transform(base, mean, theta, comp)

        return transform, lambda theta: 1.0 - transform(theta)

    # mixture

    def mixture(self, k: int) -> ExtraWorkMixture:
        self._require_pause_resume()
        self.config.check_class(k)
        self._require_stable()
        if k not in self._mixtures:
            self._mixtures[k] = self._build_mixture(k)
        return self._mixtures[k]

    def _build_mixture(self, k: int) -> ExtraWorkMixture:
        cfg, prof = self.config, self.profile
        n, lams = cfg.n, cfg.lambdas
        rho = prof.total
        rho_lt = prof.rho_below(k)
        early = 1.0 - prof.rho_upto(k)
        idle_share = (1.0 - rho_lt) / early
        literal = self.variant == "full-resume"
        jobs = [job_sajd(cfg, i) for i in range(n)]
        out: list[MixtureComponent] = []

        def add(prob: float, pair: tuple[Transform, Transform], label: str) -> None:
            if prob > 0.0:
                out.append(MixtureComponent(prob, pair[0], pair[1], label))

        for i in range(k):
            add((1.0 - rho) * prof.rho[i] / early, self._excess_of_busy(jobs[i], k), f"a[i={i}]")

        for j in range(k + 1, n):
            spec = cfg.classes[j]
            sigma_j = prof.sigma[j]
            pause = PoissonOf(cfg, spec.pause, f"C{j}")
            cond = resume_conditional_transforms(cfg, j)
            fails = cond.success_prob < 1.0
            if fails:
                q = cond.failure_ratio
                after = cond.failure_law() if literal else cond.remainder_law()
                lead = PoissonOf(cfg, after, after.name) + pause
            for i in range(k):
                eff = prof.effective_size[i]
                add(lams[i] * sigma_j * (spec.pause.mean + eff) / early, self._excess_of_busy(pause + jobs[i], k), f"b[i={i},j={j}]")
                if fails:
                    add(lams[i] * sigma_j * q * (lead.mean + eff) / early, self._excess_of_busy(lead + jobs[i], k), f"d[i={i},j={j}]")
            for ell in range(k, j):
                add(lams[ell] * sigma_j * spec.pause.mean / early, self._excess_of_busy(pause, k), f"c[l={ell},j={j}]")
                if fails:
                    add(lams[ell] * sigma_j * q * lead.mean / early, self._excess_of_busy(lead, k), f"e[l={ell},j={j}]")
            add(sigma_j * idle_share, self._busy(pause, k), f"f[j={j}]")
            if fails:
                add(sigma_j * q * idle_share, self._residual_then_pause(cond, pause, k), f"g[j={j}]")

        add((1.0 - rho) * idle_share, ((lambda theta: 1.0), (lambda theta: 0.0)), "h")
        return ExtraWorkMixture(k, self.variant, out)

    def _residual_then_pause(self, cond: ConditionalResume, pause: PoissonOf, k: int) -> tuple[Transform, Transform]:
        if self.variant == "full-resume":
            succ = cond.success_law()
            busy, busy_comp = self._busy(pause, k)
            if succ.mean <= 0.0:
                return busy, busy_comp

            def residual(theta: float) -> float:
                return excess_transform(succ.transform, succ.mean, theta, succ.complement)

            def comp(theta: float) -> float:
                r, c = 1.0 - residual(theta), busy_comp(theta)
                return r + c - r * c

            return (lambda theta: residual(theta) * busy(theta)), comp
        rem = cond.remainder_law()
        return self._busy(PoissonOf(self.config, rem, rem.name) + pause, k)

    def extra_work_transform(self, k: int, theta: float) -> float:
        return self.mixture(k).transform(theta)

    # response transform

    def superjob_mean(self, k: int) -> float:
        return self.profile.effective_size[k] / (1.0 - self.profile.rho_below(k))

    def waiting_factor(self, k: int, theta: float) -> float:
        prof = self.profile
        rho_lt, rho_k = prof.rho_below(k), prof.rho[k]
        superjob, comp = self._busy(job_sajd(self.config, k), k)
        excess = excess_transform(superjob, self.superjob_mean(k), theta, comp)
        return (1.0 - rho_lt - rho_k) / (1.0 - rho_lt - rho_k * excess)

    def superjob_transform(self, k: int, theta: float) -> float:
        return self.solver.transform(job_sajd(self.config, k), k, theta)

    def response_transform(self, k: int, theta: float) -> float:
        self._require_pause_resume()
        self.config.check_class(k)
        self._require_stable()
        theta = float(theta)
        if not theta >= 0.0:
            raise DomainError(f"theta must be >= 0, got {theta!r}")
        return self.waiting_factor(k, theta) * self.superjob_transform(k, theta) * self.extra_work_transform(k, theta)

    def result(self, k: int, m: int = 2) -> ResponseResult:
        values, errors = self._moments(k, m)
        return ResponseResult(
            k,
            lambda theta: self.response_transform(k, theta),
            values,
            lambda theta: self.waiting_factor(k, theta),
            lambda theta: self.superjob_transform(k, theta),
            lambda theta: self.extra_work_transform(k, theta),
            errors,
        )

    def _moments(self, k: int, m: int) -> tuple[tuple[float, ...], tuple[float, ...]]:
        if not (isinstance(m, int) and 1 <= m <= 4):
            raise DomainError(f"moment order must be 1..4, got {m!r}")
        self.response_transform(k, 0.0)  # validates mode, class and stability
        precise = ResponseAnalysis(self.config, variant=self.variant, tol=1e-300, rtol=_MOMENT_FP_RTOL)

        def f(theta: float) -> float:
            return precise.response_transform(k, theta)

        h0 = 1e-6 / self.profile.effective_size[k]
        previous = [1.0]
        tau = (1.0 - f(h0)) / h0
        values, errors = [], []
        for r in range(1, m + 1):
            if r > 1:
                # pilot pass: the step for order r follows E[T^r] / E[T^(r-1)]
                pilot = (-1.0) ** r * forward_derivative(f, r, _MOMENT_STEP[r] / tau, levels=2, accuracy=3).value
                if pilot > 0.0:
                    tau = max(tau, pilot / previous[-1])
            est = forward_derivative(f, r, _MOMENT_STEP[r] / tau, levels=_MOMENT_LEVELS[r], accuracy=3)
            value = (-1.0) ** r * est.value
            rel = est.error / abs(value) if value != 0.0 else est.error
            if rel > 10.0 * _MOMENT_RTOL[r]:
                raise NumericPrecisionError(
                    f"moment {r} of class {k}: refinement levels disagree by {rel:.2e} relative"
                )
            values.append(value)
            errors.append(est.error)
            previous.append(value)
        return tuple(values), tuple(errors)


# the fixed point is iterated to a relative change of a few ulps for moments
_MOMENT_FP_RTOL = 1e-15
# coarsest stencil spacing per order, in units of E[T^(r-1)] / E[T^r]
_MOMENT_STEP = {1: 2e-3, 2: 1e-2, 3: 5e-2, 4: 1e-1}
_MOMENT_LEVELS = {1: 4, 2: 3, 3: 3, 4: 3}
_MOMENT_RTOL = {1: 1e-6, 2: 1e-6, 3: 1e-4, 4: 1e-4}


@lru_cache(maxsize=64)
def _session(config: SystemConfig, variant: str) -> ResponseAnalysis:
    return ResponseAnalysis(config, variant=variant)


def extra_work_mixture(config: SystemConfig, k: int, *, variant: str = "corrected") -> ExtraWorkMixture:
    return _session(config, variant).mixture(k)


def extra_work_transform(config: SystemConfig, k: int, theta: float, *, variant: str = "corrected") -> float:
    return _session(config, variant).extra_work_transform(k, theta)


def response_transform(config: SystemConfig, k: int, theta: float, *, variant: str = "corrected") -> float:
    return _session(config, variant).response_transform(k, theta)


def response_moments(config: SystemConfig, k: int, m: int = 2, *, variant: str = "corrected") -> list[float]:
    """First ``m`` (at most 4) raw moments of the class-k response time."""
    return list(_session(config, variant)._moments(k, m)[0])
