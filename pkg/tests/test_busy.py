from __future__ import annotations

import math

import pytest

from mg1overhead import DomainError, Deterministic, Exponential
from mg1overhead.busy import BusySolver, busy_mean, excess_transform, solve_busy_fixed_point
from mg1overhead.errors import ConvergenceError
from mg1overhead.loads import load_profile
from mg1overhead.sajd import job_sajd
from mg1overhead.sim import SimOptions, simulate

from support import MM1, TWO_CLASS, classical_busy, random_config


def test_mm1_busy_transform():
    fp = solve_busy_fixed_point(MM1, 1, 1.0)
    assert fp.b[0] == pytest.approx(2.5 - math.sqrt(4.25), abs=1e-13)
    assert fp.min_increment >= 0.0


@pytest.mark.parametrize("seed", range(10))
def test_zero_overhead_matches_classical_busy_period(seed):
    cfg = random_config(seed, overhead=False)
    solver = BusySolver(cfg)
    for level in range(1, cfg.n + 1):
        for theta in (0.01, 0.7, 3.0):
            b = solver.solve(level, theta).b
            mix = sum(cfg.lambdas[i] * b[i] for i in range(level)) / cfg.lam_below(level)
            assert mix == pytest.approx(classical_busy(cfg, level, theta), abs=1e-12)
            assert all(v == 1.0 for v in b[level:])


def test_level_zero_is_trivial():
    assert BusySolver(TWO_CLASS).solve(0, 0.5).b == (1.0, 1.0)


def test_theta_zero_stable_gives_one():
    for seed in range(5):
        cfg = random_config(seed)
        for level in range(cfg.n + 1):
            assert BusySolver(cfg).solve(level, 0.0).b == pytest.approx((1.0,) * cfg.n, abs=1e-10)


def test_supercritical_gives_extinction_probability():
    # M/M/1 with lam = 1.2: a busy period ends with probability 1 / 1.2
    fp = BusySolver(MM1.with_lambda(0, 1.2)).solve(1, 0.0)
    assert fp.b[0] == pytest.approx(1.0 / 1.2, abs=1e-12)
    assert fp.b[0] < 1.0 - 1e-3


def test_critical_load_raises():
    with pytest.raises(ConvergenceError):
        BusySolver(MM1.with_lambda(0, 1.0)).solve(1, 0.0)


def test_monotone_iterates_recorded():
    solver = BusySolver(TWO_CLASS)
    for theta in (0.0, 0.01, 1.0, 10.0):
        fp = solver.solve(2, theta)
        assert fp.min_increment >= 0.0
        assert all(0.0 <= v <= 1.0 for v in fp.b)


def test_solutions_are_memoised():
    solver = BusySolver(TWO_CLASS)
    assert solver.solve(2, 0.3) is solver.solve(2, 0.3)


def test_bad_arguments():
    solver = BusySolver(TWO_CLASS)
    with pytest.raises(DomainError):
        solver.solve(3, 0.5)
    with pytest.raises(DomainError):
        solver.solve(1, -0.5)


def test_busy_means():
    assert busy_mean(job_sajd(MM1, 0), MM1, 1) == pytest.approx(2.0, rel=1e-15)
    assert math.isinf(busy_mean(job_sajd(MM1, 0), MM1.with_lambda(0, 1.5), 1))
    solver = BusySolver(TWO_CLASS)
    for k in range(2):
        for level in range(3):
            sajd = job_sajd(TWO_CLASS, k)
            h = 1e-6
            fd = solver.complement(sajd, level, h) / h
            assert solver.mean(sajd, level) == pytest.approx(fd, rel=1e-4)


def test_running_example_full_busy_mean():
    # a class-1 job spawns class-0 and class-1 work at total load 0.7204
    prof = load_profile(TWO_CLASS)
    sajd = job_sajd(TWO_CLASS, 1)
    assert BusySolver(TWO_CLASS).mean(sajd, 2) == pytest.approx(prof.effective_size[1] / (1.0 - prof.total), rel=1e-14)


def test_excess_examples():
    assert excess_transform(Exponential(1.0).lst, 1.0, 1.0) == pytest.approx(0.5, abs=1e-15)
    assert excess_transform(Deterministic(2.0).lst, 2.0, 1.0) == pytest.approx(0.432332358381693654, abs=1e-15)
    assert excess_transform(Exponential(1.0).lst, 1.0, 0.0) == 1.0


def test_excess_small_argument_paths():
    law = Deterministic(2.0)
    exact = lambda t: -math.expm1(-2.0 * t) / (2.0 * t)
    for theta in (1e-12, 1e-9, 1e-7):
        assert excess_transform(law.lst, 2.0, theta, law.lst_complement) == pytest.approx(exact(theta), abs=1e-15)
        assert excess_transform(law.lst, 2.0, theta) == pytest.approx(exact(theta), abs=1e-6)
    with pytest.raises(DomainError):
        excess_transform(law.lst, 0.0, 1.0)


def test_full_busy_period_matches_simulation():
    est = simulate(TWO_CLASS, SimOptions(seed=5, min_busy_cycles=200_000, thetas=(0.5, 1.0, 2.0)))
    solver = BusySolver(TWO_CLASS)
    lam = TWO_CLASS.lam_total
    for theta in (0.5, 1.0, 2.0):
        b = solver.solve(2, theta).b
        mix = sum(TWO_CLASS.lambdas[i] * b[i] for i in range(2)) / lam
        assert est.busy_lst(theta).within(mix, 4.0)
    # mean busy period: started by class i with probability lam_i / lam
    mean = sum(TWO_CLASS.lambdas[i] * solver.mean(job_sajd(TWO_CLASS, i), 2) for i in range(2)) / lam
    assert est.mean_busy_period().within(mean, 4.0)
