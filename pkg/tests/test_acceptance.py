"""Acceptance criteria.  Each test prints one PASS/FAIL line with its runtime and budget.

Run just this file with ``pytest tests/test_acceptance.py -v`` (the lines
appear in the output even without ``-s``), or ``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import math
import time
from typing import Callable

import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.stats import chi2

from mg1overhead import ClassSpec, Deterministic, Erlang, Exponential, Mode, PointMixture, SystemConfig, Uniform
from mg1overhead.busy import BusySolver
from mg1overhead.loads import load_profile, stability_report
from mg1overhead.response import extra_work_mixture, extra_work_transform, response_moments, response_transform
from mg1overhead.sajd import repeat_different_jjt, repeat_identical_jjt
from mg1overhead.sim import SimOptions, sample_jobs, simulate

import support

N_SE = 3.0


def _overhead_config(seed: int, n: int, rho_range=(0.3, 0.85)) -> SystemConfig:
    return support.random_config(1000 + seed, n=n, rho_range=rho_range)


def _simulate_until(config: SystemConfig, completions: int, seed: int, chunk: int = 200_000):
    """Simulate independent replications and merge them until every class has enough completions."""
    est = None
    rep = 0
    while est is None or min(est.completions(k) for k in range(config.n)) < completions:
        run = simulate(config, SimOptions(seed=seed * 1000 + rep, min_busy_cycles=chunk))
        est = run if est is None else est.merge(run)
        rep += 1
    return est


def _worst(zs: list[tuple[str, float]]) -> tuple[str, float]:
    finite = [(name, z) for name, z in zs if not math.isnan(z)]
    return max(finite, key=lambda nz: abs(nz[1]))


def criterion_1() -> tuple[bool, str]:
    grid = [0.01 * 1.4**i for i in range(20)]
    worst = 0.0
    for seed in range(20):
        cfg = support.random_config(seed, overhead=False, rho_range=(0.1, 0.9))
        for k in range(cfg.n):
            for theta in grid:
                worst = max(worst, abs(response_transform(cfg, k, theta) - support.classical_response_transform(cfg, k, theta)))
    return worst <= 1e-8, f"20 zero-overhead configs x 20 thetas, max |diff| = {worst:.2e} (tol 1e-8)"


def criterion_2() -> tuple[bool, str]:
    b = BusySolver(support.MM1).solve(1, 1.0).b[0]
    m1, m2 = response_moments(support.MM1, 0, 2)
    b_err = abs(b - (2.5 - math.sqrt(4.25)))
    e1, e2 = abs(m1 - 2.0) / 2.0, abs(m2 - 8.0) / 8.0
    ok = b_err <= 1e-10 and e1 <= 1e-6 and e2 <= 1e-6
    return ok, f"|b - (2.5 - sqrt 4.25)| = {b_err:.1e}, rel err E[T] = {e1:.1e}, E[T^2] = {e2:.1e}"


def criterion_3() -> tuple[bool, str]:
    zs = []
    for seed in range(10):
        cfg = _overhead_config(seed, n=2 + seed % 2)
        prof = load_profile(cfg)
        est = _simulate_until(cfg, 100_000, seed)
        for k in range(cfg.n):
            zs.append((f"cfg{seed} C*[{k}]", est.mean_pause_per_job(k).z_score(prof.pause_per_job[k])))
            zs.append((f"cfg{seed} D*[{k}]", est.mean_resume_per_job(k).z_score(prof.resume_per_job[k])))
    name, z = _worst(zs)
    return abs(z) <= N_SE, f"{len(zs)} comparisons, worst {name} z = {z:+.2f}"


def criterion_4() -> tuple[bool, str]:
    zs = []
    for seed in range(5):
        cfg = _overhead_config(50 + seed, n=2 + seed % 3)
        est = simulate(cfg, SimOptions(seed=seed, min_busy_cycles=300_000))
        for i in range(cfg.n):
            for j in range(cfg.n):
                zs.append((f"cfg{seed} A[{i},{j}]/R[{i}]", est.arrival_rate_during(i, j).z_score(cfg.lambdas[j])))
    name, z = _worst(zs)
    return abs(z) <= N_SE, f"{len(zs)} class pairs, worst {name} z = {z:+.2f}"


def _geometric_fit(hist: np.ndarray, p: float) -> float:
    """Chi-square p-value of a link-count histogram (bins 1, 2, ...) against Geometric(p)."""
    counts = hist[1:].astype(float)
    total = counts.sum()
    ks = np.arange(1, counts.size + 1)
    probs = p * (1.0 - p) ** (ks - 1)
    probs[-1] = (1.0 - p) ** (counts.size - 1)  # last bin holds the tail
    expected = total * probs
    # pool the tail until each expected count is at least 5
    obs, exp = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(counts, expected):
        acc_o += o
        acc_e += e
        if acc_e >= 5.0:
            obs.append(acc_o)
            exp.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0.0:
        obs[-1] += acc_o
        exp[-1] += acc_e
    if len(obs) < 2:
        return 1.0
    stat = sum((o - e) ** 2 / e for o, e in zip(obs, exp))
    return float(chi2.sf(stat, len(obs) - 1))


def criterion_5() -> tuple[bool, str]:
    configs = [
        support.TWO_CLASS,
        SystemConfig(
            (
                ClassSpec(0.6, Exponential(2.0)),
                ClassSpec(0.3, Erlang(2, 2.0), Uniform(0.0, 0.4), Deterministic(0.8)),
            )
        ),
        SystemConfig(
            (
                ClassSpec(0.3, Deterministic(0.5)),
                ClassSpec(0.4, Exponential(2.0), Exponential(5.0), Erlang(2, 4.0)),
                ClassSpec(0.2, Exponential(1.0), Deterministic(0.2), Exponential(2.0)),
            )
        ),
    ]
    zs, pvals = [], []
    for c, cfg in enumerate(configs):
        est = simulate(cfg, SimOptions(seed=c, min_busy_cycles=300_000))
        for k in range(1, cfg.n):
            p = cfg.classes[k].resume.lst(cfg.lam_below(k))
            zs.append((f"cfg{c} class {k}", est.link_success(k).z_score(p)))
            pvals.append((f"cfg{c} class {k}", _geometric_fit(est.link_histogram(k), p)))
        if est.chains(0) or est.links(0):
            return False, f"cfg{c}: class 0 recorded overhead chains"
    name, z = _worst(zs)
    pname, pmin = min(pvals, key=lambda t: t[1])
    ok = abs(z) <= N_SE and pmin >= 1e-3
    return ok, f"success prob worst {name} z = {z:+.2f}; geometric chi-square min p = {pmin:.3f} ({pname})"


def criterion_6() -> tuple[bool, str]:
    worst_norm = 0.0
    for seed in range(50):
        cfg = support.random_config(2000 + seed)
        for k in range(cfg.n):
            worst_norm = max(worst_norm, abs(extra_work_mixture(cfg, k).total_probability - 1.0))
    zs = []
    thetas = (0.5, 1.0, 2.0)
    for seed in range(5):
        cfg = _overhead_config(80 + seed, n=2 + seed % 3)
        est = simulate(cfg, SimOptions(seed=seed, min_busy_cycles=300_000, thetas=thetas))
        for k in range(cfg.n):
            for t in thetas:
                zs.append((f"cfg{seed} X*[{k}]({t})", est.early_lst(k, t).z_score(extra_work_transform(cfg, k, t))))
    name, z = _worst(zs)
    ok = worst_norm <= 1e-10 and abs(z) <= N_SE
    return ok, f"max |sum p - 1| = {worst_norm:.1e} over 50 configs; X* vs sim worst {name} z = {z:+.2f} ({len(zs)} points)"


def criterion_7() -> tuple[bool, str]:
    zs = []
    for seed in range(10):
        cfg = _overhead_config(100 + seed, n=2 + seed % 3)
        est = simulate(cfg, SimOptions(seed=seed, min_busy_cycles=1_000_000))
        for k in range(cfg.n):
            m1, m2 = response_moments(cfg, k, 2)
            zs.append((f"cfg{seed} E[T{k}]", est.response_mean(k).z_score(m1)))
            zs.append((f"cfg{seed} E[T{k}^2]", est.response_second_moment(k).z_score(m2)))
    name, z = _worst(zs)
    return abs(z) <= N_SE, f"{len(zs)} moments over 10 configs, worst {name} z = {z:+.2f}"


def criterion_8() -> tuple[bool, str]:
    base = support.TWO_CLASS
    cycles = 5_000
    rows = []
    ok = True
    for target in (0.9, 0.95, 1.05, 1.1):
        lam2 = brentq(lambda x: load_profile(base.with_lambda(1, x)).total - target, 1e-6, 5.0, xtol=1e-14)
        cfg = base.with_lambda(1, lam2)
        stable = stability_report(cfg).stable
        # ten times the expected length of a stable run
        horizon = 10.0 * cycles / (cfg.lam_total * max(1.0 - target, 0.05))
        est = simulate(cfg, SimOptions(seed=7, min_busy_cycles=cycles, max_sim_time=horizon))
        rows.append(f"rho={target}: analytic stable={stable}, sim partial={est.partial}")
        ok &= stable == (target < 1.0) and est.partial == (not stable)
        if not stable:
            longer = simulate(cfg, SimOptions(seed=7, min_busy_cycles=cycles, max_sim_time=4.0 * horizon))
            grows = longer.final_in_system > est.final_in_system
            rows[-1] += f", queue {est.final_in_system} -> {longer.final_in_system} at 4x horizon"
            ok &= grows
    return ok, "; ".join(rows)


def criterion_9() -> tuple[bool, str]:
    # every solve below runs the built-in monotonicity assertion
    solves = 0
    worst_stable = 0.0
    for seed in range(10):
        cfg = support.random_config(3000 + seed)
        solver = BusySolver(cfg)
        for level in range(cfg.n + 1):
            for theta in (0.0, 0.1, 1.0):
                fp = solver.solve(level, theta)
                solves += 1
                if any(b != 1.0 for b in fp.b[level:]):
                    return False, f"entries at or above level {level} not pinned to 1"
                if theta == 0.0:
                    worst_stable = max(worst_stable, max(abs(1.0 - b) for b in fp.b))
    min_gap = math.inf
    checked = 0
    for seed in range(10):
        cfg = support.random_config(4000 + seed, rho=1.6)
        prof = load_profile(cfg)
        solver = BusySolver(cfg)
        for level in range(1, cfg.n + 1):
            if prof.rho_below(level) >= 1.2:
                fp = solver.solve(level, 0.0)
                solves += 1
                checked += 1
                min_gap = min(min_gap, min(1.0 - b for b in fp.b[:level]))
    ok = worst_stable <= 1e-10 and checked > 0 and min_gap >= 1e-3
    return ok, (
        f"{solves} monotone solves; stable theta=0 max |1-b| = {worst_stable:.1e}; "
        f"supercritical ({checked} levels) min 1-b = {min_gap:.3f}"
    )


def criterion_10() -> tuple[bool, str]:
    points = [(0.4, (0.7, 0.9)), (0.1, (0.5, 0.5)), (1.0, (0.9, 0.2)), (2.0, (1.0, 1.0)), (0.05, (0.95, 0.99))]
    cases = [
        ("repeat-different", Mode.REPEAT_DIFFERENT, Exponential(1.0), repeat_different_jjt),
        ("repeat-identical", Mode.REPEAT_IDENTICAL, PointMixture((0.5, 2.0), (0.5, 0.5)), repeat_identical_jjt),
    ]
    zs = []
    for name, mode, size, jjt in cases:
        cfg = SystemConfig((ClassSpec(0.2, Exponential(1.0)), ClassSpec(0.5, size)), mode)
        sample = sample_jobs(cfg, 1, 1_000_000, seed=11)
        for theta, z in points:
            zs.append((f"{name} theta={theta} z={z}", sample.transform(theta, z).z_score(jjt(cfg, 1, theta, z))))
    name, z = _worst(zs)
    return abs(z) <= N_SE, f"{len(zs)} points, worst {name} z = {z:+.2f}"


BUDGETS = {1: 10, 2: 1, 3: 120, 4: 120, 5: 60, 6: 300, 7: 900, 8: 180, 9: 60, 10: 120}
CRITERIA: dict[int, Callable[[], tuple[bool, str]]] = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
}


def evaluate(number: int) -> tuple[bool, str]:
    start = time.perf_counter()
    ok, detail = CRITERIA[number]()
    elapsed = time.perf_counter() - start
    in_time = elapsed <= BUDGETS[number]
    verdict = "PASS" if ok and in_time else "FAIL"
    timing = f"{elapsed:.1f}s of {BUDGETS[number]}s" + ("" if in_time else " OVER BUDGET")
    return ok and in_time, f"ACCEPTANCE {number}: {verdict} [{timing}] {detail}"


def _run(number: int, capsys) -> None:
    ok, line = evaluate(number)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


def test_criterion_1_zero_overhead_reduction(capsys):
    _run(1, capsys)


def test_criterion_2_mm1_closed_forms(capsys):
    _run(2, capsys)


@pytest.mark.slow
def test_criterion_3_overhead_loads_vs_sim(capsys):
    _run(3, capsys)


@pytest.mark.slow
def test_criterion_4_arrival_rate_identity(capsys):
    _run(4, capsys)


@pytest.mark.slow
def test_criterion_5_geometric_links(capsys):
    _run(5, capsys)


@pytest.mark.slow
def test_criterion_6_extra_work_mixture(capsys):
    _run(6, capsys)


@pytest.mark.slow
def test_criterion_7_response_moments_vs_sim(capsys):
    _run(7, capsys)


@pytest.mark.slow
def test_criterion_8_stability_boundary(capsys):
    _run(8, capsys)


def test_criterion_9_least_fixed_point(capsys):
    _run(9, capsys)


def test_criterion_10_repeat_jjts(capsys):
    _run(10, capsys)


if __name__ == "__main__":
    results = [evaluate(i) for i in sorted(CRITERIA)]
    for _, line in results:
        print(line)
    raise SystemExit(0 if all(ok for ok, _ in results) else 1)
