"""Command-line front end: ``analyze``, ``simulate``, ``validate`` and ``sweep``.

Reports are JSON on stdout; ``sweep`` writes CSV.  Exit status is 0 on
success, 1 for usage or config errors, 2 when ``validate`` finds a
z-score above 4 (or the system is unstable) and 3 when a numerical
solver fails to converge.

The default simulation seed comes from ``MG1OH_SEED`` when set; an
explicit ``--seed`` always wins.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import os
import re
import sys
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from .busy import BusySolver
from .durations import ZERO, distribution_from_dict
from .errors import (
    ConfigError,
    ConvergenceError,
    DomainError,
    ModelError,
    NumericPrecisionError,
    UnsupportedConfigurationError,
)
from .loads import load_profile, stability_report
from .model import ClassSpec, Mode, SystemConfig
from .response import extra_work_transform, response_moments, response_transform
from .sajd import job_sajd

__all__ = ["parse_config", "config_from_dict", "config_to_dict", "run", "main"]

SEED_ENV = "MG1OH_SEED"
DEFAULT_THETAS = (0.01, 0.1, 0.5, 1.0, 2.0, 5.0)
Z_LIMIT = 4.0

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_NUMERIC = 0, 1, 2, 3

_CLASS_KEYS = {"lambda", "size", "pause", "resume"}


# -- config ingestion ----------------------------------------------------------


def config_from_dict(doc: Any) -> SystemConfig:
    """Validate a config document and build the system; errors name the offending field."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object", "$")
    unknown = set(doc) - {"mode", "classes"}
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", "$")
    mode_name = doc.get("mode", Mode.PAUSE_RESUME.value)
    try:
        mode = Mode(mode_name)
    except ValueError:
        known = ", ".join(m.value for m in Mode)
        raise ConfigError(f"unknown mode {mode_name!r} (known: {known})", "mode") from None
    raw = doc.get("classes")
    if not isinstance(raw, list) or not raw:
        raise ConfigError("must be a nonempty list", "classes")
    classes = []
    for i, entry in enumerate(raw):
        where = f"classes[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError("class entry must be an object", where)
        extra = set(entry) - _CLASS_KEYS
        if extra:
            raise ConfigError(f"unknown keys {sorted(extra)}", where)
        lam = entry.get("lambda")
        if isinstance(lam, bool) or not isinstance(lam, (int, float)) or not math.isfinite(lam) or lam <= 0:
            raise ConfigError(f"arrival rate must be a positive finite number, got {lam!r}", f"{where}.lambda")
        if "size" not in entry:
            raise ConfigError("missing", f"{where}.size")
        size = distribution_from_dict(entry["size"], f"{where}.size")
        if not size.mean > 0:
            raise ConfigError("job size must have positive mean", f"{where}.size")
        laws = {}
        for key in ("pause", "resume"):
            laws[key] = distribution_from_dict(entry[key], f"{where}.{key}") if key in entry else ZERO
            if mode is not Mode.PAUSE_RESUME and not laws[key].is_zero:
                raise ConfigError(f"{mode.value} mode takes no {key} overhead", f"{where}.{key}")
        classes.append(ClassSpec(float(lam), size, laws["pause"], laws["resume"]))
    try:
        return SystemConfig(tuple(classes), mode)
    except DomainError as exc:
        raise ConfigError(str(exc), "$") from exc


def parse_config(path: str | Path) -> SystemConfig:
    """Read and validate a JSON config file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, f"line {exc.lineno}, column {exc.colno}") from exc
    return config_from_dict(doc)


def config_to_dict(config: SystemConfig) -> dict:
    """Config document with every default filled in."""
    return {
        "mode": config.mode.value,
        "classes": [
            {"lambda": c.lam, "size": c.size.to_dict(), "pause": c.pause.to_dict(), "resume": c.resume.to_dict()}
            for c in config.classes
        ],
    }


# -- helpers -------------------------------------------------------------------


def _num(x: float) -> float | None:
    """JSON-safe number: NaN and infinities become null."""
    x = float(x)
    return x if math.isfinite(x) else None


def _theta_key(theta: float) -> str:
    return repr(float(theta))


def _comparison(name: str, analytic: float, est) -> dict:
    z = est.z_score(analytic)
    return {
        "quantity": name,
        "analytic": _num(analytic),
        "simulated": _num(est.value),
        "se": _num(est.se),
        "z": _num(z),
    }


# -- analyze ---------------------------------------------------------------------


def analyze(config: SystemConfig, thetas: Sequence[float] = DEFAULT_THETAS, variant: str = "corrected") -> dict:
    prof = load_profile(config)
    stab = stability_report(config)
    solver = BusySolver(config)
    classes = []
    for k in range(config.n):
        entry: dict[str, Any] = {
            "class": k,
            "sigma": prof.sigma[k],
            "gamma": prof.gamma[k],
            "delta": prof.delta[k],
            "rho": prof.rho[k],
            "effective_size": prof.effective_size[k],
            "mean_pause_per_job": prof.pause_per_job[k],
            "mean_resume_per_job": prof.resume_per_job[k],
            # busy period of classes < k started by one class-k job, then the full one
            "busy_mean_below": _num(solver.mean(job_sajd(config, k), k)),
            "busy_mean_full": _num(solver.mean(job_sajd(config, k), config.n)),
        }
        classes.append(entry)
    report: dict[str, Any] = {
        "command": "analyze",
        "config": config_to_dict(config),
        "loads": prof.to_dict(),
        "stability": {k: v for k, v in stab.to_dict().items() if k != "mean_offspring_matrix"},
        "classes": classes,
    }
    if not stab.stable:
        report["response"] = "unstable"
        return report
    if config.mode is not Mode.PAUSE_RESUME:
        report["response"] = {"unsupported": f"response-time analysis covers pause-resume mode only, not {config.mode.value}"}
        return report
    response = []
    for k in range(config.n):
        m1, m2 = response_moments(config, k, 2, variant=variant)
        response.append(
            {
                "class": k,
                "mean": m1,
                "second_moment": m2,
                "transform": {_theta_key(t): response_transform(config, k, t, variant=variant) for t in thetas},
            }
        )
    report["response"] = response
    return report


# -- simulate / validate ---------------------------------------------------------


def _simulate(config: SystemConfig, cycles: int, seed: int, trace: str | None = None, max_time: float = math.inf):
    from .sim import SimOptions, simulate

    opts = SimOptions(seed=seed, min_busy_cycles=cycles, max_sim_time=max_time, trace=trace is not None)
    est = simulate(config, opts)
    if trace is not None:
        est.trace.write(trace)
    return est


def simulate_report(config: SystemConfig, cycles: int, seed: int, trace: str | None = None, max_time: float = math.inf) -> dict:
    est = _simulate(config, cycles, seed, trace, max_time)
    return {"command": "simulate", "config": config_to_dict(config), "seed": seed, "estimates": est.to_dict()}


def validate(config: SystemConfig, cycles: int, seed: int, variant: str = "corrected") -> dict:
    prof = load_profile(config)
    stab = stability_report(config)
    report: dict[str, Any] = {"command": "validate", "config": config_to_dict(config), "seed": seed}
    if not stab.stable:
        report["stability"] = {k: v for k, v in stab.to_dict().items() if k != "mean_offspring_matrix"}
        report["response"] = "unstable"
        report["passed"] = False
        return report
    est = _simulate(config, cycles, seed)
    rows = []
    solver = BusySolver(config)
    lam = config.lam_total
    for t in est.thetas:
        b = solver.solve(config.n, t).b
        analytic = sum(config.lambdas[i] * b[i] for i in range(config.n)) / lam
        rows.append(_comparison(f"busy_lst[theta={t}]", analytic, est.busy_lst(t)))
    rows.append(_comparison("busy_fraction", prof.total, est.busy_fraction()))
    for k in range(config.n):
        rows.append(_comparison(f"effective_size[{k}]", prof.effective_size[k], est.mean_effective_size(k)))
        rows.append(_comparison(f"time_fraction_original[{k}]", prof.sigma[k], est.time_fraction(k, "original")))
        for j in range(config.n):
            rows.append(_comparison(f"arrival_rate_during[{k},{j}]", config.lambdas[j], est.arrival_rate_during(k, j)))
        if config.mode is not Mode.PAUSE_RESUME:
            continue
        rows.append(_comparison(f"time_fraction_pause[{k}]", prof.gamma[k], est.time_fraction(k, "pause")))
        rows.append(_comparison(f"time_fraction_resume[{k}]", prof.delta[k], est.time_fraction(k, "resume")))
        if est.links(k) > 0:
            lam_lt = config.lam_below(k)
            rows.append(_comparison(f"link_success[{k}]", config.classes[k].resume.lst(lam_lt), est.link_success(k)))
        m1, m2 = response_moments(config, k, 2, variant=variant)
        rows.append(_comparison(f"response_mean[{k}]", m1, est.response_mean(k)))
        rows.append(_comparison(f"response_second_moment[{k}]", m2, est.response_second_moment(k)))
        if est.early_arrivals(k) > 1:
            for t in est.thetas:
                rows.append(
                    _comparison(f"extra_work_lst[{k},theta={t}]", extra_work_transform(config, k, t, variant=variant), est.early_lst(k, t))
                )
    worst = max((abs(r["z"]) for r in rows if r["z"] is not None), default=0.0)
    report.update(
        {
            "cycles": est.cycles,
            "partial": est.partial,
            "comparisons": rows,
            "max_abs_z": worst,
            "z_limit": Z_LIMIT,
            "passed": bool(worst <= Z_LIMIT and not est.partial),
        }
    )
    return report


# -- sweep -----------------------------------------------------------------------

_PATH_TOKEN = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)|\[(\d+)\]")


def _path_tokens(path: str) -> list[str | int]:
    tokens: list[str | int] = []
    for part in path.split("."):
        matched = 0
        for m in _PATH_TOKEN.finditer(part):
            if m.start() != matched:
                break
            tokens.append(m.group(1) if m.group(1) is not None else int(m.group(2)))
            matched = m.end()
        if matched != len(part) or not part:
            raise ConfigError(f"malformed parameter path near {part!r}", path)
    return tokens


def set_path(doc: Any, path: str, value: float) -> Any:
    """Copy of ``doc`` with the entry at ``path`` (e.g. ``classes[1].lambda``) replaced."""
    out = copy.deepcopy(doc)
    tokens = _path_tokens(path)
    node = out
    for tok in tokens[:-1]:
        try:
            node = node[tok]
        except (KeyError, IndexError, TypeError):
            raise ConfigError("no such entry", path) from None
    last = tokens[-1]
    try:
        node[last]
    except (KeyError, IndexError, TypeError):
        raise ConfigError("no such entry", path) from None
    node[last] = value
    return out


def parse_grid(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError("grid must look like a:b:steps", "--grid")
    try:
        a, b, steps = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError("grid must look like a:b:steps", "--grid") from None
    if steps < 1:
        raise ConfigError("steps must be at least 1", "--grid")
    return np.linspace(a, b, steps)


def _metric_table() -> dict[str, tuple[bool, Callable[[SystemConfig, int | None], Any]]]:
    """name -> (needs class index, evaluator).  Response metrics need a stable system."""

    def resp(idx: int):
        def f(cfg, k):
            if not stability_report(cfg).stable:
                return None
            return response_moments(cfg, k, 2)[idx]

        return f

    return {
        "rho": (False, lambda cfg, k: load_profile(cfg).total),
        "stable": (False, lambda cfg, k: stability_report(cfg).stable),
        "spectral_radius": (False, lambda cfg, k: stability_report(cfg).spectral_radius),
        "rho_class": (True, lambda cfg, k: load_profile(cfg).rho[k]),
        "effective_size": (True, lambda cfg, k: load_profile(cfg).effective_size[k]),
        "response_mean": (True, resp(0)),
        "response_second_moment": (True, resp(1)),
    }


_METRIC_SYNTAX = re.compile(r"^([a-z_]+)(?:\[(\d+)\])?$")


def parse_metrics(text: str, n: int) -> list[tuple[str, str, int | None]]:
    table = _metric_table()
    out = []
    for raw in text.split(","):
        raw = raw.strip()
        m = _METRIC_SYNTAX.match(raw)
        if not m or m.group(1) not in table:
            raise ConfigError(f"unknown metric {raw!r} (known: {', '.join(sorted(table))})", "--metric")
        name, idx = m.group(1), m.group(2)
        indexed = table[name][0]
        if indexed != (idx is not None):
            raise ConfigError(f"metric {name!r} {'needs' if indexed else 'takes no'} a class index", "--metric")
        if idx is not None and int(idx) >= n:
            raise ConfigError(f"class index {idx} out of range", "--metric")
        out.append((raw, name, int(idx) if idx is not None else None))
    return out


def sweep(doc: dict, param: str, grid: np.ndarray, metrics: str, out) -> None:
    base = config_from_dict(doc)
    chosen = parse_metrics(metrics, base.n)
    table = _metric_table()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow([param] + [label for label, _, _ in chosen])
    for value in grid:
        cfg = config_from_dict(set_path(doc, param, float(value)))
        row: list[Any] = [repr(float(value))]
        for _, name, k in chosen:
            v = table[name][1](cfg, k)
            row.append("" if v is None else (str(v).lower() if isinstance(v, bool) else repr(float(v))))
        writer.writerow(row)


# -- entry points ----------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _thetas(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated numbers") from None
    if any(not v >= 0 for v in vals):
        raise argparse.ArgumentTypeError("theta values must be nonnegative")
    return vals


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mg1oh", description="Priority M/G/1 with preemption overhead: analysis and simulation.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="analytic loads, stability, busy means and response moments")
    p.add_argument("config")
    p.add_argument("--thetas", type=_thetas, default=DEFAULT_THETAS, help="comma-separated transform sample points")
    p.add_argument("--variant", choices=("corrected", "full-resume"), default="corrected")

    for name, helptext in (("simulate", "run the discrete-event simulator"), ("validate", "compare analysis against simulation")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config")
        p.add_argument("--cycles", type=_positive_int, default=100_000, help="busy cycles to simulate")
        p.add_argument("--seed", type=int, default=None, help=f"master seed (default: ${SEED_ENV} or 0)")
        if name == "simulate":
            p.add_argument("--trace", metavar="PATH", default=None, help="write a tab-separated event trace")
            p.add_argument("--max-time", type=float, default=math.inf, help="stop after this much simulated time")
        else:
            p.add_argument("--variant", choices=("corrected", "full-resume"), default="corrected")

    p = sub.add_parser("sweep", help="CSV of metrics over a parameter grid")
    p.add_argument("config")
    p.add_argument("--param", required=True, help="JSON path of the swept entry, e.g. classes[1].lambda")
    p.add_argument("--grid", required=True, help="a:b:steps")
    p.add_argument("--metric", required=True, help="comma-separated metric names, e.g. rho,stable,response_mean[1]")
    return parser


def _seed(flag: int | None) -> int:
    if flag is not None:
        return flag
    env = os.environ.get(SEED_ENV)
    if env is None or env == "":
        return 0
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"must be an integer, got {env!r}", SEED_ENV) from None


def run(args: argparse.Namespace, out=None) -> int:
    """Execute a parsed command, writing its output to ``out``; returns the exit status."""
    out = out or sys.stdout
    if args.command == "sweep":
        path = Path(args.config)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(exc.msg, f"line {exc.lineno}, column {exc.colno}") from exc
        sweep(doc, args.param, parse_grid(args.grid), args.metric, out)
        return EXIT_OK
    config = parse_config(args.config)
    status = EXIT_OK
    if args.command == "analyze":
        report = analyze(config, args.thetas, args.variant)
    elif args.command == "simulate":
        report = simulate_report(config, args.cycles, _seed(args.seed), args.trace, args.max_time)
    else:
        report = validate(config, args.cycles, _seed(args.seed), args.variant)
        if not report["passed"]:
            status = EXIT_VALIDATION
    json.dump(report, out, indent=2, allow_nan=False)
    out.write("\n")
    return status


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return run(args)
    except ConfigError as exc:
        print(f"mg1oh: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceError, NumericPrecisionError) as exc:
        print(f"mg1oh: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except UnsupportedConfigurationError as exc:
        print(f"mg1oh: unsupported: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ModelError as exc:
        print(f"mg1oh: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
