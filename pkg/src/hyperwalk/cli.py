"""Command-line front end.

Subcommands: ``simulate``, ``mixing``, ``bounds``, ``compare``, ``sweep``.
Exit codes: 0 success, 1 usage or domain error, 2 numeric failure,
3 result absent (e.g. stability not certified within the horizon).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

import hyperwalk
from hyperwalk.core import (
    PROB_CLAMP_TOL,
    PROB_SUM_TOL,
    DomainError,
    HyperCycleConfig,
    NumericError,
    ResourceError,
    check_distribution,
    encode_multi_index,
    localized_state,
    parse_digits,
    vertex_label,
)
from hyperwalk.cycle import AnalyticKernel, build_cycle_superoperator, evolve_numeric
from hyperwalk.hyper import DEFAULT_MEMORY_CAP, evolve_hyper, hyper_probability_product
from hyperwalk.mixing import (
    KernelSource,
    MixingQuery,
    NumericSource,
    measure_mixing_time,
    mixing_bound,
    mixing_bounds,
    uniform_source,
)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_ABSENT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def fmt(x: float) -> str:
    """17 significant digits, lowercase scientific notation."""
    return f"{float(x):.16e}"


def _float_list(value) -> list[float]:
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    return [float(v) for v in str(value).split(",") if v.strip()]


def _int_list(value) -> list[int]:
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    return [int(v) for v in str(value).split(",") if v.strip()]


COMMON_KEYS = (
    "size", "dims", "gamma", "epsilon", "t_max", "dt", "backend", "path",
    "regime", "start", "output", "source", "initial", "weak_form", "rate_scale",
)


def _common_parser() -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    p.add_argument("--config", help="JSON file with parameters; flags override it")
    p.add_argument("--size", help="vertices per cycle N (comma list for bounds)")
    p.add_argument("--dims", help="hyper-cycle dimension n (comma list for bounds)")
    p.add_argument("--gamma", help="decoherence rate (comma list for bounds and sweep)")
    p.add_argument("--epsilon", help="mixing threshold (comma list for bounds)")
    p.add_argument("--t-max", dest="t_max", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--backend", choices=["exact", "ode", "auto"])
    p.add_argument("--path", choices=["factored", "full", "auto"])
    p.add_argument("--regime", choices=["weak", "strong"])
    p.add_argument("--start", help="initial vertex digits, e.g. 000")
    p.add_argument("--output", help="output CSV path; a .json sidecar is written next to it")
    p.add_argument("--source", choices=["numeric", "analytic"], help="mixing: probability source")
    p.add_argument("--initial", choices=["localized", "uniform"], help="mixing: initial distribution")
    p.add_argument("--weak-form", dest="weak_form", choices=["fourier", "shifted"])
    p.add_argument("--rate-scale", dest="rate_scale", type=float)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hyperwalk", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=hyperwalk.__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_parser()
    sub.add_parser("simulate", parents=[common], help="probability time series P_a(t)")
    sub.add_parser("mixing", parents=[common], help="first-hit and stable mixing times")
    sub.add_parser("bounds", parents=[common], help="analytic mixing-time bounds over a grid")
    sub.add_parser("compare", parents=[common], help="closed-form kernel vs numeric residuals")
    sub.add_parser("sweep", parents=[common], help="measured mixing time vs gamma")
    return parser


def _merge_config(args: argparse.Namespace) -> dict:
    cfg = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(cfg) - set(COMMON_KEYS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
    for key in COMMON_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _scalar(cfg: dict, key: str, cast, default=None, required=False):
    if key not in cfg or cfg[key] is None:
        if required:
            raise UsageError(f"--{key.replace('_', '-')} is required")
        return default
    value = cfg[key]
    if isinstance(value, str) and "," in value:
        raise UsageError(f"--{key.replace('_', '-')} takes a single value for this command")
    try:
        return cast(value)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad value for --{key.replace('_', '-')}: {value!r}") from exc


def _hyper_config(cfg: dict, gamma_required=True) -> HyperCycleConfig:
    N = _scalar(cfg, "size", int, 3)
    n = _scalar(cfg, "dims", int, 1)
    gamma = _scalar(cfg, "gamma", float, required=gamma_required)
    return HyperCycleConfig.from_params(N, gamma, n)


def _start(cfg: dict, config: HyperCycleConfig) -> tuple[int, ...]:
    label = cfg.get("start")
    if label is None:
        return (0,) * config.dims_n
    return parse_digits(str(label), config)


def _time_grid(t_max: float, dt: float) -> np.ndarray:
    if t_max < 0 or not math.isfinite(t_max):
        raise DomainError(f"t-max must be finite and >= 0, got {t_max!r}")
    if t_max == 0:
        return np.array([0.0])
    if not dt > 0:
        raise DomainError(f"dt must be > 0, got {dt!r}")
    steps = max(1, int(round(t_max / dt)))
    return np.linspace(0.0, t_max, steps + 1)


def _kernel(regime: str, config: HyperCycleConfig, cfg: dict) -> AnalyticKernel:
    options = {}
    if regime == "weak" and cfg.get("weak_form"):
        options["form"] = cfg["weak_form"]
    if regime == "strong" and cfg.get("rate_scale") is not None:
        options["rate_scale"] = float(cfg["rate_scale"])
    return AnalyticKernel(regime, config.base, options)


class Outputs:
    """Collects CSV text and a JSON document and writes them deterministically."""

    def __init__(self, cfg: dict, json_primary: bool = False):
        self.path = Path(cfg["output"]) if cfg.get("output") else None
        self.json_primary = json_primary
        self.csv = io.StringIO(newline="")
        self._writer = csv.writer(self.csv, lineterminator="\n")

    def row(self, *fields) -> None:
        self._writer.writerow(fields)

    def sidecar_path(self) -> Path:
        side = self.path.with_suffix(".json")
        return side if side != self.path else self.path.with_name(self.path.name + ".meta.json")

    def finish(self, document: dict) -> None:
        text = json.dumps(document, sort_keys=True, indent=2) + "\n"
        if self.path is None:
            sys.stdout.write(text if self.json_primary else self.csv.getvalue())
            return
        with open(self.path, "w", newline="\n") as fh:
            fh.write(self.csv.getvalue())
        with open(self.sidecar_path(), "w", newline="\n") as fh:
            fh.write(text)


def _base_document(command: str, cfg: dict) -> dict:
    return {
        "command": command,
        "parameters": {k: cfg[k] for k in sorted(cfg) if k != "output"},
        "version": hyperwalk.__version__,
    }


# -- commands -------------------------------------------------------------------


def cmd_simulate(cfg: dict) -> int:
    config = _hyper_config(cfg)
    start = _start(cfg, config)
    t_max = _scalar(cfg, "t_max", float, 30.0)
    dt = _scalar(cfg, "dt", float, 0.1)
    times = _time_grid(t_max, dt)
    D = config.num_vertices
    flat = encode_multi_index(start, config)
    if not cfg.get("regime") and D * D > DEFAULT_MEMORY_CAP:
        raise ResourceError(f"a {D}x{D} density matrix exceeds the cap of {DEFAULT_MEMORY_CAP} entries")
    doc = _base_document("simulate", cfg)

    regime = cfg.get("regime")
    if regime:
        kernel = _kernel(regime, config, cfg)
        probs = np.array([hyper_probability_product(kernel, config, start, t) for t in times])
        doc["evolution"] = {"source": "analytic-product", "kernel": kernel.metadata()}
    elif config.dims_n == 1:
        superop = build_cycle_superoperator(config.base)
        ev = evolve_numeric(superop, localized_state(D, flat), times, backend=cfg.get("backend") or "auto")
        probs = ev.probabilities
        doc["evolution"] = ev.info
    else:
        ev = evolve_hyper(config, localized_state(D, flat), times, path=cfg.get("path") or "auto")
        probs = ev.probabilities
        doc["evolution"] = ev.info

    clamped = int(np.count_nonzero(probs < 0))
    try:
        probs = np.array([check_distribution(p) for p in probs])
    except DomainError as exc:
        raise NumericError(f"emitted distribution failed validation: {exc}") from exc

    out = Outputs(cfg)
    out.row("t", "vertex", "probability")
    labels = [vertex_label(i, config) for i in range(D)]
    for t, p in zip(times, probs):
        ts = fmt(t)
        for label, value in zip(labels, p):
            out.row(ts, label, fmt(value))
    doc["clamped"] = clamped
    doc["tolerances"] = {"probability_clamp": PROB_CLAMP_TOL, "probability_sum": PROB_SUM_TOL}
    doc["rows"] = int(times.size * D)
    doc["kernel_backend"] = hyperwalk.KERNEL_BACKEND
    out.finish(doc)
    return EXIT_OK


def _default_regime(config: HyperCycleConfig, cfg: dict) -> str:
    return cfg.get("regime") or ("weak" if config.gamma < 1 else "strong")


def cmd_mixing(cfg: dict) -> int:
    config = _hyper_config(cfg)
    eps = _scalar(cfg, "epsilon", float, 0.05)
    regime = _default_regime(config, cfg)
    start = _start(cfg, config)
    bounds = mixing_bounds(regime, config, eps)
    bound = mixing_bound(regime, config, eps)

    t_max = _scalar(cfg, "t_max", float)
    dt = _scalar(cfg, "dt", float)
    query = MixingQuery.from_bound(eps, bound)
    if t_max is not None or dt is not None:
        t_max = t_max if t_max is not None else query.t_max
        dt = dt if dt is not None else t_max / 10000
        query = MixingQuery(eps, t_max, dt, dt / 100)

    source_name = cfg.get("source") or "numeric"
    if (cfg.get("initial") or "localized") == "uniform":
        source, method = uniform_source(config.num_vertices), "uniform"
    elif source_name == "analytic":
        source = KernelSource(_kernel(regime, config, cfg), config, start)
        method = source.method
    else:
        source = NumericSource(config, start)
        method = source.method
    result = measure_mixing_time(source, query, bound, regime)

    out = Outputs(cfg, json_primary=True)
    out.row("t", "tv")
    for t, v in zip(result.times, result.tv):
        out.row(fmt(t), fmt(v))
    doc = _base_document("mixing", cfg)
    doc.update(
        {
            "first_hit_time": result.first_hit_time,
            "stable_time": result.stable_time,
            "horizon": result.horizon,
            "dt": query.dt,
            "refine_tol": query.refine_tol,
            "epsilon": eps,
            "regime": regime,
            "bound": bound,
            "bounds": bounds,
            "source": method,
            "diagnostic": result.diagnostic,
        }
    )
    out.finish(doc)
    return EXIT_ABSENT if result.stable_time is None else EXIT_OK


def cmd_bounds(cfg: dict) -> int:
    sizes = _int_list(cfg.get("size", 3))
    dims = _int_list(cfg.get("dims", 1))
    gammas = _float_list(cfg["gamma"]) if cfg.get("gamma") is not None else []
    epsilons = _float_list(cfg.get("epsilon", 0.05))
    if not gammas:
        raise UsageError("--gamma is required")
    regimes = [cfg["regime"]] if cfg.get("regime") else ["weak", "strong"]
    out = Outputs(cfg)
    out.row("regime", "N", "n", "gamma", "epsilon", "bound", "formula")
    rows = []
    for regime in regimes:
        for N in sizes:
            for n in dims:
                for gamma in gammas:
                    for eps in epsilons:
                        variants = ["single", "general"] if n == 1 else ["general"]
                        for variant in variants:
                            formula = f"{regime}-{variant}"
                            try:
                                config = HyperCycleConfig.from_params(N, gamma, n)
                                value = mixing_bound(regime, config, eps, variant)
                                cell = fmt(value)
                            except DomainError as exc:
                                value, cell = None, "invalid"
                                formula = f"{formula}: {exc}"
                            out.row(regime, N, n, fmt(gamma), fmt(eps), cell, formula)
                            rows.append(
                                {"regime": regime, "N": N, "n": n, "gamma": gamma, "epsilon": eps,
                                 "bound": value, "formula": formula}
                            )
    doc = _base_document("bounds", cfg)
    doc["rows"] = rows
    out.finish(doc)
    return EXIT_OK


def cmd_compare(cfg: dict) -> int:
    config = _hyper_config(cfg)
    regime = cfg.get("regime")
    if not regime:
        raise UsageError("--regime is required")
    N, n = config.size_N, config.dims_n
    default_t = 100.0 if regime == "weak" else 2 * config.gamma * N**2
    t_max = _scalar(cfg, "t_max", float, default_t)
    dt = _scalar(cfg, "dt", float, t_max / 200 if t_max > 0 else 1.0)
    times = _time_grid(t_max, dt)
    kernel = _kernel(regime, config, cfg)

    out = Outputs(cfg)
    out.row("t", "max_abs", "tv")
    max_abs_all, tv_all = 0.0, 0.0
    if n == 1:
        superop = build_cycle_superoperator(config.base)
        ev = evolve_numeric(superop, localized_state(N), times, backend=cfg.get("backend") or "auto")
        info = ev.info
        for t, rho in zip(times, ev.states):
            C = kernel.matrix(t)
            max_abs = float(np.max(np.abs(C - rho)))
            tv = float(np.abs(np.real(np.diag(C)) - np.real(np.diag(rho))).sum())
            max_abs_all, tv_all = max(max_abs_all, max_abs), max(tv_all, tv)
            out.row(fmt(t), fmt(max_abs), fmt(tv))
    else:
        ev = evolve_hyper(config, localized_state(N**n), times, path=cfg.get("path") or "auto")
        info = ev.info
        for t, p_num in zip(times, ev.probabilities):
            p = hyper_probability_product(kernel, config, (0,) * n, t)
            max_abs = float(np.max(np.abs(p - p_num)))
            tv = float(np.abs(p - p_num).sum())
            max_abs_all, tv_all = max(max_abs_all, max_abs), max(tv_all, tv)
            out.row(fmt(t), fmt(max_abs), fmt(tv))
    out.row("max", fmt(max_abs_all), fmt(tv_all))
    doc = _base_document("compare", cfg)
    doc.update({"kernel": kernel.metadata(), "numeric": info, "max_abs": max_abs_all, "max_tv": tv_all})
    out.finish(doc)
    return EXIT_OK


def cmd_sweep(cfg: dict) -> int:
    gammas = _float_list(cfg["gamma"]) if cfg.get("gamma") is not None else []
    if not gammas:
        raise UsageError("--gamma needs at least one value")
    N = _scalar(cfg, "size", int, 3)
    n = _scalar(cfg, "dims", int, 1)
    eps = _scalar(cfg, "epsilon", float, 0.05)
    t_max_flag = _scalar(cfg, "t_max", float)
    dt_flag = _scalar(cfg, "dt", float)

    out = Outputs(cfg)
    out.row("gamma", "first_hit", "stable", "weak_bound", "strong_bound")
    rows = []
    for gamma in gammas:
        config = HyperCycleConfig.from_params(N, gamma, n)
        bounds = {}
        for regime in ("weak", "strong"):
            try:
                bounds[regime] = mixing_bound(regime, config, eps, "general")
            except DomainError:
                bounds[regime] = None
        row = {"gamma": gamma, "first_hit": None, "stable": None, **{f"{k}_bound": v for k, v in bounds.items()}}
        valid = [b for b in bounds.values() if b is not None and b > 0]
        t_max = t_max_flag if t_max_flag is not None else (5 * max(valid) if valid else None)
        if t_max is not None:
            dt = dt_flag if dt_flag is not None else t_max / 10000
            try:
                result = measure_mixing_time(NumericSource(config), MixingQuery(eps, t_max, dt, dt / 100))
                row["first_hit"], row["stable"] = result.first_hit_time, result.stable_time
                row["horizon"] = result.horizon
            except (DomainError, NumericError) as exc:
                row["error"] = str(exc)
        rows.append(row)

        def cell(v):
            return "absent" if v is None else fmt(v)

        out.row(fmt(gamma), cell(row["first_hit"]), cell(row["stable"]),
                cell(row["weak_bound"]), cell(row["strong_bound"]))
    doc = _base_document("sweep", cfg)
    doc["rows"] = rows
    out.finish(doc)
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "mixing": cmd_mixing,
    "bounds": cmd_bounds,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _merge_config(args)
        return COMMANDS[args.command](cfg)
    except (UsageError, DomainError, ResourceError) as exc:
        sys.stderr.write(f"hyperwalk {args.command}: error: {exc}\n")
        return EXIT_USAGE
    except NumericError as exc:
        sys.stderr.write(f"hyperwalk {args.command}: numeric failure: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
