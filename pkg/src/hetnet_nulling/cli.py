"""Command-line experiment orchestration.

Subcommands: ``analytic`` (coverage-vs-threshold curves from both analytic
engines), ``simulate`` (Monte Carlo coverage of one scheme), ``optimize-u``
(nulling-budget search), ``optimize-abs`` (blank-subframe fraction search),
``sweep-bias`` (three-scheme comparison across bias values), ``validate``
(analytic-vs-Monte-Carlo cross-checks).

Experiments are described by a YAML file (see demos/configs); any entry
can be overridden on the command line with ``--set key.path=value``.
Numeric results go to CSV with a one-line header; every CSV gets a JSON
sidecar echoing the resolved configuration, package version, seed, and
runtime.  dB-valued entries carry a ``_db`` suffix; densities are
nodes/m^2, bandwidth Hz, thresholds bit/s.

Exit codes: 0 success, 1 configuration error (the message names the
offending field), 2 numeric-accuracy failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import yaml

from . import __version__
from .analytics import rate_coverage_exact, rate_coverage_mla
from .config import NetworkConfig, TierParams, UserClass, db_to_linear
from .errors import ConfigError, NumericalAccuracyError
from .optimizer import bias_sweep, optimal_abs_fraction, optimal_in_dof
from .simulator import SchemeSpec, estimate_rate_coverage

_CLASS_ORDER = ("macro", "pico_unoffloaded", "offloaded",
                "offloaded_in", "offloaded_non_in")
_ANALYTIC_KEYS = {
    UserClass.MACRO: "macro",
    UserClass.PICO_UNOFFLOADED: "pico_unoffloaded",
    UserClass.OFFLOADED_IN: "offloaded_in",
    UserClass.OFFLOADED_NON_IN: "offloaded_non_in",
}


# ---------------------------------------------------------------------------
# Configuration ingestion
# ---------------------------------------------------------------------------

def _tier_from_mapping(name: str, raw: dict) -> TierParams:
    if not isinstance(raw, dict):
        raise ConfigError(name, "must be a mapping")
    power = raw.get("power")
    if "power_db" in raw:
        power = db_to_linear(float(raw["power_db"]))
    missing = [k for k in ("density", "pathloss", "antennas") if k not in raw]
    if missing or power is None:
        raise ConfigError(f"{name}.{(missing or ['power'])[0]}", "missing")
    try:
        return TierParams(
            density=float(raw["density"]),
            pathloss=float(raw["pathloss"]),
            power=float(power),
            antennas=int(raw["antennas"]),
            tx_snr=float(raw["tx_snr"]) if "tx_snr" in raw else None,
        )
    except ConfigError as exc:
        raise ConfigError(f"{name}.{exc.field}", str(exc).split(": ", 1)[-1])


def network_from_mapping(raw: dict) -> NetworkConfig:
    """Build a NetworkConfig from the ``network`` section of a config file."""
    if not isinstance(raw, dict):
        raise ConfigError("network", "must be a mapping")
    for key in ("macro", "pico"):
        if key not in raw:
            raise ConfigError(f"network.{key}", "missing")
    bias = raw.get("bias")
    if "bias_db" in raw:
        bias = db_to_linear(float(raw["bias_db"]))
    if bias is None:
        raise ConfigError("network.bias_db", "missing")
    for key in ("user_density", "bandwidth"):
        if key not in raw:
            raise ConfigError(f"network.{key}", "missing")
    try:
        return NetworkConfig(
            macro=_tier_from_mapping("network.macro", raw["macro"]),
            pico=_tier_from_mapping("network.pico", raw["pico"]),
            user_density=float(raw["user_density"]),
            bias=float(bias),
            bandwidth=float(raw["bandwidth"]),
            in_dof=int(raw.get("in_dof", 0)),
            cell_shape=float(raw.get("cell_shape", 3.5)),
            mean_load_slope=float(raw.get("mean_load_slope", 1.28)),
        )
    except ConfigError as exc:
        field = exc.field if exc.field.startswith("network") else f"network.{exc.field}"
        raise ConfigError(field, str(exc).split(": ", 1)[-1])


def _tau_grid(raw: dict) -> np.ndarray:
    spec = raw.get("tau_grid")
    if isinstance(spec, (list, tuple)) and spec:
        return np.asarray([float(x) for x in spec])
    if isinstance(spec, dict):
        try:
            start, stop = float(spec["start"]), float(spec["stop"])
            points = int(spec.get("points", 10))
        except KeyError as exc:
            raise ConfigError(f"tau_grid.{exc.args[0]}", "missing")
        if spec.get("spacing", "log") == "log":
            return np.logspace(np.log10(start), np.log10(stop), points)
        return np.linspace(start, stop, points)
    raise ConfigError("tau_grid", "missing or empty")


def _apply_overrides(raw: dict, overrides: Sequence[str]) -> dict:
    for item in overrides:
        if "=" not in item:
            raise ConfigError("--set", f"expected key=value, got {item!r}")
        key, value = item.split("=", 1)
        node = raw
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(key, "path collides with a scalar entry")
        node[parts[-1]] = yaml.safe_load(value)
    return raw


def load_experiment(path: str, overrides: Sequence[str]) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh) or {}
    except FileNotFoundError:
        raise ConfigError("config", f"file not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError("config", f"YAML parse error: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError("config", "top level must be a mapping")
    return _apply_overrides(raw, overrides)


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float) and float(x).is_integer() and abs(x) < 1e15:
        return f"{x:.1f}"
    return f"{float(x):.12g}"


def write_csv(path: Path, header: List[str], rows: List[List]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def write_sidecar(path: Path, command: str, raw_cfg: dict, seed,
                  runtime: float, outputs: List[str]) -> None:
    meta = {
        "command": command,
        "version": f"hetnet-nulling {__version__}",
        "seed": seed,
        "runtime_s": round(runtime, 3),
        "outputs": outputs,
        "config": raw_cfg,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _per_class_columns(report) -> List[float]:
    cols = []
    for name in _CLASS_ORDER:
        entry = report.per_class.get(name)
        cols.append(float(entry.coverage[0]) if entry is not None else float("nan"))
    return cols


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_analytic(raw: dict, out_dir: Path) -> List[str]:
    cfg = network_from_mapping(raw.get("network"))
    taus = _tau_grid(raw)
    exact = rate_coverage_exact(taus, cfg.in_dof, cfg)
    mla = rate_coverage_mla(taus, cfg.in_dof, cfg)
    header = ["tau_bps", "total_exact", "total_mla"]
    header += [f"{_ANALYTIC_KEYS[k]}_exact" for k in _ANALYTIC_KEYS]
    header += [f"{_ANALYTIC_KEYS[k]}_mla" for k in _ANALYTIC_KEYS]
    rows = []
    for tau, bx, bm in zip(taus, exact, mla):
        rows.append(
            [tau, bx.total, bm.total]
            + [bx.per_class[k] for k in _ANALYTIC_KEYS]
            + [bm.per_class[k] for k in _ANALYTIC_KEYS]
        )
    write_csv(out_dir / "analytic.csv", header, rows)
    return ["analytic.csv"]


def _scheme_from_config(raw: dict, fidelity: str) -> SchemeSpec:
    name = raw.get("scheme", "nulling")
    if name == "nulling":
        return SchemeSpec.nulling(int(raw.get("network", {}).get("in_dof", 0)), fidelity)
    if name == "blank_subframes":
        if "abs_fraction" not in raw:
            raise ConfigError("abs_fraction", "missing for the blank_subframes scheme")
        return SchemeSpec.blank_subframes(float(raw["abs_fraction"]), fidelity)
    raise ConfigError("scheme", f"unknown scheme {name!r}")


def _cmd_simulate(raw: dict, out_dir: Path, trials: int, seed, fidelity: str) -> List[str]:
    cfg = network_from_mapping(raw.get("network"))
    taus = _tau_grid(raw)
    scheme = _scheme_from_config(raw, fidelity)
    dump = raw.get("dump_realizations")
    report = estimate_rate_coverage(
        cfg, scheme, taus, trials, seed,
        window_radius=raw.get("window_radius"),
        user_window_radius=raw.get("user_window_radius"),
        dump_path=str(out_dir / dump) if dump else None,
    )
    header = ["tau_bps", "coverage", "ci_low", "ci_high"] + list(_CLASS_ORDER)
    rows = []
    for i, tau in enumerate(taus):
        per = [
            float(report.per_class[name].coverage[i])
            if name in report.per_class else float("nan")
            for name in _CLASS_ORDER
        ]
        rows.append([tau, report.coverage[i], report.ci_low[i], report.ci_high[i]] + per)
    write_csv(out_dir / "simulate.csv", header, rows)
    outputs = ["simulate.csv"] + ([dump] if dump else [])
    return outputs


def _cmd_optimize_u(raw: dict, out_dir: Path, trials: int, seed) -> List[str]:
    cfg = network_from_mapping(raw.get("network"))
    tau = float(raw.get("tau", 0.0)) or float(np.median(_tau_grid(raw)))
    engine = raw.get("engine", "analytic-mla")
    result = optimal_in_dof(tau, cfg, engine=engine, trials=trials, seed=seed)
    rows = [[u, v] for u, v in zip(result.grid, result.trace)]
    write_csv(out_dir / "optimize_u.csv", ["in_dof", "coverage"], rows)
    print(f"optimal in_dof: {int(result.argmax)} (coverage {result.objective:.6f}, "
          f"engine {result.engine}, tau {tau:g} bps)")
    return ["optimize_u.csv"]


def _cmd_optimize_abs(raw: dict, out_dir: Path, trials: int, seed) -> List[str]:
    cfg = network_from_mapping(raw.get("network"))
    tau = float(raw.get("tau", 0.0)) or float(np.median(_tau_grid(raw)))
    result = optimal_abs_fraction(
        tau, cfg, iterations=raw.get("abs_iterations"), trials=trials, seed=seed
    )
    rows = [[e, v] for e, v in zip(result.grid, result.trace)]
    write_csv(out_dir / "optimize_abs.csv", ["abs_fraction", "coverage"], rows)
    print(f"optimal abs_fraction: {result.argmax:.4f} "
          f"(coverage {result.objective:.6f}, tau {tau:g} bps)")
    return ["optimize_abs.csv"]


def _cmd_sweep_bias(raw: dict, out_dir: Path, trials: int, seed) -> List[str]:
    cfg = network_from_mapping(raw.get("network"))
    tau = float(raw.get("tau", 0.0)) or float(np.median(_tau_grid(raw)))
    grid = raw.get("bias_grid_db")
    if not grid:
        raise ConfigError("bias_grid_db", "missing or empty")
    result = bias_sweep(tau, cfg, [float(b) for b in grid], trials=trials, seed=seed)
    header = ["bias_db", "scheme", "control", "coverage"] + list(_CLASS_ORDER)
    rows = []
    for e in result.entries:
        per = [e.per_class.get(name, float("nan")) for name in _CLASS_ORDER]
        rows.append([e.bias_db, e.scheme, e.control, e.coverage] + per)
    write_csv(out_dir / "bias_sweep.csv", header, rows)
    for scheme, entry in result.best.items():
        print(f"best {scheme}: bias {entry.bias_db:g} dB, control {entry.control:g}, "
              f"coverage {entry.coverage:.4f}")
    return ["bias_sweep.csv"]


def _cmd_validate(raw: dict, out_dir: Path, trials: int, seed, fidelity: str) -> List[str]:
    from .association import association_probabilities
    from .simulator import class_frequencies

    cfg = network_from_mapping(raw.get("network"))
    taus = _tau_grid(raw)
    scheme = SchemeSpec.nulling(cfg.in_dof, fidelity)
    report = estimate_rate_coverage(cfg, scheme, taus, trials, seed)
    exact = rate_coverage_exact(taus, cfg.in_dof, cfg)
    mla = rate_coverage_mla(taus, cfg.in_dof, cfg)
    totals = np.array([b.total for b in exact])
    mla_totals = np.array([b.total for b in mla])
    dev_mc = float(np.max(np.abs(totals - report.coverage)))
    dev_mla = float(np.max(np.abs(totals - mla_totals)))

    freq = class_frequencies(cfg, max(trials, 100_000), seed)
    probs = association_probabilities(cfg)
    dev_assoc = float(max(abs(freq["macro"] - probs[0]),
                          abs(freq["pico_unoffloaded"] - probs[1]),
                          abs(freq["offloaded"] - probs[2])))

    rows = [[tau, t, c] for tau, t, c in zip(taus, totals, report.coverage)]
    write_csv(out_dir / "validate.csv",
              ["tau_bps", "coverage_exact", "coverage_monte_carlo"], rows)
    print(f"max |exact - monte-carlo| over tau grid: {dev_mc:.4f}")
    print(f"max |exact - mean-load| over tau grid:   {dev_mla:.4f}")
    print(f"max |class prob - empirical frequency|:  {dev_assoc:.4f}")
    return ["validate.csv"]


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hetnet-nulling",
        description="Rate coverage analytics and simulation for two-tier "
                    "HetNets with offloading and interference nulling",
    )
    parser.add_argument("subcommand", choices=(
        "analytic", "simulate", "optimize-u", "optimize-abs", "sweep-bias",
        "validate",
    ))
    parser.add_argument("--config", required=True, help="YAML experiment file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry (repeatable, dotted keys)")
    parser.add_argument("--trials", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--fidelity", choices=("fast", "full"), default=None)
    parser.add_argument("--out-dir", default=".")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    started = time.perf_counter()
    try:
        raw = load_experiment(args.config, args.set)
        trials = args.trials if args.trials is not None else int(raw.get("trials", 10_000))
        seed = args.seed if args.seed is not None else raw.get("seed")
        fidelity = args.fidelity or raw.get("fidelity", "fast")
        if seed is None and args.subcommand in (
            "simulate", "optimize-abs", "sweep-bias", "validate",
        ):
            raise ConfigError("seed", "required for Monte Carlo subcommands")
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)

        if args.subcommand == "analytic":
            outputs = _cmd_analytic(raw, out_dir)
        elif args.subcommand == "simulate":
            outputs = _cmd_simulate(raw, out_dir, trials, seed, fidelity)
        elif args.subcommand == "optimize-u":
            outputs = _cmd_optimize_u(raw, out_dir, trials, seed)
        elif args.subcommand == "optimize-abs":
            outputs = _cmd_optimize_abs(raw, out_dir, trials, seed)
        elif args.subcommand == "sweep-bias":
            outputs = _cmd_sweep_bias(raw, out_dir, trials, seed)
        else:
            outputs = _cmd_validate(raw, out_dir, trials, seed, fidelity)

        sidecar = out_dir / f"{args.subcommand.replace('-', '_')}.meta.json"
        write_sidecar(sidecar, args.subcommand, raw, seed,
                      time.perf_counter() - started, outputs)
        return 0
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except NumericalAccuracyError as exc:
        print(f"numeric accuracy failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
