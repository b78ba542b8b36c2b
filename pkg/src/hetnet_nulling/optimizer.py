"""Design-parameter optimization: nulling budget, blank-subframe fraction,
and bias sweeps comparing the three schemes.

The nulling budget search is exhaustive over {0, .., N1-1}.  With the
analytic mean-load engine the objective trace is built as the budget-zero
coverage plus cumulative budget increments, which is algebraically the
same thing but keeps consecutive differences at full relative precision,
so the argmax stays meaningful deep into the small-threshold regime where
the increments underflow a direct subtraction.  The Monte Carlo engine
evaluates every control value on one shared set of trial records, making
inner searches deterministic given the seed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .analytics import delta_rate_coverage, rate_coverage_exact, rate_coverage_mla
from .config import NetworkConfig, linear_to_db
from .errors import NumericalAccuracyError
from .simulator import (
    CoverageReport,
    SchemeSpec,
    TrialRecords,
    coverage_report,
    simulate_records,
)

ENGINES = ("analytic-mla", "analytic-exact", "monte-carlo")
SCHEMES = ("nulling", "offloading_only", "blank_subframes")

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class OptimizationResult:
    """Argmax of a scalar objective over a searched grid, with the trace."""

    argmax: float
    objective: float
    grid: np.ndarray
    trace: np.ndarray
    engine: str

    def __post_init__(self):
        if self.grid.shape != self.trace.shape:
            raise ValueError("OptimizationResult: grid and trace must align")


@dataclass(frozen=True)
class AsymptoticCheck:
    """Outcome of the small-threshold limit check of the optimal budget."""

    verified: bool
    limit: Optional[int]
    status: str                  # "verified" | "failed" | "inconclusive"
    tau_sequence: np.ndarray
    optima: np.ndarray           # U*(tau) per threshold, -1 where unresolved


def _mc_coverage_at(rec: TrialRecords, scheme: SchemeSpec, cfg: NetworkConfig,
                    tau: float) -> float:
    return float(coverage_report(rec, scheme, cfg, [tau]).coverage[0])


def _mla_trace(tau: float, cfg: NetworkConfig) -> np.ndarray:
    base = rate_coverage_mla(tau, 0, cfg).total
    deltas = [
        delta_rate_coverage(u, tau, cfg)[0] for u in range(1, cfg.macro.antennas)
    ]
    return base + np.concatenate([[0.0], np.cumsum(deltas)])


def optimal_in_dof(tau: float, cfg: NetworkConfig, engine: str = "analytic-mla",
                   trials: int = 20_000, seed=0,
                   records: Optional[TrialRecords] = None) -> OptimizationResult:
    """Exhaustive search of the nulling budget maximizing rate coverage.

    Ties break toward the smaller budget (fewer DoF sacrificed).  The
    Monte Carlo engine reuses ``records`` when given; otherwise it runs
    its own pass with (trials, seed).
    """
    if tau <= 0:
        raise ValueError("optimal_in_dof: tau must be > 0")
    if engine not in ENGINES:
        raise ValueError(f"optimal_in_dof: unknown engine {engine!r}")
    grid = np.arange(cfg.macro.antennas)
    if engine == "analytic-mla":
        trace = _mla_trace(tau, cfg)
    elif engine == "analytic-exact":
        trace = np.array(
            [rate_coverage_exact(tau, int(u), cfg).total for u in grid]
        )
    else:
        if records is None:
            records = simulate_records(cfg, trials, seed)[0]
        trace = np.array(
            [_mc_coverage_at(records, SchemeSpec.nulling(int(u)), cfg, tau)
             for u in grid]
        )
    best = int(np.argmax(trace))  # first max: ties resolve to smaller budget
    return OptimizationResult(
        argmax=float(best), objective=float(trace[best]),
        grid=grid.astype(float), trace=trace, engine=engine,
    )


def verify_asymptotic_optimum(cfg: NetworkConfig, tau_sequence: Sequence[float],
                              engine: str = "analytic-mla",
                              stable_tail: int = 3) -> AsymptoticCheck:
    """Check that the optimal budget settles, as the threshold drops, on a
    value in {N1 - N2 - 1, N1 - N2} (clipped to the valid range).

    The sequence must span at least two decades downward.  If the budget
    increments underflow before ``stable_tail`` consecutive optima agree,
    the check is inconclusive rather than failed.
    """
    taus = np.asarray(sorted(tau_sequence, reverse=True), dtype=float)
    if taus.size < stable_tail or taus[-1] <= 0:
        raise ValueError("verify_asymptotic_optimum: need a longer positive sequence")
    if taus[0] / taus[-1] < 100.0:
        raise ValueError("verify_asymptotic_optimum: sequence must span >= 2 decades")
    n1, n2 = cfg.macro.antennas, cfg.pico.antennas
    allowed = {u for u in (n1 - n2 - 1, n1 - n2) if 0 <= u <= n1 - 1}
    optima = np.full(taus.size, -1, dtype=int)
    for i, tau in enumerate(taus):
        try:
            optima[i] = int(optimal_in_dof(float(tau), cfg, engine=engine).argmax)
        except NumericalAccuracyError:
            resolved = optima[:i]
            tail_ok = (
                i >= stable_tail
                and len(set(resolved[-stable_tail:])) == 1
                and resolved[-1] in allowed
            )
            if tail_ok:
                return AsymptoticCheck(True, int(resolved[-1]), "verified", taus, optima)
            return AsymptoticCheck(False, None, "inconclusive", taus, optima)
    tail = optima[-stable_tail:]
    if len(set(tail.tolist())) == 1 and int(tail[-1]) in allowed:
        return AsymptoticCheck(True, int(tail[-1]), "verified", taus, optima)
    return AsymptoticCheck(False, None, "failed", taus, optima)


# coarse grid for the blank-subframe fraction, denser near zero where the
# optimum sits when offloaded users are few
_ABS_GRID = (0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.35, 0.5, 0.65, 0.8, 0.95)


def optimal_abs_fraction(tau: float, cfg: NetworkConfig,
                         iterations: Optional[int] = None,
                         trials: int = 20_000, seed=0,
                         records: Optional[TrialRecords] = None,
                         fidelity: str = "fast") -> OptimizationResult:
    """Scalar search of the blank-subframe fraction maximizing Monte Carlo
    rate coverage: coarse grid plus golden-section refinement with an
    iteration budget defaulting to the macro antenna count.

    The objective is evaluated on one fixed record set, so it is a
    deterministic function of eta and the refinement is well posed; a
    non-unimodal coarse trace falls back to the grid argmax with a
    warning.
    """
    if tau <= 0:
        raise ValueError("optimal_abs_fraction: tau must be > 0")
    iterations = cfg.macro.antennas if iterations is None else int(iterations)
    if iterations < 1:
        raise ValueError("optimal_abs_fraction: iterations must be >= 1")
    if records is None:
        records = simulate_records(cfg, trials, seed)[0]

    evaluated: Dict[float, float] = {}

    def objective(eta: float) -> float:
        eta = float(eta)
        if eta not in evaluated:
            evaluated[eta] = _mc_coverage_at(
                records, SchemeSpec.blank_subframes(eta, fidelity), cfg, tau
            )
        return evaluated[eta]

    coarse = np.array([objective(e) for e in _ABS_GRID])
    peaks = [
        i for i in range(len(_ABS_GRID))
        if (i == 0 or coarse[i] >= coarse[i - 1])
        and (i == len(_ABS_GRID) - 1 or coarse[i] >= coarse[i + 1])
    ]
    i_best = int(np.argmax(coarse))
    if len(peaks) > 1:
        warnings.warn(
            "optimal_abs_fraction: non-unimodal coarse trace, returning grid argmax",
            RuntimeWarning,
        )
    else:
        lo = _ABS_GRID[max(i_best - 1, 0)]
        hi = _ABS_GRID[min(i_best + 1, len(_ABS_GRID) - 1)]
        a, b = lo, hi
        x1 = b - _GOLDEN * (b - a)
        x2 = a + _GOLDEN * (b - a)
        for _ in range(iterations):
            if objective(x1) < objective(x2):
                a, x1 = x1, x2
                x2 = a + _GOLDEN * (b - a)
            else:
                b, x2 = x2, x1
                x1 = b - _GOLDEN * (b - a)

    grid = np.array(sorted(evaluated))
    trace = np.array([evaluated[e] for e in grid])
    best = int(np.argmax(trace))
    return OptimizationResult(
        argmax=float(grid[best]), objective=float(trace[best]),
        grid=grid, trace=trace, engine="monte-carlo",
    )


@dataclass
class BiasSweepEntry:
    bias_db: float
    scheme: str
    control: float              # chosen budget or fraction (0 for plain)
    coverage: float
    per_class: Dict[str, float]
    class_weights: Dict[str, float]


@dataclass
class BiasSweepResult:
    tau: float
    entries: List[BiasSweepEntry]
    best: Dict[str, BiasSweepEntry] = field(default_factory=dict)

    def of(self, scheme: str, bias_db: float) -> BiasSweepEntry:
        for e in self.entries:
            if e.scheme == scheme and abs(e.bias_db - bias_db) < 1e-9:
                return e
        raise KeyError((scheme, bias_db))


def bias_sweep(tau: float, cfg: NetworkConfig, bias_db_grid: Sequence[float],
               trials: int = 20_000, seed=0,
               schemes: Sequence[str] = SCHEMES,
               abs_iterations: Optional[int] = None) -> BiasSweepResult:
    """Coverage of each scheme (with its control re-optimized) across a
    bias grid, from one shared Monte Carlo pass per bias value.

    Reports the per-bias winners and, in ``best``, each scheme's optimal
    operating point over the grid.
    """
    if any(s not in SCHEMES for s in schemes):
        raise ValueError(f"bias_sweep: schemes must be among {SCHEMES}")
    bias_db_grid = [float(b) for b in bias_db_grid]
    bias_lin = [10.0 ** (b / 10.0) for b in bias_db_grid]
    if any(b < 1.0 for b in bias_lin):
        raise ValueError("bias_sweep: bias values must be >= 0 dB")
    record_sets = simulate_records(cfg, trials, seed, bias_values=bias_lin)

    result = BiasSweepResult(tau=tau, entries=[])
    for bias_db, rec in zip(bias_db_grid, record_sets):
        for scheme in schemes:
            if scheme == "nulling":
                inner = optimal_in_dof(tau, cfg, engine="monte-carlo", records=rec)
                control = inner.argmax
                spec = SchemeSpec.nulling(int(control))
            elif scheme == "offloading_only":
                control = 0.0
                spec = SchemeSpec.nulling(0)
            else:
                inner = optimal_abs_fraction(
                    tau, cfg, iterations=abs_iterations, records=rec
                )
                control = inner.argmax
                spec = SchemeSpec.blank_subframes(control)
            report = coverage_report(rec, spec, cfg, [tau])
            result.entries.append(BiasSweepEntry(
                bias_db=bias_db,
                scheme=scheme,
                control=float(control),
                coverage=float(report.coverage[0]),
                per_class={k: float(v.coverage[0]) for k, v in report.per_class.items()},
                class_weights={k: v.weight for k, v in report.per_class.items()},
            ))
    for scheme in schemes:
        mine = [e for e in result.entries if e.scheme == scheme]
        result.best[scheme] = max(mine, key=lambda e: e.coverage)
    return result
