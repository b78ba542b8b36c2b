"""Closed-form rate coverage of the nulling scheme.

The conditional coverage of each user class is an integral of products of
scaled interference-Laplace-transform derivatives against the class's
serving-distance law.  All four classes share one skeleton: quadrature
nodes over distance, per-node derivative stacks for the two tiers, a
truncated convolution, and a class-specific combination step.  The node
builders below centralize the (class -> Laplace argument, exclusion
radius) bookkeeping so each substitution is written exactly once.

Rate coverage then averages the conditional coverage over the serving-BS
load (exact load pmf, or its mean for the fast approximation), and the
change when the nulling budget is raised by one splits into an
offloaded-user gain and a macro-user penalty.  Those two terms are
evaluated in a cancellation-free form (single surviving convolution term,
and the explicit geometric tail of the dominant-interferer factor), so
they stay accurate deep in the small-threshold regime where both vanish
polynomially.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .association import (
    association_stats,
    in_dof_pmf,
    in_selection_probability,
    load_pmf,
    mean_load,
    offloading_strip,
    pmf_tail_sum,
)
from .config import MACRO, PICO, NetworkConfig, UserClass
from .errors import NumericalAccuracyError
from .special_math import laplace_derivative_stack

PICO_CLASSES = (
    UserClass.PICO_UNOFFLOADED,
    UserClass.OFFLOADED_IN,
    UserClass.OFFLOADED_NON_IN,
)

# exp(-t) falls below 4e-18 of its peak here; all densities carry this factor
_T_CUTOFF = 40.0
# mass below the floor of the log-mapped radial variable is ~1e-8
_T_FLOOR = 1e-8
_NODES_1D = (128, 256, 512, 1024)
_NODES_2D = ((48, 24), (96, 48), (192, 96))
_BETA_CHUNK = 48


def sir_threshold(x):
    """2^x - 1, accurate for small x."""
    return np.expm1(np.log(2.0) * np.asarray(x, dtype=float))


@dataclass(frozen=True)
class CoverageBreakdown:
    """Total rate coverage with its per-class split.

    ``total`` equals the weight-sum of ``per_class`` by construction; the
    weights are the class probabilities combined with the nulling
    selection probability, and sum to one.  ``load_tail_mass`` reports the
    truncated load-pmf mass of the exact engine (zero for the mean-load
    approximation).
    """

    total: float
    per_class: Dict[UserClass, float]
    weights: Dict[UserClass, float]
    load_tail_mass: float = 0.0


# ---------------------------------------------------------------------------
# Quadrature nodes per user class
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _NodeSet:
    """Distance-quadrature nodes with the per-class Laplace bookkeeping.

    s-arguments are beta * y_serv^alpha_serv * rho_j / rho_serv for tier j;
    dominant_base, when present, scales with beta into the kept dominant
    interferer factor of the non-nulled offloaded class.
    """

    weight: np.ndarray            # quadrature weight incl. density factor
    y_pow: np.ndarray             # y_serv^alpha_serv per node
    r1: np.ndarray                # tier-1 exclusion radius
    r2: np.ndarray                # tier-2 exclusion radius
    rho1_over_serv: float
    rho2_over_serv: float
    dominant_base: Optional[np.ndarray]  # rho1 y^a2 / (rho2 x^a1), or None
    mass: float


def _gauss_nodes(n: int, lo: float, hi: float) -> Tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
    return mid + half * x, half * w


def _radial_nodes(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes/weights for the normalized squared-distance variable t on
    (0, _T_CUTOFF], log-mapped: coverage integrands concentrate at t -> 0
    when the threshold is large, so uniform nodes under-resolve there."""
    v, wv = _gauss_nodes(n, math.log(_T_FLOOR), math.log(_T_CUTOFF))
    t = np.exp(v)
    return t, wv * t


def _nodes_macro(cfg: NetworkConfig, n: int) -> _NodeSet:
    lam1, lam2 = cfg.macro.density, cfg.pico.density
    a1, a2 = cfg.macro.pathloss, cfg.pico.pathloss
    t, wt = _radial_nodes(n)
    y = np.sqrt(t / (np.pi * lam1))
    r2 = (cfg.bias * cfg.pico.power / cfg.macro.power) ** (1.0 / a2) * y ** (a1 / a2)
    weight = wt * np.exp(-t - np.pi * lam2 * r2**2)
    return _NodeSet(
        weight=weight,
        y_pow=y**a1,
        r1=y,
        r2=r2,
        rho1_over_serv=1.0,
        rho2_over_serv=cfg.pico.tx_snr / cfg.macro.tx_snr,
        dominant_base=None,
        mass=float(weight.sum()),
    )


def _nodes_pico_unoffloaded(cfg: NetworkConfig, n: int) -> _NodeSet:
    lam1, lam2 = cfg.macro.density, cfg.pico.density
    a1, a2 = cfg.macro.pathloss, cfg.pico.pathloss
    t, wt = _radial_nodes(n)
    y = np.sqrt(t / (np.pi * lam2))
    r1 = (cfg.macro.power / cfg.pico.power) ** (1.0 / a1) * y ** (a2 / a1)
    weight = wt * np.exp(-t - np.pi * lam1 * r1**2)
    return _NodeSet(
        weight=weight,
        y_pow=y**a2,
        r1=r1,
        r2=y,
        rho1_over_serv=cfg.macro.tx_snr / cfg.pico.tx_snr,
        rho2_over_serv=1.0,
        dominant_base=None,
        mass=float(weight.sum()),
    )


def _nodes_offloaded(cfg: NetworkConfig, nx: int, ny: int, dominant: bool) -> _NodeSet:
    """Strip nodes over (nearest-macro distance x, serving-pico distance y)."""
    lam1, lam2 = cfg.macro.density, cfg.pico.density
    a1, a2 = cfg.macro.pathloss, cfg.pico.pathloss
    t1, wt1 = _radial_nodes(nx)
    x = np.sqrt(t1 / (np.pi * lam1))
    y_lo, y_hi = offloading_strip(x, cfg)
    u, wu = _gauss_nodes(ny, 0.0, 1.0)
    y = y_lo[:, None] + (y_hi - y_lo)[:, None] * u[None, :]          # (nx, ny)
    wy = (y_hi - y_lo)[:, None] * wu[None, :]
    weight = (
        np.exp(-t1)[:, None] * wt1[:, None]
        * 2.0 * np.pi * lam2 * y * np.exp(-np.pi * lam2 * y**2) * wy
    ).ravel()
    xx = np.broadcast_to(x[:, None], y.shape).ravel()
    yy = y.ravel()
    rho1, rho2 = cfg.macro.tx_snr, cfg.pico.tx_snr
    return _NodeSet(
        weight=weight,
        y_pow=yy**a2,
        r1=xx,
        r2=yy,
        rho1_over_serv=rho1 / rho2,
        rho2_over_serv=1.0,
        dominant_base=(rho1 / rho2) * yy**a2 / xx**a1 if dominant else None,
        mass=float(weight.sum()),
    )


def _build_nodes(user_class: UserClass, cfg: NetworkConfig, level: int) -> _NodeSet:
    if user_class == UserClass.MACRO:
        return _nodes_macro(cfg, _NODES_1D[level])
    if user_class == UserClass.PICO_UNOFFLOADED:
        return _nodes_pico_unoffloaded(cfg, _NODES_1D[level])
    nx, ny = _NODES_2D[min(level, len(_NODES_2D) - 1)]
    return _nodes_offloaded(
        cfg, nx, ny, dominant=user_class == UserClass.OFFLOADED_NON_IN
    )


def _max_level(user_class: UserClass) -> int:
    if user_class in (UserClass.MACRO, UserClass.PICO_UNOFFLOADED):
        return len(_NODES_1D) - 1
    return len(_NODES_2D) - 1


# ---------------------------------------------------------------------------
# Per-node integrand pieces
# ---------------------------------------------------------------------------

def _derivative_stacks(nodes: _NodeSet, beta: np.ndarray, orders: int,
                       cfg: NetworkConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Scaled-derivative-over-factorial stacks for both tiers.

    Shapes (orders, len(beta), n_nodes).  NaNs from underflowed transform
    times overflowed polynomial factor denote a true zero; scrubbed here.
    """
    s_base = beta[:, None] * nodes.y_pow[None, :]
    d1 = laplace_derivative_stack(orders, s_base * nodes.rho1_over_serv,
                                  nodes.r1[None, :], cfg.macro)
    d2 = laplace_derivative_stack(orders, s_base * nodes.rho2_over_serv,
                                  nodes.r2[None, :], cfg.pico)
    return np.nan_to_num(d1, nan=0.0), np.nan_to_num(d2, nan=0.0)


def _truncated_convolution(d1: np.ndarray, d2: np.ndarray, orders: int) -> np.ndarray:
    """c[n] = sum_{i+j=n} d1[i] d2[j] for n < orders."""
    c = np.empty_like(d1[:orders])
    for n in range(orders):
        acc = d1[0] * d2[n]
        for i in range(1, n + 1):
            acc = acc + d1[i] * d2[n - i]
        c[n] = acc
    return c


def _dominant_factors(nodes: _NodeSet, beta: np.ndarray, orders: int) -> np.ndarray:
    """g[q] = t^q / (1+t)^(q+1): the kept dominant macro interferer terms."""
    t = beta[:, None] * nodes.dominant_base[None, :]
    ratio = t / (1.0 + t)
    g = np.empty((orders,) + t.shape)
    g[0] = 1.0 / (1.0 + t)
    for q in range(1, orders):
        g[q] = g[q - 1] * ratio
    return g


def _combine(user_class: UserClass, nodes: _NodeSet, beta: np.ndarray,
             cfg: NetworkConfig, dof_weights: Optional[np.ndarray]) -> np.ndarray:
    """Conditional coverage values on one node set, vectorized over beta."""
    n1, n2 = cfg.macro.antennas, cfg.pico.antennas
    if user_class == UserClass.MACRO:
        orders = n1
        d1, d2 = _derivative_stacks(nodes, beta, orders, cfg)
        c = _truncated_convolution(d1, d2, orders)
        inner = np.tensordot(dof_weights, c, axes=(0, 0))
    else:
        orders = n2
        d1, d2 = _derivative_stacks(nodes, beta, orders, cfg)
        c = _truncated_convolution(d1, d2, orders)
        if user_class == UserClass.OFFLOADED_NON_IN:
            g = _dominant_factors(nodes, beta, orders)
            inner = np.zeros_like(c[0])
            for n in range(orders):
                for q3 in range(orders - n):
                    inner += c[n] * g[q3]
        else:
            inner = c.sum(axis=0)
    return (inner * nodes.weight[None, :]).sum(axis=1) / nodes.mass


def _macro_dof_weights(in_dof: int, cfg: NetworkConfig) -> np.ndarray:
    """Weight of convolution order n in the macro functional: the
    probability that the serving macro retains more than n signal DoF."""
    n1 = cfg.macro.antennas
    pmf = in_dof_pmf(np.arange(in_dof + 1), in_dof, cfg)
    w = np.zeros(n1)
    for n in range(n1):
        w[n] = float(np.sum(pmf[: min(n1 - n, in_dof + 1)]))
    return w


def _refined(user_class: UserClass, beta: np.ndarray, cfg: NetworkConfig,
             dof_weights: Optional[np.ndarray], tol: float) -> np.ndarray:
    """Evaluate _combine on successively refined nodes until stable."""
    prev = None
    for level in range(_max_level(user_class) + 1):
        nodes = _build_nodes(user_class, cfg, level)
        out = np.empty(beta.shape)
        for lo in range(0, beta.size, _BETA_CHUNK):
            sl = slice(lo, lo + _BETA_CHUNK)
            out[sl] = _combine(user_class, nodes, beta[sl], cfg, dof_weights)
        if prev is not None and float(np.max(np.abs(out - prev))) <= tol:
            return out
        prev = out
    raise NumericalAccuracyError(
        f"conditional coverage for {user_class} did not converge to {tol:g}"
    )


def conditional_coverage(user_class: UserClass, beta, in_dof: int,
                         cfg: NetworkConfig, tol: float = 1e-6):
    """Probability that the typical user's SIR exceeds ``beta`` given its
    class, under nulling budget ``in_dof``.  Vectorized over beta."""
    if not 0 <= in_dof <= cfg.macro.antennas - 1:
        raise ValueError(f"conditional_coverage: in_dof {in_dof} out of range")
    beta_arr = np.atleast_1d(np.asarray(beta, dtype=float))
    if np.any(beta_arr < 0):
        raise ValueError("conditional_coverage: beta must be >= 0")
    dof_weights = _macro_dof_weights(in_dof, cfg) if user_class == UserClass.MACRO else None
    out = np.ones(beta_arr.shape)
    positive = beta_arr > 0
    if np.any(positive):
        out[positive] = _refined(user_class, beta_arr[positive], cfg, dof_weights, tol)
    out = np.clip(out, 0.0, 1.0)
    return out if np.ndim(beta) else float(out[0])


# ---------------------------------------------------------------------------
# Rate coverage: exact load average and mean-load approximation
# ---------------------------------------------------------------------------

def _class_weights(in_dof: int, cfg: NetworkConfig) -> Dict[UserClass, float]:
    stats = association_stats(cfg.with_in_dof(in_dof))
    pr_sel = in_selection_probability(in_dof, cfg)
    return {
        UserClass.MACRO: stats.A1,
        UserClass.PICO_UNOFFLOADED: stats.A2_unoff,
        UserClass.OFFLOADED_IN: stats.A2_off * pr_sel,
        UserClass.OFFLOADED_NON_IN: stats.A2_off * (1.0 - pr_sel),
    }


def _assemble(per_class: Dict[UserClass, float], weights: Dict[UserClass, float],
              tail: float) -> CoverageBreakdown:
    total = sum(weights[k] * per_class[k] for k in UserClass)
    return CoverageBreakdown(
        total=total, per_class=dict(per_class), weights=dict(weights),
        load_tail_mass=tail,
    )


def rate_coverage_exact(tau, in_dof: int, cfg: NetworkConfig,
                        n_max: Optional[int] = None, tol: float = 1e-6,
                        ) -> Union[CoverageBreakdown, List[CoverageBreakdown]]:
    """Rate coverage with the serving-BS load averaged over its pmf.

    ``tau`` may be a scalar or a grid (thresholds in bit/s); a grid is
    evaluated in one batched pass per class.  ``n_max`` caps the load sum;
    by default the pmf is truncated at cumulative mass 1 - 1e-6 and the
    remainder is reported in ``load_tail_mass``.
    """
    tau_arr = np.atleast_1d(np.asarray(tau, dtype=float))
    if np.any(tau_arr < 0):
        raise ValueError("rate_coverage_exact: tau must be >= 0")
    weights = _class_weights(in_dof, cfg)

    def load_values(tier: int) -> np.ndarray:
        if n_max is None:
            vals, _ = pmf_tail_sum(lambda n: load_pmf(tier, n, cfg), start=1,
                                   mass=1.0 - tol)
            return vals
        if n_max < 1:
            raise ValueError("rate_coverage_exact: n_max must be >= 1")
        return np.asarray(load_pmf(tier, np.arange(1, n_max + 1), cfg), dtype=float)

    per_class_grid: Dict[UserClass, np.ndarray] = {}
    tails: Dict[int, float] = {}
    for tier in (MACRO, PICO):
        pmf = load_values(tier)
        tails[tier] = max(0.0, 1.0 - float(pmf.sum()))
        loads = np.arange(1, pmf.size + 1)
        beta = sir_threshold(np.outer(tau_arr, loads) / cfg.bandwidth).ravel()
        classes = (UserClass.MACRO,) if tier == MACRO else PICO_CLASSES
        for user_class in classes:
            cov = conditional_coverage(user_class, beta, in_dof, cfg, tol=tol)
            cov = cov.reshape(tau_arr.size, loads.size)
            per_class_grid[user_class] = cov @ pmf

    out = [
        _assemble({k: float(per_class_grid[k][i]) for k in UserClass}, weights,
                  tail=max(tails.values()))
        for i in range(tau_arr.size)
    ]
    return out if np.ndim(tau) else out[0]


def rate_coverage_mla(tau, in_dof: int, cfg: NetworkConfig, tol: float = 1e-6,
                      ) -> Union[CoverageBreakdown, List[CoverageBreakdown]]:
    """Rate coverage with each load replaced by its fitted mean: one
    conditional-coverage evaluation per class instead of a load sum."""
    tau_arr = np.atleast_1d(np.asarray(tau, dtype=float))
    if np.any(tau_arr < 0):
        raise ValueError("rate_coverage_mla: tau must be >= 0")
    weights = _class_weights(in_dof, cfg)
    beta = {
        MACRO: sir_threshold(mean_load(MACRO, cfg) * tau_arr / cfg.bandwidth),
        PICO: sir_threshold(mean_load(PICO, cfg) * tau_arr / cfg.bandwidth),
    }
    per_class = {
        k: conditional_coverage(k, beta[MACRO if k == UserClass.MACRO else PICO],
                                in_dof, cfg, tol=tol)
        for k in UserClass
    }
    out = [
        _assemble({k: float(per_class[k][i]) for k in UserClass}, weights, 0.0)
        for i in range(tau_arr.size)
    ]
    return out if np.ndim(tau) else out[0]


# ---------------------------------------------------------------------------
# Budget-increment decomposition, cancellation-free
# ---------------------------------------------------------------------------

def _macro_penalty_core(beta: np.ndarray, in_dof: int, cfg: NetworkConfig,
                        tol: float) -> np.ndarray:
    """Drop in macro conditional coverage when one more DoF is nulled away:
    the single surviving convolution term of order N1 - in_dof."""
    n1 = cfg.macro.antennas
    orders = n1 - in_dof + 1
    prev = None
    for level in range(_max_level(UserClass.MACRO) + 1):
        nodes = _build_nodes(UserClass.MACRO, cfg, level)
        out = np.empty(beta.shape)
        for lo in range(0, beta.size, _BETA_CHUNK):
            sl = slice(lo, lo + _BETA_CHUNK)
            d1, d2 = _derivative_stacks(nodes, beta[sl], orders, cfg)
            c = _truncated_convolution(d1, d2, orders)
            out[sl] = (c[-1] * nodes.weight[None, :]).sum(axis=1) / nodes.mass
        if prev is not None:
            scale = np.maximum(np.abs(out), 1e-300)
            if float(np.max(np.abs(out - prev) / scale)) <= max(tol, 1e-9) \
               or float(np.max(np.abs(out - prev))) <= tol * 1e-3:
                return out
        prev = out
    raise NumericalAccuracyError("macro penalty integral did not converge")


def _offloaded_gap_core(beta: np.ndarray, cfg: NetworkConfig, tol: float) -> np.ndarray:
    """Coverage gap between the nulled and non-nulled offloaded classes:
    the geometric tail of the dominant-interferer factor, all-positive."""
    n2 = cfg.pico.antennas
    prev = None
    for level in range(_max_level(UserClass.OFFLOADED_NON_IN) + 1):
        nodes = _build_nodes(UserClass.OFFLOADED_NON_IN, cfg, level)
        out = np.empty(beta.shape)
        for lo in range(0, beta.size, _BETA_CHUNK):
            sl = slice(lo, lo + _BETA_CHUNK)
            d1, d2 = _derivative_stacks(nodes, beta[sl], n2, cfg)
            c = _truncated_convolution(d1, d2, n2)
            t = beta[sl][:, None] * nodes.dominant_base[None, :]
            ratio = t / (1.0 + t)
            acc = np.zeros_like(c[0])
            tail_pow = ratio  # (t/(1+t))^(n2 - n) built down from n = n2-1
            for n in range(n2 - 1, -1, -1):
                acc += c[n] * tail_pow
                tail_pow = tail_pow * ratio
            out[sl] = (acc * nodes.weight[None, :]).sum(axis=1) / nodes.mass
        if prev is not None:
            scale = np.maximum(np.abs(out), 1e-300)
            if float(np.max(np.abs(out - prev) / scale)) <= max(tol, 1e-9) \
               or float(np.max(np.abs(out - prev))) <= tol * 1e-3:
                return out
        prev = out
    raise NumericalAccuracyError("offloaded coverage gap integral did not converge")


def delta_rate_coverage(in_dof: int, tau: float, cfg: NetworkConfig,
                        tol: float = 1e-6) -> Tuple[float, float, float]:
    """Mean-load rate coverage change when the budget moves from
    in_dof - 1 to in_dof, split as (delta_total, gain, penalty) with
    delta_total = gain - penalty.

    The gain is the offloaded-class weight times the extra selection
    probability times the nulled/non-nulled coverage gap; the penalty is
    the macro-class weight times the probability the extra DoF is actually
    spent times the per-DoF macro coverage drop.  Both factors are
    computed in positive form, so they remain meaningful when tiny.
    """
    if in_dof < 1 or in_dof > cfg.macro.antennas - 1:
        raise ValueError("delta_rate_coverage: in_dof must be in [1, N1-1]")
    if tau < 0:
        raise ValueError("delta_rate_coverage: tau must be >= 0")
    stats = association_stats(cfg)
    beta1 = np.atleast_1d(sir_threshold(mean_load(MACRO, cfg) * tau / cfg.bandwidth))
    beta2 = np.atleast_1d(sir_threshold(mean_load(PICO, cfg) * tau / cfg.bandwidth))

    d_sel = in_selection_probability(in_dof, cfg) - in_selection_probability(in_dof - 1, cfg)
    gain = stats.A2_off * d_sel * float(_offloaded_gap_core(beta2, cfg, tol)[0])

    pr_spent = float(in_dof_pmf(in_dof, in_dof, cfg))  # budget fully used
    penalty = stats.A1 * pr_spent * float(_macro_penalty_core(beta1, in_dof, cfg, tol)[0])
    return gain - penalty, gain, penalty


def asymptotic_order_slopes(in_dof: int, cfg: NetworkConfig,
                            tau_grid: Sequence[float],
                            tol: float = 1e-6) -> Tuple[float, float]:
    """Log-log slopes of the gain and penalty terms over a small-threshold
    grid; these approach the pico antenna count and the retained macro DoF
    respectively as the grid moves toward zero."""
    tau_arr = np.asarray(sorted(tau_grid, reverse=True), dtype=float)
    if tau_arr.size < 2 or tau_arr[-1] <= 0:
        raise ValueError("asymptotic_order_slopes: need >= 2 positive thresholds")
    if tau_arr[0] / tau_arr[-1] < 10.0:
        raise ValueError("asymptotic_order_slopes: grid must span >= one decade")
    gains, penalties = [], []
    for tau in tau_arr:
        _, gain, penalty = delta_rate_coverage(in_dof, float(tau), cfg, tol=tol)
        gains.append(gain)
        penalties.append(penalty)
    gains = np.asarray(gains)
    penalties = np.asarray(penalties)
    if np.any(gains <= 0.0) or np.any(penalties <= 0.0):
        raise NumericalAccuracyError(
            "asymptotic_order_slopes: term underflowed on the given grid"
        )
    logt = np.log(tau_arr)
    slope_gain = float(np.polyfit(logt, np.log(gains), 1)[0])
    slope_penalty = float(np.polyfit(logt, np.log(penalties), 1)[0])
    return slope_gain, slope_penalty
