"""Association probabilities, serving-distance densities, and load models.

Everything here is a deterministic scalar ingredient of the coverage
analytics: the probability that the typical user lands in each class
(macro, unoffloaded pico, offloaded), the distance laws to its serving
BS(s) conditioned on the class, the cell-load pmf, the pmf of active
offloaded users per macro-BS, and the probability that an offloaded user
is picked for nulling.  The load-type pmfs use a fitted cell-size
approximation (shape constant ``cfg.cell_shape``, default 3.5); their
exact distributions are not known in closed form, so every quantity in
this module is validated against Monte Carlo estimates in the test suite.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from .config import MACRO, PICO, NetworkConfig, UserClass
from .errors import NumericalAccuracyError

# hard caps for adaptive pmf tail truncation
TAIL_MASS = 1e-9
TAIL_CAP = 10_000


@dataclass(frozen=True)
class AssociationStats:
    """Association split, nulling-selection probability, and mean loads."""

    A1: float               # Pr(typical user is a macro user)
    A2_unoff: float         # Pr(unoffloaded pico user)
    A2_off: float           # Pr(offloaded user)
    pr_in_selected: float   # Pr(an offloaded user is selected for nulling)
    mean_load_macro: float
    mean_load_pico: float

    @property
    def A2(self) -> float:
        return self.A2_unoff + self.A2_off


def _quad_to_inf(fn) -> float:
    val, err, *_ = integrate.quad(
        fn, 0.0, np.inf, limit=400, epsabs=1e-12, epsrel=1e-12, full_output=1
    )
    if err > 1e-10:
        raise NumericalAccuracyError(f"association integral error {err:.2e} > 1e-10")
    return val


def association_probabilities(cfg: NetworkConfig) -> tuple[float, float, float]:
    """Probabilities (A1, A2_unoff, A2_off) of the three user classes.

    Computed from the Rayleigh nearest-BS distance law of each tier via
    the biased (macro vs pico) and unbiased (pico vs macro) power
    comparisons; the three values sum to one.
    """
    lam1, lam2 = cfg.macro.density, cfg.pico.density
    a1, a2 = cfg.macro.pathloss, cfg.pico.pathloss
    p1, p2, bias = cfg.macro.power, cfg.pico.power, cfg.bias

    # macro wins the biased comparison: nearest pico beyond (B p2/p1)^(1/a2) x^(a1/a2)
    c_macro = (bias * p2 / p1) ** (2.0 / a2) * np.pi * lam2
    A1 = _quad_to_inf(
        lambda t: np.exp(-t - c_macro * (t / (np.pi * lam1)) ** (a1 / a2))
    )
    # pico wins even unbiased: nearest macro beyond (p1/p2)^(1/a1) y^(a2/a1)
    c_pico = (p1 / p2) ** (2.0 / a1) * np.pi * lam1
    A2_unoff = _quad_to_inf(
        lambda t: np.exp(-t - c_pico * (t / (np.pi * lam2)) ** (a2 / a1))
    )
    A2_off = max(1.0 - A1 - A2_unoff, 0.0)
    return A1, A2_unoff, A2_off


def serving_distance_density(user_class, y, cfg: NetworkConfig):
    """Density of the serving-BS distance for macro / unoffloaded pico users.

    ``user_class`` is UserClass.MACRO or UserClass.PICO_UNOFFLOADED (the
    offloaded classes live on the joint density below).  Vectorized in y.
    """
    y = np.asarray(y, dtype=float)
    lam1, lam2 = cfg.macro.density, cfg.pico.density
    a1, a2 = cfg.macro.pathloss, cfg.pico.pathloss
    p1, p2, bias = cfg.macro.power, cfg.pico.power, cfg.bias
    A1, A2_unoff, _ = _cached_probs(cfg)

    if user_class == UserClass.MACRO:
        out = (
            2.0 * np.pi * lam1 * y / A1
            * np.exp(
                -np.pi * lam1 * y**2
                - np.pi * lam2 * (bias * p2 / p1) ** (2.0 / a2) * y ** (2.0 * a1 / a2)
            )
        )
    elif user_class == UserClass.PICO_UNOFFLOADED:
        out = (
            2.0 * np.pi * lam2 * y / A2_unoff
            * np.exp(
                -np.pi * lam2 * y**2
                - np.pi * lam1 * (p1 / p2) ** (2.0 / a1) * y ** (2.0 * a2 / a1)
            )
        )
    else:
        raise ValueError(f"serving_distance_density: unsupported class {user_class}")
    return out if out.ndim else float(out)


def offloading_strip(x, cfg: NetworkConfig):
    """Bounds (y_lo, y_hi) of the serving-pico distance of an offloaded user
    whose nearest macro sits at distance x."""
    x = np.asarray(x, dtype=float)
    a1, a2 = cfg.macro.pathloss, cfg.pico.pathloss
    ratio = cfg.pico.power / cfg.macro.power
    y_lo = ratio ** (1.0 / a2) * x ** (a1 / a2)
    y_hi = (cfg.bias * ratio) ** (1.0 / a2) * x ** (a1 / a2)
    return y_lo, y_hi


def joint_distance_density(x, y, cfg: NetworkConfig):
    """Joint density of (nearest-macro, serving-pico) distances for an
    offloaded user: independent Rayleigh laws restricted to the offloading
    strip and renormalized.  Zero off the strip."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lam1, lam2 = cfg.macro.density, cfg.pico.density
    _, _, A2_off = _cached_probs(cfg)
    y_lo, y_hi = offloading_strip(x, cfg)
    inside = (y >= y_lo) & (y < y_hi)
    val = (
        (2.0 * np.pi * lam1 * x * np.exp(-np.pi * lam1 * x**2))
        * (2.0 * np.pi * lam2 * y * np.exp(-np.pi * lam2 * y**2))
        / A2_off
    )
    out = np.where(inside, val, 0.0)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Load and active-offloaded-user pmfs (cell-size approximation)
# ---------------------------------------------------------------------------

def _shape_pmf_log(n, shape, ratio, offset):
    """log of  shape^shape * G(n+shape) * ratio^(n-offset)
    / (G(shape) * G(n-offset+1) * (ratio+shape)^(n+shape))  -- the common
    skeleton of all three fitted pmfs (offset 0 or 1)."""
    n = np.asarray(n, dtype=float)
    k = n - offset
    if ratio == 0.0:
        return np.where(k == 0, 0.0, -np.inf)
    return (
        shape * math.log(shape)
        + gammaln(n + shape)
        - gammaln(shape)
        - gammaln(k + 1.0)
        + k * math.log(ratio)
        - (n + shape) * math.log(ratio + shape)
    )


def load_pmf(tier: int, n, cfg: NetworkConfig):
    """pmf of the typical user's serving-BS load (own user included), n >= 1."""
    n = np.asarray(n)
    if np.any(n < 1):
        raise ValueError("load_pmf: n must be >= 1")
    A1, A2_unoff, A2_off = _cached_probs(cfg)
    frac = A1 if tier == MACRO else A2_unoff + A2_off
    lam = cfg.tier(tier).density
    ratio = cfg.user_density * frac / lam
    out = np.exp(_shape_pmf_log(n, cfg.cell_shape, ratio, offset=1))
    return out if out.ndim else float(out)


def mean_load(tier: int, cfg: NetworkConfig) -> float:
    """Fitted mean load 1 + slope * lam_u A_j / lam_j of the serving BS."""
    A1, A2_unoff, A2_off = _cached_probs(cfg)
    frac = A1 if tier == MACRO else A2_unoff + A2_off
    lam = cfg.tier(tier).density
    return 1.0 + cfg.mean_load_slope * cfg.user_density * frac / lam


def _offload_ratio(cfg: NetworkConfig) -> float:
    """nu = lam2 A_off / (A2 lam1): mean active offloaded users per macro-BS."""
    A1, A2_unoff, A2_off = _cached_probs(cfg)
    A2 = A2_unoff + A2_off
    if A2 == 0.0 or A2_off == 0.0:
        return 0.0
    return cfg.pico.density * A2_off / (A2 * cfg.macro.density)


def active_offloaded_pmf(n, cfg: NetworkConfig):
    """pmf of the number of active offloaded users of a macro-BS observed
    at the serving macro of a macro user, n >= 0."""
    n = np.asarray(n)
    if np.any(n < 0):
        raise ValueError("active_offloaded_pmf: n must be >= 0")
    out = np.exp(_shape_pmf_log(n, cfg.cell_shape, _offload_ratio(cfg), offset=0))
    return out if out.ndim else float(out)


def active_offloaded_seen_pmf(n, cfg: NetworkConfig):
    """pmf of the active offloaded count at the nearest macro of an
    offloaded user, that user included, n >= 1."""
    n = np.asarray(n)
    if np.any(n < 1):
        raise ValueError("active_offloaded_seen_pmf: n must be >= 1")
    out = np.exp(_shape_pmf_log(n, cfg.cell_shape, _offload_ratio(cfg), offset=1))
    return out if out.ndim else float(out)


def in_dof_pmf(u, in_dof: int, cfg: NetworkConfig):
    """pmf of the nulling DoF a macro-BS actually spends: min(budget, count).

    Point values of active_offloaded_pmf below the budget, with the whole
    tail aggregated at u == in_dof, so the result sums to one exactly.
    """
    u_arr = np.atleast_1d(np.asarray(u, dtype=int))
    if np.any((u_arr < 0) | (u_arr > in_dof)):
        raise ValueError(f"in_dof_pmf: u must lie in [0, {in_dof}]")
    if in_dof == 0:
        out = np.ones(u_arr.shape)
    else:
        below = active_offloaded_pmf(np.arange(in_dof), cfg)
        tail = 1.0 - float(np.sum(below))
        out = np.where(u_arr == in_dof, tail, below[np.minimum(u_arr, in_dof - 1)])
    return out if np.ndim(u) else float(out[0])


def in_selection_probability(in_dof: int, cfg: NetworkConfig) -> float:
    """Probability that an offloaded user is among the nulling targets its
    nearest macro picks (uniformly, up to the DoF budget) in a slot."""
    if in_dof < 0 or in_dof > cfg.macro.antennas - 1:
        raise ValueError("in_selection_probability: in_dof out of range")
    if in_dof == 0:
        return 0.0
    nu = _offload_ratio(cfg)
    if nu == 0.0:
        return 1.0  # the lone offloaded user is always selected
    shape = cfg.cell_shape
    n = np.arange(1, in_dof + 1)
    seen = active_offloaded_seen_pmf(n, cfg)
    total = (
        (in_dof / nu) * (1.0 - (1.0 + nu / shape) ** (-shape))
        - float(np.sum(in_dof / n * seen))
        + float(np.sum(seen))
    )
    clamped = min(max(total, 0.0), 1.0)
    if abs(clamped - total) > 1e-9:
        warnings.warn(
            f"in_selection_probability clamped from {total!r}", RuntimeWarning
        )
    return clamped


def pmf_tail_sum(pmf_fn, start: int, mass: float = 1.0 - TAIL_MASS) -> tuple[np.ndarray, int]:
    """Evaluate pmf_fn(n) from ``start`` until cumulative mass or the hard cap.

    Returns (values, n_max) with values[i] = pmf_fn(start + i).  Geometric-like
    tails make this cheap; the cap guards against mis-specified pmfs.
    """
    block, lo, chunks = 64, start, []
    cum = 0.0
    while lo <= TAIL_CAP:
        n = np.arange(lo, min(lo + block, TAIL_CAP + 1))
        vals = np.asarray(pmf_fn(n), dtype=float)
        chunks.append(vals)
        cum += float(vals.sum())
        if cum >= mass:
            break
        lo += block
        block *= 2
    values = np.concatenate(chunks)
    return values, start + len(values) - 1


@lru_cache(maxsize=64)
def _cached_probs(cfg: NetworkConfig) -> tuple[float, float, float]:
    return association_probabilities(cfg)


def association_stats(cfg: NetworkConfig) -> AssociationStats:
    """Bundle of the per-config association quantities, computed once."""
    A1, A2_unoff, A2_off = _cached_probs(cfg)
    return AssociationStats(
        A1=A1,
        A2_unoff=A2_unoff,
        A2_off=A2_off,
        pr_in_selected=in_selection_probability(cfg.in_dof, cfg),
        mean_load_macro=mean_load(MACRO, cfg),
        mean_load_pico=mean_load(PICO, cfg),
    )
