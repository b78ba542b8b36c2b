"""Numerical and combinatorial primitives for the coverage analytics.

The interference seen from one tier of a Poisson field of transmitters,
outside an exclusion radius and under unit-mean exponential fading, has a
Laplace transform expressible through a generalized incomplete beta
integral.  The coverage expressions additionally need scaled high-order
derivatives of that transform, which expand over integer partitions, and
a three-part composition sum for the class whose dominant interferer is
kept explicit.  This module provides exactly those pieces, vectorized
over numpy arrays.
"""

from __future__ import annotations

from functools import lru_cache
from math import factorial
from typing import Tuple

import numpy as np
from scipy import special as sc

from .config import TierParams

# A partition of m as part multiplicities (p_1, ..., p_m), sum a*p_a == m.
Partition = Tuple[int, ...]
# An ordered triple (q1, q2, q3) of nonnegative integers summing to n.
Composition3 = Tuple[int, int, int]


# ---------------------------------------------------------------------------
# Generalized incomplete beta
# ---------------------------------------------------------------------------

def incomplete_beta(a, b, z):
    """Upper incomplete beta integral of u^(a-1) (1-u)^(b-1) over [z, 1].

    Requires a > 0, b > 0 and 0 < z < 1.  The endpoint u = 1 is an
    integrable singularity for b < 1, which is the regime every coverage
    call site lives in (b = 1 - 2/alpha with alpha > 2).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    z = np.asarray(z, dtype=float)
    if np.any(a <= 0):
        raise ValueError(f"incomplete_beta: a must be > 0, got {a}")
    if np.any(b <= 0):
        raise ValueError(f"incomplete_beta: b must be > 0, got {b}")
    if np.any((z <= 0) | (z >= 1)):
        raise ValueError(f"incomplete_beta: z must lie in (0, 1), got {z}")
    return _incomplete_beta_tail(a, b, 1.0 - z)


def _incomplete_beta_tail(a, b, tail):
    """incomplete_beta with the complement tail = 1 - z supplied directly.

    Callers that know tail = w/(1+w) exactly should use this form; it
    stays accurate when z -> 1 where forming 1 - z would cancel.
    """
    # substitute v = 1-u: integral over [0, tail] of v^(b-1) (1-v)^(a-1) dv
    return sc.beta(b, a) * sc.betainc(b, a, tail)


# ---------------------------------------------------------------------------
# Combinatorial enumerations
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def integer_partitions(m: int) -> Tuple[Partition, ...]:
    """All multiplicity vectors (p_1..p_m) with sum of a*p_a equal to m.

    m = 0 yields the single empty partition.  Results are cached; the
    largest m in practice is the macro antenna count minus one.
    """
    if m < 0:
        raise ValueError(f"integer_partitions: m must be >= 0, got {m}")
    if m == 0:
        return ((),)
    found = []
    counts = [0] * m

    def descend(remaining: int, max_part: int) -> None:
        if remaining == 0:
            found.append(tuple(counts))
            return
        for part in range(min(remaining, max_part), 0, -1):
            counts[part - 1] += 1
            descend(remaining - part, part)
            counts[part - 1] -= 1

    descend(m, m)
    return tuple(found)


def compositions3(n: int) -> Tuple[Composition3, ...]:
    """All (n+1)(n+2)/2 ordered triples of nonnegative integers summing to n."""
    if n < 0:
        raise ValueError(f"compositions3: n must be >= 0, got {n}")
    return tuple(
        (q1, q2, n - q1 - q2) for q1 in range(n + 1) for q2 in range(n - q1 + 1)
    )


# ---------------------------------------------------------------------------
# Interference Laplace transform and scaled derivatives
# ---------------------------------------------------------------------------

def _fading_tail(s, r, alpha):
    """tail = 1 - z for z = 1/(1 + s r^-alpha), stable for r -> 0 and s -> 0."""
    s = np.asarray(s, dtype=float)
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = s * np.power(r, -alpha)
        w = np.where(s == 0, 0.0, w)            # covers 0 * inf at r = 0
        tail = np.where(np.isinf(w), 1.0, w / (1.0 + w))
    return tail


def laplace_interference(s, r, tier: TierParams):
    """Laplace transform at s of the aggregate interference power from one
    tier, counting transmitters beyond exclusion radius r with unit-mean
    exponential effective fading.

    Vectorized over broadcastable s and r.  Returns values in (0, 1];
    s = 0 gives exactly 1 and r = 0 uses the full-plane limit.
    """
    s = np.asarray(s, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(s < 0):
        raise ValueError("laplace_interference: s must be >= 0")
    if np.any(r < 0):
        raise ValueError("laplace_interference: r must be >= 0")
    alpha = tier.pathloss
    tail = _fading_tail(s, r, alpha)
    bprime = _incomplete_beta_tail(2.0 / alpha, 1.0 - 2.0 / alpha, tail)
    exponent = (2.0 * np.pi * tier.density / alpha) * np.power(s, 2.0 / alpha) * bprime
    out = np.exp(-exponent)
    return out if out.ndim else float(out)


def _derivative_basis(count: int, s, r, tier: TierParams) -> np.ndarray:
    """Basis terms t_a, a = 1..count, of the scaled-derivative expansion.

    t_a = (2 pi lambda / alpha) s^(2/alpha) B'(1 + 2/alpha, a - 2/alpha, z)
    evaluated at z = 1/(1 + s r^-alpha); shape (count,) + broadcast(s, r).
    """
    alpha = tier.pathloss
    tail = _fading_tail(s, r, alpha)
    s = np.asarray(s, dtype=float)
    prefactor = (2.0 * np.pi * tier.density / alpha) * np.power(s, 2.0 / alpha)
    rows = [
        prefactor * _incomplete_beta_tail(1.0 + 2.0 / alpha, a - 2.0 / alpha, tail)
        for a in range(1, count + 1)
    ]
    return np.stack(np.broadcast_arrays(*rows)) if count > 1 else np.asarray(rows)


def laplace_derivative_scaled(m: int, s, r, tier: TierParams):
    """m-th scaled derivative (-s)^m d^m/ds^m of the interference Laplace
    transform, expanded as a partition sum with all-nonnegative terms.

    m = 0 returns the transform itself.  s must be strictly positive for
    m >= 1.
    """
    if m < 0:
        raise ValueError(f"laplace_derivative_scaled: m must be >= 0, got {m}")
    base = laplace_interference(s, r, tier)
    if m == 0:
        return base
    if np.any(np.asarray(s, dtype=float) <= 0):
        raise ValueError("laplace_derivative_scaled: s must be > 0 for m >= 1")
    t = _derivative_basis(m, s, r, tier)
    total = np.zeros(np.shape(t[0]))
    for mult in integer_partitions(m):
        coeff = factorial(m)
        term = np.ones(np.shape(t[0]))
        for a, p in enumerate(mult, start=1):
            if p:
                coeff //= factorial(p)
                term = term * t[a - 1] ** p
        total = total + coeff * term
    out = base * total
    return out if np.ndim(out) else float(out)


def laplace_derivative_stack(orders: int, s, r, tier: TierParams) -> np.ndarray:
    """Scaled derivatives divided by factorials, for all orders below `orders`.

    Returns an array D of shape (orders,) + broadcast(s, r) with
    D[m] = laplace_derivative_scaled(m, s, r, tier) / m!, computed by the
    exponential power-series recurrence instead of explicit partition
    sums.  Equivalent to the literal expansion (see tests) but O(orders^2)
    per point, which is what the coverage integrands need.
    """
    if orders < 1:
        raise ValueError("laplace_derivative_stack: orders must be >= 1")
    base = np.asarray(laplace_interference(s, r, tier), dtype=float)
    if orders == 1:
        return base[None, ...]
    t = _derivative_basis(orders - 1, s, r, tier)
    h = np.zeros((orders,) + base.shape)
    h[0] = 1.0
    for m in range(1, orders):
        acc = np.zeros(base.shape)
        for a in range(1, m + 1):
            acc += a * t[a - 1] * h[m - a]
        h[m] = acc / m
    return base * h
