"""Monte Carlo engine: the ground truth the analytics are checked against.

A trial drops the two BS tiers and the user field as Poisson processes in
a disk, adds the typical user at the origin, associates everyone by
biased received power, schedules one user per BS, selects nulling targets
at each macro, and scores the typical user's rate.  The expensive part of
a trial (per-user nearest-BS lookups) does not depend on the bias or on
the scheme, so one pass captures a compact record per trial from which
the rate of ANY scheme variant (nulling budget, blank-subframe fraction,
threshold grid) is recomputed in vectorized form.  Bias sweeps reuse one
pass across all bias values the same way.

Fidelity: the ``fast`` mode draws the effective beamforming gains from
their exact distributions (signal Gamma(M,1) for an M-DoF beam, each
interferer Exp(1)); the ``full`` mode draws explicit Rayleigh channel
vectors for the serving BS and the typical user's nearest macro and runs
the zero-forcing precoder, which is the same thing by construction --
the test suite verifies that.

Conventions fixed here (they change interference statistics and are
asserted by tests): every BS transmits in every slot even with no
associated user; the typical user is conditioned to be the one its
serving BS schedules; a macro performs nulling regardless of its own
scheduling.  In the blank-subframe baseline, macros stay silent during a
fraction ``eta`` of the resource in which picos serve only their
offloaded users, and during the rest picos serve their unoffloaded users
while macros serve theirs, each sub-slot dividing its resource share by
the matching per-class load.

Reproducibility contract: trial t uses the generator spawned from
SeedSequence(seed) child t, so results are independent of any batching
or execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ._nearest import NearestGrid
from .config import MACRO, PICO, NetworkConfig, UserClass
from .errors import InsufficientWindowError

CLASS_NAMES = ("macro", "pico_unoffloaded", "offloaded")
_GUARD_LIMIT = 0.01  # max tolerated fraction of edge-suspect trials


def default_window_radius(cfg: NetworkConfig) -> float:
    """max(5 / sqrt(pi lam1), 2000 m): interference is near-field dominated
    and the edge guard quantifies the residual boundary error."""
    return max(5.0 / math.sqrt(math.pi * cfg.macro.density), 2000.0)


def default_user_window(cfg: NetworkConfig, window_radius: float,
                        eps: float = 1e-12) -> float:
    """Radius inside which users can influence the typical user's record.

    Chain bound: typical's nearest macro + an offloaded user's reach to
    that macro + its serving pico + that pico's other users, each at the
    eps-quantile of the nearest-point law.  Events beyond are ignored at
    probability ~eps per point.
    """
    q_macro = math.sqrt(math.log(1.0 / eps) / (math.pi * cfg.macro.density))
    q_pico = math.sqrt(math.log(1.0 / eps) / (math.pi * cfg.pico.density))
    return min(window_radius, 2.0 * q_macro + 2.0 * q_pico)


# ---------------------------------------------------------------------------
# Deployments
# ---------------------------------------------------------------------------

@dataclass
class Deployment:
    """One sampled realization; the typical user is user_points[0] at the
    origin (its own process is conditioned per Slivnyak)."""

    macro_points: np.ndarray   # (n1, 2) m
    pico_points: np.ndarray    # (n2, 2) m
    user_points: np.ndarray    # (nu, 2) m, row 0 is the typical user
    window_radius: float
    user_window_radius: float


def _disk_points(rng: np.random.Generator, density: float, radius: float) -> np.ndarray:
    n = rng.poisson(density * math.pi * radius * radius)
    r = radius * np.sqrt(rng.random(n))
    theta = 2.0 * math.pi * rng.random(n)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def sample_deployment(cfg: NetworkConfig, window_radius: float, seed,
                      user_window_radius: Optional[float] = None) -> Deployment:
    """Sample both BS tiers and the user field; deterministic given seed."""
    if window_radius <= 0:
        raise ValueError("sample_deployment: window_radius must be > 0")
    rng = np.random.default_rng(seed)
    user_r = window_radius if user_window_radius is None else user_window_radius
    macros = _disk_points(rng, cfg.macro.density, window_radius)
    picos = _disk_points(rng, cfg.pico.density, window_radius)
    users = _disk_points(rng, cfg.user_density, user_r)
    users = np.vstack([np.zeros((1, 2)), users])
    return Deployment(macros, picos, users, window_radius, user_r)


# ---------------------------------------------------------------------------
# Association (reference implementation)
# ---------------------------------------------------------------------------

@dataclass
class AssociationRealization:
    """Per-user labels and per-BS associations for one deployment."""

    user_class: np.ndarray        # (nu,) int8 codes into CLASS_NAMES
    serving_tier: np.ndarray      # (nu,) 1 or 2
    serving_index: np.ndarray     # (nu,) index into the serving tier's points
    nearest_macro_index: np.ndarray
    nearest_macro_dist: np.ndarray
    nearest_pico_index: np.ndarray
    nearest_pico_dist: np.ndarray
    macro_loads: np.ndarray       # (n1,) users associated per macro
    pico_loads: np.ndarray        # (n2,)

    def users_of(self, tier: int, index: int) -> np.ndarray:
        on_tier = (self.serving_tier == tier) & (self.serving_index == index)
        return np.nonzero(on_tier)[0]

    def offloaded_of(self, macro_index: int) -> np.ndarray:
        """Offloaded users whose nearest macro is the given one."""
        mask = (self.user_class == 2) & (self.nearest_macro_index == macro_index)
        return np.nonzero(mask)[0]


def _classify(pw_macro, pw_pico, bias):
    """Class codes from the unbiased received powers of both tiers.

    Macro wins ties of the biased comparison (measure-zero event)."""
    macro = pw_macro >= bias * pw_pico
    unoff = ~macro & (pw_pico > pw_macro)
    return np.where(macro, 0, np.where(unoff, 1, 2)).astype(np.int8)


def associate_and_classify(dep: Deployment, cfg: NetworkConfig) -> AssociationRealization:
    """Label every user and collect per-BS loads.

    This is the readable reference path; the trial engine below inlines
    the same arithmetic and is tested against this function.
    """
    if dep.macro_points.shape[0] == 0 or dep.pico_points.shape[0] == 0:
        raise InsufficientWindowError("a tier is empty within the window")
    mgrid = NearestGrid(dep.macro_points, dep.window_radius)
    pgrid = NearestGrid(dep.pico_points, dep.window_radius)
    d1, i1 = mgrid.query(dep.user_points)
    d2, i2 = pgrid.query(dep.user_points)
    pw1 = cfg.macro.power * d1 ** -cfg.macro.pathloss
    pw2 = cfg.pico.power * d2 ** -cfg.pico.pathloss
    codes = _classify(pw1, pw2, cfg.bias)
    serving_tier = np.where(codes == 0, MACRO, PICO).astype(np.int8)
    serving_index = np.where(codes == 0, i1, i2)
    macro_loads = np.bincount(i1[codes == 0], minlength=dep.macro_points.shape[0])
    pico_loads = np.bincount(i2[codes != 0], minlength=dep.pico_points.shape[0])
    return AssociationRealization(
        user_class=codes,
        serving_tier=serving_tier,
        serving_index=serving_index,
        nearest_macro_index=i1,
        nearest_macro_dist=d1,
        nearest_pico_index=i2,
        nearest_pico_dist=d2,
        macro_loads=macro_loads.astype(np.int64),
        pico_loads=pico_loads.astype(np.int64),
    )


# ---------------------------------------------------------------------------
# Scheduling
# ---------------------------------------------------------------------------

@dataclass
class SlotSchedule:
    """One slot: the scheduled user of every BS and the nulling targets.

    scheduled_* hold user indices, -1 for an idle BS (it still transmits).
    active_offloaded maps macro index -> indices of its offloaded users
    that their serving picos scheduled this slot; in_targets is the
    uniformly drawn subset of size min(budget, count) per macro.
    """

    scheduled_macro: np.ndarray
    scheduled_pico: np.ndarray
    active_offloaded: Dict[int, np.ndarray]
    in_targets: Dict[int, np.ndarray]


def draw_schedule(real: AssociationRealization, cfg: NetworkConfig,
                  rng: np.random.Generator, condition_on_typical: bool = True,
                  keys: Optional[np.ndarray] = None) -> SlotSchedule:
    """Uniform per-BS scheduling via i.i.d. user keys (argmin of the keys of
    a BS's users is a uniform choice); the typical user (index 0) wins its
    serving BS's slot when conditioning is on.  Macros then pick nulling
    targets uniformly without replacement among their active offloaded
    users, up to the cfg.in_dof budget.
    """
    nu = real.user_class.shape[0]
    if keys is None:
        keys = rng.random(nu)
    else:
        keys = np.asarray(keys, dtype=float)
    if condition_on_typical:
        keys = keys.copy()
        keys[0] = -1.0

    def argmin_per_bs(tier: int, n_bs: int) -> np.ndarray:
        out = np.full(n_bs, -1, dtype=np.int64)
        on = real.serving_tier == tier
        idx = np.nonzero(on)[0]
        order = idx[np.argsort(keys[idx], kind="stable")]
        # first occurrence per BS in ascending key order
        seen = np.zeros(n_bs, dtype=bool)
        for u in order:
            b = real.serving_index[u]
            if not seen[b]:
                seen[b] = True
                out[b] = u
        return out

    scheduled_macro = argmin_per_bs(MACRO, real.macro_loads.shape[0])
    scheduled_pico = argmin_per_bs(PICO, real.pico_loads.shape[0])

    active: Dict[int, np.ndarray] = {}
    targets: Dict[int, np.ndarray] = {}
    offloaded = np.nonzero(real.user_class == 2)[0]
    sched_set = scheduled_pico[real.serving_index[offloaded]] == offloaded
    for m in np.unique(real.nearest_macro_index[offloaded]):
        mine = offloaded[(real.nearest_macro_index[offloaded] == m) & sched_set]
        active[int(m)] = mine
        take = min(cfg.in_dof, mine.size)
        targets[int(m)] = rng.choice(mine, size=take, replace=False) if take else np.empty(0, dtype=np.int64)
    return SlotSchedule(scheduled_macro, scheduled_pico, active, targets)


# ---------------------------------------------------------------------------
# Beamforming
# ---------------------------------------------------------------------------

def zfbf_precoder(channel_rows: np.ndarray) -> np.ndarray:
    """Zero-forcing beam for the first channel row, nulling the others.

    channel_rows stacks the served user's channel h and the nulled users'
    channels g_1..g_u (u + 1 <= antennas).  Returns the unit-norm first
    column of the right pseudo-inverse: exactly orthogonal to every g_i,
    and with |h^H f|^2 distributed Gamma(antennas - u, 1).
    """
    rows = np.atleast_2d(np.asarray(channel_rows))
    k, n = rows.shape
    if k > n:
        raise ValueError(f"zfbf_precoder: {k - 1} nulled users exceed {n} antennas")
    gram = rows.conj() @ rows.T
    e1 = np.zeros(k, dtype=complex)
    e1[0] = 1.0
    try:
        coeff = np.linalg.solve(gram, e1)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            "zfbf_precoder: rank-deficient channel rows (resample fading)"
        ) from exc
    residual = np.max(np.abs(gram @ coeff - e1))
    if not np.isfinite(residual) or residual > 1e-8:
        raise np.linalg.LinAlgError(
            "zfbf_precoder: rank-deficient channel rows (resample fading)"
        )
    w = rows.T @ coeff
    return w / np.linalg.norm(w)


def _cn(rng: np.random.Generator, *shape: int) -> np.ndarray:
    """Standard circularly-symmetric complex Gaussian draws."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


# ---------------------------------------------------------------------------
# Scheme specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SchemeSpec:
    """What to simulate: nulling with a DoF budget, or blank subframes
    with a resource fraction, at either fidelity."""

    variant: str                      # "nulling" | "blank_subframes"
    in_dof: int = 0                   # nulling budget U (nulling variant)
    abs_fraction: float = 0.0         # eta in (0,1) (blank-subframes variant)
    fidelity: str = "fast"            # "fast" | "full"

    def __post_init__(self):
        if self.variant not in ("nulling", "blank_subframes"):
            raise ValueError(f"SchemeSpec: unknown variant {self.variant!r}")
        if self.fidelity not in ("fast", "full"):
            raise ValueError(f"SchemeSpec: unknown fidelity {self.fidelity!r}")
        if self.variant == "nulling" and self.in_dof < 0:
            raise ValueError("SchemeSpec: in_dof must be >= 0")
        if self.variant == "blank_subframes" and not 0.0 < self.abs_fraction < 1.0:
            raise ValueError("SchemeSpec: abs_fraction must lie in (0, 1)")

    @staticmethod
    def nulling(in_dof: int, fidelity: str = "fast") -> "SchemeSpec":
        return SchemeSpec(variant="nulling", in_dof=in_dof, fidelity=fidelity)

    @staticmethod
    def blank_subframes(abs_fraction: float, fidelity: str = "fast") -> "SchemeSpec":
        return SchemeSpec(variant="blank_subframes", abs_fraction=abs_fraction,
                          fidelity=fidelity)


# ---------------------------------------------------------------------------
# Trial records
# ---------------------------------------------------------------------------

@dataclass
class TrialRecords:
    """Sufficient statistics of each trial for one bias value.

    Interference columns: i1_rest sums rho1 g d^-a1 over macros other than
    the nearest; g0term is the nearest macro's own term; i2_rest sums
    picos other than the nearest; g2term is the nearest pico's term.
    esum[t, k] is the sum of the first k of N1 unit-exponential signal
    components (coupling the Gamma(N1 - u, 1) signal across budgets), and
    g2sig is the Gamma(N2, 1) pico beamforming gain.  n_active_other
    counts active offloaded users at the typical's nearest macro besides
    the typical itself; v_rank is the uniform variate that decides the
    typical's position among them.
    """

    bias: float
    class_code: np.ndarray
    z1: np.ndarray
    z2: np.ndarray
    load_total: np.ndarray
    load_class: np.ndarray
    n_active_other: np.ndarray
    v_rank: np.ndarray
    i1_rest: np.ndarray
    g0term: np.ndarray
    i2_rest: np.ndarray
    g2term: np.ndarray
    esum: np.ndarray
    g2sig: np.ndarray
    guard_bad: np.ndarray          # 3rd-nearest macro beyond half window
    seed: object = None
    full_scheme: Optional[SchemeSpec] = None
    sig_full: Optional[np.ndarray] = None
    g0_full: Optional[np.ndarray] = None

    @property
    def trials(self) -> int:
        return self.class_code.shape[0]

    @property
    def guard_fraction(self) -> float:
        return float(np.mean(self.guard_bad))


def _alloc_records(bias: float, trials: int, n1: int, seed,
                   full_scheme: Optional[SchemeSpec]) -> TrialRecords:
    f = lambda: np.zeros(trials)
    rec = TrialRecords(
        bias=bias,
        class_code=np.zeros(trials, dtype=np.int8),
        z1=f(), z2=f(),
        load_total=np.zeros(trials, dtype=np.int64),
        load_class=np.zeros(trials, dtype=np.int64),
        n_active_other=np.zeros(trials, dtype=np.int64),
        v_rank=f(), i1_rest=f(), g0term=f(), i2_rest=f(), g2term=f(),
        esum=np.zeros((trials, n1 + 1)),
        g2sig=f(),
        guard_bad=np.zeros(trials, dtype=bool),
        seed=seed,
        full_scheme=full_scheme,
        sig_full=f() if full_scheme is not None else None,
        g0_full=f() if full_scheme is not None else None,
    )
    return rec


def _capture_association(bias: float, pw1: float, pw2: float,
                         pw1u: np.ndarray, pw2u: np.ndarray, unoff_u: np.ndarray,
                         i1u: np.ndarray, i2u: np.ndarray, keys: np.ndarray,
                         m0: int, p0: int, n_picos: int,
                         ) -> Tuple[int, int, int, int]:
    """Typical user's class, serving-BS loads, and the count of other
    active offloaded users at its nearest macro, for one bias value.

    Mirrors associate_and_classify + uniform key scheduling (tested for
    exact agreement), restricted to the quantities a trial record needs.
    """
    if pw1 >= bias * pw2:
        code = 0
    elif pw2 > pw1:
        code = 1
    else:
        code = 2

    macro_u = pw1u >= bias * pw2u
    pico_assoc = ~macro_u
    # uniform pico scheduling = argmin of keys over associated users
    minkey = np.full(n_picos, np.inf)
    if keys.shape[0]:
        np.minimum.at(minkey, i2u[pico_assoc], keys[pico_assoc])
    if code != 0:
        minkey[p0] = -1.0  # the typical user wins its own pico's slot

    off_m0 = pico_assoc & ~unoff_u & (i1u == m0)
    active = off_m0 & (keys == minkey[i2u]) if keys.shape[0] else off_m0
    n_active_other = int(np.count_nonzero(active))

    if code == 0:
        load_total = 1 + int(np.count_nonzero(macro_u & (i1u == m0)))
        load_class = load_total
    else:
        at_p0 = pico_assoc & (i2u == p0)
        load_total = 1 + int(np.count_nonzero(at_p0))
        if code == 1:
            load_class = 1 + int(np.count_nonzero(at_p0 & unoff_u))
        else:
            load_class = 1 + int(np.count_nonzero(at_p0 & ~unoff_u))
    return code, load_total, load_class, n_active_other


def _full_fidelity_gains(rng: np.random.Generator, scheme: SchemeSpec,
                         cfg: NetworkConfig, code: int, n_active_at_m0: int,
                         u_spent_serving: int, selected: bool) -> Tuple[float, float]:
    """Explicit-channel signal gain and nearest-macro gain for one trial."""
    n1, n2 = cfg.macro.antennas, cfg.pico.antennas
    if code == 0:
        u = u_spent_serving if scheme.variant == "nulling" else 0
        rows = _cn(rng, u + 1, n1)
        fvec = zfbf_precoder(rows)
        sig = abs(np.vdot(rows[0], fvec)) ** 2
        return float(sig), float("nan")
    # pico-served typical: maximum-ratio pico beam
    h2 = _cn(rng, n2)
    sig = float(np.linalg.norm(h2) ** 2)
    # nearest macro's beam toward its own user and nulling targets
    budget = scheme.in_dof if scheme.variant == "nulling" else 0
    u0 = min(budget, n_active_at_m0)
    g_typ = _cn(rng, n1)
    if code == 2 and selected and u0 >= 1:
        rows = np.vstack([_cn(rng, 1, n1), g_typ[None, :], _cn(rng, u0 - 1, n1)])
        fvec = zfbf_precoder(rows)
    else:
        rows = _cn(rng, u0 + 1, n1)
        fvec = zfbf_precoder(rows)
    g0 = abs(np.vdot(g_typ, fvec)) ** 2
    return sig, float(g0)


def simulate_records(cfg: NetworkConfig, trials: int, seed,
                     bias_values: Optional[Sequence[float]] = None,
                     window_radius: Optional[float] = None,
                     user_window_radius: Optional[float] = None,
                     full_scheme: Optional[SchemeSpec] = None,
                     ) -> List[TrialRecords]:
    """Run the trial pass once and capture records for every bias value.

    The per-user nearest-BS queries and all fading draws are shared
    across biases (common random numbers); only the cheap association
    arithmetic is bias-specific.  ``full_scheme`` additionally computes
    explicit-beamforming gains for that one scheme.
    """
    if trials < 1:
        raise ValueError("simulate_records: trials must be >= 1")
    biases = [cfg.bias] if bias_values is None else [float(b) for b in bias_values]
    window = default_window_radius(cfg) if window_radius is None else float(window_radius)
    user_window = (default_user_window(cfg, window) if user_window_radius is None
                   else float(user_window_radius))
    n1 = cfg.macro.antennas
    p1, p2 = cfg.macro.power, cfg.pico.power
    a1, a2 = cfg.macro.pathloss, cfg.pico.pathloss
    rho1, rho2 = cfg.macro.tx_snr, cfg.pico.tx_snr
    out = [_alloc_records(b, trials, n1, seed, full_scheme) for b in biases]

    children = np.random.SeedSequence(seed).spawn(trials)
    for t in range(trials):
        rng = np.random.default_rng(children[t])
        macros = _disk_points(rng, cfg.macro.density, window)
        picos = _disk_points(rng, cfg.pico.density, window)
        users = _disk_points(rng, cfg.user_density, user_window)
        if macros.shape[0] < 3 or picos.shape[0] < 1:
            raise InsufficientWindowError("too few BSs sampled; enlarge the window")

        dm = np.hypot(macros[:, 0], macros[:, 1])
        dp = np.hypot(picos[:, 0], picos[:, 1])
        m0, p0 = int(np.argmin(dm)), int(np.argmin(dp))
        z1, z2 = float(dm[m0]), float(dp[p0])
        third = float(np.partition(dm, 2)[2])

        if users.shape[0]:
            d1u, i1u = NearestGrid(macros, window).query(users)
            d2u, i2u = NearestGrid(picos, window).query(users)
            pw1u = p1 * d1u ** -a1
            pw2u = p2 * d2u ** -a2
        else:
            i1u = i2u = np.empty(0, dtype=np.int64)
            pw1u = pw2u = np.empty(0)
        unoff_u = pw2u > pw1u  # bias-independent

        gm = rng.exponential(size=dm.shape[0])
        gp = rng.exponential(size=dp.shape[0])
        tm = rho1 * gm * dm ** -a1
        tp = rho2 * gp * dp ** -a2
        i1_rest = float(tm.sum() - tm[m0])
        g0term = float(tm[m0])
        i2_rest = float(tp.sum() - tp[p0])
        g2term = float(tp[p0])

        keys = rng.random(users.shape[0])
        e_parts = rng.exponential(size=n1)
        g2sig = float(rng.gamma(cfg.pico.antennas))
        v_rank = float(rng.random())

        pw1 = p1 * z1 ** -a1
        pw2 = p2 * z2 ** -a2

        for rec in out:
            code, load_total, load_class, n_active_other = _capture_association(
                rec.bias, pw1, pw2, pw1u, pw2u, unoff_u, i1u, i2u, keys,
                m0, p0, dp.shape[0],
            )
            rec.class_code[t] = code
            rec.z1[t], rec.z2[t] = z1, z2
            rec.load_total[t], rec.load_class[t] = load_total, load_class
            rec.n_active_other[t] = n_active_other
            rec.v_rank[t] = v_rank
            rec.i1_rest[t], rec.g0term[t] = i1_rest, g0term
            rec.i2_rest[t], rec.g2term[t] = i2_rest, g2term
            rec.esum[t, 1:] = np.cumsum(e_parts)
            rec.g2sig[t] = g2sig
            rec.guard_bad[t] = third > 0.5 * window

            if full_scheme is not None:
                n_at_m0 = n_active_other + (1 if code == 2 else 0)
                u_spent = min(full_scheme.in_dof, n_active_other) \
                    if full_scheme.variant == "nulling" else 0
                sel = False
                if code == 2 and full_scheme.variant == "nulling":
                    budget = min(full_scheme.in_dof, n_at_m0)
                    sel = int(v_rank * n_at_m0) + 1 <= budget
                sig, g0 = _full_fidelity_gains(
                    rng, full_scheme, cfg, code, n_at_m0, u_spent, sel
                )
                rec.sig_full[t] = sig
                rec.g0_full[t] = g0
    return out


# ---------------------------------------------------------------------------
# Scheme evaluation on records
# ---------------------------------------------------------------------------

def records_rates(rec: TrialRecords, scheme: SchemeSpec, cfg: NetworkConfig,
                  ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rates (bit/s) of the typical user per trial under one scheme.

    Returns (rates, class_code, in_selected); in_selected is false outside
    the offloaded class and for the blank-subframes variant.
    """
    if scheme.fidelity == "full":
        if rec.full_scheme != scheme:
            raise ValueError(
                "records_rates: full-fidelity evaluation needs records simulated "
                "with full_scheme равным the requested scheme"
            )
    n1 = cfg.macro.antennas
    if scheme.variant == "nulling" and scheme.in_dof > n1 - 1:
        raise ValueError("records_rates: nulling budget exceeds N1 - 1")
    code = rec.class_code
    is_macro = code == 0
    is_unoff = code == 1
    is_off = code == 2
    rho1, rho2 = cfg.macro.tx_snr, cfg.pico.tx_snr
    a1, a2 = cfg.macro.pathloss, cfg.pico.pathloss
    sig1_dist = rho1 * rec.z1 ** -a1
    sig2_dist = rho2 * rec.z2 ** -a2

    n_at_m0 = rec.n_active_other + is_off.astype(np.int64)
    selected = np.zeros(rec.trials, dtype=bool)

    if scheme.variant == "nulling":
        u_budget = scheme.in_dof
        spent = np.minimum(u_budget, rec.n_active_other)
        if scheme.fidelity == "full":
            sig_macro = rec.sig_full
            sig_pico = rec.sig_full
        else:
            sig_macro = np.take_along_axis(
                rec.esum, (n1 - spent)[:, None], axis=1
            )[:, 0]
            sig_pico = rec.g2sig
        cap = np.minimum(u_budget, np.maximum(n_at_m0, 1))
        selected = is_off & ((rec.v_rank * n_at_m0).astype(np.int64) + 1 <= cap)
        g0_raw = (rho1 * np.nan_to_num(rec.g0_full) * rec.z1 ** -a1
                  if scheme.fidelity == "full" else rec.g0term)
        g0 = np.where(selected, 0.0, g0_raw)
        denom = np.where(
            is_macro,
            rec.i1_rest + rec.i2_rest + rec.g2term,
            np.where(
                is_unoff,
                rec.i1_rest + g0_raw + rec.i2_rest,
                rec.i1_rest + g0 + rec.i2_rest,
            ),
        )
        signal = np.where(is_macro, sig_macro * sig1_dist, sig_pico * sig2_dist)
        share = np.ones(rec.trials)
        loads = rec.load_total
    else:
        if scheme.fidelity == "full":
            sig_macro = rec.sig_full
            sig_pico = rec.sig_full
        else:
            sig_macro = rec.esum[:, n1]
            sig_pico = rec.g2sig
        g0_unoff = (rho1 * np.nan_to_num(rec.g0_full) * rec.z1 ** -a1
                    if scheme.fidelity == "full" else rec.g0term)
        denom = np.where(
            is_macro,
            rec.i1_rest + rec.i2_rest + rec.g2term,
            np.where(
                is_unoff,
                rec.i1_rest + g0_unoff + rec.i2_rest,
                rec.i2_rest,  # macros are silent in the offloaded sub-slot
            ),
        )
        signal = np.where(is_macro, sig_macro * sig1_dist, sig_pico * sig2_dist)
        share = np.where(is_off, scheme.abs_fraction, 1.0 - scheme.abs_fraction)
        loads = rec.load_class

    sir = signal / denom
    rates = share * cfg.bandwidth / loads * np.log2(1.0 + sir)
    return rates, code.copy(), selected


def wilson_interval(successes: np.ndarray, n: int, z: float = 1.959963984540054,
                    ) -> Tuple[np.ndarray, np.ndarray]:
    """95% Wilson score interval for a binomial proportion."""
    if n == 0:
        shape = np.shape(successes)
        return np.zeros(shape), np.ones(shape)
    p = np.asarray(successes, dtype=float) / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom
    return np.clip(center - half, 0.0, 1.0), np.clip(center + half, 0.0, 1.0)


@dataclass
class ClassCoverage:
    coverage: np.ndarray  # conditional coverage per threshold
    count: int            # trials that landed in this class
    weight: float         # empirical class probability


@dataclass
class CoverageReport:
    """Empirical rate coverage over a threshold grid with 95% intervals."""

    tau: np.ndarray
    coverage: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    per_class: Dict[str, ClassCoverage]
    trials: int
    seed: object
    scheme: SchemeSpec
    guard_fraction: float
    metadata: Dict[str, object] = field(default_factory=dict)


def _coverage_curve(rates: np.ndarray, tau: np.ndarray) -> np.ndarray:
    if rates.size == 0:
        return np.full(tau.shape, np.nan)
    ordered = np.sort(rates)
    return 1.0 - np.searchsorted(ordered, tau, side="right") / rates.size


def coverage_report(rec: TrialRecords, scheme: SchemeSpec, cfg: NetworkConfig,
                    tau_grid: Sequence[float]) -> CoverageReport:
    """Evaluate one scheme on captured records over a threshold grid."""
    tau = np.asarray(tau_grid, dtype=float)
    rates, code, selected = records_rates(rec, scheme, cfg)
    n = rates.size
    cov = _coverage_curve(rates, tau)
    lo, hi = wilson_interval(cov * n, n)
    masks = {
        "macro": code == 0,
        "pico_unoffloaded": code == 1,
        "offloaded": code == 2,
    }
    if scheme.variant == "nulling":
        masks["offloaded_in"] = (code == 2) & selected
        masks["offloaded_non_in"] = (code == 2) & ~selected
    per_class = {
        name: ClassCoverage(
            coverage=_coverage_curve(rates[m], tau),
            count=int(m.sum()),
            weight=float(m.mean()) if n else 0.0,
        )
        for name, m in masks.items()
    }
    return CoverageReport(
        tau=tau, coverage=cov, ci_low=lo, ci_high=hi, per_class=per_class,
        trials=n, seed=rec.seed, scheme=scheme,
        guard_fraction=rec.guard_fraction,
    )


def estimate_rate_coverage(cfg: NetworkConfig, scheme: SchemeSpec,
                           tau_grid: Sequence[float], trials: int, seed,
                           window_radius: Optional[float] = None,
                           user_window_radius: Optional[float] = None,
                           dump_path: Optional[str] = None) -> CoverageReport:
    """End-to-end Monte Carlo rate coverage of one scheme.

    Raises InsufficientWindowError when more than 1% of trials have their
    3rd-nearest macro beyond half the window (edge effects would no
    longer be negligible).  ``dump_path`` writes one line per trial:
    trial index, class label, serving-BS load, SIR, rate.
    """
    window = default_window_radius(cfg) if window_radius is None else float(window_radius)
    rec = simulate_records(
        cfg, trials, seed, bias_values=[cfg.bias], window_radius=window,
        user_window_radius=user_window_radius,
        full_scheme=scheme if scheme.fidelity == "full" else None,
    )[0]
    if rec.guard_fraction > _GUARD_LIMIT:
        raise InsufficientWindowError(
            f"{100 * rec.guard_fraction:.1f}% of trials have the 3rd-nearest "
            f"macro beyond half the window ({window:.0f} m); enlarge it"
        )
    report = coverage_report(rec, scheme, cfg, tau_grid)
    report.metadata.update(
        window_radius=window,
        user_window_radius=(default_user_window(cfg, window)
                            if user_window_radius is None else user_window_radius),
    )
    if dump_path is not None:
        rates, code, _ = records_rates(rec, scheme, cfg)
        share = (np.where(code == 2, scheme.abs_fraction, 1.0 - scheme.abs_fraction)
                 if scheme.variant == "blank_subframes" else np.ones_like(rates))
        loads = rec.load_class if scheme.variant == "blank_subframes" else rec.load_total
        sir = np.expm1(rates * loads / (share * cfg.bandwidth) * math.log(2.0))
        with open(dump_path, "w", encoding="utf-8") as fh:
            fh.write("# trial class load sir rate_bps\n")
            for i in range(rates.size):
                fh.write(
                    f"{i} {CLASS_NAMES[code[i]]} {loads[i]} "
                    f"{sir[i]:.10g} {rates[i]:.10g}\n"
                )
    return report


# ---------------------------------------------------------------------------
# Light-weight class-frequency sampler
# ---------------------------------------------------------------------------

def class_frequencies(cfg: NetworkConfig, draws: int, seed) -> Dict[str, float]:
    """Empirical class probabilities of the typical user from fresh BS
    deployments (only nearest-BS distances matter, so each draw samples
    both tiers in a provably sufficient disk)."""
    rng = np.random.default_rng(seed)
    counts = np.zeros(3, dtype=np.int64)
    chunk = 20_000
    remaining = draws
    while remaining > 0:
        b = min(chunk, remaining)
        z1 = _nearest_distance_batch(rng, cfg.macro.density, b)
        z2 = _nearest_distance_batch(rng, cfg.pico.density, b)
        pw1 = cfg.macro.power * z1 ** -cfg.macro.pathloss
        pw2 = cfg.pico.power * z2 ** -cfg.pico.pathloss
        codes = _classify(pw1, pw2, cfg.bias)
        counts += np.bincount(codes, minlength=3)
        remaining -= b
    return {name: counts[i] / draws for i, name in enumerate(CLASS_NAMES)}


def _nearest_distance_batch(rng: np.random.Generator, density: float,
                            draws: int) -> np.ndarray:
    """Distance to the nearest point of a PPP from the origin, by actually
    dropping points in a disk large enough that emptiness has probability
    ~1e-15 per draw."""
    radius = math.sqrt(math.log(1e15) / (math.pi * density))
    counts = rng.poisson(density * math.pi * radius * radius, size=draws)
    total = int(counts.sum())
    r = radius * np.sqrt(rng.random(total))
    out = np.full(draws, radius)
    stops = np.cumsum(counts)
    starts = stops - counts
    nonempty = counts > 0
    mins = np.minimum.reduceat(r, starts[nonempty]) if np.any(nonempty) else np.empty(0)
    out[nonempty] = mins
    return out
