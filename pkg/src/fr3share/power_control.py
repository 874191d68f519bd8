"""QoS-aware downlink power control for one scheduled link.

Powers are in dBm, gains in dB. The selected power maximizes the sigmoid
utility W (1 - exp(-alpha SINR))^M / P over the powers that keep the rate
above epsilon * R(P_max), every satellite INR at or below the cap, and
P within [P_min, P_max].
"""
import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleLink, InvalidArgument

BOLTZMANN = 1.380649e-23  # J/K
INR_FLOOR_DB = -300.0
GOLDEN_TOL_DB = 0.01
BOUND_TOL_DB = 1e-9

BINDING = ("utility_peak", "rate_floor", "inr_cap", "p_min", "p_max")


@dataclass(frozen=True)
class PowerControlContext:
    bandwidth: float = 30e6  # Hz
    interference_dbm: float = -73.0  # interference plus noise at the UE
    alpha: float = 1e-3
    m_exp: float = 3.0
    epsilon: float = 0.85
    inr_max_db: float = -6.0
    p_min_dbm: float = 10.0
    p_max_dbm: float = 33.0
    g_over_t_db: float = 13.0  # dB/K
    atm_loss_db: float = 0.0

    def __post_init__(self):
        if not self.p_min_dbm < self.p_max_dbm:
            raise InvalidArgument("p_min must be below p_max")
        if not 0.0 < self.epsilon <= 1.0:
            raise InvalidArgument(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if not self.bandwidth > 0:
            raise InvalidArgument("bandwidth must be positive")
        if not self.alpha > 0:
            raise InvalidArgument("alpha must be positive")
        if not self.m_exp >= 1:
            raise InvalidArgument("M must be at least 1")

    @property
    def noise_dbm_per_k(self):
        """10 log10(k_B W) with k_B W expressed in mW/K."""
        return 10.0 * math.log10(BOLTZMANN * self.bandwidth) + 30.0


@dataclass
class PowerDecision:
    p_opt: float  # dBm
    utility_at_opt: float  # bit/s per mW
    rate_at_opt: float  # bit/s
    inr_per_satellite: list = field(default_factory=list)  # dB
    binding_constraint: str = "utility_peak"
    p_rate: float = -math.inf  # closed-form bounds, dBm
    p_inr: float = math.inf
    infeasible: bool = False


def sinr(p, gain_db, ctx):
    return 10.0 ** ((np.asarray(p, dtype=float) + gain_db - ctx.interference_dbm) / 10.0)


def rate(p, gain_db, ctx):
    return ctx.bandwidth * np.log2(1.0 + sinr(p, gain_db, ctx))


def utility(p, gain_db, ctx):
    p = np.asarray(p, dtype=float)
    x = ctx.alpha * sinr(p, gain_db, ctx)
    return ctx.bandwidth * (-np.expm1(-x)) ** ctx.m_exp / 10.0 ** (p / 10.0)


def leakage_db(w_t, h_sat):
    g = abs(complex((np.asarray(w_t).conj().T @ np.asarray(h_sat)).ravel()[0])) ** 2
    return 10.0 * math.log10(g) if g > 0 else -math.inf


def inr(p, w_t, h_sat, ctx):
    """Interference-to-noise ratio (dB) at one satellite, floored at -300 dB."""
    leak = leakage_db(w_t, h_sat)
    if leak == -math.inf:
        return INR_FLOOR_DB
    val = p + leak + ctx.g_over_t_db - ctx.atm_loss_db - ctx.noise_dbm_per_k
    return max(val, INR_FLOOR_DB)


def rate_floor_power(gain_db, ctx):
    """Smallest power (dBm) meeting R(P) >= epsilon R(P_max), closed form."""
    if ctx.epsilon == 1.0:
        return ctx.p_max_dbm
    r_min = ctx.epsilon * float(rate(ctx.p_max_dbm, gain_db, ctx))
    s_min = math.expm1(r_min / ctx.bandwidth * math.log(2.0))
    return 10.0 * math.log10(s_min) + ctx.interference_dbm - gain_db


def inr_cap_power(w_t, sat_channels, ctx):
    """Largest power (dBm) keeping the worst satellite INR at the cap."""
    worst = max((leakage_db(w_t, h) for h in sat_channels), default=-math.inf)
    if worst == -math.inf:
        return math.inf
    return ctx.inr_max_db - (worst + ctx.g_over_t_db - ctx.atm_loss_db - ctx.noise_dbm_per_k)


def utility_peak_power(gain_db, ctx):
    """Unconstrained maximizer of the utility (dBm)."""
    # d/dx (1 - e^-x)^M / x = 0  <=>  M x e^-x = 1 - e^-x
    lo, hi = 1e-6, 50.0 * ctx.m_exp
    f = lambda x: ctx.m_exp * x * math.exp(-x) + math.expm1(-x)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    x_star = 0.5 * (lo + hi)
    return 10.0 * math.log10(x_star / ctx.alpha) + ctx.interference_dbm - gain_db


def golden_section_max(f, a, b, tol=GOLDEN_TOL_DB):
    """Maximizer of a unimodal f on [a, b] to within tol."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def feasible_interval(gain_db, w_t, sat_channels, ctx):
    """(lower, upper, p_rate, p_inr) in dBm; empty when lower > upper."""
    p_rate = rate_floor_power(gain_db, ctx)
    if abs(p_rate - ctx.p_max_dbm) <= BOUND_TOL_DB:
        p_rate = ctx.p_max_dbm
    p_inr = inr_cap_power(w_t, sat_channels, ctx)
    return max(ctx.p_min_dbm, p_rate), min(ctx.p_max_dbm, p_inr), p_rate, p_inr


def solve_power(gain_db, w_t, sat_channels, ctx):
    """Utility-maximizing power under the rate floor, INR cap and power box.

    Raises InfeasibleLink when no power satisfies every constraint.
    """
    lo, hi, p_rate, p_inr = feasible_interval(gain_db, w_t, sat_channels, ctx)
    if lo > hi:
        raise InfeasibleLink(lo, hi)

    u = lambda p: float(utility(p, gain_db, ctx))
    p = golden_section_max(u, lo, hi) if hi > lo else lo
    if p - lo <= GOLDEN_TOL_DB:
        p = lo
    elif hi - p <= GOLDEN_TOL_DB:
        p = hi

    if p == lo:
        binding = "rate_floor" if lo == p_rate else "p_min"
    elif p == hi:
        binding = "inr_cap" if hi == p_inr else "p_max"
    else:
        binding = "utility_peak"
    return decision_at(p, gain_db, w_t, sat_channels, ctx, binding, p_rate, p_inr)


def decision_at(p, gain_db, w_t, sat_channels, ctx, binding, p_rate=-math.inf,
                p_inr=math.inf, infeasible=False):
    return PowerDecision(
        p_opt=p,
        utility_at_opt=float(utility(p, gain_db, ctx)),
        rate_at_opt=float(rate(p, gain_db, ctx)),
        inr_per_satellite=[inr(p, w_t, h, ctx) for h in sat_channels],
        binding_constraint=binding,
        p_rate=p_rate,
        p_inr=p_inr,
        infeasible=infeasible,
    )


def utility_curve(gain_db, w_t, sat_channels, ctx, p_grid=None):
    """Rows of (p_dbm, utility, feasible) over a power grid."""
    if p_grid is None:
        p_grid = np.round(np.arange(ctx.p_min_dbm, ctx.p_max_dbm + 1e-9, 0.1), 6)
    lo, hi, _, _ = feasible_interval(gain_db, w_t, sat_channels, ctx)
    u = utility(p_grid, gain_db, ctx)
    return [(float(p), float(v), bool(lo <= p <= hi)) for p, v in zip(p_grid, u)]


def write_utility_curves(path, curves):
    """curves: mapping slot -> rows from utility_curve."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["slot", "p_dbm", "utility", "feasible_flag"])
        for slot in sorted(curves):
            for p, v, ok in curves[slot]:
                w.writerow([slot, f"{p:.4f}", f"{v:.9e}", int(ok)])
