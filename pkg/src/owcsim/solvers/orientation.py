"""Receiver-orientation block: augmented Lagrangian over the tilt angles.

The merit combines the (constant-in-angle) transmit power with quadratic
penalties for the sum-rate target, the per-user rate floors, and the two
field-of-view limits. Multipliers follow the usual clipped ascent rule and
the penalty weight grows geometrically. The inner minimization is a
projected gradient descent on the box [0, pi/2]^(2K) with an analytic
gradient; a tilt of zero maximizes every gain, so the solver only moves
the angles when a constraint is active.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..channel import GainBases, OrientationSet, gains_from_bases
from ..errors import Infeasible
from ..geometry import Scenario
from ..metrics import E_OVER_2PI, AllocationMatrix, PowerAllocation
from .options import SolverOptions

LOG2 = math.log(2.0)
ZETA_CAP = 1e6
VIOLATION_TOL = 1e-6


@dataclass(frozen=True)
class MultiplierState:
    """Nonnegative multipliers and the penalty weight."""

    kappa: float  # sum-rate target
    rho: np.ndarray  # (K,) per-user rate floors
    omega_mul: np.ndarray  # (K,) direct-path FoV
    varpi: np.ndarray  # (K,) reflected-path FoV
    zeta: float

    @staticmethod
    def fresh(k: int, zeta: float) -> "MultiplierState":
        return MultiplierState(0.0, np.zeros(k), np.zeros(k), np.zeros(k), float(zeta))


@dataclass(frozen=True)
class OrientationContext:
    """Everything the orientation merit needs besides the angles."""

    scenario: Scenario
    bases: GainBases
    P: PowerAllocation
    B: AllocationMatrix
    epsilon: float

    def __post_init__(self):
        s = self.scenario
        A = np.asarray(s.led_user_assignment, dtype=float)
        p = self.P.per_led_watts
        counts = self.B.led_element_counts
        # angle-free pieces: signal = cos(omega)*sig_los + cos(phi)*sig_oirs,
        # interference row k scales with cos(omega_k)^2
        object.__setattr__(self, "_sig_los", ((A * self.bases.los) * p[:, None]).sum(axis=0))
        object.__setattr__(
            self, "_sig_oirs", ((A * (counts[:, None] * self.bases.oirs)) * p[:, None]).sum(axis=0)
        )
        cross = self.bases.los.T @ (A * p[:, None])  # (K, K)
        q = (cross**2).sum(axis=1) - np.diagonal(cross) ** 2
        object.__setattr__(self, "_interf_base", q)

    def rate_terms(self, lam: OrientationSet):
        s = self.scenario
        cos_om = np.where(lam.los_incidence <= s.fov_incidence, np.cos(lam.los_incidence), 0.0)
        cos_ph = np.where(lam.oirs_incidence <= s.fov_oirs, np.cos(lam.oirs_incidence), 0.0)
        signal = cos_om * self._sig_los + cos_ph * self._sig_oirs
        denom = s.noise_power + s.pd_sensitivity**2 * cos_om**2 * self._interf_base
        z = E_OVER_2PI * s.pd_sensitivity**2 * signal**2 / denom
        rates = 0.5 * np.log2(1.0 + z)
        return rates, signal, denom, z, cos_om, cos_ph

    def rates(self, lam: OrientationSet) -> np.ndarray:
        return self.rate_terms(lam)[0]


def orientation_objective(lam: OrientationSet, mult: MultiplierState, ctx: OrientationContext) -> float:
    s = ctx.scenario
    rates = ctx.rates(lam)
    r_tot = float(rates.sum())
    zeta = mult.zeta
    term_rate = (
        max(0.0, mult.kappa + zeta * (ctx.epsilon - r_tot)) ** 2 - mult.kappa**2
    ) / (2.0 * zeta)
    term_qos = np.maximum(0.0, mult.rho + zeta * (s.r_min - rates)) ** 2 - mult.rho**2
    term_fov_los = (
        np.maximum(0.0, mult.omega_mul + zeta * (lam.los_incidence - s.fov_incidence)) ** 2
        - mult.omega_mul**2
    )
    term_fov_oirs = (
        np.maximum(0.0, mult.varpi + zeta * (lam.oirs_incidence - s.fov_oirs)) ** 2
        - mult.varpi**2
    )
    return float(ctx.P.total + term_rate + term_qos.sum() + term_fov_los.sum() + term_fov_oirs.sum())


def _rate_gradients(ctx: OrientationContext, lam: OrientationSet):
    """dR_k/d(omega_k), dR_k/d(phi_k); user k's rate depends only on its
    own two angles. Flat (zero) outside the FoV gate."""
    s = ctx.scenario
    rates, signal, denom, z, cos_om, cos_ph = ctx.rate_terms(lam)
    pref = E_OVER_2PI * s.pd_sensitivity**2 / ((1.0 + z) * LOG2) * 0.5
    sin_om = np.sin(lam.los_incidence)
    sin_ph = np.sin(lam.oirs_incidence)
    inside_om = lam.los_incidence <= s.fov_incidence
    inside_ph = lam.oirs_incidence <= s.fov_oirs
    dS_dom = np.where(inside_om, -sin_om * ctx._sig_los, 0.0)
    dS_dph = np.where(inside_ph, -sin_ph * ctx._sig_oirs, 0.0)
    dD_dom = np.where(
        inside_om, -2.0 * s.pd_sensitivity**2 * ctx._interf_base * cos_om * sin_om, 0.0
    )
    dR_dom = pref * (2.0 * signal * dS_dom * denom - signal**2 * dD_dom) / denom**2
    dR_dph = pref * 2.0 * signal * dS_dph / denom
    return rates, dR_dom, dR_dph


def orientation_gradient(
    lam: OrientationSet, mult: MultiplierState, ctx: OrientationContext
) -> np.ndarray:
    """Analytic gradient of the merit in the stacked angle vector."""
    s = ctx.scenario
    zeta = mult.zeta
    rates, dR_dom, dR_dph = _rate_gradients(ctx, lam)
    r_tot = float(rates.sum())
    act_rate = max(0.0, mult.kappa + zeta * (ctx.epsilon - r_tot))
    act_qos = np.maximum(0.0, mult.rho + zeta * (s.r_min - rates))
    act_f_om = np.maximum(0.0, mult.omega_mul + zeta * (lam.los_incidence - s.fov_incidence))
    act_f_ph = np.maximum(0.0, mult.varpi + zeta * (lam.oirs_incidence - s.fov_oirs))
    g_om = -act_rate * dR_dom - 2.0 * zeta * act_qos * dR_dom + 2.0 * zeta * act_f_om
    g_ph = -act_rate * dR_dph - 2.0 * zeta * act_qos * dR_dph + 2.0 * zeta * act_f_ph
    return np.concatenate([g_om, g_ph])


def update_multipliers(
    mult: MultiplierState, lam: OrientationSet, ctx: OrientationContext
) -> MultiplierState:
    """Clipped ascent on every multiplier at the current angles."""
    s = ctx.scenario
    rates = ctx.rates(lam)
    zeta = mult.zeta
    return MultiplierState(
        kappa=max(0.0, mult.kappa + zeta * (ctx.epsilon - float(rates.sum()))),
        rho=np.maximum(0.0, mult.rho + zeta * (s.r_min - rates)),
        omega_mul=np.maximum(0.0, mult.omega_mul + zeta * (lam.los_incidence - s.fov_incidence)),
        varpi=np.maximum(0.0, mult.varpi + zeta * (lam.oirs_incidence - s.fov_oirs)),
        zeta=zeta,
    )


def constraint_violation(lam: OrientationSet, ctx: OrientationContext) -> float:
    s = ctx.scenario
    rates = ctx.rates(lam)
    return float(
        max(
            0.0,
            ctx.epsilon - float(rates.sum()),
            float(np.max(s.r_min - rates)),
            float(np.max(lam.los_incidence - s.fov_incidence)),
            float(np.max(lam.oirs_incidence - s.fov_oirs)),
        )
    )


def _descend(
    f, grad, x0: np.ndarray, lo: float, hi: float, max_steps: int = 200
) -> np.ndarray:
    """Monotone projected gradient descent on a box."""
    x = np.clip(x0, lo, hi)
    fx = f(x)
    for _ in range(max_steps):
        g = grad(x)
        gnorm = float(np.abs(g).max())
        if gnorm < 1e-12:
            break
        step = 0.25 / gnorm
        moved = False
        for _ in range(40):
            x_try = np.clip(x - step * g, lo, hi)
            f_try = f(x_try)
            if f_try < fx - 1e-15:
                moved = True
                break
            step *= 0.5
        if not moved:
            break
        delta = float(np.linalg.norm(x_try - x))
        x, fx = x_try, f_try
        if delta <= 1e-10:
            break
    return x


def solve_orientation(
    s: Scenario,
    bases: GainBases,
    P: PowerAllocation,
    B: AllocationMatrix,
    epsilon: float,
    opts: SolverOptions,
    lam_start: OrientationSet,
    best_effort: bool = False,
) -> OrientationSet:
    """Angles satisfying the FoV/rate constraints, found by the augmented
    Lagrangian outer loop; falls back to the incoming angles when they are
    already feasible and no better feasible point is found."""
    ctx = OrientationContext(s, bases, P, B, epsilon)
    mult = MultiplierState.fresh(s.num_users, opts.zeta_initial)
    lam = lam_start
    start_viol = constraint_violation(lam_start, ctx)

    for _ in range(30):
        vec = _descend(
            lambda x: orientation_objective(OrientationSet.from_vector(x), mult, ctx),
            lambda x: orientation_gradient(OrientationSet.from_vector(x), mult, ctx),
            lam.as_vector(),
            0.0,
            math.pi / 2.0,
        )
        lam = OrientationSet.from_vector(vec)
        if constraint_violation(lam, ctx) <= VIOLATION_TOL:
            return lam
        mult = update_multipliers(mult, lam, ctx)
        mult = replace(mult, zeta=min(mult.zeta * opts.zeta_growth, ZETA_CAP))

    if start_viol <= VIOLATION_TOL:
        return lam_start
    if best_effort:
        # hand back whichever angles violate less (ties: the new ones, which
        # the multiplier loop pushed toward feasibility)
        return lam if constraint_violation(lam, ctx) <= start_viol else lam_start
    raise Infeasible("orientation block: constraints remain violated after the multiplier loop")


def maximize_orientation_rate(
    s: Scenario,
    bases: GainBases,
    P: PowerAllocation,
    B: AllocationMatrix,
    opts: SolverOptions,
    lam_start: OrientationSet,
) -> OrientationSet:
    """Sum-rate ascent over the in-FoV box, used by the rate-maximization
    phase. Gains are cosine-shaped, so zero tilt is the usual optimum."""
    ctx = OrientationContext(s, bases, P, B, epsilon=0.0)
    k = s.num_users
    hi = np.concatenate([np.full(k, min(s.fov_incidence, math.pi / 2)), np.full(k, min(s.fov_oirs, math.pi / 2))])

    def neg_rate(x):
        return -float(ctx.rates(OrientationSet.from_vector(x)).sum())

    def neg_grad(x):
        _, d_om, d_ph = _rate_gradients(ctx, OrientationSet.from_vector(x))
        return -np.concatenate([d_om, d_ph])

    best_vec, best_val = None, np.inf
    starts = [lam_start.as_vector(), np.zeros(2 * k)]
    rng = np.random.default_rng(opts.rng_seed)
    for _ in range(max(0, opts.multistart_count - 1)):
        starts.append(rng.uniform(0.0, 1.0, size=2 * k) * hi)
    for x0 in starts:
        x = _descend(neg_rate, neg_grad, np.clip(x0, 0.0, hi), 0.0, hi)
        val = neg_rate(x)
        if val < best_val - 1e-15:
            best_val, best_vec = val, x
    if -best_val < float(ctx.rates(lam_start).sum()):
        return lam_start
    return OrientationSet.from_vector(best_vec)
