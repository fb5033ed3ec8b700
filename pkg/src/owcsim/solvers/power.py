"""Transmit-power block: iterated concave lower-bounding of the rate.

The nonconcave rate ln(1+z) is replaced by its tight lower bound
v*ln(z) + u around the current operating point, the powers are transformed
to log-domain variables, and the resulting smooth subproblem (minimize the
total transmit power subject to the surrogate sum-rate target, per-user
floors, and the power cap) is solved with SLSQP. Because the surrogate is
tight at the expansion point and a lower bound elsewhere, a feasible start
keeps every SCA iterate feasible for the true constraints and the total
power non-increasing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from ..channel import GainBases, OrientationSet, gains_from_bases
from ..errors import Infeasible
from ..geometry import Scenario
from ..metrics import E_OVER_2PI, AllocationMatrix, PowerAllocation
from .options import SolverOptions

LOG2 = math.log(2.0)
P_FLOOR = 1e-9  # W, keeps log-domain variables bounded
TRUE_CONSTRAINT_TOL = 1e-6


@dataclass(frozen=True)
class ScaConstants:
    """Per-user linearization constants of the concave rate bound."""

    v: np.ndarray
    u: np.ndarray
    z_hat: np.ndarray


def sca_constants(z_hat) -> ScaConstants:
    """Slope/intercept making v*ln(z) + u tangent to ln(1+z) at z_hat.

    The limit convention v = u = 0 applies at z_hat = 0.
    """
    z = np.atleast_1d(np.asarray(z_hat, dtype=float))
    v = np.where(z > 0, z / (1.0 + z), 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(z > 0, np.log1p(z) - v * np.log(z), 0.0)
    return ScaConstants(v=v, u=u, z_hat=z)


class _PowerProblem:
    """Fixed-channel quantities for one power solve."""

    def __init__(self, s: Scenario, bases: GainBases, B: AllocationMatrix, lam: OrientationSet):
        H, g0 = gains_from_bases(bases, lam, s)
        counts = B.led_element_counts
        comp = H + counts[:, None] * g0
        self.A = np.asarray(s.led_user_assignment, dtype=float)
        self.H = H
        self.sig_gain = self.A * comp  # (L, K): S_k = sum_l sig_gain[l,k] * p_l
        self.delta2 = s.pd_sensitivity**2
        self.sigma2 = s.noise_power
        self.p_max = s.p_max_watt
        self.r_min = s.r_min
        self.K = s.num_users
        self.L = s.num_leds
        # cross_gain[k, i, l] = A[l, i] * H[l, k]: interference structure
        self.cross_gain = np.einsum("li,lk->kil", self.A, H)

    def effective_sinr(self, p: np.ndarray) -> np.ndarray:
        """z_k = (e/2pi) * SINR_k at power vector p."""
        signal = self.sig_gain.T @ p
        cross = np.einsum("kil,l->ki", self.cross_gain, p)
        interf = (cross**2).sum(axis=1) - np.diagonal(cross) ** 2
        return E_OVER_2PI * self.delta2 * signal**2 / (self.sigma2 + self.delta2 * interf)

    def true_rates(self, p: np.ndarray) -> np.ndarray:
        return 0.5 * np.log2(1.0 + self.effective_sinr(p))

    def log_z_and_grad(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """ln z_k and its Jacobian in the log-power variables x = ln p."""
        ep = np.exp(x)
        signal = self.sig_gain.T @ ep  # (K,)
        cross = np.einsum("kil,l->ki", self.cross_gain, ep)  # (K, K)
        denom_int = (cross**2).sum(axis=1) - np.diagonal(cross) ** 2
        D = self.sigma2 + self.delta2 * denom_int
        with np.errstate(divide="ignore"):
            log_z = (
                math.log(E_OVER_2PI * self.delta2) + 2.0 * np.log(signal) - np.log(D)
            )
        # dS_k/dx_l and dD_k/dx_l
        dS = self.sig_gain.T * ep[None, :]  # (K, L)
        cross_masked = cross.copy()
        np.fill_diagonal(cross_masked, 0.0)
        dD = 2.0 * self.delta2 * np.einsum("ki,kil->kl", cross_masked, self.cross_gain) * ep[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            jac = 2.0 * dS / signal[:, None] - dD / D[:, None]
        jac = np.where(np.isfinite(jac), jac, 0.0)
        return log_z, jac


def _solve_surrogate(
    prob: _PowerProblem, const: ScaConstants, epsilon: float, x0: np.ndarray
) -> np.ndarray | None:
    """One convex log-domain subproblem; returns log-powers or None."""
    v = const.v
    served = prob.sig_gain.sum(axis=0) > 0
    if np.any(~served) and prob.r_min > 0:
        return None  # a user with no usable gain can never meet its floor

    def surrogate_rates(x):
        log_z, _ = prob.log_z_and_grad(x)
        vals = np.where(served, (v * np.where(served, log_z, 0.0) + const.u) / (2 * LOG2), 0.0)
        return vals

    def surrogate_jac(x):
        _, jac = prob.log_z_and_grad(x)
        return v[:, None] * jac / (2 * LOG2)

    cons = [
        {
            "type": "ineq",
            "fun": lambda x: surrogate_rates(x).sum() - epsilon,
            "jac": lambda x: surrogate_jac(x).sum(axis=0),
        },
        {
            "type": "ineq",
            "fun": lambda x: surrogate_rates(x) - prob.r_min,
            "jac": surrogate_jac,
        },
        {
            "type": "ineq",
            "fun": lambda x: prob.p_max - np.exp(x).sum(),
            "jac": lambda x: -np.exp(x),
        },
    ]

    def surrogate_violation(x):
        r = surrogate_rates(x)
        return max(
            0.0,
            epsilon - float(r.sum()),
            float(np.max(prob.r_min - r)),
            float(np.exp(x).sum() - prob.p_max),
        )

    res = minimize(
        lambda x: np.exp(x).sum(),
        x0,
        jac=lambda x: np.exp(x),
        bounds=[(math.log(P_FLOOR), math.log(prob.p_max))] * prob.L,
        constraints=cons,
        method="SLSQP",
        options={"ftol": 1e-12, "maxiter": 300},
    )
    if res.success:
        return res.x
    # SLSQP routinely stalls ("positive directional derivative") while its
    # iterate is already feasible; keep such iterates when they do not cost
    # more power than the expansion point
    if surrogate_violation(res.x) <= 1e-9 and np.exp(res.x).sum() <= np.exp(x0).sum() + 1e-12:
        return res.x
    # the expansion point itself is surrogate-feasible whenever the current
    # power vector satisfies the true constraints (the bound is tight there)
    if surrogate_violation(x0) <= 1e-9:
        return x0
    return None


def _true_feasible(prob: _PowerProblem, p: np.ndarray, epsilon: float, tol: float) -> bool:
    rates = prob.true_rates(p)
    return bool(
        rates.sum() >= epsilon - tol
        and np.all(rates >= prob.r_min - tol)
        and p.sum() <= prob.p_max + tol
    )


def solve_power(
    s: Scenario,
    bases: GainBases,
    B: AllocationMatrix,
    lam: OrientationSet,
    epsilon: float,
    opts: SolverOptions,
    p_start: np.ndarray | None = None,
    best_effort: bool = False,
) -> PowerAllocation:
    """Minimum-total-power allocation meeting the sum-rate target and QoS.

    Runs the SCA loop from the supplied start, falling back to a ladder of
    uniform starts if a start fails to produce a feasible solution. With
    best_effort, an unattainable target returns the full uniform budget
    (maximum rate headroom for the other blocks) instead of raising.
    """
    prob = _PowerProblem(s, bases, B, lam)
    uniform = prob.p_max / prob.L
    starts = []
    if p_start is not None:
        starts.append(np.clip(np.asarray(p_start, dtype=float), P_FLOOR, prob.p_max))
    starts += [np.full(prob.L, uniform), np.full(prob.L, uniform / 10.0), np.full(prob.L, uniform / 1000.0)]

    last_error = "no start converged"
    for p0 in starts:
        p = p0.copy()
        solved = None
        for _ in range(opts.max_inner_iters):
            z = prob.effective_sinr(p)
            const = sca_constants(z)
            x = _solve_surrogate(prob, const, epsilon, np.log(np.clip(p, P_FLOOR, None)))
            if x is None:
                solved = None
                break
            p_new = np.exp(x)
            step = float(np.linalg.norm(p_new - p))
            p = p_new
            solved = p
            if step <= opts.inner_tolerance:
                break
        if solved is None:
            last_error = "surrogate subproblem infeasible"
            continue
        if _true_feasible(prob, solved, epsilon, TRUE_CONSTRAINT_TOL):
            return PowerAllocation(solved)
        last_error = "converged point violates the true constraints"
    if best_effort:
        return PowerAllocation(np.full(prob.L, uniform))
    raise Infeasible(
        f"power block: rate target {epsilon:.6g} with per-user floor {prob.r_min:.6g} "
        f"is unattainable under the {prob.p_max:.6g} W cap ({last_error})"
    )
