"""Reflector-element allocation block: relax, ascend, round, repair.

Row n of the allocation matrix picks the LED whose light element n
redirects. The binary problem is relaxed to row-stochastic matrices, the
sum rate is increased by projected gradient ascent on the row simplices,
rows are rounded to their argmax column, and greedy single-row moves then
repair any rate-floor or sum-rate-target violation the rounding caused.
"""

from __future__ import annotations

import math

import numpy as np

from ..channel import GainBases, OrientationSet, gains_from_bases
from ..errors import Infeasible
from ..geometry import Scenario
from ..metrics import E_OVER_2PI, AllocationMatrix, PowerAllocation
from .options import SolverOptions

LOG2 = math.log(2.0)


class _AllocationProblem:
    """Rate as a function of the per-LED element counts (everything else fixed)."""

    def __init__(self, s: Scenario, bases: GainBases, P: PowerAllocation, lam: OrientationSet):
        H, g0 = gains_from_bases(bases, lam, s)
        A = np.asarray(s.led_user_assignment, dtype=float)
        p = P.per_led_watts
        self.L = s.num_leds
        self.N = s.oirs_element_count
        self.delta2 = s.pd_sensitivity**2
        self.los_signal = ((A * H) * p[:, None]).sum(axis=0)  # (K,)
        self.unit_gain = (A * g0) * p[:, None]  # (L, K): per allocated element
        cross = H.T @ (A * p[:, None])  # (K, K)
        interf = (cross**2).sum(axis=1) - np.diagonal(cross) ** 2
        self.denom = s.noise_power + self.delta2 * interf  # (K,)
        self.r_min = s.r_min

    def rates(self, counts: np.ndarray) -> np.ndarray:
        signal = self.los_signal + self.unit_gain.T @ counts
        z = E_OVER_2PI * self.delta2 * signal**2 / self.denom
        return 0.5 * np.log2(1.0 + z)

    def r_tot(self, counts: np.ndarray) -> float:
        return float(self.rates(counts).sum())

    def count_gradient(self, counts: np.ndarray) -> np.ndarray:
        """d(sum rate)/d(count_l); shared by every row of the matrix."""
        signal = self.los_signal + self.unit_gain.T @ counts
        z = E_OVER_2PI * self.delta2 * signal**2 / self.denom
        dr_ds = E_OVER_2PI * self.delta2 * signal / self.denom / ((1.0 + z) * LOG2)
        return self.unit_gain @ dr_ds  # (L,)


def _project_rows_to_simplex(b: np.ndarray) -> np.ndarray:
    """Euclidean projection of every row onto the probability simplex."""
    n, l = b.shape
    sorted_b = np.sort(b, axis=1)[:, ::-1]
    cssum = np.cumsum(sorted_b, axis=1) - 1.0
    idx = np.arange(1, l + 1)
    cond = sorted_b - cssum / idx > 0
    rho = l - np.argmax(cond[:, ::-1], axis=1) - 1
    rho = np.where(cond.any(axis=1), rho, 0)
    theta = cssum[np.arange(n), rho] / (rho + 1.0)
    return np.maximum(b - theta[:, None], 0.0)


def _feasible(prob: _AllocationProblem, counts: np.ndarray, epsilon: float, tol: float = 1e-9) -> bool:
    rates = prob.rates(counts)
    return bool(np.all(rates >= prob.r_min - tol) and rates.sum() >= epsilon - tol)


def solve_allocation(
    s: Scenario,
    bases: GainBases,
    P: PowerAllocation,
    lam: OrientationSet,
    epsilon: float,
    opts: SolverOptions,
    b_start: AllocationMatrix,
    require_feasible: bool = True,
    best_effort: bool = False,
) -> AllocationMatrix:
    prob = _AllocationProblem(s, bases, P, lam)
    b = np.asarray(b_start.b, dtype=float).copy()
    counts = b.sum(axis=0)
    obj = prob.r_tot(counts)

    # relaxed phase: monotone projected-gradient ascent on the row simplices
    for _ in range(200):
        grad_counts = prob.count_gradient(counts)
        grad_rows = np.broadcast_to(grad_counts, b.shape)
        scale = float(np.abs(grad_counts).max())
        if scale == 0.0:
            break
        step = 1.0 / scale
        improved = False
        for _ in range(40):
            b_try = _project_rows_to_simplex(b + step * grad_rows)
            obj_try = prob.r_tot(b_try.sum(axis=0))
            if obj_try > obj:
                improved = True
                break
            step *= 0.5
        if not improved:
            break
        movement = float(np.linalg.norm(b_try - b))
        b, obj, counts = b_try, obj_try, b_try.sum(axis=0)
        if movement <= 1e-10:
            break

    # rounding: each element goes to its strongest column (lowest index on ties)
    binary = np.zeros_like(b)
    binary[np.arange(b.shape[0]), b.argmax(axis=1)] = 1.0
    counts = binary.sum(axis=0)

    if require_feasible and not _feasible(prob, counts, epsilon):
        _greedy_repair(prob, binary, epsilon)
        counts = binary.sum(axis=0)

    if require_feasible and not _feasible(prob, counts, epsilon):
        start_counts = b_start.b.sum(axis=0)
        if b_start.is_binary() and _feasible(prob, start_counts, epsilon):
            return b_start
        if best_effort:
            if b_start.is_binary() and prob.r_tot(start_counts) > prob.r_tot(counts):
                return b_start
            return AllocationMatrix(binary)
        raise Infeasible("allocation block: no binary assignment meets the rate constraints")

    # never hand back a worse assignment than the incoming one
    if b_start.is_binary():
        start_counts = b_start.b.sum(axis=0)
        start_ok = (not require_feasible) or _feasible(prob, start_counts, epsilon)
        if start_ok and prob.r_tot(counts) < prob.r_tot(start_counts):
            return b_start
    return AllocationMatrix(binary)


def _greedy_repair(prob: _AllocationProblem, binary: np.ndarray, epsilon: float) -> None:
    """Single-row reassignments toward the most violated constraint, in place."""
    n_rows = binary.shape[0]
    for _ in range(n_rows):
        counts = binary.sum(axis=0)
        rates = prob.rates(counts)
        qos_gap = prob.r_min - rates
        worst = int(np.argmax(qos_gap))
        if qos_gap[worst] <= 1e-9:
            if rates.sum() >= epsilon - 1e-9:
                return
            target_user = None  # sum-rate violation: move whatever helps R_tot most
        else:
            target_user = worst

        best_move, best_gain = None, 0.0
        for n in range(n_rows):
            cur = int(binary[n].argmax())
            for dest in range(binary.shape[1]):
                if dest == cur:
                    continue
                trial = counts.copy()
                trial[cur] -= 1
                trial[dest] += 1
                if target_user is None:
                    gain = prob.r_tot(trial) - rates.sum()
                else:
                    gain = prob.rates(trial)[target_user] - rates[target_user]
                if gain > best_gain + 1e-15:
                    best_gain, best_move = gain, (n, cur, dest)
        if best_move is None:
            return
        n, cur, dest = best_move
        binary[n, cur] = 0.0
        binary[n, dest] = 1.0


def improve_allocation_rate(
    s: Scenario,
    bases: GainBases,
    P: PowerAllocation,
    lam: OrientationSet,
    opts: SolverOptions,
    b_start: AllocationMatrix,
) -> AllocationMatrix:
    """Pure sum-rate ascent used by the rate-maximization phase: relaxed
    ascent plus hill-climbing single-row moves, never worse than the start."""
    candidate = solve_allocation(s, bases, P, lam, -np.inf, opts, b_start, require_feasible=False)
    prob = _AllocationProblem(s, bases, P, lam)
    binary = candidate.b.copy()
    for _ in range(4 * binary.shape[0]):
        counts = binary.sum(axis=0)
        base_rate = prob.r_tot(counts)
        best_move, best_val = None, base_rate
        for cur in range(prob.L):
            if counts[cur] == 0:
                continue
            for dest in range(prob.L):
                if dest == cur:
                    continue
                trial = counts.copy()
                trial[cur] -= 1
                trial[dest] += 1
                val = prob.r_tot(trial)
                if val > best_val + 1e-12:
                    best_val, best_move = val, (cur, dest)
        if best_move is None:
            break
        cur, dest = best_move
        row = int(np.argmax(binary[:, cur]))  # lowest-index row currently on cur
        binary[row, cur] = 0.0
        binary[row, dest] = 1.0
    if prob.r_tot(binary.sum(axis=0)) < prob.r_tot(b_start.b.sum(axis=0)):
        return b_start
    return AllocationMatrix(binary)
