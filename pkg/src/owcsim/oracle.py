"""Brute-force reference solver for desk-size instances.

Exhaustively enumerates discretized powers, one-hot allocations, tilt
angles, and wall positions, evaluating the exact metrics for each
combination. The feasible combination with the smallest total transmit
power is the reference optimum that the continuous pipeline is checked
against. Enumeration order is fixed, and ties keep the earliest
combination, so results are reproducible and order-independent.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .channel import OrientationSet, compute_bases, gains_from_bases
from .errors import Infeasible, TooLarge
from .geometry import Scenario, WallPlane, plane_membership, project_to_plane
from .metrics import E_OVER_2PI, AllocationMatrix, PowerAllocation
from .orchestrator import SolutionState

SIZE_GUARD = 10_000_000


@dataclass(frozen=True)
class OracleGrids:
    power_levels: np.ndarray  # W, applied per LED
    angle_levels: np.ndarray  # radians, applied per tilt coordinate
    placement_points: np.ndarray  # (M, 3) wall points

    def __post_init__(self):
        if len(self.power_levels) == 0 or len(self.angle_levels) == 0 or len(self.placement_points) == 0:
            raise TooLarge("oracle grids must be nonempty")


def default_grids(s: Scenario, n_power: int, n_angle: int, n_placement: int) -> OracleGrids:
    """Deterministic grid builder: powers up to the per-LED budget, angles
    up to the field of view, placements spread over the four walls."""
    per_led = s.p_max_watt / s.num_leds
    powers = np.linspace(per_led / n_power, per_led, n_power)
    angles = np.linspace(0.0, min(s.fov_incidence, s.fov_oirs), n_angle)
    per_wall = max(1, n_placement // len(WallPlane))
    points = []
    for plane in WallPlane:
        (u_lo, u_hi), (v_lo, v_hi) = plane.free_ranges(s.room)
        v_mid = 0.5 * (v_lo + v_hi)
        fracs = [(i + 1) / (per_wall + 1) for i in range(per_wall)]
        for f in fracs:
            points.append(project_to_plane(u_lo + f * (u_hi - u_lo), v_mid, plane, s.room))
        if len(points) >= n_placement:
            break
    return OracleGrids(powers, angles, np.array(points[:n_placement]))


def enumeration_size(s: Scenario, grids: OracleGrids) -> float:
    lp = len(grids.power_levels) ** s.num_leds
    lb = s.num_leds**s.oirs_element_count
    la = len(grids.angle_levels) ** (2 * s.num_users)
    return float(lp) * float(lb) * float(la) * len(grids.placement_points)


@dataclass(frozen=True)
class OracleResult:
    state: SolutionState
    p_transmit: float
    r_tot: float
    rates: np.ndarray


def brute_force(s: Scenario, grids: OracleGrids, epsilon: float) -> OracleResult:
    """Minimum-total-power combination meeting the sum-rate target and the
    per-user floors, over the full discrete grid product."""
    size = enumeration_size(s, grids)
    if size > SIZE_GUARD:
        raise TooLarge(f"enumeration of {size:.3g} combinations exceeds the {SIZE_GUARD:.0e} guard")

    L, K, N = s.num_leds, s.num_users, s.oirs_element_count
    A = np.asarray(s.led_user_assignment, dtype=float)
    delta2 = s.pd_sensitivity**2

    for q in grids.placement_points:
        plane_membership(q, s.room)  # placement points must sit on a wall

    # all per-LED power combinations, shape (n_p^L, L)
    p_combos = np.array(list(itertools.product(grids.power_levels, repeat=L)))
    # all one-hot allocations, represented by their column counts
    b_combos = list(itertools.product(range(L), repeat=N))

    best = None  # (p_transmit, flat ordering index, state, r_tot, rates)
    combo_index = 0
    for q in grids.placement_points:
        bases = compute_bases(s, q)
        for lam_tuple in itertools.product(grids.angle_levels, repeat=2 * K):
            lam = OrientationSet(np.array(lam_tuple[:K]), np.array(lam_tuple[K:]))
            H, g0 = gains_from_bases(bases, lam, s)
            cross_unit = H.T[:, None, :] * A.T[None, :, :]  # (K, K, L)
            for cols in b_combos:
                counts = np.bincount(cols, minlength=L).astype(float)
                comp = H + counts[:, None] * g0
                sig_gain = (A * comp).T  # (K, L)
                signal = p_combos @ sig_gain.T  # (n_p, K)
                cross = np.einsum("pl,kil->pki", p_combos, cross_unit)
                interf = (cross**2).sum(axis=2) - cross[:, np.arange(K), np.arange(K)] ** 2
                z = E_OVER_2PI * delta2 * signal**2 / (s.noise_power + delta2 * interf)
                rates = 0.5 * np.log2(1.0 + z)  # (n_p, K)
                p_tot = p_combos.sum(axis=1)
                feasible = (
                    (rates >= s.r_min - 1e-12).all(axis=1)
                    & (rates.sum(axis=1) >= epsilon - 1e-12)
                    & (p_tot <= s.p_max_watt + 1e-12)
                )
                if not feasible.any():
                    combo_index += len(p_combos)
                    continue
                masked = np.where(feasible, p_tot, np.inf)
                pi = int(np.argmin(masked))  # earliest minimum: lexicographic tie-break
                cand = float(masked[pi])
                if best is None or cand < best[0] - 1e-15:
                    b = np.zeros((N, L))
                    b[np.arange(N), list(cols)] = 1.0
                    state = SolutionState(
                        PowerAllocation(p_combos[pi].copy()),
                        AllocationMatrix(b),
                        lam,
                        np.asarray(q, dtype=float),
                    )
                    best = (cand, combo_index + pi, state, float(rates[pi].sum()), rates[pi].copy())
                combo_index += len(p_combos)

    if best is None:
        raise Infeasible(
            f"oracle: no grid combination meets rate target {epsilon:.6g} "
            f"with per-user floor {s.r_min:.6g}"
        )
    return OracleResult(state=best[2], p_transmit=best[0], r_tot=best[3], rates=best[4])
