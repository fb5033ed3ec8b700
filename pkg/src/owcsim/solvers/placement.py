"""Reflector-placement block: wall-constrained grid search with refinement.

Each candidate wall is scanned on a uniform grid; the best point per wall
is polished by a few rounds of coordinate descent in the wall's two free
coordinates at a tenth of the grid pitch. Among feasible candidates the
highest sum rate wins; ties fall to the earlier wall and the earlier grid
point. The incoming position is kept whenever it already matches the best
candidate, so the surrounding block-coordinate loop never regresses.

Only the reflected path depends on the panel position, so the direct
signal and the interference terms are computed once and every grid sweep
is evaluated as a single vectorized batch.
"""

from __future__ import annotations

import math

import numpy as np

from ..channel import DISTANCE_FLOOR, OrientationSet, compute_bases, gains_from_bases, lambertian_order
from ..errors import Infeasible
from ..geometry import WALL_MARGIN, Scenario, WallPlane, project_to_plane
from ..metrics import E_OVER_2PI, AllocationMatrix, PowerAllocation
from .options import SolverOptions


class _PlacementProblem:
    def __init__(
        self,
        s: Scenario,
        P: PowerAllocation,
        B: AllocationMatrix,
        lam: OrientationSet,
        include_oirs: bool,
    ):
        self.s = s
        self.include_oirs = include_oirs
        A = np.asarray(s.led_user_assignment, dtype=float)
        bases_los = compute_bases(s, np.zeros(3), include_oirs=False)  # q unused for LoS
        H, _ = gains_from_bases(bases_los, lam, s)
        weighted = A * P.per_led_watts[:, None]  # (L, K)
        self.base_signal = (H * weighted).sum(axis=0)  # (K,)
        cross = H.T @ weighted
        self.interf = (cross**2).sum(axis=1) - np.diagonal(cross) ** 2  # (K,)
        counts = B.led_element_counts
        cos_phi = np.where(lam.oirs_incidence <= s.fov_oirs, np.cos(lam.oirs_incidence), 0.0)
        # per-unit reflected-gain weight: allocation count x serving power x tilt
        self.unit = weighted * counts[:, None] * cos_phi[None, :]  # (L, K)
        self.j = lambertian_order(s.semi_angle_half_power)
        self.oirs_const = (
            s.oirs_reflection_coeff
            * s.pd_area
            * (self.j + 1.0)
            / (2.0 * math.pi)
            * s.optical_filter_gain
            * s.concentrator_gain
        )
        self.delta2 = s.pd_sensitivity**2

    def batch_rates(self, qs: np.ndarray) -> np.ndarray:
        """Per-user rates for a batch of panel positions; shape (K, M)."""
        s = self.s
        m = qs.shape[0]
        signal = np.repeat(self.base_signal[:, None], m, axis=1)  # (K, M)
        if self.include_oirs:
            led = s.led_positions
            usr = s.user_positions
            d_in = np.linalg.norm(led[:, None, :] - qs[None, :, :], axis=2)  # (L, M)
            d_out = np.linalg.norm(usr[:, None, :] - qs[None, :, :], axis=2)  # (K, M)
            cos_theta = (led[:, 2:3] - qs[None, :, 2]) / np.maximum(d_in, 1e-300)
            total = d_in[:, None, :] + d_out[None, :, :]  # (L, K, M)
            base = (
                self.oirs_const
                / (total * total)
                * (np.clip(cos_theta, 0.0, 1.0) ** self.j)[:, None, :]
            )
            gate = (
                (cos_theta[:, None, :] > 0.0)
                & (d_in[:, None, :] >= DISTANCE_FLOOR)
                & (d_out[None, :, :] >= DISTANCE_FLOOR)
            )
            base = np.where(gate, base, 0.0)
            signal = signal + np.einsum("lk,lkm->km", self.unit, base)
        z = E_OVER_2PI * self.delta2 * signal**2 / (s.noise_power + self.delta2 * self.interf[:, None])
        return 0.5 * np.log2(1.0 + z)

    def batch_scores(self, qs: np.ndarray, require_qos: bool) -> tuple[np.ndarray, np.ndarray]:
        rates = self.batch_rates(np.asarray(qs, dtype=float))
        if require_qos:
            ok = np.all(rates >= self.s.r_min - 1e-9, axis=0)
        else:
            ok = np.ones(rates.shape[1], dtype=bool)
        return ok, rates.sum(axis=0)


def _axis_grid(lo: float, hi: float, pitch: float) -> np.ndarray:
    """Uniform pitch grid with endpoints pulled just inside the open range."""
    pts = np.arange(lo, hi + 0.5 * pitch, pitch)
    pts = pts[pts <= hi]
    pts[0] = lo + WALL_MARGIN
    if pts[-1] < hi - WALL_MARGIN:
        pts = np.append(pts, hi - WALL_MARGIN)
    else:
        pts[-1] = hi - WALL_MARGIN
    return pts


def _wall_points(plane: WallPlane, room, us: np.ndarray, vs: np.ndarray) -> np.ndarray:
    """3D points for in-plane coordinates; us and vs must be equal-length."""
    fixed = np.full(us.shape, plane.fixed_coordinate(room))
    if plane.axis == 0:
        return np.column_stack([fixed, us, vs])
    return np.column_stack([us, fixed, vs])


def solve_placement(
    s: Scenario,
    P: PowerAllocation,
    B: AllocationMatrix,
    lam: OrientationSet,
    epsilon: float,
    opts: SolverOptions,
    q_start: np.ndarray,
    include_oirs: bool = True,
    require_qos: bool = True,
    best_effort: bool = False,
) -> np.ndarray:
    del epsilon  # the sum-rate target is served by maximizing the sum rate
    prob = _PlacementProblem(s, P, B, lam, include_oirs)
    pitch = opts.grid_resolution_placement
    fine = pitch / 10.0

    best = None  # (r_tot, plane order, q)
    for order, plane in enumerate(WallPlane):
        (u_lo, u_hi), (v_lo, v_hi) = plane.free_ranges(s.room)
        us = _axis_grid(u_lo, u_hi, pitch)
        vs = _axis_grid(v_lo, v_hi, pitch)
        uu, vv = np.meshgrid(us, vs, indexing="ij")
        ok, r_tot = prob.batch_scores(_wall_points(plane, s.room, uu.ravel(), vv.ravel()), require_qos)
        if not ok.any():
            continue
        scores = np.where(ok, r_tot, -np.inf)
        idx = int(np.argmax(scores))  # first maximum: lowest grid index wins ties
        r_best = float(scores[idx])
        u, v = float(us[idx // vs.size]), float(vs[idx % vs.size])

        for _ in range(3):  # coordinate-descent refinement at pitch/10
            for axis in (0, 1):
                center, (lo, hi) = (u, (u_lo, u_hi)) if axis == 0 else (v, (v_lo, v_hi))
                cands = np.clip(
                    center + fine * np.arange(-10, 11), lo + WALL_MARGIN, hi - WALL_MARGIN
                )
                if axis == 0:
                    pts = _wall_points(plane, s.room, cands, np.full_like(cands, v))
                else:
                    pts = _wall_points(plane, s.room, np.full_like(cands, u), cands)
                ok_line, r_line = prob.batch_scores(pts, require_qos)
                line_scores = np.where(ok_line, r_line, -np.inf)
                j = int(np.argmax(line_scores))
                if line_scores[j] > r_best + 1e-12:
                    r_best = float(line_scores[j])
                    if axis == 0:
                        u = float(cands[j])
                    else:
                        v = float(cands[j])
        if best is None or r_best > best[0] + 1e-12:
            best = (r_best, order, project_to_plane(u, v, plane, s.room))

    q_start = np.asarray(q_start, dtype=float)
    ok_start, r_start = prob.batch_scores(q_start[None, :], require_qos)
    start_ok, start_rate = bool(ok_start[0]), float(r_start[0])
    if best is None:
        if start_ok:
            return q_start
        if best_effort and require_qos:
            # nothing meets every rate floor: place for maximum sum rate
            return solve_placement(
                s, P, B, lam, 0.0, opts, q_start,
                include_oirs=include_oirs, require_qos=False,
            )
        raise Infeasible("placement block: no wall point satisfies every rate floor")
    if start_ok and start_rate >= best[0] - 1e-12:
        return q_start
    return best[2]
