"""Line-of-sight and reflected channel gains.

The direct gain follows the generalized Lambertian emission model; the
reflected gain treats the mirror panel as a lossy virtual source at the
panel's central point, so every element of one panel shares the same
geometry. Receiver tilt enters through two independent incidence angles,
one for the direct path and one for the reflected path; both are free
decision variables, gated to zero outside the photodiode's field of view.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometry, DegenerateSemiAngle
from .geometry import Scenario

# Distance floor (m): a panel point coincident with an LED or user produces
# a gated zero gain instead of a division by zero.
DISTANCE_FLOOR = 1e-3


@dataclass(frozen=True)
class OrientationSet:
    """Receiver tilt angles, radians: one direct-path incidence and one
    reflected-path incidence per user."""

    los_incidence: np.ndarray  # (K,)
    oirs_incidence: np.ndarray  # (K,)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.los_incidence, self.oirs_incidence])

    @staticmethod
    def from_vector(x: np.ndarray) -> "OrientationSet":
        k = x.size // 2
        return OrientationSet(np.array(x[:k], dtype=float), np.array(x[k:], dtype=float))

    @staticmethod
    def zeros(k: int) -> "OrientationSet":
        return OrientationSet(np.zeros(k), np.zeros(k))


@dataclass(frozen=True)
class GainBases:
    """Angle-independent factors of the channel gains for a fixed panel
    position: everything except the receiver-tilt cosines and FoV gates."""

    los: np.ndarray  # (L, K)
    oirs: np.ndarray  # (L, K), already includes the reflection loss

    @property
    def num_leds(self) -> int:
        return self.los.shape[0]

    @property
    def num_users(self) -> int:
        return self.los.shape[1]


@dataclass(frozen=True)
class ChannelState:
    """Assembled gains for one (orientation, placement) pair.

    H[l, k] is the direct gain; G[k, n, l] the per-element reflected gain.
    """

    H: np.ndarray  # (L, K)
    G: np.ndarray  # (K, N, L)
    lambertian_order_value: float


def lambertian_order(semi_angle_half_power: float) -> float:
    """Emission order from the semi-angle at half power (degrees)."""
    if not (0.0 < semi_angle_half_power < 90.0):
        raise DegenerateSemiAngle(
            f"semi-angle must lie strictly between 0 and 90 degrees, got {semi_angle_half_power}"
        )
    return -math.log(2.0) / math.log(math.cos(math.radians(semi_angle_half_power)))


def _cos_pow(cos_value: float | np.ndarray, j: float):
    # clamp before powering: grazing angles may produce tiny negatives
    return np.clip(cos_value, 0.0, 1.0) ** j


def los_gain(s: Scenario, l: int, k: int, omega_k: float) -> float:
    """Direct gain from LED l to user k at direct-path incidence omega_k."""
    led = s.led_positions[l]
    usr = s.user_positions[k]
    diff = usr - led
    d = float(np.linalg.norm(diff))
    if d == 0.0:
        raise DegenerateGeometry("LED and user are coincident")
    j = lambertian_order(s.semi_angle_half_power)
    cos_psi = -diff[2] / d
    if cos_psi <= 0.0 or omega_k > s.fov_incidence:
        return 0.0
    return (
        s.pd_area
        * (j + 1.0)
        / (2.0 * math.pi * d * d)
        * float(_cos_pow(cos_psi, j))
        * s.optical_filter_gain
        * math.cos(omega_k)
        * s.concentrator_gain
    )


def oirs_gain(s: Scenario, l: int, n: int, k: int, q: np.ndarray, phi_k: float) -> float:
    """Reflected gain from LED l via panel element n to user k.

    All elements share the panel's central point, so n does not change the
    value; it is kept for shape fidelity with the per-element matrices.
    """
    del n  # co-located elements
    led = s.led_positions[l]
    usr = s.user_positions[k]
    q = np.asarray(q, dtype=float)
    d_in = float(np.linalg.norm(q - led))
    d_out = float(np.linalg.norm(usr - q))
    if d_in + d_out == 0.0:
        raise DegenerateGeometry("LED, panel, and user are all coincident")
    if d_in < DISTANCE_FLOOR or d_out < DISTANCE_FLOOR:
        return 0.0
    j = lambertian_order(s.semi_angle_half_power)
    cos_theta = (led[2] - q[2]) / d_in
    if cos_theta <= 0.0 or phi_k > s.fov_oirs:
        return 0.0
    total = d_in + d_out
    return (
        s.oirs_reflection_coeff
        * s.pd_area
        * (j + 1.0)
        / (2.0 * math.pi * total * total)
        * float(_cos_pow(cos_theta, j))
        * s.optical_filter_gain
        * math.cos(phi_k)
        * s.concentrator_gain
    )


def compute_bases(s: Scenario, q: np.ndarray, include_oirs: bool = True) -> GainBases:
    """Vectorized angle-free gain factors for all (LED, user) pairs."""
    led = s.led_positions
    usr = s.user_positions
    q = np.asarray(q, dtype=float)
    j = lambertian_order(s.semi_angle_half_power)
    const = s.pd_area * (j + 1.0) / (2.0 * math.pi) * s.optical_filter_gain * s.concentrator_gain

    diff = usr[None, :, :] - led[:, None, :]  # (L, K, 3)
    d = np.linalg.norm(diff, axis=2)
    if np.any(d == 0.0):
        raise DegenerateGeometry("an LED coincides with a user")
    cos_psi = -diff[:, :, 2] / d
    los = const / (d * d) * _cos_pow(cos_psi, j)
    los = np.where(cos_psi > 0.0, los, 0.0)

    if include_oirs:
        d_in = np.linalg.norm(led - q[None, :], axis=1)  # (L,)
        d_out = np.linalg.norm(usr - q[None, :], axis=1)  # (K,)
        cos_theta = np.where(d_in > 0, (led[:, 2] - q[2]) / np.maximum(d_in, 1e-300), 0.0)
        total = d_in[:, None] + d_out[None, :]
        with np.errstate(divide="ignore"):
            oirs = s.oirs_reflection_coeff * const / (total * total) * _cos_pow(cos_theta, j)[:, None]
        gate = (cos_theta[:, None] > 0.0) & (d_in[:, None] >= DISTANCE_FLOOR) & (d_out[None, :] >= DISTANCE_FLOOR)
        oirs = np.where(gate, oirs, 0.0)
    else:
        oirs = np.zeros_like(los)
    return GainBases(los=los, oirs=oirs)


def gains_from_bases(bases: GainBases, lam: OrientationSet, s: Scenario) -> tuple[np.ndarray, np.ndarray]:
    """Apply receiver-tilt cosines and FoV gates to the angle-free bases.

    Returns (H, g0) where H is (L, K) and g0 is the per-element reflected
    gain (L, K) shared by all elements.
    """
    cos_omega = np.where(lam.los_incidence <= s.fov_incidence, np.cos(lam.los_incidence), 0.0)
    cos_phi = np.where(lam.oirs_incidence <= s.fov_oirs, np.cos(lam.oirs_incidence), 0.0)
    H = bases.los * cos_omega[None, :]
    g0 = bases.oirs * cos_phi[None, :]
    return H, g0


def build_channel_state(
    s: Scenario, lam: OrientationSet, q: np.ndarray, include_oirs: bool = True
) -> ChannelState:
    """Assemble the full channel for one orientation/placement pair."""
    bases = compute_bases(s, q, include_oirs=include_oirs)
    H, g0 = gains_from_bases(bases, lam, s)
    G = np.broadcast_to(g0.T[:, None, :], (s.num_users, s.oirs_element_count, s.num_leds)).copy()
    return ChannelState(H=H, G=G, lambertian_order_value=lambertian_order(s.semi_angle_half_power))
