"""3D scene description: room, LEDs, users, candidate reflector walls.

All positions are in meters in a right-handed Cartesian frame with the
floor at z_min and the ceiling at z_max. LEDs point straight down (-z).
Angles returned by this module are radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import (
    DegenerateGeometry,
    DimensionMismatch,
    NonPositiveConstant,
    NotOnAnyPlane,
    OutOfPlaneRange,
    OutOfRoom,
)

# Interior margin (m) used when sampling wall planes, so that searched points
# respect the strict inequalities of the wall definitions.
WALL_MARGIN = 1e-6


def vec3(x: float, y: float, z: float) -> np.ndarray:
    return np.array([float(x), float(y), float(z)])


@dataclass(frozen=True)
class RoomBounds:
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    z_min: float
    z_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max and self.z_min < self.z_max):
            raise NonPositiveConstant("room bounds must satisfy min < max on every axis")

    def contains(self, p: np.ndarray) -> bool:
        return bool(
            self.x_min <= p[0] <= self.x_max
            and self.y_min <= p[1] <= self.y_max
            and self.z_min <= p[2] <= self.z_max
        )


class WallPlane(Enum):
    """The four vertical walls a reflector panel may occupy.

    Declaration order is the deterministic tie-break order used by the
    placement search (X_MIN wins ties, then X_MAX, Y_MIN, Y_MAX).
    """

    X_MIN = "x_min"
    X_MAX = "x_max"
    Y_MIN = "y_min"
    Y_MAX = "y_max"

    @property
    def axis(self) -> int:
        return 0 if self in (WallPlane.X_MIN, WallPlane.X_MAX) else 1

    @property
    def is_min_side(self) -> bool:
        return self in (WallPlane.X_MIN, WallPlane.Y_MIN)

    def fixed_coordinate(self, room: RoomBounds) -> float:
        if self is WallPlane.X_MIN:
            return room.x_min
        if self is WallPlane.X_MAX:
            return room.x_max
        if self is WallPlane.Y_MIN:
            return room.y_min
        return room.y_max

    def free_ranges(self, room: RoomBounds) -> tuple[tuple[float, float], tuple[float, float]]:
        """Open intervals of the in-plane coordinates: (horizontal, vertical)."""
        if self.axis == 0:
            return (room.y_min, room.y_max), (room.z_min, room.z_max)
        return (room.x_min, room.x_max), (room.z_min, room.z_max)


@dataclass(frozen=True)
class Scenario:
    """Immutable description of one network deployment.

    Angle conventions: ``semi_angle_half_power`` is kept in degrees (only
    used to derive the Lambertian order); ``fov_incidence`` and ``fov_oirs``
    are radians. Config files carry all three in degrees and the loader
    converts the two fields of view.
    """

    room: RoomBounds
    led_positions: np.ndarray  # (L, 3)
    user_positions: np.ndarray  # (K, 3)
    pd_area: float  # m^2
    semi_angle_half_power: float  # degrees
    optical_filter_gain: float
    concentrator_gain: float
    pd_sensitivity: float  # A/W
    fov_incidence: float  # radians
    fov_oirs: float  # radians
    oirs_reflection_coeff: float
    oirs_element_count: int
    oirs_element_area: float  # m^2
    bandwidth: float  # Hz
    noise_power: float  # W
    circuit_power: float  # W
    avg_led_power_dbm: float
    r_min: float  # bits/s/Hz per user
    led_user_assignment: np.ndarray = field(default=None)  # (L, K) binary

    @property
    def num_leds(self) -> int:
        return self.led_positions.shape[0]

    @property
    def num_users(self) -> int:
        return self.user_positions.shape[0]

    @property
    def num_oirs_elements(self) -> int:
        return self.oirs_element_count

    @property
    def p_max_watt(self) -> float:
        """Total transmit power cap: L times the average per-LED budget."""
        return self.num_leds * 10.0 ** ((self.avg_led_power_dbm - 30.0) / 10.0)

    def with_power_budget_dbm(self, pth_dbm: float) -> "Scenario":
        return replace(self, avg_led_power_dbm=float(pth_dbm))


def validate_scenario(s: Scenario) -> Scenario:
    """Check all scenario invariants; returns the scenario unchanged."""
    led = np.asarray(s.led_positions, dtype=float)
    usr = np.asarray(s.user_positions, dtype=float)
    if led.ndim != 2 or led.shape[1] != 3 or led.shape[0] < 1:
        raise DimensionMismatch(f"led_positions must be (L,3), got {led.shape}")
    if usr.ndim != 2 or usr.shape[1] != 3 or usr.shape[0] < 1:
        raise DimensionMismatch(f"user_positions must be (K,3), got {usr.shape}")
    if not np.all(np.isfinite(led)) or not np.all(np.isfinite(usr)):
        raise OutOfRoom("positions must be finite")
    for name, pts in (("LED", led), ("user", usr)):
        for i, p in enumerate(pts):
            if not s.room.contains(p):
                raise OutOfRoom(f"{name} {i} at {tuple(p)} lies outside the room bounds")
    a = np.asarray(s.led_user_assignment, dtype=float)
    if a.shape != (led.shape[0], usr.shape[0]):
        raise DimensionMismatch(
            f"led_user_assignment must be {(led.shape[0], usr.shape[0])}, got {a.shape}"
        )
    if not np.all((a == 0) | (a == 1)):
        raise DimensionMismatch("led_user_assignment entries must be 0 or 1")
    if not np.all(a.sum(axis=1) == 1):
        raise DimensionMismatch("each LED must serve exactly one user (row sums of A must be 1)")
    positives = {
        "pd_area": s.pd_area,
        "optical_filter_gain": s.optical_filter_gain,
        "concentrator_gain": s.concentrator_gain,
        "pd_sensitivity": s.pd_sensitivity,
        "fov_incidence": s.fov_incidence,
        "fov_oirs": s.fov_oirs,
        "oirs_reflection_coeff": s.oirs_reflection_coeff,
        "oirs_element_area": s.oirs_element_area,
        "bandwidth": s.bandwidth,
        "noise_power": s.noise_power,
        "r_min": s.r_min,
    }
    for name, value in positives.items():
        if not (value > 0) or not math.isfinite(value):
            raise NonPositiveConstant(f"{name} must be strictly positive, got {value}")
    if s.circuit_power < 0:
        raise NonPositiveConstant("circuit_power must be nonnegative")
    if not (0.0 < s.oirs_reflection_coeff <= 1.0):
        raise NonPositiveConstant("oirs_reflection_coeff must lie in (0, 1]")
    if not (0.0 < s.semi_angle_half_power < 90.0):
        raise NonPositiveConstant("semi_angle_half_power must lie in (0, 90) degrees")
    if s.oirs_element_count < 1:
        raise NonPositiveConstant("oirs_element_count must be at least 1")
    return s


def plane_membership(q: np.ndarray, room: RoomBounds) -> WallPlane:
    """Identify which wall plane the point lies on (equality on the fixed
    coordinate, strictly inside on the two free coordinates)."""
    q = np.asarray(q, dtype=float)
    if not np.all(np.isfinite(q)):
        raise NotOnAnyPlane("point must be finite")
    inside_z = room.z_min < q[2] < room.z_max
    inside_y = room.y_min < q[1] < room.y_max
    inside_x = room.x_min < q[0] < room.x_max
    if q[0] == room.x_min and inside_y and inside_z:
        return WallPlane.X_MIN
    if q[0] == room.x_max and inside_y and inside_z:
        return WallPlane.X_MAX
    if q[1] == room.y_min and inside_x and inside_z:
        return WallPlane.Y_MIN
    if q[1] == room.y_max and inside_x and inside_z:
        return WallPlane.Y_MAX
    raise NotOnAnyPlane(f"point {tuple(q)} is not on any candidate wall plane")


def project_to_plane(u: float, v: float, plane: WallPlane, room: RoomBounds) -> np.ndarray:
    """Build the 3D wall point with in-plane coordinates (u, v).

    u runs along the wall's horizontal free axis, v is the height.
    """
    (u_lo, u_hi), (v_lo, v_hi) = plane.free_ranges(room)
    if not (u_lo < u < u_hi and v_lo < v < v_hi):
        raise OutOfPlaneRange(
            f"in-plane point ({u}, {v}) outside open ranges ({u_lo},{u_hi})x({v_lo},{v_hi})"
        )
    fixed = plane.fixed_coordinate(room)
    if plane.axis == 0:
        return vec3(fixed, u, v)
    return vec3(u, fixed, v)


def irradiance_angle_los(led: np.ndarray, user: np.ndarray) -> float:
    """Angle between the LED boresight (straight down) and the LED-to-user ray."""
    d = np.asarray(user, dtype=float) - np.asarray(led, dtype=float)
    norm = float(np.linalg.norm(d))
    if norm == 0.0:
        raise DegenerateGeometry("LED and user are coincident")
    cos_psi = -d[2] / norm
    return float(np.arccos(np.clip(cos_psi, -1.0, 1.0)))


def irradiance_angle_oirs(led: np.ndarray, q: np.ndarray) -> float:
    """Angle between the LED boresight (straight down) and the LED-to-panel ray."""
    d = np.asarray(q, dtype=float) - np.asarray(led, dtype=float)
    norm = float(np.linalg.norm(d))
    if norm == 0.0:
        raise DegenerateGeometry("LED and reflector point are coincident")
    cos_theta = -d[2] / norm
    return float(np.arccos(np.clip(cos_theta, -1.0, 1.0)))


def distances(s: Scenario, q: np.ndarray) -> dict:
    """All Euclidean distances used by the channel model.

    Every reflector element is treated as sitting at the single central
    point q, so the LED-to-panel and panel-to-user legs carry no element
    index.
    """
    led = s.led_positions
    usr = s.user_positions
    q = np.asarray(q, dtype=float)
    d_lk = np.linalg.norm(led[:, None, :] - usr[None, :, :], axis=2)  # (L, K)
    d_led_oirs = np.linalg.norm(led - q[None, :], axis=1)  # (L,)
    d_oirs_user = np.linalg.norm(usr - q[None, :], axis=1)  # (K,)
    return {"led_user": d_lk, "led_oirs": d_led_oirs, "oirs_user": d_oirs_user}
