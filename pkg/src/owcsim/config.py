"""Scenario/solver configuration files.

The on-disk format is a YAML key-value tree whose keys match the Scenario
field names one-to-one. All angles in the file are degrees; the two fields
of view are converted to radians at load time. List lengths define the LED
and user counts.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError
from .geometry import RoomBounds, Scenario, validate_scenario
from .solvers.options import SolverOptions

_ROOM_KEYS = ("x_min", "x_max", "y_min", "y_max", "z_min", "z_max")
_SCALAR_KEYS = (
    "pd_area",
    "semi_angle_half_power",
    "optical_filter_gain",
    "concentrator_gain",
    "pd_sensitivity",
    "fov_incidence",
    "fov_oirs",
    "oirs_reflection_coeff",
    "oirs_element_count",
    "oirs_element_area",
    "bandwidth",
    "noise_power",
    "circuit_power",
    "avg_led_power_dbm",
    "r_min",
)
_TOP_KEYS = set(
    ("room", "led_positions", "user_positions", "led_user_assignment", "solver") + _SCALAR_KEYS
)


def _exact_degrees(radians_value: float) -> float:
    """Degrees value whose radian conversion reproduces the input bit-exactly."""
    d = math.degrees(radians_value)
    for candidate in (d, math.nextafter(d, math.inf), math.nextafter(d, -math.inf)):
        if math.radians(candidate) == radians_value:
            return candidate
    return d


def scenario_from_dict(tree: dict) -> Scenario:
    if not isinstance(tree, dict):
        raise ConfigError("configuration root must be a mapping")
    unknown = set(tree) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    missing = _TOP_KEYS - {"solver"} - set(tree)
    if missing:
        raise ConfigError(f"missing configuration keys: {sorted(missing)}")
    room_tree = tree["room"]
    if not isinstance(room_tree, dict) or set(room_tree) != set(_ROOM_KEYS):
        raise ConfigError(f"room must hold exactly the keys {_ROOM_KEYS}")
    try:
        room = RoomBounds(**{k: float(room_tree[k]) for k in _ROOM_KEYS})
        scenario = Scenario(
            room=room,
            led_positions=np.array(tree["led_positions"], dtype=float),
            user_positions=np.array(tree["user_positions"], dtype=float),
            pd_area=float(tree["pd_area"]),
            semi_angle_half_power=float(tree["semi_angle_half_power"]),
            optical_filter_gain=float(tree["optical_filter_gain"]),
            concentrator_gain=float(tree["concentrator_gain"]),
            pd_sensitivity=float(tree["pd_sensitivity"]),
            fov_incidence=math.radians(float(tree["fov_incidence"])),
            fov_oirs=math.radians(float(tree["fov_oirs"])),
            oirs_reflection_coeff=float(tree["oirs_reflection_coeff"]),
            oirs_element_count=int(tree["oirs_element_count"]),
            oirs_element_area=float(tree["oirs_element_area"]),
            bandwidth=float(tree["bandwidth"]),
            noise_power=float(tree["noise_power"]),
            circuit_power=float(tree["circuit_power"]),
            avg_led_power_dbm=float(tree["avg_led_power_dbm"]),
            r_min=float(tree["r_min"]),
            led_user_assignment=np.array(tree["led_user_assignment"], dtype=float),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed configuration value: {exc}") from exc
    return validate_scenario(scenario)


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "room": {k: getattr(s.room, k) for k in _ROOM_KEYS},
        "led_positions": [[float(v) for v in p] for p in s.led_positions],
        "user_positions": [[float(v) for v in p] for p in s.user_positions],
        "pd_area": s.pd_area,
        "semi_angle_half_power": s.semi_angle_half_power,
        "optical_filter_gain": s.optical_filter_gain,
        "concentrator_gain": s.concentrator_gain,
        "pd_sensitivity": s.pd_sensitivity,
        "fov_incidence": _exact_degrees(s.fov_incidence),
        "fov_oirs": _exact_degrees(s.fov_oirs),
        "oirs_reflection_coeff": s.oirs_reflection_coeff,
        "oirs_element_count": s.oirs_element_count,
        "oirs_element_area": s.oirs_element_area,
        "bandwidth": s.bandwidth,
        "noise_power": s.noise_power,
        "circuit_power": s.circuit_power,
        "avg_led_power_dbm": s.avg_led_power_dbm,
        "r_min": s.r_min,
        "led_user_assignment": [[int(v) for v in row] for row in s.led_user_assignment],
    }


def solver_options_from_dict(tree: dict | None) -> SolverOptions:
    if tree is None:
        return SolverOptions()
    if not isinstance(tree, dict):
        raise ConfigError("solver section must be a mapping")
    known = {f for f in SolverOptions.__dataclass_fields__}
    unknown = set(tree) - known
    if unknown:
        raise ConfigError(f"unknown solver keys: {sorted(unknown)}")
    try:
        return SolverOptions(**tree)
    except TypeError as exc:
        raise ConfigError(f"malformed solver options: {exc}") from exc


def load_config_tree(path: str | Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration file {path}: {exc}") from exc
    try:
        tree = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse configuration file {path}: {exc}") from exc
    if not isinstance(tree, dict):
        raise ConfigError(f"configuration file {path} must hold a mapping")
    return tree


def load_config(path: str | Path) -> tuple[Scenario, SolverOptions]:
    tree = load_config_tree(path)
    scenario = scenario_from_dict(tree)
    options = solver_options_from_dict(tree.get("solver"))
    return scenario, options


def save_scenario(s: Scenario, path: str | Path, solver: SolverOptions | None = None) -> None:
    tree = scenario_to_dict(s)
    if solver is not None:
        tree["solver"] = {f: getattr(solver, f) for f in SolverOptions.__dataclass_fields__}
    Path(path).write_text(yaml.safe_dump(tree, sort_keys=False))


def config_digest(tree: dict) -> str:
    """Hex digest of the canonicalized configuration tree."""
    canonical = json.dumps(tree, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(canonical.encode()).hexdigest()
