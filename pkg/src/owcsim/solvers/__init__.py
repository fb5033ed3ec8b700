from .allocation import improve_allocation_rate, solve_allocation
from .options import SolverOptions
from .orientation import (
    MultiplierState,
    OrientationContext,
    constraint_violation,
    maximize_orientation_rate,
    orientation_gradient,
    orientation_objective,
    solve_orientation,
    update_multipliers,
)
from .placement import solve_placement
from .power import ScaConstants, sca_constants, solve_power

__all__ = [
    "SolverOptions",
    "ScaConstants",
    "sca_constants",
    "solve_power",
    "solve_allocation",
    "improve_allocation_rate",
    "MultiplierState",
    "OrientationContext",
    "orientation_objective",
    "orientation_gradient",
    "update_multipliers",
    "constraint_violation",
    "solve_orientation",
    "maximize_orientation_rate",
    "solve_placement",
]
