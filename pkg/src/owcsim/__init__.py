"""owcsim: simulator and optimizer for mirror-array-assisted indoor
optical wireless networks (channel gains, SINR/rate metrics, and the
four-block power/allocation/orientation/placement optimizer with
efficiency-frontier sweeps)."""

__version__ = "0.1.0"

from .channel import ChannelState, OrientationSet, build_channel_state, lambertian_order
from .config import load_config, save_scenario
from .geometry import RoomBounds, Scenario, WallPlane, validate_scenario
from .metrics import AllocationMatrix, MetricsReport, PowerAllocation, dbm_to_watt
from .orchestrator import (
    AlgorithmResult,
    ParetoPoint,
    SolutionState,
    baseline_run,
    compute_r_max,
    default_init,
    pareto_front,
    pareto_sweep,
    power_sweep,
    run_algorithm1,
)
from .solvers import SolverOptions

__all__ = [
    "__version__",
    "Scenario",
    "RoomBounds",
    "WallPlane",
    "validate_scenario",
    "OrientationSet",
    "ChannelState",
    "build_channel_state",
    "lambertian_order",
    "PowerAllocation",
    "AllocationMatrix",
    "MetricsReport",
    "dbm_to_watt",
    "SolverOptions",
    "SolutionState",
    "AlgorithmResult",
    "ParetoPoint",
    "default_init",
    "run_algorithm1",
    "compute_r_max",
    "baseline_run",
    "pareto_sweep",
    "power_sweep",
    "pareto_front",
    "load_config",
    "save_scenario",
]
