"""Shared tuning knobs for the four block solvers."""

from __future__ import annotations

from dataclasses import dataclass, replace

from ..errors import ConfigError


@dataclass(frozen=True)
class SolverOptions:
    inner_tolerance: float = 1e-6
    max_inner_iters: int = 60
    zeta_initial: float = 1.0
    zeta_growth: float = 2.0
    grid_resolution_placement: float = 0.25  # meters
    multistart_count: int = 1
    rng_seed: int = 0

    def __post_init__(self):
        if self.inner_tolerance <= 0:
            raise ConfigError("inner_tolerance must be positive")
        if self.max_inner_iters < 1:
            raise ConfigError("max_inner_iters must be at least 1")
        if self.zeta_initial <= 0 or self.zeta_growth <= 1.0:
            raise ConfigError("penalty schedule requires zeta_initial > 0 and zeta_growth > 1")
        if self.grid_resolution_placement <= 0:
            raise ConfigError("grid_resolution_placement must be positive")
        if self.multistart_count < 1:
            raise ConfigError("multistart_count must be at least 1")
        if self.rng_seed < 0:
            raise ConfigError("rng_seed must be nonnegative")

    def with_seed(self, seed: int) -> "SolverOptions":
        return replace(self, rng_seed=int(seed))
