"""SINR, achievable-rate lower bound, and network totals.

Rates are reported in bits/s/Hz (bandwidth-normalized); spectral efficiency
is the user sum of those rates, and energy efficiency divides it by the
total consumed power (transmit plus circuit), giving bits/J/Hz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelState
from .errors import DimensionMismatch, NonPositiveNoise, ZeroTotalPower

# Scaling of the SINR inside the rate lower bound.
E_OVER_2PI = math.e / (2.0 * math.pi)


@dataclass(frozen=True)
class PowerAllocation:
    per_led_watts: np.ndarray  # (L,)

    def __post_init__(self):
        p = np.asarray(self.per_led_watts, dtype=float)
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise DimensionMismatch("per-LED powers must be finite and nonnegative")
        object.__setattr__(self, "per_led_watts", p)

    @property
    def total(self) -> float:
        return float(self.per_led_watts.sum())


@dataclass(frozen=True)
class AllocationMatrix:
    """Element-to-LED assignment; rows are elements and sum to one."""

    b: np.ndarray  # (N, L)

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float)
        if b.ndim != 2:
            raise DimensionMismatch("allocation matrix must be 2-D")
        if np.any(b < -1e-12) or np.any(b > 1 + 1e-12):
            raise DimensionMismatch("allocation entries must lie in [0, 1]")
        if not np.allclose(b.sum(axis=1), 1.0, atol=1e-9):
            raise DimensionMismatch("each allocation row must sum to 1")
        object.__setattr__(self, "b", b)

    @property
    def led_element_counts(self) -> np.ndarray:
        return self.b.sum(axis=0)

    def is_binary(self) -> bool:
        return bool(np.all((self.b == 0.0) | (self.b == 1.0)))


@dataclass(frozen=True)
class MetricsReport:
    sinr: np.ndarray  # (K,)
    rate_bits: np.ndarray  # (K,) bits/s/Hz
    r_tot_bits: float
    se: float  # bits/s/Hz
    p_tot: float  # W
    ee: float  # bits/J/Hz


def dbm_to_watt(p_dbm: float) -> float:
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def watt_to_dbm(p_watt: float) -> float:
    return 10.0 * math.log10(p_watt) + 30.0


def composite_gains(cs: ChannelState, B: AllocationMatrix) -> np.ndarray:
    """Per-(LED, user) gain including the allocated reflected paths."""
    reflected = np.einsum("nl,knl->lk", B.b, cs.G)
    return cs.H + reflected


def sinr_from_gains(
    comp: np.ndarray,
    H: np.ndarray,
    P: np.ndarray,
    A: np.ndarray,
    delta: float,
    sigma2: float,
) -> np.ndarray:
    """SINR per user from precomputed composite gains.

    Desired power combines direct and reflected paths of the serving LEDs;
    interference comes from the direct paths of LEDs serving other users
    (reflected interference is neglected).
    """
    if sigma2 <= 0:
        raise NonPositiveNoise(f"noise power must be positive, got {sigma2}")
    weighted = A * P[:, None]  # (L, K)
    signal = (comp * weighted).sum(axis=0)  # (K,)
    cross = H.T @ weighted  # (K, K): user k's gain to the LED serving user i
    interference = (cross**2).sum(axis=1) - np.diagonal(cross) ** 2
    return delta**2 * signal**2 / (sigma2 + delta**2 * interference)


def sinr(
    cs: ChannelState,
    P: PowerAllocation,
    A: np.ndarray,
    B: AllocationMatrix,
    delta: float,
    sigma2: float,
) -> np.ndarray:
    comp = composite_gains(cs, B)
    return sinr_from_gains(comp, cs.H, P.per_led_watts, A, delta, sigma2)


def rate(gamma_k):
    """Bandwidth-normalized achievable-rate lower bound, bits/s/Hz."""
    return 0.5 * np.log2(1.0 + E_OVER_2PI * np.asarray(gamma_k, dtype=float))


def rate_absolute(gamma_k, bandwidth_hz: float):
    """Rate in bits/s for a given modulation bandwidth."""
    return rate(gamma_k) * bandwidth_hz


def totals(
    rates: np.ndarray,
    P: PowerAllocation,
    p_cir: float,
    bandwidth_hz: float,
    sinr_values: np.ndarray | None = None,
) -> MetricsReport:
    """Aggregate per-user rates into sum rate, SE, total power, and EE."""
    del bandwidth_hz  # rates are already bandwidth-normalized
    if p_cir < 0:
        raise ZeroTotalPower("circuit power must be nonnegative")
    rates = np.asarray(rates, dtype=float)
    r_tot = float(rates.sum())
    p_tot = P.total + p_cir
    if p_tot <= 0:
        raise ZeroTotalPower("total consumed power is zero")
    if sinr_values is None:
        sinr_values = np.full(rates.shape, np.nan)
    return MetricsReport(
        sinr=np.asarray(sinr_values, dtype=float),
        rate_bits=rates,
        r_tot_bits=r_tot,
        se=r_tot,
        p_tot=p_tot,
        ee=r_tot / p_tot,
    )


def evaluate(
    s,
    cs: ChannelState,
    P: PowerAllocation,
    B: AllocationMatrix,
) -> MetricsReport:
    """Full metrics for one channel/power/allocation triple."""
    gammas = sinr(cs, P, s.led_user_assignment, B, s.pd_sensitivity, s.noise_power)
    rates = rate(gammas)
    return totals(rates, P, s.circuit_power, s.bandwidth, sinr_values=gammas)
