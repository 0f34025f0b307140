"""Achievable rates of the two-layer transmission.

The beamforming matrix W is (M, K+1): columns 0..K-1 carry the private
streams, column K the common stream. Every user first decodes the
common stream treating all private streams as noise, then cancels it
and decodes its own private stream. Rates are base-2 (bits/s/Hz).

The common rate allocation r_c must satisfy sum_k r_ck <= min_j R_cj;
the closed-form maximizer of the sum splits the worst-user common rate
evenly, r_ck = min_j R_cj / K.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import CompositeChannel, geometry_feasible
from .config import SystemConfig


@dataclass(frozen=True)
class DecisionState:
    """Decision variables of one solve: beamformers, phases, positions, allocation."""

    w: np.ndarray     # (M, K+1) complex
    phi: np.ndarray   # (N,) complex unit modulus
    x: np.ndarray     # (M,) float positions
    r_c: np.ndarray   # (K,) float common-rate allocation


@dataclass(frozen=True)
class ConstraintResiduals:
    """Non-negative violation magnitudes; all zero for a feasible state."""

    power_excess: float
    common_rate_excess: float
    negative_allocation: float
    phase_modulus_error: float
    box_violation: float
    spacing_violation: float

    def max_violation(self) -> float:
        return max(self.power_excess, self.common_rate_excess,
                   self.negative_allocation, self.phase_modulus_error,
                   self.box_violation, self.spacing_violation)


@dataclass(frozen=True)
class RateReport:
    private_rates: np.ndarray     # (K,) R_k
    common_rates: np.ndarray      # (K,) R_ck, common-stream rate decodable at user k
    allocated_common: np.ndarray  # (K,) r_ck
    sum_rate: float
    residuals: ConstraintResiduals


def stream_gains(h_rows: np.ndarray, w: np.ndarray) -> np.ndarray:
    """All h_k^H w_i inner products, (K, K+1)."""
    return h_rows @ w


def sinr_private(h_rows: np.ndarray, w: np.ndarray, sigma_sq: np.ndarray) -> np.ndarray:
    """Private-stream SINR after the common stream is cancelled."""
    k = h_rows.shape[0]
    gains = np.abs(stream_gains(h_rows, w)[:, :k]) ** 2
    signal = np.diag(gains).copy()
    interference = gains.sum(axis=1) - signal
    return signal / (interference + np.asarray(sigma_sq, dtype=float))


def sinr_common(h_rows: np.ndarray, w: np.ndarray, sigma_sq: np.ndarray) -> np.ndarray:
    """Common-stream SINR with every private stream treated as noise."""
    k = h_rows.shape[0]
    gains = np.abs(stream_gains(h_rows, w)) ** 2
    return gains[:, k] / (gains[:, :k].sum(axis=1) + np.asarray(sigma_sq, dtype=float))


def private_rates(h_rows: np.ndarray, w: np.ndarray, sigma_sq: np.ndarray) -> np.ndarray:
    return np.log2(1.0 + sinr_private(h_rows, w, sigma_sq))


def common_rates(h_rows: np.ndarray, w: np.ndarray, sigma_sq: np.ndarray) -> np.ndarray:
    return np.log2(1.0 + sinr_common(h_rows, w, sigma_sq))


def allocate_common_rate(rates_c: np.ndarray) -> np.ndarray:
    """Even split of the worst-user common rate: r_ck = min_j R_cj / K."""
    rates_c = np.asarray(rates_c, dtype=float)
    k = rates_c.size
    return np.full(k, rates_c.min() / k)


def evaluate(state: DecisionState, channel: CompositeChannel,
             config: SystemConfig) -> RateReport:
    """Rates and constraint residuals of a decision state.

    Infeasible states are reported with non-zero residuals, never raised.
    """
    sigma_sq = np.full(config.k, config.sigma_sq)
    r_k = private_rates(channel.h_rows, state.w, sigma_sq)
    r_c = common_rates(channel.h_rows, state.w, sigma_sq)
    alloc = np.asarray(state.r_c, dtype=float)

    power = float(np.sum(np.abs(state.w) ** 2))
    x = np.asarray(state.x, dtype=float)
    box = max(0.0, float(np.max(config.x_min - x)), float(np.max(x - config.x_max)))
    if x.size > 1:
        gaps = np.diff(np.sort(x))
        spacing = max(0.0, config.d_min - float(np.min(gaps)))
    else:
        spacing = 0.0
    residuals = ConstraintResiduals(
        power_excess=max(0.0, power - config.p_t),
        common_rate_excess=max(0.0, float(alloc.sum() - r_c.min())),
        negative_allocation=max(0.0, -float(alloc.min())),
        phase_modulus_error=float(np.max(np.abs(np.abs(state.phi) - 1.0))),
        box_violation=box,
        spacing_violation=spacing,
    )
    sum_rate = float(r_k.sum() + alloc.sum())
    return RateReport(private_rates=r_k, common_rates=r_c,
                      allocated_common=alloc, sum_rate=sum_rate,
                      residuals=residuals)


__all__ = [
    "DecisionState", "ConstraintResiduals", "RateReport",
    "stream_gains", "sinr_private", "sinr_common",
    "private_rates", "common_rates", "allocate_common_rate", "evaluate",
    "geometry_feasible",
]
