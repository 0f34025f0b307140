"""System-level configuration for the downlink scenario.

Geometry is 2-D (meters): the base station sits at the origin, the
reflecting surface at a fixed offset, and users are drawn from a
rectangular box. Transmit antennas move along a 1-D segment
[x_min, x_max] with a minimum spacing d_min; both default to the
wavelength-relative values of the simulation setup (half-width six
wavelengths, spacing half a wavelength).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

SPEED_OF_LIGHT = 299_792_458.0
DEFAULT_CARRIER_HZ = 2.4e9
DEFAULT_WAVELENGTH = SPEED_OF_LIGHT / DEFAULT_CARRIER_HZ


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) * 1e-3


def watts_to_dbm(watts: float) -> float:
    if watts <= 0.0:
        raise ValueError("power must be positive to express in dBm")
    return 10.0 * math.log10(watts * 1e3)


@dataclass(frozen=True)
class SystemConfig:
    """Static system parameters.

    m          transmit antennas (movable)
    k          users
    n          reflecting elements
    l_t        transmit-side propagation paths per link
    l_r        surface-side propagation paths per link
    p_t        transmit power budget, watts
    sigma_sq   per-user noise power, watts
    wavelength carrier wavelength, meters
    x_min/x_max  antenna placement segment, meters
    d_min      minimum antenna spacing, meters
    rician_p   line-of-sight power ratio of the faded links
    alpha_*    path-loss exponents (direct, feed, reflect hops)
    d_ref      reference distance of the path-loss model, meters
    """

    m: int = 8
    k: int = 2
    n: int = 16
    l_t: int = 4
    l_r: int = 4
    p_t: float = 1.0
    sigma_sq: float = dbm_to_watts(-80.0)
    wavelength: float = DEFAULT_WAVELENGTH
    x_min: float = -6.0 * DEFAULT_WAVELENGTH
    x_max: float = 6.0 * DEFAULT_WAVELENGTH
    d_min: float = 0.5 * DEFAULT_WAVELENGTH
    rician_p: float = 0.5
    alpha_direct: float = 3.5
    alpha_feed: float = 2.5
    alpha_reflect: float = 2.5
    d_ref: float = 1.0
    bs_pos: tuple[float, float] = (0.0, 0.0)
    ris_pos: tuple[float, float] = (12.0, 16.0)
    user_box: tuple[float, float, float, float] = (20.0, 40.0, -20.0, 0.0)
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("m", "k", "n", "l_t", "l_r"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.l_t != self.l_r:
            raise ValueError(
                "l_t must equal l_r: the diagonal fading model ties the two path counts"
            )
        for name in ("p_t", "sigma_sq", "wavelength", "d_min", "d_ref"):
            value = getattr(self, name)
            if not value > 0.0:
                raise ValueError(f"{name} must be positive, got {value!r}")
        if self.rician_p < 0.0:
            raise ValueError(f"rician_p must be non-negative, got {self.rician_p!r}")
        span = self.x_max - self.x_min
        needed = (self.m - 1) * self.d_min
        if span < needed:
            raise ValueError(
                "placement segment too short: x_max - x_min = "
                f"{span:.6g} m violates (m - 1) * d_min = {needed:.6g} m"
            )
        x0, x1, y0, y1 = self.user_box
        if x1 <= x0 or y1 <= y0:
            raise ValueError(f"user_box must be a non-empty rectangle, got {self.user_box!r}")

    @property
    def c0(self) -> float:
        """Reference path gain at d_ref (isotropic free-space constant)."""
        return (self.wavelength / (4.0 * math.pi)) ** 2

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma_sq)

    def with_updates(self, **kwargs) -> "SystemConfig":
        from dataclasses import replace

        return replace(self, **kwargs)
