"""System-level parameters shared by the rate models and the solvers."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Optional

from .errors import InvalidParams


@dataclass(frozen=True)
class SystemParams:
    """Link parameters.

    ``n`` is half of the total subcarrier count; only the ``n // 2`` odd
    subcarriers below the Nyquist bin carry data. ``optical_budget=None``
    disables the optical constraint. ``rate_floor`` is in bits/s.

    Defaults follow the simulation table of the reference system
    (N = 64, W = 1 MHz, noise PSD 1e-18 A^2/Hz, P_c = 0.2 W).
    """

    n: int = 64
    bandwidth: float = 1e6
    noise_psd: float = 1e-18
    power_budget: float = 20.0
    optical_budget: Optional[float] = None
    circuit_power: float = 0.2
    rate_floor: float = 0.0

    def __post_init__(self):
        if self.n < 2 or self.n % 2:
            raise InvalidParams(f"n must be an even integer >= 2, got {self.n}")
        for name in ("bandwidth", "noise_psd", "power_budget", "circuit_power"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise InvalidParams(f"{name} must be finite and > 0, got {value}")
        if self.optical_budget is not None and not self.optical_budget > 0:
            raise InvalidParams(f"optical_budget must be > 0, got {self.optical_budget}")
        if not (self.rate_floor >= 0 and math.isfinite(self.rate_floor)):
            raise InvalidParams(f"rate_floor must be finite and >= 0, got {self.rate_floor}")
        if self.optical_budget is not None and self.power_budget <= self.optical_budget**2:
            warnings.warn(
                f"electrical budget {self.power_budget} W does not exceed the squared "
                f"optical budget {self.optical_budget**2} W^2",
                stacklevel=3,
            )

    @property
    def n_data(self) -> int:
        """Number of data-bearing odd subcarriers (N/2)."""
        return self.n // 2

    @property
    def noise_floor(self) -> float:
        """4 sigma^2 W: noise power referred to the transmitter, per unit |H|^2."""
        return 4.0 * self.noise_psd * self.bandwidth

    @property
    def total_bandwidth(self) -> float:
        return 2.0 * self.n * self.bandwidth

    def with_(self, **changes) -> "SystemParams":
        return replace(self, **changes)
