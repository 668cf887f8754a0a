"""Frequency-domain indoor VLC channel: Lambertian LOS plus first-order diffuse term."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np

from .errors import DimensionMismatch, InvalidGeometry
from .params import SystemParams

SPEED_OF_LIGHT = 299_792_458.0

Vec3 = Tuple[float, float, float]

# Simulation room of the reference system (corner at the origin, metres).
REFERENCE_RECEIVER: Vec3 = (0.5, 1.0, 0.0)
REFERENCE_LEDS: Tuple[Vec3, ...] = (
    (1.5, 1.5, 3.0),
    (1.5, 3.5, 3.0),
    (3.5, 1.5, 3.0),
    (3.5, 3.5, 3.0),
)


@dataclass(frozen=True)
class Geometry:
    """One LED-to-photodiode link. Angles in radians, area in m^2."""

    led_position: Vec3 = REFERENCE_LEDS[0]
    receiver_position: Vec3 = REFERENCE_RECEIVER
    irradiance_angle: float = math.radians(60)
    incidence_angle: float = math.radians(45)
    half_power_angle: float = math.radians(60)
    detector_area: float = 1e-4
    fov: float = math.radians(90)
    filter_gain: float = 1.0
    concentrator_gain: float = 1.0

    def __post_init__(self):
        if not self.detector_area > 0:
            raise InvalidGeometry(f"detector area must be > 0, got {self.detector_area}")
        if not 0 < self.half_power_angle < math.pi / 2:
            raise InvalidGeometry("half-power angle must lie in (0, pi/2)")
        for name in ("irradiance_angle", "incidence_angle"):
            a = getattr(self, name)
            if not 0 <= a < math.pi / 2:
                raise InvalidGeometry(f"{name} must lie in [0, pi/2), got {a}")
        if not self.fov > 0:
            raise InvalidGeometry("field of view must be > 0")
        if self.filter_gain < 0 or self.concentrator_gain < 0:
            raise InvalidGeometry("filter and concentrator gains must be >= 0")

    @property
    def distance(self) -> float:
        return math.dist(self.led_position, self.receiver_position)

    @property
    def lambertian_order(self) -> float:
        return -math.log(2.0) / math.log(math.cos(self.half_power_angle))


@dataclass(frozen=True)
class DiffuseParams:
    """Diffuse-link efficiency, exponential decay time (s) and extra delay (s).

    The default efficiency is an assumption of the order A_r/A_room * rho/(1-rho)
    for a 1 cm^2 detector in a 5 x 5 x 3 m room with wall reflectivity 0.8.
    """

    efficiency: float = 3.6e-6
    decay_time: float = 10e-9
    delay: float = 0.0

    def __post_init__(self):
        if self.efficiency < 0:
            raise InvalidGeometry(f"diffuse efficiency must be >= 0, got {self.efficiency}")
        if not self.decay_time > 0:
            raise InvalidGeometry(f"decay time must be > 0, got {self.decay_time}")
        if self.delay < 0:
            raise InvalidGeometry("diffuse delay must be >= 0")


@dataclass(frozen=True)
class ChannelState:
    """Complex gains and frequencies of the N/2 data-bearing odd subcarriers."""

    gains: np.ndarray
    frequencies: np.ndarray = field(default=None)

    def __post_init__(self):
        gains = np.asarray(self.gains, dtype=complex).ravel()
        freqs = self.frequencies
        freqs = np.full(gains.shape, np.nan) if freqs is None else np.asarray(freqs, float).ravel()
        if gains.shape != freqs.shape:
            raise DimensionMismatch(f"{gains.size} gains but {freqs.size} frequencies")
        if not np.all(np.isfinite(gains)):
            raise InvalidGeometry("channel gains must be finite")
        gains.setflags(write=False)
        freqs.setflags(write=False)
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "frequencies", freqs)

    def __len__(self):
        return self.gains.size

    @property
    def power_gains(self) -> np.ndarray:
        return np.abs(self.gains) ** 2

    def snr_per_watt(self, params: SystemParams) -> np.ndarray:
        """|H|^2 / (4 sigma^2 W): effective SNR per watt on each subcarrier."""
        return self.power_gains / params.noise_floor

    @classmethod
    def from_magnitudes(cls, magnitudes: Sequence[float]) -> "ChannelState":
        return cls(np.asarray(magnitudes, dtype=complex))


def lambertian_gain(geom: Geometry, distance: float) -> float:
    """DC gain of a generalized Lambertian LOS link; zero outside the receiver FOV."""
    if not distance > 0:
        raise InvalidGeometry(f"distance must be > 0, got {distance}")
    if geom.incidence_angle > geom.fov:
        return 0.0
    m = geom.lambertian_order
    return (
        (m + 1)
        * geom.detector_area
        * math.cos(geom.incidence_angle)
        * math.cos(geom.irradiance_angle) ** m
        * geom.filter_gain
        * geom.concentrator_gain
        / (2 * math.pi * distance**2)
    )


def los_gain(g_l: float, f, tau: float):
    """LOS transfer g_L exp(-j 2 pi f tau) for propagation delay tau = d/c."""
    f = np.asarray(f, dtype=float)
    out = g_l * np.exp(-2j * np.pi * f * tau)
    return out if out.ndim else complex(out)


def diffuse_gain(dp: DiffuseParams, f):
    """First-order low-pass diffuse transfer, with optional extra delay phase."""
    f = np.asarray(f, dtype=float)
    out = dp.efficiency / (1 + 2j * np.pi * dp.decay_time * f)
    if dp.delay:
        out = out * np.exp(-2j * np.pi * f * dp.delay)
    return out if out.ndim else complex(out)


def subcarrier_frequencies(params: SystemParams) -> np.ndarray:
    i = np.arange(1, params.n_data + 1)
    return (2 * i - 1) * params.bandwidth


def subcarrier_gains(
    geoms: Geometry | Sequence[Geometry],
    dp: DiffuseParams,
    params: SystemParams,
) -> ChannelState:
    """Per-odd-subcarrier gains, coherently summed over all LEDs."""
    if isinstance(geoms, Geometry):
        geoms = [geoms]
    f = subcarrier_frequencies(params)
    h = np.zeros(f.shape, dtype=complex)
    for geom in geoms:
        d = geom.distance
        h += los_gain(lambertian_gain(geom, d), f, d / SPEED_OF_LIGHT)
        h += diffuse_gain(dp, f)
    return ChannelState(h, f)


def reference_geometries(**overrides) -> list[Geometry]:
    """The four-LED layout of the reference simulation (angles fixed by the table)."""
    return [Geometry(led_position=led, receiver_position=REFERENCE_RECEIVER, **overrides) for led in REFERENCE_LEDS]


def reference_channel(params: SystemParams | None = None, dp: DiffuseParams | None = None) -> ChannelState:
    params = params or SystemParams()
    return subcarrier_gains(reference_geometries(), dp or DiffuseParams(), params)
