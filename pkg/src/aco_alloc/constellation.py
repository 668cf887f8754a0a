"""Unit-power discrete signaling alphabets."""

from __future__ import annotations

from typing import Iterable, Optional, Tuple

import numpy as np

from .errors import InvalidConstellation, UnsupportedOrder

_POWER_TOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


class Constellation:
    """Equiprobable complex alphabet normalized to unit average power.

    Instances are immutable and hashable so they can key the MMSE caches.
    When the point set is the Cartesian product of a real-axis and an
    imaginary-axis level set, ``axes`` holds the two level sets; the rate
    kernels then integrate one real dimension at a time.
    """

    __slots__ = ("points", "order", "mean_abs", "axes", "name", "_key")

    def __init__(self, points: Iterable[complex], name: Optional[str] = None):
        pts = np.asarray(list(points), dtype=complex).ravel()
        if pts.size < 2:
            raise InvalidConstellation("a constellation needs at least two points")
        if not np.all(np.isfinite(pts)):
            raise InvalidConstellation("constellation points must be finite")
        power = float(np.mean(np.abs(pts) ** 2))
        if abs(power - 1.0) > _POWER_TOL:
            raise InvalidConstellation(f"average power is {power!r}, expected 1")
        diffs = np.abs(pts[:, None] - pts[None, :]) + np.eye(pts.size)
        if diffs.min() <= 1e-12:
            raise InvalidConstellation("constellation points must be pairwise distinct")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "order", int(pts.size))
        object.__setattr__(self, "mean_abs", float(np.mean(np.abs(pts))))
        object.__setattr__(self, "axes", _product_axes(pts))
        object.__setattr__(self, "name", name or f"custom{pts.size}")
        object.__setattr__(self, "_key", np.round(pts, 14).tobytes())

    def __setattr__(self, key, value):
        raise AttributeError("Constellation is immutable")

    def __reduce__(self):
        return (Constellation, (self.points.copy(), self.name))

    def __eq__(self, other):
        return isinstance(other, Constellation) and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __repr__(self):
        return f"Constellation({self.name}, M={self.order})"

    @property
    def bits(self) -> float:
        return float(np.log2(self.order))

    @property
    def separable(self) -> bool:
        return self.axes is not None

    @classmethod
    def normalized(cls, points: Iterable[complex], name: Optional[str] = None) -> "Constellation":
        """Build from arbitrary points, rescaling to unit average power."""
        pts = np.asarray(list(points), dtype=complex).ravel()
        scale = np.sqrt(np.mean(np.abs(pts) ** 2))
        if not scale > 0:
            raise InvalidConstellation("all-zero point set cannot be normalized")
        return cls(pts / scale, name=name)


def _product_axes(pts: np.ndarray) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    re = np.unique(np.round(pts.real, 12))
    im = np.unique(np.round(pts.imag, 12))
    if re.size * im.size != pts.size:
        return None
    grid = {(a, b) for a in re for b in im}
    have = {(a, b) for a, b in zip(np.round(pts.real, 12), np.round(pts.imag, 12))}
    if grid != have:
        return None
    # exact coordinates, one representative per rounded level
    _, i_re = np.unique(np.round(pts.real, 12), return_index=True)
    _, i_im = np.unique(np.round(pts.imag, 12), return_index=True)
    return _frozen(pts.real[i_re]), _frozen(pts.imag[i_im])


def _gray_decode(g: int) -> int:
    b = 0
    while g:
        b ^= g
        g >>= 1
    return b


def make_qam(order: int) -> Constellation:
    """Square M-QAM in Gray label order, scaled to unit average power.

    Raises UnsupportedOrder unless ``order`` is an even power of two >= 4.
    """
    order = int(order)
    side = int(round(np.sqrt(order)))
    if order < 4 or side * side != order or side & (side - 1):
        raise UnsupportedOrder(f"square QAM needs M = 4, 16, 64, ...; got {order}")
    half_bits = side.bit_length() - 1
    levels = 2.0 * np.arange(side) - (side - 1)
    pts = []
    for label in range(order):
        i_bits, q_bits = label >> half_bits, label & (side - 1)
        pts.append(complex(levels[_gray_decode(i_bits)], levels[_gray_decode(q_bits)]))
    pts = np.asarray(pts) / np.sqrt(2.0 * (order - 1) / 3.0)
    # rescale away the last ulp so the unit-power check is exact
    pts = pts / np.sqrt(np.mean(np.abs(pts) ** 2))
    return Constellation(pts, name=f"qam{order}")


def make_psk(order: int, phase: float = 0.0) -> Constellation:
    """M-PSK on the unit circle (not separable for M > 4)."""
    if order < 2:
        raise UnsupportedOrder(f"PSK order must be >= 2, got {order}")
    k = np.arange(order)
    return Constellation(np.exp(1j * (2 * np.pi * k / order + phase)), name=f"psk{order}")


def make_pam(order: int) -> Constellation:
    """Real-valued M-PAM (the imaginary axis carries nothing)."""
    if order < 2:
        raise UnsupportedOrder(f"PAM order must be >= 2, got {order}")
    levels = 2.0 * np.arange(order) - (order - 1)
    return Constellation.normalized(levels.astype(complex), name=f"pam{order}")


def mean_abs(c: Constellation) -> float:
    """E{|X|}, which sets the optical safe-approximation budget 4 P_o^2 / E^2{|X|}."""
    return c.mean_abs


def from_name(name: str) -> Constellation:
    """Resolve a config string such as ``qam4``, ``qam16``, ``psk8`` or ``pam4``."""
    key = name.strip().lower().replace("-", "")
    for prefix, factory in (("qam", make_qam), ("psk", make_psk), ("pam", make_pam)):
        if key.startswith(prefix) and key[len(prefix):].isdigit():
            return factory(int(key[len(prefix):]))
    if key in ("qpsk",):
        return make_qam(4)
    if key in ("bpsk",):
        return make_pam(2)
    raise UnsupportedOrder(f"unknown modulation {name!r}")
