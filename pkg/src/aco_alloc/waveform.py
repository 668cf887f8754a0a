"""Time-domain ACO-OFDM synthesis, used to check clipping and optical-power formulas.

DFT convention: x_k = (1/sqrt(2N)) sum_l X_l exp(+j 2 pi k l / (2N)), so the
forward transform is X_l = (1/sqrt(2N)) sum_k x_k exp(-j 2 pi k l / (2N)).
Frames are batched along the first axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .constellation import Constellation
from .errors import DimensionMismatch, OutOfDomain, TooFewSamples

MIN_FRAMES = 10_000


@dataclass(frozen=True)
class OfdmFrame:
    """A batch of frames: arrays of shape (frames, 2N)."""

    freq_symbols: np.ndarray
    time_samples: np.ndarray
    clipped: np.ndarray

    @property
    def size(self) -> int:
        return self.freq_symbols.shape[-1]

    def __len__(self):
        return self.freq_symbols.shape[0]


def hermitian_spectrum(symbols, powers, n: int) -> np.ndarray:
    """Place sqrt(p_i) X_i on odd bin 2i-1 and the conjugate on bin 2N-(2i-1)."""
    symbols = np.atleast_2d(np.asarray(symbols, dtype=complex))
    powers = np.asarray(getattr(powers, "powers", powers), dtype=float)
    n_data = n // 2
    if symbols.shape[-1] != n_data or powers.shape != (n_data,):
        raise DimensionMismatch(
            f"need {n_data} symbols and powers per frame, got {symbols.shape[-1]} and {powers.shape}"
        )
    if np.any(powers < 0):
        raise OutOfDomain("powers must be >= 0")
    spec = np.zeros((symbols.shape[0], 2 * n), dtype=complex)
    odd = 2 * np.arange(n_data) + 1
    spec[:, odd] = symbols * np.sqrt(powers)
    spec[:, 2 * n - odd] = np.conj(spec[:, odd])
    return spec


def clip(frame: OfdmFrame) -> OfdmFrame:
    return OfdmFrame(frame.freq_symbols, frame.time_samples, np.maximum(frame.time_samples, 0.0))


def synthesize(symbols, powers, n: int) -> OfdmFrame:
    """Frames for ``symbols`` of shape (frames, N/2) or (N/2,) under allocation ``powers``."""
    spec = hermitian_spectrum(symbols, powers, n)
    x = np.fft.ifft(spec, axis=-1) * math.sqrt(2 * n)
    imag = float(np.max(np.abs(x.imag), initial=0.0))
    scale = float(np.max(np.abs(x.real), initial=0.0))
    if imag > 1e-12 * max(scale, 1.0):
        raise DimensionMismatch(f"spectrum is not Hermitian (imaginary residue {imag:.3g})")
    x = x.real
    return OfdmFrame(spec, x, np.maximum(x, 0.0))


def antisymmetry_error(frame: OfdmFrame) -> float:
    """max |x_l + x_{l+N}|."""
    x = frame.time_samples
    half = x.shape[-1] // 2
    return float(np.max(np.abs(x[..., :half] + x[..., half:]), initial=0.0))


def half_amplitude_check(frame: OfdmFrame) -> float:
    """Max deviation of the clipped signal's odd bins from half the transmitted symbols,
    relative to the largest transmitted odd-bin amplitude (0 for an all-zero frame)."""
    two_n = frame.size
    y = np.fft.fft(frame.clipped, axis=-1) / math.sqrt(two_n)
    odd = np.arange(1, two_n, 2)
    ref = frame.freq_symbols[..., odd]
    scale = float(np.max(np.abs(ref), initial=0.0))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(y[..., odd] - 0.5 * ref))) / scale


def empirical_optical_power(frames: OfdmFrame) -> float:
    """Sample mean of the clipped samples over all frames."""
    if len(frames) < MIN_FRAMES:
        raise TooFewSamples(f"need at least {MIN_FRAMES} frames, got {len(frames)}")
    return float(frames.clipped.mean())


def mean_electrical_power(frames: OfdmFrame, clipped: bool = False) -> float:
    """Sum over the 2N samples of the per-sample mean square, averaged over frames."""
    x = frames.clipped if clipped else frames.time_samples
    return float((x**2).sum(axis=-1).mean())


def random_symbols(rng: np.random.Generator, frames: int, n_data: int, c: Constellation | None = None) -> np.ndarray:
    """Unit-power symbols: uniform draws from ``c``, or CN(0, 1) when ``c`` is None."""
    if c is None:
        return (rng.standard_normal((frames, n_data)) + 1j * rng.standard_normal((frames, n_data))) * math.sqrt(0.5)
    return c.points[rng.integers(0, c.order, size=(frames, n_data))]


def gaussian_optical_power(total_power: float, n: int) -> float:
    """Closed-form optical power sqrt(sum p / (pi N)) for Gaussian symbols."""
    return math.sqrt(total_power / (math.pi * n))


def clipped_gaussian_mean(total_power: float, n: int) -> float:
    """E[max(x, 0)] for x ~ N(0, sum p / N), the sample law under this DFT convention."""
    return math.sqrt(total_power / (2 * math.pi * n))


def optical_power_bound(powers, c: Constellation, n: int) -> float:
    """Upper bound (1/sqrt(2N)) sum sqrt(p_i) E|X| on the optical power."""
    p = np.asarray(getattr(powers, "powers", powers), dtype=float)
    return float(np.sqrt(p).sum() * c.mean_abs / math.sqrt(2 * n))


def dump_frame(frame: OfdmFrame, path, index: int = 0) -> None:
    """Write one frame as whitespace-separated columns: index, x, clipped x."""
    x = frame.time_samples[index]
    xc = frame.clipped[index]
    with Path(path).open("w") as fh:
        fh.write("index x x_clipped\n")
        for k, (a, b) in enumerate(zip(x, xc)):
            fh.write(f"{k} {a:.17g} {b:.17g}\n")
