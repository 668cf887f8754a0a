"""Per-subcarrier achievable rates, the MMSE function, and SE/EE metrics.

Every model is written against the effective SNR ``snr = p |H|^2 / (4 sigma^2 W)``.
A model exposes, per complex channel use:

* ``bits(snr)``: rate in bits,
* ``marginal(snr)``: d(nats)/d(snr), the quantity the allocators equalize,
* ``marginal_inverse(t)``: the snr at which the marginal equals ``t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Union

import numpy as np

from . import quadrature as quad
from .channel import ChannelState
from .constellation import Constellation
from .errors import BisectionFailure, DimensionMismatch, OutOfDomain
from .params import SystemParams
from .quadrature import QuadratureSpec

LN2 = math.log(2.0)

# MMSE below which a finite-alphabet subcarrier counts as saturated
SATURATION_MMSE = 1e-6


def _powers(alloc) -> np.ndarray:
    return np.asarray(getattr(alloc, "powers", alloc), dtype=float)


def effective_snr(p, H, params: SystemParams) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise OutOfDomain("powers must be >= 0")
    return p * np.abs(np.asarray(H)) ** 2 / params.noise_floor


# ---------------------------------------------------------------------------
# monotone inversion


def invert_decreasing(fn, target, hi_start=1.0, rtol=1e-13, max_iter=200, table=None):
    """Solve fn(s) = target for s >= 0 where fn is strictly decreasing.

    ``fn(s)`` returns (value, derivative) arrays. Safeguarded Newton on
    log fn, falling back to bisection inside a maintained bracket.
    Targets at or above fn(0) map to 0. ``table`` is an optional pair
    (snr grid, fn values) used to bracket and seed the iteration.
    """
    t = np.atleast_1d(np.asarray(target, dtype=float)).copy()
    f0 = float(table[1][0]) if table is not None else float(fn(np.zeros(1))[0][0])
    out = np.zeros_like(t)
    todo = t < f0 * (1.0 - 1e-14)
    if not np.any(todo):
        return out.reshape(np.shape(target))
    tt = t[todo]
    if table is not None:
        grid, vals = table
        # vals decreasing: first index with vals[j] <= t
        j = np.searchsorted(-vals, -tt, side="left")
        inside = j < grid.size
        jj = np.minimum(j, grid.size - 1)
        lo = np.where(inside, grid[np.maximum(jj - 1, 0)], grid[-1])
        hi = np.where(inside, grid[jj], grid[-1] * 2.0)
        v_lo, v_hi = vals[np.maximum(jj - 1, 0)], vals[jj]
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.log(v_lo / tt) / np.log(v_lo / v_hi)
        s = np.where(inside & np.isfinite(frac), lo + np.clip(frac, 0.05, 0.95) * (hi - lo), 0.5 * (lo + hi))
    else:
        lo = np.zeros_like(tt)
        hi = np.full_like(tt, hi_start)
        s = None
    for _ in range(2000):
        v, _ = fn(hi)
        grow = v > tt
        if not np.any(grow):
            break
        lo = np.where(grow, hi, lo)
        hi = np.where(grow, hi * 2.0, hi)
        if s is not None:
            s = np.where(grow, 0.5 * (lo + hi), s)
    else:
        raise BisectionFailure("could not bracket the inverse")
    if s is None:
        s = 0.5 * (lo + hi)
    done = np.zeros(tt.shape, bool)
    for _ in range(max_iter):
        v, dv = fn(s)
        g = np.log(v) - np.log(tt)
        lo = np.where(g > 0, s, lo)
        hi = np.where(g <= 0, s, hi)
        done |= (np.abs(g) <= rtol) | (hi - lo <= rtol * hi)
        if np.all(done):
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            step = s - g * v / dv
        bad = ~np.isfinite(step) | (step <= lo) | (step >= hi)
        mid = np.where(lo > 0, np.sqrt(lo * hi), 0.5 * hi)
        s = np.where(done, s, np.where(bad, mid, step))
    else:
        raise BisectionFailure("inverse did not converge")
    out[todo] = s
    return out.reshape(np.shape(target))


# ---------------------------------------------------------------------------
# rate models


@dataclass(frozen=True)
class Gaussian:
    name = "gaussian"

    def bits(self, snr):
        return np.log2(1.0 + np.asarray(snr, dtype=float))

    def marginal(self, snr):
        return 1.0 / (1.0 + np.asarray(snr, dtype=float))

    def marginal_slope(self, snr):
        return -1.0 / (1.0 + np.asarray(snr, dtype=float)) ** 2

    def marginal_inverse(self, t):
        t = np.asarray(t, dtype=float)
        return np.maximum(1.0 / t - 1.0, 0.0)

    @property
    def max_bits(self) -> float:
        return math.inf

    @property
    def saturation_snr(self) -> float:
        return math.inf


@dataclass(frozen=True)
class FiniteAlphabet:
    """Exact mutual information of an equiprobable discrete input."""

    constellation: Constellation
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)
    name = "finite"

    def bits(self, snr):
        return quad.mi_nats(self.constellation, snr, self.quadrature) / LN2

    def marginal(self, snr):
        return quad.mmse_value(self.constellation, snr, self.quadrature)

    def marginal_slope(self, snr):
        return quad.mmse_and_slope(self.constellation, snr, self.quadrature)[1]

    def marginal_inverse(self, t):
        return _mmse_inverse_unchecked(t, self.constellation, self.quadrature)

    @property
    def max_bits(self) -> float:
        return self.constellation.bits

    @property
    def saturation_snr(self) -> float:
        return _saturation_snr(self.constellation, self.quadrature)


@dataclass(frozen=True)
class LowerBound:
    """Closed-form Jensen lower bound on the finite-alphabet rate."""

    constellation: Constellation
    name = "lower"

    def _terms(self, snr):
        x = self.constellation.points
        half_d2 = 0.5 * np.abs(x[:, None] - x[None, :]) ** 2  # (n, k)
        s = np.atleast_1d(np.asarray(snr, dtype=float))
        e = -s.reshape(-1, 1, 1) * half_d2  # (S, n, k)
        return e, half_d2, np.shape(snr)

    def _lse(self, snr):
        e, _, shape = self._terms(snr)
        off = np.exp(e)
        idx = np.arange(e.shape[1])
        off[:, idx, idx] = 0.0  # the k = n term is exp(0) = 1, kept exact via log1p
        return np.log1p(off.sum(axis=2)).mean(axis=1).reshape(shape)

    def bits(self, snr):
        # log2 M + 1 - 1/ln2 - (1/M) sum_n log2 sum_k exp(-snr |x_n - x_k|^2 / 2)
        return self.max_bits - self._lse(snr) / LN2

    def marginal(self, snr):
        e, half_d2, shape = self._terms(snr)
        w = np.exp(e)
        w /= w.sum(axis=2, keepdims=True)
        return (w * half_d2).sum(axis=2).mean(axis=1).reshape(shape)

    def marginal_slope(self, snr):
        e, half_d2, shape = self._terms(snr)
        w = np.exp(e)
        w /= w.sum(axis=2, keepdims=True)
        mean = (w * half_d2).sum(axis=2, keepdims=True)
        var = (w * (half_d2 - mean) ** 2).sum(axis=2)
        return (-var.mean(axis=1)).reshape(shape)

    def marginal_inverse(self, t):
        return invert_decreasing(lambda s: (self.marginal(s), self.marginal_slope(s)), t)

    @property
    def max_bits(self) -> float:
        return self.constellation.bits + 1.0 - 1.0 / LN2

    @property
    def saturation_snr(self) -> float:
        return math.inf


RateModel = Union[Gaussian, FiniteAlphabet, LowerBound]


def model_from_name(name: str, constellation: Constellation | None = None, q: QuadratureSpec | None = None) -> RateModel:
    key = name.strip().lower()
    if key == "gaussian":
        return Gaussian()
    if constellation is None:
        raise OutOfDomain(f"model {name!r} needs a constellation")
    if key in ("finite", "finite-alphabet"):
        return FiniteAlphabet(constellation, q or QuadratureSpec())
    if key in ("lower", "lower-bound"):
        return LowerBound(constellation)
    raise OutOfDomain(f"unknown rate model {name!r}")


# ---------------------------------------------------------------------------
# per-subcarrier rates in bits/s


def gaussian_rate(p, H, params: SystemParams):
    return params.bandwidth * np.log2(1.0 + effective_snr(p, H, params))


def fa_mutual_info(p, H, c: Constellation, params: SystemParams, q: QuadratureSpec | None = None):
    snr = effective_snr(p, H, params)
    return params.bandwidth * quad.mi_nats(c, snr, q or QuadratureSpec()) / LN2


def rate_lower_bound(p, H, c: Constellation, params: SystemParams):
    return params.bandwidth * LowerBound(c).bits(effective_snr(p, H, params))


def mmse(snr, c: Constellation, q: QuadratureSpec | None = None):
    snr = np.asarray(snr, dtype=float)
    if np.any(snr < 0):
        raise OutOfDomain("snr must be >= 0")
    return quad.mmse_value(c, snr, q or QuadratureSpec())


@lru_cache(maxsize=128)
def mmse_table(c: Constellation, q: QuadratureSpec):
    """Read-only (snr grid, mmse) samples, computed once per constellation and rule."""
    grid = np.concatenate(([0.0], np.logspace(-3, 3, 241)))
    vals = quad.mmse_value(c, grid, q)
    # keep the strictly decreasing prefix; beyond it the tail is below quadrature resolution
    keep = np.concatenate(([True], np.diff(vals) < 0))
    stop = np.argmin(keep) if not keep.all() else keep.size
    grid, vals = grid[:stop], vals[:stop]
    grid.setflags(write=False)
    vals.setflags(write=False)
    return grid, vals


def _mmse_inverse_unchecked(t, c, q):
    return invert_decreasing(lambda s: quad.mmse_and_slope(c, s, q), t, table=mmse_table(c, q))


def mmse_inverse(target, c: Constellation, q: QuadratureSpec | None = None):
    """The snr >= 0 with mmse(snr) = target, for 0 < target <= 1."""
    t = np.asarray(target, dtype=float)
    if np.any(~(t > 0)) or np.any(t > 1):
        raise OutOfDomain("mmse_inverse needs 0 < target <= 1")
    return _mmse_inverse_unchecked(t, c, q or QuadratureSpec())


@lru_cache(maxsize=128)
def _saturation_snr(c: Constellation, q: QuadratureSpec) -> float:
    return float(_mmse_inverse_unchecked(SATURATION_MMSE, c, q))


# ---------------------------------------------------------------------------
# aggregate metrics


def subcarrier_rates(alloc, ch: ChannelState, model: RateModel, params: SystemParams) -> np.ndarray:
    p = _powers(alloc)
    if p.shape != ch.gains.shape:
        raise DimensionMismatch(f"{p.size} powers for {ch.gains.size} subcarriers")
    return params.bandwidth * model.bits(effective_snr(p, ch.gains, params))


def total_rate(alloc, ch: ChannelState, model: RateModel, params: SystemParams) -> float:
    return float(np.sum(subcarrier_rates(alloc, ch, model, params)))


def spectral_efficiency(alloc, ch, model, params: SystemParams) -> float:
    return total_rate(alloc, ch, model, params) / params.total_bandwidth


def energy_efficiency(alloc, ch, model, params: SystemParams) -> float:
    return total_rate(alloc, ch, model, params) / (2.0 * float(np.sum(_powers(alloc))) + params.circuit_power)


def ee_from_rate(rate: float, sum_power: float, params: SystemParams) -> float:
    return rate / (2.0 * sum_power + params.circuit_power)
