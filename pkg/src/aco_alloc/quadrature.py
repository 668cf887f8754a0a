"""Noise-expectation rules and the finite-alphabet MI / MMSE kernels.

All kernels work in the normalized channel ``Y = sqrt(snr) X + Z`` with
``Z ~ CN(0, 1)`` and return mutual information in nats. A product-set
constellation (square QAM, PAM) is handled one real axis at a time, where
each axis sees ``N(0, 1/2)`` noise; the results add across axes, which is
exactly what a tensor-product rule over the complex plane gives.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np

from .constellation import Constellation
from .errors import InvalidParams, QuadratureFailure

METHODS = ("trapezoid", "gauss-hermite", "monte-carlo")

# elements per (snr, n, k, node) block before the snr axis is chunked
_BLOCK = 2_000_000


@dataclass(frozen=True)
class QuadratureSpec:
    """How to take expectations over the receiver noise.

    ``trapezoid`` is a uniform grid on [-half_width, half_width] per real
    dimension; it is spectrally accurate for these Gaussian-weighted analytic
    integrands and stays accurate at high SNR, where a 32-node Gauss-Hermite
    rule does not. ``monte-carlo`` draws ``sample_count`` noise samples from a
    Philox stream seeded with ``seed`` (common random numbers across SNRs).
    """

    method: str = "trapezoid"
    nodes_per_dim: int = 801
    half_width: float = 8.0
    sample_count: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidParams(f"quadrature method must be one of {METHODS}, got {self.method!r}")
        if self.method == "monte-carlo":
            if self.sample_count < 10_000:
                raise InvalidParams("monte-carlo needs sample_count >= 1e4")
        elif self.nodes_per_dim < 8:
            raise InvalidParams("nodes_per_dim must be >= 8")
        if not self.half_width > 0:
            raise InvalidParams("half_width must be > 0")
        if not 0 <= self.seed < 2**64:
            raise InvalidParams("seed must be an unsigned 64-bit integer")

    def coarser(self) -> "QuadratureSpec":
        """Half-resolution rule, used for a posteriori error estimates."""
        from dataclasses import replace

        if self.method == "monte-carlo":
            return replace(self, sample_count=self.sample_count // 2, seed=self.seed + 1)
        return replace(self, nodes_per_dim=max(8, self.nodes_per_dim // 2))


@lru_cache(maxsize=64)
def noise_rule(spec: QuadratureSpec, dims: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and normalized weights for the noise of one real axis (dims=1,
    variance 1/2) or of the complex plane (dims=2, CN(0, 1))."""
    if spec.method == "monte-carlo":
        rng = np.random.Generator(np.random.Philox(spec.seed))
        n = spec.sample_count
        if dims == 1:
            nodes = rng.standard_normal(n) * np.sqrt(0.5)
        else:
            nodes = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * np.sqrt(0.5)
        weights = np.full(n, 1.0 / n)
    else:
        if spec.method == "trapezoid":
            t = np.linspace(-spec.half_width, spec.half_width, spec.nodes_per_dim)
            w = np.exp(-t * t)
        else:
            t, w = np.polynomial.hermite.hermgauss(spec.nodes_per_dim)
        w = w / w.sum()
        if dims == 1:
            nodes, weights = t, w
        else:
            nodes = (t[:, None] + 1j * t[None, :]).ravel()
            weights = (w[:, None] * w[None, :]).ravel()
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _axes(c: Constellation):
    """Per-axis alphabets: two real level sets, or the complex points."""
    if c.separable:
        return [(np.asarray(a, float), 1) for a in c.axes if len(a) > 1]
    return [(np.asarray(c.points), 2)]


def _axis_kernel(x, snr, nodes, w, want_mi, want_mmse, want_slope):
    """Statistics of one axis for a vector of SNRs.

    Returns (mi_nats, mi_sq, mmse, slope), each of shape snr.shape; ``mi_sq``
    is the second moment of the per-node deficit (for Monte Carlo errors).
    """
    K = x.size
    out_mi = np.zeros(snr.shape)
    out_mi2 = np.zeros(snr.shape)
    out_mmse = np.zeros(snr.shape)
    out_slope = np.zeros(snr.shape)
    dx = x[:, None] - x[None, :]  # x_n - x_k
    per = K * K * nodes.size
    chunk = max(1, _BLOCK // per)
    for lo in range(0, snr.size, chunk):
        s = snr[lo:lo + chunk]
        amp = np.sqrt(s)[:, None, None]
        d = amp * dx  # (S, n, k)
        # exponent -( |d + z|^2 - |z|^2 ), identical to the posterior log-weights up to a shift
        if np.iscomplexobj(nodes) or np.iscomplexobj(d):
            e = -(np.abs(d) ** 2)[..., None] - 2.0 * (d[..., None] * np.conj(nodes)).real
        else:
            e = -(d * d)[..., None] - 2.0 * d[..., None] * nodes
        m = e.max(axis=2, keepdims=True)
        ex = np.exp(e - m)
        if want_mi:
            # log sum_k exp(e_k) = m + log1p(sum_{k != argmax} exp(e_k - m)), exact for tiny tails
            arg = np.argmax(e, axis=2)
            mask = np.arange(K)[None, None, :, None] == arg[:, :, None, :]
            others = np.where(mask, 0.0, ex).sum(axis=2)
            lse = m[:, :, 0, :] + np.log1p(others)
            per_node = lse.mean(axis=1)  # average over the transmitted point
            out_mi[lo:lo + chunk] = np.log(K) - per_node @ w
            out_mi2[lo:lo + chunk] = (per_node**2) @ w
        if want_mmse or want_slope:
            post = ex / ex.sum(axis=2, keepdims=True)
            # x_n - xhat, computed from the differences to avoid cancellation
            err_vec = np.einsum("snkz,nk->snz", post, dx)
            if want_mmse:
                out_mmse[lo:lo + chunk] = (np.abs(err_vec) ** 2).mean(axis=1) @ w
            if want_slope:
                # deviations x_k - xhat = err_vec - dx_nk
                u = err_vec[:, :, None, :] - dx[None, :, :, None]
                if np.iscomplexobj(u):
                    a = np.sum(post * u.real**2, axis=2)
                    b = np.sum(post * u.imag**2, axis=2)
                    c = np.sum(post * u.real * u.imag, axis=2)
                    tr2 = a * a + b * b + 2 * c * c
                else:
                    v = np.sum(post * u * u, axis=2)
                    tr2 = v * v
                out_slope[lo:lo + chunk] = -2.0 * (tr2.mean(axis=1) @ w)
    return out_mi, out_mi2, out_mmse, out_slope


def _evaluate(c: Constellation, snr, spec: QuadratureSpec, mi=False, mmse=False, slope=False):
    snr = np.asarray(snr, dtype=float)
    if np.any(snr < 0) or not np.all(np.isfinite(snr)):
        raise QuadratureFailure("snr must be finite and >= 0")
    flat = snr.ravel()
    res_mi = np.zeros(flat.shape)
    res_var = np.zeros(flat.shape)
    res_mmse = np.zeros(flat.shape)
    res_slope = np.zeros(flat.shape)
    for x, dims in _axes(c):
        nodes, w = noise_rule(spec, dims)
        a, a2, b, d = _axis_kernel(x, flat, nodes, w, mi, mmse, slope)
        res_mi += a
        res_mmse += b
        res_slope += d
        if spec.method == "monte-carlo":
            deficit = np.log(x.size) - a
            res_var += np.maximum(a2 - deficit**2, 0.0) / w.size
    for arr in (res_mi, res_mmse, res_slope):
        if not np.all(np.isfinite(arr)):
            raise QuadratureFailure("non-finite value in quadrature")
    shape = snr.shape
    return (
        res_mi.reshape(shape),
        np.sqrt(res_var).reshape(shape),
        res_mmse.reshape(shape),
        res_slope.reshape(shape),
    )


def mi_nats(c: Constellation, snr, spec: QuadratureSpec) -> np.ndarray:
    """I(X; sqrt(snr) X + Z) in nats per complex channel use."""
    return _evaluate(c, snr, spec, mi=True)[0]


def mi_nats_with_error(c: Constellation, snr, spec: QuadratureSpec):
    """MI in nats plus a standard-error estimate.

    Monte Carlo: sample standard error. Deterministic rules: the difference
    to the half-resolution rule, a conservative bound on the discretization error.
    """
    val, se, _, _ = _evaluate(c, snr, spec, mi=True)
    if spec.method != "monte-carlo":
        se = np.abs(val - mi_nats(c, snr, spec.coarser()))
    return val, se


def mmse_value(c: Constellation, snr, spec: QuadratureSpec) -> np.ndarray:
    return _evaluate(c, snr, spec, mmse=True)[2]


def mmse_and_slope(c: Constellation, snr, spec: QuadratureSpec):
    """MMSE and its derivative d mmse / d snr = -2 E[tr Cov(X|Y)^2]."""
    _, _, m, s = _evaluate(c, snr, spec, mmse=True, slope=True)
    return m, s
