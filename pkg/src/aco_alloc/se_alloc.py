"""Spectral-efficiency maximizing power allocation over the odd subcarriers.

All three rate models share one optimality structure: on every active
subcarrier ``g_i * marginal(g_i p_i) = lam`` with ``g_i`` the SNR per watt.
``level_powers`` maps a level ``lam`` to that allocation; the solvers pick
``lam`` so the budget is met.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .channel import ChannelState
from .constellation import Constellation
from .errors import BisectionFailure, Infeasible, OutOfDomain, SolverFailure
from .params import SystemParams
from .quadrature import QuadratureSpec
from .rates import (
    LN2,
    SATURATION_MMSE,
    FiniteAlphabet,
    Gaussian,
    LowerBound,
    RateModel,
    spectral_efficiency,
)


@dataclass(frozen=True)
class PowerAllocation:
    """Electrical powers on the odd subcarriers 1, 3, ..., N-1 (even ones are zero)."""

    powers: np.ndarray

    def __post_init__(self):
        p = np.array(self.powers, dtype=float).ravel()
        if np.any(~np.isfinite(p)) or np.any(p < 0):
            raise OutOfDomain("powers must be finite and >= 0")
        p.setflags(write=False)
        object.__setattr__(self, "powers", p)

    @property
    def total(self) -> float:
        return float(self.powers.sum())

    @property
    def active(self) -> int:
        return int(np.count_nonzero(self.powers))

    def full_spectrum(self) -> np.ndarray:
        """Powers on all 2N subcarriers with the Hermitian mirror filled in."""
        n_data = self.powers.size
        out = np.zeros(4 * n_data)
        odd = 2 * np.arange(n_data) + 1
        out[odd] = self.powers
        out[4 * n_data - odd] = self.powers
        return out


@dataclass
class AllocationResult:
    alloc: PowerAllocation
    objective: float
    dual: float
    iterations: int
    kkt_residual: float
    budget_used: float
    status: str = "ok"
    trace: List = field(default_factory=list)


def effective_budget(params: SystemParams, model: RateModel) -> float:
    """Electrical budget after folding in the optical-power constraint."""
    if params.optical_budget is None:
        return params.power_budget
    po = params.optical_budget
    if isinstance(model, Gaussian):
        cap = params.n * math.pi * po**2
    else:
        cap = 4.0 * po**2 / model.constellation.mean_abs**2
    return min(params.power_budget, cap)


# ---------------------------------------------------------------------------
# the level family


def _saturates(model) -> bool:
    return isinstance(model, FiniteAlphabet)


def level_powers(lam: float, g: np.ndarray, model: RateModel) -> np.ndarray:
    """Allocation whose per-subcarrier marginal rate equals ``lam`` where active.

    ``lam = 0`` means every subcarrier at its saturation point (finite-alphabet)
    and is rejected for models that never saturate.
    """
    g = np.asarray(g, dtype=float)
    phi0 = float(model.marginal(0.0))
    p = np.zeros_like(g)
    usable = g > 0
    t = np.full_like(g, np.inf)
    t[usable] = lam / g[usable]
    if _saturates(model):
        t = np.maximum(t, SATURATION_MMSE)
    elif lam <= 0:
        raise OutOfDomain("level must be > 0 for a non-saturating model")
    active = usable & (t < phi0)
    if np.any(active):
        p[active] = model.marginal_inverse(t[active]) / g[active]
    return p


def _saturated_powers(g, model):
    p = np.zeros_like(g)
    usable = g > 0
    p[usable] = model.saturation_snr / g[usable]
    return p


def _water_level(g: np.ndarray, budget: float):
    """Exact water level for Gaussian inputs: p = [w - 1/g]^+, sum p = budget."""
    usable = g > 0
    inv = np.sort(1.0 / g[usable])
    csum = np.cumsum(inv)
    k = np.arange(1, inv.size + 1)
    levels = (budget + csum) / k
    # largest k whose floor lies below its level
    ok = levels > inv
    kk = int(np.nonzero(ok)[0].max()) + 1
    return float(levels[kk - 1])


def solve_level(g: np.ndarray, budget: float, model: RateModel, rtol: float = 1e-14, max_iter: int = 400):
    """Find the level whose allocation uses ``budget``.

    Returns (lam, powers, iterations, saturated). Newton on the budget equation,
    safeguarded by geometric bisection on the bracket (lo, max_i g_i * marginal(0)].
    """
    g = np.asarray(g, dtype=float)
    if not budget > 0:
        raise Infeasible(f"budget must be > 0, got {budget}")
    if not np.any(g > 0):
        raise Infeasible("all subcarriers have zero gain")
    if isinstance(model, Gaussian):
        w = _water_level(g, budget)
        p = np.where(g > 0, np.maximum(w - 1.0 / np.where(g > 0, g, 1.0), 0.0), 0.0)
        return 1.0 / w, p, 1, False
    if _saturates(model):
        sat = _saturated_powers(g, model)
        if sat.sum() <= budget:
            return 0.0, sat, 0, True
    hi = float(np.max(g) * model.marginal(0.0))
    lo = hi / 2
    it = 0
    while level_powers(lo, g, model).sum() < budget:
        hi, lo = lo, lo / 2
        it += 1
        if it > 2000:
            raise BisectionFailure("could not bracket the level")
    p_hi = level_powers(hi, g, model)
    lam = math.sqrt(lo * hi)
    for _ in range(max_iter):
        it += 1
        p = level_powers(lam, g, model)
        total = p.sum()
        if total > budget:
            lo = lam
        else:
            hi, p_hi = lam, p
        if hi / lo - 1.0 <= rtol or budget - p_hi.sum() <= rtol * budget:
            return hi, p_hi, it, False
        # Newton on sum p(lam) = budget; dp_i/dlam = 1 / (g_i^2 marginal'(g_i p_i))
        step = None
        act = p > 0
        if _saturates(model):
            act &= g * p < model.saturation_snr * (1 - 1e-12)
        if np.any(act):
            slope = float(np.sum(1.0 / (g[act] ** 2 * model.marginal_slope(g[act] * p[act]))))
            if slope < 0:
                step = lam - (total - budget) / slope
        if step is None or not lo < step < hi:
            step = math.sqrt(lo * hi)
        lam = step
    raise BisectionFailure("level search did not converge")


def level_kkt_residual(p: np.ndarray, g: np.ndarray, lam: float, model: RateModel) -> float:
    """Largest violation of the equal-marginal conditions.

    Active subcarriers: |g * marginal(g p) - lam|; inactive: (g * marginal(0) - lam)^+.
    Saturated finite-alphabet subcarriers are exempt from the equality.
    """
    g = np.asarray(g, dtype=float)
    usable = g > 0
    snr = g * p
    marg = g * model.marginal(snr)
    active = usable & (p > 0)
    if _saturates(model):
        active &= snr < model.saturation_snr * (1 - 1e-9)
    res = 0.0
    if np.any(active):
        res = float(np.max(np.abs(marg[active] - lam)))
    idle = usable & (p == 0)
    if np.any(idle):
        res = max(res, float(np.max(np.maximum(marg[idle] - lam, 0.0))))
    return res


def _result(p, ch, model, params, lam, it, kkt, status="ok") -> AllocationResult:
    alloc = PowerAllocation(p)
    return AllocationResult(
        alloc=alloc,
        objective=spectral_efficiency(alloc, ch, model, params),
        dual=lam,
        iterations=it,
        kkt_residual=kkt,
        budget_used=alloc.total,
        status=status,
    )


# ---------------------------------------------------------------------------
# solvers


def waterfill(ch: ChannelState, budget: float, params: SystemParams) -> AllocationResult:
    """Water-filling for Gaussian inputs.

    ``dual`` is mu with water level 1/(2 N mu ln 2); ``kkt_residual`` is the
    spread of p + 4 sigma^2 W / |H|^2 over the active subcarriers.
    """
    g = ch.snr_per_watt(params)
    model = Gaussian()
    lam, p, it, _ = solve_level(g, budget, model)
    level = 1.0 / lam
    active = p > 0
    floor = 1.0 / g[active]
    spread = float(np.max(np.abs(p[active] + floor - level)))
    idle = (g > 0) & ~active
    if np.any(idle):
        spread = max(spread, float(np.max(np.maximum(level - 1.0 / g[idle], 0.0))))
    mu = 1.0 / (2 * params.n * LN2 * level)
    return _result(p, ch, model, params, mu, it, spread)


def mercury_waterfill(
    ch: ChannelState,
    budget: float,
    c: Constellation,
    params: SystemParams,
    q: Optional[QuadratureSpec] = None,
) -> AllocationResult:
    """Mercury water-filling for an equiprobable discrete input.

    ``dual`` is the common marginal lam = g_i mmse(g_i p_i). When the budget
    exceeds what saturates every subcarrier the surplus stays unused, lam = 0
    and the status is ``saturated``.
    """
    model = FiniteAlphabet(c, q or QuadratureSpec())
    g = ch.snr_per_watt(params)
    lam, p, it, saturated = solve_level(g, budget, model)
    kkt = level_kkt_residual(p, g, lam, model)
    return _result(p, ch, model, params, lam, it, kkt, "saturated" if saturated else "ok")


def project_budget_simplex(v: np.ndarray, budget: float) -> np.ndarray:
    """Euclidean projection onto {p >= 0, sum p <= budget}."""
    p = np.maximum(v, 0.0)
    if p.sum() <= budget:
        return p
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - budget
    k = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def _lower_pg(g, budget, model: LowerBound, tol, max_iter):
    """Projected gradient ascent with Barzilai-Borwein steps and Armijo backtracking.

    Stops at relative KKT residual ``tol`` or once the objective has not
    moved beyond rounding for 50 iterations.
    """

    def obj(p):
        return float(model.bits(g * p).sum())

    def grad(p):
        return g * model.marginal(g * p) / LN2

    usable = g > 0
    p = np.where(usable, budget / max(int(usable.sum()), 1), 0.0)
    f = obj(p)
    d = grad(p)
    step = 1.0 / float(np.max(g * g))
    lam = 0.0
    stalled = 0
    for it in range(1, max_iter + 1):
        while True:
            cand = project_budget_simplex(p + step * d, budget)
            cand[~usable] = 0.0
            fc = obj(cand)
            if fc >= f + 1e-4 * float(d @ (cand - p)) or step < 1e-300:
                break
            step *= 0.5
        # objective flat to rounding: further progress is not representable
        stalled = stalled + 1 if fc <= f + 4 * np.finfo(float).eps * abs(f) else 0
        dc = grad(cand)
        s, y = cand - p, dc - d
        p, f, d = cand, fc, dc
        active = p > 0
        lam = float(np.max(d[active])) * LN2 if np.any(active) else 0.0
        kkt = level_kkt_residual(p, g, lam, model)
        if kkt <= tol * lam or stalled >= 50:
            return p, lam, it, kkt
        sy = float(s @ y)
        step = float(s @ s) / -sy if sy < 0 else step * 2.0
    raise SolverFailure(f"projected gradient did not converge in {max_iter} iterations")


def lower_bound_se_opt(
    ch: ChannelState,
    budget: float,
    c: Constellation,
    params: SystemParams,
    method: str = "projected-gradient",
    tol: float = 1e-8,
    max_iter: int = 20_000,
) -> AllocationResult:
    """Maximize the summed closed-form lower bound under the power budget.

    ``method="projected-gradient"`` runs a generic concave maximizer;
    ``method="level"`` solves the equal-marginal conditions by bisection.
    ``dual`` is the common marginal level in nats per unit SNR times g.
    """
    if not budget > 0:
        raise Infeasible(f"budget must be > 0, got {budget}")
    model = LowerBound(c)
    g = ch.snr_per_watt(params)
    if method == "level":
        lam, p, it, _ = solve_level(g, budget, model)
        kkt = level_kkt_residual(p, g, lam, model)
    elif method == "projected-gradient":
        p, lam, it, kkt = _lower_pg(g, budget, model, tol, max_iter)
    else:
        raise OutOfDomain(f"unknown method {method!r}")
    return _result(p, ch, model, params, lam, it, kkt)


def se_optimize(ch: ChannelState, params: SystemParams, model: RateModel) -> AllocationResult:
    """SE-optimal allocation for any model at its effective budget."""
    budget = effective_budget(params, model)
    if isinstance(model, Gaussian):
        return waterfill(ch, budget, params)
    if isinstance(model, FiniteAlphabet):
        return mercury_waterfill(ch, budget, model.constellation, params, model.quadrature)
    return lower_bound_se_opt(ch, budget, model.constellation, params)
