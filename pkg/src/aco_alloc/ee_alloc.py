"""Energy-efficiency maximization with a minimum-rate constraint.

The ratio rate / (2 sum p + P_c) is maximized by Dinkelbach's method. Each
parametric subproblem ``max R(p) - q (2 sum p + P_c)`` over the feasible set
is solved exactly: its maximizer lies on the equal-marginal path p(lam) used
by the SE solvers, at lam = clip(2 q ln2 / W, lam_budget, lam_rate).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
import numpy as np
from scipy.optimize import brentq

from .channel import ChannelState
from .errors import BisectionFailure, InfeasibleQoS, InfeasibleSet, NonConvergence, OutOfDomain
from .params import SystemParams
from .rates import LN2, RateModel, subcarrier_rates
from .se_alloc import (
    AllocationResult,
    PowerAllocation,
    _saturates,
    effective_budget,
    level_powers,
    project_budget_simplex,
    solve_level,
)


@dataclass(frozen=True)
class DinkelbachState:
    q: float
    iteration: int
    f_value: float


@dataclass(frozen=True)
class FeasibleSet:
    """{p >= 0, sum p <= budget, total rate >= rate_floor} for one rate model."""

    budget: float
    rate_floor: float
    model: RateModel

    @classmethod
    def from_params(cls, params: SystemParams, model: RateModel) -> "FeasibleSet":
        return cls(effective_budget(params, model), params.rate_floor, model)

    def contains(self, p, ch: ChannelState, params: SystemParams, rtol: float = 1e-9) -> bool:
        p = np.asarray(getattr(p, "powers", p), dtype=float)
        if np.any(p < 0) or p.sum() > self.budget * (1 + rtol) + 1e-300:
            return False
        rate = float(subcarrier_rates(p, ch, self.model, params).sum())
        return rate >= self.rate_floor - rtol * max(self.rate_floor, params.bandwidth)


def _rate(p, g, model, params):
    return params.bandwidth * float(np.sum(model.bits(g * p)))


class _Path:
    """The equal-marginal path restricted to the feasible set: lam in [lam_budget, lam_rate]."""

    def __init__(self, ch: ChannelState, params: SystemParams, fs: FeasibleSet):
        self.g = ch.snr_per_watt(params)
        self.model = fs.model
        self.params = params
        self.lam_budget, self.p_budget, _, _ = solve_level(self.g, fs.budget, fs.model)
        self.max_rate = _rate(self.p_budget, self.g, fs.model, params)
        if self.max_rate < fs.rate_floor:
            raise InfeasibleQoS(
                f"rate floor {fs.rate_floor:.6g} b/s exceeds the best achievable {self.max_rate:.6g} b/s"
            )
        self.lam_top = float(np.max(self.g) * fs.model.marginal(0.0))
        zero_rate = _rate(np.zeros_like(self.g), self.g, fs.model, params)
        if zero_rate >= fs.rate_floor:
            self.lam_rate = math.inf
        elif self.max_rate == fs.rate_floor:
            self.lam_rate = self.lam_budget
        else:
            self.lam_rate = self._rate_level(fs.rate_floor)

    def powers(self, lam: float) -> np.ndarray:
        if lam <= self.lam_budget:
            return self.p_budget.copy()
        if lam >= self.lam_top:
            return np.zeros_like(self.g)
        return level_powers(lam, self.g, self.model)

    def _rate_level(self, r: float) -> float:
        lo = max(self.lam_budget, 1e-300)
        hi = self.lam_top

        def excess(log_lam):
            return _rate(self.powers(math.exp(log_lam)), self.g, self.model, self.params) - r

        if self.lam_budget <= 0:
            # saturated finite-alphabet budget: step down from the top until feasible
            lo = hi
            while excess(math.log(lo)) < 0:
                lo /= 2
                if lo < 1e-300:
                    raise BisectionFailure("could not bracket the rate-floor level")
        log_lam = brentq(excess, math.log(lo), math.log(hi), xtol=1e-15, rtol=1e-15, maxiter=500)
        # step to the feasible side of the root
        lam = math.exp(log_lam)
        while excess(math.log(lam)) < 0 and lam > lo:
            lam = max(lo, lam * (1 - 1e-14))
        return lam

    def optimum(self, q: float) -> np.ndarray:
        lam_free = 2.0 * q * LN2 / self.params.bandwidth
        return self.powers(min(max(lam_free, self.lam_budget), self.lam_rate))


def ee_subproblem(
    q: float,
    ch: ChannelState,
    params: SystemParams,
    model: RateModel,
    method: str = "exact",
) -> PowerAllocation:
    """Maximizer of R(p) - q (2 sum p + P_c) over the feasible set.

    ``exact`` moves along the equal-marginal path; ``projection`` takes the
    unconstrained stationary point and projects it onto the feasible set in
    the Euclidean sense, which is optimal only when the budget alone binds.
    """
    if not q >= 0:
        raise OutOfDomain(f"q must be >= 0, got {q}")
    fs = FeasibleSet.from_params(params, model)
    if method == "exact":
        return PowerAllocation(_Path(ch, params, fs).optimum(q))
    if method == "projection":
        g = ch.snr_per_watt(params)
        lam_free = 2.0 * q * LN2 / params.bandwidth
        if lam_free <= 0 and not _saturates(model):
            p_free = np.full_like(g, np.inf)
        else:
            p_free = level_powers(lam_free, g, model)
        if np.any(np.isinf(p_free)):
            # q = 0: the free maximizer is unbounded, so the budget binds
            return PowerAllocation(_Path(ch, params, fs).p_budget)
        return project_feasible(p_free, fs, ch, params)
    raise OutOfDomain(f"unknown method {method!r}")


def ee_maximize(
    ch: ChannelState,
    params: SystemParams,
    model: RateModel,
    tol: float = 1e-8,
    max_iter: int = 50,
) -> AllocationResult:
    """Dinkelbach iteration from q = 0; stops when |q_next - q| <= tol * q_next
    or when q stops increasing in floating point.

    ``dual`` is the final ratio q; ``trace`` lists the DinkelbachState of each
    iteration; ``kkt_residual`` is |f(p; q)| / (2 sum p + P_c) at the last step.
    """
    fs = FeasibleSet.from_params(params, model)
    path = _Path(ch, params, fs)
    g = path.g
    q = 0.0
    trace = []
    prev = None
    for it in range(1, max_iter + 1):
        p = path.optimum(q)
        rate = _rate(p, g, model, params)
        denom = 2.0 * float(p.sum()) + params.circuit_power
        f = rate - q * denom
        trace.append(DinkelbachState(q=q, iteration=it, f_value=f))
        q_next = rate / denom
        if q_next < q and prev is not None:
            # a decrease can only come from rounding; the previous iterate attains q
            p, q_next, f = prev, q, 0.0
        if abs(q_next - q) <= tol * abs(q_next) or q_next <= q:
            alloc = PowerAllocation(p)
            return AllocationResult(
                alloc=alloc,
                objective=q_next,
                dual=q_next,
                iterations=it,
                kkt_residual=abs(f) / denom,
                budget_used=alloc.total,
                trace=trace,
            )
        prev, q = p, q_next
    raise NonConvergence(f"Dinkelbach did not converge in {max_iter} iterations")


# ---------------------------------------------------------------------------
# Euclidean projection onto the feasible set


def _coordinate_solve(target, tau, nu, g, model, scale):
    """Per-coordinate minimizer of (p - target)^2 / 2 + tau p - nu * scale * rate_i(p) over p >= 0.

    Stationarity p + tau - nu * scale * g * marginal(g p) = target has an
    increasing left side, so the root is unique.
    """
    p = np.zeros_like(target)
    c = nu * scale * g
    phi0 = float(model.marginal(0.0))
    at_zero = tau - c * phi0 - target
    act = at_zero < 0
    if not np.any(act):
        return p
    t, cc, gg = target[act], c[act], g[act]
    lo = np.zeros_like(t)
    hi = np.maximum(t - tau + cc * phi0, 0.0) + 1e-300
    x = 0.5 * (lo + hi)
    for _ in range(200):
        h = x + tau - cc * model.marginal(gg * x) - t
        lo = np.where(h < 0, x, lo)
        hi = np.where(h >= 0, x, hi)
        dh = 1.0 - cc * gg * model.marginal_slope(gg * x)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = x - h / dh
        bad = ~np.isfinite(step) | (step <= lo) | (step >= hi)
        x_new = np.where(bad, 0.5 * (lo + hi), step)
        if np.all(np.abs(x_new - x) <= 1e-15 * np.maximum(hi, 1e-300)):
            x = x_new
            break
        x = x_new
    p[act] = x
    return p


def project_feasible(
    p_tilde,
    fs: FeasibleSet,
    ch: ChannelState,
    params: SystemParams,
) -> PowerAllocation:
    """Euclidean projection of ``p_tilde`` onto the feasible set.

    Budget only: the closed-form simplex projection. Rate floor active: nested
    one-dimensional dual searches over the rate multiplier and the budget
    multiplier. Feasibility of the returned point is certified.
    """
    v = np.asarray(getattr(p_tilde, "powers", p_tilde), dtype=float)
    g = ch.snr_per_watt(params)
    model = fs.model
    W = params.bandwidth
    r = fs.rate_floor

    def rate_of(p):
        return _rate(p, g, model, params)

    if fs.contains(v, ch, params, rtol=0.0):
        return PowerAllocation(v)
    base = project_budget_simplex(v, fs.budget)
    if rate_of(base) >= r:
        return PowerAllocation(base)
    # is the set nonempty at all?
    try:
        path = _Path(ch, params, fs)
    except InfeasibleQoS as exc:
        raise InfeasibleSet(str(exc)) from exc

    scale = W / LN2 / max(r, W)  # rate measured in units of max(r, W)

    def rate_gap(nu, tau):
        return rate_of(_coordinate_solve(v, tau, nu, g, model, scale)) - r

    def nu_for(tau):
        hi = 1.0
        while rate_gap(hi, tau) < 0:
            hi *= 4
            if hi > 1e300:
                raise InfeasibleSet("rate floor unreachable at this budget multiplier")
        if rate_gap(0.0, tau) >= 0:
            return 0.0
        return brentq(lambda nu: rate_gap(nu, tau), 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)

    def point(tau):
        nu = nu_for(tau)
        p = _coordinate_solve(v, tau, nu, g, model, scale)
        # nudge onto the feasible side of the rate root
        k = 0
        while rate_of(p) < r and k < 60:
            nu *= 1 + 1e-12 * 2**k
            p = _coordinate_solve(v, tau, nu, g, model, scale)
            k += 1
        return p

    p0 = point(0.0)
    if p0.sum() <= fs.budget:
        p = p0
    else:
        hi = max(float(np.max(v)), 1.0)
        while point(hi).sum() > fs.budget:
            hi *= 4
            if hi > 1e300:
                p = path.powers(path.lam_rate if math.isfinite(path.lam_rate) else path.lam_budget)
                break
        tau = brentq(lambda t: point(t).sum() - fs.budget, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
        p = point(tau)
        if p.sum() > fs.budget:
            p = p * (fs.budget / p.sum())
    if not fs.contains(p, ch, params, rtol=1e-9):
        raise InfeasibleSet("projection could not certify feasibility")
    return PowerAllocation(p)
