import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aco_alloc.channel import ChannelState
from aco_alloc.constellation import make_qam
from aco_alloc.errors import Infeasible, OutOfDomain
from aco_alloc.params import SystemParams
from aco_alloc.rates import FiniteAlphabet, Gaussian, LowerBound
from aco_alloc.se_alloc import (
    PowerAllocation,
    effective_budget,
    level_kkt_residual,
    lower_bound_se_opt,
    mercury_waterfill,
    project_budget_simplex,
    se_optimize,
    waterfill,
)

from conftest import random_instances
from oracles import grid_se_oracle

PARAMS = SystemParams(n=8)
QPSK = make_qam(4)
GAINS = np.array([1.0, 0.8, 0.5, 0.1]) * 1e-6


def rate_fns(ch, model, params=PARAMS):
    g = ch.snr_per_watt(params)
    return [lambda p, gi=gi: params.bandwidth * model.bits(gi * p) for gi in g]


def se_of_oracle(ch, model, budget, steps=1000):
    return grid_se_oracle(rate_fns(ch, model), budget, steps) / PARAMS.total_bandwidth


class TestEffectiveBudget:
    def test_no_optical_constraint(self):
        assert effective_budget(PARAMS.with_(power_budget=7.0), Gaussian()) == 7.0

    def test_caps(self):
        p = SystemParams(n=64, power_budget=20.0, optical_budget=0.25)
        assert effective_budget(p, Gaussian()) == pytest.approx(4 * math.pi, rel=1e-15)
        assert effective_budget(p, FiniteAlphabet(QPSK)) == pytest.approx(0.25, rel=1e-15)
        assert effective_budget(p, LowerBound(QPSK)) == pytest.approx(0.25, rel=1e-15)

    def test_electrical_binds(self):
        p = SystemParams(n=64, power_budget=0.1, optical_budget=0.25)
        assert effective_budget(p, Gaussian()) == 0.1


class TestPowerAllocation:
    def test_rejects_negative(self):
        with pytest.raises(OutOfDomain):
            PowerAllocation([0.1, -0.1])

    def test_full_spectrum_mirror(self):
        a = PowerAllocation([1.0, 2.0])
        assert a.full_spectrum().tolist() == [0, 1, 0, 2, 0, 2, 0, 1]
        assert a.total == 3.0 and a.active == 2


class TestWaterfill:
    def test_equal_gains_split_equally(self):
        ch = ChannelState.from_magnitudes([1e-6] * 4)
        res = waterfill(ch, 2.0, PARAMS)
        np.testing.assert_allclose(res.alloc.powers, 0.5, rtol=1e-14)

    def test_weak_subcarrier_left_dry(self):
        ch = ChannelState.from_magnitudes(GAINS)
        res = waterfill(ch, 1.0, PARAMS)
        g = ch.snr_per_watt(PARAMS)
        # water level below the floor of the weakest subcarrier
        assert res.alloc.powers[3] == 0.0
        level = res.alloc.powers[0] + 1 / g[0]
        assert level < 1 / g[3]
        assert res.alloc.total == pytest.approx(1.0, rel=1e-14)

    def test_matches_grid_oracle(self):
        ch = ChannelState.from_magnitudes(GAINS)
        res = waterfill(ch, 1.0, PARAMS)
        assert res.objective >= se_of_oracle(ch, Gaussian(), 1.0) * (1 - 1e-12)
        assert res.kkt_residual <= 1e-8 * (res.alloc.powers[0] + 1)

    def test_dual_relation(self):
        ch = ChannelState.from_magnitudes(GAINS)
        res = waterfill(ch, 1.0, PARAMS)
        g = ch.snr_per_watt(PARAMS)
        level = res.alloc.powers[0] + 1 / g[0]
        assert res.dual == pytest.approx(1 / (2 * PARAMS.n * math.log(2) * level), rel=1e-12)

    def test_infeasible_budget(self):
        ch = ChannelState.from_magnitudes(GAINS)
        with pytest.raises(Infeasible):
            waterfill(ch, 0.0, PARAMS)
        with pytest.raises(Infeasible):
            waterfill(ChannelState.from_magnitudes([0.0, 0.0]), 1.0, PARAMS)


class TestMercury:
    def test_against_grid_oracle_and_kkt(self):
        ch = ChannelState.from_magnitudes(GAINS)
        res = mercury_waterfill(ch, 0.25, QPSK, PARAMS)
        assert res.objective >= se_of_oracle(ch, FiniteAlphabet(QPSK), 0.25) * (1 - 1e-4)
        assert res.kkt_residual <= 1e-6 * res.dual
        assert res.alloc.total == pytest.approx(0.25, rel=1e-12)

    def test_saturation_leaves_power_unused(self):
        ch = ChannelState.from_magnitudes([2e-6] * 4)
        res = mercury_waterfill(ch, 1e4, QPSK, PARAMS)
        assert res.status == "saturated"
        assert res.dual == 0.0
        assert res.alloc.total < 1e4
        assert res.objective == pytest.approx(0.5, abs=1e-6)

    def test_large_order_close_to_waterfill_at_low_snr(self):
        ch = ChannelState.from_magnitudes(GAINS)
        # budget small enough that every effective snr stays below 1
        merc = mercury_waterfill(ch, 0.05, make_qam(1024), PARAMS)
        wf = waterfill(ch, 0.05, PARAMS)
        assert np.max(ch.snr_per_watt(PARAMS) * wf.alloc.powers) <= 1
        assert merc.objective == pytest.approx(wf.objective, rel=0.05)

    def test_favours_weaker_subcarrier_near_saturation(self):
        # once the strong subcarrier is near its 2-bit ceiling, extra power goes elsewhere
        ch = ChannelState.from_magnitudes([4e-6, 1e-6])
        res = mercury_waterfill(ch, 2.0, QPSK, PARAMS)
        wf = waterfill(ch, 2.0, PARAMS)
        assert res.alloc.powers[1] > wf.alloc.powers[1]


class TestLowerBound:
    def test_routes_agree(self):
        ch = ChannelState.from_magnitudes(GAINS)
        a = lower_bound_se_opt(ch, 0.25, QPSK, PARAMS)
        b = lower_bound_se_opt(ch, 0.25, QPSK, PARAMS, method="level")
        assert a.objective == pytest.approx(b.objective, rel=1e-9)
        np.testing.assert_allclose(a.alloc.powers, b.alloc.powers, rtol=1e-3, atol=1e-6)

    def test_against_grid_oracle(self):
        ch = ChannelState.from_magnitudes(GAINS)
        res = lower_bound_se_opt(ch, 0.25, QPSK, PARAMS)
        assert res.objective >= se_of_oracle(ch, LowerBound(QPSK), 0.25) - 1e-4 * abs(res.objective)

    def test_unknown_method(self):
        ch = ChannelState.from_magnitudes(GAINS)
        with pytest.raises(OutOfDomain):
            lower_bound_se_opt(ch, 0.25, QPSK, PARAMS, method="newton")


@pytest.mark.parametrize("model", [Gaussian(), FiniteAlphabet(QPSK), LowerBound(QPSK)], ids=lambda m: m.name)
def test_random_instances_beat_oracle(model):
    for ch, budget in random_instances(count=4, seed=11):
        params = PARAMS.with_(power_budget=budget)
        res = se_optimize(ch, params, model)
        oracle = grid_se_oracle(rate_fns(ch, model, params), budget, 400) / params.total_bandwidth
        assert res.objective >= oracle - 1e-4 * abs(oracle)
        assert res.alloc.total <= budget * (1 + 1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.01, 5.0), st.floats(1.01, 3.0))
def test_se_nondecreasing_in_budget(b, factor):
    ch = ChannelState.from_magnitudes(GAINS)
    for solver in (
        lambda B: waterfill(ch, B, PARAMS),
        lambda B: mercury_waterfill(ch, B, QPSK, PARAMS),
    ):
        assert solver(b * factor).objective >= solver(b).objective * (1 - 1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=8), st.floats(0.01, 10))
def test_simplex_projection(v, budget):
    v = np.array(v)
    p = project_budget_simplex(v, budget)
    assert np.all(p >= 0)
    assert p.sum() <= budget * (1 + 1e-12) + 1e-12
    # optimality: no feasible grid neighbour is closer
    q = project_budget_simplex(v + 1e-3, budget)
    assert np.sum((p - v) ** 2) <= np.sum((q - v) ** 2) + 1e-12


def test_level_kkt_flags_bad_point():
    ch = ChannelState.from_magnitudes(GAINS)
    g = ch.snr_per_watt(PARAMS)
    res = mercury_waterfill(ch, 0.25, QPSK, PARAMS)
    bad = res.alloc.powers[::-1].copy()
    assert level_kkt_residual(bad, g, res.dual, FiniteAlphabet(QPSK)) > 1e3 * res.kkt_residual
