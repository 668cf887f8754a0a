import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aco_alloc.channel import (
    SPEED_OF_LIGHT,
    ChannelState,
    DiffuseParams,
    Geometry,
    diffuse_gain,
    lambertian_gain,
    los_gain,
    subcarrier_frequencies,
    subcarrier_gains,
    reference_channel,
    reference_geometries,
)
from aco_alloc.errors import DimensionMismatch, InvalidGeometry
from aco_alloc.params import SystemParams

# (m+1) A_r cos(phi) cos^m(theta) / (2 pi d^2) at half-power 60 deg, theta 60, phi 45,
# A_r = 1 cm^2, d = 3.64 m; evaluated separately at 30 digits
G_L_364 = 8.49380656922761884844824740942e-07

# Four-LED reference room, diffuse efficiency 3.6e-6, decay 10 ns: (index i, Re H, Im H)
REFERENCE_GAINS = [
    (1, 1.7204727445711787e-5, -1.1362291597851145e-6),
    (2, 1.6688671855693806e-5, -3.3194465302824615e-6),
    (8, 8.570007539352372e-6, -9.8406949132050214e-6),
    (16, 8.2926313784434242e-7, -7.3489218745337572e-6),
    (28, 6.4155810823529205e-7, -1.7136345323393427e-6),
    (32, 1.6954781217215225e-6, -1.6120569378268325e-6),
]


def test_lambertian_reference_value():
    assert lambertian_gain(Geometry(), 3.64) == pytest.approx(G_L_364, rel=1e-13)


def test_lambertian_out_of_fov_is_zero():
    geom = Geometry(incidence_angle=math.radians(50), fov=math.radians(40))
    assert lambertian_gain(geom, 2.0) == 0.0


@given(d=st.floats(0.1, 50))
def test_lambertian_inverse_square(d):
    assert lambertian_gain(Geometry(), 2 * d) == pytest.approx(lambertian_gain(Geometry(), d) / 4, rel=1e-12)


def test_lambertian_order_one_at_sixty_degrees():
    assert Geometry().lambertian_order == pytest.approx(1.0, rel=1e-14)


@pytest.mark.parametrize("d", [0.0, -1.0])
def test_lambertian_rejects_nonpositive_distance(d):
    with pytest.raises(InvalidGeometry):
        lambertian_gain(Geometry(), d)


@pytest.mark.parametrize(
    "kw",
    [
        {"detector_area": 0.0},
        {"half_power_angle": 0.0},
        {"half_power_angle": math.pi / 2},
        {"irradiance_angle": math.pi / 2},
        {"incidence_angle": -0.1},
    ],
)
def test_geometry_validation(kw):
    with pytest.raises(InvalidGeometry):
        Geometry(**kw)


def test_los_gain_phase():
    tau = 1e-8
    assert los_gain(2.5, 0.0, tau) == 2.5
    assert abs(los_gain(2.5, 3.3e7, tau)) == pytest.approx(2.5, rel=1e-15)
    assert los_gain(2.5, 1 / (4 * tau), tau) == pytest.approx(-2.5j, abs=1e-14)


def test_diffuse_gain_shape():
    dp = DiffuseParams(efficiency=0.3, decay_time=5e-9)
    assert diffuse_gain(dp, 0.0) == pytest.approx(0.3)
    assert abs(diffuse_gain(dp, 1 / (2 * math.pi * dp.decay_time))) == pytest.approx(0.3 / math.sqrt(2), rel=1e-14)
    assert diffuse_gain(DiffuseParams(efficiency=0.0), 1e7) == 0
    f = np.linspace(0, 1e8, 200)
    assert np.all(np.diff(np.abs(diffuse_gain(dp, f))) < 0)


def test_diffuse_delay_only_rotates():
    a = DiffuseParams(delay=0.0)
    b = DiffuseParams(delay=3e-9)
    f = np.linspace(1e6, 6e7, 7)
    np.testing.assert_allclose(np.abs(diffuse_gain(a, f)), np.abs(diffuse_gain(b, f)), rtol=1e-14)


def test_los_only_magnitude_flat():
    params = SystemParams()
    ch = subcarrier_gains(Geometry(), DiffuseParams(efficiency=0.0), params)
    g = lambertian_gain(Geometry(), Geometry().distance)
    np.testing.assert_allclose(np.abs(ch.gains), g, rtol=1e-13)
    assert len(ch) == params.n_data


def test_single_led_diffuse_dominated_is_nonincreasing():
    ch = subcarrier_gains(Geometry(), DiffuseParams(efficiency=1e-3), SystemParams())
    assert np.all(np.diff(np.abs(ch.gains)) <= 0)


def test_table_channel_regression():
    ch = reference_channel(SystemParams())
    for i, re, im in REFERENCE_GAINS:
        assert ch.gains[i - 1] == pytest.approx(complex(re, im), rel=1e-12)


def test_table_channel_is_coherent_sum():
    params = SystemParams()
    dp = DiffuseParams()
    f = subcarrier_frequencies(params)
    total = sum(subcarrier_gains(g, dp, params).gains for g in reference_geometries())
    np.testing.assert_allclose(reference_channel(params).gains, total, rtol=1e-14)
    np.testing.assert_allclose(f, (2 * np.arange(1, 33) - 1) * 1e6)


def test_table_geometry_distances():
    d = sorted(g.distance for g in reference_geometries())
    assert d[0] == pytest.approx(math.sqrt(1 + 0.25 + 9))
    assert all(math.isfinite(x) for x in d)


def test_channel_deterministic():
    a = reference_channel()
    b = reference_channel()
    assert np.array_equal(a.gains, b.gains)


def test_channel_state_checks():
    with pytest.raises(DimensionMismatch):
        ChannelState(np.ones(3), np.ones(4))
    with pytest.raises(InvalidGeometry):
        ChannelState(np.array([1.0, np.nan]))
    ch = ChannelState.from_magnitudes([1e-6, 2e-6])
    with pytest.raises(ValueError):
        ch.gains[0] = 0


def test_snr_per_watt():
    params = SystemParams()
    ch = ChannelState.from_magnitudes([2e-6])
    assert ch.snr_per_watt(params)[0] == pytest.approx(4e-12 / (4 * 1e-18 * 1e6))


def test_propagation_delay_uses_speed_of_light():
    geom = Geometry(led_position=(0, 0, 3), receiver_position=(0, 0, 0))
    params = SystemParams(n=4)
    ch = subcarrier_gains(geom, DiffuseParams(efficiency=0.0), params)
    tau = 3 / SPEED_OF_LIGHT
    expected = lambertian_gain(geom, 3.0) * np.exp(-2j * np.pi * subcarrier_frequencies(params) * tau)
    np.testing.assert_allclose(ch.gains, expected, rtol=1e-13)
