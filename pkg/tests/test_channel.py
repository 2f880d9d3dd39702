import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from swarmsec.channel import (
    ChannelParams, average_channel_gain, elevation_deg, link_rate, los_probability, secrecy_rate,
)
from swarmsec.errors import ConfigError

C = 299_792_458.0


def test_elevation():
    assert elevation_deg([0, 0, 100], [0, 0, 0]) == pytest.approx(90.0)
    assert elevation_deg([100, 0, 0], [0, 0, 0]) == pytest.approx(0.0)
    assert elevation_deg([0, 0, 100], [100, 0, 0]) == pytest.approx(45.0)
    assert elevation_deg([0, 0, 0], [0, 0, 10]) == pytest.approx(-90.0)
    with pytest.raises(ValueError):
        elevation_deg([1, 1, 1], [1, 1, 1])


def test_los_values():
    assert los_probability(9.61) == pytest.approx(1 / 10.61, abs=1e-5)
    assert los_probability(9.61) == pytest.approx(0.09425, abs=1e-5)
    assert los_probability(90.0) == pytest.approx(0.99997, abs=1e-5)
    assert los_probability(0.0) == pytest.approx(0.02187, abs=1e-5)


@given(st.floats(-1e3, 1e3), st.floats(1e-3, 10))
def test_los_monotone_in_unit_interval(xi, dxi):
    p0, p1 = los_probability(xi), los_probability(xi + dxi)
    assert 0.0 <= p0 <= 1.0
    assert p1 >= p0


def test_los_strict_on_moderate_range():
    xi = np.linspace(-90, 90, 1001)
    p = los_probability(xi)
    assert np.all(np.diff(p) > 0) and np.all((p > 0) & (p < 1))


def test_channel_gain_pipeline_oracle():
    params = ChannelParams()
    tx = np.array([0.0, 0.0, 100.0])
    horiz = math.sqrt(1000.0 ** 2 - 100.0 ** 2)
    rx = np.array([horiz, 0.0, 0.0])
    xi = math.degrees(math.asin(100.0 / 1000.0))
    assert xi == pytest.approx(5.739, abs=1e-3)
    p_los = 1.0 / (1.0 + 9.61 * math.exp(-0.16 * (xi - 9.61)))
    mu1 = 10 ** (1.0 / 10)
    mu2 = 10 ** (20.0 / 10)
    k_o = 4 * math.pi * 2.4e9 / C
    oracle = 1.0 / ((p_los * mu1 + (1 - p_los) * mu2) * (k_o * 1000.0) ** 2)
    assert average_channel_gain(tx, rx, params) == pytest.approx(oracle, rel=1e-12)


def test_channel_gain_equal_mu_ignores_los():
    params = ChannelParams(mu1_db=5.0, mu2_db=5.0 + 1e-12)
    a = average_channel_gain([0, 0, 100], [10, 0, 0], params)
    b = average_channel_gain([0, 0, 100], [1000, 0, 0], params)
    k_o = params.free_space_factor
    mu = 10 ** 0.5
    assert a == pytest.approx(1 / (mu * (k_o * math.dist([0, 0, 100], [10, 0, 0])) ** 2), rel=1e-9)
    assert b == pytest.approx(1 / (mu * (k_o * math.dist([0, 0, 100], [1000, 0, 0])) ** 2), rel=1e-9)


def test_channel_gain_inverse_square_at_fixed_elevation():
    a = average_channel_gain([0, 0, 0], [30, 40, 50], ChannelParams())
    b = average_channel_gain([0, 0, 0], [60, 80, 100], ChannelParams())
    assert a / b == pytest.approx(4.0, rel=1e-12)


@given(st.floats(1.0, 1e4), st.floats(0.01, 0.99))
def test_channel_gain_decreasing_along_ray(d, frac):
    ray = np.array([0.6, 0.0, 0.8])
    near = average_channel_gain(ray * d * frac, [0, 0, 0])
    far = average_channel_gain(ray * d, [0, 0, 0])
    assert far < near


def test_zero_distance():
    with pytest.raises(ValueError):
        average_channel_gain([1, 2, 3], [1, 2, 3])


def test_params_validation():
    with pytest.raises(ConfigError):
        ChannelParams(mu1_db=20, mu2_db=1)
    with pytest.raises(ConfigError):
        ChannelParams(noise_power_w=0)
    with pytest.raises(ConfigError):
        ChannelParams(alpha=0)


def test_link_rate():
    p = ChannelParams()
    assert link_rate(1.0, p.noise_power_w, 1.0, p) == pytest.approx(1.0)
    assert link_rate(0.0, 1.0, 1.0, p) == 0.0
    assert link_rate(3.0, p.noise_power_w, 1.0, p) == pytest.approx(2.0)


@given(st.floats(0, 10), st.floats(0, 1e-6), st.floats(0, 100), st.floats(0, 1))
def test_link_rate_monotone(pw, g, gain, bump):
    base = link_rate(pw, g, gain)
    assert link_rate(pw + bump, g, gain) >= base
    assert link_rate(pw, g + bump * 1e-8, gain) >= base
    assert link_rate(pw, g, gain + bump) >= base


def test_secrecy():
    assert secrecy_rate(5, 2) == 3
    assert secrecy_rate(1, 4) == 0
    assert secrecy_rate(2.5, 2.5) == 0


@given(st.floats(0, 100), st.floats(0, 100), st.floats(-10, 10))
def test_secrecy_lipschitz(r1, r2, dr):
    assert secrecy_rate(r1, r2) >= 0
    assert abs(secrecy_rate(max(0.0, r1 + dr), r2) - secrecy_rate(r1, r2)) <= abs(dr) + 1e-12
