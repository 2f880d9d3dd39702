import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from swarmsec.energy import (
    RotorcraftParams, hover_constants, level_flight_power, swarm_energy, vertical_flight_power,
)

P = RotorcraftParams()


def test_hover_constants():
    hc = hover_constants(P)
    assert hc.p_induced_w == pytest.approx(85.98, abs=0.05)
    assert hc.p_blade_w == pytest.approx(79.86, abs=0.05)
    assert hc.hover_w == pytest.approx(165.84, abs=0.1)


def test_area_scaling():
    hc = hover_constants(P)
    hc2 = hover_constants(dataclasses.replace(P, area=2 * P.area))
    assert hc2.p_induced_w == pytest.approx(hc.p_induced_w / math.sqrt(2))
    assert hc2.p_blade_w == pytest.approx(hc.p_blade_w * 2)


def term_by_term(v):
    """Level-flight power written exactly as the textbook expression."""
    hc = hover_constants(P)
    induced = hc.p_induced_w * math.sqrt(math.sqrt(1 + v ** 4 / (4 * P.v0 ** 4)) - v ** 2 / (2 * P.v0 ** 2))
    blade = hc.p_blade_w * (1 + 3 * v ** 2 / P.u_tip ** 2)
    parasite = 0.5 * P.d0 * P.rho * P.s * P.area * v ** 3
    return induced + blade + parasite


def test_level_flight_values():
    assert level_flight_power(0.0, 0.0) == pytest.approx(165.84, abs=0.1)
    assert level_flight_power(10.0, 0.0) == pytest.approx(124.97, abs=0.05)
    for v in (0.5, 3.0, 10.0, 25.0):
        assert level_flight_power(v, 0.0) == pytest.approx(term_by_term(v), rel=1e-9)


@given(st.floats(-60, 60), st.floats(-60, 60))
def test_level_flight_isotropic(vx, vy):
    assert level_flight_power(vx, vy) == pytest.approx(level_flight_power(-vy, vx), rel=1e-12)


def test_terms_monotone_and_radicand_positive():
    v = np.linspace(0, 60, 6001)
    r = v ** 2 / (2 * P.v0 ** 2)
    rad = np.sqrt(1 + r ** 2) - r
    assert np.all(rad > 0)
    power = level_flight_power(v, 0.0)
    assert np.all(np.isfinite(power)) and np.all(power > 0)
    hc = hover_constants(P)
    induced = hc.p_induced_w * np.sqrt(1 / (np.sqrt(1 + r ** 2) + r))
    assert np.all(np.diff(induced) < 0)
    assert np.all(np.diff(power - induced) > 0)


def test_level_flight_stable_at_high_speed():
    assert np.isfinite(level_flight_power(1e6, 0.0))


def test_vertical():
    assert vertical_flight_power(2.0) == pytest.approx(39.2)
    assert vertical_flight_power(-1.0) == 0.0
    assert vertical_flight_power(0.0) == 0.0


def test_swarm_energy():
    assert swarm_energy(np.zeros((8, 3)), 1.0) == pytest.approx(1326.7, abs=0.1)
    assert swarm_energy(np.zeros((0, 3)), 1.0) == 0.0
    with pytest.raises(ValueError):
        swarm_energy(np.zeros((2, 3)), 0.0)


@given(st.lists(st.tuples(st.floats(-30, 30), st.floats(-30, 30), st.floats(-30, 30)), min_size=1, max_size=10),
       st.floats(0.1, 5.0))
def test_swarm_energy_additive_linear(vels, dt):
    v = np.array(vels)
    total = swarm_energy(v, dt)
    parts = math.fsum(swarm_energy(v[i:i + 1], dt) for i in range(len(v)))
    assert total == pytest.approx(parts, rel=1e-12)
    assert swarm_energy(v, 2 * dt) == pytest.approx(2 * total, rel=1e-12)


def test_params_positive():
    with pytest.raises(ValueError):
        RotorcraftParams(rho=0.0)
