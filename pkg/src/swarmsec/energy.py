"""Rotary-wing propulsion power.

All functions broadcast over numpy arrays of velocity components.
"""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np


@dataclass(frozen=True)
class RotorcraftParams:
    weight_n: float = 19.6
    v0: float = 4.03        # mean rotor induced velocity in hover, m/s
    u_tip: float = 120.0    # rotor blade tip speed, m/s
    d0: float = 0.6         # fuselage drag ratio
    rho: float = 1.225      # air density, kg/m^3
    s: float = 0.05         # rotor solidity
    area: float = 0.503     # rotor disc area, m^2
    m_corr: float = 0.1     # incremental correction to induced power
    kappa: float = 0.012    # profile drag coefficient
    omega: float = 300.0    # blade angular velocity, rad/s
    lam: float = 0.4        # rotor radius, m

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ValueError(f"{f.name} must be strictly positive")


@dataclass(frozen=True)
class HoverConstants:
    p_induced_w: float
    p_blade_w: float

    @property
    def hover_w(self) -> float:
        return self.p_induced_w + self.p_blade_w


def hover_constants(params: RotorcraftParams = RotorcraftParams()) -> HoverConstants:
    p_i = (1.0 + params.m_corr) * params.weight_n ** 1.5 / np.sqrt(2.0 * params.rho * params.area)
    p_0 = params.kappa / 8.0 * params.rho * params.s * params.area * params.omega ** 3 * params.lam ** 3
    return HoverConstants(float(p_i), float(p_0))


def level_flight_power(vx, vy, params: RotorcraftParams = RotorcraftParams()):
    hc = hover_constants(params)
    v2 = np.square(vx) + np.square(vy)
    ratio = v2 / (2.0 * params.v0 ** 2)
    # sqrt(1 + r^2) - r written as 1 / (sqrt(1 + r^2) + r) to avoid cancellation at high speed
    induced = hc.p_induced_w * np.sqrt(1.0 / (np.sqrt(1.0 + ratio ** 2) + ratio))
    blade = hc.p_blade_w * (1.0 + 3.0 * v2 / params.u_tip ** 2)
    parasite = 0.5 * params.d0 * params.rho * params.s * params.area * v2 ** 1.5
    return induced + blade + parasite


def vertical_flight_power(vz, params: RotorcraftParams = RotorcraftParams()):
    """Climb power; descent is unpowered (auto-rotation)."""
    return params.weight_n * np.maximum(np.asarray(vz, dtype=float), 0.0)


def swarm_energy(velocities, dt: float, params: RotorcraftParams = RotorcraftParams()) -> float:
    """Energy in joules spent by the swarm over one slot of ``dt`` seconds."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    v = np.asarray(velocities, dtype=float).reshape(-1, 3)
    if v.shape[0] == 0:
        return 0.0
    power = level_flight_power(v[:, 0], v[:, 1], params) + vertical_flight_power(v[:, 2], params)
    return float(dt * np.sum(power))
