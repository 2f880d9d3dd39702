"""Virtual antenna array formed by the swarm.

Elements are isotropic with unit efficiency.  Steering uses open-loop phase
synchronisation: every element pre-compensates its offset from the array
centre along the steering direction, so all contributions add in phase at
the steering direction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels

SPEED_OF_LIGHT = 299_792_458.0


def _wrap_phi(phi: float) -> float:
    if -math.pi <= phi <= math.pi:
        return phi
    return math.remainder(phi, 2.0 * math.pi)


@dataclass(frozen=True)
class Direction:
    """Spherical direction: ``theta`` from +z in [0, pi], ``phi`` azimuth in [-pi, pi]."""

    theta: float
    phi: float

    def __post_init__(self):
        theta = float(self.theta)
        if not (0.0 <= theta <= math.pi) or not math.isfinite(theta):
            raise ValueError(f"theta must lie in [0, pi], got {theta}")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", _wrap_phi(float(self.phi)))

    def unit_vector(self) -> np.ndarray:
        st = math.sin(self.theta)
        return np.array([st * math.cos(self.phi), st * math.sin(self.phi), math.cos(self.theta)])

    @classmethod
    def towards(cls, origin, target) -> "Direction":
        """Direction of ``target`` seen from ``origin``."""
        delta = np.asarray(target, dtype=float) - np.asarray(origin, dtype=float)
        r = float(np.linalg.norm(delta))
        if r == 0.0:
            raise ValueError("direction between coincident points is undefined")
        theta = math.acos(min(1.0, max(-1.0, delta[2] / r)))
        return cls(theta, math.atan2(delta[1], delta[0]))


@dataclass(frozen=True)
class GainQuadrature:
    """Midpoint grid used for the sphere integral in the gain normalisation."""

    n_theta: int = 181
    n_phi: int = 360

    def __post_init__(self):
        if int(self.n_theta) < 2 or int(self.n_phi) < 2:
            raise ValueError("quadrature needs at least 2 nodes per axis")


def swarm_center(positions) -> np.ndarray:
    pts = np.asarray(positions, dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] != 3:
        raise ValueError("swarm_center needs a non-empty (K, 3) array of positions")
    return pts.mean(axis=0)


@dataclass(frozen=True)
class ArrayGeometry:
    positions: np.ndarray
    excitations: np.ndarray
    wavelength: float

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float).reshape(-1, 3)
        exc = np.array(self.excitations, dtype=float).reshape(-1)
        if pos.shape[0] == 0 or pos.shape[0] != exc.shape[0]:
            raise ValueError("need one excitation per element and at least one element")
        if np.any(exc < 0.0) or np.any(exc > 1.0):
            raise ValueError("excitations must lie in [0, 1]")
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")
        pos.setflags(write=False)
        exc.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "excitations", exc)

    @classmethod
    def from_carrier(cls, positions, excitations, carrier_hz: float) -> "ArrayGeometry":
        return cls(positions, excitations, SPEED_OF_LIGHT / carrier_hz)

    @property
    def center(self) -> np.ndarray:
        return swarm_center(self.positions)

    @property
    def offsets(self) -> np.ndarray:
        return self.positions - self.center

    @property
    def phase_constant(self) -> float:
        return 2.0 * math.pi / self.wavelength

    def __len__(self):
        return self.positions.shape[0]


def initial_phase(geometry: ArrayGeometry, steer: Direction) -> np.ndarray:
    """Open-loop phase of each element for a beam steered at ``steer``."""
    return -geometry.phase_constant * (geometry.offsets @ steer.unit_vector())


def _steered_weights(geometry, steer):
    psi = initial_phase(geometry, steer)
    return geometry.excitations * np.exp(1j * psi)


def array_factor(geometry: ArrayGeometry, steer: Direction, eval_dir: Direction) -> complex:
    weights = _steered_weights(geometry, steer)
    path = geometry.phase_constant * (geometry.offsets @ eval_dir.unit_vector())
    return complex(np.sum(weights * np.exp(1j * path)))


def array_factor_many(geometry: ArrayGeometry, steer: Direction, theta, phi) -> np.ndarray:
    """Array factor on broadcastable arrays of angles."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    st = np.sin(theta)
    u = np.stack(np.broadcast_arrays(st * np.cos(phi), st * np.sin(phi), np.cos(theta)), axis=-1)
    path = geometry.phase_constant * (u @ geometry.offsets.T)
    return np.exp(1j * path) @ _steered_weights(geometry, steer)


def sphere_power(geometry: ArrayGeometry, steer: Direction, quad: GainQuadrature = GainQuadrature()) -> float:
    """Midpoint-rule value of the integral of |AF|^2 sin(theta) over the sphere."""
    w = _steered_weights(geometry, steer)
    return _kernels.sphere_power(geometry.offsets, w.real, w.imag, geometry.phase_constant,
                                 quad.n_theta, quad.n_phi)


class BeamPattern:
    """Normalised gain pattern of one steered array.

    The sphere integral is evaluated once on construction and reused by every
    :meth:`gain` call, so the base-station and eavesdropper gains of a slot
    share it.  An array with zero total excitation radiates nothing; its gain
    is reported as 0 and ``degenerate`` is set.
    """

    def __init__(self, geometry: ArrayGeometry, steer: Direction,
                 quad: GainQuadrature = GainQuadrature()):
        self.geometry = geometry
        self.steer = steer
        self.quad = quad
        self.degenerate = not np.any(geometry.excitations > 0.0)
        self.power_integral = 0.0 if self.degenerate else sphere_power(geometry, steer, quad)

    def gain(self, direction: Direction) -> float:
        if self.degenerate:
            return 0.0
        af = array_factor(self.geometry, self.steer, direction)
        return 4.0 * math.pi * abs(af) ** 2 / self.power_integral

    def gains(self, theta, phi) -> np.ndarray:
        if self.degenerate:
            return np.zeros(np.broadcast(np.asarray(theta), np.asarray(phi)).shape)
        af = array_factor_many(self.geometry, self.steer, theta, phi)
        return 4.0 * math.pi * np.abs(af) ** 2 / self.power_integral


def antenna_gain(geometry: ArrayGeometry, steer: Direction, eval_dir: Direction,
                 quad: GainQuadrature = GainQuadrature()) -> float:
    return BeamPattern(geometry, steer, quad).gain(eval_dir)
