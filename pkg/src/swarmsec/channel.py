"""Air-to-ground link budget with elevation-dependent LoS probability."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .beamforming import SPEED_OF_LIGHT
from .errors import ConfigError


@dataclass(frozen=True)
class ChannelParams:
    c0: float = 9.61
    c1: float = 0.16
    mu1_db: float = 1.0           # excess loss, LoS
    mu2_db: float = 20.0          # excess loss, NLoS
    alpha: float = 2.0            # path-loss exponent
    carrier_hz: float = 2.4e9
    noise_power_w: float = 1e-12  # -90 dBm
    bandwidth_hz: float = 1e6     # carried for reporting, rates are per Hz

    def __post_init__(self):
        if not self.mu2_db > self.mu1_db > 0:
            raise ConfigError("need mu2_db > mu1_db > 0")
        if not self.alpha > 0:
            raise ConfigError("alpha must be positive")
        if not self.noise_power_w > 0:
            raise ConfigError("noise_power_w must be positive")
        if not self.carrier_hz > 0:
            raise ConfigError("carrier_hz must be positive")

    @property
    def free_space_factor(self) -> float:
        """4 pi f_c / c, in 1/m."""
        return 4.0 * math.pi * self.carrier_hz / SPEED_OF_LIGHT


def _distance(tx, rx) -> float:
    d = float(np.linalg.norm(np.asarray(tx, dtype=float) - np.asarray(rx, dtype=float)))
    if d == 0.0:
        raise ValueError("transmitter and receiver coincide")
    return d


def elevation_deg(tx_center, rx) -> float:
    """Elevation of the transmitter seen from the receiver, in degrees (negative if tx is lower)."""
    tx = np.asarray(tx_center, dtype=float)
    rx = np.asarray(rx, dtype=float)
    d = _distance(tx, rx)
    return math.degrees(math.asin(max(-1.0, min(1.0, (tx[2] - rx[2]) / d))))


def los_probability(elev_deg, params: ChannelParams = ChannelParams()):
    """LoS probability; works on scalars and arrays."""
    return 1.0 / (1.0 + params.c0 * np.exp(-params.c1 * (np.asarray(elev_deg, dtype=float) - params.c0)))


def average_channel_gain(tx_center, rx, params: ChannelParams = ChannelParams()) -> float:
    d = _distance(tx_center, rx)
    p_los = float(los_probability(elevation_deg(tx_center, rx), params))
    mu1 = 10.0 ** (params.mu1_db / 10.0)
    mu2 = 10.0 ** (params.mu2_db / 10.0)
    excess = p_los * mu1 + (1.0 - p_los) * mu2
    return 1.0 / (excess * (params.free_space_factor * d) ** params.alpha)


def link_rate(tx_power_w, channel_gain, antenna_gain, params: ChannelParams = ChannelParams()):
    """Spectral efficiency log2(1 + SNR), bps/Hz."""
    snr = np.asarray(tx_power_w) * np.asarray(channel_gain) * np.asarray(antenna_gain) / params.noise_power_w
    if np.any(snr < 0):
        raise ValueError("power and gains must be non-negative")
    rate = np.log2(1.0 + snr)
    return float(rate) if np.ndim(rate) == 0 else rate


def secrecy_rate(rate_rbs, rate_eav):
    diff = np.maximum(np.asarray(rate_rbs, dtype=float) - np.asarray(rate_eav, dtype=float), 0.0)
    return float(diff) if np.ndim(diff) == 0 else diff
