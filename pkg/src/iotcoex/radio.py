"""Uplink link budget: unit conversion, pathloss, interference, SINR, capacity.

Every function accepts Python floats or numpy arrays. Zero interference is
represented by ``-inf`` dBm, which converts to exactly 0 mW.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

NO_INTERFERENCE_DBM = -math.inf


def _out(value):
    return float(value) if np.ndim(value) == 0 else value


def dbm_to_mw(p_dbm):
    return _out(np.power(10.0, np.asarray(p_dbm, dtype=float) / 10.0))


def mw_to_dbm(p_mw):
    arr = np.asarray(p_mw, dtype=float)
    if np.any(~(arr > 0)):
        raise ValueError("power in milliwatts must be strictly positive")
    return _out(10.0 * np.log10(arr))


@dataclass(frozen=True)
class Channel:
    """Half-open frequency block ``[low, high)`` in Hz."""

    low: float
    high: float

    def __post_init__(self):
        if not self.high > self.low:
            raise ValueError(f"channel needs high > low, got [{self.low}, {self.high})")

    @property
    def bandwidth(self) -> float:
        return self.high - self.low

    def overlap(self, other: "Channel") -> float:
        """Width in Hz of the intersection with ``other``."""
        return max(0.0, min(self.high, other.high) - max(self.low, other.low))

    def contains(self, other: "Channel") -> bool:
        return self.low <= other.low and other.high <= self.high


@dataclass(frozen=True)
class PropagationModel:
    """Log-distance pathloss ``reference_loss + slope*log10(d/reference_distance)``.

    Defaults are the common macro-cell fit 128.1 + 37.6 log10(d/km).
    Distances below ``min_distance`` are clamped.
    """

    reference_loss: float = 128.1
    reference_distance: float = 1000.0
    slope: float = 37.6
    min_distance: float = 10.0

    def __post_init__(self):
        if not self.slope > 0:
            raise ValueError("slope must be positive")
        if not self.reference_distance > 0:
            raise ValueError("reference_distance must be positive")
        if not self.min_distance >= 1:
            raise ValueError("min_distance must be at least 1 m")


@dataclass(frozen=True)
class NoiseModel:
    psd: float = -174.0
    receiver_noise_figure: float = 5.0

    def __post_init__(self):
        if not self.psd < 0:
            raise ValueError("noise psd must be negative (dBm/Hz)")


def pathloss_db(model: PropagationModel, distance):
    d = np.maximum(np.asarray(distance, dtype=float), model.min_distance)
    return _out(model.reference_loss + model.slope * np.log10(d / model.reference_distance))


def rx_power_dbm(tx_dbm, model: PropagationModel, distance):
    return _out(np.asarray(tx_dbm, dtype=float) - pathloss_db(model, distance))


def overlap_fraction(interferer: Channel, victim: Channel) -> float:
    """Share of the interferer's power that lands in the victim band (flat PSD)."""
    return interferer.overlap(victim) / interferer.bandwidth


def distance(a: Sequence[float], b: Sequence[float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def aggregate_interference_dbm(
    victim_position: Sequence[float],
    victim_channel: Channel,
    transmitters: Iterable[tuple],
    model: PropagationModel,
) -> float:
    """Total power received at ``victim_position`` inside ``victim_channel``.

    ``transmitters`` yields ``(position, tx_power_dbm, channel)`` triples or
    ``(device, channel)`` pairs. Returns ``-inf`` when nothing overlaps.
    """
    total_mw = 0.0
    for tx, channel in _normalise(transmitters):
        frac = overlap_fraction(channel, victim_channel)
        if frac == 0.0:
            continue
        d = distance(tx[0], victim_position)
        total_mw += dbm_to_mw(rx_power_dbm(tx[1], model, d)) * frac
    if total_mw == 0.0:
        return NO_INTERFERENCE_DBM
    return mw_to_dbm(total_mw)


def _normalise(transmitters):
    for item in transmitters:
        if len(item) == 3:
            pos, power, channel = item
        else:
            dev, channel = item
            pos, power = dev.position, dev.tx_power
        yield (pos, power), channel


def noise_dbm(noise_model: NoiseModel, bandwidth):
    bw = np.asarray(bandwidth, dtype=float)
    if np.any(~(bw > 0)):
        raise ValueError("bandwidth must be positive")
    return _out(noise_model.psd + 10.0 * np.log10(bw) + noise_model.receiver_noise_figure)


def sinr_linear(signal_dbm, interference_dbm, noise):
    if not np.all(np.isfinite(noise)):
        raise ValueError("noise must be finite")
    return _out(dbm_to_mw(signal_dbm) / (dbm_to_mw(interference_dbm) + dbm_to_mw(noise)))


def throughput_bps(bandwidth, sinr):
    s = np.asarray(sinr, dtype=float)
    if np.any(s < 0):
        raise ValueError("sinr must be non-negative")
    return _out(np.asarray(bandwidth, dtype=float) * np.log1p(s) / math.log(2.0))
