"""Operator bands, sharing modes and channel plans.

Each operator's licensed band is cut once: the bottom ``1 - shared_fraction``
stays exclusive, the top ``shared_fraction`` is contributed to sharing.
UEs always keep their operator's licensed carriers; the sharing mode decides
which blocks IoT devices may draw from.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, NoSpectrumError, ValidationError
from .radio import Channel
from .topology import Device


class SharingMode(str, enum.Enum):
    NONE = "none"
    POOLING = "pooling"
    LEASING = "leasing"


@dataclass(frozen=True)
class Operator:
    id: int
    licensed_band: Channel
    shared_fraction: float = 0.0
    is_mop: bool = False

    def __post_init__(self):
        if not 0.0 <= self.shared_fraction <= 1.0:
            raise ConfigError(f"operator {self.id}: shared_fraction must be in [0, 1]")

    @property
    def cut(self) -> float:
        """Frequency separating the exclusive (below) and shared (above) parts."""
        band = self.licensed_band
        return band.low + round(band.bandwidth * (1.0 - self.shared_fraction))

    @property
    def exclusive_band(self) -> Channel | None:
        return Channel(self.licensed_band.low, self.cut) if self.cut > self.licensed_band.low else None

    @property
    def shared_band(self) -> Channel | None:
        return Channel(self.cut, self.licensed_band.high) if self.licensed_band.high > self.cut else None

    @property
    def exclusive_bandwidth(self) -> float:
        return self.cut - self.licensed_band.low

    @property
    def shared_bandwidth(self) -> float:
        return self.licensed_band.high - self.cut


@dataclass(frozen=True)
class IoTProfile:
    name: str
    bandwidth: float
    max_tx_power: float
    power_classes: tuple[float, ...]
    drx_cycle_connected: float | None
    drx_cycle_idle: float


_CATALOG = {
    "EC-GSM-IoT": IoTProfile("EC-GSM-IoT", 200e3, 33.0, (33.0, 23.0), None, 52 * 60.0),
    "NB-IoT": IoTProfile("NB-IoT", 180e3, 23.0, (23.0, 20.0), 10.24, 3 * 3600.0),
    "eMTC": IoTProfile("eMTC", 1.08e6, 23.0, (23.0, 20.0), 5.12, 44 * 60.0),
}


def iot_profile(name: str) -> IoTProfile:
    try:
        return _CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown IoT profile {name!r}; known: {sorted(_CATALOG)}") from None


def iot_profiles() -> list[IoTProfile]:
    return list(_CATALOG.values())


def channelize(band: Channel | None, width: float) -> list[Channel]:
    """Contiguous ``width``-wide channels from the band's low edge; the remainder is unused."""
    if not width > 0:
        raise ValueError("channel width must be positive")
    if band is None:
        return []
    # tolerate float noise in bandwidth/width
    n = int(np.floor(band.bandwidth / width + 1e-9))
    return [Channel(band.low + k * width, band.low + (k + 1) * width) for k in range(n)]


def merge_bands(bands: Iterable[Channel | None]) -> list[Channel]:
    """Union of frequency blocks as sorted, non-touching intervals."""
    spans = sorted((b.low, b.high) for b in bands if b is not None)
    merged: list[list[float]] = []
    for lo, hi in spans:
        if merged and lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return [Channel(lo, hi) for lo, hi in merged]


@dataclass(frozen=True)
class SpectrumPlan:
    """Channel lists per operator and device class for one sharing mode.

    ``shared_channels`` holds the pool (POOLING) or the MOP's leased block
    (LEASING); it is empty under NONE.
    """

    mode: SharingMode
    operators: tuple[Operator, ...]
    ue_channels: Mapping[int, tuple[Channel, ...]]
    iot_channels: Mapping[int, tuple[Channel, ...]]
    shared_channels: tuple[Channel, ...] = ()
    mop_id: int | None = None
    pool_at_exclusive_bs: bool = False

    def operator(self, operator_id: int) -> Operator:
        for op in self.operators:
            if op.id == operator_id:
                return op
        raise KeyError(f"unknown operator {operator_id}")

    def eligible_iot_channels(self, operator_id: int, at_shared_bs: bool = True) -> tuple[Channel, ...]:
        own = self.iot_channels[operator_id]
        if self.mode is SharingMode.NONE or not self.shared_channels:
            return own
        if not (at_shared_bs or self.pool_at_exclusive_bs):
            return own
        if self.mode is SharingMode.LEASING and operator_id == self.mop_id:
            return own
        return own + self.shared_channels

    def is_leased(self, channel: Channel) -> bool:
        return self.mode is SharingMode.LEASING and any(channel.overlap(c) > 0 for c in self.shared_channels)


def build_plan(
    operators: Sequence[Operator],
    mode: SharingMode | str,
    ue_channel_width: float = 5e6,
    iot_channel_width: float = 1e6,
    pool_at_exclusive_bs: bool = False,
) -> SpectrumPlan:
    mode = SharingMode(mode)
    ops = tuple(operators)
    if not ops:
        raise ConfigError("at least one operator is required")
    ids = [op.id for op in ops]
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate operator id")
    bands = sorted((op.licensed_band.low, op.licensed_band.high) for op in ops)
    for (_, hi), (lo, _) in zip(bands, bands[1:]):
        if lo < hi:
            raise ConfigError("operator licensed bands overlap")
    mops = [op.id for op in ops if op.is_mop]
    if len(mops) > 1:
        raise ConfigError("at most one master operator (is_mop) is allowed")
    if mode is SharingMode.LEASING and len(mops) != 1:
        raise ConfigError("leasing mode requires exactly one operator with is_mop=true")

    ue = {op.id: tuple(channelize(op.licensed_band, ue_channel_width)) for op in ops}
    if mode is SharingMode.NONE:
        iot = {op.id: tuple(channelize(op.licensed_band, iot_channel_width)) for op in ops}
        return SpectrumPlan(mode, ops, ue, iot)

    if mode is SharingMode.POOLING:
        iot = {op.id: tuple(channelize(op.exclusive_band, iot_channel_width)) for op in ops}
        pool: list[Channel] = []
        for block in merge_bands(op.shared_band for op in ops):
            pool.extend(channelize(block, iot_channel_width))
        return SpectrumPlan(mode, ops, ue, iot, tuple(pool), None, pool_at_exclusive_bs)

    mop = next(op for op in ops if op.is_mop)
    iot = {op.id: tuple(channelize(op.licensed_band, iot_channel_width)) for op in ops}
    leased = tuple(channelize(mop.shared_band, iot_channel_width))
    return SpectrumPlan(mode, ops, ue, iot, leased, mop.id, pool_at_exclusive_bs)


def partition_pool(requests: Sequence[float], contributions: Sequence[float], pool: float) -> list[float]:
    """Split ``pool`` Hz among operators that request more than is available.

    Unsatisfied operators receive shares proportional to their contribution;
    whatever exceeds an operator's request is handed back and redistributed
    the same way among the rest, until no one is over-served.
    """
    req = [float(r) for r in requests]
    con = [float(c) for c in contributions]
    if len(req) != len(con):
        raise ValidationError("requests and contributions differ in length")
    if any(r < 0 for r in req) or any(c < 0 for c in con):
        raise ValidationError("requests and contributions must be non-negative")
    if abs(sum(con) - pool) > 1.0:
        raise ValidationError(f"contributions sum to {sum(con)} Hz, pool is {pool} Hz")
    if sum(req) <= pool:
        return req

    alloc = [0.0] * len(req)
    active = [i for i, r in enumerate(req) if r > 0]
    remaining = float(pool)
    while active:
        weight = sum(con[i] for i in active)
        if weight > 0:
            share = {i: remaining * (con[i] / weight) for i in active}
        else:
            share = {i: remaining / len(active) for i in active}
        capped = [i for i in active if share[i] >= req[i]]
        if not capped:
            for i in active:
                alloc[i] = share[i]
            break
        for i in capped:
            alloc[i] = req[i]
            remaining -= req[i]
        active = [i for i in active if i not in capped]
    return alloc


def assign_ue_channels(plan: SpectrumPlan, ues: Sequence[Device], seed=None) -> tuple[list[Device], list[Device]]:
    """Give every UE one of its operator's carriers, cell by cell.

    Within a cell the operator's carriers are shuffled once and dealt out in
    UE-id order; UEs beyond the carrier count are returned as unserved. Every
    cell draws from the full list (reuse 1).
    """
    rng = np.random.default_rng(seed)
    by_cell: dict[tuple, list[Device]] = {}
    for ue in ues:
        cell = ue.serving_bs.id if ue.serving_bs is not None else ue.cell_id
        by_cell.setdefault((cell, ue.operator_id), []).append(ue)
    served: list[Device] = []
    unserved: list[Device] = []
    for (cell, op), members in sorted(by_cell.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        channels = plan.ue_channels[op]
        order = rng.permutation(len(channels)) if channels else []
        for k, ue in enumerate(sorted(members, key=lambda d: d.id)):
            if k < len(channels):
                served.append(replace(ue, channel=channels[int(order[k])]))
            else:
                unserved.append(ue)
    served.sort(key=lambda d: d.id)
    return served, unserved


def draw_iot_channel(plan: SpectrumPlan, device: Device, rng: np.random.Generator,
                     at_shared_bs: bool | None = None) -> Channel:
    if at_shared_bs is None:
        at_shared_bs = device.serving_bs.shared if device.serving_bs is not None else True
    eligible = plan.eligible_iot_channels(device.operator_id, at_shared_bs)
    if not eligible:
        raise NoSpectrumError(f"device {device.id} has no eligible IoT channel")
    return eligible[int(rng.integers(len(eligible)))]
