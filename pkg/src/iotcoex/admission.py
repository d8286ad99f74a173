"""Admission of IoT transmitters alongside cellular uplink traffic.

A served UE is a *victim*: IoT power landing in its carrier at its serving
BS counts against (a) an absolute interference threshold and (b) a cap on
the relative Shannon-throughput loss with respect to its IoT-free baseline.
Under leasing, UEs of the master operator also obey a separate loss cap
against devices of the other operators.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import radio
from .errors import NoSpectrumError, SizeError
from .radio import Channel, NoiseModel, PropagationModel
from .topology import Device, Position, Topology

# comparison slack so that values sitting exactly on a limit are admitted
THRESHOLD_EPS_DB = 1e-9
DEGRADATION_EPS = 1e-12
CACHE_TOL_DB = 1e-9
LN2 = math.log(2.0)

EXHAUSTIVE_MAX_CANDIDATES = 12
EXHAUSTIVE_MAX_CHANNELS = 4


@dataclass(frozen=True)
class AdmissionPolicy:
    interference_threshold: float = -62.0
    degradation_tolerance: float = 0.1
    channel_retries: int = 1
    order: str = "shuffle"
    enforce_threshold: bool = True
    enforce_degradation: bool = True
    mop_tolerance: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.degradation_tolerance <= 1.0:
            raise ValueError("degradation_tolerance must be in [0, 1]")
        if self.mop_tolerance is not None and not 0.0 <= self.mop_tolerance <= 1.0:
            raise ValueError("mop_tolerance must be in [0, 1]")
        if self.channel_retries < 1:
            raise ValueError("channel_retries must be >= 1")
        if self.order not in ("shuffle", "given"):
            raise ValueError(f"unknown order {self.order!r}")

    @property
    def mop_cap(self) -> float:
        return self.degradation_tolerance if self.mop_tolerance is None else self.mop_tolerance


@dataclass(frozen=True)
class Victim:
    """A served UE as seen by its serving base station."""

    ue_id: int
    operator_id: int
    bs_index: int
    bs_id: int
    bs_position: Position
    channel: Channel
    signal_dbm: float
    noise_dbm: float
    background_dbm: float = radio.NO_INTERFERENCE_DBM
    position: Position | None = None
    tx_power: float | None = None


@dataclass(eq=False)
class Candidate:
    """An IoT device seeking admission.

    ``gain_db`` holds per-BS extra gain (e.g. shadowing) on top of pathloss;
    ``rx_dbm`` is the resulting received power at every BS of the topology.
    """

    id: int
    operator_id: int
    position: Position
    tx_power: float
    channels: tuple[Channel, ...]
    rx_dbm: np.ndarray
    gain_db: np.ndarray | None = None
    priority: int = 0
    cell_id: int | None = None
    serving_index: int | None = None
    rx_mw: np.ndarray | None = None

    def __post_init__(self):
        if self.rx_mw is None:
            self.rx_mw = radio.dbm_to_mw(np.asarray(self.rx_dbm, dtype=float))


@dataclass(frozen=True)
class Violation:
    kind: str  # "interference" | "degradation" | "mop_cap" | "cache"
    ue_id: int
    value: float
    limit: float


def build_victims(
    ues: Sequence[Device],
    topology: Topology,
    model: PropagationModel,
    noise_model: NoiseModel,
    intercell_interference: bool = False,
    gain_db: Callable[[Device], np.ndarray] | None = None,
) -> list[Victim]:
    """Victim records for served UEs (those with a channel and serving BS).

    With ``intercell_interference`` the co-channel UEs of other cells add a
    fixed background term to every UE's baseline.
    """
    served = [u for u in ues if u.channel is not None and u.serving_bs is not None]
    if not served:
        return []
    pos = np.array([u.position for u in served], dtype=float)
    rx = np.array([u.tx_power for u in served])[:, None] - radio.pathloss_db(model, topology.distances(pos))
    if gain_db is not None:
        rx = rx + np.array([gain_db(u) for u in served])
    rx_mw = radio.dbm_to_mw(rx)
    bs_idx = [topology.index_of[u.serving_bs.id] for u in served]
    victims = []
    for k, ue in enumerate(served):
        b = bs_idx[k]
        background = radio.NO_INTERFERENCE_DBM
        if intercell_interference:
            total = 0.0
            for j, other in enumerate(served):
                if bs_idx[j] == b:
                    continue
                frac = radio.overlap_fraction(other.channel, ue.channel)
                if frac > 0:
                    total += rx_mw[j, b] * frac
            if total > 0:
                background = radio.mw_to_dbm(total)
        victims.append(Victim(
            ue_id=ue.id,
            operator_id=ue.operator_id,
            bs_index=b,
            bs_id=ue.serving_bs.id,
            bs_position=ue.serving_bs.position,
            channel=ue.channel,
            signal_dbm=float(rx[k, b]),
            noise_dbm=radio.noise_dbm(noise_model, ue.channel.bandwidth),
            background_dbm=background,
            position=ue.position,
            tx_power=ue.tx_power,
        ))
    return victims


def baseline_throughput(victim: Victim) -> float:
    """Shannon rate of a UE with no IoT interference."""
    sinr = radio.sinr_linear(victim.signal_dbm, victim.background_dbm, victim.noise_dbm)
    return radio.throughput_bps(victim.channel.bandwidth, sinr)


def build_candidates(
    devices: Sequence[Device],
    topology: Topology,
    model: PropagationModel,
    channels_for: Callable[[Device], Sequence[Channel]],
    gain_db: np.ndarray | None = None,
    priority_for: Callable[[Device], int] | None = None,
) -> list[Candidate]:
    """Wrap IoT devices as admission candidates with precomputed BS rx powers.

    ``gain_db`` is an optional (n_devices, n_bs) matrix added to the link budget.
    """
    if not devices:
        return []
    pos = np.array([d.position for d in devices], dtype=float)
    tx = np.array([d.tx_power for d in devices], dtype=float)
    rx = tx[:, None] - radio.pathloss_db(model, topology.distances(pos))
    if gain_db is not None:
        rx = rx + gain_db
    rx_mw = radio.dbm_to_mw(rx)
    out = []
    for k, dev in enumerate(devices):
        out.append(Candidate(
            id=dev.id,
            operator_id=dev.operator_id,
            position=dev.position,
            tx_power=dev.tx_power,
            channels=tuple(channels_for(dev)),
            rx_dbm=rx[k],
            gain_db=None if gain_db is None else gain_db[k],
            priority=priority_for(dev) if priority_for else 0,
            cell_id=dev.cell_id,
            serving_index=None if dev.serving_bs is None else topology.index_of[dev.serving_bs.id],
            rx_mw=rx_mw[k],
        ))
    return out


class CoexistenceState:
    """Admitted IoT set plus per-UE aggregate IoT interference, kept incrementally.

    Confined to one trial; ``copy`` before exploring hypothetical branches.
    """

    def __init__(self, victims: Sequence[Victim], mop_id: int | None = None):
        self.victims = tuple(victims)
        self.mop_id = mop_id
        v = self.victims
        self.bs_index = np.array([x.bs_index for x in v], dtype=np.int64)
        self.operator_ids = np.array([x.operator_id for x in v], dtype=np.int64)
        self.bandwidth = np.array([x.channel.bandwidth for x in v], dtype=float)
        self.signal_mw = radio.dbm_to_mw(np.array([x.signal_dbm for x in v], dtype=float))
        self.floor_mw = (radio.dbm_to_mw(np.array([x.noise_dbm for x in v], dtype=float))
                         + radio.dbm_to_mw(np.array([x.background_dbm for x in v], dtype=float)))
        self.baseline_bps = self.bandwidth * np.log1p(self.signal_mw / self.floor_mw) / LN2
        self.interference_mw = np.zeros(len(v))
        self.admitted: list[tuple[Candidate, Channel]] = []
        self._lows = np.array([x.channel.low for x in v], dtype=float)
        self._highs = np.array([x.channel.high for x in v], dtype=float)
        self._affected: dict[Channel, tuple[np.ndarray, np.ndarray]] = {}
        self._ceilings: dict[tuple, np.ndarray] = {}

    def copy(self) -> "CoexistenceState":
        new = object.__new__(CoexistenceState)
        new.__dict__.update(self.__dict__)
        new.interference_mw = self.interference_mw.copy()
        new.admitted = list(self.admitted)
        return new

    def affected(self, channel: Channel) -> tuple[np.ndarray, np.ndarray]:
        """Victim indices overlapped by ``channel`` and the overlap fractions."""
        hit = self._affected.get(channel)
        if hit is None:
            width = np.minimum(self._highs, channel.high) - np.maximum(self._lows, channel.low)
            idx = np.flatnonzero(width > 0)
            hit = (idx, width[idx] / channel.bandwidth)
            self._affected[channel] = hit
        return hit

    def _loss_ceiling(self, tolerance: float) -> np.ndarray:
        """Largest IoT interference (mW) per UE keeping throughput loss within ``tolerance``."""
        if tolerance >= 1.0:
            return np.full(len(self.victims), np.inf)
        snr = self.signal_mw / self.floor_mw
        with np.errstate(divide="ignore"):
            return self.signal_mw / ((1.0 + snr) ** (1.0 - tolerance) - 1.0) - self.floor_mw

    def ceiling(self, policy: AdmissionPolicy, foreign_to_mop: bool = False) -> np.ndarray:
        """Conservative per-UE interference ceiling; staying below it satisfies every check."""
        key = (policy, foreign_to_mop)
        lim = self._ceilings.get(key)
        if lim is None:
            lim = np.full(len(self.victims), np.inf)
            if policy.enforce_threshold:
                lim = np.minimum(lim, radio.dbm_to_mw(policy.interference_threshold))
            if policy.enforce_degradation:
                lim = np.minimum(lim, self._loss_ceiling(policy.degradation_tolerance))
            if foreign_to_mop:
                lim = np.where(self.operator_ids == self.mop_id,
                               np.minimum(lim, self._loss_ceiling(policy.mop_cap)), lim)
            lim = lim * (1.0 - 1e-9)
            self._ceilings[key] = lim
        return lim

    def current_bps(self, interference_mw: np.ndarray | None = None, idx=slice(None)) -> np.ndarray:
        i_mw = self.interference_mw[idx] if interference_mw is None else interference_mw
        return self.bandwidth[idx] * np.log1p(self.signal_mw[idx] / (self.floor_mw[idx] + i_mw)) / LN2

    def degradation(self, interference_mw: np.ndarray | None = None, idx=slice(None)) -> np.ndarray:
        base = self.baseline_bps[idx]
        cur = self.current_bps(interference_mw, idx)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(base > 0, (base - cur) / base, 0.0)

    def interference_dbm(self) -> dict[tuple[int, Channel], float]:
        """Aggregate IoT interference per (BS id, UE channel)."""
        out = {}
        for v, i_mw in zip(self.victims, self.interference_mw):
            out[(v.bs_id, v.channel)] = radio.mw_to_dbm(i_mw) if i_mw > 0 else radio.NO_INTERFERENCE_DBM
        return out

    def admit(self, candidate: Candidate, channel: Channel) -> None:
        idx, frac = self.affected(channel)
        if len(idx):
            self.interference_mw[idx] += candidate.rx_mw[self.bs_index[idx]] * frac
        self.admitted.append((candidate, channel))

    @property
    def admitted_count(self) -> int:
        return len(self.admitted)


def check_candidate(candidate: Candidate, channel: Channel | None, state: CoexistenceState,
                    policy: AdmissionPolicy) -> Violation | None:
    """``None`` if ``candidate`` may transmit on ``channel``, else the first violation.

    Only UEs whose carrier overlaps ``channel`` are examined, in victim order;
    for each, the threshold is tested before the throughput-loss caps.
    """
    if channel is None or not candidate.channels:
        raise NoSpectrumError(f"candidate {candidate.id} has no eligible channel")
    idx, frac = state.affected(channel)
    if not len(idx):
        return None
    new_i = state.interference_mw[idx] + candidate.rx_mw[state.bs_index[idx]] * frac
    foreign = state.mop_id is not None and candidate.operator_id != state.mop_id
    # only UEs pushed past the conservative ceiling can fail; test them exactly, in order
    for k in np.flatnonzero(new_i > state.ceiling(policy, foreign)[idx]).tolist():
        v = int(idx[k])
        i_mw = float(new_i[k])
        if policy.enforce_threshold:
            i_dbm = 10.0 * math.log10(i_mw)
            if i_dbm > policy.interference_threshold + THRESHOLD_EPS_DB:
                return Violation("interference", state.victims[v].ue_id, i_dbm, policy.interference_threshold)
        base = float(state.baseline_bps[v])
        if base > 0:
            cur = state.bandwidth[v] * math.log1p(state.signal_mw[v] / (state.floor_mw[v] + i_mw)) / LN2
            deg = (base - cur) / base
        else:
            deg = 0.0
        if policy.enforce_degradation and deg > policy.degradation_tolerance + DEGRADATION_EPS:
            return Violation("degradation", state.victims[v].ue_id, deg, policy.degradation_tolerance)
        if foreign and state.operator_ids[v] == state.mop_id and deg > policy.mop_cap + DEGRADATION_EPS:
            return Violation("mop_cap", state.victims[v].ue_id, deg, policy.mop_cap)
    return None


@dataclass
class AdmissionResult:
    admitted: int
    admitted_cochannel: int
    rejections: dict[str, int] = field(default_factory=dict)
    admitted_ids: list[int] = field(default_factory=list)


def greedy_admit(candidates: Sequence[Candidate], state0: CoexistenceState, policy: AdmissionPolicy,
                 rng: np.random.Generator) -> tuple[CoexistenceState, AdmissionResult]:
    """Single pass over shuffled candidates; each gets ``channel_retries`` random draws.

    Higher ``priority`` candidates are visited first (stable w.r.t. the
    shuffle). A rejected candidate is never reconsidered.
    """
    state = state0.copy()
    n = len(candidates)
    order = rng.permutation(n) if policy.order == "shuffle" else np.arange(n)
    order = sorted(order.tolist(), key=lambda i: -candidates[i].priority)
    rejections: Counter[str] = Counter()
    cochannel = 0
    for i in order:
        cand = candidates[i]
        if not cand.channels:
            rejections["no_spectrum"] += 1
            continue
        verdict = None
        for _ in range(policy.channel_retries):
            channel = cand.channels[int(rng.integers(len(cand.channels)))]
            verdict = check_candidate(cand, channel, state, policy)
            if verdict is None:
                if len(state.affected(channel)[0]):
                    cochannel += 1
                state.admit(cand, channel)
                break
        if verdict is not None:
            rejections[verdict.kind] += 1
    result = AdmissionResult(state.admitted_count, cochannel, dict(sorted(rejections.items())),
                             [c.id for c, _ in state.admitted])
    return state, result


def exhaustive_admit(candidates: Sequence[Candidate], state0: CoexistenceState,
                     policy: AdmissionPolicy) -> tuple[int, list[tuple[Candidate, Channel]]]:
    """Largest admissible subset over every subset and channel choice.

    Depth-first enumeration. A branch is cut only when it is infeasible
    (interference never decreases as devices are added, so supersets of an
    infeasible set are infeasible) or cannot beat the best count found.
    """
    if len(candidates) > EXHAUSTIVE_MAX_CANDIDATES:
        raise SizeError(f"{len(candidates)} candidates exceed the limit of {EXHAUSTIVE_MAX_CANDIDATES}")
    for c in candidates:
        if len(c.channels) > EXHAUSTIVE_MAX_CHANNELS:
            raise SizeError(f"candidate {c.id} has {len(c.channels)} channels, limit {EXHAUSTIVE_MAX_CHANNELS}")
    n = len(candidates)
    best: list = [[]]

    def search(i: int, state: CoexistenceState, chosen: list) -> None:
        if len(chosen) > len(best[0]):
            best[0] = list(chosen)
        if i == n or len(chosen) + (n - i) <= len(best[0]):
            return
        cand = candidates[i]
        for channel in cand.channels:
            if check_candidate(cand, channel, state, policy) is None:
                nxt = state.copy()
                nxt.admit(cand, channel)
                chosen.append((cand, channel))
                search(i + 1, nxt, chosen)
                chosen.pop()
        search(i + 1, state, chosen)

    search(0, state0, [])
    return len(best[0]), best[0]


def recompute_interference_dbm(victim: Victim, admitted: Sequence[tuple[Candidate, Channel]],
                               model: PropagationModel) -> float:
    """Aggregate IoT interference at a victim's BS, rebuilt from positions."""
    if not admitted:
        return radio.NO_INTERFERENCE_DBM
    pos = np.array([c.position for c, _ in admitted], dtype=float)
    tx = np.array([c.tx_power + (0.0 if c.gain_db is None else c.gain_db[victim.bs_index])
                   for c, _ in admitted])
    lows = np.array([ch.low for _, ch in admitted])
    highs = np.array([ch.high for _, ch in admitted])
    frac = (np.clip(np.minimum(highs, victim.channel.high) - np.maximum(lows, victim.channel.low), 0, None)
            / (highs - lows))
    keep = frac > 0
    if not keep.any():
        return radio.NO_INTERFERENCE_DBM
    d = np.hypot(pos[keep, 0] - victim.bs_position[0], pos[keep, 1] - victim.bs_position[1])
    rx_mw = radio.dbm_to_mw(radio.rx_power_dbm(tx[keep], model, d))
    return radio.mw_to_dbm(float(np.sum(rx_mw * frac[keep])))


def audit(state: CoexistenceState, policy: AdmissionPolicy, model: PropagationModel) -> list[Violation]:
    """Recheck every constraint from scratch; an empty list means the state is valid.

    Also flags UEs whose cached interference drifted from the recomputation.
    """
    violations: list[Violation] = []
    for k, victim in enumerate(state.victims):
        i_dbm = recompute_interference_dbm(victim, state.admitted, model)
        cached = state.interference_mw[k]
        cached_dbm = radio.mw_to_dbm(cached) if cached > 0 else radio.NO_INTERFERENCE_DBM
        if not (cached_dbm == i_dbm or abs(cached_dbm - i_dbm) <= CACHE_TOL_DB):
            violations.append(Violation("cache", victim.ue_id, cached_dbm, i_dbm))
        if math.isinf(i_dbm):
            continue
        if policy.enforce_threshold and i_dbm > policy.interference_threshold + THRESHOLD_EPS_DB:
            violations.append(Violation("interference", victim.ue_id, i_dbm, policy.interference_threshold))
        base = baseline_throughput(victim)
        noise_and_bg = radio.mw_to_dbm(radio.dbm_to_mw(victim.noise_dbm) + radio.dbm_to_mw(victim.background_dbm))
        cur = radio.throughput_bps(victim.channel.bandwidth,
                                   radio.sinr_linear(victim.signal_dbm, i_dbm, noise_and_bg))
        deg = (base - cur) / base if base > 0 else 0.0
        if policy.enforce_degradation and deg > policy.degradation_tolerance + DEGRADATION_EPS:
            violations.append(Violation("degradation", victim.ue_id, deg, policy.degradation_tolerance))
        if state.mop_id is not None and victim.operator_id == state.mop_id and deg > policy.mop_cap + DEGRADATION_EPS:
            if any(c.operator_id != state.mop_id and victim.channel.overlap(ch) > 0 for c, ch in state.admitted):
                violations.append(Violation("mop_cap", victim.ue_id, deg, policy.mop_cap))
    return violations


def iot_sinr_db(state: CoexistenceState, topology: Topology, model: PropagationModel,
                noise_model: NoiseModel) -> np.ndarray:
    """Uplink SINR of each admitted IoT device at its serving BS (diagnostic only).

    Interference counts the other admitted IoT devices and the served UEs
    whose carriers overlap the device's channel. NaN for unassociated devices.
    """
    if not state.admitted:
        return np.empty(0)
    channels = sorted({ch for _, ch in state.admitted}, key=lambda c: (c.low, c.high))
    slot = {ch: m for m, ch in enumerate(channels)}
    per_channel = np.zeros((len(channels), len(topology)))
    for cand, ch in state.admitted:
        per_channel[slot[ch]] += cand.rx_mw
    lows = np.array([c.low for c in channels])
    highs = np.array([c.high for c in channels])
    # share of channel i's power falling into channel j
    share = (np.clip(np.minimum.outer(highs, highs) - np.maximum.outer(lows, lows), 0, None)
             / (highs - lows)[:, None])
    iot_at = share.T @ per_channel  # (channel, bs)

    ue_at = np.zeros_like(iot_at)
    if state.victims:
        ue_pos = np.array([v.position for v in state.victims], dtype=float)
        ue_tx = np.array([v.tx_power for v in state.victims], dtype=float)
        ue_rx = radio.dbm_to_mw(ue_tx[:, None] - radio.pathloss_db(model, topology.distances(ue_pos)))
        ue_share = (np.clip(np.minimum.outer(state._highs, highs) - np.maximum.outer(state._lows, lows), 0, None)
                    / (state._highs - state._lows)[:, None])
        ue_at = ue_share.T @ ue_rx
    noise = radio.dbm_to_mw(radio.noise_dbm(noise_model, highs - lows))

    out = np.full(len(state.admitted), math.nan)
    for k, (cand, ch) in enumerate(state.admitted):
        b = cand.serving_index
        if b is None:
            continue
        m = slot[ch]
        signal = cand.rx_mw[b]
        interference = iot_at[m, b] - signal + ue_at[m, b]
        out[k] = 10.0 * math.log10(signal / (max(interference, 0.0) + noise[m]))
    return out
