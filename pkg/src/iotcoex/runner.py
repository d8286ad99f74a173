"""Seeded Monte Carlo trials, experiments, sweeps and paired mode comparisons."""

from __future__ import annotations

import hashlib
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import topology as topo
from .admission import (
    AdmissionPolicy,
    CoexistenceState,
    audit,
    build_candidates,
    build_victims,
    greedy_admit,
    iot_sinr_db,
)
from .config import ScenarioConfig
from .errors import AuditError, ConfigError, SimulationError
from .spectrum import SharingMode, assign_ue_channels, build_plan
from .topology import AssociationMode, DeviceKind

log = logging.getLogger(__name__)

Z95 = 1.959963984540054
REJECTION_KINDS = ("interference", "degradation", "mop_cap", "no_spectrum")


def trial_seed(master_seed: int, trial_index: int) -> int:
    """Stable 63-bit seed for one trial, independent of execution order."""
    digest = hashlib.blake2b(f"{master_seed}:{trial_index}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big") >> 1


@dataclass
class TrialResult:
    trial_index: int
    seed: int
    mode: str
    admitted_total: int
    admitted_cochannel: int
    served_ues: int
    unserved_ues: int
    degradations: list[float]
    rejections: dict[str, int]
    median_iot_sinr_db: float
    runtime_ms: float = field(default=0.0, compare=False)

    @property
    def mean_degradation(self) -> float:
        return float(np.mean(self.degradations)) if self.degradations else 0.0

    @property
    def max_degradation(self) -> float:
        return float(np.max(self.degradations)) if self.degradations else 0.0


@dataclass
class Stats:
    n: int
    mean: float
    std: float
    ci95: float

    @classmethod
    def of(cls, values: Sequence[float]) -> "Stats":
        """Sample mean, sample std (ddof=1) and normal-approximation 95% half-width."""
        arr = np.asarray(values, dtype=float)
        n = len(arr)
        mean = float(np.mean(arr)) if n else math.nan
        std = float(np.std(arr, ddof=1)) if n > 1 else 0.0
        return cls(n, mean, std, Z95 * std / math.sqrt(n) if n else math.nan)


@dataclass
class ExperimentSummary:
    mode: str
    trials: int
    admitted: Stats
    admitted_cochannel: Stats
    mean_degradation: float
    unserved_ues_mean: float
    rejections: dict[str, int]


def _rng_streams(seed: int) -> dict[str, np.random.SeedSequence]:
    names = ("topology", "placement", "ue_channels", "admission", "shadowing")
    return dict(zip(names, np.random.SeedSequence(seed).spawn(len(names))))


def build_topology(config: ScenarioConfig, seed=None) -> topo.Topology:
    spec = config.topology
    op_ids = [o.id for o in config.operators]
    if spec.generator == "hex":
        return topo.gen_hex_grid(spec.rings, spec.inter_site_distance, op_ids, spec.assignment, seed, spec.shared)
    if spec.generator == "uniform":
        area = topo.Area(*spec.area)
        return topo.gen_uniform(area, spec.count_per_operator, op_ids, seed, spec.shared)
    t = topo.load_bs_csv(spec.path)
    unknown = set(t.operators) - set(op_ids)
    if unknown:
        raise ConfigError(f"BS file references unknown operator(s) {sorted(unknown)}")
    return t


def trial_topology(config: ScenarioConfig, trial_index: int) -> topo.Topology:
    """The layout that ``run_trial`` uses for ``trial_index``."""
    streams = _rng_streams(trial_seed(config.master_seed, trial_index))
    return build_topology(config, streams["topology"])


def center_cells(t: topo.Topology) -> set[int]:
    """Per operator, the BS closest to the area centre."""
    d = t.distances([t.area.center])[0]
    out = set()
    for op in t.operators:
        cols = np.flatnonzero(t.operator_ids == op)
        out.add(t.base_stations[int(cols[np.argmin(d[cols])])].id)
    return out


def run_trial(config: ScenarioConfig, trial_index: int, mode: SharingMode | str | None = None) -> TrialResult:
    """One realisation: layout, drop, plan, UE carriers, greedy admission, audit.

    The layout, drop, UE carriers and admission stream depend only on
    ``(master_seed, trial_index)``, so different modes on the same index are
    paired on identical placements.
    """
    start = time.perf_counter()
    mode = SharingMode(mode if mode is not None else config.mode)
    seed = trial_seed(config.master_seed, trial_index)
    streams = _rng_streams(seed)
    try:
        t = build_topology(config, streams["topology"])
        devices = topo.place_devices(t, config.ues_per_cell, config.iot_candidates_per_cell,
                                     config.ue_tx_power, config.effective_iot_power, streams["placement"])
        plan = build_plan(config.build_operators(), mode, config.ue_channel_width,
                          config.effective_iot_width, config.pool_at_exclusive_bs)
        ues = [d for d in devices if d.kind is DeviceKind.UE]
        iots = [d for d in devices if d.kind is DeviceKind.IOT]
        ues = _associate(t, ues, AssociationMode.OWN_OPERATOR)
        iot_assoc = AssociationMode.OWN_OPERATOR if mode is SharingMode.NONE else AssociationMode.ANY_SHARED
        iots = _associate(t, iots, iot_assoc)
        served, unserved = assign_ue_channels(plan, ues, streams["ue_channels"])

        ue_gain = iot_gain = None
        if config.shadowing_sigma_db > 0:
            # every (device, BS) link gets its own log-normal draw
            srng = np.random.default_rng(streams["shadowing"])
            gains = srng.normal(0.0, config.shadowing_sigma_db, size=(len(devices), len(t)))
            ue_gain = lambda d: gains[d.id]  # noqa: E731
            iot_gain = gains[[d.id for d in iots]] if iots else None

        victims = build_victims(served, t, config.propagation, config.noise,
                                config.ue_intercell_interference, ue_gain)
        mop_id = plan.mop_id if mode is SharingMode.LEASING else None
        state0 = CoexistenceState(victims, mop_id)
        candidates = build_candidates(
            iots, t, config.propagation,
            channels_for=lambda d: plan.eligible_iot_channels(d.operator_id, d.serving_bs.shared),
            gain_db=iot_gain,
            priority_for=(lambda d: int(d.operator_id == mop_id)) if mop_id is not None else None,
        )
        state, result = greedy_admit(candidates, state0, config.policy,
                                     np.random.default_rng(streams["admission"]))
        violations = audit(state, config.policy, config.propagation)
        if violations:
            raise AuditError(f"{len(violations)} constraint violation(s), first: {violations[0]}", violations)
    except SimulationError as exc:
        raise type(exc)(f"trial {trial_index} (seed {seed}, mode {mode.value}): {exc}") from exc

    admitted_total, cochannel = result.admitted, result.admitted_cochannel
    if config.center_cell_only:
        keep = center_cells(t)
        in_center = [(c, ch) for c, ch in state.admitted if c.cell_id in keep]
        admitted_total = len(in_center)
        cochannel = sum(1 for _, ch in in_center if len(state.affected(ch)[0]))
    sinr = iot_sinr_db(state, t, config.propagation, config.noise)
    sinr = sinr[np.isfinite(sinr)]
    return TrialResult(
        trial_index=trial_index,
        seed=seed,
        mode=mode.value,
        admitted_total=admitted_total,
        admitted_cochannel=cochannel,
        served_ues=len(victims),
        unserved_ues=len(unserved),
        degradations=[float(x) for x in state.degradation()],
        rejections={k: result.rejections.get(k, 0) for k in REJECTION_KINDS},
        median_iot_sinr_db=float(np.median(sinr)) if len(sinr) else math.nan,
        runtime_ms=(time.perf_counter() - start) * 1e3,
    )


def _associate(t: topo.Topology, devices, mode) -> list[topo.Device]:
    if not devices:
        return []
    pos = np.array([d.position for d in devices], dtype=float)
    ops = np.array([d.operator_id for d in devices])
    idx = topo.associate_many(t, pos, ops, mode)
    return [replace(d, serving_bs=t.base_stations[int(i)]) for d, i in zip(devices, idx)]


def _trial_job(args):
    config, index, mode = args
    return run_trial(config, index, mode)


def run_trials(config: ScenarioConfig, indices: Sequence[int], mode=None, workers: int = 1) -> list[TrialResult]:
    jobs = [(config, i, mode) for i in indices]
    if workers <= 1 or len(jobs) <= 1:
        results = [_trial_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_trial_job, jobs))
    return sorted(results, key=lambda r: r.trial_index)


def summarize(results: Sequence[TrialResult]) -> ExperimentSummary:
    rejections = {k: sum(r.rejections.get(k, 0) for r in results) for k in REJECTION_KINDS}
    return ExperimentSummary(
        mode=results[0].mode,
        trials=len(results),
        admitted=Stats.of([r.admitted_total for r in results]),
        admitted_cochannel=Stats.of([r.admitted_cochannel for r in results]),
        mean_degradation=float(np.mean([r.mean_degradation for r in results])),
        unserved_ues_mean=float(np.mean([r.unserved_ues for r in results])),
        rejections=rejections,
    )


def run_experiment(config: ScenarioConfig, workers: int = 1, mode=None) -> tuple[ExperimentSummary, list[TrialResult]]:
    results = run_trials(config, range(config.trials), mode, workers)
    return summarize(results), results


@dataclass
class SweepRow:
    param: float
    mode: str
    mean: float
    std: float
    ci95: float
    ratio: float


def _ratio(num: float, den: float) -> float:
    if den > 0:
        return num / den
    return 1.0 if num == 0 else math.inf


def _sweep(configs: Sequence[tuple[float, ScenarioConfig]], modes, workers: int) -> list[SweepRow]:
    modes = [SharingMode(m) for m in modes]
    rows = []
    for param, cfg in configs:
        means = {}
        for m in modes:
            summary, _ = run_experiment(cfg, workers, m)
            means[m] = summary
        base = means.get(SharingMode.NONE)
        for m in modes:
            s = means[m].admitted
            ratio = _ratio(s.mean, base.admitted.mean) if base is not None else math.nan
            rows.append(SweepRow(param, m.value, s.mean, s.std, s.ci95, ratio))
    return rows


def sweep_tolerance(config: ScenarioConfig, tolerances: Sequence[float],
                    modes=(SharingMode.NONE, SharingMode.POOLING), workers: int = 1) -> list[SweepRow]:
    """One experiment per (tolerance, mode) on the same trial seeds."""
    tol = list(tolerances)
    if tol != sorted(tol):
        raise ConfigError("tolerances must be sorted ascending")
    return _sweep([(x, config.with_policy(degradation_tolerance=x)) for x in tol], modes, workers)


def sweep_density(config: ScenarioConfig, inter_site_distances: Sequence[float],
                  modes=(SharingMode.NONE, SharingMode.POOLING), workers: int = 1) -> list[SweepRow]:
    """One experiment per (inter-site distance, mode) on a hexagonal layout."""
    if config.topology.generator != "hex":
        raise ConfigError("density sweep needs the hex topology generator")
    return _sweep([(x, config.with_topology(inter_site_distance=float(x))) for x in inter_site_distances],
                  modes, workers)


@dataclass
class ModeComparison:
    trial_indices: list[int]
    counts: dict[str, list[int]]
    ratios: dict[str, list[float]]
    differences: dict[str, list[int]]
    mean_ratio: dict[str, float]
    ratio_of_means: dict[str, float]
    results: dict[str, list[TrialResult]] = field(repr=False, default_factory=dict)


def compare_modes(config: ScenarioConfig, modes=None, workers: int = 1) -> ModeComparison:
    """Paired comparison of sharing modes against NONE on identical seeds.

    ``mean_ratio`` averages per-trial ratios over trials where NONE admitted
    at least one device; ``ratio_of_means`` divides the mean counts.
    """
    if len(config.operators) < 2:
        raise ConfigError("mode comparison needs at least two operators")
    if modes is None:
        modes = [SharingMode.NONE, SharingMode.POOLING]
        if any(o.is_mop for o in config.operators):
            modes.append(SharingMode.LEASING)
    modes = [SharingMode(m) for m in modes]
    if SharingMode.NONE not in modes:
        modes.insert(0, SharingMode.NONE)
    indices = list(range(config.trials))
    results = {m.value: run_trials(config, indices, m, workers) for m in modes}
    counts = {k: [r.admitted_total for r in v] for k, v in results.items()}
    none = counts["none"]
    ratios, diffs, mean_ratio, rom = {}, {}, {}, {}
    for k, v in counts.items():
        ratios[k] = [_ratio(a, b) for a, b in zip(v, none)]
        diffs[k] = [a - b for a, b in zip(v, none)]
        finite = [a / b for a, b in zip(v, none) if b > 0]
        mean_ratio[k] = float(np.mean(finite)) if finite else math.nan
        rom[k] = _ratio(float(np.mean(v)), float(np.mean(none)))
    return ModeComparison(indices, counts, ratios, diffs, mean_ratio, rom, results)
