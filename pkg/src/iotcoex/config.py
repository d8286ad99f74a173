"""Scenario configuration: one JSON document, strict keys, documented defaults."""

from __future__ import annotations

import dataclasses
import json
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .admission import AdmissionPolicy
from .errors import ConfigError
from .radio import Channel, NoiseModel, PropagationModel
from .spectrum import Operator, SharingMode, iot_profile

GENERATORS = ("hex", "uniform", "csv")


@dataclass(frozen=True)
class TopologySpec:
    generator: str = "hex"
    rings: int = 1
    inter_site_distance: float = 2000.0
    assignment: str = "per-operator-overlay"
    area: tuple[float, float, float, float] | None = None
    count_per_operator: int = 7
    path: str | None = None
    shared: bool = True


@dataclass(frozen=True)
class OperatorSpec:
    id: int
    band_low_hz: float
    band_high_hz: float
    shared_fraction: float = 1.0
    is_mop: bool = False

    def to_operator(self) -> Operator:
        return Operator(self.id, Channel(self.band_low_hz, self.band_high_hz), self.shared_fraction, self.is_mop)


def _default_operators() -> tuple[OperatorSpec, ...]:
    return (
        OperatorSpec(0, 1920e6, 1940e6),
        OperatorSpec(1, 1940e6, 1960e6),
    )


@dataclass(frozen=True)
class ScenarioConfig:
    """All simulation knobs. Power and bandwidth defaults follow the LTE/eMTC
    coexistence setup: UEs at 25 dBm on 5 MHz carriers, IoT at 20 dBm on
    1 MHz channels, a -62 dBm interference gate and 10% tolerated loss."""

    topology: TopologySpec = field(default_factory=TopologySpec)
    operators: tuple[OperatorSpec, ...] = field(default_factory=_default_operators)
    mode: SharingMode = SharingMode.NONE
    ues_per_cell: int = 20
    iot_candidates_per_cell: int = 2000
    ue_channel_width: float = 5e6
    iot_channel_width: float = 1e6
    iot_profile: str | None = None
    ue_tx_power: float = 25.0
    iot_tx_power: float = 20.0
    policy: AdmissionPolicy = field(default_factory=AdmissionPolicy)
    propagation: PropagationModel = field(default_factory=PropagationModel)
    noise: NoiseModel = field(default_factory=NoiseModel)
    shadowing_sigma_db: float = 0.0
    ue_intercell_interference: bool = False
    pool_at_exclusive_bs: bool = False
    center_cell_only: bool = False
    trials: int = 10
    master_seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.ues_per_cell < 0 or self.iot_candidates_per_cell < 0:
            raise ConfigError("device counts must be >= 0")
        if self.topology.generator not in GENERATORS:
            raise ConfigError(f"topology.generator must be one of {GENERATORS}")
        if self.topology.generator == "csv" and not self.topology.path:
            raise ConfigError("topology.path is required for the csv generator")
        if self.topology.generator == "uniform" and self.topology.area is None:
            raise ConfigError("topology.area is required for the uniform generator")
        if not self.operators:
            raise ConfigError("at least one operator is required")
        if self.shadowing_sigma_db < 0:
            raise ConfigError("shadowing_sigma_db must be >= 0")
        if not (self.ue_channel_width > 0 and self.iot_channel_width > 0):
            raise ConfigError("channel widths must be positive")
        if self.iot_profile is not None:
            try:
                iot_profile(self.iot_profile)
            except KeyError as exc:
                raise ConfigError(str(exc)) from None
        if self.master_seed < 0:
            raise ConfigError("master_seed must be a non-negative integer")

    def build_operators(self) -> list[Operator]:
        try:
            return [spec.to_operator() for spec in self.operators]
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def effective_iot_width(self) -> float:
        return iot_profile(self.iot_profile).bandwidth if self.iot_profile else self.iot_channel_width

    @property
    def effective_iot_power(self) -> float:
        if self.iot_profile:
            return min(self.iot_tx_power, iot_profile(self.iot_profile).max_tx_power)
        return self.iot_tx_power

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def with_policy(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, policy=dataclasses.replace(self.policy, **changes))

    def with_topology(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, topology=dataclasses.replace(self.topology, **changes))

    def with_shared_fraction(self, fraction: float) -> "ScenarioConfig":
        ops = tuple(dataclasses.replace(o, shared_fraction=fraction) for o in self.operators)
        return dataclasses.replace(self, operators=ops)

    def to_dict(self) -> dict[str, Any]:
        return _to_jsonable(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"


def _to_jsonable(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, SharingMode):
        return obj.value
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(x) for x in obj]
    return obj


def _build(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    kwargs = {}
    for name, value in data.items():
        kwargs[name] = _coerce(hints[name], value, f"{where}.{name}")
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _coerce(tp, value, where: str):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin in (typing.Union, types.UnionType):
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(inner[0], value, where)
    if dataclasses.is_dataclass(tp):
        return _build(tp, value, where)
    if tp is SharingMode:
        try:
            return SharingMode(value)
        except ValueError:
            raise ConfigError(f"{where}: mode must be one of none, pooling, leasing") from None
    if origin is tuple:
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list")
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_coerce(args[0], v, f"{where}[{i}]") for i, v in enumerate(value))
        if len(value) != len(args):
            raise ConfigError(f"{where}: expected {len(args)} values")
        return tuple(_coerce(a, v, f"{where}[{i}]") for i, (a, v) in enumerate(zip(args, value)))
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string")
        return value
    return value


def config_from_dict(data: dict) -> ScenarioConfig:
    return _build(ScenarioConfig, data, "config")


def load_config(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(data)
