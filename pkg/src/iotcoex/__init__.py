"""Monte Carlo simulator for low-power IoT uplinks coexisting with LTE UEs
under multi-operator spectrum sharing (none, pooling, leasing)."""

from .admission import (
    AdmissionPolicy,
    AdmissionResult,
    Candidate,
    CoexistenceState,
    Victim,
    Violation,
    audit,
    baseline_throughput,
    check_candidate,
    exhaustive_admit,
    greedy_admit,
)
from .config import OperatorSpec, ScenarioConfig, TopologySpec, config_from_dict, load_config
from .errors import (
    AssociationError,
    AuditError,
    ConfigError,
    GenerationError,
    NoSpectrumError,
    ParseError,
    SimulationError,
    SizeError,
    ValidationError,
)
from .radio import Channel, NoiseModel, PropagationModel
from .runner import (
    ExperimentSummary,
    ModeComparison,
    SweepRow,
    TrialResult,
    compare_modes,
    run_experiment,
    run_trial,
    sweep_density,
    sweep_tolerance,
    trial_seed,
)
from .spectrum import IoTProfile, Operator, SharingMode, SpectrumPlan, build_plan, iot_profile
from .topology import Area, AssociationMode, BaseStation, Device, DeviceKind, Position, Topology

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
