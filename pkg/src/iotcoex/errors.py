"""Exception hierarchy shared by all simulator modules."""


class SimulationError(Exception):
    """Base class for every error raised by the simulator."""


class ConfigError(SimulationError, ValueError):
    """Invalid scenario, operator or policy configuration."""


class ParseError(SimulationError, ValueError):
    """Malformed input file. ``line`` is 1-based and counts the header."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(SimulationError, ValueError):
    """Well-formed input that violates a semantic rule (e.g. duplicate ids)."""


class GenerationError(SimulationError):
    """Random layout or placement could not be produced."""


class AssociationError(SimulationError):
    """No eligible base station for a device."""


class NoSpectrumError(SimulationError):
    """A device has no eligible channel to transmit on."""


class SizeError(SimulationError, ValueError):
    """Instance too large for exhaustive search."""


class AuditError(SimulationError):
    """An admitted configuration violates a coexistence constraint."""

    def __init__(self, message: str, violations=()):
        super().__init__(message)
        self.violations = list(violations)
