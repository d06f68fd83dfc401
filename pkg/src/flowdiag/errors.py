from __future__ import annotations


class FlowDiagError(Exception):
    kind = "error"


class ContractViolation(FlowDiagError, ValueError):
    kind = "contract_violation"


class NumericalFailure(FlowDiagError, ArithmeticError):
    kind = "numerical_failure"


class ModelError(FlowDiagError, ValueError):
    """Raised when model parameters put a channel outside the regime a method handles."""

    kind = "model"


class ResonanceError(ModelError):
    kind = "resonance"


class UnstableModeError(ModelError):
    kind = "unstable_mode"


class DegenerateEnergyError(ModelError):
    kind = "degenerate_energy"


class DegenerateChannelError(ModelError):
    kind = "degenerate_channel"


class ScenarioError(FlowDiagError, ValueError):
    kind = "validation"

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class OutputError(FlowDiagError, OSError):
    """An output file cannot be written in the requested format."""

    kind = "io"
