"""Exception hierarchy shared by all corrscen modules."""

from __future__ import annotations

from dataclasses import dataclass, field


class CorrScenError(Exception):
    """Base class for every error raised by this package."""


# ---------------------------------------------------------------------------
# scenario validation

@dataclass(frozen=True)
class Violation:
    """One violated scenario invariant.

    kind is one of "UnknownMeasurement", "IsolatedMeasurement",
    "AntiChainViolation", "DuplicateVertexProfile", "DuplicateName",
    "EmptySource", "BadOutcomeCount", "BadName", "UnarySource".
    names holds the offending measurement/source names.
    """

    kind: str
    names: tuple[str, ...]
    message: str


class ScenarioValidationError(CorrScenError):
    """Raised when a scenario description violates structural invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(v.message for v in self.violations))

    @property
    def kinds(self):
        return [v.kind for v in self.violations]


class NotAGraphScenario(CorrScenError):
    """A source of arity >= 3 was found where a graph scenario is required."""


class InvalidArity(CorrScenError):
    """Common-ancestor scenario parameters out of range (need 1 <= k < n)."""


# ---------------------------------------------------------------------------
# distributions

class UnknownVariable(CorrScenError):
    pass


class ZeroProbabilityCondition(CorrScenError):
    pass


class OverlappingSets(CorrScenError):
    pass


class InvalidDistribution(CorrScenError):
    """Probabilities negative beyond tolerance or not normalized."""


# ---------------------------------------------------------------------------
# correlations and classical models

class VariableMismatch(CorrScenError):
    pass


class ScenarioMismatch(CorrScenError):
    pass


class IrrationalKernel(CorrScenError):
    """Exact (rational) model data required but float data supplied."""


class NotStarForest(CorrScenError):
    pass


class NotACorrelation(CorrScenError):
    pass


class ResourceLimit(CorrScenError):
    """A configured node/time budget was exhausted before a verdict."""

    def __init__(self, message, nodes=None):
        super().__init__(message)
        self.nodes = nodes


# ---------------------------------------------------------------------------
# quantum models

class DimensionBudgetExceeded(CorrScenError):
    pass


class InvalidState(CorrScenError):
    pass


class InvalidPOVM(CorrScenError):
    pass


class DecompositionMismatch(CorrScenError):
    pass


# ---------------------------------------------------------------------------
# boxes, polytopes, embeddings

class ShapeMismatch(CorrScenError):
    pass


class EmptySettingSupport(CorrScenError):
    pass


class SignalingBox(CorrScenError):
    pass


class StrategyBudgetExceeded(CorrScenError):
    pass


class MalformedBGPInput(CorrScenError):
    pass


class MissingDecomposition(CorrScenError):
    """No pair of coordinate projections achieves the required perfect correlation."""
