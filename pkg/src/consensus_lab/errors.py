"""Exception hierarchy shared by every consensus_lab module."""


class ConsensusLabError(Exception):
    """Base class for all toolkit errors."""


class InvalidGraph(ConsensusLabError, ValueError):
    pass


class DimensionMismatch(ConsensusLabError, ValueError):
    pass


class AssumptionViolation(ConsensusLabError):
    """Some follower cannot be reached from any leader."""

    def __init__(self, unreachable):
        self.unreachable = list(unreachable)
        super().__init__(f"followers unreachable from every leader: {self.unreachable}")


class SingularL1(ConsensusLabError):
    pass


class NumericalFailure(ConsensusLabError):
    pass


class NotStabilizable(ConsensusLabError):
    pass


class NewtonDivergence(ConsensusLabError):
    def __init__(self, message, history=()):
        self.history = list(history)
        super().__init__(message)


class SingularP(ConsensusLabError):
    pass


class WrongKind(ConsensusLabError):
    pass


class TrialStepFailure(ConsensusLabError):
    """State became invalid; adaptive steppers treat this as a rejected step."""


class WeightBelowOne(TrialStepFailure):
    pass


class NegativeArgument(ConsensusLabError, ValueError):
    pass


class WrongExponent(ConsensusLabError):
    pass


class NonFiniteState(TrialStepFailure):
    pass


class StepUnderflow(ConsensusLabError):
    pass


class RowStochasticViolation(ConsensusLabError):
    pass


class IncompatibleScenarios(ConsensusLabError):
    pass


class ScenarioError(ConsensusLabError, ValueError):
    """Malformed scenario or graph document."""
