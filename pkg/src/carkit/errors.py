"""Exception hierarchy.

``CarkitError`` subclasses split into two families that the CLI maps to
exit codes: ``InvalidInput`` (malformed data) and ``InfeasibleOperation``
(well-formed data, but the requested operation is undefined for it).
"""


class CarkitError(Exception):
    pass


class InvalidInput(CarkitError, ValueError):
    pass


class InfeasibleOperation(CarkitError):
    pass


class DimensionMismatch(InvalidInput):
    pass


class InvalidDistribution(InvalidInput):
    pass


class UnknownScenario(InvalidInput):
    pass


class InvalidParams(InvalidInput):
    pass


class PreconditionViolated(InvalidInput):
    pass


class MixedPartitions(InvalidInput):
    pass


class SupportMismatch(InvalidInput):
    pass


class NonPositivePrior(InvalidInput):
    pass


class ZeroProbabilityObservation(InfeasibleOperation):
    pass


class ZeroProbabilityEvent(InfeasibleOperation):
    pass


class SingularMatrix(InfeasibleOperation):
    pass


class InfeasibleGamma(InfeasibleOperation):
    pass


class NotCar(InfeasibleOperation):
    pass


class UndefinedJeffrey(InfeasibleOperation):
    pass


class InfeasibleConstraints(InfeasibleOperation):
    pass


class InapplicableAnalysis(InfeasibleOperation):
    pass
