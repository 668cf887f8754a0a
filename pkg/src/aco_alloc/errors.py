"""Exception hierarchy for the ACO-OFDM allocation library."""


class AcoError(Exception):
    """Base class for all library errors."""


class InvalidGeometry(AcoError, ValueError):
    pass


class UnsupportedOrder(AcoError, ValueError):
    pass


class InvalidConstellation(AcoError, ValueError):
    pass


class InvalidParams(AcoError, ValueError):
    pass


class OutOfDomain(AcoError, ValueError):
    pass


class QuadratureFailure(AcoError, ArithmeticError):
    pass


class Infeasible(AcoError):
    """A budget or constraint set admits no solution."""


class InfeasibleQoS(Infeasible):
    """The rate floor exceeds the maximum achievable rate under the budget."""


class InfeasibleSet(Infeasible):
    pass


class BisectionFailure(AcoError, RuntimeError):
    pass


class SolverFailure(AcoError, RuntimeError):
    pass


class NonConvergence(SolverFailure):
    pass


class DimensionMismatch(AcoError, ValueError):
    pass


class TooFewSamples(AcoError, ValueError):
    pass


class ConfigError(AcoError, ValueError):
    pass
