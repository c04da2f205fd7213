"""Exception types.

Every error carries an ``exit_code`` so the command line can map failures to
its exit-code taxonomy without a lookup table:

    0 ok, 1 config, 2 Assumption 1 (stabilizable/detectable),
    3 Riccati failure, 4 primal-dual matrix not Hurwitz, 5 numerical failure
"""


class SteadyCtlError(Exception):
    exit_code = 5


class ConfigError(SteadyCtlError, ValueError):
    exit_code = 1


# -- numerical kernel -------------------------------------------------------

class NumericalError(SteadyCtlError):
    exit_code = 5


class SingularMatrix(NumericalError):
    pass


class ConvergenceFailure(NumericalError):
    pass


class NotHurwitz(NumericalError):
    pass


class ResidualTooLarge(NumericalError):
    pass


class NonFiniteState(NumericalError):
    pass


class GridMismatch(NumericalError, ValueError):
    pass


# -- model assumptions ------------------------------------------------------

class AssumptionViolation(SteadyCtlError):
    """The pair (A, B) is not stabilizable or (A, Q) is not detectable."""

    exit_code = 2

    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class SingularKkt(AssumptionViolation):
    pass


class NoStabilizingSolution(SteadyCtlError):
    exit_code = 3


class NotHurwitzS(SteadyCtlError):
    """The primal-dual state matrix S = K^S T has an eigenvalue with Re >= 0."""

    exit_code = 4
