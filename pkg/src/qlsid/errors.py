"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command-line front end.
"""


class QlsError(Exception):
    """Base class for all errors raised by :mod:`qlsid`."""

    exit_code = 5


class InputError(QlsError, ValueError):
    """Malformed or invalid user input (files, parameters)."""

    exit_code = 2


class DimensionError(InputError):
    """Matrix dimensions are not conformable or not even."""


class ContractError(QlsError):
    """A documented precondition or postcondition does not hold."""


class InfeasibleError(ContractError):
    """No solution exists for the requested factorization."""


class PurityError(ContractError):
    """The Gaussian input state is not pure."""


class SingularityError(QlsError):
    """Evaluation point lies on (or too close to) the spectrum of A."""


class StabilityError(ContractError):
    """The system is not Hurwitz stable where stability is required."""


class ConsistencyError(QlsError):
    """Criteria that must agree in theory disagree numerically.

    Usually means a tolerance is badly configured for the problem scale.
    """


class NumericalError(QlsError):
    """A linear-algebra step failed or was too ill conditioned."""


class DegeneracyError(NumericalError):
    """A Sylvester equation has no unique solution."""


class GlobalMinimalityError(QlsError):
    """The spectrum admits a realization with fewer modes."""

    exit_code = 3


class GenericityError(QlsError):
    """Poles are repeated or real; the Gilbert construction does not apply."""

    exit_code = 4


class ResidueRankError(GenericityError):
    """A residue of the spectrum has rank above one."""


class StructureError(GenericityError):
    """Pole or residue data cannot be paired into doubled-up form."""


class OrderError(NumericalError):
    """Detected model order differs from the requested one."""

    def __init__(self, message, detected=None):
        super().__init__(message)
        self.detected = detected


class InconsistentInputError(NumericalError):
    """Reconstruction violates physical realizability beyond tolerance."""
