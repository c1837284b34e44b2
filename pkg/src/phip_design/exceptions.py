"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`DesignError`,
so callers (the CLI in particular) can separate validation failures from
numerical ones with two ``except`` clauses.
"""


class DesignError(Exception):
    """Base class for all package errors."""


class ValidationError(DesignError, ValueError):
    """Input data violates a documented precondition."""


class NumericalError(DesignError, ArithmeticError):
    """A computation could not be carried out reliably."""


# -- spectra ---------------------------------------------------------------

class NotSymmetric(ValidationError):
    pass


class IndefiniteBeyondTol(ValidationError):
    pass


class NotPsd(IndefiniteBeyondTol):
    """An atom matrix has a clearly negative eigenvalue."""


class DimensionMismatch(ValidationError):
    pass


class SingularInformationMatrix(NumericalError):
    pass


class RankDeficientObservations(NumericalError):
    pass


# -- instance --------------------------------------------------------------

class ParseError(ValidationError):
    pass


class SchemaError(ValidationError):
    pass


class BadParams(ValidationError):
    pass


# -- relax -----------------------------------------------------------------

class DidNotConverge(NumericalError):
    """Raised on request only; carries the last certificate."""

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class SingularIterate(SingularInformationMatrix):
    pass


# -- combinat --------------------------------------------------------------

class AllAtomsNull(ValidationError):
    pass


class NothingAffordable(ValidationError):
    pass


class TooLarge(ValidationError):
    pass


class NotApplicable(ValidationError):
    """A method does not apply to the budget mode of a problem."""


# -- rounding / bounds -----------------------------------------------------

class BadBudget(ValidationError):
    pass


class BudgetTooSmall(ValidationError):
    pass


class BudgetScaleOverflow(ValidationError):
    pass


class NotSorted(ValidationError):
    pass


class BadSum(ValidationError):
    pass
