"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures to a
category without inspecting messages.
"""


class MassmedError(Exception):
    exit_code = 1


class InvalidArgumentError(MassmedError, ValueError):
    exit_code = 3


class DataError(MassmedError, ValueError):
    exit_code = 4


class SchemaError(DataError):
    pass


class EmptyDataError(DataError):
    pass


class ValidationError(DataError):
    pass


class NumericalError(MassmedError, ArithmeticError):
    exit_code = 5


class SingularDesignError(NumericalError):
    pass


class SeparationError(NumericalError):
    pass


class DegenerateVarianceError(NumericalError):
    pass


class EffectRangeError(NumericalError, OverflowError):
    pass


class FitError(NumericalError):
    """A sub-regression of the mediation system failed.

    ``component`` names the regression (``"outcome"`` or ``"mediator k"``).
    """

    def __init__(self, component, cause):
        self.component = component
        self.cause = cause
        super().__init__(f"{component} regression failed: {cause}")


class EngineError(MassmedError, RuntimeError):
    exit_code = 6


class UnknownScenarioError(InvalidArgumentError, KeyError):
    """Lookup of a scenario key that is not in the catalogue."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""
