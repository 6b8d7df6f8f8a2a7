"""Exception hierarchy shared across the package."""


class RangerError(Exception):
    """Base class for all package errors."""

    exit_code = 2


class InputError(RangerError, ValueError):
    pass


class GridError(InputError):
    pass


class EmptyPdpError(InputError):
    """No PDP bin lies above the detection threshold."""


class DimError(InputError):
    pass


class ConfigError(InputError):
    pass


class SplitError(InputError):
    pass


class DegenerateFeatureError(InputError):
    """A feature has zero sample variance and cannot be standardized."""


class NumericalError(RangerError, ArithmeticError):
    exit_code = 3


class EigError(NumericalError):
    pass


class FitError(NumericalError):
    pass


class RankError(FitError):
    """More components were requested than the centered Gram matrix supports."""

    exit_code = 2


class EstimateError(NumericalError):
    pass
