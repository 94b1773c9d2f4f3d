"""Exception hierarchy.

Every error carries an ``error_class`` slug which the command line prints so
that failures can be parsed by scripts.
"""


class DepthGroundError(Exception):
    error_class = "error"
    exit_code = 1


class InputMissingError(DepthGroundError):
    error_class = "input-missing"


class FormatError(DepthGroundError, ValueError):
    error_class = "format-error"


class ShapeError(DepthGroundError, ValueError):
    error_class = "shape-mismatch"


class ConfigError(DepthGroundError, ValueError):
    error_class = "config-error"


class InsufficientSupportError(DepthGroundError, ValueError):
    error_class = "insufficient-support"


class EmptyRegionError(DepthGroundError, ValueError):
    error_class = "empty-region"


class DivergenceError(DepthGroundError, ArithmeticError):
    error_class = "divergence"
    exit_code = 2
