"""Exception types shared across the package."""


class InputError(ValueError):
    """Invalid argument, malformed file, or violated precondition."""


class ShapeError(InputError):
    """Tensor operands have incompatible shapes."""


class NumericError(ArithmeticError):
    """A numeric operation would produce inf/nan (e.g. division by zero)."""


class TrainingError(RuntimeError):
    """Training diverged; the message names the offending loss term."""
