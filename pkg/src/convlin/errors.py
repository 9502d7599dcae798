"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems (bad flags,
bad config files, invalid experiment setups) exit with 1, numerical
failures exit with 2.
"""


class ConfigError(ValueError):
    """Invalid experiment, task, or training configuration."""


class ShapeError(ValueError):
    """Operands with incompatible or unsupported dimensions."""


class ZeroMatrixError(ValueError):
    """An all-zero matrix was passed where a nonzero one is required."""


class MultiplicityError(ValueError):
    """The top singular value is degenerate (multiplicity > 1).

    Raised by operations that only make sense for a unique top singular
    pair; callers that can handle degeneracy should branch on the
    decomposition's multiplicity instead of catching this.
    """


class NumericalError(RuntimeError):
    """Base class for numerical failures."""


class ConvergenceError(NumericalError):
    """An iteration failed to converge within its sweep budget."""


class StepOverflowError(NumericalError):
    """The requested step count would overflow the weight growth.

    Carries ``max_t``, the largest step count that stays representable
    for the given learning rate and spectrum.
    """

    def __init__(self, message: str, max_t: int):
        super().__init__(message)
        self.max_t = max_t
