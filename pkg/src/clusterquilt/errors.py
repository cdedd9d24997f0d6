"""Exception hierarchy shared by every module."""


class QuiltError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(QuiltError, ValueError):
    """Malformed or non-finite input, or mismatched dimensions."""


class InvalidRankError(InvalidInputError):
    """Requested rank is outside ``1 <= r <= min(rows, cols)``."""


class InvalidConfigError(InvalidInputError):
    """A simulation or CLI configuration is inconsistent.

    ``field`` names the offending configuration key when known.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class PatchValidationError(InvalidInputError):
    """A patch collection violates one of the structural constraints.

    ``constraint`` is a short machine-readable tag such as
    ``"disjoint-features"`` or ``"sample-coverage"``.
    """

    def __init__(self, message, constraint):
        super().__init__(message)
        self.constraint = constraint


class NoFeasibleOrderingError(QuiltError):
    """No patch ordering has a nonempty overlap at every step."""


class SizeCapError(QuiltError):
    """Exhaustive ordering search requested above the configured cap."""


class EmptyOverlapError(QuiltError):
    """A merge step found no samples shared with earlier patches."""

    def __init__(self, message, step=None, patch=None):
        super().__init__(message)
        self.step = step
        self.patch = patch


class SingularTransformError(QuiltError):
    """A merge transform is numerically singular and cannot be inverted."""

    def __init__(self, message, step=None, patch=None, condition=None):
        super().__init__(message)
        self.step = step
        self.patch = patch
        self.condition = condition


class DegeneratePatchError(QuiltError):
    """A patch (or its ground-truth block) has no usable signal."""


class GenerationError(QuiltError):
    """A rejection-sampling loop in the simulators ran out of attempts."""


class SplitInfeasibleError(QuiltError):
    """Prediction-validation could not find a usable train/test split."""

    def __init__(self, message, retries=None):
        super().__init__(message)
        self.retries = retries
