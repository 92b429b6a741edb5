"""Exception hierarchy shared by all kanaft modules."""


class KanAftError(Exception):
    """Base class for every error raised by this package."""


class DomainError(KanAftError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ShapeError(KanAftError, ValueError):
    """Array or network dimensions do not line up."""


class ConfigError(KanAftError, ValueError):
    """Invalid configuration (network shape, hyperparameters, CLI config)."""


class UnsupportedDegreeError(KanAftError, ValueError):
    pass


class ContractViolation(KanAftError, RuntimeError):
    """An internal postcondition failed; indicates a bug or misuse."""


class DivergenceError(KanAftError, FloatingPointError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, message: str = ""):
        self.epoch = epoch
        super().__init__(message or f"non-finite loss at epoch {epoch}")


class DegenerateError(KanAftError, ValueError):
    """Input admits no meaningful fit (e.g. no uncensored records)."""


class NumericGuardError(KanAftError, FloatingPointError):
    pass


class UnsupportedTailError(KanAftError, ValueError):
    """A censoring survival curve reached zero inside a required integral."""


class UndefinedMetricError(KanAftError, ValueError):
    pass


class SchemaError(KanAftError, ValueError):
    pass


class UnsupportedShapeError(KanAftError, ValueError):
    """Operation only supports shallow ``[p, 1]`` networks."""
