"""Exceptions raised by multisub."""

from typing import Any, Optional


class MultisubError(Exception):
    """Base class for all multisub errors."""


class DimensionError(MultisubError, ValueError):
    """Operands live in lattices of different dimension."""


class DigitSetError(MultisubError, ValueError):
    """A digit set cannot be built or does not represent the cosets."""


class SchemeValidationError(MultisubError, ValueError):
    """A mask, operator or scheme set is malformed."""


class BudgetExceededError(MultisubError):
    """A combinatorial budget (words, operators, points) was exceeded."""


class StageError(MultisubError):
    """
    A pipeline stage refused to continue.

    Attributes:
        stage: Name of the refusing stage
        witness: Optional data explaining the refusal
    """

    stage = "pipeline"

    def __init__(self, message: str, witness: Optional[Any] = None, stage: Optional[str] = None):
        super().__init__(message)
        if stage is not None:
            self.stage = stage
        self.witness = witness

    def __str__(self) -> str:
        return f"[{self.stage}] {super().__str__()}"


class OmegaConstructionError(StageError):
    stage = "omega"


class AssumptionNError(StageError):
    stage = "assumption-n"


class InvarianceError(StageError):
    stage = "invariance"


class DisconnectedOmegaError(StageError):
    stage = "difference-space"


class SchemeFileError(MultisubError):
    """
    A scheme file could not be parsed.

    Attributes:
        path: JSON path of the offending field ("" for syntax errors)
    """

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
