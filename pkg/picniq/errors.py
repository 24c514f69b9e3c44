"""
Error types
Data and domain errors raised by the toolkit. The CLI maps every PicniqError
to exit code 2.
"""

from typing import Optional, Sequence


class PicniqError(Exception):
    """Base class for data/domain errors."""


class MatrixFormatError(PicniqError, ValueError):
    """Malformed comparison-matrix file."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownItemError(MatrixFormatError):
    """A row references an id that the header never declared."""


class DuplicatePairError(MatrixFormatError):
    """The same unordered pair appears twice in a matrix file."""


class DisconnectedGraphError(PicniqError):
    """The comparison graph splits into several components."""

    def __init__(self, components: Sequence[Sequence[str]]):
        self.components = [list(c) for c in components]
        named = "; ".join("{" + ", ".join(c) + "}" for c in self.components)
        super().__init__(
            f"comparison graph is disconnected into {len(self.components)} components: {named}"
        )


class ConvergenceError(PicniqError):
    """An optimizer stopped before meeting its tolerance."""

    def __init__(self, message: str, gradient_norm: Optional[float] = None):
        self.gradient_norm = gradient_norm
        if gradient_norm is not None:
            message = f"{message} (final gradient norm {gradient_norm:.3e})"
        super().__init__(message)


class EmptyTrainingSetError(PicniqError):
    """No pair records survive thresholding."""


class DimensionMismatchError(PicniqError, ValueError):
    """Feature or matrix dimensions do not line up."""


class MissingFeaturesError(PicniqError, ValueError):
    """An item needed for prediction has no feature vector."""


class IdMismatchError(PicniqError, ValueError):
    """Two score scales or a scale and a matrix cover different items."""


class SceneMismatchError(PicniqError):
    """Prediction and ground-truth directories hold different scenes."""

    def __init__(self, missing_in_pred: Sequence[str], missing_in_truth: Sequence[str]):
        self.missing_in_pred = sorted(missing_in_pred)
        self.missing_in_truth = sorted(missing_in_truth)
        super().__init__(
            f"scene mismatch: missing predictions for {self.missing_in_pred}, "
            f"missing ground truth for {self.missing_in_truth}"
        )


class BudgetError(PicniqError, ValueError):
    """Pair budget below the connectivity reserve."""


class InvalidMatrixError(PicniqError, ValueError):
    """A matrix violates its invariants where a valid one is required."""


class ScalingError(PicniqError, ValueError):
    """A scaler cannot run on the given input (e.g. no comparisons at all)."""


class FeatureFormatError(PicniqError, ValueError):
    """Malformed features file: duplicate ids or non-finite values."""
