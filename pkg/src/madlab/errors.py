"""Shared exception types.

Contract violations (bad shapes, wrong feature dimension, unfitted state)
are raised as plain ValueError; the classes below cover faults that the
CLI maps to a dedicated exit code.
"""


class NumericFault(ArithmeticError):
    """A primitive produced a non-finite value."""

    def __init__(self, op_name, detail=""):
        msg = f"non-finite output in op '{op_name}'"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
        self.op_name = op_name


class TrainingFailure(RuntimeError):
    """Training diverged or could not produce a usable model."""


class DegenerateFeature(ValueError):
    """A feature column has zero variance after outlier trimming."""

    def __init__(self, feature_name):
        super().__init__(f"feature '{feature_name}' has zero variance after trimming")
        self.feature_name = feature_name
