"""Exception types shared across the package."""


class NumericalError(RuntimeError):
    """A linear-algebra step failed (rank deficiency, non-PSD matrix, ...)."""


class DynamicsFitError(NumericalError):
    """Regression Gram matrix was singular; raise the regularizer."""


class BackwardPassError(NumericalError):
    """Q_uu stayed non-positive-definite after maximum regularization."""


class ConfigError(ValueError):
    """Experiment config failed validation.

    ``violations`` lists every failing field, not just the first.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage, message):
        self.stage = stage
        super().__init__(f"[{stage}] {message}")
