"""Exception types shared across the package."""


class BudgetExceeded(RuntimeError):
    """An exhaustive enumeration would exceed its configured budget."""


class FitError(RuntimeError):
    """Nonlinear least squares failed to converge from every start."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConfigError(ValueError):
    """A run configuration failed validation; ``problems`` lists every issue."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
