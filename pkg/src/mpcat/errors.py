"""Exception types shared across the package.

The CLI maps these onto distinct exit codes, so numeric checks and
config/budget validation must raise the specific class rather than a
bare ValueError.
"""


class ConfigError(ValueError):
    """Invalid configuration (bad parameter, malformed config file)."""


class BudgetError(RuntimeError):
    """A run would exceed a declared size/memory/time budget."""


class NumericError(RuntimeError):
    """A numeric invariant (unitarity, positivity, trace) was violated."""
