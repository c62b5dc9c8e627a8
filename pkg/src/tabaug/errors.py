"""Exception hierarchy shared across the package.

The CLI maps each family to its own exit code, so raise the most specific
class that applies.
"""


class TabAugError(Exception):
    """Base class for all package errors."""


class DataError(TabAugError, ValueError):
    """Bad input data: missing files, unparseable cells, shape mismatches."""


class PlanError(TabAugError, ValueError):
    """Experiment plan could not be parsed or failed validation."""


class FitError(TabAugError, RuntimeError):
    """A model could not be fitted (all candidates failed, divergence, ...)."""


class NotFittedError(TabAugError, RuntimeError):
    """A transform or model was used before being fitted."""
