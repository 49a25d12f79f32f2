"""Exception hierarchy shared by all stylelab modules."""


class StyleLabError(Exception):
    """Base class for all library errors."""


class ContractError(StyleLabError, ValueError):
    """A precondition of an operation was violated by the caller."""


class ShapeError(ContractError):
    """Tensor shapes are inconsistent with the operation."""


class InputError(StyleLabError, ValueError):
    """Malformed or empty user-supplied input (files, corpora, text)."""


class ConfigError(StyleLabError, ValueError):
    """Invalid or incomplete experiment/metric configuration."""


class MetricUndefinedError(StyleLabError, ValueError):
    """A metric cannot be computed for this example (e.g. all tokens OOV)."""
