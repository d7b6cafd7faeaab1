"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: ConfigError -> 1, ValidationError -> 3,
everything else raised at runtime -> 2.
"""


class LeexError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(LeexError):
    """Bad or incomplete configuration (missing paths, invalid ranges)."""


class ValidationError(LeexError):
    """Input data violates a documented contract (duplicate ids, bad runs)."""


class ScorerError(LeexError):
    """A scorer call failed: protocol error, bad length, or non-finite output."""


class DegenerateModelError(LeexError):
    """A relevance model collapsed to an empty vocabulary."""
