"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: ConfigError -> 2, PreconditionError -> 3,
ExternalModelError -> 4.
"""


class UqError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(UqError):
    """Malformed configuration file or invalid option combination."""


class PreconditionError(UqError):
    """An operation's precondition is violated (sizes, supports, ranks)."""


class ExternalModelError(UqError):
    """An external solver run failed beyond recovery."""
