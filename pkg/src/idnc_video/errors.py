"""Exception types shared across the package."""


class ArgumentError(ValueError):
    """An index, window or probability outside its valid range."""


class ContractViolation(ValueError):
    """A caller broke an operation's precondition (e.g. re-delivering a held packet)."""


class SessionComplete(Exception):
    """Every receiver already holds every packet of the GOP."""


class OracleUnavailable(RuntimeError):
    """Exact enumeration was refused because the instance exceeds its budget."""


class ConfigError(ValueError):
    """Invalid simulation configuration."""
