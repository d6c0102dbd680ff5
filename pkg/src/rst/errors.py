"""Exception types shared across the package."""


class ValidationError(ValueError):
    """An input violates a declared precondition (bad distribution, shape, config value)."""


class ContractViolation(RuntimeError):
    """An internal protocol was broken, e.g. finetuning without a captured snapshot."""


class ConfigError(ValueError):
    """An experiment config file is missing, malformed, or contains unknown keys."""
