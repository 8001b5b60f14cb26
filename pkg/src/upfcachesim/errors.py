"""Shared exception types.

ConfigError means the caller supplied an invalid configuration and is
reported with the offending field; InvariantViolation means the simulator
itself broke a conservation or accounting rule and is always fatal.
"""


class ConfigError(ValueError):
    pass


class InvariantViolation(RuntimeError):
    pass
