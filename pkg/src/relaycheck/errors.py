"""Package-level exception types, mapped onto CLI exit codes."""


class ConfigError(ValueError):
    """A configuration file or CLI invocation is invalid (exit code 1)."""


class NumericError(RuntimeError):
    """A numerical routine failed to converge or produced non-finite output (exit code 2)."""
