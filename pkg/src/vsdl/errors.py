"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class VsdlError(Exception):
    exit_code = 1


class ConfigError(VsdlError, ValueError):
    """Invalid topology, channel parameters or training configuration."""

    exit_code = 2


class DataError(VsdlError, ValueError):
    """Corrupt or incomplete CSI data, labels or files."""

    exit_code = 3


class TrainingError(VsdlError, RuntimeError):
    exit_code = 4
