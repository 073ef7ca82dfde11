"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration, file-format and I/O
problems exit 1; violated data/model invariants exit 2.
"""


class MMFusionError(Exception):
    """Base class for all package errors."""


class ConfigError(MMFusionError):
    """Invalid or unknown configuration value / key."""


class FormatError(MMFusionError):
    """A file (dataset blob, manifest, checkpoint) is malformed."""


class InvariantError(MMFusionError):
    """Data or model state violates a documented invariant."""


class ShapeError(InvariantError):
    """Operands have incompatible shapes; message names both."""
