"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration/usage problems exit 1,
data/format problems exit 2, numerical failures exit 3.
"""


class MimolocError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(MimolocError):
    """Invalid or unknown configuration key/value."""


class CoincidentLocationError(MimolocError):
    """A candidate location coincides with an antenna position."""


class ShapeMismatchError(MimolocError):
    """Array arguments disagree on dimensions."""


class CsiFormatError(MimolocError):
    """Malformed CSI file: bad magic, version, truncation or overflow."""


class SingularEfimError(MimolocError):
    """Effective FIM is numerically rank-deficient."""


class EmptySidelobeError(MimolocError):
    """No grid points remain outside the mainlobe region."""
