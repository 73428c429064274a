"""Exception types shared across the package.

Validation-flavoured errors double as ValueError so plain callers can catch
them without importing this module; the CLI maps them to exit code 2 and
everything else raised during processing to exit code 3.
"""


class AfvError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(AfvError, ValueError):
    """Invalid argument, configuration value, or domain invariant violation."""


class GeometryXmlError(ValidationError):
    """Malformed or schema-violating array geometry XML."""


class BehindCameraError(ValidationError):
    """Point with z <= 0 cannot be projected through the pinhole model."""


class WavFormatError(AfvError):
    """File is not a WAV flavour this package reads (PCM16/24, float32)."""


class SceneError(ValidationError):
    """Synthetic scene is inconsistent (e.g. mixed output would clip)."""


class PackagingError(AfvError):
    """Request manifest references media that cannot be bundled."""


class ProcessingError(AfvError):
    """Pipeline stage failure, wrapped with the stage label."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
