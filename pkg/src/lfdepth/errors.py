"""Exception types raised across the pipeline.

Every error derives from :class:`LightFieldError` so callers (the CLI in
particular) can map data problems to a single exit code.
"""


class LightFieldError(Exception):
    """Base class for all data errors raised by lfdepth."""


class MissingView(LightFieldError):
    pass


class MalformedManifest(LightFieldError):
    pass


class DimensionMismatch(LightFieldError, ValueError):
    pass


class CorruptImage(LightFieldError):
    pass


class IndexOutOfRange(LightFieldError, IndexError):
    pass


class MalformedPfm(LightFieldError):
    pass


class DegenerateEpi(LightFieldError, ValueError):
    pass


class DegenerateGrid(LightFieldError, ValueError):
    pass


class ImageTooSmall(LightFieldError, ValueError):
    pass


class NoCoherentPixels(LightFieldError):
    pass


class NonFiniteLoss(LightFieldError, FloatingPointError):
    pass


class InvalidSpec(LightFieldError, ValueError):
    pass


class EmptyMask(LightFieldError, ValueError):
    pass
