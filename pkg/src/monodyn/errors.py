"""Exception hierarchy.

Everything raised on purpose by the library derives from :class:`MonodynError`
so the CLI can turn it into a machine-readable failure record.
"""


class MonodynError(Exception):
    """Base class. ``path`` and ``frame`` name the offending input when known."""

    def __init__(self, message, *, path=None, frame=None):
        super().__init__(message)
        self.path = None if path is None else str(path)
        self.frame = frame

    def to_dict(self):
        out = {"error": type(self).__name__, "message": str(self)}
        if self.path is not None:
            out["path"] = self.path
        if self.frame is not None:
            out["frame"] = self.frame
        return out


class InvalidArgumentError(MonodynError, ValueError):
    pass


# raster container
class RasterFormatError(MonodynError):
    pass


class BadMagicError(RasterFormatError):
    pass


class RasterHeaderError(RasterFormatError):
    pass


class TruncatedPayloadError(RasterFormatError):
    pass


class NonFiniteRasterError(RasterFormatError, ValueError):
    pass


# scene bundles
class SceneError(MonodynError):
    pass


class MissingFileError(SceneError, FileNotFoundError):
    pass


class HeaderMismatchError(SceneError):
    """A raster's kind or channel count does not match its role in the bundle."""


class DimensionMismatchError(SceneError):
    pass


class TimeOrderError(SceneError):
    pass


class SceneValidationError(SceneError):
    """Malformed content that is not covered by a more specific class."""


class MissingFlowError(SceneError, KeyError):
    def __str__(self):
        # KeyError would otherwise repr() the message
        return self.args[0] if self.args else ""


class DegenerateFitError(MonodynError, ValueError):
    pass


class TimeRangeError(MonodynError, ValueError):
    pass


class InsufficientFramesError(MonodynError, ValueError):
    pass
