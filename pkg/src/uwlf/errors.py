"""Exception hierarchy shared by every uwlf module."""


class UwlfError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatch(UwlfError):
    pass


class ValueOutOfRange(UwlfError):
    pass


class EvenAngularSize(UwlfError):
    pass


class IndexOutOfRange(UwlfError, IndexError):
    pass


class ShapeMismatch(UwlfError, ValueError):
    pass


class NonPositiveDepth(UwlfError, ValueError):
    pass


class EmptySpec(UwlfError, ValueError):
    pass


class DepthUnitMismatch(UwlfError, ValueError):
    pass


class NegativeBeta(UwlfError, ValueError):
    pass


class ViewCountMismatch(UwlfError, ValueError):
    pass


class UnknownPreset(UwlfError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class EmptyHypotheses(UwlfError, ValueError):
    pass


class EmptyInput(UwlfError, ValueError):
    pass


class EmptyFarSet(UwlfError, ValueError):
    pass


class InsufficientSamples(UwlfError, ValueError):
    """Too few usable pixels to fit an attenuation coefficient."""

    def __init__(self, message, channel=None):
        super().__init__(message)
        self.channel = channel


class TooSmall(UwlfError, ValueError):
    pass


class NoValidOverlap(UwlfError, ValueError):
    pass


class IoFailure(UwlfError, OSError):
    pass


class IncompleteBundle(UwlfError, ValueError):
    pass


class MissingView(UwlfError, FileNotFoundError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ChecksumMismatch(UwlfError):
    pass


class MalformedManifest(UwlfError, ValueError):
    pass
