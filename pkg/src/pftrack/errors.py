"""Exception hierarchy shared by all pftrack modules."""


class PFTrackError(Exception):
    """Base class for every error raised by pftrack."""


class AllZeroWeights(PFTrackError, ValueError):
    """Every particle weight is zero; the particle cloud must be reinitialized."""


class NotNormalized(PFTrackError, ValueError):
    pass


class NoHeavyParticles(PFTrackError):
    """Light particles exist but there is no heavy attractor to move them toward."""


class LengthMismatch(PFTrackError, ValueError):
    pass


class DimensionMismatch(PFTrackError, ValueError):
    pass


class ImageTooSmall(PFTrackError, ValueError):
    pass


class EmptyRegion(PFTrackError, ValueError):
    pass


class ZeroCount(PFTrackError, ValueError):
    """A region contains no pixel that falls in any bin (edge mode)."""


class AllPixelsBelowEdgeThreshold(ZeroCount):
    pass


class TargetLost(PFTrackError):
    pass


class MissingFrames(PFTrackError, FileNotFoundError):
    pass


class MalformedGroundTruth(PFTrackError, ValueError):
    def __init__(self, line_number, text):
        super().__init__(f"line {line_number}: cannot parse {text!r} as x,y,w,h")
        self.line_number = line_number


class NoGroundTruth(PFTrackError, ValueError):
    pass


class IoFailure(PFTrackError, OSError):
    pass
