"""Exception types with stable kebab-case codes.

The codes are the identifiers reported on the wire protocol and used to pick
CLI exit codes, so they must stay stable.
"""


class CamplaceError(Exception):
    """Base class for all toolkit errors."""

    code = "error"


class SceneIoError(CamplaceError):
    code = "io-error"


class SceneParseError(CamplaceError):
    code = "parse-error"


class EmptyCloudError(CamplaceError):
    code = "empty-cloud"


class SinglePointCloudError(CamplaceError):
    code = "single-point-cloud"


class KOutOfRangeError(CamplaceError):
    code = "k-out-of-range"


class InvalidCenterIndexError(CamplaceError):
    code = "invalid-center-index"


class InvalidDimensionError(CamplaceError):
    code = "invalid-dimension"


class ZeroDirectionError(CamplaceError):
    code = "zero-direction"


class ShapeMismatchError(CamplaceError):
    code = "shape-mismatch"


class CameraMismatchError(CamplaceError):
    code = "camera-mismatch"


class DegenerateBboxError(CamplaceError):
    code = "degenerate-bbox"


class InvalidConfigError(CamplaceError):
    code = "invalid-config"


class ActionLengthMismatchError(CamplaceError):
    code = "action-length-mismatch"


class EpisodeFinishedError(CamplaceError):
    code = "episode-finished"


class InvalidPlacementError(CamplaceError):
    code = "invalid-placement"


class InfeasibleLatticeError(CamplaceError):
    code = "infeasible-lattice"


class UnknownModeError(CamplaceError):
    code = "unknown-mode"


class MalformedMessageError(CamplaceError):
    code = "malformed-message"


class BindFailureError(CamplaceError):
    code = "bind-failure"
