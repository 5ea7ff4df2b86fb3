"""Exception types shared across the package."""


class MaskFormatError(Exception):
    """A mask/grid file could not be decoded."""


class MalformedHeaderError(MaskFormatError):
    """Bad magic, dimensions or maxval in a mask/grid file."""


class TruncatedPayloadError(MaskFormatError):
    """Payload byte count does not match the product of the dims."""


class ShapeMismatchError(ValueError):
    """Two grids that must share dims do not."""


class AllForegroundError(ValueError):
    """No background voxel exists, distances are undefined."""


class EmptyMaskError(ValueError):
    """Operation requires at least one foreground voxel."""


class NoBackgroundError(ValueError):
    """Operation requires at least one background voxel."""


class InvalidMaxRadiusError(ValueError):
    """Radius sampling bound must be a positive integer."""


class ExhaustedRetriesError(RuntimeError):
    """No centerline voxel matched any sampled radius within the retry budget."""


class CanvasTooSmallError(ValueError):
    """Synthetic tree root disk does not fit the canvas."""


class ZeroReferenceComponentsError(ValueError):
    """Component error ratio undefined for a reference with no components."""


class DegenerateReferenceError(ValueError):
    """AUC undefined when the reference holds a single class."""


class ModelLoadError(RuntimeError):
    """Model file missing, malformed, or uses unsupported operators."""


class ShapeContractViolationError(RuntimeError):
    """Model produced an output whose extent differs from its input."""


class OperatorFailureError(RuntimeError):
    """A reconnection operator raised; message carries the iteration index."""


class MissingOperatorError(KeyError):
    """Experiment plan references a train size with no operator."""
