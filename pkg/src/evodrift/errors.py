"""Exception types shared across the package."""


class EvodriftError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(EvodriftError):
    """Invalid configuration value or unknown configuration key."""


class DimensionError(EvodriftError):
    """Operands have incompatible shapes."""


class ZeroDegreeError(EvodriftError):
    """An operation that divides by node degree met a degree-zero node."""


class DisconnectedGraphError(EvodriftError):
    """A distance-based quantity was requested on a disconnected snapshot."""


class SequenceFormatError(EvodriftError):
    """A snapshot-sequence file is malformed.

    Carries the offending path and, when known, the 1-based line number.
    """

    def __init__(self, message, path=None, line=None):
        detail = message
        if path is not None:
            detail = f"{path}: {detail}"
        if line is not None:
            detail = f"{detail} (line {line})"
        super().__init__(detail)
        self.path = path
        self.line = line


class NodeNotPresentError(EvodriftError):
    """A node index refers to a node that has not arrived yet."""


class EmptyMaskError(EvodriftError):
    """An observed-loss computation received an empty observation mask."""


class MissingLabelsError(EvodriftError):
    """Labels are required but absent (or absent on required indices)."""


class InsufficientHistoryError(EvodriftError):
    """Too few observed frames for the requested fit."""


class DegenerateFitError(EvodriftError):
    """A regression fit has no unique solution (e.g. all abscissae equal)."""


class NotClassificationError(EvodriftError):
    """A classification-only routine was called on a regression task."""


class LabelAccessError(EvodriftError):
    """A post-deployment label was requested outside an allowed purpose."""


class TooFewSamplesError(EvodriftError):
    """A statistic needs more samples than were provided."""


class ZeroActualError(EvodriftError):
    """Relative error is undefined because an actual value is not positive."""


class UnsupportedCompositeError(EvodriftError):
    """Gradient requested for a composite the backward pass does not cover."""


class CheckpointFormatError(EvodriftError):
    """A parameter checkpoint file is malformed."""

    def __init__(self, message: str, path=None, line=None):
        at = ""
        if path is not None:
            at = f" ({path}" + (f", line {line})" if line is not None else ")")
        super().__init__(message + at)
        self.path = path
        self.line = line
