"""Exception types raised across the package."""

from __future__ import annotations


class SemmapError(Exception):
    """Base class for all semmap errors."""


class DegenerateDistributionError(SemmapError):
    """Posterior normalizer underflowed; the belief cannot be renormalized."""


class DegenerateObservationError(SemmapError):
    """A sampled score vector was all zero and carries no information."""


class UnknownPointError(SemmapError):
    """A point id was referenced that does not exist in the map."""


class InsufficientAnchorsError(SemmapError):
    """Fewer than three usable GPS/pose anchor pairs."""


class DegenerateGeometryError(SemmapError):
    """Anchor geometry does not span enough dimensions for registration."""


class ZeroScaleError(SemmapError):
    """No anchor pair had a usable deviation, so the scale is undefined."""


class ParseError(SemmapError):
    """A file violates its format at the syntactic level."""

    def __init__(self, message: str, *, path=None, line: int | None = None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}:"
            if line is not None:
                prefix += f"{line}:"
            prefix += " "
        elif line is not None:
            prefix = f"line {line}: "
        super().__init__(prefix + message)


class ValidationError(SemmapError):
    """Data is syntactically fine but violates a documented invariant."""

    def __init__(self, message: str, *, path=None, line: int | None = None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}:"
            if line is not None:
                prefix += f"{line}:"
            prefix += " "
        elif line is not None:
            prefix = f"line {line}: "
        super().__init__(prefix + message)


class PipelineStageError(SemmapError):
    """Wraps a failure with the name of the pipeline stage it occurred in."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}': {cause}")
