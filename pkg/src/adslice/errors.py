"""Exception hierarchy shared by every stage of the pipeline."""


class AdsliceError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(AdsliceError, ValueError):
    """Tensor dimensions do not agree."""


class GeometryError(AdsliceError, ValueError):
    """A window/stride/padding combination produces no valid output."""


class InternalConsistencyError(AdsliceError, RuntimeError):
    """Cached state from a forward pass does not match the backward call."""


class DataError(AdsliceError, ValueError):
    """Input values are unusable (non-finite, empty, ...)."""


class LabelError(AdsliceError, ValueError):
    """Targets are not valid one-hot rows or class indices."""


class NiftiFormatError(AdsliceError, ValueError):
    """Bytes are not a NIfTI-1 file."""


class UnsupportedDatatypeError(NiftiFormatError):
    def __init__(self, code):
        self.code = code
        super().__init__(f"unsupported NIfTI datatype code {code}")


class TruncatedDataError(NiftiFormatError):
    def __init__(self, expected, actual):
        self.expected = expected
        self.actual = actual
        super().__init__(
            f"truncated NIfTI data region: expected {expected} bytes, got {actual}"
        )


class DuplicateSubjectError(AdsliceError, ValueError):
    def __init__(self, subject_id):
        self.subject_id = subject_id
        super().__init__(f"subject {subject_id!r} appears more than once")


class InfeasibleSplitError(AdsliceError, ValueError):
    """The requested stratified split cannot be formed."""


class StratificationError(AdsliceError, ValueError):
    """A class is missing from a split that must contain every class."""


class TrainingDivergenceError(AdsliceError, FloatingPointError):
    """Loss or gradients became non-finite."""

    def __init__(self, message, epoch=None, batch=None):
        self.epoch = epoch
        self.batch = batch
        where = ""
        if epoch is not None:
            where = f" (epoch {epoch}, batch {batch})"
        super().__init__(message + where)


class CheckpointMismatchError(AdsliceError, ValueError):
    """A checkpoint does not match the network or data it is loaded against."""
