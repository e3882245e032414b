"""Exception hierarchy.

Every error raised on bad *data* derives from :class:`KorpusError` so the CLI
can map it to exit code 2 without swallowing programming errors.
"""


class KorpusError(ValueError):
    """Base class for data errors."""


class IngestError(KorpusError):
    """A single input line was rejected. ``reason`` is the counter key."""

    reason = "Rejected"


class MalformedJsonError(IngestError):
    reason = "MalformedJson"


class MissingFieldError(IngestError):
    reason = "MissingField"


class InvalidFieldError(IngestError):
    reason = "InvalidField"


class GeoOutOfRangeError(IngestError):
    reason = "GeoOutOfRange"


class EmptyRegistryError(KorpusError):
    pass


class EmptyCorpusError(KorpusError):
    pass


class SingleLabelCorpusError(KorpusError):
    pass


class LabelSetMismatchError(KorpusError):
    pass


class DimensionMismatchError(KorpusError):
    pass


class EmptyDatasetError(KorpusError):
    pass


class SingleLabelDatasetError(KorpusError):
    pass


class InsufficientCitiesError(KorpusError):
    pass


class NonInformalInputError(KorpusError):
    pass


class MissingEmbeddingError(KorpusError):
    pass


class EmptyInputError(KorpusError):
    pass


class NoSharedGlossesError(KorpusError):
    pass


class UnknownLabelError(KorpusError):
    pass


class EmptyMatrixError(KorpusError):
    pass


class BadFractionsError(KorpusError):
    pass


class ClassTooSmallError(KorpusError):
    pass


class ModelFormatError(KorpusError):
    """A model or embedding file has a bad magic header or inconsistent layout."""
