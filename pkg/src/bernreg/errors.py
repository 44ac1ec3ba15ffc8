"""Exception taxonomy.

Grouped by the exit code the command line maps them to: usage problems are
left to argparse (exit 2), DataError subclasses exit 3, NumericalError
subclasses exit 4, and MismatchError subclasses exit 5.
"""


class BernregError(Exception):
    """Base class for every error raised by this package."""


class DataError(BernregError):
    """Input data is malformed or unusable."""


class NumericalError(BernregError):
    """A numerical procedure failed or was asked for something unstable."""


class MismatchError(BernregError):
    """Artifacts that do not belong together were combined."""


# data (exit 3)

class UnknownColumn(DataError):
    """Header does not match the expected schema."""


class MissingField(DataError):
    """A data row has the wrong number of fields."""


class UnparseableNumber(DataError):
    """A numeric column holds text that does not parse as a number."""


class UnknownTargetLabel(DataError):
    """The response column holds a label other than the two known ones."""


class EmptyTable(DataError):
    """An operation that needs rows received none."""


class SampleTooLarge(DataError):
    """Requested sample or holdout size exceeds the available rows."""


class DegenerateClasses(DataError):
    """Both response classes are required but only one is present."""


class CorruptChainFile(DataError):
    """A stored fit could not be read back; carries the byte offset."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


# numerical (exit 4)

class NonFiniteGradient(NumericalError):
    """No finite starting point or gradient could be found."""


class AdaptationFailure(NumericalError):
    """Warmup finished without a usable step size."""


class TooFewDraws(NumericalError):
    """Not enough draws for the requested diagnostic."""


class Degenerate(NumericalError):
    """All samples are identical; the diagnostic is undefined."""


class EmptyInput(NumericalError):
    """A statistic of an empty sample was requested."""


class DimensionTooHigh(NumericalError):
    """Grid integration was asked for more dimensions than it supports."""


class GridTooCoarse(NumericalError):
    """Grid moments moved too much under the widening self-check."""


class NonFiniteEvaluation(NumericalError):
    """A function probe returned a non-finite value."""


class TooLarge(NumericalError):
    """Brute-force validation was asked for more refits than allowed."""


# mismatch (exit 5)

class DimensionMismatch(MismatchError):
    """Coefficient, design, or target shapes disagree."""


class DatasetMismatch(MismatchError):
    """Model evaluation results come from different datasets."""


class UnseenLevel(MismatchError):
    """New data holds a category level absent from the training encoding."""


class EncodingMismatch(MismatchError):
    """New data was prepared with different encoding or scaling metadata."""
