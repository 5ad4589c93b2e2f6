"""Exception hierarchy. ``exit_code`` is what the CLI returns for each family."""


class RagakitError(Exception):
    exit_code = 3


class DataError(RagakitError):
    exit_code = 3


class NumericError(RagakitError):
    exit_code = 4


class UnsupportedEncoding(DataError):
    pass


class CorruptHeader(DataError):
    pass


class EmptyInput(DataError):
    pass


class InputTooShort(DataError):
    pass


class EmptyMatrix(DataError):
    pass


class EmptySplit(DataError):
    pass


class IoFailure(DataError):
    pass


class ShapeMismatch(NumericError):
    pass


class LabelOutOfRange(DataError):
    pass


class LengthMismatch(DataError):
    pass


class ClassOutOfRange(DataError):
    pass


class InvalidPair(DataError):
    pass


class LabelMismatch(DataError):
    pass


class UnknownModel(RagakitError):
    exit_code = 2


class WeightFormatError(DataError):
    pass
