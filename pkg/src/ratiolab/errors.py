"""Exception hierarchy. Each class carries the CLI exit code of its family."""

from __future__ import annotations


class RatioLabError(Exception):
    exit_code = 1


class ConfigError(RatioLabError):
    exit_code = 2


class NumericError(RatioLabError):
    exit_code = 3


class DataError(RatioLabError):
    exit_code = 4


class ConstraintViolation(RatioLabError):
    exit_code = 5


# numeric / precision
class PoleAtOne(NumericError):
    pass


class PrecisionLoss(NumericError):
    pass


class GammaPole(NumericError):
    pass


class OutOfRange(NumericError):
    pass


class MissedZero(NumericError):
    pass


class Divergent(NumericError):
    pass


class TolExceeded(NumericError):
    pass


class QuadratureFail(NumericError):
    pass


class NonRemovableSingularity(NumericError):
    pass


class PoleAtZeroShift(NumericError):
    pass


class SingularForm(NumericError):
    pass


class CellDecompositionFail(NumericError):
    pass


class DegreeOverflow(NumericError):
    pass


class Overflow(NumericError):
    pass


# data / cache
class ParseError(DataError):
    def __init__(self, msg: str, line: int | None = None):
        super().__init__(msg if line is None else f"line {line}: {msg}")
        self.line = line


class NotAscending(DataError):
    def __init__(self, msg: str, index: int):
        super().__init__(f"index {index}: {msg}")
        self.index = index


class NonPositive(DataError):
    pass


class EmptySet(DataError):
    pass


class CacheCorrupt(DataError):
    pass


class MissingTauTable(DataError):
    pass


class IoError(DataError):
    pass


# constraints
class ShiftOutOfRange(ConstraintViolation):
    pass


class NotAdmissible(ConstraintViolation):
    pass


class MollifierTooLong(ConstraintViolation):
    pass
