"""Exception types shared across the toolkit."""


class UqkitError(Exception):
    """Base class for all toolkit errors."""


class MissingColumn(UqkitError):
    def __init__(self, column: str):
        super().__init__(f"required column not found: {column!r}")
        self.column = column


class UnparseableNumeric(UqkitError):
    def __init__(self, row: int, col: str, token: str):
        super().__init__(f"cannot parse {token!r} as a number (row {row}, column {col!r})")
        self.row = row
        self.col = col
        self.token = token


class EmptyDataset(UqkitError):
    pass


class TooFewSamples(UqkitError):
    pass


class LengthMismatch(UqkitError):
    pass


class EmptyInput(UqkitError):
    pass


class DimensionMismatch(UqkitError):
    pass


class CholeskyFailure(UqkitError):
    pass


class TooManyFeatures(UqkitError):
    pass


class NonFiniteObjective(UqkitError):
    pass


class EmptyIntersection(UqkitError):
    pass


class MissingRawBounds(UqkitError):
    pass


class MismatchedPartitions(UqkitError):
    pass
