"""Exception hierarchy shared by the library and the CLI."""


class EnhancedKMeansError(Exception):
    """Base class for all errors raised by this package."""


class DataError(EnhancedKMeansError, ValueError):
    """Input data is missing, malformed, or inconsistent."""


class MissingFileError(DataError, FileNotFoundError):
    pass


class NonNumericCellError(DataError):
    def __init__(self, row: int, column: str, value: str):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"non-numeric value {value!r} at data row {row}, column {column!r}")


class RaggedRowError(DataError):
    def __init__(self, row: int, expected: int, got: int):
        self.row = row
        super().__init__(f"data row {row} has {got} fields, expected {expected}")


class UnknownColumnError(DataError, KeyError):
    def __init__(self, column: str):
        self.column = column
        super().__init__(f"unknown column {column!r}")

    def __str__(self) -> str:
        return self.args[0]


class NumericError(EnhancedKMeansError, ArithmeticError):
    """A computation hit a numerically undefined case (e.g. a metric on one cluster)."""
