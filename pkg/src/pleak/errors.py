"""Exception hierarchy shared by all analyses."""


class PleakError(Exception):
    """Base class for every error raised by the toolkit."""


class ModelError(PleakError):
    """Malformed or inconsistent process model."""

    def __init__(self, message, line=None, column=None, missing_id=None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column
        self.missing_id = missing_id


class RunExplosionError(PleakError):
    pass


class SqlError(PleakError):
    """Syntax, typing or name-resolution problem in a SQL script."""

    def __init__(self, message, line=None, column=None):
        if line is not None:
            message = f"{message} at line {line}, column {column}"
        super().__init__(message)
        self.line = line
        self.column = column


class SqlSyntaxError(SqlError):
    pass


class SqlTypeError(SqlError):
    pass


class UnknownIdentifier(SqlError):
    pass


class DataError(PleakError):
    """CSV instance does not match its table schema."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class EvaluationError(PleakError):
    pass


class BindingError(PleakError):
    """SQL scripts cannot be attached to the workflow tasks."""


class SymbolicError(PleakError):
    pass


class UnsupportedAggregation(PleakError):
    pass


class NormError(PleakError):
    pass


class MissingAttackerBound(PleakError):
    pass


class InfeasibleSmoothness(PleakError):
    pass


class PolicyError(PleakError):
    pass
