"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures to the
documented process status without inspecting the type.
"""


class AuditError(Exception):
    exit_code = 3


class ConfigError(AuditError):
    exit_code = 1


class DataError(AuditError):
    exit_code = 2


class ParseError(DataError):
    def __init__(self, message, row=None, col=None):
        super().__init__(message)
        self.row = row
        self.col = col


class SchemaError(DataError):
    pass


class DegenerateColumnError(DataError):
    def __init__(self, column):
        super().__init__(f"column {column!r} has zero variance")
        self.column = column


class SizeError(AuditError):
    exit_code = 2


class DimensionError(AuditError):
    pass


class ParameterError(AuditError):
    exit_code = 1


class NumericError(AuditError):
    pass


class TrainingDivergedError(NumericError):
    def __init__(self, step, message=None):
        super().__init__(message or f"non-finite loss at step {step}")
        self.step = step


class DegenerateLabelsError(AuditError):
    def __init__(self, message, group=None):
        super().__init__(message)
        self.group = group
