"""Exception hierarchy. Input problems map to CLI exit code 2, numerical ones to 3."""


class TempMortError(Exception):
    pass


class InputError(TempMortError):
    exit_code = 2


class ParseError(InputError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class ValidationError(InputError):
    pass


class AlignmentError(InputError):
    pass


class MetadataError(InputError):
    pass


class StaleArtifactError(InputError):
    pass


class NumericalError(TempMortError):
    exit_code = 3


class RankDeficientError(NumericalError):
    def __init__(self, dependent_columns):
        self.dependent_columns = list(dependent_columns)
        super().__init__(
            f"design matrix is rank deficient; dependent columns: {self.dependent_columns}"
        )


class ConvergenceError(NumericalError):
    def __init__(self, message, last_deviance=None):
        self.last_deviance = last_deviance
        if last_deviance is not None:
            message = f"{message} (last deviance {last_deviance:.10g})"
        super().__init__(message)


class FactorizationError(NumericalError):
    pass
