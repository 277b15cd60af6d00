from typing import Optional


class CusboostError(Exception):
    """Base class for every failure raised by the library."""


class DataError(CusboostError):
    pass


class ParseError(DataError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(CusboostError):
    pass


class TrainingError(CusboostError):
    pass


class UndefinedRateError(CusboostError):
    pass
