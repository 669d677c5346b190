from typing import Optional, Tuple


class AssertEditError(Exception):
    """
    Base class of every error raised by the package.
    """


class ConfigError(AssertEditError):
    """
    Invalid run configuration or command-line usage.
    """


class DatasetError(AssertEditError):
    """
    A dataset file could not be ingested.
    """

    def __init__(self, message: str, line_number: Optional[int] = None) -> None:
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number: Optional[int] = line_number


class LexError(AssertEditError):
    """
    Source text could not be tokenized.
    """

    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} at byte offset {offset}")
        self.offset: int = offset


class RetrievalError(AssertEditError):
    pass


class IndexFileError(AssertEditError):
    pass


class ShapeError(AssertEditError):
    """
    Operands of a tensor operation have incompatible shapes.
    """

    def __init__(self, op: str, left: Tuple[int, ...], right: Tuple[int, ...]) -> None:
        super().__init__(f"{op}: incompatible shapes {tuple(left)} and {tuple(right)}")
        self.left: Tuple[int, ...] = tuple(left)
        self.right: Tuple[int, ...] = tuple(right)


class CheckpointError(AssertEditError):
    pass


class TrainingError(AssertEditError):
    pass


class EvaluationError(AssertEditError):
    pass


class NumericError(AssertEditError):
    pass
