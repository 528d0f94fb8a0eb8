"""Exception hierarchy shared by every module."""

from __future__ import annotations


class AtaError(Exception):
    """Base class for all errors raised by this package."""


class InvalidValueError(AtaError, ValueError):
    """A value violates a core-model invariant."""


class UnknownKindError(InvalidValueError):
    def __init__(self, enum_name: str, value: object) -> None:
        self.enum_name = enum_name
        self.value = value
        super().__init__(f"unknown {enum_name}: {value!r}")


# ingest ---------------------------------------------------------------------


class IngestError(AtaError):
    """Raised when a trace log cannot be parsed."""

    def __init__(self, message: str, *, line: int | None = None, offset: int | None = None) -> None:
        self.reason = message
        self.line = line
        self.offset = offset
        where = []
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"byte {offset}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)

    def with_line(self, line: int) -> IngestError:
        return type(self)(self.reason, line=line, offset=self.offset)


class MalformedLineError(IngestError):
    pass


class UnknownEventTypeError(IngestError):
    pass


class NegativeTimestampError(IngestError):
    pass


class DuplicateSpanError(IngestError):
    pass


class EmptyInputError(IngestError):
    pass


# flow discovery -------------------------------------------------------------


class FlowError(AtaError):
    pass


class CycleDetectedError(FlowError):
    def __init__(self, cycle: list[str]) -> None:
        self.cycle = list(cycle)
        super().__init__("dependency cycle: " + " -> ".join(self.cycle + self.cycle[:1]))


class MissingDependencyError(FlowError):
    def __init__(self, task_id: str, missing: str) -> None:
        self.task_id = task_id
        self.missing = missing
        super().__init__(f"task {task_id!r} depends on unknown task {missing!r}")


class MalformedFlowFileError(FlowError):
    def __init__(self, message: str, location: str | None = None) -> None:
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


# bench harness --------------------------------------------------------------


class BenchmarkError(AtaError):
    pass


class MissingFileError(BenchmarkError):
    pass


class InconsistentGroundTruthError(BenchmarkError):
    pass


class UnknownCaseError(BenchmarkError):
    pass


# tracegen -------------------------------------------------------------------


class ExpressionError(AtaError):
    pass


class ExpressionSyntaxError(ExpressionError):
    def __init__(self, message: str, position: int) -> None:
        self.position = position
        super().__init__(f"{message} at position {position}")


class DivisionByZeroError(ExpressionError, ZeroDivisionError):
    pass


class UnknownSnippetError(ExpressionError, KeyError):
    def __init__(self, text: str) -> None:
        self.text = text
        super().__init__(text)

    def __str__(self) -> str:
        return f"no scripted value for NL snippet {self.text!r}"


class InvalidSpecError(AtaError):
    pass


class InfeasibleConfigError(AtaError):
    pass
