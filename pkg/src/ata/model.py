"""Domain types shared across the package: entities, lifecycle events, spans, traces.

All types are frozen dataclasses.  Sequences are stored as tuples; mappings are
plain dicts that nothing in the package mutates after construction.

Each type has a ``to_dict``/``from_dict`` pair that defines the wire
representation used by :mod:`ata.ingest`.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from decimal import Decimal
from enum import Enum
from typing import TYPE_CHECKING, Any, TypeVar, Union

from ata.errors import InvalidValueError, UnknownKindError

if TYPE_CHECKING:
    from enum import StrEnum
else:
    try:
        from enum import StrEnum
    except ImportError:

        class StrEnum(str, Enum):
            """Compatibility fallback for Python < 3.11."""

            def __str__(self) -> str:
                return str(self.value)


Scalar = Union[str, int, Decimal, bool]
FieldValue = Union[Scalar, tuple[str, ...]]

TEnum = TypeVar("TEnum", bound=Enum)


def _normalize(text: str) -> str:
    return text.strip().lower().replace(" ", "_").replace("-", "_")


def _parse_enum(enum_cls: type[TEnum], text: object, name: str) -> TEnum:
    if isinstance(text, enum_cls):
        return text
    if not isinstance(text, str):
        raise UnknownKindError(name, text)
    try:
        return enum_cls(_normalize(text))
    except ValueError:
        raise UnknownKindError(name, text) from None


class EntityKind(StrEnum):
    RESOURCE = "resource"
    TOOL = "tool"
    WORKFLOW = "workflow"
    TASK = "task"
    AGENT = "agent"
    ORGANIZATION = "organization"

    @classmethod
    def parse(cls, text: object) -> EntityKind:
        return _parse_enum(cls, text, "entity kind")


def parse_entity_kind(text: str) -> EntityKind:
    """Map ``text`` case-insensitively onto one of the six entity kinds."""
    return EntityKind.parse(text)


class LifecycleEventType(StrEnum):
    CREATION = "creation"
    UPDATE = "update"
    START = "start"
    END = "end"
    SUSPENSION = "suspension"
    ABORTION = "abortion"
    FAILURE = "failure"
    DELETION = "deletion"

    @classmethod
    def parse(cls, text: object) -> LifecycleEventType:
        return _parse_enum(cls, text, "event type")


_SEVERITY_RANK = {"debug": 0, "info": 1, "warning": 2, "critical_error": 3}


class Severity(StrEnum):
    """Issue severity, totally ordered ``CRITICAL_ERROR > WARNING > INFO > DEBUG``."""

    CRITICAL_ERROR = "critical_error"
    WARNING = "warning"
    INFO = "info"
    DEBUG = "debug"

    @property
    def rank(self) -> int:
        return _SEVERITY_RANK[self.value]

    @classmethod
    def parse(cls, text: object) -> Severity:
        return _parse_enum(cls, text, "severity")

    def __lt__(self, other: object) -> bool:
        if not isinstance(other, Severity):
            return NotImplemented
        return self.rank < other.rank

    def __le__(self, other: object) -> bool:
        if not isinstance(other, Severity):
            return NotImplemented
        return self.rank <= other.rank

    def __gt__(self, other: object) -> bool:
        if not isinstance(other, Severity):
            return NotImplemented
        return self.rank > other.rank

    def __ge__(self, other: object) -> bool:
        if not isinstance(other, Severity):
            return NotImplemented
        return self.rank >= other.rank

    __hash__ = str.__hash__

    @property
    def is_failure(self) -> bool:
        return self >= Severity.WARNING


class FailureCategory(StrEnum):
    INSTRUCTION_VIOLATION = "instruction_violation"
    INCORRECT_INPUT = "incorrect_input"
    VALIDATION = "validation"
    VALIDATOR = "validator"

    @classmethod
    def parse(cls, text: object) -> FailureCategory:
        return _parse_enum(cls, text, "failure category")


# values ---------------------------------------------------------------------


def check_scalar(key: str, value: Any) -> Scalar:
    if isinstance(value, float):
        return Decimal(repr(value))
    if isinstance(value, (str, int, Decimal)):  # bool is an int
        return value
    raise InvalidValueError(f"value for {key!r} must be a string or number, got {type(value).__name__}")


def _check_field(key: str, value: Any) -> FieldValue:
    if isinstance(value, (list, tuple)):
        if not all(isinstance(v, str) for v in value):
            raise InvalidValueError(f"list field {key!r} may only hold strings")
        return tuple(value)
    return check_scalar(key, value)


def wire_value(value: Any) -> Any:
    """Convert a stored value to something :func:`json.dumps` accepts."""
    if isinstance(value, Decimal):
        return float(value)
    if isinstance(value, tuple):
        return list(value)
    return value


# records --------------------------------------------------------------------


@dataclass(frozen=True)
class Issue:
    severity: Severity
    message: str
    category: FailureCategory | None = None
    entity_id: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "severity", Severity.parse(self.severity))
        if self.category is not None:
            object.__setattr__(self, "category", FailureCategory.parse(self.category))
        if not self.message or not self.message.strip():
            raise InvalidValueError("issue message must be non-empty")

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"severity": self.severity.value}
        if self.category is not None:
            out["category"] = self.category.value
        out["message"] = self.message
        if self.entity_id is not None:
            out["entity_id"] = self.entity_id
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> Issue:
        return cls(
            severity=Severity.parse(data.get("severity")),
            message=data.get("message", ""),
            category=FailureCategory.parse(data["category"]) if data.get("category") is not None else None,
            entity_id=data.get("entity_id"),
        )


@dataclass(frozen=True)
class EntityRef:
    kind: EntityKind
    id: str
    fields: Mapping[str, FieldValue] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", EntityKind.parse(self.kind))
        if not isinstance(self.id, str) or not self.id:
            raise InvalidValueError("entity id must be a non-empty string")
        checked = {k: _check_field(k, v) for k, v in self.fields.items()}
        if self.id in checked.get("depends_on", ()):
            raise InvalidValueError(f"task {self.id!r} cannot depend on itself")
        object.__setattr__(self, "fields", checked)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind.value, "id": self.id}
        if self.fields:
            out["fields"] = {k: wire_value(v) for k, v in self.fields.items()}
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> EntityRef:
        return cls(kind=EntityKind.parse(data.get("kind")), id=data.get("id", ""), fields=data.get("fields") or {})


@dataclass(frozen=True)
class GenAIEvent:
    """A lifecycle/state-change record bound to a span."""

    event_type: LifecycleEventType
    time: int
    entities: tuple[EntityRef, ...] = ()
    issues: tuple[Issue, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "event_type", LifecycleEventType.parse(self.event_type))
        object.__setattr__(self, "entities", tuple(self.entities))
        object.__setattr__(self, "issues", tuple(self.issues))
        if not isinstance(self.time, int) or self.time < 0:
            raise InvalidValueError(f"event time must be a non-negative integer, got {self.time!r}")
        if not self.entities and self.event_type is not LifecycleEventType.UPDATE:
            raise InvalidValueError(f"{self.event_type.value} event must reference at least one entity")

    def tasks(self) -> Iterable[EntityRef]:
        return (e for e in self.entities if e.kind is EntityKind.TASK)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"type": self.event_type.value, "time_ns": self.time}
        if self.entities:
            out["entities"] = [e.to_dict() for e in self.entities]
        if self.issues:
            out["issues"] = [i.to_dict() for i in self.issues]
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> GenAIEvent:
        return cls(
            event_type=LifecycleEventType.parse(data.get("type")),
            time=data.get("time_ns"),
            entities=tuple(EntityRef.from_dict(e) for e in data.get("entities") or ()),
            issues=tuple(Issue.from_dict(i) for i in data.get("issues") or ()),
        )


@dataclass(frozen=True)
class SpanRecord:
    trace_id: str
    span_id: str
    name: str
    service: str
    start: int
    end: int
    parent_span_id: str | None = None
    attributes: Mapping[str, Scalar] = field(default_factory=dict)
    events: tuple[GenAIEvent, ...] = ()

    def __post_init__(self) -> None:
        for key in ("trace_id", "span_id"):
            value = getattr(self, key)
            if not isinstance(value, str) or not value:
                raise InvalidValueError(f"{key} must be a non-empty string")
        for key in ("start", "end"):
            value = getattr(self, key)
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise InvalidValueError(f"span {key} must be a non-negative integer, got {value!r}")
        if self.start > self.end:
            raise InvalidValueError(f"span {self.span_id!r} starts after it ends")
        object.__setattr__(self, "attributes", {k: check_scalar(k, v) for k, v in self.attributes.items()})
        object.__setattr__(self, "events", tuple(self.events))

    @property
    def duration(self) -> int:
        return self.end - self.start

    def to_dict(self) -> dict[str, Any]:
        return {
            "trace_id": self.trace_id,
            "span_id": self.span_id,
            "parent_span_id": self.parent_span_id,
            "name": self.name,
            "service": self.service,
            "start_ns": self.start,
            "end_ns": self.end,
            "attributes": {k: wire_value(v) for k, v in self.attributes.items()},
            "events": [e.to_dict() for e in self.events],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> SpanRecord:
        return cls(
            trace_id=data.get("trace_id", ""),
            span_id=data.get("span_id", ""),
            parent_span_id=data.get("parent_span_id"),
            name=data.get("name", ""),
            service=data.get("service", ""),
            start=data.get("start_ns"),
            end=data.get("end_ns"),
            attributes=data.get("attributes") or {},
            events=tuple(GenAIEvent.from_dict(e) for e in data.get("events") or ()),
        )


def span_sort_key(span: SpanRecord) -> tuple[int, str]:
    return (span.start, span.span_id)


@dataclass(frozen=True)
class Trace:
    trace_id: str
    spans: tuple[SpanRecord, ...]

    def __post_init__(self) -> None:
        spans = tuple(sorted(self.spans, key=span_sort_key))
        for span in spans:
            if span.trace_id != self.trace_id:
                raise InvalidValueError(f"span {span.span_id!r} belongs to trace {span.trace_id!r}, not {self.trace_id!r}")
        object.__setattr__(self, "spans", spans)

    def span(self, span_id: str) -> SpanRecord | None:
        for s in self.spans:
            if s.span_id == span_id:
                return s
        return None

    @property
    def roots(self) -> tuple[SpanRecord, ...]:
        return tuple(s for s in self.spans if s.parent_span_id is None)

    @property
    def services(self) -> tuple[str, ...]:
        return tuple(sorted({s.service for s in self.spans}))
