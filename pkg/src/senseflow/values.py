"""Tagged scalar values flowing through pipelines, including the distinguished
"unknown" value used when a reading is missing or no rule covers the inputs."""

from __future__ import annotations

from enum import Enum
from typing import Any


class ValueKind(str, Enum):
    NUMBER = "number"
    BOOLEAN = "boolean"
    STRING = "string"
    GEO = "geo"


class _Unknown:
    """Singleton marker; propagates through every operator except rule ELSE."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "unknown"

    def __bool__(self):
        return False

    def __deepcopy__(self, memo):
        return self

    def __copy__(self):
        return self


UNKNOWN = _Unknown()


def is_unknown(value: Any) -> bool:
    return value is UNKNOWN


def kind_of(value: Any) -> ValueKind | None:
    """Kind of a definite value; None for unknown or unrecognized types."""
    if value is UNKNOWN:
        return None
    if isinstance(value, bool):
        return ValueKind.BOOLEAN
    if isinstance(value, (int, float)):
        return ValueKind.NUMBER
    if isinstance(value, str):
        return ValueKind.STRING
    if (
        isinstance(value, (tuple, list))
        and len(value) == 2
        and all(isinstance(c, (int, float)) for c in value)
    ):
        return ValueKind.GEO
    return None


def matches_kind(value: Any, kind: ValueKind) -> bool:
    return is_unknown(value) or kind_of(value) == kind
