"""Value schemas for node inputs and outputs.

A schema is one of: number, vector(dim), text, record(named fields), or
optional(inner).  ``optional`` marks a slot that may legitimately be absent
at runtime (e.g. a gated-off edge); the ABSENT sentinel is the runtime
representation of such a hole.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


class _Absent:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "ABSENT"

    def __bool__(self):
        return False


#: Runtime marker for a value that is not there (gated-off edge, optional field).
ABSENT = _Absent()


@dataclass(frozen=True)
class ValueSchema:
    kind: str  # number | vector | text | record | optional
    dim: int = 0
    fields: tuple[tuple[str, "ValueSchema"], ...] = ()
    inner: "ValueSchema | None" = None

    def __post_init__(self):
        if self.kind not in ("number", "vector", "text", "record", "optional"):
            raise ValueError(f"unknown schema kind {self.kind!r}")
        if self.kind == "vector" and self.dim < 1:
            raise ValueError("vector dim must be >= 1")
        if self.kind == "record":
            names = [n for n, _ in self.fields]
            if len(names) != len(set(names)):
                raise ValueError("record field names must be unique")
        if self.kind == "optional":
            if self.inner is None:
                raise ValueError("optional schema needs an inner schema")
            if self.inner.kind == "optional":
                raise ValueError("optional may not wrap another optional")

    def field_schema(self, name: str) -> "ValueSchema":
        for fname, fschema in self.fields:
            if fname == name:
                return fschema
        raise KeyError(name)


NUMBER = ValueSchema("number")
TEXT = ValueSchema("text")


def vector(dim: int) -> ValueSchema:
    return ValueSchema("vector", dim=dim)


def record(fields: dict[str, ValueSchema]) -> ValueSchema:
    return ValueSchema("record", fields=tuple(sorted(fields.items())))


def optional(inner: ValueSchema) -> ValueSchema:
    return ValueSchema("optional", inner=inner)


def conforms(value, schema: ValueSchema) -> bool:
    """True iff ``value`` is a member of ``schema``."""
    if schema.kind == "optional":
        return value is ABSENT or conforms(value, schema.inner)
    if value is ABSENT:
        return False
    if schema.kind == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)
    if schema.kind == "text":
        return isinstance(value, str)
    if schema.kind == "vector":
        return (
            isinstance(value, tuple)
            and len(value) == schema.dim
            and all(isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x) for x in value)
        )
    if schema.kind == "record":
        if not isinstance(value, dict):
            return False
        names = {n for n, _ in schema.fields}
        if set(value) != names:
            return False
        return all(conforms(value[n], s) for n, s in schema.fields)
    return False


def zero_value(schema: ValueSchema):
    """The canonical default member of a schema (ABSENT for optionals)."""
    if schema.kind == "number":
        return 0.0
    if schema.kind == "text":
        return ""
    if schema.kind == "vector":
        return (0.0,) * schema.dim
    if schema.kind == "record":
        return {n: zero_value(s) for n, s in schema.fields}
    return ABSENT


def schema_at_path(schema: ValueSchema, path: str) -> ValueSchema:
    """Resolve a dotted field path; '' names the whole schema."""
    current = schema
    if not path:
        return current
    for part in path.split("."):
        if current.kind == "optional":
            current = current.inner
        if current.kind != "record":
            raise KeyError(path)
        current = current.field_schema(part)
    return current


def value_at_path(value, path: str):
    """Follow a dotted field path through record values; KeyError if missing."""
    current = value
    if not path:
        return current
    for part in path.split("."):
        if current is ABSENT:
            return ABSENT
        if not isinstance(current, dict) or part not in current:
            raise KeyError(path)
        current = current[part]
    return current


def schema_to_doc(schema: ValueSchema):
    if schema.kind == "vector":
        return {"kind": "vector", "dim": schema.dim}
    if schema.kind == "record":
        return {"kind": "record", "fields": {n: schema_to_doc(s) for n, s in schema.fields}}
    if schema.kind == "optional":
        return {"kind": "optional", "inner": schema_to_doc(schema.inner)}
    return {"kind": schema.kind}


def schema_from_doc(doc) -> ValueSchema:
    kind = doc["kind"]
    if kind == "vector":
        return vector(int(doc["dim"]))
    if kind == "record":
        return record({n: schema_from_doc(s) for n, s in doc["fields"].items()})
    if kind == "optional":
        return optional(schema_from_doc(doc["inner"]))
    return ValueSchema(kind)


def value_to_doc(value):
    """Encode a runtime value as plain JSON data (ABSENT becomes null)."""
    if value is ABSENT:
        return None
    if isinstance(value, tuple):
        return [float(x) for x in value]
    if isinstance(value, dict):
        return {k: value_to_doc(v) for k, v in value.items()}
    return value


def value_from_doc(doc, schema: ValueSchema):
    """Decode JSON data into a runtime value, guided by the schema."""
    if schema.kind == "optional":
        return ABSENT if doc is None else value_from_doc(doc, schema.inner)
    if doc is None:
        raise ValueError("null value for a non-optional schema")
    if schema.kind == "vector":
        return tuple(float(x) for x in doc)
    if schema.kind == "record":
        return {n: value_from_doc(doc.get(n), s) for n, s in schema.fields}
    if schema.kind == "number":
        return float(doc)
    return doc
