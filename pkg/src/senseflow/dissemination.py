"""Request validation, subscription bookkeeping, record formatting, and
per-subscriber delivery at each subscriber's own frequency."""

from __future__ import annotations

import csv
import io
import json
import logging
import threading
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import yaml

from .discoverer import DataRecord
from .errors import InvalidInterval, SchemaViolation, SinkUnavailable, UnsupportedFormat
from .reasoning import OUTPUT_FORMATS, Request
from .values import is_unknown

log = logging.getLogger(__name__)

SINK_KINDS = ("stream-endpoint", "append-file")


@dataclass
class SubscriptionDraft:
    user_id: str
    sink_kind: str
    sink_target: str
    output_format: str
    delivery_interval_ms: int
    duration_ms: Optional[int]


@dataclass
class Subscription:
    subscription_id: str
    request_id: str
    user_id: str
    output_format: str
    delivery_interval_ms: int
    sink_kind: str
    sink_target: str
    created_at: int
    expires_at: Optional[int]
    canonical_key: str = ""
    state: str = "active"  # active | expired | degraded
    delivered_count: int = 0

    def is_expired(self, now_ms: int) -> bool:
        return self.expires_at is not None and now_ms > self.expires_at


def _parse_document(document: bytes | str | dict) -> dict:
    if isinstance(document, dict):
        return document
    try:
        doc = yaml.safe_load(document)
    except yaml.YAMLError as exc:
        raise SchemaViolation(f"unparseable request document: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaViolation("request document must be a mapping")
    return doc


def validate_request(
    document: bytes | str | dict, request_id: Optional[str] = None
) -> tuple[Request, SubscriptionDraft]:
    """Check the submitted document against the published schema and split it
    into the planning-facing Request and the delivery-facing draft."""
    doc = _parse_document(document)
    req_block = doc.get("request")
    if not isinstance(req_block, dict):
        raise SchemaViolation("request: missing or not a mapping")
    user_block = doc.get("user")
    if not isinstance(user_block, dict):
        raise SchemaViolation("user: missing or not a mapping")

    attrs = req_block.get("attributes")
    if not isinstance(attrs, list) or not attrs or not all(isinstance(a, str) for a in attrs):
        raise SchemaViolation("request.attributes: must be a non-empty list of strings")

    fmt = req_block.get("format", "json-lines")
    if fmt not in OUTPUT_FORMATS:
        raise UnsupportedFormat(f"request.format: '{fmt}' not supported")

    interval = req_block.get("interval_ms")
    if not isinstance(interval, int) or interval < 1:
        raise InvalidInterval("request.interval_ms: must be an integer >= 1")
    duration = req_block.get("duration_ms")
    if duration is not None:
        if not isinstance(duration, int) or duration < interval:
            raise InvalidInterval("request.duration_ms: must be >= interval_ms")

    location = req_block.get("location")
    if location is not None and not isinstance(location, str):
        raise SchemaViolation("request.location: must be a string")
    annotations = bool(req_block.get("annotations", False))

    user_id = user_block.get("id")
    if not isinstance(user_id, str) or not user_id:
        raise SchemaViolation("user.id: must be a non-empty string")
    sink = user_block.get("sink")
    if not isinstance(sink, dict) or "kind" not in sink:
        raise SchemaViolation("user.sink: must be a mapping with a kind")
    if sink["kind"] not in SINK_KINDS:
        raise SchemaViolation(f"user.sink.kind: '{sink['kind']}' not one of {SINK_KINDS}")
    target = sink.get("target", "")

    request = Request(
        request_id=request_id or f"req-{uuid.uuid4().hex[:8]}",
        requested_attributes=frozenset(attrs),
        output_format=fmt,
        delivery_interval_ms=interval,
        location_constraint=location,
        duration_ms=duration,
        include_context_annotations=annotations,
    )
    draft = SubscriptionDraft(
        user_id=user_id,
        sink_kind=sink["kind"],
        sink_target=str(target),
        output_format=fmt,
        delivery_interval_ms=interval,
        duration_ms=duration,
    )
    return request, draft


class SubscriptionStore:
    def __init__(self):
        self._subs: dict[str, Subscription] = {}
        self._lock = threading.Lock()
        self._counter = 0

    def subscribe(self, draft: SubscriptionDraft, request_id: str,
                  canonical_key: str, now_ms: int) -> Subscription:
        with self._lock:
            self._counter += 1
            sub = Subscription(
                subscription_id=f"sub-{self._counter:04d}",
                request_id=request_id,
                user_id=draft.user_id,
                output_format=draft.output_format,
                delivery_interval_ms=draft.delivery_interval_ms,
                sink_kind=draft.sink_kind,
                sink_target=draft.sink_target,
                created_at=now_ms,
                expires_at=(now_ms + draft.duration_ms) if draft.duration_ms else None,
                canonical_key=canonical_key,
            )
            self._subs[sub.subscription_id] = sub
            return sub

    def get(self, subscription_id: str) -> Optional[Subscription]:
        with self._lock:
            return self._subs.get(subscription_id)

    def all(self) -> list[Subscription]:
        with self._lock:
            return sorted(self._subs.values(), key=lambda s: s.subscription_id)


# --- formatting ---

def _geo_string(record: DataRecord) -> str:
    pairs = sorted(record.annotations.geographical_location.items())
    return ";".join(f"{sid}={label}" for sid, label in pairs)


def _csv_cell(value: Any) -> str:
    if is_unknown(value):
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


class RecordFormatter:
    """Formats records for one subscription. Key/column set is fixed from the
    plan outputs so the schema never shifts when values go unknown."""

    def __init__(self, output_format: str, outputs: tuple[str, ...]):
        if output_format not in OUTPUT_FORMATS:
            raise UnsupportedFormat(f"'{output_format}' not supported")
        self.output_format = output_format
        self.outputs = tuple(sorted(outputs))
        self._header_written = False

    def header_columns(self) -> list[str]:
        return (
            ["timestamp", "geographicalLocation"]
            + list(self.outputs)
            + [f"quality_{a}" for a in self.outputs]
        )

    def format(self, record: DataRecord) -> bytes:
        payload = self.render(record, include_header=not self._header_written)
        self._header_written = True
        return payload

    def render(self, record: DataRecord, include_header: bool) -> bytes:
        if self.output_format == "json-lines":
            obj: dict[str, Any] = {
                "timestamp": record.timestamp,
                "geographicalLocation": _geo_string(record),
            }
            for attr in self.outputs:
                v = record.values.get(attr)
                obj[attr] = None if is_unknown(v) else v
            obj["quality"] = {a: record.annotations.quality.get(a, "unknown") for a in self.outputs}
            return (json.dumps(obj) + "\n").encode()

        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        if include_header:
            writer.writerow(self.header_columns())
        row = [str(record.timestamp), _geo_string(record)]
        row += [_csv_cell(record.values.get(a)) for a in self.outputs]
        row += [record.annotations.quality.get(a, "unknown") for a in self.outputs]
        writer.writerow(row)
        return buf.getvalue().encode()


def format_record(record: DataRecord, output_format: str) -> bytes:
    """One-shot formatting (csv includes its header)."""
    return RecordFormatter(output_format, tuple(record.values)).format(record)


# --- sinks ---

class FileSink:
    def __init__(self, path: Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def write(self, data: bytes) -> None:
        try:
            with self.path.open("ab") as fh:
                fh.write(data)
        except OSError as exc:
            raise SinkUnavailable(str(exc)) from exc


class StreamSink:
    """In-process buffered endpoint; readers drain via the service API."""

    def __init__(self):
        self._chunks: list[bytes] = []
        self._lock = threading.Lock()

    def write(self, data: bytes) -> None:
        with self._lock:
            self._chunks.append(data)

    def read_all(self) -> bytes:
        with self._lock:
            return b"".join(self._chunks)


class Dispatcher:
    """Per-subscription delivery: at most one record per interval, latest
    record wins, sink failures degrade the subscription without stopping it."""

    def __init__(self, subscription: Subscription, sink, formatter: RecordFormatter):
        self.subscription = subscription
        self.sink = sink
        self.formatter = formatter
        self._header_written = False

    def deliver(self, record: Optional[DataRecord], now_ms: int) -> bool:
        sub = self.subscription
        if sub.state == "expired" or sub.is_expired(now_ms):
            sub.state = "expired"
            return False
        if record is None:
            return False
        include_header = not self._header_written
        payload = self.formatter.render(record, include_header=include_header)
        try:
            self.sink.write(payload)
        except SinkUnavailable as exc:
            sub.state = "degraded"
            log.warning("sink unavailable for %s: %s", sub.subscription_id, exc)
            return False
        except Exception as exc:  # sink isolation: never propagate
            sub.state = "degraded"
            log.warning("sink failure for %s: %s", sub.subscription_id, exc)
            return False
        self._header_written = True
        if sub.state == "degraded":
            sub.state = "active"
        sub.delivered_count += 1
        return True
