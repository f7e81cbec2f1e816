"""Sensor data acquisition: device definitions, simulated drivers, wrappers,
and the wrapper / definition repositories with repository-first resolution."""

from __future__ import annotations

import csv
import math
import random
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from .errors import (
    InvalidSdd,
    MalformedSdd,
    SensorFault,
    UnsupportedDriver,
    WrapperUnavailable,
)
from .values import UNKNOWN, ValueKind

DRIVER_KINDS = ("simulated-function", "simulated-trace", "external-stub")

WAVEFORMS = ("constant", "sine", "square", "sawtooth")


@dataclass(frozen=True)
class AttributeSpec:
    name: str
    unit: str
    kind: ValueKind


@dataclass(frozen=True)
class SensorDeviceDefinition:
    model_id: str
    attributes: tuple[AttributeSpec, ...]
    sampling_interval_ms: int
    driver_kind: str
    driver_params: dict[str, Any] = field(default_factory=dict)

    @property
    def attribute_names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.attributes)


def _require(mapping: dict, key: str, context: str):
    if key not in mapping:
        raise InvalidSdd(f"{context}: missing field '{key}'")
    return mapping[key]


def load_sdd(document: bytes | str) -> SensorDeviceDefinition:
    """Parse and validate one sensor device definition document."""
    try:
        doc = yaml.safe_load(document)
    except yaml.YAMLError as exc:
        raise MalformedSdd(f"unparseable SDD document: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedSdd("SDD document must be a mapping")

    model_id = _require(doc, "model_id", "sdd")
    if not isinstance(model_id, str) or not model_id:
        raise InvalidSdd("model_id: must be a non-empty string")

    raw_attrs = _require(doc, "attributes", "sdd")
    if not isinstance(raw_attrs, list) or not raw_attrs:
        raise InvalidSdd("attributes: must be a non-empty list")
    attrs = []
    seen = set()
    for i, a in enumerate(raw_attrs):
        if not isinstance(a, dict):
            raise MalformedSdd(f"attributes[{i}]: must be a mapping")
        name = _require(a, "name", f"attributes[{i}]")
        kind = a.get("kind", "number")
        try:
            kind = ValueKind(kind)
        except ValueError:
            raise InvalidSdd(f"attributes[{i}].kind: unknown value kind '{kind}'")
        if name in seen:
            raise InvalidSdd(f"attributes[{i}].name: duplicate attribute '{name}'")
        seen.add(name)
        attrs.append(AttributeSpec(name=name, unit=str(a.get("unit", "")), kind=kind))

    interval = _require(doc, "sampling_interval_ms", "sdd")
    if not isinstance(interval, int) or interval < 1:
        raise InvalidSdd("sampling_interval_ms: must be an integer >= 1")

    driver = _require(doc, "driver", "sdd")
    if not isinstance(driver, dict):
        raise MalformedSdd("driver: must be a mapping")
    driver_kind = _require(driver, "kind", "driver")
    params = driver.get("params") or {}
    if not isinstance(params, dict):
        raise MalformedSdd("driver.params: must be a mapping")

    return SensorDeviceDefinition(
        model_id=model_id,
        attributes=tuple(attrs),
        sampling_interval_ms=interval,
        driver_kind=driver_kind,
        driver_params=dict(params),
    )


# --- drivers ---

class FunctionDriver:
    """Deterministic waveform per attribute; optional seeded gaussian noise."""

    def __init__(self, sdd: SensorDeviceDefinition):
        self._specs = {}
        self._rngs = {}
        for attr in sdd.attributes:
            params = sdd.driver_params.get(attr.name, sdd.driver_params)
            if not isinstance(params, dict):
                raise UnsupportedDriver(f"driver params for '{attr.name}' must be a mapping")
            waveform = params.get("waveform", "constant")
            if waveform not in WAVEFORMS:
                raise UnsupportedDriver(f"unknown waveform '{waveform}'")
            self._specs[attr.name] = {
                "waveform": waveform,
                "baseline": float(params.get("baseline", 0.0)),
                "amplitude": float(params.get("amplitude", 0.0)),
                "period_ms": int(params.get("period_ms", 60_000)),
                "noise": float(params.get("noise", 0.0)),
            }
            if self._specs[attr.name]["noise"] > 0:
                seed = params.get("seed", 0)
                self._rngs[attr.name] = random.Random(f"{sdd.model_id}:{attr.name}:{seed}")

    def read(self, t_ms: int) -> dict[str, Any]:
        out = {}
        for name, spec in self._specs.items():
            phase = (t_ms % spec["period_ms"]) / spec["period_ms"]
            wf = spec["waveform"]
            if wf == "constant":
                v = spec["baseline"]
            elif wf == "sine":
                v = spec["baseline"] + spec["amplitude"] * math.sin(2 * math.pi * phase)
            elif wf == "square":
                v = spec["baseline"] + (spec["amplitude"] if phase < 0.5 else -spec["amplitude"])
            else:  # sawtooth
                v = spec["baseline"] + spec["amplitude"] * (2 * phase - 1)
            if spec["noise"] > 0:
                v += self._rngs[name].gauss(0.0, spec["noise"])
            out[name] = v
        return out


class TraceDriver:
    """Replays a recorded CSV trace in row order; loops by default."""

    def __init__(self, sdd: SensorDeviceDefinition):
        params = sdd.driver_params
        path = params.get("trace_file")
        if not path:
            raise UnsupportedDriver("simulated-trace driver requires params.trace_file")
        self._loop = bool(params.get("loop", True))
        self._rows = self._load(Path(path), sdd)
        self._pos = 0

    @staticmethod
    def _load(path: Path, sdd: SensorDeviceDefinition) -> list[dict[str, Any]]:
        if not path.exists():
            raise UnsupportedDriver(f"trace file not found: {path}")
        rows = []
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            declared = set(sdd.attribute_names)
            for raw in reader:
                row = {}
                for key, cell in raw.items():
                    if key == "timestamp" or key not in declared:
                        continue
                    kind = next(a.kind for a in sdd.attributes if a.name == key)
                    if kind == ValueKind.NUMBER:
                        row[key] = float(cell)
                    elif kind == ValueKind.BOOLEAN:
                        row[key] = cell.strip().lower() in ("1", "true", "yes")
                    else:
                        row[key] = cell
                rows.append(row)
        if not rows:
            raise UnsupportedDriver(f"trace file has no data rows: {path}")
        return rows

    def read(self, t_ms: int) -> dict[str, Any]:
        if self._pos >= len(self._rows):
            if not self._loop:
                raise SensorFault("trace exhausted")
            self._pos = 0
        row = self._rows[self._pos]
        self._pos += 1
        return dict(row)


class StubDriver:
    """Placeholder for a real external driver; always reports a fault."""

    def __init__(self, sdd: SensorDeviceDefinition):
        self._model = sdd.model_id

    def read(self, t_ms: int) -> dict[str, Any]:
        raise SensorFault(f"no external driver connected for model '{self._model}'")


def _make_driver(sdd: SensorDeviceDefinition):
    if sdd.driver_kind == "simulated-function":
        return FunctionDriver(sdd)
    if sdd.driver_kind == "simulated-trace":
        return TraceDriver(sdd)
    if sdd.driver_kind == "external-stub":
        return StubDriver(sdd)
    raise UnsupportedDriver(f"unknown driver kind '{sdd.driver_kind}'")


@dataclass(frozen=True)
class Reading:
    timestamp: int
    values: dict[str, Any]


class SensorWrapper:
    """Adapter for one sensor model; pulls timestamped readings on demand.

    A wrapper instance feeds exactly one pipeline; use instantiate() to get an
    independent copy (fresh driver state) for another pipeline.
    """

    def __init__(self, sdd: SensorDeviceDefinition, origin: str):
        self.sdd = sdd
        self.origin = origin  # "repository-cached" | "generated-from-sdd"
        self._driver = _make_driver(sdd)
        self._last_ts: Optional[int] = None

    @property
    def model_id(self) -> str:
        return self.sdd.model_id

    def instantiate(self) -> "SensorWrapper":
        return SensorWrapper(self.sdd, origin="repository-cached")

    def pull(self, clock) -> Reading:
        t = clock.now_ms()
        if self._last_ts is not None and t < self._last_ts:
            t = self._last_ts  # per-wrapper timestamps never regress
        values = self._driver.read(t)
        declared = set(self.sdd.attribute_names)
        extra = set(values) - declared
        if extra:
            raise SensorFault(f"driver emitted undeclared attributes: {sorted(extra)}")
        for name in declared - set(values):
            values[name] = UNKNOWN
        self._last_ts = t
        return Reading(timestamp=t, values=values)


def generate_wrapper(sdd: SensorDeviceDefinition) -> SensorWrapper:
    """Build a wrapper from a device definition (paper's wrapper generation)."""
    if sdd.driver_kind not in DRIVER_KINDS:
        raise UnsupportedDriver(f"unknown driver kind '{sdd.driver_kind}'")
    return SensorWrapper(sdd, origin="generated-from-sdd")


class WrapperGenerator:
    """generate_wrapper with an instrumented call counter."""

    def __init__(self):
        self.generation_count = 0

    def generate(self, sdd: SensorDeviceDefinition) -> SensorWrapper:
        wrapper = generate_wrapper(sdd)
        self.generation_count += 1
        return wrapper


class SddRepository:
    """Local directory of SDD files (filename = model id) plus in-memory adds."""

    def __init__(self, directory: Optional[Path] = None):
        self._directory = Path(directory) if directory else None
        self._memory: dict[str, SensorDeviceDefinition] = {}
        self._lock = threading.Lock()

    def add(self, sdd: SensorDeviceDefinition) -> None:
        with self._lock:
            self._memory[sdd.model_id] = sdd

    def get(self, model_id: str) -> Optional[SensorDeviceDefinition]:
        with self._lock:
            if model_id in self._memory:
                return self._memory[model_id]
        if self._directory:
            for ext in (".yaml", ".yml", ".json"):
                path = self._directory / f"{model_id}{ext}"
                if path.exists():
                    sdd = load_sdd(path.read_bytes())
                    if sdd.model_id != model_id:
                        raise InvalidSdd(
                            f"model_id: file {path.name} declares '{sdd.model_id}'"
                        )
                    with self._lock:
                        self._memory[model_id] = sdd
                    return sdd
        return None

    def model_ids(self) -> list[str]:
        with self._lock:
            ids = set(self._memory)
        if self._directory and self._directory.exists():
            for path in self._directory.iterdir():
                if path.suffix in (".yaml", ".yml", ".json"):
                    ids.add(path.stem)
        return sorted(ids)


class WrapperRepository:
    def __init__(self):
        self._wrappers: dict[str, SensorWrapper] = {}
        self._lock = threading.Lock()

    def get(self, model_id: str) -> Optional[SensorWrapper]:
        with self._lock:
            return self._wrappers.get(model_id)

    def put(self, wrapper: SensorWrapper) -> None:
        with self._lock:
            self._wrappers[wrapper.model_id] = wrapper

    def __contains__(self, model_id: str) -> bool:
        with self._lock:
            return model_id in self._wrappers


def resolve_wrapper(
    model_id: str,
    wrapper_repo: WrapperRepository,
    sdd_repo: SddRepository,
    generator: Optional[WrapperGenerator] = None,
) -> SensorWrapper:
    """Repository-first lookup: cached wrapper, else generate from SDD and cache."""
    cached = wrapper_repo.get(model_id)
    if cached is not None:
        return cached
    sdd = sdd_repo.get(model_id)
    if sdd is None:
        raise WrapperUnavailable(f"no wrapper or SDD for model '{model_id}'")
    wrapper = generator.generate(sdd) if generator else generate_wrapper(sdd)
    wrapper_repo.put(wrapper)
    return wrapper
