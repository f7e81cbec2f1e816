"""Compiled streaming pipelines: execute a plan on a tick schedule, fuse
readings into annotated records, and support reuse across identical requests."""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Any, Optional

from .acquisition import (
    SddRepository,
    SensorWrapper,
    WrapperGenerator,
    WrapperRepository,
    resolve_wrapper,
)
from .errors import SensorFault, StateError
from .fusion import FusionRepository
from .reasoning import PlanSpec, topological_order
from .registry import ProviderRegistry
from .values import UNKNOWN, is_unknown


@dataclass(frozen=True)
class Annotations:
    geographical_location: dict[str, str]  # sensor id -> location label
    source_sensor_ids: tuple[str, ...]
    quality: dict[str, str]  # output attribute -> measured|derived|unknown


@dataclass(frozen=True)
class DataRecord:
    timestamp: int
    values: dict[str, Any]
    annotations: Annotations


@dataclass
class _Source:
    node_id: str
    provider_id: str
    attributes: tuple[str, ...]
    location_label: str
    wrapper: SensorWrapper
    sampling_interval_ms: int


class Discoverer:
    """One compiled pipeline. Single logical execution loop: tick() has one
    caller (the engine scheduler); repository access is lock-protected."""

    def __init__(self, plan: PlanSpec, sources: list[_Source], registry: ProviderRegistry,
                 fusion_repo: FusionRepository, tick_interval_ms: int):
        self.plan = plan
        self.canonical_key = plan.canonical_key
        self.state = "created"
        self.subscriber_count = 0
        self.sample_interval_ms = tick_interval_ms
        self._sources = sources
        self._registry = registry
        self._fusion = fusion_repo
        self._order = topological_order(plan)
        self._derives = {d.node_id: d for d in plan.derives}
        self._latest: Optional[DataRecord] = None
        self._lock = threading.Lock()

    @property
    def plan_id(self) -> str:
        return self.plan.plan_id

    @property
    def latest_record(self) -> Optional[DataRecord]:
        return self._latest

    def start(self) -> None:
        if self.state == "stopped":
            raise StateError("cannot restart a stopped discoverer")
        self.state = "running"

    def add_subscriber(self) -> int:
        with self._lock:
            self.subscriber_count += 1
            return self.subscriber_count

    def remove_subscriber(self) -> int:
        with self._lock:
            self.subscriber_count = max(0, self.subscriber_count - 1)
            count = self.subscriber_count
        if count == 0:
            self.stop()
        return count

    def tick(self, clock) -> DataRecord:
        """Pull every source once, evaluate derive nodes in topological order,
        assemble one annotated record. A faulted source degrades to unknown."""
        if self.state != "running":
            raise StateError(f"tick on a {self.state} discoverer")
        values: dict[str, Any] = {}
        quality: dict[str, str] = {}
        for src in self._sources:
            faulted = False
            try:
                if self._registry.get(src.provider_id).descriptor.availability != "online":
                    faulted = True
                else:
                    reading = src.wrapper.pull(clock)
            except SensorFault:
                faulted = True
            if faulted:
                for attr in src.attributes:
                    values[attr] = UNKNOWN
                    quality[attr] = "unknown"
            else:
                for attr in src.attributes:
                    v = reading.values.get(attr, UNKNOWN)
                    values[attr] = v
                    quality[attr] = "unknown" if is_unknown(v) else "measured"

        for node_id in self._order:
            node = self._derives.get(node_id)
            if node is None:
                continue
            bindings = {a: values.get(a, UNKNOWN) for a in node.inputs}
            v = self._fusion.apply(
                node.operator_id, list(bindings.values()),
                {"rules": list(node.rules), "bindings": bindings},
            )
            values[node.attribute] = v
            quality[node.attribute] = "unknown" if is_unknown(v) else "derived"

        record = DataRecord(
            timestamp=clock.now_ms(),
            values={a: values[a] for a in self.plan.outputs},
            annotations=Annotations(
                geographical_location={
                    s.provider_id: s.location_label for s in self._sources
                },
                source_sensor_ids=tuple(s.provider_id for s in self._sources),
                quality={a: quality[a] for a in self.plan.outputs},
            ),
        )
        self._latest = record
        return record

    def stop(self) -> "Discoverer":
        self.state = "stopped"
        return self


def compile_plan(
    plan: PlanSpec,
    wrapper_repo: WrapperRepository,
    sdd_repo: SddRepository,
    registry: ProviderRegistry,
    fusion_repo: FusionRepository,
    generator: Optional[WrapperGenerator] = None,
) -> Discoverer:
    """Resolve a wrapper instance per source and fix the evaluation order.
    Tick interval is the fastest source sampling interval, capped by the
    request's delivery interval."""
    sources = []
    intervals = []
    for node in plan.sources:
        registry.get(node.provider_id)  # raises UnknownProvider if deregistered
        template = resolve_wrapper(node.model_id, wrapper_repo, sdd_repo, generator)
        wrapper = template.instantiate()
        sources.append(
            _Source(
                node_id=node.node_id,
                provider_id=node.provider_id,
                attributes=node.attributes,
                location_label=node.location_label,
                wrapper=wrapper,
                sampling_interval_ms=template.sdd.sampling_interval_ms,
            )
        )
        intervals.append(template.sdd.sampling_interval_ms)
    tick_interval = min(intervals) if intervals else plan.delivery_interval_ms
    tick_interval = min(tick_interval, plan.delivery_interval_ms)
    return Discoverer(plan, sources, registry, fusion_repo, tick_interval)


class DiscovererRepository:
    """Compiled pipelines keyed by canonical request key; exact-key reuse."""

    def __init__(self):
        self._by_key: dict[str, Discoverer] = {}
        self._lock = threading.Lock()

    def lookup(self, key: str) -> Optional[Discoverer]:
        with self._lock:
            return self._by_key.get(key)

    def register(self, discoverer: Discoverer) -> None:
        with self._lock:
            self._by_key[discoverer.canonical_key] = discoverer

    def acquire(self, key: str) -> Optional[Discoverer]:
        """Reuse path: on hit, count the new subscriber instead of recompiling."""
        with self._lock:
            disc = self._by_key.get(key)
        if disc is not None and disc.state != "stopped":
            disc.add_subscriber()
            return disc
        return None

    def all(self) -> list[Discoverer]:
        with self._lock:
            return sorted(self._by_key.values(), key=lambda d: d.plan_id)
