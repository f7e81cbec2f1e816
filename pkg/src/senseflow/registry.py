"""Context provider registry (which sensors exist, what they provide, whether
they are online) and the capturable-attribute catalog."""

from __future__ import annotations

import threading
from dataclasses import dataclass, replace
from typing import Any, Optional

from .acquisition import AttributeSpec
from .errors import DuplicateSensorId, UnknownProvider


@dataclass(frozen=True)
class Location:
    latitude: float
    longitude: float
    label: str


@dataclass(frozen=True)
class SensorDescriptor:
    sensor_id: str
    model_id: str
    location: Location
    cost_rank: int
    provided_attributes: tuple[AttributeSpec, ...]
    availability: str = "online"

    def __post_init__(self):
        if not self.sensor_id:
            raise ValueError("sensor_id must be non-empty")
        if not -90.0 <= self.location.latitude <= 90.0:
            raise ValueError(f"latitude out of range: {self.location.latitude}")
        if not -180.0 <= self.location.longitude <= 180.0:
            raise ValueError(f"longitude out of range: {self.location.longitude}")
        if self.availability not in ("online", "offline"):
            raise ValueError(f"availability must be online|offline: {self.availability}")

    def provides(self, attribute: str) -> bool:
        return any(a.name == attribute for a in self.provided_attributes)


@dataclass(frozen=True)
class ProviderEntry:
    provider_id: str
    descriptor: SensorDescriptor
    registered_at: int


@dataclass(frozen=True)
class AttributeCatalogEntry:
    attribute: AttributeSpec
    provider_count: int
    derivable: bool


class ProviderRegistry:
    """Concurrent lookups; registrations and availability flips serialized."""

    def __init__(self):
        self._entries: dict[str, ProviderEntry] = {}
        self._lock = threading.Lock()

    def register(self, descriptor: SensorDescriptor, now_ms: int = 0) -> ProviderEntry:
        with self._lock:
            if descriptor.sensor_id in self._entries:
                raise DuplicateSensorId(f"sensor '{descriptor.sensor_id}' already registered")
            entry = ProviderEntry(
                provider_id=descriptor.sensor_id,
                descriptor=descriptor,
                registered_at=now_ms,
            )
            self._entries[descriptor.sensor_id] = entry
            return entry

    def get(self, provider_id: str) -> ProviderEntry:
        with self._lock:
            entry = self._entries.get(provider_id)
        if entry is None:
            raise UnknownProvider(f"no provider '{provider_id}'")
        return entry

    def is_online(self, provider_id: str) -> bool:
        return self.get(provider_id).descriptor.availability == "online"

    def set_availability(self, provider_id: str, status: str) -> ProviderEntry:
        if status not in ("online", "offline"):
            raise ValueError(f"status must be online|offline: {status}")
        with self._lock:
            entry = self._entries.get(provider_id)
            if entry is None:
                raise UnknownProvider(f"no provider '{provider_id}'")
            updated = replace(entry, descriptor=replace(entry.descriptor, availability=status))
            self._entries[provider_id] = updated
            return updated

    def find_providers(
        self,
        attribute: str,
        location_label: Optional[str] = None,
        max_cost_rank: Optional[int] = None,
    ) -> list[ProviderEntry]:
        """Online providers of an attribute, cheapest first, id as tie-break."""
        with self._lock:
            entries = list(self._entries.values())
        hits = []
        for entry in entries:
            d = entry.descriptor
            if d.availability != "online" or not d.provides(attribute):
                continue
            if location_label is not None and d.location.label != location_label:
                continue
            if max_cost_rank is not None and d.cost_rank > max_cost_rank:
                continue
            hits.append(entry)
        hits.sort(key=lambda e: (e.descriptor.cost_rank, e.descriptor.sensor_id))
        return hits

    def entries(self) -> list[ProviderEntry]:
        with self._lock:
            return sorted(self._entries.values(), key=lambda e: e.provider_id)

    def provided_attribute_specs(self) -> dict[str, AttributeSpec]:
        specs: dict[str, AttributeSpec] = {}
        for entry in self.entries():
            for attr in entry.descriptor.provided_attributes:
                specs.setdefault(attr.name, attr)
        return specs

    def knows_attribute(self, attribute: str) -> bool:
        return any(
            e.descriptor.provides(attribute) for e in self.entries()
        )


def capturable_attributes(registry: ProviderRegistry, kb) -> list[AttributeCatalogEntry]:
    """Least fixed point: directly provided attributes plus attributes some
    rule can derive from already-capturable dependencies."""
    provider_counts: dict[str, int] = {}
    specs = registry.provided_attribute_specs()
    for entry in registry.entries():
        if entry.descriptor.availability != "online":
            continue
        for attr in entry.descriptor.provided_attributes:
            provider_counts[attr.name] = provider_counts.get(attr.name, 0) + 1

    capturable = set(provider_counts)
    changed = True
    while changed:
        changed = False
        for attr in kb.derived_attributes():
            if attr in capturable:
                continue
            for rule in kb.rules_for(attr):
                deps = {c.attribute for c in rule.conditions}
                if deps <= capturable:
                    capturable.add(attr)
                    changed = True
                    break

    out = []
    for name in sorted(capturable):
        derivable = any(
            {c.attribute for c in rule.conditions} <= capturable
            for rule in kb.rules_for(name)
        )
        spec = specs.get(name) or kb.attribute_spec(name) or AttributeSpec(name, "", _guess_kind(name, kb))
        out.append(
            AttributeCatalogEntry(
                attribute=spec,
                provider_count=provider_counts.get(name, 0),
                derivable=derivable,
            )
        )
    return out


def _guess_kind(name: str, kb) -> Any:
    from .values import ValueKind, kind_of

    for rule in kb.rules_for(name):
        kind = kind_of(rule.consequent_value)
        if kind:
            return kind
    return ValueKind.STRING
