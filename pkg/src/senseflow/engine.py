"""The operational front door: boots fixtures into a live engine, orchestrates
submit (validate, plan, compile-or-reuse, subscribe), and drives all pipelines
and deliveries on one deterministic event schedule."""

from __future__ import annotations

import heapq
import json
import logging
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .acquisition import SddRepository, WrapperGenerator, WrapperRepository
from .clock import RealClock, SimulatedClock
from .discoverer import Discoverer, DiscovererRepository, compile_plan
from .dissemination import (
    Dispatcher,
    FileSink,
    RecordFormatter,
    StreamSink,
    Subscription,
    SubscriptionStore,
    validate_request,
)
from .errors import ConfigError, UnknownProvider
from .fusion import builtin_repository
from .knowledge import KnowledgeBase
from .reasoning import build_plan, canonical_key, plan_dump
from .registry import (
    Location,
    ProviderRegistry,
    SensorDescriptor,
    capturable_attributes,
)

log = logging.getLogger(__name__)

_PRIO_EVENT, _PRIO_TICK, _PRIO_DELIVERY = 0, 1, 2


@dataclass(frozen=True)
class ScenarioEvent:
    at_ms: int
    action: str  # only "set-availability" for now
    sensor_id: str
    status: str


@dataclass(frozen=True)
class ScenarioConfig:
    sdd_directory: Path
    fleet_file: Path
    domain_files: tuple[Path, ...]
    requests: tuple[Path, ...]
    run_for_ms: int
    clock_mode: str = "simulated"
    events: tuple[ScenarioEvent, ...] = field(default_factory=tuple)


def load_scenario_config(path: Path) -> ScenarioConfig:
    """Load and fail-fast validate a scenario file; paths resolve relative to it."""
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_bytes())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read scenario config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("scenario config must be a mapping")
    base = path.parent

    def resolve(p) -> Path:
        return (base / p).resolve()

    try:
        config = ScenarioConfig(
            sdd_directory=resolve(doc["sdd_directory"]),
            fleet_file=resolve(doc["fleet_file"]),
            domain_files=tuple(resolve(p) for p in doc.get("domain_files", [])),
            requests=tuple(resolve(p) for p in doc.get("requests", [])),
            run_for_ms=int(doc.get("run_for_ms", 0)),
            clock_mode=doc.get("clock", "simulated"),
            events=tuple(
                ScenarioEvent(
                    at_ms=int(e["at_ms"]),
                    action=e.get("action", "set-availability"),
                    sensor_id=e["sensor_id"],
                    status=e["status"],
                )
                for e in doc.get("events", [])
            ),
        )
    except KeyError as exc:
        raise ConfigError(f"scenario config missing field {exc}") from exc
    if config.clock_mode not in ("simulated", "real"):
        raise ConfigError(f"clock must be simulated|real: {config.clock_mode}")
    for p in [config.sdd_directory, config.fleet_file, *config.domain_files, *config.requests]:
        if not Path(p).exists():
            raise ConfigError(f"referenced file does not exist: {p}")
    for e in config.events:
        if e.action != "set-availability" or e.status not in ("online", "offline"):
            raise ConfigError(f"unsupported scenario event: {e}")
    return config


@dataclass
class _ActiveSubscription:
    subscription: Subscription
    dispatcher: Dispatcher
    discoverer: Discoverer
    unsubscribed: bool = False


class Engine:
    """All component repositories plus the event scheduler, wired together."""

    def __init__(self, clock=None, sdd_directory: Optional[Path] = None,
                 out_dir: Optional[Path] = None):
        self.clock = clock if clock is not None else SimulatedClock()
        self.sdd_repo = SddRepository(sdd_directory)
        self.wrapper_repo = WrapperRepository()
        self.wrapper_generator = WrapperGenerator()
        self.registry = ProviderRegistry()
        self.kb = KnowledgeBase()
        self.fusion_repo = builtin_repository()
        self.disc_repo = DiscovererRepository()
        self.subscriptions = SubscriptionStore()
        self.out_dir = Path(out_dir) if out_dir else None
        self.compile_count = 0
        self._active: dict[str, _ActiveSubscription] = {}
        self._streams: dict[str, StreamSink] = {}
        self._queue: list[tuple[int, int, int, tuple]] = []
        self._seq = 0
        self._request_counter = 0
        self._lock = threading.Lock()

    # --- boot-time loading ---

    def load_fleet(self, path: Path) -> int:
        try:
            doc = yaml.safe_load(Path(path).read_bytes())
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read fleet file {path}: {exc}") from exc
        sensors = (doc or {}).get("sensors")
        if not isinstance(sensors, list):
            raise ConfigError(f"fleet file {path}: 'sensors' must be a list")
        count = 0
        for i, s in enumerate(sensors):
            try:
                model_id = s["model_id"]
                sdd = self.sdd_repo.get(model_id)
                if sdd is None:
                    raise ConfigError(
                        f"fleet file {path}: sensors[{i}] references model "
                        f"'{model_id}' with no SDD"
                    )
                loc = s.get("location", {})
                descriptor = SensorDescriptor(
                    sensor_id=s["sensor_id"],
                    model_id=model_id,
                    location=Location(
                        latitude=float(loc.get("latitude", 0.0)),
                        longitude=float(loc.get("longitude", 0.0)),
                        label=str(loc.get("label", "")),
                    ),
                    cost_rank=int(s.get("cost_rank", 1)),
                    provided_attributes=sdd.attributes,
                )
            except KeyError as exc:
                raise ConfigError(f"fleet file {path}: sensors[{i}] missing field {exc}")
            self.registry.register(descriptor, now_ms=self.clock.now_ms())
            count += 1
        return count

    def load_domain_file(self, path: Path) -> None:
        self.kb.load_domain(Path(path).read_bytes())

    # --- submission ---

    def submit(self, document: bytes | str | dict) -> dict:
        """validate -> plan -> reuse-or-compile -> subscribe -> schedule."""
        with self._lock:
            self._request_counter += 1
            request_id = f"req-{self._request_counter:04d}"
        request, draft = validate_request(document, request_id=request_id)
        key = canonical_key(request)
        now = self.clock.now_ms()

        disc = self.disc_repo.acquire(key)
        reuse = disc is not None
        if disc is None:
            plan = build_plan(request, self.registry, self.kb, self.fusion_repo)
            disc = compile_plan(
                plan, self.wrapper_repo, self.sdd_repo, self.registry,
                self.fusion_repo, self.wrapper_generator,
            )
            self.compile_count += 1
            self.disc_repo.register(disc)
            disc.add_subscriber()
            disc.start()
            self._schedule(now + disc.sample_interval_ms, _PRIO_TICK, ("tick", disc))

        sub = self.subscriptions.subscribe(draft, request.request_id, key, now)
        sink = self._make_sink(sub)
        formatter = RecordFormatter(sub.output_format, disc.plan.outputs)
        active = _ActiveSubscription(sub, Dispatcher(sub, sink, formatter), disc)
        self._active[sub.subscription_id] = active
        self._schedule(
            now + sub.delivery_interval_ms, _PRIO_DELIVERY, ("deliver", active)
        )
        return {
            "subscription_id": sub.subscription_id,
            "request_id": request.request_id,
            "plan_summary": {
                "plan_id": disc.plan_id,
                "sources": len(disc.plan.sources),
                "derived": len(disc.plan.derives),
                "reuse": reuse,
            },
        }

    def _make_sink(self, sub: Subscription):
        if sub.sink_kind == "append-file":
            target = Path(sub.sink_target)
            if not target.is_absolute() and self.out_dir:
                target = self.out_dir / target
            return FileSink(target)
        sink = StreamSink()
        self._streams[sub.subscription_id] = sink
        return sink

    def stream_contents(self, subscription_id: str) -> bytes:
        sink = self._streams.get(subscription_id)
        return sink.read_all() if sink else b""

    def set_availability(self, sensor_id: str, status: str) -> None:
        self.registry.set_availability(sensor_id, status)

    # --- scheduling ---

    def _schedule(self, at_ms: int, priority: int, action: tuple) -> None:
        self._seq += 1
        heapq.heappush(self._queue, (at_ms, priority, self._seq, action))

    def schedule_event(self, event: ScenarioEvent) -> None:
        self._schedule(
            self.clock.now_ms() + event.at_ms, _PRIO_EVENT,
            ("availability", event.sensor_id, event.status),
        )

    def run_for(self, duration_ms: int) -> None:
        """Advance the engine to now + duration, executing every due tick,
        delivery, and scripted event in deterministic order."""
        end = self.clock.now_ms() + duration_ms
        while self._queue and self._queue[0][0] <= end:
            at_ms, _prio, _seq, action = heapq.heappop(self._queue)
            if at_ms > self.clock.now_ms():
                self.clock.sleep_until(at_ms)
            self._execute(action, at_ms)
        if end > self.clock.now_ms():
            self.clock.sleep_until(end)

    def _execute(self, action: tuple, at_ms: int) -> None:
        kind = action[0]
        if kind == "availability":
            _, sensor_id, status = action
            try:
                self.registry.set_availability(sensor_id, status)
            except UnknownProvider:
                log.warning("scenario event for unknown sensor '%s'", sensor_id)
        elif kind == "tick":
            disc = action[1]
            if disc.state != "running":
                return
            disc.tick(self.clock)
            self._schedule(at_ms + disc.sample_interval_ms, _PRIO_TICK, ("tick", disc))
        elif kind == "deliver":
            active = action[1]
            sub = active.subscription
            if active.unsubscribed:
                return
            if sub.is_expired(at_ms) and at_ms > (sub.expires_at or at_ms):
                self._expire(active)
                return
            active.dispatcher.deliver(active.discoverer.latest_record, at_ms)
            next_at = at_ms + sub.delivery_interval_ms
            if sub.expires_at is not None and next_at > sub.expires_at:
                self._expire(active)
            else:
                self._schedule(next_at, _PRIO_DELIVERY, ("deliver", active))

    def _expire(self, active: _ActiveSubscription) -> None:
        active.subscription.state = "expired"
        if not active.unsubscribed:
            active.unsubscribed = True
            active.discoverer.remove_subscriber()

    def unsubscribe(self, subscription_id: str) -> None:
        active = self._active.get(subscription_id)
        if active and not active.unsubscribed:
            active.unsubscribed = True
            active.subscription.state = "expired"
            active.discoverer.remove_subscriber()

    # --- inspection ---

    def inspect(self, kind: str) -> list[dict]:
        if kind == "sensors":
            return [
                {
                    "sensor_id": e.provider_id,
                    "model_id": e.descriptor.model_id,
                    "location": e.descriptor.location.label,
                    "availability": e.descriptor.availability,
                    "cost_rank": e.descriptor.cost_rank,
                    "attributes": [a.name for a in e.descriptor.provided_attributes],
                }
                for e in self.registry.entries()
            ]
        if kind == "attributes":
            return [
                {
                    "name": entry.attribute.name,
                    "unit": entry.attribute.unit,
                    "kind": entry.attribute.kind.value,
                    "provider_count": entry.provider_count,
                    "derivable": entry.derivable,
                }
                for entry in capturable_attributes(self.registry, self.kb)
            ]
        if kind == "plans":
            return [plan_dump(d.plan) | {
                "state": d.state,
                "subscriber_count": d.subscriber_count,
                "tick_interval_ms": d.sample_interval_ms,
            } for d in self.disc_repo.all()]
        if kind == "operators":
            return [
                {
                    "operator_id": d.operator_id,
                    "capability": d.capability,
                    "input_arity": d.input_arity,
                    "params": list(d.params),
                }
                for d in self.fusion_repo.descriptors()
            ]
        if kind == "subscriptions":
            return [
                {
                    "subscription_id": s.subscription_id,
                    "user_id": s.user_id,
                    "format": s.output_format,
                    "interval_ms": s.delivery_interval_ms,
                    "state": s.state,
                    "delivered": s.delivered_count,
                    "sink": {"kind": s.sink_kind, "target": s.sink_target},
                }
                for s in self.subscriptions.all()
            ]
        raise ValueError(f"unknown inspection kind '{kind}'")


def boot(config: ScenarioConfig, out_dir: Optional[Path] = None) -> Engine:
    """Load SDDs, register the fleet, load domains; the engine is then live."""
    clock = SimulatedClock() if config.clock_mode == "simulated" else RealClock()
    engine = Engine(clock=clock, sdd_directory=config.sdd_directory, out_dir=out_dir)
    for model_id in engine.sdd_repo.model_ids():
        engine.sdd_repo.get(model_id)  # validates each file eagerly
    engine.load_fleet(config.fleet_file)
    for path in config.domain_files:
        engine.load_domain_file(path)
    for event in config.events:
        engine.schedule_event(event)
    return engine


def run_scenario(config: ScenarioConfig, out_dir: Path) -> dict:
    """Replay a full scenario: boot, submit every bundled request, run for the
    configured duration, write artifacts, and report per-subscription counts."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    engine = boot(config, out_dir=out_dir)

    submissions = []
    for req_path in config.requests:
        result = engine.submit(Path(req_path).read_bytes())
        submissions.append(result)

    engine.run_for(config.run_for_ms)

    plans = engine.inspect("plans")
    (out_dir / "plans.json").write_text(json.dumps(plans, indent=2) + "\n")

    report = {
        "run_for_ms": config.run_for_ms,
        "clock": config.clock_mode,
        "submissions": submissions,
        "subscriptions": engine.inspect("subscriptions"),
    }
    samples = {}
    for sub in engine.subscriptions.all():
        if sub.sink_kind == "stream-endpoint":
            data = engine.stream_contents(sub.subscription_id)
        else:
            target = Path(sub.sink_target)
            if not target.is_absolute():
                target = out_dir / target
            data = target.read_bytes() if target.exists() else b""
        lines = data.decode().splitlines()
        samples[sub.subscription_id] = lines[:3]
    report["samples"] = samples
    failed = [s for s in report["subscriptions"] if s["state"] == "degraded"]
    report["exit_status"] = 2 if failed else 0
    (out_dir / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    return report
