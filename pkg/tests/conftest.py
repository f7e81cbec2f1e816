import json
from pathlib import Path

import pytest
import yaml

from senseflow.acquisition import AttributeSpec, SddRepository
from senseflow.clock import SimulatedClock
from senseflow.knowledge import KnowledgeBase
from senseflow.registry import Location, ProviderRegistry, SensorDescriptor
from senseflow.values import ValueKind

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures" / "phytophthora"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def phytophthora_rules_doc() -> bytes:
    return (FIXTURES / "domains" / "phytophthora.yaml").read_bytes()


@pytest.fixture
def kb(phytophthora_rules_doc) -> KnowledgeBase:
    kb = KnowledgeBase()
    kb.load_domain(phytophthora_rules_doc)
    return kb


def make_descriptor(sensor_id, attributes, *, model_id=None, label="plot-7",
                    cost_rank=1, lat=-35.0, lon=147.0):
    provided = tuple(
        a if isinstance(a, AttributeSpec) else AttributeSpec(a, "", ValueKind.NUMBER)
        for a in attributes
    )
    return SensorDescriptor(
        sensor_id=sensor_id,
        model_id=model_id or f"model-{sensor_id}",
        location=Location(lat, lon, label),
        cost_rank=cost_rank,
        provided_attributes=provided,
    )


@pytest.fixture
def use_case_registry() -> ProviderRegistry:
    registry = ProviderRegistry()
    registry.register(make_descriptor("tmp-1", ["airTemperature"], model_id="tmp-100"))
    registry.register(make_descriptor("hum-1", ["airHumidity"], model_id="hum-200"))
    registry.register(make_descriptor("wet-1", ["leafWetness"], model_id="wet-300"))
    return registry


@pytest.fixture
def use_case_sdd_repo(fixtures_dir) -> SddRepository:
    return SddRepository(fixtures_dir / "sdd")


@pytest.fixture
def clock() -> SimulatedClock:
    return SimulatedClock()


def constant_sdd(model_id="tmp-100", attr="airTemperature", baseline=15,
                 interval_ms=1000) -> bytes:
    return yaml.safe_dump(
        {
            "model_id": model_id,
            "attributes": [{"name": attr, "unit": "degC", "kind": "number"}],
            "sampling_interval_ms": interval_ms,
            "driver": {"kind": "simulated-function",
                       "params": {"waveform": "constant", "baseline": baseline}},
        }
    ).encode()


def parse_jsonl(data: bytes) -> list[dict]:
    return [json.loads(line) for line in data.decode().splitlines()]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion."""
    results = []
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py" in nodeid and "::" in nodeid:
                results.append((nodeid.split("::")[-1], outcome))
    if results:
        terminalreporter.write_sep("-", "acceptance criteria")
        for name, outcome in sorted(results):
            status = "PASS" if outcome == "passed" else "FAIL"
            terminalreporter.write_line(f"{status}  {name}")
