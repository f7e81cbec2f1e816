"""senseflow: sensing-as-a-service middleware.

Accepts high-level context requests, selects sensors and fusion operators to
satisfy them, compiles streaming pipelines, and delivers fused, annotated
records in the requester's chosen format and frequency.
"""

__version__ = "0.1.0"

from .clock import RealClock, SimulatedClock
from .engine import Engine, ScenarioConfig, boot, load_scenario_config, run_scenario
from .values import UNKNOWN, ValueKind, is_unknown

__all__ = [
    "Engine",
    "RealClock",
    "ScenarioConfig",
    "SimulatedClock",
    "UNKNOWN",
    "ValueKind",
    "boot",
    "is_unknown",
    "load_scenario_config",
    "run_scenario",
    "__version__",
]
