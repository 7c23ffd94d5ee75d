"""Simulated handset: scripted screen scenarios plus device state."""

from .device import (
    AppRecord,
    CompositeInputEvent,
    DeviceSimulator,
    FsNode,
    FsTree,
    InputLogEntry,
    ManualClock,
    PointerSample,
    ProcessRecord,
    StatusReport,
    normalize_path,
)
from .generators import builtin_generators
from .scenario import (
    ScenarioPlayer,
    ScenarioScript,
    ScenarioStep,
    load_scenario,
    benchmark_workload,
    parse_scenario,
)

__all__ = [
    "AppRecord",
    "CompositeInputEvent",
    "DeviceSimulator",
    "FsNode",
    "FsTree",
    "InputLogEntry",
    "ManualClock",
    "PointerSample",
    "ProcessRecord",
    "StatusReport",
    "normalize_path",
    "builtin_generators",
    "ScenarioPlayer",
    "ScenarioScript",
    "ScenarioStep",
    "load_scenario",
    "benchmark_workload",
    "parse_scenario",
]
