"""Discrete-event simulator comparing tree (MAODV) and mesh (PUMA) multicast in VANETs."""

from .config import ScenarioConfig, TrafficConfig
from .metrics import MetricsReport, analyze, parse_trace
from .scenario import RunResult, run_scenario

__all__ = ["ScenarioConfig", "TrafficConfig", "MetricsReport", "RunResult", "analyze",
           "parse_trace", "run_scenario"]
__version__ = "0.1.0"
