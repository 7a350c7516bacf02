"""Simulation of VRU awareness message generation with standalone, ETSI
explicit and implicit clustering over a lossy ITS-G5 broadcast channel."""

from .config import ConfigError, ScenarioConfig, load_config, parse_config
from .engine import Simulator, accounting_scenario, desk_scenario, run_repetition, run_scenario

__all__ = [
    "ConfigError",
    "ScenarioConfig",
    "Simulator",
    "accounting_scenario",
    "desk_scenario",
    "load_config",
    "parse_config",
    "run_repetition",
    "run_scenario",
]
