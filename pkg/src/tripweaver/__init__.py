"""Multi-day household travel simulation.

Households plan each day through a staged decision pipeline (scripted or
LLM-backed), their trips are loaded together onto a capacity-constrained
road network, and each household remembers how its trips went.
"""

from .domain import (
    Activity,
    HouseholdProfile,
    Link,
    MemberSchedule,
    Network,
    PlannedTrip,
    ScenarioError,
    SimulationConfig,
    Tour,
    TripOutcome,
    Zone,
)
from .network import build_network, enumerate_routes, free_flow_time
from .runner import RunResult, run_simulation
from .scenario import bundled_scenario_path, load_scenario
from .traffic import DayLoadResult, simulate_day

__version__ = "0.1.0"

__all__ = [
    "Activity",
    "DayLoadResult",
    "HouseholdProfile",
    "Link",
    "MemberSchedule",
    "Network",
    "PlannedTrip",
    "RunResult",
    "ScenarioError",
    "SimulationConfig",
    "Tour",
    "TripOutcome",
    "Zone",
    "build_network",
    "bundled_scenario_path",
    "enumerate_routes",
    "free_flow_time",
    "load_scenario",
    "run_simulation",
    "simulate_day",
]
