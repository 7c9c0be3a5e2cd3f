"""Shared value types for scenarios, plans and trip outcomes.

All times are minutes from midnight. Instances are frozen after load and
may be shared read-only between agent tasks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

ZONE_KINDS = ("residential", "school", "business", "recreational")
ACTIVITY_KINDS = ("mandatory", "maintenance", "discretionary")
STAGES = ("activities", "tours", "trips", "self_correct", "format", "reflect")
CORE_IDS = ("oracle", "llm")
MINUTES_PER_DAY = 1440


class ScenarioError(ValueError):
    """Invalid scenario content. ``path`` points at the offending field."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


@dataclass(frozen=True)
class Zone:
    id: int
    kind: str
    label: str = ""


@dataclass(frozen=True)
class Link:
    id: int
    origin_zone: int
    dest_zone: int
    free_flow_minutes: float
    capacity: float  # vehicles per hour


@dataclass(frozen=True)
class Network:
    zones: dict[int, Zone]
    links: dict[int, Link]
    adjacency: dict[int, tuple[int, ...]]

    def zone_ids(self) -> list[int]:
        return sorted(self.zones)

    def zones_of_kind(self, kind: str) -> list[int]:
        return [z.id for z in sorted(self.zones.values(), key=lambda z: z.id) if z.kind == kind]


@dataclass(frozen=True)
class MemberSchedule:
    member: str
    mandatory_zone: Optional[int] = None
    mandatory_window: Optional[tuple[int, int]] = None
    travels: bool = True
    activity: str = ""  # name of the obligation, e.g. "work" or "school"


@dataclass(frozen=True)
class HouseholdProfile:
    agent_id: int
    identity_text: str
    traits_text: str
    members: tuple[MemberSchedule, ...]
    home_zone: int

    def member(self, role: str) -> MemberSchedule:
        for m in self.members:
            if m.member == role:
                return m
        raise KeyError(role)

    @property
    def travelers(self) -> list[MemberSchedule]:
        return [m for m in self.members if m.travels]


@dataclass(frozen=True)
class Activity:
    name: str
    member_roles: tuple[str, ...]
    kind: str
    location_zone: Optional[int]
    desired_start_minute: int
    duration_minutes: int
    requires_travel: bool

    @property
    def end_minute(self) -> int:
        return self.desired_start_minute + self.duration_minutes


@dataclass(frozen=True)
class Tour:
    member_roles: tuple[str, ...]
    anchor_zone: int
    ordered_activities: tuple[Activity, ...]

    @property
    def driver(self) -> str:
        return self.member_roles[0]


@dataclass(frozen=True)
class PlannedTrip:
    trip_id: str
    member: str
    purpose: str
    origin_zone: int
    dest_zone: int
    departure_minute: float
    route: Optional[tuple[int, ...]]
    expected_arrival_minute: float
    agent_id: int = 0


@dataclass(frozen=True)
class TripOutcome:
    trip_id: str
    actual_departure_minute: float
    actual_arrival_minute: float
    travel_minutes: float
    delay_vs_expected_minutes: float
    per_link_exit_minutes: tuple[float, ...]
    departure_delayed: bool = False


@dataclass(frozen=True)
class LLMSettings:
    model: str = "gpt-4o"
    temperature: float = 0.7
    max_retries: int = 3
    max_parallel: int = 4
    endpoint_env: str = "LLM_BASE_URL"


@dataclass(frozen=True)
class SimulationConfig:
    days: int
    seed: int
    network: Network
    agents: tuple[HouseholdProfile, ...]
    stage_cores: dict[str, str] = field(default_factory=lambda: {s: "oracle" for s in STAGES})
    llm: LLMSettings = field(default_factory=LLMSettings)
    time_step_minutes: float = 1.0
    memory_window_days: int = 7
    self_correction_max_rounds: int = 2
    weekend_pattern: bool = False
    compaction_days: int = 0  # 0 disables long-term compaction

    def agent(self, agent_id: int) -> HouseholdProfile:
        for a in self.agents:
            if a.agent_id == agent_id:
                return a
        raise KeyError(agent_id)
