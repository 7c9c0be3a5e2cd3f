"""Decision-core interface shared by the scripted and LLM-backed cores."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from typing import Optional, Protocol

from ..domain import Activity, HouseholdProfile, Network, PlannedTrip, Tour, TripOutcome
from ..memory import ActivityRecord, TravelRecord
from ..network import enumerate_routes, free_flow_time
from ..scenario import format_clock


class CoreFailure(RuntimeError):
    """A stage that could not produce a usable result after all retries."""

    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"{stage}: {message}")


def derive_seed(run_seed: int, agent_id: int, day: int) -> int:
    digest = hashlib.blake2b(f"{run_seed}:{agent_id}:{day}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def network_brief(network: Network, home_zone: Optional[int] = None, max_links: int = 4) -> str:
    """Prose description of zones, links and free-flow routes (capacities omitted)."""
    lines = ["Zones:"]
    for z in sorted(network.zones.values(), key=lambda z: z.id):
        lines.append(f"- zone {z.id}: {z.label or z.kind} ({z.kind})")
    lines.append("Road links (one-way):")
    for lk in sorted(network.links.values(), key=lambda lk: lk.id):
        lines.append(f"- link {lk.id}: zone {lk.origin_zone} -> zone {lk.dest_zone}, "
                     f"{lk.free_flow_minutes:g} min at free flow")
    lines.append("Routes between zones (link ids, free-flow minutes):")
    for o in sorted(network.zones):
        for d in sorted(network.zones):
            if o == d:
                continue
            routes = enumerate_routes(network, o, d, max_links)
            if not routes:
                continue
            opts = "; ".join(f"{r} {free_flow_time(network, r):g} min" for r in routes)
            lines.append(f"- {o} -> {d}: {opts}")
    return "\n".join(lines)


@dataclass(frozen=True)
class DecisionContext:
    profile: HouseholdProfile
    day: int
    network: Network
    network_brief: str
    rng_seed: int
    activity_records: tuple[ActivityRecord, ...] = ()
    travel_records: tuple[TravelRecord, ...] = ()
    summaries: tuple[str, ...] = ()
    weekend_pattern: bool = False
    # today's plan, filled in as the pipeline advances (used by reflect)
    activities: tuple[Activity, ...] = ()
    trips: tuple[PlannedTrip, ...] = ()

    @property
    def retrieved_activity_memory(self) -> list[str]:
        return [r.text for r in self.activity_records]

    @property
    def retrieved_travel_memory(self) -> list[str]:
        return [r.rendered_text for r in self.travel_records]

    def with_plan(self, **changes) -> "DecisionContext":
        return replace(self, **changes)


@dataclass(frozen=True)
class DeclaredTrip:
    member: str
    purpose: str
    origin_zone: int
    dest_zone: int
    departure_minute: float
    route: Optional[tuple[int, ...]] = None
    expected_arrival_minute: Optional[float] = None

    def describe(self) -> str:
        route = f" via links {list(self.route)}" if self.route else ""
        eta = ""
        if self.expected_arrival_minute is not None:
            eta = f", expecting to arrive at {format_clock(self.expected_arrival_minute)}"
        return (f"{self.member} drives from zone {self.origin_zone} to zone {self.dest_zone} for {self.purpose}, "
                f"leaving at {format_clock(self.departure_minute)}{route}{eta}")


@dataclass(frozen=True)
class PlanDraft:
    narrative: str
    declared_trips: tuple[DeclaredTrip, ...] = ()

    @property
    def declared_count(self) -> int:
        return len(self.declared_trips)

    def render(self) -> str:
        lines = [self.narrative.strip(), "", f"Declared trips ({self.declared_count}):"]
        lines += [f"{i}. {t.describe()}" for i, t in enumerate(self.declared_trips, 1)]
        return "\n".join(lines) + "\n"


@dataclass
class StageTrace:
    """Per-call attempt log filled in by the core."""

    stage: str
    attempts: list[dict] = field(default_factory=list)

    @property
    def retries(self) -> int:
        return max(0, len(self.attempts) - 1)

    def record(self, ok: bool, **extra) -> None:
        self.attempts.append({"attempt": len(self.attempts) + 1, "ok": ok, **extra})


FINDING_CODES = (
    "mandatory_missing",
    "route_discontiguous",
    "route_wrong_endpoints",
    "infeasible_timing",
    "overlapping_trips",
    "bad_zone",
    "late_expectation",
)


@dataclass(frozen=True)
class ValidationFinding:
    code: str
    detail: str
    subject: str  # trip id, "#<n>" for the n-th declared trip, or a member role
    trip_index: Optional[int] = None  # 0-based position in the checked plan

    def __post_init__(self):
        if self.code not in FINDING_CODES:
            raise ValueError(f"unknown finding code {self.code!r}")

    def to_dict(self) -> dict:
        return {"code": self.code, "detail": self.detail, "subject": self.subject, "trip_index": self.trip_index}


class DecisionCore(Protocol):
    core_id: str

    def generate_activities(self, ctx: DecisionContext, trace: StageTrace) -> list[Activity]: ...

    def build_tours(self, activities: list[Activity], ctx: DecisionContext, trace: StageTrace) -> list[Tour]: ...

    def plan_trips(self, tours: list[Tour], ctx: DecisionContext, trace: StageTrace) -> PlanDraft: ...

    def self_correct(self, draft: PlanDraft, findings: list[ValidationFinding], ctx: DecisionContext,
                     trace: StageTrace) -> PlanDraft: ...

    def format_trips(self, draft: PlanDraft, ctx: DecisionContext, trace: StageTrace) -> list[PlannedTrip]: ...

    def reflect(self, outcomes: list[TripOutcome], ctx: DecisionContext,
                trace: StageTrace) -> tuple[list[ActivityRecord], list[TravelRecord]]: ...
