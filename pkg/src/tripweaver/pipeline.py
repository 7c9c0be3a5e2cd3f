"""Per-agent daily decision pipeline.

activities -> tours -> trip plan -> (validate, self-correct)* -> structured
trips, followed after network loading by reflection into memory.
"""

from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from dataclasses import asdict, dataclass, field
from typing import Optional, Union

from .cores.base import (
    CoreFailure,
    DecisionContext,
    DecisionCore,
    PlanDraft,
    StageTrace,
    ValidationFinding,
    derive_seed,
    network_brief,
)
from .domain import Activity, HouseholdProfile, Network, PlannedTrip, SimulationConfig, Tour, TripOutcome
from .memory import MemoryStore
from .network import RouteError, free_flow_time, is_valid_route, shortest_free_flow
from .scenario import is_workday

log = logging.getLogger(__name__)

__all__ = [
    "AgentDayLog",
    "AgentDay",
    "ValidationFinding",
    "apply_feedback",
    "build_context",
    "run_agent_day",
    "validate_plan",
]

_EPS = 1e-9


@dataclass(frozen=True)
class _Leg:
    subject: str
    member: str
    origin: int
    dest: int
    departure: float
    route: Optional[tuple[int, ...]]
    expected: Optional[float]


def _legs(plan: Union[PlanDraft, Sequence[PlannedTrip]]) -> list[_Leg]:
    if isinstance(plan, PlanDraft):
        return [
            _Leg(f"#{i + 1}", t.member, t.origin_zone, t.dest_zone, t.departure_minute,
                 tuple(t.route) if t.route is not None else None, t.expected_arrival_minute)
            for i, t in enumerate(plan.declared_trips)
        ]
    return [
        _Leg(t.trip_id, t.member, t.origin_zone, t.dest_zone, t.departure_minute,
             tuple(t.route) if t.route is not None else None, t.expected_arrival_minute)
        for t in plan
    ]


def validate_plan(plan: Union[PlanDraft, Sequence[PlannedTrip]], profile: HouseholdProfile,
                  network: Network, day: int, weekend_pattern: bool = False) -> list[ValidationFinding]:
    """Check a draft or structured plan; an empty list means the plan is accepted."""
    legs = _legs(plan)
    findings: list[ValidationFinding] = []
    members = {m.member for m in profile.members}
    ff: dict[int, float] = {}

    for i, leg in enumerate(legs):
        bad = [z for z in (leg.origin, leg.dest) if z not in network.zones]
        if bad or leg.origin == leg.dest or leg.member not in members:
            what = (f"zone {bad[0]} is not in the network" if bad
                    else f"unknown member {leg.member!r}" if leg.member not in members
                    else f"origin_zone equals dest_zone ({leg.origin})")
            findings.append(ValidationFinding("bad_zone", f"trip {leg.subject}: {what}", leg.subject, i))
            continue
        if leg.route is not None:
            try:
                t = free_flow_time(network, leg.route)
            except RouteError as exc:
                findings.append(ValidationFinding("route_discontiguous", f"route {list(leg.route)} discontiguous: {exc}",
                                                  leg.subject, i))
            else:
                if is_valid_route(network, leg.route, leg.origin, leg.dest):
                    ff[i] = t
                else:
                    findings.append(ValidationFinding(
                        "route_wrong_endpoints",
                        f"route {list(leg.route)} does not lead from zone {leg.origin} to zone {leg.dest}",
                        leg.subject, i))
        if i not in ff:
            best = shortest_free_flow(network, leg.origin, leg.dest)
            if best is not None:
                ff[i] = best
        if leg.expected is not None and i in ff and leg.expected < leg.departure + ff[i] - _EPS:
            findings.append(ValidationFinding(
                "late_expectation",
                f"expected_arrival {leg.expected:g} is before departure + free-flow time {leg.departure + ff[i]:g}",
                leg.subject, i))

    if is_workday(day, weekend_pattern):
        for m in profile.members:
            if not m.travels or m.mandatory_zone is None or m.mandatory_zone == profile.home_zone:
                continue
            start = m.mandatory_window[0]
            covering = [i for i, leg in enumerate(legs) if leg.member == m.member and leg.dest == m.mandatory_zone]
            if not covering:
                findings.append(ValidationFinding(
                    "mandatory_missing",
                    f"no trip takes {m.member} to zone {m.mandatory_zone} for {m.activity or 'the obligation'}",
                    m.member))
                continue
            first = min(covering, key=lambda i: legs[i].departure)
            if first in ff and legs[first].departure + ff[first] > start + _EPS:
                findings.append(ValidationFinding(
                    "infeasible_timing",
                    f"departure {legs[first].departure:g} + free-flow {ff[first]:g} misses the start at {start}",
                    legs[first].subject, first))

    by_member: dict[str, list[int]] = {}
    for i, leg in enumerate(legs):
        by_member.setdefault(leg.member, []).append(i)
    for idx in by_member.values():
        idx.sort(key=lambda i: (legs[i].departure, i))
        for a, b in zip(idx, idx[1:]):
            end_a = legs[a].expected if legs[a].expected is not None else legs[a].departure + ff.get(a, 0.0)
            if legs[b].departure < end_a - _EPS:
                findings.append(ValidationFinding(
                    "overlapping_trips",
                    f"departure of {legs[b].subject} at {legs[b].departure:g} overlaps {legs[a].subject} "
                    f"arriving at {end_a:g}",
                    legs[b].subject, b))
    return findings


@dataclass
class AgentDayLog:
    agent_id: int
    day: int
    activities: list[Activity] = field(default_factory=list)
    tours: list[Tour] = field(default_factory=list)
    drafts: list[PlanDraft] = field(default_factory=list)
    findings: list[list[ValidationFinding]] = field(default_factory=list)
    planned_trips: list[PlannedTrip] = field(default_factory=list)
    declared_count: int = 0
    formatted_count: int = 0
    attempts: dict[str, list[dict]] = field(default_factory=dict)
    stage_failed: Optional[str] = None
    unresolved_findings: bool = False

    @property
    def missed(self) -> int:
        return self.declared_count - self.formatted_count

    @property
    def rounds(self) -> int:
        return max(0, len(self.drafts) - 1)

    def retries(self) -> dict[str, int]:
        return {stage: max(0, len(a) - 1) for stage, a in self.attempts.items()}

    def summary(self) -> dict:
        return {
            "agent_id": self.agent_id,
            "day": self.day,
            "declared_count": self.declared_count,
            "formatted_count": self.formatted_count,
            "missed": self.missed,
            "self_correction_rounds": self.rounds,
            "unresolved_findings": self.unresolved_findings,
            "stage_failed": self.stage_failed,
            "attempts": self.attempts,
            "retries": self.retries(),
        }


@dataclass
class AgentDay:
    trips: list[PlannedTrip]
    log: AgentDayLog
    ctx: DecisionContext


def build_context(profile: HouseholdProfile, store: MemoryStore, day: int, config: SimulationConfig,
                  brief: Optional[str] = None) -> DecisionContext:
    acts, summaries = store.retrieve("activity", day, config.memory_window_days)
    trips, _ = store.retrieve("travel", day, config.memory_window_days)
    return DecisionContext(
        profile=profile,
        day=day,
        network=config.network,
        network_brief=brief if brief is not None else network_brief(config.network),
        rng_seed=derive_seed(config.seed, profile.agent_id, day),
        activity_records=tuple(acts),
        travel_records=tuple(trips),
        summaries=tuple(s.text for s in summaries),
        weekend_pattern=config.weekend_pattern,
    )


def run_agent_day(profile: HouseholdProfile, store: MemoryStore, day: int, cores: Mapping[str, DecisionCore],
                  config: SimulationConfig, brief: Optional[str] = None) -> AgentDay:
    """Run the decision stages for one household on one day.

    Core failures never propagate: the agent contributes no trips and the log
    records which stage failed.
    """
    ctx = build_context(profile, store, day, config, brief)
    daylog = AgentDayLog(profile.agent_id, day)

    def trace(stage: str) -> StageTrace:
        t = StageTrace(stage)
        daylog.attempts.setdefault(stage, [])
        t.attempts = daylog.attempts[stage]
        return t

    stage = "activities"
    draft: Optional[PlanDraft] = None
    try:
        activities = cores["activities"].generate_activities(ctx, trace("activities"))
        daylog.activities = list(activities)
        ctx = ctx.with_plan(activities=tuple(activities))

        stage = "tours"
        tours = cores["tours"].build_tours(list(activities), ctx, trace("tours"))
        daylog.tours = list(tours)

        stage = "trips"
        draft = cores["trips"].plan_trips(list(tours), ctx, trace("trips"))
        findings = validate_plan(draft, profile, config.network, day, config.weekend_pattern)
        daylog.drafts.append(draft)
        daylog.findings.append(findings)

        stage = "self_correct"
        while findings and daylog.rounds < config.self_correction_max_rounds:
            draft = cores["self_correct"].self_correct(draft, findings, ctx, trace("self_correct"))
            findings = validate_plan(draft, profile, config.network, day, config.weekend_pattern)
            daylog.drafts.append(draft)
            daylog.findings.append(findings)
        daylog.unresolved_findings = bool(findings)
        daylog.declared_count = draft.declared_count

        stage = "format"
        trips = cores["format"].format_trips(draft, ctx, trace("format"))
    except CoreFailure as exc:
        log.warning("agent %s day %s: %s", profile.agent_id, day, exc)
        daylog.stage_failed = stage
        trips = []
        if draft is not None and stage in ("self_correct", "format"):
            daylog.declared_count = draft.declared_count

    trips = list(trips)[: daylog.declared_count]
    daylog.planned_trips = trips
    daylog.formatted_count = len(trips)
    ctx = ctx.with_plan(trips=tuple(trips))
    return AgentDay(trips, daylog, ctx)


def apply_feedback(store: MemoryStore, outcomes: Sequence[TripOutcome], core: DecisionCore,
                   ctx: DecisionContext, trace: Optional[StageTrace] = None) -> MemoryStore:
    """Reflect on the day's outcomes and append the records to memory."""
    trace = trace or StageTrace("reflect")
    activity_records, travel_records = core.reflect(list(outcomes), ctx, trace)
    store.extend(activity_records)
    store.extend(travel_records)
    return store


def log_to_dict(daylog: AgentDayLog) -> dict:
    return {
        **daylog.summary(),
        "findings": [[f.to_dict() for f in rnd] for rnd in daylog.findings],
        "drafts": [d.render() for d in daylog.drafts],
    }


def activity_to_dict(a: Activity) -> dict:
    d = asdict(a)
    d["member_roles"] = list(a.member_roles)
    return d
