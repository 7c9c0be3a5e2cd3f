"""Decision core backed by a chat-completions model.

Each stage sends a prompt, extracts the fenced JSON block and validates it.
A reply that fails to parse is sent back with the error for another try, up
to ``max_retries`` times; after that the stage raises :class:`CoreFailure`.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import replace
from typing import Any, Optional, TypeVar

from pydantic import ValidationError

from ..domain import Activity, PlannedTrip, Tour, TripOutcome
from ..llm import prompts
from ..llm.client import ChatClient, LLMUnavailable
from ..llm.schemas import (
    ActivitiesReply,
    FormatReply,
    FormattedTripItem,
    PlanReply,
    ReflectReply,
    ToursReply,
    extract_json,
)
from ..memory import ActivityRecord, TravelRecord
from ..network import free_flow_time, is_valid_route
from ..scenario import mandatory_activities
from .base import CoreFailure, DecisionContext, DeclaredTrip, PlanDraft, StageTrace, ValidationFinding
from .common import template_records, trip_id

log = logging.getLogger(__name__)

T = TypeVar("T")


def _short(exc: Exception) -> str:
    if isinstance(exc, ValidationError):
        return "; ".join(f"{'.'.join(map(str, e['loc']))}: {e['msg']}" for e in exc.errors()[:5])
    return str(exc)[:300]


class LLMCore:
    core_id = "llm"

    def __init__(self, client: ChatClient, max_retries: int = 3):
        self.client = client
        self.max_retries = max_retries

    def _ask(self, stage: str, messages: list[dict], parse: Callable[[Any], T], ctx: DecisionContext,
             trace: StageTrace) -> T:
        messages = list(messages)
        for attempt in range(self.max_retries + 1):
            try:
                text = self.client.complete(messages, seed=ctx.rng_seed)
            except LLMUnavailable as exc:
                trace.record(False, error=f"unavailable: {exc}")
                raise CoreFailure(stage, str(exc)) from exc
            try:
                result = parse(extract_json(text))
            except (ValueError, ValidationError) as exc:
                err = _short(exc)
                trace.record(False, error=err)
                log.info("agent %s day %s %s: unparseable reply (%s)", ctx.profile.agent_id, ctx.day, stage, err)
                messages += [
                    {"role": "assistant", "content": text},
                    {"role": "user", "content": f"{prompts.tag(ctx, stage)}\nYour reply could not be used: {err}. "
                                                "Answer again with one fenced ```json block in the requested format."},
                ]
                continue
            trace.record(True)
            return result
        raise CoreFailure(stage, f"no usable reply after {self.max_retries + 1} attempts")

    # -- stage 1 ---------------------------------------------------------
    def generate_activities(self, ctx: DecisionContext, trace: StageTrace) -> list[Activity]:
        profile = ctx.profile
        roles = {m.member for m in profile.members}
        required = mandatory_activities(profile, ctx.day, ctx.weekend_pattern)

        def parse(raw: Any) -> list[Activity]:
            reply = ActivitiesReply.model_validate(raw)
            acts = []
            for i, a in enumerate(reply.activities):
                unknown = [r for r in a.members if r not in roles]
                if unknown:
                    raise ValueError(f"activities[{i}]: unknown member {unknown[0]!r}")
                if a.zone is not None and a.zone not in ctx.network.zones:
                    raise ValueError(f"activities[{i}]: zone {a.zone} does not exist")
                start = int(a.start)
                if start + a.duration_minutes > 1440:
                    raise ValueError(f"activities[{i}]: runs past midnight")
                travel = a.zone is not None and a.zone != profile.home_zone
                acts.append(Activity(a.name, tuple(a.members), a.kind, a.zone, start, a.duration_minutes, travel))
            for m in required:
                if not any(set(m.member_roles) <= set(a.member_roles) and a.location_zone == m.location_zone
                           and a.kind == "mandatory" for a in acts):
                    raise ValueError(f"missing the mandatory activity {m.name!r} for {m.member_roles[0]} "
                                     f"at zone {m.location_zone}")
            return sorted(acts, key=lambda a: (a.desired_start_minute, a.name, a.member_roles))

        return self._ask("activities", prompts.activities_messages(ctx), parse, ctx, trace)

    # -- stage 2 ---------------------------------------------------------
    def build_tours(self, activities: list[Activity], ctx: DecisionContext, trace: StageTrace) -> list[Tour]:
        roles = {m.member for m in ctx.profile.members}

        def parse(raw: Any) -> list[Tour]:
            reply = ToursReply.model_validate(raw)
            seen: set[int] = set()
            tours = []
            for i, t in enumerate(reply.tours):
                if any(r not in roles for r in t.members):
                    raise ValueError(f"tours[{i}]: unknown member in {t.members}")
                picked = []
                for n in t.activities:
                    if not 1 <= n <= len(activities):
                        raise ValueError(f"tours[{i}]: no activity number {n}")
                    if n in seen:
                        raise ValueError(f"tours[{i}]: activity {n} is already in another tour")
                    seen.add(n)
                    if activities[n - 1].requires_travel:
                        picked.append(activities[n - 1])
                if picked:
                    picked.sort(key=lambda a: a.desired_start_minute)
                    tours.append(Tour(tuple(dict.fromkeys(t.members)), ctx.profile.home_zone, tuple(picked)))
            missing = [n for n, a in enumerate(activities, 1) if a.requires_travel and n not in seen]
            if missing:
                raise ValueError(f"activities {missing} need travel but are in no tour")
            return tours

        return self._ask("tours", prompts.tours_messages(activities, ctx), parse, ctx, trace)

    # -- stage 3 ---------------------------------------------------------
    @staticmethod
    def _draft(raw: Any) -> PlanDraft:
        reply = PlanReply.model_validate(raw)
        trips = tuple(
            DeclaredTrip(t.member, t.purpose, t.origin, t.destination, t.departure,
                         tuple(t.route) if t.route is not None else None, t.expected_arrival)
            for t in reply.trips
        )
        return PlanDraft(reply.narrative, trips)

    def plan_trips(self, tours: list[Tour], ctx: DecisionContext, trace: StageTrace) -> PlanDraft:
        return self._ask("trips", prompts.plan_messages(tours, ctx), self._draft, ctx, trace)

    def self_correct(self, draft: PlanDraft, findings: list[ValidationFinding], ctx: DecisionContext,
                     trace: StageTrace) -> PlanDraft:
        if not findings:
            return draft
        return self._ask("self_correct", prompts.correct_messages(draft, findings, ctx), self._draft, ctx, trace)

    # -- stage 4 ---------------------------------------------------------
    def format_trips(self, draft: PlanDraft, ctx: DecisionContext, trace: StageTrace) -> list[PlannedTrip]:
        net, profile = ctx.network, ctx.profile
        roles = {m.member for m in profile.members}
        dropped: list[str] = []

        def check(i: int, raw: Any) -> Optional[FormattedTripItem]:
            try:
                item = FormattedTripItem.model_validate(raw)
            except ValidationError as exc:
                dropped.append(f"trips[{i}]: {_short(exc)}")
                return None
            problem = None
            if item.member not in roles:
                problem = f"unknown member {item.member!r}"
            elif item.origin not in net.zones or item.destination not in net.zones or item.origin == item.destination:
                problem = "bad origin/destination zone"
            elif not is_valid_route(net, item.route, item.origin, item.destination):
                problem = f"route {item.route} does not connect zone {item.origin} to {item.destination}"
            if problem:
                dropped.append(f"trips[{i}]: {problem}")
                return None
            return item

        def parse(raw: Any) -> list[tuple[int, FormattedTripItem]]:
            dropped.clear()
            reply = FormatReply.model_validate(raw)
            items = [check(i, r) for i, r in enumerate(reply.trips)]
            # pair each record with a declared trip of the same member and endpoints; extras are discarded
            free = list(range(draft.declared_count))
            paired = []
            for item in items:
                if item is None:
                    continue
                j = next((j for j in free if (draft.declared_trips[j].member, draft.declared_trips[j].origin_zone,
                                              draft.declared_trips[j].dest_zone)
                          == (item.member, item.origin, item.destination)), None)
                if j is None:
                    dropped.append(f"extra trip {item.member} {item.origin}->{item.destination}")
                    continue
                free.remove(j)
                paired.append((j, item))
            return sorted(paired, key=lambda p: p[0])

        paired = self._ask("format", prompts.format_messages(draft, ctx), parse, ctx, trace)
        if dropped:
            trace.attempts[-1]["dropped"] = list(dropped)
        trips = []
        for j, item in paired:
            route = tuple(item.route)
            floor = item.departure + free_flow_time(net, route)
            trips.append(PlannedTrip(
                trip_id=trip_id(profile.agent_id, j + 1),
                member=item.member,
                purpose=item.purpose,
                origin_zone=item.origin,
                dest_zone=item.destination,
                departure_minute=item.departure,
                route=route,
                expected_arrival_minute=max(item.expected_arrival, floor),
                agent_id=profile.agent_id,
            ))
        return trips

    # -- feedback --------------------------------------------------------
    def reflect(self, outcomes: list[TripOutcome], ctx: DecisionContext,
                trace: StageTrace) -> tuple[list[ActivityRecord], list[TravelRecord]]:
        acts, travel = template_records(outcomes, ctx)
        if not travel:
            return acts, travel
        rendered = [r.rendered_text for r in travel]
        try:
            reply = self._ask("reflect", prompts.reflect_messages(outcomes, rendered, ctx),
                              ReflectReply.model_validate, ctx, trace)
        except CoreFailure as exc:
            # fall back to the plain records
            log.warning("agent %s day %s: reflection skipped (%s)", ctx.profile.agent_id, ctx.day, exc)
            return acts, travel
        insight = " ".join(reply.insight.split())
        if insight:
            travel[0] = replace(travel[0], insight=insight)
        return acts, travel

