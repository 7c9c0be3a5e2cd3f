"""Prompt text for each stage.

Every user message opens with a request tag naming agent, day and stage so
that replays and the mock server can key responses on it.
"""

from __future__ import annotations

import re
from typing import Optional

from ..cores.base import DecisionContext, PlanDraft, ValidationFinding
from ..domain import Activity, Tour, TripOutcome
from ..scenario import format_clock, is_workday

TAG_RE = re.compile(r"\[agent (\d+) \| day (\d+) \| stage (\w+)\]")

SYSTEM = (
    "You plan one day of travel for a household in a small road network. "
    "Answer with a single fenced ```json block that follows the requested format exactly. "
    "Times are HH:MM on a 24-hour clock. Zones and links are referred to by their integer ids."
)


def tag(ctx: DecisionContext, stage: str) -> str:
    return f"[agent {ctx.profile.agent_id} | day {ctx.day} | stage {stage}]"


def parse_tag(text: str) -> Optional[tuple[int, int, str]]:
    m = TAG_RE.search(text)
    return (int(m.group(1)), int(m.group(2)), m.group(3)) if m else None


def _household(ctx: DecisionContext) -> str:
    p = ctx.profile
    lines = [f"Household: {p.identity_text}", f"Preferences: {p.traits_text}", f"Home zone: {p.home_zone}",
             "Members:"]
    workday = is_workday(ctx.day, ctx.weekend_pattern)
    for m in p.members:
        line = f"- {m.member}"
        if m.mandatory_window and workday:
            where = f"zone {m.mandatory_zone}" if m.mandatory_zone is not None else "home"
            line += (f": {m.activity or 'obligation'} at {where} from {format_clock(m.mandatory_window[0])} "
                     f"to {format_clock(m.mandatory_window[1])}")
        line += "" if m.travels else " (does not travel)"
        lines.append(line)
    return "\n".join(lines)


def _memory(ctx: DecisionContext) -> str:
    parts = []
    if ctx.summaries:
        parts.append("Earlier weeks:\n" + "\n".join(f"- {s}" for s in ctx.summaries))
    acts = ctx.retrieved_activity_memory
    parts.append("Recent activities:\n" + ("\n".join(f"- {a}" for a in acts) if acts else "- none recorded"))
    trips = ctx.retrieved_travel_memory
    parts.append("Recent trips:\n" + ("\n".join(f"- {t}" for t in trips) if trips else "- none recorded"))
    return "\n".join(parts)


def _activity_list(activities: list[Activity]) -> str:
    return "\n".join(
        f"{i}. {a.name} ({a.kind}) for {', '.join(a.member_roles)} at "
        f"{'zone ' + str(a.location_zone) if a.location_zone is not None else 'home'}, "
        f"{format_clock(a.desired_start_minute)}-{format_clock(a.end_minute)}"
        for i, a in enumerate(activities, 1)
    )


def _tour_list(tours: list[Tour]) -> str:
    out = []
    for i, t in enumerate(tours, 1):
        stops = " -> ".join(f"{a.name} @ zone {a.location_zone} {format_clock(a.desired_start_minute)}"
                            for a in t.ordered_activities)
        out.append(f"{i}. driver {t.driver} with {', '.join(t.member_roles[1:]) or 'nobody else'}: "
                   f"home -> {stops} -> home")
    return "\n".join(out)


def _user(ctx: DecisionContext, stage: str, *blocks: str) -> list[dict]:
    body = "\n\n".join([tag(ctx, stage), f"Today is day {ctx.day}.", _household(ctx), *blocks])
    return [{"role": "system", "content": SYSTEM}, {"role": "user", "content": body}]


def activities_messages(ctx: DecisionContext) -> list[dict]:
    task = (
        "List every activity the household will do today, including each member's obligations. "
        "Decide on errands and leisure using the preferences and the recent history. "
        "Use kind mandatory, maintenance or discretionary; zone is null for activities at home.\n"
        'Format: {"activities": [{"name": str, "members": [role], "kind": str, "zone": int|null, '
        '"start": "HH:MM", "duration_minutes": int}]}'
    )
    return _user(ctx, "activities", _memory(ctx), "Zones:\n" + _zones(ctx), task)


def _zones(ctx: DecisionContext) -> str:
    return "\n".join(f"- {z.id}: {z.label or z.kind} ({z.kind})" for z in sorted(ctx.network.zones.values(),
                                                                                  key=lambda z: z.id))


def tours_messages(activities: list[Activity], ctx: DecisionContext) -> list[dict]:
    task = (
        "Group the activities that need travel into tours that start and end at home. "
        "The first listed member of a tour drives. Every activity away from home must be in exactly one tour; "
        "refer to activities by their number.\n"
        'Format: {"tours": [{"members": [role], "activities": [int]}]}'
    )
    return _user(ctx, "tours", "Activities:\n" + _activity_list(activities), task)


def plan_messages(tours: list[Tour], ctx: DecisionContext) -> list[dict]:
    task = (
        "Write the day's trip plan: a short narrative, then one entry per vehicle trip. "
        "Choose departure times and routes using what you learned from recent trips. "
        "The first leg to an obligation must reach it by its start time.\n"
        'Format: {"narrative": str, "trips": [{"member": role, "purpose": str, "origin": zone, '
        '"destination": zone, "departure": "HH:MM", "route": [link ids], "expected_arrival": "HH:MM"}]}'
    )
    return _user(ctx, "trips", _memory(ctx), ctx.network_brief, "Tours:\n" + _tour_list(tours), task)


def correct_messages(draft: PlanDraft, findings: list[ValidationFinding], ctx: DecisionContext) -> list[dict]:
    issues = "\n".join(f"- [{f.code}] {f.subject}: {f.detail}" for f in findings)
    task = (
        "The plan below has problems. Return a corrected plan in the same format, "
        "keeping trips that are already fine unchanged.\n"
        'Format: {"narrative": str, "trips": [{"member": role, "purpose": str, "origin": zone, '
        '"destination": zone, "departure": "HH:MM", "route": [link ids], "expected_arrival": "HH:MM"}]}'
    )
    return _user(ctx, "self_correct", ctx.network_brief, "Plan:\n" + draft.render(), "Problems:\n" + issues, task)


def format_messages(draft: PlanDraft, ctx: DecisionContext) -> list[dict]:
    task = (
        "Convert every declared trip into a structured record, in the same order. "
        "Fill in the route with link ids and the expected arrival time.\n"
        'Format: {"trips": [{"member": role, "purpose": str, "origin": zone, "destination": zone, '
        '"departure": "HH:MM", "route": [link ids], "expected_arrival": "HH:MM"}]}'
    )
    return _user(ctx, "format", ctx.network_brief, "Plan:\n" + draft.render(), task)


def reflect_messages(outcomes: list[TripOutcome], rendered: list[str], ctx: DecisionContext) -> list[dict]:
    task = (
        "Here is how today's trips went. In one sentence, note what the household should keep in mind "
        "for tomorrow's departures and routes.\n"
        'Format: {"insight": str}'
    )
    return _user(ctx, "reflect", "Today's trips:\n" + "\n".join(f"- {r}" for r in rendered), task)
