"""Reply schemas for each stage, fenced-JSON extraction, and the inverse renderers.

The renderers turn core outputs back into reply text; the mock server uses
them to serve canned replies recorded from a scripted run.
"""

from __future__ import annotations

import json
import re
from typing import Annotated, Any, Literal, Optional, Union

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field

from ..cores.base import PlanDraft
from ..domain import Activity, PlannedTrip, Tour
from ..scenario import format_clock

_FENCE = re.compile(r"```(?:json|JSON)?\s*\n(.*?)```", re.DOTALL)


def extract_json(text: str) -> Any:
    """Parse the first fenced JSON block, or the whole reply if it is bare JSON."""
    m = _FENCE.search(text)
    if m:
        body = m.group(1)
    elif text.strip().startswith(("{", "[")):
        body = text
    else:
        raise ValueError("no fenced JSON block found in the reply")
    try:
        return json.loads(body)
    except json.JSONDecodeError as exc:
        raise ValueError(f"JSON syntax error: {exc}") from exc


def _clock(value: Any) -> float:
    if isinstance(value, bool):
        raise ValueError("expected a clock time")
    if isinstance(value, (int, float)):
        minute = float(value)
    elif isinstance(value, str) and re.fullmatch(r"\s*\d{1,2}:\d{2}\s*", value):
        hh, mm = value.strip().split(":")
        if int(mm) >= 60:
            raise ValueError(f"bad clock time {value!r}")
        minute = float(int(hh) * 60 + int(mm))
    else:
        raise ValueError(f"expected minutes or 'HH:MM', got {value!r}")
    if not 0 <= minute < 1440:
        raise ValueError(f"time {value!r} is outside the day")
    return minute


Clock = Annotated[float, BeforeValidator(_clock)]


class _Reply(BaseModel):
    model_config = ConfigDict(extra="ignore")


class ActivityItem(_Reply):
    name: str = Field(min_length=1)
    members: list[str] = Field(min_length=1)
    kind: Literal["mandatory", "maintenance", "discretionary"]
    zone: Optional[int] = None
    start: Clock
    duration_minutes: int = Field(gt=0)


class ActivitiesReply(_Reply):
    activities: list[ActivityItem]


class TourItem(_Reply):
    members: list[str] = Field(min_length=1)
    activities: list[int] = Field(min_length=1)


class ToursReply(_Reply):
    tours: list[TourItem]


class DraftTripItem(_Reply):
    member: str
    purpose: str
    origin: int
    destination: int
    departure: Clock
    route: Optional[list[int]] = None
    expected_arrival: Optional[Clock] = None


class PlanReply(_Reply):
    narrative: str = ""
    trips: list[DraftTripItem]


class FormattedTripItem(DraftTripItem):
    route: list[int] = Field(min_length=1)
    expected_arrival: Clock


class FormatReply(_Reply):
    # items are checked one by one so a single bad trip does not sink the rest
    trips: list[dict]


class ReflectReply(_Reply):
    insight: str = ""


def _time(minute: float) -> Union[str, float]:
    return format_clock(minute) if float(minute).is_integer() else minute


def activities_reply(activities: list[Activity]) -> dict:
    return {"activities": [
        {"name": a.name, "members": list(a.member_roles), "kind": a.kind, "zone": a.location_zone,
         "start": _time(a.desired_start_minute), "duration_minutes": a.duration_minutes}
        for a in activities
    ]}


def tours_reply(tours: list[Tour], activities: list[Activity]) -> dict:
    return {"tours": [
        {"members": list(t.member_roles), "activities": [activities.index(a) + 1 for a in t.ordered_activities]}
        for t in tours
    ]}


def plan_reply(draft: PlanDraft) -> dict:
    trips = []
    for t in draft.declared_trips:
        item = {"member": t.member, "purpose": t.purpose, "origin": t.origin_zone, "destination": t.dest_zone,
                "departure": _time(t.departure_minute)}
        if t.route is not None:
            item["route"] = list(t.route)
        if t.expected_arrival_minute is not None:
            item["expected_arrival"] = _time(t.expected_arrival_minute)
        trips.append(item)
    return {"narrative": draft.narrative, "trips": trips}


def format_reply(trips: list[PlannedTrip]) -> dict:
    return {"trips": [
        {"member": t.member, "purpose": t.purpose, "origin": t.origin_zone, "destination": t.dest_zone,
         "departure": _time(t.departure_minute), "route": list(t.route or ()),
         "expected_arrival": _time(t.expected_arrival_minute)}
        for t in trips
    ]}


def fenced(obj: Any) -> str:
    return "```json\n" + json.dumps(obj, indent=2, ensure_ascii=False) + "\n```"
