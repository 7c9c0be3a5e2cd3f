"""Helpers shared by both decision cores."""

from __future__ import annotations

from collections.abc import Sequence

from ..domain import Activity, Network, PlannedTrip, TripOutcome
from ..memory import ActivityRecord, TravelRecord
from ..network import enumerate_routes, free_flow_time, is_valid_route
from ..scenario import format_clock
from .base import DecisionContext, DeclaredTrip

RETURN_HOME = "return home"


def first_route(network: Network, origin: int, dest: int) -> tuple[int, ...] | None:
    routes = enumerate_routes(network, origin, dest)
    return tuple(routes[0]) if routes else None


def resolve_route(network: Network, trip: DeclaredTrip) -> tuple[int, ...] | None:
    if trip.route and is_valid_route(network, trip.route, trip.origin_zone, trip.dest_zone):
        return tuple(trip.route)
    return first_route(network, trip.origin_zone, trip.dest_zone)


def trip_id(agent_id: int, n: int) -> str:
    return f"a{agent_id:03d}-t{n:02d}"


def to_planned(trip: DeclaredTrip, n: int, ctx: DecisionContext) -> PlannedTrip | None:
    """Structured trip for the simulator; None if no route connects the zones."""
    net = ctx.network
    if trip.origin_zone not in net.zones or trip.dest_zone not in net.zones or trip.origin_zone == trip.dest_zone:
        return None
    route = resolve_route(net, trip)
    if not route:
        return None
    expected = trip.expected_arrival_minute
    if expected is None or expected < trip.departure_minute:
        expected = trip.departure_minute + free_flow_time(net, route)
    return PlannedTrip(
        trip_id=trip_id(ctx.profile.agent_id, n),
        member=trip.member,
        purpose=trip.purpose,
        origin_zone=trip.origin_zone,
        dest_zone=trip.dest_zone,
        departure_minute=trip.departure_minute,
        route=route,
        expected_arrival_minute=expected,
        agent_id=ctx.profile.agent_id,
    )


def zone_name(network: Network, zone: int | None) -> str:
    if zone is None:
        return "home"
    z = network.zones.get(zone)
    return z.label or f"zone {zone}" if z else f"zone {zone}"


def activity_performed(activity: Activity, trips: Sequence[PlannedTrip], outcome_ids: set[str]) -> bool:
    if not activity.requires_travel:
        return True
    return any(
        t.dest_zone == activity.location_zone and t.purpose == activity.name and t.trip_id in outcome_ids
        for t in trips
    )


def template_records(outcomes: Sequence[TripOutcome], ctx: DecisionContext
                     ) -> tuple[list[ActivityRecord], list[TravelRecord]]:
    by_id = {t.trip_id: t for t in ctx.trips}
    travel = []
    for o in outcomes:
        t = by_id[o.trip_id]
        travel.append(TravelRecord(
            day=ctx.day,
            member=t.member,
            purpose=t.purpose,
            origin_zone=t.origin_zone,
            dest_zone=t.dest_zone,
            route=tuple(t.route or ()),
            departure_minute=t.departure_minute,
            expected_arrival_minute=t.expected_arrival_minute,
            actual_arrival_minute=o.actual_arrival_minute,
            travel_minutes=o.travel_minutes,
            actual_departure_minute=o.actual_departure_minute,
        ))
    done = {o.trip_id for o in outcomes}
    acts = []
    for a in sorted(ctx.activities, key=lambda a: (a.desired_start_minute, a.name)):
        if not activity_performed(a, ctx.trips, done):
            continue
        who = ", ".join(a.member_roles)
        text = (f"Day {ctx.day}: {who} did {a.name} ({a.kind}) at {zone_name(ctx.network, a.location_zone)} "
                f"from {format_clock(a.desired_start_minute)} to {format_clock(a.end_minute)}.")
        acts.append(ActivityRecord(ctx.day, text, a.name, a.kind, a.member_roles))
    return acts, travel
