"""Deterministic scripted decision core.

Every output is a pure function of the decision context, including its
seed, so runs replay byte-for-byte. The behavioural constants live in
:class:`OracleRules`.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace
from typing import Optional

from ..domain import Activity, PlannedTrip, Tour, TripOutcome
from ..memory import ActivityRecord, TravelRecord
from ..network import enumerate_routes, free_flow_time, is_valid_route, shortest_free_flow
from ..scenario import is_workday, mandatory_activities
from .base import DecisionContext, DeclaredTrip, PlanDraft, StageTrace, ValidationFinding
from .common import RETURN_HOME, first_route, template_records, to_planned

GROCERY = "grocery shopping"
RECREATION = "recreational outing"


@dataclass(frozen=True)
class OracleRules:
    grocery_period_days: int = 5
    fresh_grocery_period_days: int = 1
    grocery_minutes: int = 30
    recreation_probability: float = 0.26
    outdoor_recreation_probability: float = 1.0
    recreation_start_minute: int = 19 * 60
    recreation_minutes: int = 60
    # departure learning for the morning obligation trip
    late_margin: float = 1.0
    early_tolerance: float = 0.0
    early_gain: float = 1.0
    max_shift: float = 60.0
    # a trip delayed at least this long triggers a coin flip to try an equally short route
    route_switch_delay: float = 1.0
    route_switch_probability: float = 0.5
    # chain a follow-on activity into the same tour if the slack is at most this long
    chain_slack_minutes: int = 30


def _wants_fresh_groceries(traits: str) -> bool:
    return "fresh groceries" in traits.lower()


def _wants_outdoor_exercise(traits: str) -> bool:
    t = traits.lower()
    return "outdoor exercise" in t or "exercise in a park" in t


def departure_shift(lateness: float, rules: OracleRules) -> float:
    """Minutes to move tomorrow's departure (negative = earlier)."""
    if lateness > 0:
        shift = -(lateness + rules.late_margin)
    elif -lateness > rules.early_tolerance:
        shift = (-lateness - rules.early_tolerance) * rules.early_gain
    else:
        shift = 0.0
    return math.floor(max(-rules.max_shift, min(rules.max_shift, shift)))


class OracleCore:
    core_id = "oracle"

    def __init__(self, rules: Optional[OracleRules] = None):
        self.rules = rules or OracleRules()

    # -- stage 1 ---------------------------------------------------------
    def generate_activities(self, ctx: DecisionContext, trace: Optional[StageTrace] = None) -> list[Activity]:
        profile, net, rules = ctx.profile, ctx.network, self.rules
        acts = list(mandatory_activities(profile, ctx.day, ctx.weekend_pattern))
        workday = is_workday(ctx.day, ctx.weekend_pattern)
        if workday:
            for m in profile.members:
                if m.mandatory_window and (m.mandatory_zone is None or not m.travels):
                    start, end = m.mandatory_window
                    acts.append(Activity(m.activity or "work", (m.member,), "mandatory", None,
                                         start, end - start, False))

        outing_zones = net.zones_of_kind("recreational")
        travelers = profile.travelers
        if outing_zones and travelers:
            zone = outing_zones[0]
            if self._grocery_due(ctx):
                shopper = travelers[0]
                if workday and shopper.mandatory_zone is not None:
                    ff = shortest_free_flow(net, shopper.mandatory_zone, zone) or 0.0
                    start = shopper.mandatory_window[1] + int(math.ceil(ff))
                else:
                    start = 10 * 60
                acts.append(Activity(GROCERY, (shopper.member,), "maintenance", zone, start,
                                     rules.grocery_minutes, zone != profile.home_zone))
            p = (rules.outdoor_recreation_probability if _wants_outdoor_exercise(profile.traits_text)
                 else rules.recreation_probability)
            rng = random.Random(f"{ctx.rng_seed}:recreation")
            if rng.random() < p:
                roles = [travelers[0].member] + [m.member for m in profile.members if m.member != travelers[0].member]
                acts.append(Activity(RECREATION, tuple(roles), "discretionary", zone,
                                     rules.recreation_start_minute, rules.recreation_minutes,
                                     zone != profile.home_zone))
        acts.sort(key=lambda a: (a.desired_start_minute, a.name, a.member_roles))
        if trace is not None:
            trace.record(True)
        return acts

    def _grocery_due(self, ctx: DecisionContext) -> bool:
        period = (self.rules.fresh_grocery_period_days if _wants_fresh_groceries(ctx.profile.traits_text)
                  else self.rules.grocery_period_days)
        # no shopping in the memory window counts as a last run on day 0
        last = max((r.day for r in ctx.activity_records if r.name == GROCERY), default=0)
        return ctx.day - last >= period

    # -- stage 2 ---------------------------------------------------------
    def build_tours(self, activities: list[Activity], ctx: DecisionContext,
                    trace: Optional[StageTrace] = None) -> list[Tour]:
        net, home = ctx.network, ctx.profile.home_zone
        traveling = {m.member for m in ctx.profile.travelers}
        by_driver: dict[str, list[Activity]] = {}
        for a in activities:
            if not a.requires_travel:
                continue
            driver = next((r for r in a.member_roles if r in traveling), a.member_roles[0])
            by_driver.setdefault(driver, []).append(a)

        order = [m.member for m in ctx.profile.members]
        tours = []
        for driver in sorted(by_driver, key=lambda d: order.index(d) if d in order else len(order)):
            current: list[Activity] = []
            for a in sorted(by_driver[driver], key=lambda a: a.desired_start_minute):
                if current:
                    prev = current[-1]
                    hop = shortest_free_flow(net, prev.location_zone, a.location_zone) or 0.0
                    slack = a.desired_start_minute - (prev.end_minute + hop)
                    if 0 <= slack <= self.rules.chain_slack_minutes:
                        current.append(a)
                        continue
                    tours.append(self._tour(driver, current, home))
                current = [a]
            if current:
                tours.append(self._tour(driver, current, home))
        tours.sort(key=lambda t: t.ordered_activities[0].desired_start_minute)
        if trace is not None:
            trace.record(True)
        return tours

    @staticmethod
    def _tour(driver: str, acts: list[Activity], home: int) -> Tour:
        roles = [driver]
        for a in acts:
            roles += [r for r in a.member_roles if r not in roles]
        return Tour(tuple(roles), home, tuple(acts))

    # -- stage 3 ---------------------------------------------------------
    def plan_trips(self, tours: list[Tour], ctx: DecisionContext,
                   trace: Optional[StageTrace] = None) -> PlanDraft:
        net = ctx.network
        declared: list[DeclaredTrip] = []
        for tour in tours:
            driver = tour.driver
            here = tour.anchor_zone
            leave = None
            for i, act in enumerate(tour.ordered_activities):
                dest = act.location_zone
                if dest == here:
                    leave = act.end_minute
                    continue
                if i == 0 and act.kind == "mandatory":
                    dep, route = self.morning_departure(act, driver, ctx)
                else:
                    route = first_route(net, here, dest)
                    ff = free_flow_time(net, route)
                    dep = leave if leave is not None else act.desired_start_minute - ff
                declared.append(self._declared(driver, act.name, here, dest, dep, route, ctx))
                here, leave = dest, act.end_minute
            route = first_route(net, here, tour.anchor_zone)
            declared.append(self._declared(driver, RETURN_HOME, here, tour.anchor_zone, leave, route, ctx))
        declared.sort(key=lambda t: (t.departure_minute, t.member))
        narrative = self._narrative(declared, ctx)
        if trace is not None:
            trace.record(True)
        return PlanDraft(narrative, tuple(declared))

    @staticmethod
    def _declared(member, purpose, origin, dest, dep, route, ctx) -> DeclaredTrip:
        dep = max(0.0, min(1439.0, float(dep)))
        return DeclaredTrip(member, purpose, origin, dest, dep, route,
                            dep + free_flow_time(ctx.network, route))

    @staticmethod
    def _narrative(declared: list[DeclaredTrip], ctx: DecisionContext) -> str:
        if not declared:
            return f"Day {ctx.day}: nobody in household {ctx.profile.agent_id} needs to travel."
        legs = "; ".join(t.describe() for t in declared)
        return f"Day {ctx.day} travel plan for household {ctx.profile.agent_id}: {legs}."

    def morning_departure(self, act: Activity, member: str, ctx: DecisionContext) -> tuple[float, tuple[int, ...]]:
        """Departure and route for an obligation trip, learned from yesterday's outcome."""
        net, home, rules = ctx.network, ctx.profile.home_zone, self.rules
        routes = [tuple(r) for r in enumerate_routes(net, home, act.location_zone)]
        required = act.desired_start_minute
        last = next(
            (r for r in ctx.travel_records
             if r.member == member and r.purpose == act.name and r.dest_zone == act.location_zone),
            None,
        )
        if last is None or not is_valid_route(net, last.route, home, act.location_zone):
            route = routes[0]
            return required - free_flow_time(net, route), route

        dep = last.departure_minute + departure_shift(last.actual_arrival_minute - required, rules)
        route = tuple(last.route)
        best = free_flow_time(net, routes[0])
        equal = [r for r in routes if free_flow_time(net, r) <= best]
        delay = last.travel_minutes - free_flow_time(net, route)
        if len(equal) > 1 and delay >= rules.route_switch_delay:
            rng = random.Random(f"{ctx.rng_seed}:route:{member}")
            if rng.random() < rules.route_switch_probability:
                pos = equal.index(route) if route in equal else -1
                route = equal[(pos + 1) % len(equal)]
        return dep, route

    # -- self-correction -------------------------------------------------
    def self_correct(self, draft: PlanDraft, findings: list[ValidationFinding], ctx: DecisionContext,
                     trace: Optional[StageTrace] = None) -> PlanDraft:
        if not findings:
            if trace is not None:
                trace.record(True)
            return draft
        net, profile = ctx.network, ctx.profile
        trips = list(draft.declared_trips)
        drop: set[int] = set()
        for f in findings:
            i = f.trip_index
            if f.code in ("route_discontiguous", "route_wrong_endpoints") and i is not None:
                t = trips[i]
                route = first_route(net, t.origin_zone, t.dest_zone)
                trips[i] = replace(t, route=route,
                                   expected_arrival_minute=t.departure_minute + free_flow_time(net, route or ()))
            elif f.code == "late_expectation" and i is not None:
                t = trips[i]
                route = t.route or first_route(net, t.origin_zone, t.dest_zone) or ()
                trips[i] = replace(t, expected_arrival_minute=t.departure_minute + free_flow_time(net, route))
            elif f.code == "infeasible_timing" and i is not None:
                t = trips[i]
                start = profile.member(t.member).mandatory_window[0]
                route = t.route or first_route(net, t.origin_zone, t.dest_zone) or ()
                ff = free_flow_time(net, route)
                trips[i] = replace(t, departure_minute=start - ff, expected_arrival_minute=start)
            elif f.code == "overlapping_trips" and i is not None and i > 0:
                t = trips[i]
                prev = max((p for j, p in enumerate(trips) if p.member == t.member and j != i
                            and p.departure_minute <= t.departure_minute),
                           key=lambda p: p.departure_minute, default=None)
                if prev is not None:
                    dep = prev.expected_arrival_minute or prev.departure_minute
                    route = t.route or first_route(net, t.origin_zone, t.dest_zone) or ()
                    trips[i] = replace(t, departure_minute=dep,
                                       expected_arrival_minute=dep + free_flow_time(net, route))
            elif f.code == "bad_zone" and i is not None:
                drop.add(i)
            elif f.code == "mandatory_missing":
                trips += self._missing_legs(f.subject, ctx)
        trips = [t for j, t in enumerate(trips) if j not in drop]
        trips.sort(key=lambda t: (t.departure_minute, t.member))
        if trace is not None:
            trace.record(True)
        return PlanDraft(self._narrative(trips, ctx), tuple(trips))

    def _missing_legs(self, member: str, ctx: DecisionContext) -> list[DeclaredTrip]:
        net, profile = ctx.network, ctx.profile
        m = profile.member(member)
        start, end = m.mandatory_window
        out = first_route(net, profile.home_zone, m.mandatory_zone)
        back = first_route(net, m.mandatory_zone, profile.home_zone)
        if out is None or back is None:
            return []
        name = m.activity or "work"
        return [
            self._declared(member, name, profile.home_zone, m.mandatory_zone, start - free_flow_time(net, out), out, ctx),
            self._declared(member, RETURN_HOME, m.mandatory_zone, profile.home_zone, end, back, ctx),
        ]

    # -- stage 4 ---------------------------------------------------------
    def format_trips(self, draft: PlanDraft, ctx: DecisionContext,
                     trace: Optional[StageTrace] = None) -> list[PlannedTrip]:
        out = []
        for n, t in enumerate(draft.declared_trips, 1):
            planned = to_planned(t, n, ctx)
            if planned is not None:
                out.append(planned)
        if trace is not None:
            trace.record(True)
        return out

    # -- feedback --------------------------------------------------------
    def reflect(self, outcomes: list[TripOutcome], ctx: DecisionContext,
                trace: Optional[StageTrace] = None) -> tuple[list[ActivityRecord], list[TravelRecord]]:
        records = template_records(outcomes, ctx)
        if trace is not None:
            trace.record(True)
        return records
