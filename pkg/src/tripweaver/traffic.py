"""Mesoscopic point-queue network loading.

A vehicle entering a link at time ``t`` becomes ready to leave at
``t + free_flow``. Each time bin a link accrues ``capacity * dt / 60``
units of service credit and discharges ready vehicles FIFO while at least
one whole unit is available; fractional credit carries over while vehicles
are waiting. Discharged vehicles enter their next link at the bin start,
so node transfer is instantaneous.
"""

from __future__ import annotations

import csv
import heapq
import io
import math
from collections import defaultdict
from collections.abc import Sequence
from dataclasses import dataclass, field
from fractions import Fraction

from .domain import MINUTES_PER_DAY, Network, PlannedTrip, TripOutcome
from .network import RouteError, free_flow_time, route_endpoints


class LoadingError(ValueError):
    """A trip that cannot be loaded onto the network."""


@dataclass
class LinkState:
    """Point queue of one link.

    Service credit is exact: it is kept as an integer count of
    ``1/denominator`` vehicle units, where ``credit_per_step`` (vehicles per
    bin) has that denominator.
    """

    link_id: int
    credit_per_step: Fraction
    entry_log: list[tuple[str, float]] = field(default_factory=list)
    # heap of (ready_minute, entry_minute, trip_id)
    ready_queue: list[tuple[float, float, str]] = field(default_factory=list)
    initial_credit: Fraction = Fraction(0)

    def __post_init__(self):
        self._den = self.credit_per_step.denominator
        self._inc = self.credit_per_step.numerator
        scaled = self.initial_credit * self._den
        if scaled.denominator != 1:
            raise ValueError("initial credit must share the per-step denominator")
        self._credit = int(scaled)

    @property
    def service_credit(self) -> Fraction:
        return Fraction(self._credit, self._den)

    def enter(self, trip_id: str, minute: float, free_flow: float) -> None:
        self.entry_log.append((trip_id, minute))
        heapq.heappush(self.ready_queue, (minute + free_flow, minute, trip_id))

    def waiting(self, now: float) -> int:
        return sum(1 for item in self.ready_queue if item[0] <= now) if self.ready_queue else 0

    def discharge(self, now: float) -> list[str]:
        """Advance one bin starting at ``now`` and return the trips that leave."""
        credit, den, queue = self._credit + self._inc, self._den, self.ready_queue
        out = []
        while queue and queue[0][0] <= now and credit >= den:
            out.append(heapq.heappop(queue)[2])
            credit -= den
        if not (queue and queue[0][0] <= now):
            # unused whole vehicles are lost when nobody is waiting; the fraction carries
            credit %= den
        self._credit = credit
        return out


@dataclass(frozen=True)
class LinkBin:
    bin_start_minute: float
    entries: int
    exits: int
    queue: int


@dataclass
class DayLoadResult:
    outcomes: list[TripOutcome]
    link_time_series: dict[int, list[LinkBin]]

    def outcome(self, trip_id: str) -> TripOutcome:
        for o in self.outcomes:
            if o.trip_id == trip_id:
                return o
        raise KeyError(trip_id)


def _check_trip(network: Network, trip: PlannedTrip) -> None:
    if not trip.route:
        raise LoadingError(f"trip {trip.trip_id} has no route")
    try:
        endpoints = route_endpoints(network, trip.route)
    except RouteError as exc:
        raise LoadingError(f"trip {trip.trip_id}: {exc}") from exc
    if endpoints != (trip.origin_zone, trip.dest_zone):
        raise LoadingError(f"trip {trip.trip_id}: route {list(trip.route)} does not connect "
                           f"{trip.origin_zone}->{trip.dest_zone}")
    if not 0 <= trip.departure_minute < MINUTES_PER_DAY:
        raise LoadingError(f"trip {trip.trip_id}: departure {trip.departure_minute} outside the day")


def simulate_day(network: Network, trips: Sequence[PlannedTrip], time_step: float = 1.0) -> DayLoadResult:
    """Load one day of trips and return per-trip outcomes and link time series.

    Trips of the same traveller (same agent and member) are chained: a trip
    cannot leave before the traveller's previous trip has arrived.
    """
    if time_step <= 0:
        raise ValueError("time_step must be positive")
    ids = [t.trip_id for t in trips]
    if len(set(ids)) != len(ids):
        raise LoadingError("trip ids must be unique within a day")
    for trip in trips:
        _check_trip(network, trip)
    if not trips:
        return DayLoadResult(outcomes=[], link_time_series={lid: [] for lid in sorted(network.links)})

    by_id = {t.trip_id: t for t in trips}
    chains: dict[tuple[int, str], list[PlannedTrip]] = defaultdict(list)
    for t in trips:
        chains[(t.agent_id, t.member)].append(t)
    successor: dict[str, str] = {}
    pending: list[tuple[float, str]] = []
    for chain in chains.values():
        chain.sort(key=lambda t: (t.departure_minute, t.trip_id))
        for a, b in zip(chain, chain[1:]):
            successor[a.trip_id] = b.trip_id
        heapq.heappush(pending, (chain[0].departure_minute, chain[0].trip_id))

    dt = Fraction(time_step).limit_denominator(10**6)
    t0 = math.floor(min(t.departure_minute for t in trips) / time_step) * time_step
    states = {}
    for lid, link in sorted(network.links.items()):
        per_step = Fraction(link.capacity) * dt / 60
        # credit phase is anchored at minute 0 so results don't depend on the first departure
        phase = per_step * round(t0 / time_step)
        states[lid] = LinkState(lid, per_step, initial_credit=phase - math.floor(phase))
    ff = {lid: link.free_flow_minutes for lid, link in network.links.items()}

    position: dict[str, int] = {}  # index into route of the link the vehicle is on
    actual_dep: dict[str, float] = {}
    exits: dict[str, list[float]] = defaultdict(list)
    arrival: dict[str, float] = {}

    series: dict[int, list[LinkBin]] = {lid: [] for lid in states}
    entries_now: dict[int, int] = defaultdict(int)

    step = 0
    done = 0

    def release(until: float) -> None:
        while pending and pending[0][0] < until:
            minute, tid = heapq.heappop(pending)
            actual_dep[tid] = minute
            position[tid] = 0
            first = by_id[tid].route[0]
            states[first].enter(tid, minute, ff[first])
            entries_now[first] += 1

    while done < len(trips):
        now = t0 + step * time_step
        bin_end = now + time_step
        entries_now.clear()
        release(bin_end)
        exits_now: dict[int, int] = defaultdict(int)
        for lid, state in states.items():
            for tid in state.discharge(now):
                exits_now[lid] += 1
                exits[tid].append(now)
                route = by_id[tid].route
                position[tid] += 1
                if position[tid] < len(route):
                    nxt = route[position[tid]]
                    states[nxt].enter(tid, now, ff[nxt])
                    entries_now[nxt] += 1
                else:
                    arrival[tid] = now
                    done += 1
                    nxt_trip = successor.get(tid)
                    if nxt_trip is not None:
                        planned = by_id[nxt_trip].departure_minute
                        heapq.heappush(pending, (max(planned, now), nxt_trip))
        release(bin_end)
        for lid, state in states.items():
            series[lid].append(LinkBin(now, entries_now[lid], exits_now[lid], state.waiting(now)))
        step += 1

    outcomes = []
    for t in trips:
        dep = actual_dep[t.trip_id]
        arr = arrival[t.trip_id]
        outcomes.append(TripOutcome(
            trip_id=t.trip_id,
            actual_departure_minute=dep,
            actual_arrival_minute=arr,
            travel_minutes=arr - dep,
            delay_vs_expected_minutes=arr - t.expected_arrival_minute,
            per_link_exit_minutes=tuple(exits[t.trip_id]),
            departure_delayed=dep > t.departure_minute,
        ))
    return DayLoadResult(outcomes=outcomes, link_time_series=series)


def check_free_flow_bound(network: Network, trips: Sequence[PlannedTrip], result: DayLoadResult) -> bool:
    by_id = {t.trip_id: t for t in trips}
    return all(o.travel_minutes >= free_flow_time(network, by_id[o.trip_id].route) - 1e-9 for o in result.outcomes)


def link_series_csv(day: int, result: DayLoadResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["day", "link_id", "bin_start_minute", "entries", "exits", "queue"])
    for lid in sorted(result.link_time_series):
        for b in result.link_time_series[lid]:
            writer.writerow([day, lid, _num(b.bin_start_minute), b.entries, b.exits, b.queue])
    return buf.getvalue()


def _num(x: float):
    return int(x) if float(x).is_integer() else x
