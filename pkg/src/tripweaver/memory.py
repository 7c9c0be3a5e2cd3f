"""Per-household activity and travel memory.

Records are append-only and ordered by day. Retrieval returns the most
recent detailed records inside a sliding window; older days can be
compacted into long-term summaries, which then stand in for the detailed
records during retrieval (raw records are kept for metrics).
"""

from __future__ import annotations

from collections import defaultdict
from collections.abc import Callable, Sequence
from dataclasses import asdict, dataclass, field
from typing import Optional, Union

from .scenario import format_clock


class MemoryOrderError(ValueError):
    """Record appended with a day earlier than the last record of its kind."""


@dataclass(frozen=True)
class ActivityRecord:
    day: int
    text: str
    name: str = ""
    kind: str = ""
    members: tuple[str, ...] = ()


def lateness_phrase(minutes: float) -> str:
    m = int(round(minutes))
    if m > 0:
        return f"late by {m} min"
    if m < 0:
        return f"early by {-m} min"
    return "on time"


@dataclass(frozen=True)
class TravelRecord:
    day: int
    member: str
    purpose: str
    origin_zone: int
    dest_zone: int
    route: tuple[int, ...]
    departure_minute: float
    expected_arrival_minute: float
    actual_arrival_minute: float
    travel_minutes: float
    actual_departure_minute: Optional[float] = None
    insight: str = ""

    @property
    def lateness_vs_expected(self) -> float:
        return self.actual_arrival_minute - self.expected_arrival_minute

    @property
    def rendered_text(self) -> str:
        route = ", ".join(str(r) for r in self.route)
        text = (
            f"Day {self.day}: {self.member} traveled {self.origin_zone}→{self.dest_zone} for {self.purpose} "
            f"via links [{route}], departed {format_clock(self.departure_minute)}, "
            f"expected {format_clock(self.expected_arrival_minute)}, "
            f"arrived {format_clock(self.actual_arrival_minute)} ({lateness_phrase(self.lateness_vs_expected)})."
        )
        return f"{text} {self.insight}" if self.insight else text


Record = Union[ActivityRecord, TravelRecord]


@dataclass(frozen=True)
class LongTermSummary:
    from_day: int
    through_day: int
    text: str


Summarizer = Callable[[Sequence[ActivityRecord], Sequence[TravelRecord], int, int], str]


@dataclass
class MemoryStore:
    activity: list[ActivityRecord] = field(default_factory=list)
    travel: list[TravelRecord] = field(default_factory=list)
    long_term: list[LongTermSummary] = field(default_factory=list)

    @property
    def compacted_through(self) -> int:
        return self.long_term[-1].through_day if self.long_term else 0

    def append(self, record: Record) -> "MemoryStore":
        records = self.activity if isinstance(record, ActivityRecord) else self.travel
        if record.day < 1:
            raise MemoryOrderError(f"day must be >= 1, got {record.day}")
        if records and record.day < records[-1].day:
            raise MemoryOrderError(f"record for day {record.day} appended after day {records[-1].day}")
        records.append(record)
        return self

    def extend(self, records: Sequence[Record]) -> "MemoryStore":
        for r in records:
            self.append(r)
        return self

    def retrieve(self, kind: str, as_of_day: int, window_days: int,
                 max_items: Optional[int] = None) -> tuple[list[Record], list[LongTermSummary]]:
        """Records from days ``[as_of_day - window_days, as_of_day - 1]``, newest first."""
        if window_days < 1:
            raise ValueError("window_days must be >= 1")
        if kind not in ("activity", "travel"):
            raise ValueError(f"unknown memory kind {kind!r}")
        source = self.activity if kind == "activity" else self.travel
        lo = max(as_of_day - window_days, self.compacted_through + 1)
        picked = [r for r in reversed(source) if lo <= r.day <= as_of_day - 1]
        if max_items is not None:
            picked = picked[:max_items]
        summaries = [s for s in self.long_term if s.from_day < as_of_day]
        return picked, summaries

    def compact(self, through_day: int, summarizer: Summarizer) -> "MemoryStore":
        start = self.compacted_through + 1
        if through_day < start:
            return self
        acts = [r for r in self.activity if start <= r.day <= through_day]
        trips = [r for r in self.travel if start <= r.day <= through_day]
        if not acts and not trips:
            return self
        text = summarizer(acts, trips, start, through_day)
        self.long_term.append(LongTermSummary(start, through_day, text))
        return self

    def to_dict(self) -> dict:
        return {
            "activity": [asdict(r) for r in self.activity],
            "travel": [dict(asdict(r), rendered_text=r.rendered_text) for r in self.travel],
            "long_term": [asdict(s) for s in self.long_term],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "MemoryStore":
        acts = [ActivityRecord(**dict(r, members=tuple(r.get("members", ())))) for r in raw.get("activity", [])]
        trips = []
        for r in raw.get("travel", []):
            r = {k: v for k, v in r.items() if k != "rendered_text"}
            trips.append(TravelRecord(**dict(r, route=tuple(r["route"]))))
        return cls(acts, trips, [LongTermSummary(**s) for s in raw.get("long_term", [])])


def templated_summary(activities: Sequence[ActivityRecord], trips: Sequence[TravelRecord],
                      from_day: int, through_day: int) -> str:
    """Roll detailed records up into per-purpose trip counts and mean travel times."""
    by_purpose: dict[str, list[float]] = defaultdict(list)
    for t in trips:
        by_purpose[t.purpose].append(t.travel_minutes)
    parts = [
        f"{purpose}: {len(times)} trips, mean travel {sum(times) / len(times):.1f} min"
        for purpose, times in sorted(by_purpose.items())
    ]
    act_counts: dict[str, int] = defaultdict(int)
    for a in activities:
        act_counts[a.name or a.text] += 1
    acts = [f"{name} x{n}" for name, n in sorted(act_counts.items())]
    text = f"Days {from_day}-{through_day}: "
    text += "; ".join(parts) if parts else "no trips"
    if acts:
        text += ". Activities: " + ", ".join(acts)
    return text + "."
