"""Record a scripted run as canned chat replies for the mock server.

Serving these replies to the LLM core reproduces the scripted run, which
makes the LLM code path testable without a model.
"""

from __future__ import annotations

import tempfile
import threading
from collections import defaultdict
from typing import Optional

from ..cores.base import DecisionContext, PlanDraft, StageTrace, ValidationFinding
from ..cores.oracle import OracleCore
from ..domain import STAGES, Activity, PlannedTrip, SimulationConfig, Tour, TripOutcome
from ..memory import ActivityRecord, TravelRecord
from .mock import Key
from .schemas import activities_reply, fenced, format_reply, plan_reply, tours_reply


class RecordingCore:
    """Oracle core that also writes each output as the reply an LLM would give."""

    core_id = "oracle"

    def __init__(self, inner: Optional[OracleCore] = None):
        self.inner = inner or OracleCore()
        self.replies: dict[Key, list[str]] = defaultdict(list)
        self._lock = threading.Lock()

    def _put(self, ctx: DecisionContext, stage: str, obj) -> None:
        with self._lock:
            self.replies[(ctx.profile.agent_id, ctx.day, stage)].append(fenced(obj))

    def generate_activities(self, ctx: DecisionContext, trace: StageTrace) -> list[Activity]:
        acts = self.inner.generate_activities(ctx, trace)
        self._put(ctx, "activities", activities_reply(acts))
        return acts

    def build_tours(self, activities: list[Activity], ctx: DecisionContext, trace: StageTrace) -> list[Tour]:
        tours = self.inner.build_tours(activities, ctx, trace)
        self._put(ctx, "tours", tours_reply(tours, activities))
        return tours

    def plan_trips(self, tours: list[Tour], ctx: DecisionContext, trace: StageTrace) -> PlanDraft:
        draft = self.inner.plan_trips(tours, ctx, trace)
        self._put(ctx, "trips", plan_reply(draft))
        return draft

    def self_correct(self, draft: PlanDraft, findings: list[ValidationFinding], ctx: DecisionContext,
                     trace: StageTrace) -> PlanDraft:
        fixed = self.inner.self_correct(draft, findings, ctx, trace)
        self._put(ctx, "self_correct", plan_reply(fixed))
        return fixed

    def format_trips(self, draft: PlanDraft, ctx: DecisionContext, trace: StageTrace) -> list[PlannedTrip]:
        trips = self.inner.format_trips(draft, ctx, trace)
        self._put(ctx, "format", format_reply(trips))
        return trips

    def reflect(self, outcomes: list[TripOutcome], ctx: DecisionContext,
                trace: StageTrace) -> tuple[list[ActivityRecord], list[TravelRecord]]:
        records = self.inner.reflect(outcomes, ctx, trace)
        self._put(ctx, "reflect", {"insight": ""})
        return records


def record_replies(config: SimulationConfig, inner: Optional[OracleCore] = None) -> dict[Key, list[str]]:
    """Run ``config`` with the scripted core and return the replies keyed by (agent, day, stage)."""
    from ..runner import run_simulation

    core = RecordingCore(inner)
    with tempfile.TemporaryDirectory() as tmp:
        run_simulation(config, tmp, cores={s: core for s in STAGES})
    return dict(core.replies)
