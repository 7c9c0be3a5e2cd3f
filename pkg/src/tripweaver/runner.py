"""Multi-day simulation loop and run-directory persistence.

Each day every household plans independently, the merged trips are loaded
onto the network together, and each household then reflects on its own
outcomes. Nothing carries between days except memory.
"""

from __future__ import annotations

import hashlib
import json
import logging
import platform
import time
from collections.abc import Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Optional, Union

from .cores.base import DecisionCore, StageTrace, network_brief
from .cores.oracle import OracleCore
from .domain import STAGES, ScenarioError, SimulationConfig
from .memory import MemoryStore, templated_summary
from .metrics import RunMetrics, emit_report
from .pipeline import AgentDay, AgentDayLog, activity_to_dict, apply_feedback, log_to_dict, run_agent_day
from .scenario import config_to_dict
from .traffic import link_series_csv, simulate_day

log = logging.getLogger(__name__)


def build_cores(config: SimulationConfig, env: Optional[Mapping[str, str]] = None) -> dict[str, DecisionCore]:
    """One core instance per core id, mapped onto the stages that use it."""
    instances: dict[str, DecisionCore] = {}
    if "oracle" in config.stage_cores.values():
        instances["oracle"] = OracleCore()
    if "llm" in config.stage_cores.values():
        from .cores.llm import LLMCore
        from .llm.client import ChatClient

        client = ChatClient.from_env(config.llm.model, config.llm.temperature, config.llm.max_parallel, env=env,
                                     base_url_env=config.llm.endpoint_env)
        instances["llm"] = LLMCore(client, config.llm.max_retries)
    return {stage: instances[config.stage_cores[stage]] for stage in STAGES}


def config_digest(config: SimulationConfig) -> str:
    blob = json.dumps(config_to_dict(config), sort_keys=True).encode()
    return hashlib.blake2b(blob, digest_size=4).hexdigest()


def default_run_id(config: SimulationConfig) -> str:
    cores = sorted(set(config.stage_cores.values()))
    return f"run-{'-'.join(cores)}-s{config.seed}-{config_digest(config)}"


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, ensure_ascii=False) + "\n")


@dataclass
class RunResult:
    run_id: str
    run_dir: Path
    metrics: RunMetrics
    logs: list[AgentDayLog] = field(default_factory=list)
    memory: dict[int, MemoryStore] = field(default_factory=dict)


def _fresh_dir(out_dir: Path, run_id: str) -> tuple[str, Path]:
    candidate, n = run_id, 1
    while (out_dir / candidate).exists():
        n += 1
        candidate = f"{run_id}-{n}"
    path = out_dir / candidate
    path.mkdir(parents=True)
    return candidate, path


def _persist_agent_day(day_dir: Path, ad: AgentDay, outcomes, store: MemoryStore) -> None:
    d = day_dir / f"agent_{ad.log.agent_id:03d}"
    d.mkdir()
    lg = ad.log
    _dump(d / "activities.json", [activity_to_dict(a) for a in lg.activities])
    _dump(d / "tours.json", [
        {"member_roles": list(t.member_roles), "anchor_zone": t.anchor_zone,
         "activities": [activity_to_dict(a) for a in t.ordered_activities]}
        for t in lg.tours
    ])
    drafts = [f"--- round {i} ---\n{draft.render()}" for i, draft in enumerate(lg.drafts)]
    (d / "draft.txt").write_text("\n".join(drafts) if drafts else "(no draft)\n")
    _dump(d / "findings.json", [[f.to_dict() for f in rnd] for rnd in lg.findings])
    _dump(d / "trips.json", [asdict(t) for t in ad.trips])
    _dump(d / "outcomes.json", [asdict(o) for o in outcomes])
    _dump(d / "memory.json", store.to_dict())
    entry = log_to_dict(lg)
    entry.pop("drafts")
    _dump(d / "log.json", entry)


def run_simulation(config: SimulationConfig, out_dir: Union[str, Path], *,
                   cores: Optional[Mapping[str, DecisionCore]] = None,
                   env: Optional[Mapping[str, str]] = None,
                   run_id: Optional[str] = None,
                   on_day: Optional[Callable[[int], None]] = None) -> RunResult:
    """Run ``config.days`` days and write the full run directory under ``out_dir``."""
    if config.days < 1:
        raise ScenarioError(f"days must be >= 1, got {config.days}", "days")
    cores = dict(cores) if cores is not None else build_cores(config, env)
    missing = [s for s in STAGES if s not in cores]
    if missing:
        raise ValueError(f"no core for stages {missing}")
    uses_llm = any(getattr(c, "core_id", "") == "llm" for c in cores.values())
    workers = min(len(config.agents), config.llm.max_parallel) if uses_llm else 1

    started = datetime.now(timezone.utc)
    t0 = time.perf_counter()
    run_id, run_dir = _fresh_dir(Path(out_dir), run_id or default_run_id(config))
    _dump(run_dir / "config.json", config_to_dict(config))

    agents = sorted(config.agents, key=lambda a: a.agent_id)
    stores = {a.agent_id: MemoryStore() for a in agents}
    brief = network_brief(config.network)
    logs: list[AgentDayLog] = []

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None

    def fan_out(fn, items):
        return list(pool.map(fn, items)) if pool else [fn(x) for x in items]

    try:
        for day in range(1, config.days + 1):
            if config.compaction_days > 0:
                through = day - 1 - config.memory_window_days
                for store in stores.values():
                    if through - store.compacted_through >= config.compaction_days:
                        store.compact(through, templated_summary)

            plans: list[AgentDay] = fan_out(
                lambda a: run_agent_day(a, stores[a.agent_id], day, cores, config, brief), agents)
            merged = [t for p in plans for t in p.trips]
            loaded = simulate_day(config.network, merged, config.time_step_minutes)
            by_id = {o.trip_id: o for o in loaded.outcomes}

            def feedback(p: AgentDay):
                outs = [by_id[t.trip_id] for t in p.trips]
                trace = StageTrace("reflect")
                trace.attempts = p.log.attempts.setdefault("reflect", [])
                apply_feedback(stores[p.log.agent_id], outs, cores["reflect"], p.ctx, trace)
                return outs

            outcomes = fan_out(feedback, plans)

            day_dir = run_dir / f"day_{day:02d}"
            day_dir.mkdir()
            (day_dir / "network.csv").write_text(link_series_csv(day, loaded))
            for p, outs in zip(plans, outcomes):
                _persist_agent_day(day_dir, p, outs, stores[p.log.agent_id])
                logs.append(p.log)
            if on_day is not None:
                on_day(day)
    finally:
        if pool:
            pool.shutdown()

    metrics = emit_report(run_dir)
    _dump(run_dir / "meta.json", {
        "run_id": run_id,
        "started_utc": started.isoformat(),
        "finished_utc": datetime.now(timezone.utc).isoformat(),
        "wall_seconds": round(time.perf_counter() - t0, 3),
        "python": platform.python_version(),
    })
    return RunResult(run_id, run_dir, metrics, logs, stores)
