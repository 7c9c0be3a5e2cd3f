"""Scenario file loading, validation and serialization."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Any

from .domain import (
    CORE_IDS,
    MINUTES_PER_DAY,
    STAGES,
    Activity,
    HouseholdProfile,
    Link,
    LLMSettings,
    MemberSchedule,
    ScenarioError,
    SimulationConfig,
    Zone,
)
from .network import build_network

BUNDLED_SCENARIO = "paper_scenario.json"


def bundled_scenario_path(name: str = BUNDLED_SCENARIO) -> Path:
    return Path(str(resources.files("tripweaver") / "data" / name))


def parse_minute(value: Any, path: str) -> int:
    """Accept minutes from midnight or an ``"HH:MM"`` string."""
    if isinstance(value, bool):
        raise ScenarioError("expected a time", path)
    if isinstance(value, (int, float)):
        if float(value) != int(value):
            raise ScenarioError(f"time must be a whole minute, got {value}", path)
        return int(value)
    if isinstance(value, str) and ":" in value:
        hh, mm = value.split(":", 1)
        try:
            return int(hh) * 60 + int(mm)
        except ValueError:
            pass
    raise ScenarioError(f"cannot parse time {value!r}", path)


def format_clock(minute: float) -> str:
    m = int(round(minute))
    return f"{m // 60:02d}:{m % 60:02d}"


def _require(obj: dict, key: str, path: str) -> Any:
    if key not in obj:
        raise ScenarioError(f"missing required field {key!r}", path)
    return obj[key]


def _int(value: Any, path: str, *, positive: bool = False) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"expected an integer, got {value!r}", path)
    if positive and value <= 0:
        raise ScenarioError(f"must be positive, got {value}", path)
    return value


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"expected a number, got {value!r}", path)
    return float(value)


def _members(raw: Any, path: str) -> tuple[MemberSchedule, ...]:
    if not isinstance(raw, list):
        raise ScenarioError("members must be a list", path)
    out = []
    seen = set()
    for i, m in enumerate(raw):
        where = f"{path}[{i}]"
        role = _require(m, "role", where)
        if not isinstance(role, str) or not role:
            raise ScenarioError("role must be a non-empty string", f"{where}.role")
        if role in seen:
            raise ScenarioError(f"duplicate member role {role!r}", f"{where}.role")
        seen.add(role)
        zone = m.get("zone")
        if zone is not None:
            zone = _int(zone, f"{where}.zone", positive=True)
        window = m.get("window")
        if window is not None:
            if not isinstance(window, (list, tuple)) or len(window) != 2:
                raise ScenarioError("window must be [start, end]", f"{where}.window")
            start = parse_minute(window[0], f"{where}.window[0]")
            end = parse_minute(window[1], f"{where}.window[1]")
            if not 0 <= start < end < MINUTES_PER_DAY:
                raise ScenarioError(f"window must satisfy 0 <= start < end < 1440, got {window}", f"{where}.window")
            window = (start, end)
        if zone is not None and window is None:
            raise ScenarioError("a member with a mandatory zone needs a window", f"{where}.window")
        travels = m.get("travels", True)
        if not isinstance(travels, bool):
            raise ScenarioError("travels must be a boolean", f"{where}.travels")
        activity = m.get("activity") or _default_activity_name(zone, travels)
        out.append(MemberSchedule(role, zone, window, travels, activity))
    return tuple(out)


def _default_activity_name(zone: int | None, travels: bool) -> str:
    return "work" if zone is not None or not travels else ""


def config_from_dict(raw: dict) -> SimulationConfig:
    if not isinstance(raw, dict):
        raise ScenarioError("scenario must be a JSON object")
    days = _int(_require(raw, "days", ""), "days")
    if days < 1:
        raise ScenarioError(f"days must be >= 1, got {days}", "days")
    seed = _int(raw.get("seed", 0), "seed")
    if not 0 <= seed < 2**64:
        raise ScenarioError("seed must be a 64-bit unsigned integer", "seed")
    step = _number(raw.get("time_step_minutes", 1.0), "time_step_minutes")
    if step <= 0:
        raise ScenarioError("time_step_minutes must be positive", "time_step_minutes")

    zones = []
    for i, z in enumerate(_require(raw, "zones", "")):
        where = f"zones[{i}]"
        zones.append(Zone(_int(_require(z, "id", where), f"{where}.id"), _require(z, "kind", where),
                          str(z.get("label", ""))))
    links = []
    for i, lk in enumerate(raw.get("links", [])):
        where = f"links[{i}]"
        links.append(Link(
            id=_int(_require(lk, "id", where), f"{where}.id"),
            origin_zone=_int(_require(lk, "from", where), f"{where}.from"),
            dest_zone=_int(_require(lk, "to", where), f"{where}.to"),
            free_flow_minutes=_number(_require(lk, "free_flow_minutes", where), f"{where}.free_flow_minutes"),
            capacity=_number(_require(lk, "capacity_vph", where), f"{where}.capacity_vph"),
        ))
    network = build_network(zones, links)

    agents_raw = _require(raw, "agents", "")
    if not isinstance(agents_raw, list) or not agents_raw:
        raise ScenarioError("agents must be non-empty", "agents")
    agents = []
    ids = set()
    for i, a in enumerate(agents_raw):
        where = f"agents[{i}]"
        aid = _int(_require(a, "id", where), f"{where}.id", positive=True)
        if aid in ids:
            raise ScenarioError(f"duplicate agent id {aid}", f"{where}.id")
        ids.add(aid)
        home = _int(_require(a, "home_zone", where), f"{where}.home_zone")
        if home not in network.zones:
            raise ScenarioError(f"home zone {home} does not exist", f"{where}.home_zone")
        members = _members(a.get("members", []), f"{where}.members")
        for j, m in enumerate(members):
            if m.mandatory_zone is not None and m.mandatory_zone not in network.zones:
                raise ScenarioError(f"zone {m.mandatory_zone} does not exist", f"{where}.members[{j}].zone")
        agents.append(HouseholdProfile(aid, str(a.get("identity", "")), str(a.get("traits", "")), members, home))

    stage_cores = {s: "oracle" for s in STAGES}
    for stage, core in (raw.get("stage_cores") or {}).items():
        if stage not in STAGES:
            raise ScenarioError(f"unknown stage {stage!r}", f"stage_cores.{stage}")
        if core not in CORE_IDS:
            raise ScenarioError(f"unknown core {core!r}", f"stage_cores.{stage}")
        stage_cores[stage] = core

    llm_raw = raw.get("llm") or {}
    llm = LLMSettings(
        model=str(llm_raw.get("model", LLMSettings.model)),
        temperature=_number(llm_raw.get("temperature", LLMSettings.temperature), "llm.temperature"),
        max_retries=_int(llm_raw.get("max_retries", LLMSettings.max_retries), "llm.max_retries"),
        max_parallel=_int(llm_raw.get("max_parallel", LLMSettings.max_parallel), "llm.max_parallel", positive=True),
    )
    if llm.max_retries < 0:
        raise ScenarioError("max_retries must be >= 0", "llm.max_retries")

    window = _int(raw.get("memory_window_days", 7), "memory_window_days")
    if window < 1:
        raise ScenarioError("memory_window_days must be >= 1", "memory_window_days")
    rounds = _int(raw.get("self_correction_max_rounds", 2), "self_correction_max_rounds")
    if rounds < 0:
        raise ScenarioError("self_correction_max_rounds must be >= 0", "self_correction_max_rounds")
    compaction = _int(raw.get("compaction_days", 0), "compaction_days")
    if compaction < 0:
        raise ScenarioError("compaction_days must be >= 0", "compaction_days")
    weekend = raw.get("weekend_pattern", False)
    if not isinstance(weekend, bool):
        raise ScenarioError("weekend_pattern must be a boolean", "weekend_pattern")

    return SimulationConfig(
        days=days,
        seed=seed,
        network=network,
        agents=tuple(agents),
        stage_cores=stage_cores,
        llm=llm,
        time_step_minutes=step,
        memory_window_days=window,
        self_correction_max_rounds=rounds,
        weekend_pattern=weekend,
        compaction_days=compaction,
    )


def load_scenario(path: str | Path) -> SimulationConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"malformed scenario file {path}: {exc}") from exc
    return config_from_dict(raw)


def config_to_dict(config: SimulationConfig) -> dict:
    net = config.network
    out: dict[str, Any] = {
        "days": config.days,
        "seed": config.seed,
        "time_step_minutes": config.time_step_minutes,
        "zones": [{"id": z.id, "kind": z.kind, "label": z.label} for z in sorted(net.zones.values(), key=lambda z: z.id)],
        "links": [
            {"id": lk.id, "from": lk.origin_zone, "to": lk.dest_zone,
             "free_flow_minutes": lk.free_flow_minutes, "capacity_vph": lk.capacity}
            for lk in sorted(net.links.values(), key=lambda lk: lk.id)
        ],
        "agents": [],
        "stage_cores": dict(config.stage_cores),
        "llm": {
            "model": config.llm.model,
            "temperature": config.llm.temperature,
            "max_retries": config.llm.max_retries,
            "max_parallel": config.llm.max_parallel,
        },
        "memory_window_days": config.memory_window_days,
        "self_correction_max_rounds": config.self_correction_max_rounds,
        "weekend_pattern": config.weekend_pattern,
        "compaction_days": config.compaction_days,
    }
    for a in config.agents:
        members = []
        for m in a.members:
            item: dict[str, Any] = {"role": m.member}
            if m.mandatory_zone is not None:
                item["zone"] = m.mandatory_zone
            if m.mandatory_window is not None:
                item["window"] = list(m.mandatory_window)
            item["travels"] = m.travels
            if m.activity:
                item["activity"] = m.activity
            members.append(item)
        out["agents"].append({
            "id": a.agent_id, "identity": a.identity_text, "traits": a.traits_text,
            "home_zone": a.home_zone, "members": members,
        })
    return out


def is_workday(day: int, weekend_pattern: bool = False) -> bool:
    """Day 1 is a Monday when the weekend pattern is on."""
    return not weekend_pattern or (day - 1) % 7 < 5


def mandatory_activities(profile: HouseholdProfile, day: int, weekend_pattern: bool = False) -> list[Activity]:
    """Travel-requiring obligations of every travelling member with a fixed place."""
    if not is_workday(day, weekend_pattern):
        return []
    out = []
    for m in profile.members:
        if m.mandatory_zone is None or not m.travels:
            continue
        start, end = m.mandatory_window
        out.append(Activity(
            name=m.activity or "work",
            member_roles=(m.member,),
            kind="mandatory",
            location_zone=m.mandatory_zone,
            desired_start_minute=start,
            duration_minutes=end - start,
            requires_travel=m.mandatory_zone != profile.home_zone,
        ))
    return out
