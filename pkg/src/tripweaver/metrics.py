"""Run metrics computed from the persisted artifacts of a run directory."""

from __future__ import annotations

import csv
import json
import statistics
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from .domain import ACTIVITY_KINDS
from .scenario import config_from_dict, is_workday

# activity kinds that stand for errands and leisure in the frequency metrics
ERRAND_KIND = "maintenance"
LEISURE_KIND = "discretionary"
CONVERGENCE_WEEK = 7


def missing_rate(declared: int, formatted: int) -> float:
    """Share of declared trips lost in formatting, in percent."""
    if declared <= 0:
        return 0.0
    return 100.0 * (declared - formatted) / declared


def format_rate(percent: float) -> str:
    return f"{percent:.1f}%"


@dataclass
class AgentDayArtifacts:
    agent_id: int
    day: int
    activities: list[dict]
    trips: list[dict]
    outcomes: list[dict]
    log: dict


@dataclass
class RunArtifacts:
    run_dir: Path
    config: dict
    agent_days: list[AgentDayArtifacts]


@dataclass
class RunMetrics:
    days: int
    agent_ids: list[int]
    declared: int = 0
    formatted: int = 0
    retries: int = 0
    stage_failures: int = 0
    unresolved: int = 0
    # member role -> share of (agent, workday) pairs with an executed obligation trip
    mandatory_coverage: dict[str, float] = field(default_factory=dict)
    # agent -> activity kind -> days per week on which the agent planned that kind
    kind_per_week: dict[int, dict[str, float]] = field(default_factory=dict)
    # member role -> day -> mean |arrival - obligation start| over agents
    deviation_by_day: dict[str, dict[int, float]] = field(default_factory=dict)

    @property
    def missed(self) -> int:
        return self.declared - self.formatted

    @property
    def missing_rate(self) -> float:
        return missing_rate(self.declared, self.formatted)

    def per_week(self, agent_id: int, kind: str) -> float:
        return self.kind_per_week.get(agent_id, {}).get(kind, 0.0)

    def mean_per_week(self, kind: str, exclude: tuple[int, ...] = ()) -> float:
        vals = [self.per_week(a, kind) for a in self.agent_ids if a not in exclude]
        return statistics.fmean(vals) if vals else 0.0

    def convergence(self, member: str) -> Optional[tuple[float, float]]:
        """Mean deviation over the first and last week, or None when the run is too short to separate them."""
        series = self.deviation_by_day.get(member, {})
        if self.days < 2 * CONVERGENCE_WEEK or not series:
            return None
        first = [v for d, v in series.items() if d <= CONVERGENCE_WEEK]
        last = [v for d, v in series.items() if d > self.days - CONVERGENCE_WEEK]
        if not first or not last:
            return None
        return statistics.fmean(first), statistics.fmean(last)

    def late_window_deviation(self, member: str) -> Optional[float]:
        series = self.deviation_by_day.get(member, {})
        last = [v for d, v in series.items() if d > self.days - CONVERGENCE_WEEK]
        return statistics.fmean(last) if last else None


def _read(path: Path):
    return json.loads(path.read_text())


def load_artifacts(run_dir: Union[str, Path]) -> RunArtifacts:
    run_dir = Path(run_dir)
    config = _read(run_dir / "config.json")
    agent_days = []
    for day_dir in sorted(run_dir.glob("day_*")):
        day = int(day_dir.name.split("_")[1])
        for agent_dir in sorted(day_dir.glob("agent_*")):
            agent_days.append(AgentDayArtifacts(
                agent_id=int(agent_dir.name.split("_")[1]),
                day=day,
                activities=_read(agent_dir / "activities.json"),
                trips=_read(agent_dir / "trips.json"),
                outcomes=_read(agent_dir / "outcomes.json"),
                log=_read(agent_dir / "log.json"),
            ))
    agent_days.sort(key=lambda a: (a.day, a.agent_id))
    return RunArtifacts(run_dir, config, agent_days)


def _arrival_rows(art: RunArtifacts, cfg) -> list[dict]:
    """Morning obligation trip per (agent, member, day): the first executed trip to the obligation zone."""
    rows = []
    for ad in art.agent_days:
        if not is_workday(ad.day, cfg.weekend_pattern):
            continue
        profile = cfg.agent(ad.agent_id)
        outcomes = {o["trip_id"]: o for o in ad.outcomes}
        executed = sorted((t for t in ad.trips if t["trip_id"] in outcomes),
                          key=lambda t: (outcomes[t["trip_id"]]["actual_departure_minute"], t["trip_id"]))
        for m in profile.members:
            if not m.travels or m.mandatory_zone is None or m.mandatory_zone == profile.home_zone:
                continue
            t = next((t for t in executed if t["member"] == m.member and t["dest_zone"] == m.mandatory_zone), None)
            if t is None:
                continue
            o = outcomes[t["trip_id"]]
            required = m.mandatory_window[0]
            rows.append({
                "day": ad.day,
                "agent_id": ad.agent_id,
                "member": m.member,
                "trip_id": t["trip_id"],
                "departure_minute": o["actual_departure_minute"],
                "route": " ".join(str(r) for r in t["route"]),
                "arrival_minute": o["actual_arrival_minute"],
                "required_minute": required,
                "deviation_minutes": o["actual_arrival_minute"] - required,
            })
    return rows


def compute_metrics(art: RunArtifacts) -> tuple[RunMetrics, dict[str, list[dict]]]:
    if not art.agent_days:
        raise ValueError(f"{art.run_dir} holds no simulated days")
    cfg = config_from_dict(art.config)
    days = max(ad.day for ad in art.agent_days)
    agent_ids = sorted(a.agent_id for a in cfg.agents)
    met = RunMetrics(days=days, agent_ids=agent_ids)

    per_day: dict[int, dict[str, int]] = defaultdict(lambda: defaultdict(int))
    occurred: dict[tuple[int, int], dict[str, list[str]]] = defaultdict(lambda: defaultdict(list))
    for ad in art.agent_days:
        lg = ad.log
        met.declared += lg["declared_count"]
        met.formatted += lg["formatted_count"]
        met.retries += sum(lg["retries"].values())
        met.stage_failures += lg["stage_failed"] is not None
        met.unresolved += bool(lg["unresolved_findings"])
        row = per_day[ad.day]
        row["declared"] += lg["declared_count"]
        row["formatted"] += lg["formatted_count"]
        row["missed"] += lg["missed"]
        row["retries"] += sum(lg["retries"].values())
        row["stage_failures"] += lg["stage_failed"] is not None
        row["unresolved_findings"] += bool(lg["unresolved_findings"])
        for a in ad.activities:
            occurred[(ad.agent_id, ad.day)][a["kind"]].append(a["name"])

    activity_rows = []
    kind_days: dict[int, dict[str, int]] = defaultdict(lambda: defaultdict(int))
    for ad in art.agent_days:
        for kind in ACTIVITY_KINDS:
            names = occurred[(ad.agent_id, ad.day)].get(kind, [])
            kind_days[ad.agent_id][kind] += bool(names)
            activity_rows.append({"day": ad.day, "agent_id": ad.agent_id, "kind": kind,
                                  "occurred": int(bool(names)), "activities": "; ".join(names)})
    for aid in agent_ids:
        met.kind_per_week[aid] = {k: kind_days[aid][k] * 7 / days for k in ACTIVITY_KINDS}

    arrival_rows = _arrival_rows(art, cfg)
    expected: dict[str, int] = defaultdict(int)
    for day in range(1, days + 1):
        if is_workday(day, cfg.weekend_pattern):
            for a in cfg.agents:
                for m in a.members:
                    if m.travels and m.mandatory_zone is not None and m.mandatory_zone != a.home_zone:
                        expected[m.member] += 1
    covered: dict[str, int] = defaultdict(int)
    dev: dict[str, dict[int, list[float]]] = defaultdict(lambda: defaultdict(list))
    for r in arrival_rows:
        covered[r["member"]] += 1
        dev[r["member"]][r["day"]].append(abs(r["deviation_minutes"]))
    met.mandatory_coverage = {m: covered[m] / n for m, n in sorted(expected.items())}
    met.deviation_by_day = {m: {d: statistics.fmean(v) for d, v in sorted(by_day.items())}
                            for m, by_day in sorted(dev.items())}
    miss_rows = [{"day": d, **{c: per_day[d][c] for c in _COLUMNS["misses"][1:]}} for d in sorted(per_day)]
    return met, {"activities": activity_rows, "arrivals": arrival_rows, "misses": miss_rows}


def _write_csv(path: Path, rows: list[dict], columns: list[str]) -> None:
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


_COLUMNS = {
    "activities": ["day", "agent_id", "kind", "occurred", "activities"],
    "arrivals": ["day", "agent_id", "member", "trip_id", "departure_minute", "route", "arrival_minute",
                 "required_minute", "deviation_minutes"],
    "misses": ["day", "declared", "formatted", "missed", "retries", "stage_failures", "unresolved_findings"],
}


def render_report(met: RunMetrics, config: dict) -> str:
    lines = [
        "# Run report",
        "",
        f"- days: {met.days}",
        f"- households: {len(met.agent_ids)}",
        f"- seed: {config.get('seed')}",
        "- stage cores: " + ", ".join(f"{k}={v}" for k, v in config.get("stage_cores", {}).items()),
        "",
        "## Trip formatting",
        "",
        f"- declared trips: {met.declared}",
        f"- formatted trips: {met.formatted}",
        f"- missed trips: {met.missed}",
        f"- missing rate: {format_rate(met.missing_rate)}",
        f"- stage retries: {met.retries}",
        f"- agent-days with a failed stage: {met.stage_failures}",
        f"- agent-days with unresolved findings: {met.unresolved}",
        "",
        "## Obligation trips",
        "",
    ]
    for member, share in met.mandatory_coverage.items():
        lines.append(f"- {member}: executed on {share * 100:.1f}% of household workdays")
    lines += ["", "## Activity frequency (days per week)", "", "| household | errands | leisure |", "|---|---|---|"]
    for aid in met.agent_ids:
        lines.append(f"| {aid} | {met.per_week(aid, ERRAND_KIND):.2f} | {met.per_week(aid, LEISURE_KIND):.2f} |")
    lines += ["", "## Arrival versus obligation start", ""]
    for member, series in met.deviation_by_day.items():
        lines.append(f"### {member}")
        lines.append("")
        lines.append("mean |arrival - start| by day (min): "
                     + ", ".join(f"d{d}={v:.2f}" for d, v in series.items()))
        conv = met.convergence(member)
        if conv is None:
            lines.append(f"first-week vs last-week: insufficient horizon (needs {2 * CONVERGENCE_WEEK} days)")
        else:
            lines.append(f"first-week mean {conv[0]:.2f} min, last-week mean {conv[1]:.2f} min")
        lines.append("")
    return "\n".join(lines).rstrip() + "\n"


def emit_report(run_dir: Union[str, Path]) -> RunMetrics:
    """Recompute metrics from a run directory and write ``metrics/*.csv`` and ``report.md``."""
    art = load_artifacts(run_dir)
    met, tables = compute_metrics(art)
    out = art.run_dir / "metrics"
    out.mkdir(exist_ok=True)
    for name, rows in tables.items():
        _write_csv(out / f"{name}.csv", rows, _COLUMNS[name])
    (art.run_dir / "report.md").write_text(render_report(met, art.config))
    return met
