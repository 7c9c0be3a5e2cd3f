"""Smoke test against a real chat-completions endpoint (not run in CI).

Runs the bundled scenario for 10 households over 3 days with every stage on
the model-backed core, then reports the share of stage calls that produced a
schema-valid reply within the retry budget. The target is at least 95%.

    export LLM_BASE_URL=https://host/v1      # any OpenAI-compatible endpoint
    export LLM_API_KEY=...                    # if the endpoint needs one
    python scripts/live_llm_smoke.py [--out DIR] [--model NAME]

Exit status is 0 when the target is met and 1 otherwise.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import tempfile
from pathlib import Path

from tripweaver.domain import STAGES
from tripweaver.runner import run_simulation
from tripweaver.scenario import bundled_scenario_path, load_scenario

TARGET = 0.95


def stage_call_share(logs) -> tuple[float, int]:
    """Share of stage invocations whose attempts include a valid reply."""
    calls = ok = 0
    for lg in logs:
        for attempts in lg.attempts.values():
            if not attempts:
                continue
            calls += 1
            ok += any(a["ok"] for a in attempts)
    return (ok / calls if calls else 0.0), calls


def smoke(out_dir, model: str | None = None, days: int = 3, agents: int = 10):
    config = load_scenario(bundled_scenario_path())
    llm = dataclasses.replace(config.llm, model=model) if model else config.llm
    config = dataclasses.replace(config, days=days, agents=config.agents[:agents], llm=llm,
                                 stage_cores={s: "llm" for s in STAGES})
    result = run_simulation(config, out_dir)
    return stage_call_share(result.logs)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=None, help="where to keep the run directory (default: a temp dir)")
    ap.add_argument("--model", default=None)
    args = ap.parse_args()
    out = Path(args.out) if args.out else Path(tempfile.mkdtemp(prefix="tripweaver-smoke-"))
    share, calls = smoke(out, args.model)
    print(f"{share:.1%} of {calls} stage calls schema-valid (target {TARGET:.0%}); run kept under {out}")
    return 0 if share >= TARGET else 1


if __name__ == "__main__":
    sys.exit(main())
