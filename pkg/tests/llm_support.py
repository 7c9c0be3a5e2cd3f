"""Helpers for driving the model-backed core against the local mock endpoint."""

from __future__ import annotations

import dataclasses

from tripweaver.domain import STAGES
from tripweaver.llm.mock import MockLLMServer
from tripweaver.llm.schemas import extract_json, fenced
from tripweaver.runner import run_simulation


def with_cores(config, llm_stages=STAGES):
    return dataclasses.replace(config, stage_cores={s: "llm" if s in llm_stages else "oracle" for s in STAGES})


def run_mocked(config, replies, out_dir, **kwargs):
    with MockLLMServer(replies) as server:
        result = run_simulation(config, out_dir, env={"LLM_BASE_URL": server.base_url}, **kwargs)
    return result, server


def drop_trip(reply: str, index: int = 0) -> str:
    body = extract_json(reply)
    del body["trips"][index]
    return fenced(body)

