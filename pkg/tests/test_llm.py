import json

import httpx
import pytest

from conftest import small_config
from llm_support import drop_trip, run_mocked, with_cores
from tripweaver.cores.base import CoreFailure, StageTrace
from tripweaver.cores.llm import LLMCore
from tripweaver.cores.oracle import OracleCore
from tripweaver.llm import prompts
from tripweaver.llm.client import ChatClient, LLMConfigError, LLMUnavailable
from tripweaver.llm.mock import MockLLMServer, load_responses, save_responses
from tripweaver.llm.replay import record_replies
from tripweaver.llm.schemas import ActivitiesReply, FormatReply, FormattedTripItem, PlanReply, extract_json
from tripweaver.memory import MemoryStore
from tripweaver.network import free_flow_time, is_valid_route
from tripweaver.pipeline import build_context
from tripweaver.runner import build_cores


@pytest.fixture(scope="module")
def small(bundled_config):
    return small_config(bundled_config)


@pytest.fixture(scope="module")
def replies(small):
    return record_replies(small)


def load_trips(run_dir):
    for path in sorted(run_dir.glob("day_*/agent_*/trips.json")):
        yield from json.loads(path.read_text())


def assert_trips_well_formed(run_dir, config):
    roles = {a.agent_id: {m.member for m in a.members} for a in config.agents}
    n = 0
    for t in load_trips(run_dir):
        n += 1
        assert t["member"] in roles[t["agent_id"]]
        assert is_valid_route(config.network, tuple(t["route"]), t["origin_zone"], t["dest_zone"])
        assert t["expected_arrival_minute"] >= t["departure_minute"] + free_flow_time(config.network, t["route"])
    return n


# -- parsing --------------------------------------------------------------

def test_extract_fenced_json():
    assert extract_json('Sure.\n```json\n{"a": 1}\n```\nand ```json\n{"b": 2}\n```') == {"a": 1}
    assert extract_json('  {"a": [1]}') == {"a": [1]}
    with pytest.raises(ValueError, match="no fenced JSON"):
        extract_json("I cannot help")
    with pytest.raises(ValueError, match="JSON syntax"):
        extract_json("```json\n{'a': 1}\n```")


def test_clock_fields():
    item = FormattedTripItem.model_validate({"member": "dad", "purpose": "work", "origin": 1, "destination": 3,
                                             "departure": "07:05", "route": [1, 3], "expected_arrival": 485})
    assert (item.departure, item.expected_arrival) == (425.0, 485.0)
    for bad in ("7h05", "24:00", "07:61", -1, True):
        with pytest.raises(ValueError):
            PlanReply.model_validate({"trips": [{"member": "dad", "purpose": "w", "origin": 1, "destination": 3,
                                                 "departure": bad}]})


def test_format_item_requires_route():
    with pytest.raises(ValueError):
        FormattedTripItem.model_validate({"member": "dad", "purpose": "work", "origin": 1, "destination": 3,
                                          "departure": 420, "expected_arrival": 480})


def test_activity_reply_schema():
    ok = ActivitiesReply.model_validate({"activities": [
        {"name": "work", "members": ["dad"], "kind": "mandatory", "zone": 3, "start": "08:00", "duration_minutes": 540}]})
    assert ok.activities[0].start == 480
    with pytest.raises(ValueError):
        ActivitiesReply.model_validate({"activities": [
            {"name": "work", "members": ["dad"], "kind": "chores", "zone": 3, "start": 480, "duration_minutes": 60}]})


def test_tag_round_trip(bundled_config):
    ctx = build_context(bundled_config.agent(7), MemoryStore(), 12, bundled_config)
    assert prompts.parse_tag("prefix " + prompts.tag(ctx, "format") + " suffix") == (7, 12, "format")
    assert prompts.parse_tag("no tag here") is None


def test_prompts_carry_tag_and_no_capacity(bundled_config):
    ctx = build_context(bundled_config.agent(1), MemoryStore(), 1, bundled_config)
    msgs = prompts.activities_messages(ctx)
    text = "\n".join(m["content"] for m in msgs)
    assert prompts.tag(ctx, "activities") in text
    assert "capacity" not in text.lower()


# -- client ---------------------------------------------------------------

def test_client_requires_endpoint():
    with pytest.raises(LLMConfigError):
        ChatClient.from_env(env={})


def test_build_cores_without_endpoint(small):
    with pytest.raises(LLMConfigError):
        build_cores(with_cores(small), env={})
    assert isinstance(build_cores(small, env={})["activities"], OracleCore)


def scripted_client(statuses, **kw):
    seen = []

    def handler(request):
        seen.append(json.loads(request.content))
        status = statuses[min(len(seen) - 1, len(statuses) - 1)]
        body = {"choices": [{"message": {"content": "hello"}}]} if status == 200 else {"error": "x"}
        return httpx.Response(status, json=body)

    client = ChatClient("http://test/v1", backoff_seconds=0.0, **kw)
    client._http = httpx.Client(transport=httpx.MockTransport(handler))
    return client, seen


def test_client_backs_off_on_server_errors():
    client, seen = scripted_client([503, 429, 200])
    assert client.complete([{"role": "user", "content": "hi"}], seed=2**40 + 5) == "hello"
    assert len(seen) == 3
    assert seen[0]["seed"] == (2**40 + 5) % 2**31


def test_client_gives_up():
    client, seen = scripted_client([500], transport_retries=2)
    with pytest.raises(LLMUnavailable, match="gave up after 3"):
        client.complete([])
    assert len(seen) == 3


def test_client_does_not_retry_client_errors():
    client, seen = scripted_client([400])
    with pytest.raises(LLMUnavailable, match="HTTP 400"):
        client.complete([])
    assert len(seen) == 1


def test_client_against_mock_server():
    with MockLLMServer({(1, 2, "trips"): ["first", "second"]}) as server:
        client = ChatClient(server.base_url, backoff_seconds=0.0)
        ask = [{"role": "user", "content": "[agent 1 | day 2 | stage trips] plan"}]
        assert [client.complete(ask) for _ in range(3)] == ["first", "second", "second"]
        assert server.calls((1, 2, "trips")) == 3
        with pytest.raises(LLMUnavailable, match="404"):
            client.complete([{"role": "user", "content": "[agent 9 | day 9 | stage trips]"}])


def test_unknown_key_is_a_stage_failure(bundled_config):
    with MockLLMServer({}) as server:
        core = LLMCore(ChatClient(server.base_url, backoff_seconds=0.0))
        ctx = build_context(bundled_config.agent(1), MemoryStore(), 1, bundled_config)
        with pytest.raises(CoreFailure) as err:
            core.generate_activities(ctx, StageTrace("activities"))
    assert err.value.stage == "activities"


def test_responses_file_round_trip(tmp_path, replies):
    path = tmp_path / "replies.json"
    save_responses(replies, path)
    assert load_responses(path) == replies


# -- core behaviour -------------------------------------------------------

def test_replayed_run_matches_scripted_run(small, replies, tmp_path):
    from tripweaver.runner import run_simulation

    scripted = run_simulation(small, tmp_path / "a")
    replayed, _ = run_mocked(with_cores(small), replies, tmp_path / "b")
    assert assert_trips_well_formed(replayed.run_dir, small) > 0
    assert list(load_trips(replayed.run_dir)) == list(load_trips(scripted.run_dir))
    assert replayed.metrics.declared == scripted.metrics.declared
    assert (replayed.metrics.missed, replayed.metrics.retries, replayed.metrics.stage_failures) == (0, 0, 0)


def test_malformed_reply_costs_one_retry(small, replies, tmp_path):
    bad = dict(replies)
    bad[(2, 1, "activities")] = ["I will think about it."] + replies[(2, 1, "activities")]
    result, server = run_mocked(with_cores(small), bad, tmp_path)
    assert server.calls((2, 1, "activities")) == 2
    lg = next(lg for lg in result.logs if (lg.agent_id, lg.day) == (2, 1))
    assert lg.retries()["activities"] == 1
    assert [a["ok"] for a in lg.attempts["activities"]] == [False, True]
    assert "no fenced JSON" in lg.attempts["activities"][0]["error"]
    assert result.metrics.retries == 1 and result.metrics.stage_failures == 0
    log_json = json.loads((result.run_dir / "day_01" / "agent_002" / "log.json").read_text())
    assert log_json["retries"]["activities"] == 1


def test_retry_prompt_carries_the_error(small, replies, bundled_config):
    seen = []

    class Spy(ChatClient):
        def complete(self, messages, seed=None):
            seen.append(messages)
            return super().complete(messages, seed)

    bad = {(1, 1, "activities"): ["```json\n{\"activities\": 3}\n```"] + replies[(1, 1, "activities")]}
    with MockLLMServer(bad) as server:
        core = LLMCore(Spy(server.base_url))
        ctx = build_context(bundled_config.agent(1), MemoryStore(), 1, small)
        core.generate_activities(ctx, StageTrace("activities"))
    assert len(seen) == 2
    assert seen[1][-2]["role"] == "assistant"
    assert "could not be used" in seen[1][-1]["content"]


def test_retries_are_bounded(small, replies, tmp_path):
    bad = dict(replies)
    bad[(1, 2, "tours")] = ["nope"]
    result, server = run_mocked(with_cores(small), bad, tmp_path)
    assert server.calls((1, 2, "tours")) == small.llm.max_retries + 1
    lg = next(lg for lg in result.logs if (lg.agent_id, lg.day) == (1, 2))
    assert lg.stage_failed == "tours" and lg.planned_trips == []
    assert result.metrics.stage_failures == 1


def test_dropped_trip_is_counted_missed(small, replies, tmp_path):
    bad = dict(replies)
    bad[(3, 2, "format")] = [drop_trip(replies[(3, 2, "format")][0])]
    result, _ = run_mocked(with_cores(small), bad, tmp_path)
    assert result.metrics.missed == 1
    lg = next(lg for lg in result.logs if (lg.agent_id, lg.day) == (3, 2))
    assert (lg.missed, lg.retries()["format"]) == (1, 0)
    assert_trips_well_formed(result.run_dir, small)


def test_invalid_formatted_record_is_dropped(small, replies, tmp_path):
    body = extract_json(replies[(1, 1, "format")][0])
    body["trips"][0]["route"] = [1, 4]
    body["trips"].append(dict(body["trips"][1]))
    bad = dict(replies)
    bad[(1, 1, "format")] = ["```json\n" + json.dumps(body) + "\n```"]
    result, _ = run_mocked(with_cores(small), bad, tmp_path)
    lg = next(lg for lg in result.logs if (lg.agent_id, lg.day) == (1, 1))
    assert lg.missed == 1
    dropped = lg.attempts["format"][-1]["dropped"]
    assert len(dropped) == 2 and "does not connect" in dropped[0] and "extra trip" in dropped[1]
    FormatReply.model_validate(body)


def test_hybrid_assignment(small, replies, tmp_path):
    cfg = with_cores(small, llm_stages=("activities", "format"))
    result, server = run_mocked(cfg, replies, tmp_path)
    stages = {k[2] for k in server.requests}
    assert stages == {"activities", "format"}
    assert result.metrics.stage_failures == 0 and result.metrics.missed == 0
    assert assert_trips_well_formed(result.run_dir, small) > 0


def test_reflection_falls_back_to_plain_records(small, replies, tmp_path):
    bad = {k: v for k, v in replies.items() if k[2] != "reflect"}
    result, _ = run_mocked(with_cores(small), bad, tmp_path)
    assert result.metrics.stage_failures == 0
    store = result.memory[1]
    assert store.travel and all(r.insight in (None, "") for r in store.travel)


def test_reflection_insight_is_kept(small, replies, tmp_path):
    good = dict(replies)
    good[(1, 1, "reflect")] = ['```json\n{"insight": "Leave a little earlier."}\n```']
    result, _ = run_mocked(with_cores(small), good, tmp_path)
    day1 = [r for r in result.memory[1].travel if r.day == 1]
    assert day1[0].insight == "Leave a little earlier."
