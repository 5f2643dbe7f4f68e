import json

import pytest

import chaintrust as ct

FLEET = ct.DATA_DIR / "fleet.json"


@pytest.fixture
def registry():
    return ct.Registry.from_fleet_file(FLEET)


def test_reference_chain(registry):
    trace = ct.run_rule_chain(ct.Task.reference(), registry)
    assert trace.status == "complete"
    assert trace.final_set == ["a8", "a10", "a11"]
    assert len(trace.survivors("service_availability")) == 17
    assert trace.survivors("communication") == ["a2", "a3", "a5", "a8", "a9", "a10", "a11", "a12", "a13", "a14"]
    assert trace.collected_records == 19 + 17 + 10 + 7


def test_matches_ground_truth(registry):
    task = ct.Task("AI model training")
    task.wants_honest_delivery = False
    task.render_text()
    truth = ct.ground_truth(task, registry)
    assert ct.run_rule_chain(task, registry).final_set == truth


def test_policy_override(registry):
    policy = ct.RulePolicy()
    policy.honest_delivery_min = "medium"
    assert ct.run_rule_chain(ct.Task.reference(), registry, policy).final_set == ["a8", "a10", "a11", "a12"]


def test_reevaluate_after_update(registry):
    trace = ct.run_rule_chain(ct.Task.reference(), registry)
    registry.set_loyalty("a10", "low")
    again = ct.reevaluate_rule_stage(trace, "result_delivery", registry)
    assert again.final_set == ["a8", "a11"]


def test_replay_transcript(registry):
    trace = ct.run_replay_chain(
        ct.Task.reference(), registry, ct.DATA_DIR / "transcripts" / "reference_trace.jsonl", ct.DATA_DIR / "exemplars"
    )
    assert trace.final_set == ["a8", "a10", "a11"]
    doc = trace.to_json()
    assert json.loads(doc)["status"] == "complete"
    assert ct.verify_trace(doc, FLEET) == []


def test_task_parse():
    t = ct.Task.parse("I want to securely accomplish an edge caching task, which devices can be trusted to perform this task?")
    assert t.required_service == "edge caching"
    assert t.wants_secure_comm and not t.wants_fast_comm


def test_errors():
    with pytest.raises(ct.FleetParseError):
        ct.Registry.from_fleet_json('{"devices": [')
    with pytest.raises(ValueError):
        ct.Task("")


def test_cli_and_validation():
    assert ct.validate_fleet(FLEET) == []
    code, out, err = ct.cli(["fleet-validate", str(FLEET)])
    assert code == 0 and out.strip() == "ok: 20 devices"
    code, _, _ = ct.cli(["run", "--fleet", "/nonexistent.json"])
    assert code == 2


def test_prompt_hash():
    assert ct.prompt_hash("abc").startswith("ba7816bf")
