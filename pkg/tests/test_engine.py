from __future__ import annotations

import json

import pytest

from conftest import ORACLES
from seed_script import SCRIPT, toy_description
from raevolve import engine
from raevolve.catalog import Event, Scope, TaskType, parse_rule
from raevolve.errors import (
    ConditionNotMet,
    EventMismatch,
    HashMismatch,
    InjectedFault,
    InvalidInput,
    MissingInput,
    QueryAmbiguous,
    StepFailure,
    TargetNotFound,
)
from raevolve.model import content_hash, deserialize, serialize

FM = {"model_kind": "feature model"}


def oracle(name: str) -> bytes:
    return (ORACLES / name).read_bytes()


class TestEvent:
    def test_matches(self, catalog):
        assert engine.check_event(catalog.rule("R-var-1"), {"task": "Addition", "element": "Variability",
                                                            "scope": "Element"})
        assert not engine.check_event(catalog.rule("R-var-1"), {"task": "Removal", "element": "Variability",
                                                                "scope": "Element"})
        assert engine.check_event(catalog.rule("R-var-2"), Event(TaskType.REMOVAL, "Variability", Scope.ELEMENT))

    def test_scope_matters(self, catalog):
        assert not engine.check_event(catalog.rule("R-var-1"), {"task": "Addition", "element": "Variability",
                                                                "scope": "Component"})

    def test_execute_reasserts_event(self, catalog, empty):
        before = serialize(empty)
        with pytest.raises(EventMismatch):
            engine.execute(catalog.rule("R-var-1"), empty, FM, request={"task": "Removal", "element": "Variability"})
        assert serialize(empty) == before

    def test_reachable_rules_satisfy_event(self, catalog):
        for g in catalog.guidelines.values():
            for task, rule_ids in g.tasks.items():
                for rid in rule_ids:
                    rule = catalog.rule(rid)
                    assert engine.check_event(rule, Event(task, g.element, rule.event.scope))


class TestCondition:
    def test_trivial(self, catalog, empty):
        result = engine.check_condition(catalog.rule("R-var-1"), empty)
        assert result.holds and result.explanation == "no condition"

    def _rule(self, condition):
        return parse_rule({
            "id": "R-x-1", "event": {"task": "Addition", "element": "View", "scope": "Element"},
            "condition": condition, "inputs": [], "fidelity": "full", "summary": "test",
            "action": [{"step": "CreateElement", "kind": "View", "name": "v"}],
        })

    def test_predicates_on_empty(self, empty):
        assert not engine.check_condition(self._rule('exists(View, "Variability View")'), empty).holds
        assert engine.check_condition(self._rule("not exists(Viewpoint)"), empty).holds

    def test_failed_condition_blocks_execution(self, empty):
        with pytest.raises(ConditionNotMet):
            engine.execute(self._rule("exists(Viewpoint)"), empty)
        assert empty.elements == {}


class TestDryRun:
    def test_empty_description_plan(self, catalog, empty):
        before = serialize(empty)
        plan = engine.dry_run(catalog.rule("R-var-1"), empty, {**FM, "view_name": "Variability View"})
        ops = [(e["op"], e.get("kind"), e.get("new")) for e in plan.steps]
        assert ops == [
            ("create", "View", True),
            ("choose", None, None),
            ("create", "ArchitectureModel", True),
            ("ensure", "Viewpoint", True),
            ("attach", None, True),
            ("attach", None, True),
            ("trace", None, None),
        ]
        assert plan.steps[4]["parent"] == "el-3" and plan.steps[4]["child"] == "el-1"
        assert plan.steps[5]["parent"] == "el-1" and plan.steps[5]["child"] == "el-2"
        assert serialize(empty) == before

    def test_existing_viewpoint_is_reused(self, catalog, empty):
        vp = empty.add_element("Viewpoint", "Crosscutting Viewpoint")
        plan = engine.dry_run(catalog.rule("R-var-1"), empty, FM)
        ensure = next(e for e in plan.steps if e["op"] == "ensure")
        assert ensure["new"] is False and ensure["id"] == vp
        assert sum(1 for e in plan.steps if e.get("new") is True and e["op"] in ("create", "ensure")) == 2

    def test_removal_on_empty(self, catalog, empty):
        with pytest.raises(TargetNotFound):
            engine.dry_run(catalog.rule("R-var-2"), empty)

    def test_missing_input(self, catalog, empty):
        with pytest.raises(MissingInput):
            engine.dry_run(catalog.rule("R-var-1"), empty, {})

    def test_option_outside_choices(self, catalog, empty):
        with pytest.raises(InvalidInput):
            engine.dry_run(catalog.rule("R-var-1"), empty, {"model_kind": "UML sketch"})

    def test_undeclared_input(self, catalog, empty):
        with pytest.raises(InvalidInput):
            engine.dry_run(catalog.rule("R-var-1"), empty, {**FM, "colour": "red"})

    def test_ambiguous_viewpoint(self, catalog, empty):
        empty.add_element("Viewpoint", "Crosscutting Viewpoint")
        empty.add_element("Viewpoint", "Crosscutting Viewpoint")
        with pytest.raises(QueryAmbiguous) as info:
            engine.dry_run(catalog.rule("R-var-1"), empty, FM)
        assert info.value.step_index == 3

    def test_ambiguity_resolved_by_id_binding(self, catalog, empty):
        empty.add_element("Viewpoint", "Crosscutting Viewpoint")
        second = empty.add_element("Viewpoint", "Crosscutting Viewpoint")
        plan = engine.dry_run(catalog.rule("R-var-1"), empty, {**FM, "viewpoint_name": f"@{second}"})
        assert plan.steps[4]["parent"] == second


class TestExecuteOracles:
    def test_empty_branch(self, catalog, empty):
        cs = engine.execute(catalog.rule("R-var-1"), empty, FM)
        assert serialize(empty) == oracle("r-var-1.empty.post.json")
        assert cs.id == "cs-1" and cs.rule == "R-var-1"
        assert empty.find_elements("View", "Variability") == ["el-1"]

    def test_else_branch(self, catalog):
        desc = deserialize(oracle("r-var-1.viewpoint.pre.json"))
        engine.execute(catalog.rule("R-var-1"), desc, {"model_kind": "orthogonal model"})
        assert serialize(desc) == oracle("r-var-1.viewpoint.post.json")

    def test_acquisition_section(self, catalog, empty):
        engine.execute(catalog.rule("R-aq-1"), empty, {"content": "How acquisition is done."})
        [section] = empty.general_sections
        assert (section.name, section.content) == ("Acquisition Process", "How acquisition is done.")
        assert empty.traceability[0].target == "3-51"

    def test_acquisition_twice_fails_cleanly(self, catalog, empty):
        engine.execute(catalog.rule("R-aq-1"), empty, {"content": "a"})
        before = serialize(empty)
        with pytest.raises(StepFailure) as info:
            engine.execute(catalog.rule("R-aq-1"), empty, {"content": "b"})
        assert info.value.step_index == 0
        assert serialize(empty) == before

    def test_injected_fault_at_trace(self, catalog, empty):
        pre = content_hash(empty)
        with pytest.raises(StepFailure) as info:
            engine.execute(catalog.rule("R-var-1"), empty, FM, fail_at=6)
        assert info.value.step_index == 6 and isinstance(info.value.cause, InjectedFault)
        assert "UpdateTraceability" in str(info.value)
        assert content_hash(empty) == pre and empty.version == 0

    def test_conditional_branches(self, catalog, empty):
        rule = catalog.rule("R-da-4")
        first = engine.execute(rule, empty, {"content": "one"})
        second = engine.execute(rule, empty, {"content": "two"})
        assert [e["holds"] for e in first.steps_applied if e["op"] == "branch"] == [False]
        assert [e["holds"] for e in second.steps_applied if e["op"] == "branch"] == [True]
        assert empty.general_sections[0].content == "one\n\ntwo"
        assert empty.version == 2 and empty.changesets == ["cs-1", "cs-2"]


class TestChangeSets:
    def test_deterministic(self, catalog):
        a, b = toy_description(), toy_description()
        ca = engine.execute(catalog.rule("R-var-1"), a, FM)
        cb = engine.execute(catalog.rule("R-var-1"), b, FM)
        assert serialize(a) == serialize(b)
        assert ca == cb

    def test_replay(self, catalog):
        a = toy_description()
        cs = engine.execute(catalog.rule("R-var-1"), a, FM)
        b = toy_description()
        engine.replay(b, cs)
        assert serialize(a) == serialize(b)

    def test_replay_needs_pre_state(self, catalog, empty):
        cs = engine.execute(catalog.rule("R-var-1"), empty, FM)
        with pytest.raises(HashMismatch):
            engine.replay(empty, cs)

    def test_delta_contents(self, catalog, empty):
        cs = engine.execute(catalog.rule("R-var-1"), empty, FM)
        assert cs.delta["elements_added"] == ["el-1", "el-2", "el-3"]
        assert cs.delta["traces_added"][0]["target"] == "3-11"
        assert cs.pre_hash != cs.post_hash

    def test_round_trip_json(self, catalog, empty):
        cs = engine.execute(catalog.rule("R-var-1"), empty, FM)
        again = engine.changeset_from_dict(json.loads(json.dumps(cs.to_dict())))
        assert again == cs


class TestRevert:
    def test_revert_restores_content(self, catalog, empty):
        pre = content_hash(empty)
        cs = engine.execute(catalog.rule("R-var-1"), empty, FM)
        undo = engine.revert(empty, cs)
        assert len(empty.elements) == 0 and len(empty.traceability) == 0
        assert content_hash(empty) == pre == undo.post_hash
        assert empty.version == 2 and undo.reverts == cs.id

    def test_drifted(self, catalog, empty):
        cs = engine.execute(catalog.rule("R-var-1"), empty, FM)
        empty.add_element("Concern", "drift")
        with pytest.raises(HashMismatch):
            engine.revert(empty, cs)

    def test_twice(self, catalog, empty):
        cs = engine.execute(catalog.rule("R-var-1"), empty, FM)
        engine.revert(empty, cs)
        with pytest.raises(HashMismatch):
            engine.revert(empty, cs)

    def test_revert_of_removal(self, catalog, empty):
        engine.execute(catalog.rule("R-var-1"), empty, FM)
        snapshot = serialize(empty)
        cs = engine.execute(catalog.rule("R-var-2"), empty)
        assert set(cs.delta["elements_removed"]) == {"el-1", "el-2"}
        engine.revert(empty, cs)
        restored = json.loads(serialize(empty))
        expected = json.loads(snapshot)
        restored.pop("version"), expected.pop("version")
        assert restored == expected

    def test_every_script_step_reverts(self, catalog):
        desc = toy_description()
        for rule_id, inputs in SCRIPT:
            pre = content_hash(desc)
            cs = engine.execute(catalog.rule(rule_id), desc, inputs)
            probe = desc.copy()
            engine.revert(probe, cs)
            assert content_hash(probe) == pre, rule_id
            assert desc.validate() == [], rule_id


def test_script_covers_every_seed_rule(catalog):
    assert {r for r, _ in SCRIPT} == set(catalog.rules)


def test_probe_inputs(catalog):
    desc = toy_description()
    probe = engine.probe_inputs(catalog.rule("R-vi-4"), desc)
    assert probe["view_name"] == "Module View" and probe["content"] == "<content>"
    assert engine.probe_inputs(catalog.rule("R-var-1"))["model_kind"] == "feature model"
