from __future__ import annotations

import json

import pytest

from raevolve.errors import (
    DanglingRef,
    ElementNotFound,
    EmptyName,
    ParentNotFound,
    ParseError,
    SectionExists,
    SectionNotFound,
    SelfTrace,
    UnknownKind,
)
from raevolve.model import (
    Origin,
    TraceEntry,
    WriteMode,
    canonical_bytes,
    content_hash,
    deserialize,
    display_name,
    load_kinds,
    new_description,
    seed_kinds_document,
    serialize,
)


def test_new_description_is_empty():
    d = new_description("Cambuci")
    assert d.elements == {} and d.traceability == [] and d.version == 0


def test_new_description_rejects_empty_name():
    with pytest.raises(EmptyName):
        new_description("")


def test_adding_element_does_not_bump_version():
    d = new_description("Toy-RA")
    d.add_element("Viewpoint", "Crosscutting Viewpoint")
    assert len(d.elements) == 1
    assert d.version == 0


class TestKindRegistry:
    def test_cardinality(self, kinds):
        assert len(kinds) == 24
        assert len(kinds.evolvable()) == 22

    def test_non_evolvable_pair(self, kinds):
        frozen = sorted(k.name for k in kinds if not k.evolvable)
        assert frozen == ["ReferenceArchitecture", "SystemOfInterest"]

    def test_extension_kinds(self, kinds):
        ext = {k.name for k in kinds if k.origin is Origin.EXTENSION}
        assert ext == {"Instantiation", "Variability", "Acquisition", "Test", "Quality", "RiskOrThreat",
                       "Evolution", "DomainData", "InformationSource", "Module", "TechnicalSolution"}

    def test_names_case_sensitive(self, kinds):
        assert "View" in kinds and "view" not in kinds

    def test_duplicate_kind_rejected(self):
        doc = seed_kinds_document()
        doc["kinds"].append(dict(doc["kinds"][0]))
        with pytest.raises(ParseError):
            load_kinds(doc)

    def test_architecture_is_only_a_candidate(self, kinds):
        assert "Architecture" not in kinds
        assert any(c["name"] == "Architecture" for c in seed_kinds_document()["candidates"])

    def test_display_name(self):
        assert display_name("InformationSource") == "Information Source"
        assert display_name("View") == "View"


class TestElements:
    def test_add_and_find(self, empty):
        vp = empty.add_element("Viewpoint", "Crosscutting Viewpoint")
        assert empty.find_elements("Viewpoint") == [vp]

    def test_add_under_parent(self, empty):
        vp = empty.add_element("Viewpoint", "Crosscutting Viewpoint")
        view = empty.add_element("View", "Variability View", parent=vp)
        assert empty.element(vp).children == [view]

    def test_missing_parent(self, empty):
        with pytest.raises(ParentNotFound):
            empty.add_element("Viewpoint", "X", parent="el-99")

    def test_unknown_kind(self, empty):
        with pytest.raises(UnknownKind):
            empty.add_element("BogusKind", "x")
        with pytest.raises(UnknownKind):
            empty.find_elements("BogusKind")

    def test_find_on_empty(self, empty):
        assert empty.find_elements("Variability") == []

    def test_find_filters_by_name_case_insensitively(self, empty):
        a = empty.add_element("View", "Variability View")
        empty.add_element("View", "Module View")
        assert empty.find_elements("View", "variability") == [a]

    def test_ids_follow_counter(self, empty):
        ids = [empty.add_element("Concern", f"c{i}") for i in range(3)]
        assert ids == ["el-1", "el-2", "el-3"]
        assert empty.next_id == 4

    def test_attach_refuses_cycle(self, empty):
        a = empty.add_element("Viewpoint", "a")
        b = empty.add_element("View", "b", parent=a)
        with pytest.raises(ValueError):
            empty.attach_child(b, a)
        with pytest.raises(ValueError):
            empty.attach_child(a, a)

    def test_attach_twice_is_noop(self, empty):
        a = empty.add_element("Viewpoint", "a")
        b = empty.add_element("View", "b", parent=a)
        assert empty.attach_child(a, b) is False
        assert empty.element(a).children == [b]


class TestRemoval:
    def _var1_state(self, d):
        vp = d.add_element("Viewpoint", "Crosscutting Viewpoint")
        view = d.add_element("View", "Variability View", parent=vp)
        model = d.add_element("ArchitectureModel", "Variability Model", parent=view)
        d.add_trace(TraceEntry(model, "3-11", "Covers"))
        return vp, view, model

    def test_subtree_and_traces_removed(self, empty):
        vp, view, model = self._var1_state(empty)
        report = empty.remove_element(view)
        assert report.element_ids == [view, model]
        assert len(report.traces) == 1
        assert empty.element(vp).children == []
        assert empty.traceability == []
        assert empty.validate() == []

    def test_missing(self, empty):
        with pytest.raises(ElementNotFound):
            empty.remove_element("el-7")

    def test_leaf_without_traces(self, empty):
        leaf = empty.add_element("Concern", "latency")
        report = empty.remove_element(leaf)
        assert report.element_ids == [leaf] and report.traces == []


class TestSections:
    def test_create_general(self, empty):
        empty.write_section("general", "Acquisition Process", "text", WriteMode.CREATE)
        assert len(empty.general_sections) == 1

    def test_create_twice(self, empty):
        empty.write_section("general", "Acquisition Process", "text", "Create")
        with pytest.raises(SectionExists):
            empty.write_section("general", "Acquisition Process", "text", "Create")

    def test_replace_missing(self, empty):
        el = empty.add_element("Instantiation", "Instantiation")
        with pytest.raises(SectionNotFound):
            empty.write_section(el, "Instantiation Guidelines", "x", "Replace")

    def test_unknown_target(self, empty):
        with pytest.raises(ElementNotFound):
            empty.write_section("el-4", "S", "x", "Create")

    def test_append_and_replace(self, empty):
        empty.write_section("general", "Introduction", "one", "Create")
        empty.write_section("general", "Introduction", "two", "Append")
        assert empty.general_sections[0].content == "one\n\ntwo"
        empty.write_section("general", "Introduction", "three", "Replace")
        assert empty.general_sections[0].content == "three"


class TestTraces:
    def test_add(self, empty):
        m = empty.add_element("ArchitectureModel", "Variability Model")
        empty.add_trace(TraceEntry(m, "3-11", "Covers"))
        assert len(empty.traceability) == 1

    def test_self_trace(self, empty):
        m = empty.add_element("ArchitectureModel", "m")
        with pytest.raises(SelfTrace):
            empty.add_trace(TraceEntry(m, m, "Covers"))

    def test_dangling_after_removal(self, empty):
        m = empty.add_element("ArchitectureModel", "m")
        empty.remove_element(m)
        with pytest.raises(DanglingRef):
            empty.add_trace(TraceEntry(m, "3-11", "Covers"))

    def test_unrecorded_changeset(self, empty):
        with pytest.raises(DanglingRef):
            empty.add_trace(TraceEntry("doc-a", "doc-b", "Covers", changeset="cs-9"))

    def test_custom_relation(self, empty):
        empty.add_trace(TraceEntry("doc-a", "doc-b", "Custom:refines"))
        with pytest.raises(ValueError):
            empty.add_trace(TraceEntry("doc-a", "doc-b", "Custom:"))


class TestValidate:
    def test_empty(self, empty):
        assert empty.validate() == []

    def test_view_under_two_viewpoints(self, empty):
        a = empty.add_element("Viewpoint", "a")
        b = empty.add_element("Viewpoint", "b")
        v = empty.add_element("View", "v", parent=a)
        empty.attach_child(b, v)
        problems = empty.validate()
        assert len(problems) == 1 and problems[0].invariant == "view-viewpoint" and problems[0].subject == v

    def test_dangling_trace_target(self, empty):
        m = empty.add_element("ArchitectureModel", "m")
        empty.traceability.append(TraceEntry(m, "el-42", "Covers"))
        problems = empty.validate()
        assert len(problems) == 1 and problems[0].invariant == "dangling"

    def test_cycle_detected(self, empty):
        a = empty.add_element("Viewpoint", "a")
        b = empty.add_element("View", "b", parent=a)
        empty.element(b).children.append(a)
        assert [p.invariant for p in empty.validate()] == ["acyclic"]


class TestSerialization:
    def _sample(self):
        d = new_description("Toy-RA")
        vp = d.add_element("Viewpoint", "Crosscutting Viewpoint")
        view = d.add_element("View", "Variability View", parent=vp)
        d.element(view).attributes["note"] = "ação"
        d.write_section(view, "Description", "variability of the domain", "Create")
        d.write_section("general", "Introduction", "intro", "Create")
        d.add_trace(TraceEntry(view, "3-11", "Covers", "note"))
        return d

    def test_round_trip(self):
        d = self._sample()
        assert deserialize(serialize(d)) == d

    def test_deterministic(self):
        assert serialize(self._sample()) == serialize(self._sample())

    def test_canonical_form(self):
        data = serialize(self._sample())
        assert data.endswith(b"\n")
        doc = json.loads(data)
        assert canonical_bytes(doc) == data
        assert "ação".encode() in data

    def test_truncated(self):
        data = serialize(self._sample())
        with pytest.raises(ParseError) as info:
            deserialize(data[: len(data) // 2])
        assert info.value.line is not None

    def test_unknown_field(self):
        doc = json.loads(serialize(self._sample()))
        doc["extra"] = 1
        with pytest.raises(ParseError):
            deserialize(json.dumps(doc))

    def test_floats_rejected(self):
        with pytest.raises(TypeError):
            canonical_bytes({"x": 1.5})

    def test_hash_ignores_version(self):
        d = self._sample()
        h = content_hash(d)
        d.version += 3
        assert content_hash(d) == h
