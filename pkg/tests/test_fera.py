from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from raevolve.errors import DuplicateRef, ParseError, UnknownCategory, UnknownQuestion, UnknownRole
from raevolve.fera import (
    ROLES,
    AnswerValue,
    Policy,
    QuestionRef,
    Severity,
    category_of,
    deficiencies,
    load_assessment,
    load_registry,
    seed_registry_document,
)


def answer(q, role="software architect", value="No", comments=""):
    return {"question": q, "role": role, "answer": value, "comments": comments}


def assess(*answers):
    return load_assessment({"architecture": "RA", "answers": list(answers)})


class TestQuestionRef:
    def test_render(self):
        assert str(QuestionRef.parse("3-11")) == "3-11"

    def test_ordering(self):
        refs = sorted(QuestionRef.parse(x) for x in ["3-2", "1-15", "3-11", "2-25"])
        assert [str(r) for r in refs] == ["1-15", "2-25", "3-2", "3-11"]

    @pytest.mark.parametrize("text", ["5-1", "0-0", "3", "x-1", "3-0"])
    def test_invalid(self, text):
        with pytest.raises(ParseError):
            QuestionRef.parse(text)


class TestRegistry:
    def test_seed_entries(self, registry):
        assert category_of(registry, "1-15") == "Viewpoint"
        q = registry.get("2-35")
        assert q.category == "DomainData" and "conformance with the requirements document" in q.text
        assert registry.declared_total == 118

    def test_shared_question_categories(self, registry):
        assert registry.categories_of("2-25") == ("Variability", "Acquisition", "Quality",
                                                 "TechnicalSolution", "DomainData")

    def test_category_of(self, registry):
        assert category_of(registry, "3-11") == "Variability"
        with pytest.raises(UnknownQuestion):
            category_of(registry, "0-0")

    def test_part_five(self):
        with pytest.raises(ParseError):
            load_registry({"questions": [{"ref": "5-1", "categories": ["View"]}]})

    def test_unknown_category(self):
        with pytest.raises(UnknownCategory):
            load_registry({"questions": [{"ref": "1-1", "categories": ["Nope"]}]})

    def test_duplicate(self):
        with pytest.raises(DuplicateRef):
            load_registry({"questions": [{"ref": "1-1", "categories": ["View"]},
                                         {"ref": "1-1", "categories": ["View"]}]})

    def test_malformed_bytes(self):
        with pytest.raises(ParseError):
            load_registry(b'{"questions": [')

    def test_no_invented_texts(self):
        texts = [q for q in seed_registry_document()["questions"] if q["text"]]
        assert {q["ref"] for q in texts} == {"1-15", "2-35"}


class TestAssessment:
    def test_accepts_answer(self):
        a = assess(answer("3-11", comments="variability not documented"))
        assert a.answers[0].answer is AnswerValue.NO

    def test_unknown_question(self):
        with pytest.raises(UnknownQuestion):
            assess(answer("9-1"))

    def test_unregistered_question(self):
        with pytest.raises(UnknownQuestion):
            assess(answer("4-99"))

    def test_unknown_role(self):
        with pytest.raises(UnknownRole):
            assess(answer("3-11", role="astronaut"))

    def test_bad_answer_value(self):
        with pytest.raises(ParseError):
            assess(answer("3-11", value="Maybe"))

    def test_empty(self):
        a = assess()
        assert deficiencies(a) == []

    def test_idempotent(self):
        doc = {"architecture": "RA", "answers": [answer("3-11")]}
        assert load_assessment(doc) == load_assessment(doc)

    def test_seven_roles(self):
        assert len(ROLES) == 7


class TestDeficiencies:
    def test_all_yes(self):
        assert deficiencies(assess(answer("3-11", value="Yes"), answer("1-15", value="Yes"))) == []

    def test_single_no(self):
        [d] = deficiencies(assess(answer("3-11")), Policy.ANY_NEGATIVE)
        assert (str(d.question), d.category, d.severity) == ("3-11", "Variability", Severity.NEGATIVE)

    def test_majority_tie_is_partial(self):
        a = assess(answer("3-11", "software architect", "No"), answer("3-11", "tester", "Yes"))
        [d] = deficiencies(a, "majority")
        assert d.severity is Severity.PARTIAL
        assert d.evidence == (("software architect", ""),)

    def test_majority_outvoted(self):
        a = assess(answer("3-11", "software architect", "No"), answer("3-11", "tester", "Yes"),
                   answer("3-11", "manager", "Yes"))
        assert deficiencies(a, "majority") == []

    def test_partial_only(self):
        [d] = deficiencies(assess(answer("3-11", value="Partial")))
        assert d.severity is Severity.PARTIAL

    def test_not_applicable_ignored(self):
        assert deficiencies(assess(answer("3-11", value="NotApplicable"))) == []

    def test_latest_per_role(self):
        a = assess(answer("3-11", "tester", "No"), answer("3-11", "tester", "Yes"))
        assert deficiencies(a, "latest") == []
        assert len(deficiencies(a, "any-negative")) == 1

    def test_ordered_by_question(self):
        a = assess(answer("3-11"), answer("1-15"), answer("2-25"))
        assert [str(d.question) for d in deficiencies(a)] == ["1-15", "2-25", "3-11"]


_refs = ["1-15", "2-25", "3-11", "3-51", "2-3"]
_answers = st.lists(
    st.fixed_dictionaries({
        "question": st.sampled_from(_refs),
        "role": st.sampled_from(ROLES),
        "answer": st.sampled_from([v.value for v in AnswerValue]),
        "comments": st.text(max_size=5),
    }),
    max_size=12,
)


@settings(max_examples=200, deadline=None)
@given(_answers)
def test_any_negative_contains_majority(answers):
    a = load_assessment({"architecture": "RA", "answers": answers})
    strict = {d.question for d in deficiencies(a, "any-negative")}
    assert {d.question for d in deficiencies(a, "majority")} <= strict
    assert {d.question for d in deficiencies(a, "latest")} <= strict
    for d in deficiencies(a, "majority"):
        assert d.evidence and d.category == category_of(a.registry, d.question)
