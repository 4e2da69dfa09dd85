"""FERA question registry and assessment ingestion, with deficiency detection on top.

Questions are identified as ``<part>-<number>`` with four parts.  The
registry maps each known question to one or more element categories; the
first category is the primary one returned by :func:`category_of`.  A few
questions (``2-25``) are shared by guidelines of several elements, which is
why categories are a list.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from functools import lru_cache, total_ordering
from importlib import resources
from typing import Any

from .errors import DuplicateRef, ParseError, UnknownCategory, UnknownQuestion, UnknownRole
from .model import KindRegistry, parse_json, seed_kinds

DECLARED_TOTAL = 118
PARTS = (1, 2, 3, 4)

ROLES = (
    "software architect",
    "domain expert",
    "manager",
    "developer",
    "software quality assurance specialist",
    "tester",
    "systems analyst",
)

_REF = re.compile(r"^\s*(-?\d+)\s*-\s*(\d+)\s*$")


@total_ordering
@dataclass(frozen=True)
class QuestionRef:
    part: int
    number: int

    def __post_init__(self):
        if self.part not in PARTS:
            raise ParseError(f"question part must be one of {PARTS}, got {self.part}")
        if self.number < 1:
            raise ParseError(f"question number must be positive, got {self.number}")

    @classmethod
    def parse(cls, text: Any) -> QuestionRef:
        if isinstance(text, QuestionRef):
            return text
        m = _REF.match(text) if isinstance(text, str) else None
        if not m:
            raise ParseError(f"question reference {text!r} is not of the form part-number")
        return cls(int(m.group(1)), int(m.group(2)))

    def __str__(self) -> str:
        return f"{self.part}-{self.number}"

    def __lt__(self, other: QuestionRef) -> bool:
        return (self.part, self.number) < (other.part, other.number)


@dataclass(frozen=True)
class Question:
    ref: QuestionRef
    categories: tuple[str, ...]
    text: str | None = None

    @property
    def category(self) -> str:
        return self.categories[0]


@dataclass
class QuestionRegistry:
    entries: dict[QuestionRef, Question]
    declared_total: int = DECLARED_TOTAL

    def __contains__(self, q: object) -> bool:
        try:
            return QuestionRef.parse(q) in self.entries
        except ParseError:
            return False

    def __iter__(self):
        return iter(sorted(self.entries))

    def get(self, q) -> Question:
        try:
            ref = QuestionRef.parse(q)
        except ParseError:
            raise UnknownQuestion(f"unknown question {q!r}") from None
        try:
            return self.entries[ref]
        except KeyError:
            raise UnknownQuestion(f"unknown question {ref}") from None

    def categories_of(self, q) -> tuple[str, ...]:
        return self.get(q).categories


def category_of(registry: QuestionRegistry, q) -> str:
    return registry.get(q).category


def load_registry(doc: dict | bytes | str, kinds: KindRegistry | None = None) -> QuestionRegistry:
    kinds = kinds or seed_kinds()
    if not isinstance(doc, dict):
        doc = parse_json(doc, "question registry")
    items = doc.get("questions") if isinstance(doc, dict) else None
    if not isinstance(items, list):
        raise ParseError("question registry needs a 'questions' array")
    total = doc.get("declared_total", DECLARED_TOTAL)
    if type(total) is not int or total < 1:
        raise ParseError("declared_total must be a positive integer")
    entries: dict[QuestionRef, Question] = {}
    for i, item in enumerate(items):
        if not isinstance(item, dict) or "ref" not in item:
            raise ParseError(f"questions[{i}] needs a 'ref'")
        ref = QuestionRef.parse(item["ref"])
        cats = item.get("categories")
        if cats is None and "category" in item:
            cats = [item["category"]]
        if not isinstance(cats, list) or not cats or not all(isinstance(c, str) for c in cats):
            raise ParseError(f"question {ref} needs a non-empty list of categories")
        if len(set(cats)) != len(cats):
            raise ParseError(f"question {ref} lists a category twice")
        for cat in cats:
            if cat not in kinds:
                raise UnknownCategory(f"question {ref}: unknown category {cat!r}")
        text = item.get("text")
        if text is not None and not isinstance(text, str):
            raise ParseError(f"question {ref}: text must be a string or null")
        if ref in entries:
            raise DuplicateRef(f"question {ref} listed twice")
        entries[ref] = Question(ref, tuple(cats), text)
    if len(entries) > total:
        raise ParseError(f"registry lists {len(entries)} questions, more than the declared {total}")
    return QuestionRegistry(entries, total)


def seed_registry_document() -> dict:
    return json.loads(resources.files("raevolve").joinpath("data/questions.json").read_text("utf-8"))


@lru_cache(maxsize=1)
def seed_registry() -> QuestionRegistry:
    return load_registry(seed_registry_document())


# -- assessments ---------------------------------------------------------------


class AnswerValue(str, enum.Enum):
    YES = "Yes"
    NO = "No"
    PARTIAL = "Partial"
    NOT_APPLICABLE = "NotApplicable"


class Policy(str, enum.Enum):
    ANY_NEGATIVE = "any-negative"
    MAJORITY = "majority"
    LATEST = "latest"


class Severity(str, enum.Enum):
    NEGATIVE = "Negative"
    PARTIAL = "Partial"


@dataclass(frozen=True)
class Answer:
    question: QuestionRef
    role: str
    answer: AnswerValue
    comments: str = ""


@dataclass(frozen=True)
class FeraAssessment:
    architecture: str
    answers: tuple[Answer, ...]
    registry: QuestionRegistry = field(default_factory=seed_registry, compare=False, repr=False)

    def answers_for(self, q) -> list[Answer]:
        ref = QuestionRef.parse(q)
        return [a for a in self.answers if a.question == ref]

    def to_dict(self) -> dict:
        return {
            "architecture": self.architecture,
            "answers": [
                {"question": str(a.question), "role": a.role, "answer": a.answer.value, "comments": a.comments}
                for a in self.answers
            ],
        }


def load_assessment(doc: dict | bytes | str, registry: QuestionRegistry | None = None) -> FeraAssessment:
    registry = registry or seed_registry()
    if not isinstance(doc, dict):
        doc = parse_json(doc, "assessment")
    if not isinstance(doc, dict) or not isinstance(doc.get("answers"), list):
        raise ParseError("assessment needs an 'answers' array")
    architecture = doc.get("architecture", "")
    if not isinstance(architecture, str):
        raise ParseError("architecture must be a string")
    answers = []
    for i, item in enumerate(doc["answers"]):
        if not isinstance(item, dict):
            raise ParseError(f"answers[{i}] must be an object")
        try:
            ref = QuestionRef.parse(item["question"])
        except KeyError:
            raise ParseError(f"answers[{i}] has no question") from None
        except ParseError:
            raise UnknownQuestion(f"answers[{i}]: {item['question']!r} is not a question reference") from None
        if ref not in registry:
            raise UnknownQuestion(f"answers[{i}]: question {ref} is not in the registry")
        role = item.get("role")
        if role not in ROLES:
            raise UnknownRole(f"answers[{i}]: unknown stakeholder role {role!r}")
        try:
            value = AnswerValue(item.get("answer"))
        except ValueError:
            raise ParseError(f"answers[{i}]: answer must be one of {[v.value for v in AnswerValue]}") from None
        comments = item.get("comments", "")
        if not isinstance(comments, str):
            raise ParseError(f"answers[{i}]: comments must be a string")
        answers.append(Answer(ref, role, value, comments))
    return FeraAssessment(architecture, tuple(answers), registry)


@dataclass(frozen=True)
class Deficiency:
    question: QuestionRef
    category: str
    severity: Severity
    evidence: tuple[tuple[str, str], ...]

    def to_dict(self) -> dict:
        return {
            "question": str(self.question),
            "category": self.category,
            "severity": self.severity.value,
            "evidence": [{"role": r, "comments": c} for r, c in self.evidence],
        }


def _counted(answers: list[Answer], policy: Policy) -> list[Answer]:
    counted = [a for a in answers if a.answer is not AnswerValue.NOT_APPLICABLE]
    if policy is Policy.LATEST:
        latest: dict[str, Answer] = {}
        for a in counted:
            latest.pop(a.role, None)
            latest[a.role] = a
        counted = list(latest.values())
    return counted


def _judge(counted: list[Answer], policy: Policy) -> Severity | None:
    negatives = [a for a in counted if a.answer is not AnswerValue.YES]
    if not negatives:
        return None
    any_no = any(a.answer is AnswerValue.NO for a in negatives)
    if policy is Policy.MAJORITY:
        positives = len(counted) - len(negatives)
        if len(negatives) < positives:
            return None
        if len(negatives) == positives:
            return Severity.PARTIAL
    return Severity.NEGATIVE if any_no else Severity.PARTIAL


def deficiencies(assessment: FeraAssessment, policy: Policy | str = Policy.ANY_NEGATIVE) -> list[Deficiency]:
    """One deficiency per question failing under ``policy``, ordered by question.

    ``NotApplicable`` answers never count.  Under ``latest`` only the last
    answer of each role is kept.  A ``majority`` tie yields a Partial
    deficiency rather than none.
    """
    policy = Policy(policy)
    by_question: dict[QuestionRef, list[Answer]] = {}
    for a in assessment.answers:
        by_question.setdefault(a.question, []).append(a)
    out = []
    for ref in sorted(by_question):
        counted = _counted(by_question[ref], policy)
        severity = _judge(counted, policy)
        if severity is None:
            continue
        evidence = tuple((a.role, a.comments) for a in counted if a.answer is not AnswerValue.YES)
        deficiency = Deficiency(ref, category_of(assessment.registry, ref), severity, evidence)
        assert deficiency.evidence and deficiency.category == category_of(assessment.registry, ref)
        out.append(deficiency)
    return out
