"""Roadmap from assessment deficiencies to guidelines and their candidate rules.

For each deficient question the advisor looks up the question's element, the
guidelines that list the question, and for each guideline the rules of every
evolution task.  It annotates rules with whether they could run right now
but never runs them; applying a rule is a separate, explicit step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import engine
from .catalog import TASK_ORDER, Catalog, TaskType
from .errors import NoGuideline, RaevolveError
from .fera import (
    Deficiency,
    FeraAssessment,
    Policy,
    QuestionRef,
    QuestionRegistry,
    Severity,
    category_of,
    deficiencies,
)
from .model import ArchitectureDescription, canonical_bytes, display_name


@dataclass(frozen=True)
class RuleOption:
    rule: str
    applicable_now: bool
    reason: str = ""

    def to_dict(self) -> dict:
        return {"rule": self.rule, "applicable_now": self.applicable_now, "reason": self.reason}


@dataclass(frozen=True)
class TaskOption:
    task: TaskType
    rules: tuple[RuleOption, ...]

    @property
    def rule_ids(self) -> list[str]:
        return [r.rule for r in self.rules]

    @property
    def applicable_now(self) -> bool:
        return any(r.applicable_now for r in self.rules)

    def to_dict(self) -> dict:
        return {"task": self.task.value, "rules": [r.to_dict() for r in self.rules],
                "applicable_now": self.applicable_now}


@dataclass(frozen=True)
class GuidelineOption:
    guideline: str
    element: str
    tasks: tuple[TaskOption, ...]

    def task(self, task: TaskType | str) -> TaskOption:
        return next(t for t in self.tasks if t.task is TaskType(task))

    def to_dict(self) -> dict:
        return {"guideline": self.guideline, "element": self.element, "tasks": [t.to_dict() for t in self.tasks]}


@dataclass(frozen=True)
class Recommendation:
    deficiency: Deficiency
    element: str
    guidelines: tuple[GuidelineOption, ...]
    evaluator_comments: tuple[tuple[str, str], ...] = ()
    gap: str | None = None

    @property
    def is_advisory(self) -> bool:
        return self.gap is not None

    @property
    def guideline_ids(self) -> list[str]:
        return [g.guideline for g in self.guidelines]

    def to_dict(self) -> dict:
        return {
            "deficiency": self.deficiency.to_dict(),
            "element": self.element,
            "guidelines": [g.to_dict() for g in self.guidelines],
            "evaluator_comments": [{"role": r, "comments": c} for r, c in self.evaluator_comments],
            "gap": self.gap,
        }


def resolve_question(q, registry: QuestionRegistry, catalog: Catalog) -> tuple[str, list[str]]:
    """(element, guideline ids in catalog order) for a question.

    Raises NoGuideline when the question is registered but no guideline
    lists it.
    """
    ref = QuestionRef.parse(q) if not isinstance(q, QuestionRef) else q
    element = category_of(registry, ref)
    found = catalog.guidelines_for_question(ref)
    if not found:
        raise NoGuideline(str(ref), element)
    return element, found


def _rule_option(catalog: Catalog, rule_id: str, task: TaskType, desc: ArchitectureDescription | None) -> RuleOption:
    rule = catalog.rule(rule_id)
    if rule.event.task is not task:
        return RuleOption(rule_id, False, f"event '{rule.event}' does not match task {task.value}")
    if desc is None:
        return RuleOption(rule_id, False, "no description to check against")
    probe = engine.probe_inputs(rule, desc)
    try:
        engine.dry_run(rule, desc, probe)
    except RaevolveError as exc:
        return RuleOption(rule_id, False, f"{type(exc).__name__}: {exc}")
    return RuleOption(rule_id, True, "dry run succeeds")


def guideline_option(catalog: Catalog, gid: str, desc: ArchitectureDescription | None) -> GuidelineOption:
    g = catalog.guideline(gid)
    tasks = tuple(
        TaskOption(t, tuple(_rule_option(catalog, rid, t, desc) for rid in g.rules_for(t)))
        for t in TASK_ORDER
    )
    return GuidelineOption(g.id, g.element, tasks)


def _comments(assessment: FeraAssessment | None, ref: QuestionRef) -> tuple[tuple[str, str], ...]:
    if assessment is None:
        return ()
    return tuple((a.role, a.comments) for a in assessment.answers_for(ref) if a.comments)


def recommend_for(deficiency: Deficiency, desc: ArchitectureDescription | None, registry: QuestionRegistry,
                  catalog: Catalog, assessment: FeraAssessment | None = None) -> Recommendation:
    comments = _comments(assessment, deficiency.question)
    try:
        element, gids = resolve_question(deficiency.question, registry, catalog)
    except NoGuideline as gap:
        return Recommendation(deficiency, gap.element, (), comments, gap=str(gap))
    options = tuple(guideline_option(catalog, gid, desc) for gid in gids)
    return Recommendation(deficiency, element, options, comments)


def recommend(assessment: FeraAssessment, desc: ArchitectureDescription | None, registry: QuestionRegistry,
              catalog: Catalog, policy: Policy | str = Policy.ANY_NEGATIVE) -> list[Recommendation]:
    """One recommendation per deficiency, in question order."""
    return [recommend_for(d, desc, registry, catalog, assessment) for d in deficiencies(assessment, policy)]


def recommend_question(q, desc: ArchitectureDescription | None, registry: QuestionRegistry, catalog: Catalog,
                       assessment: FeraAssessment | None = None) -> Recommendation:
    """Recommendation for a single question, whether or not it is deficient."""
    ref = QuestionRef.parse(q)
    evidence: tuple[tuple[str, str], ...] = ()
    severity = Severity.NEGATIVE
    if assessment is not None:
        hits = [d for d in deficiencies(assessment) if d.question == ref]
        if hits:
            evidence, severity = hits[0].evidence, hits[0].severity
    deficiency = Deficiency(ref, category_of(registry, ref), severity, evidence)
    return recommend_for(deficiency, desc, registry, catalog, assessment)


# -- reports -----------------------------------------------------------------------


def explain(rec: Recommendation, catalog: Catalog) -> str:
    """Plain-text report; guideline texts are quoted from the catalog as-is."""
    d = rec.deficiency
    lines = [f"Question {d.question} ({d.severity.value}) -> element {display_name(rec.element)}"]
    for role, text in rec.evaluator_comments:
        lines.append(f"  comment from {role}: {text}")
    if rec.is_advisory:
        lines.append(f"  GAP: no guideline in the catalog covers question {d.question}; "
                     f"it maps to element {display_name(rec.element)}")
        return "\n".join(lines) + "\n"
    for option in rec.guidelines:
        g = catalog.guideline(option.guideline)
        lines.append(f"  Guideline {g.id} (element {display_name(g.element)})")
        if g.what_to_do is None:
            lines.append("    What to do: (text not published; index entry only)")
        else:
            lines.append(f"    What to do: {g.what_to_do}")
        for rep in g.how_to_represent:
            lines.append(f"    How to represent ({rep.medium.value}): {rep.advice}")
        if g.how_to_make.needs_analysis_when:
            lines.append(f"    Run architectural analysis first if {g.how_to_make.needs_analysis_when}.")
        for task in option.tasks:
            if not task.rules:
                lines.append(f"    {task.task.value}: -")
                continue
            parts = [f"{r.rule}{' [applicable now]' if r.applicable_now else ''}" for r in task.rules]
            lines.append(f"    {task.task.value}: {'; '.join(parts)}")
    return "\n".join(lines) + "\n"


def report_text(recs: list[Recommendation], catalog: Catalog) -> str:
    if not recs:
        return "No deficiencies.\n"
    return "\n".join(explain(r, catalog) for r in recs)


def report_json(recs: list[Recommendation]) -> bytes:
    return canonical_bytes({"recommendations": [r.to_dict() for r in recs]})


@dataclass
class CoverageEntry:
    question: str
    element: str
    guidelines: list[str] = field(default_factory=list)


def coverage(registry: QuestionRegistry, catalog: Catalog) -> list[CoverageEntry]:
    """Every registered question with the guidelines that cover it."""
    out = []
    for ref in registry:
        out.append(CoverageEntry(str(ref), category_of(registry, ref), catalog.guidelines_for_question(ref)))
    return out


__all__ = [
    "GuidelineOption", "Recommendation", "RuleOption", "TaskOption", "coverage", "explain", "guideline_option",
    "recommend", "recommend_for", "recommend_question", "report_json", "report_text", "resolve_question",
]
