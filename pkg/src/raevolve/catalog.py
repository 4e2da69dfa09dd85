"""Guideline catalog: loading and validation, plus lookup through the guideline index.

A catalog is a set of guideline documents (``*.guideline.json``) and
evolution rule documents (``rules/*.rule.json``).  Parsing is lenient:
:func:`check_catalog_docs` reports every schema and consistency problem as
a :class:`~raevolve.model.Violation`, and :func:`load_catalog` raises when
any is found.  Catalog order is the order the guideline documents are given
in (file name order when read from a directory).
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Union

from . import conditions
from .errors import (
    BrokenRuleRef,
    CatalogError,
    ConditionSyntaxError,
    IdFormatError,
    ParseError,
    UnknownGuideline,
    UnknownKind,
    UnknownQuestion,
)
from .fera import QuestionRef, QuestionRegistry, seed_registry
from .model import KindRegistry, Violation, parse_json, seed_kinds, valid_relation

GUIDELINE_ID = re.compile(r"^D_([A-Z][A-Za-z]*(?:_[A-Z][A-Za-z]*)*)_([1-9][0-9]*)$")
RULE_ID = re.compile(r"^R-([a-z]+)-([1-9][0-9]*)$")
PLACEHOLDER = re.compile(r"\{([^{}]*)\}")
INPUT_NAME = re.compile(r"^[a-z][a-z0-9_]*$")
IMPLICIT_INPUTS = frozenset({"rule"})


class TaskType(str, enum.Enum):
    ADDITION = "Addition"
    REMOVAL = "Removal"
    MODIFICATION = "Modification"


TASK_ORDER = (TaskType.ADDITION, TaskType.REMOVAL, TaskType.MODIFICATION)


class Scope(str, enum.Enum):
    ELEMENT = "Element"
    COMPONENT = "Component"


class Medium(str, enum.Enum):
    TEXTUAL = "Textual"
    GRAPHICAL = "Graphical"


class Artifact(str, enum.Enum):
    ARCHITECTURAL_DESCRIPTION = "ArchitecturalDescription"
    TRACEABILITY_MATRIX = "TraceabilityMatrix"


GUIDELINE_FIDELITY = ("published", "index-only")
RULE_FIDELITY = ("full", "summarized")


def element_token(kind: str) -> str:
    """``TechnicalSolution`` -> ``Technical_Solution`` (the guideline id form)."""
    return re.sub(r"(?<!^)(?=[A-Z])", "_", kind)


@dataclass(frozen=True, order=True)
class GuidelineId:
    element: str
    seq: int

    @classmethod
    def parse(cls, text: str) -> GuidelineId:
        m = GUIDELINE_ID.match(text) if isinstance(text, str) else None
        if not m:
            raise IdFormatError(f"guideline id {text!r} does not match D_<Element>_<n>")
        return cls(m.group(1).replace("_", ""), int(m.group(2)))

    def __str__(self) -> str:
        return f"D_{element_token(self.element)}_{self.seq}"


@dataclass(frozen=True, order=True)
class RuleId:
    acronym: str
    seq: int

    @classmethod
    def parse(cls, text: str) -> RuleId:
        m = RULE_ID.match(text) if isinstance(text, str) else None
        if not m:
            raise IdFormatError(f"rule id {text!r} does not match R-<acronym>-<n>")
        return cls(m.group(1), int(m.group(2)))

    def __str__(self) -> str:
        return f"R-{self.acronym}-{self.seq}"


# -- rule vocabulary --------------------------------------------------------------


@dataclass(frozen=True)
class Query:
    kind: str
    name: str | None = None

    def __str__(self) -> str:
        return f'{self.kind} "{self.name}"' if self.name is not None else self.kind


@dataclass(frozen=True)
class Endpoint:
    """Trace endpoint: an element query or an external artifact name."""

    query: Query | None = None
    artifact: str | None = None


@dataclass(frozen=True)
class CreateElement:
    kind: str
    name: str
    parent: Query | None = None
    attributes: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class EnsureElement:
    query: Query
    on_missing: str = "Create"


@dataclass(frozen=True)
class AttachChild:
    parent: Query
    child: Query


@dataclass(frozen=True)
class RemoveElement:
    query: Query


@dataclass(frozen=True)
class WriteSection:
    target: Query | None  # None is the general part of the description
    section: str
    mode: str
    content: str = "{content}"


@dataclass(frozen=True)
class ChooseModelKind:
    prompt: str
    options: tuple[str, ...]
    input: str = "model_kind"


@dataclass(frozen=True)
class UpdateTraceability:
    source: Endpoint
    target: Endpoint
    relation: str
    note: str = ""


@dataclass(frozen=True)
class Conditional:
    predicate: str
    then: tuple[Step, ...]
    otherwise: tuple[Step, ...] = ()


Step = Union[CreateElement, EnsureElement, AttachChild, RemoveElement, WriteSection,
             ChooseModelKind, UpdateTraceability, Conditional]


@dataclass(frozen=True)
class RuleInput:
    name: str
    default: str | None = None
    description: str = ""


@dataclass(frozen=True)
class Event:
    task: TaskType
    element: str
    scope: Scope

    def __str__(self) -> str:
        of = "component of " if self.scope is Scope.COMPONENT else ""
        return f"{self.task.value} {of}{self.element}"


@dataclass(frozen=True)
class EvolutionRule:
    id: str
    event: Event
    condition: str
    action: tuple[Step, ...]
    inputs: tuple[RuleInput, ...] = ()
    fidelity: str = "full"
    summary: str = ""

    def input(self, name: str) -> RuleInput | None:
        return next((i for i in self.inputs if i.name == name), None)

    def parsed_condition(self) -> conditions.Condition:
        return conditions.parse_condition(self.condition)


@dataclass(frozen=True)
class Representation:
    medium: Medium
    advice: str


@dataclass(frozen=True)
class HowToMake:
    needs_analysis_when: str | None
    synthesis: bool


@dataclass(frozen=True)
class Guideline:
    id: str
    element: str
    applicable_questions: tuple[str, ...]
    what_to_do: str | None
    how_to_represent: tuple[Representation, ...]
    how_to_make: HowToMake
    tasks: dict[TaskType, tuple[str, ...]]
    artifacts: tuple[Artifact, ...]
    acronym: str | None = None
    fidelity: str = "published"

    def rules_for(self, task: TaskType) -> tuple[str, ...]:
        return self.tasks.get(TaskType(task), ())

    def question_refs(self) -> list[QuestionRef]:
        return [QuestionRef.parse(q) for q in self.applicable_questions]


@dataclass
class Catalog:
    guidelines: dict[str, Guideline] = field(default_factory=dict)
    rules: dict[str, EvolutionRule] = field(default_factory=dict)

    def guideline(self, gid) -> Guideline:
        try:
            return self.guidelines[str(gid)]
        except KeyError:
            raise UnknownGuideline(f"no guideline {gid}") from None

    def rule(self, rid) -> EvolutionRule:
        try:
            return self.rules[str(rid)]
        except KeyError:
            raise BrokenRuleRef(f"no rule {rid}") from None

    def guidelines_for_question(self, q) -> list[str]:
        try:
            ref = QuestionRef.parse(q)
        except ParseError:
            return []
        out = []
        for g in self.guidelines.values():
            for text in g.applicable_questions:
                try:
                    if QuestionRef.parse(text) == ref:
                        out.append(g.id)
                        break
                except ParseError:
                    continue
        return out

    def rules_for(self, gid, task) -> list[EvolutionRule]:
        g = self.guideline(gid)
        return [self.rule(r) for r in g.rules_for(TaskType(task))]

    def owners_of(self, rule_id: str) -> list[tuple[str, TaskType]]:
        return [(g.id, t) for g in self.guidelines.values() for t in TASK_ORDER if rule_id in g.rules_for(t)]


def guidelines_for_question(catalog: Catalog, q) -> list[str]:
    return catalog.guidelines_for_question(q)


def rules_for(catalog: Catalog, gid, task) -> list[EvolutionRule]:
    return catalog.rules_for(gid, task)


# -- parsing ------------------------------------------------------------------------


class _SchemaError(Exception):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


def _obj(d: Any, path: str, required: Iterable[str], optional: Iterable[str] = ()) -> dict:
    if not isinstance(d, dict):
        raise _SchemaError(path, "must be an object")
    required, optional = set(required), set(optional)
    missing = required - set(d)
    if missing:
        raise _SchemaError(path, f"missing field(s) {sorted(missing)}")
    extra = set(d) - required - optional
    if extra:
        raise _SchemaError(path, f"unexpected field(s) {sorted(extra)}")
    return d


def _text(d: Any, path: str, *, nonempty: bool = True) -> str:
    if not isinstance(d, str):
        raise _SchemaError(path, "must be a string")
    if nonempty and not d.strip():
        raise _SchemaError(path, "must not be empty")
    return d


def _list(d: Any, path: str) -> list:
    if not isinstance(d, list):
        raise _SchemaError(path, "must be an array")
    return d


def _enum(cls, d: Any, path: str):
    try:
        return cls(d)
    except ValueError:
        raise _SchemaError(path, f"{d!r} is not one of {[m.value for m in cls]}") from None


def _query(d: Any, path: str) -> Query:
    d = _obj(d, path, ["kind"], ["name"])
    name = _text(d["name"], f"{path}.name") if "name" in d else None
    return Query(_text(d["kind"], f"{path}.kind"), name)


def _endpoint(d: Any, path: str) -> Endpoint:
    if isinstance(d, dict) and "query" in d:
        d = _obj(d, path, ["query"])
        return Endpoint(query=_query(d["query"], f"{path}.query"))
    d = _obj(d, path, ["artifact"])
    return Endpoint(artifact=_text(d["artifact"], f"{path}.artifact"))


def _steps(d: Any, path: str) -> tuple[Step, ...]:
    return tuple(_step(s, f"{path}[{i}]") for i, s in enumerate(_list(d, path)))


def _step(d: Any, path: str) -> Step:
    if not isinstance(d, dict) or "step" not in d:
        raise _SchemaError(path, "must be an object with a 'step' field")
    kind = d["step"]
    if kind == "CreateElement":
        _obj(d, path, ["step", "kind", "name"], ["parent", "attributes"])
        attrs = d.get("attributes", {})
        if not isinstance(attrs, dict):
            raise _SchemaError(f"{path}.attributes", "must be an object")
        return CreateElement(
            _text(d["kind"], f"{path}.kind"),
            _text(d["name"], f"{path}.name"),
            _query(d["parent"], f"{path}.parent") if "parent" in d else None,
            tuple((_text(k, f"{path}.attributes"), _text(v, f"{path}.attributes.{k}")) for k, v in sorted(attrs.items())),
        )
    if kind == "EnsureElement":
        _obj(d, path, ["step", "query", "on_missing"])
        on_missing = _text(d["on_missing"], f"{path}.on_missing")
        if on_missing not in ("Create", "Fail"):
            raise _SchemaError(f"{path}.on_missing", "must be Create or Fail")
        return EnsureElement(_query(d["query"], f"{path}.query"), on_missing)
    if kind == "AttachChild":
        _obj(d, path, ["step", "parent", "child"])
        return AttachChild(_query(d["parent"], f"{path}.parent"), _query(d["child"], f"{path}.child"))
    if kind == "RemoveElement":
        _obj(d, path, ["step", "query"])
        return RemoveElement(_query(d["query"], f"{path}.query"))
    if kind == "WriteSection":
        _obj(d, path, ["step", "target", "section", "mode", "content"])
        target = None if d["target"] == "general" else _query(d["target"], f"{path}.target")
        mode = _text(d["mode"], f"{path}.mode")
        if mode not in ("Create", "Replace", "Append"):
            raise _SchemaError(f"{path}.mode", "must be Create, Replace or Append")
        return WriteSection(target, _text(d["section"], f"{path}.section"), mode, _text(d["content"], f"{path}.content"))
    if kind == "ChooseModelKind":
        _obj(d, path, ["step", "prompt", "options", "input"])
        options = tuple(_text(o, f"{path}.options[{i}]") for i, o in enumerate(_list(d["options"], f"{path}.options")))
        return ChooseModelKind(_text(d["prompt"], f"{path}.prompt"), options, _text(d["input"], f"{path}.input"))
    if kind == "UpdateTraceability":
        _obj(d, path, ["step", "source", "target", "relation"], ["note"])
        note = _text(d.get("note", ""), f"{path}.note", nonempty=False)
        return UpdateTraceability(
            _endpoint(d["source"], f"{path}.source"),
            _endpoint(d["target"], f"{path}.target"),
            _text(d["relation"], f"{path}.relation"),
            note,
        )
    if kind == "Conditional":
        _obj(d, path, ["step", "predicate", "then", "else"])
        return Conditional(
            _text(d["predicate"], f"{path}.predicate"),
            _steps(d["then"], f"{path}.then"),
            _steps(d["else"], f"{path}.else"),
        )
    raise _SchemaError(f"{path}.step", f"unknown step type {kind!r}")


def parse_rule(d: Any, path: str = "rule") -> EvolutionRule:
    _obj(d, path, ["id", "event", "condition", "action", "inputs", "fidelity", "summary"])
    ev = _obj(d["event"], f"{path}.event", ["task", "element", "scope"])
    inputs = []
    for i, item in enumerate(_list(d["inputs"], f"{path}.inputs")):
        p = f"{path}.inputs[{i}]"
        _obj(item, p, ["name"], ["default", "description"])
        default = _text(item["default"], f"{p}.default") if "default" in item else None
        inputs.append(RuleInput(_text(item["name"], f"{p}.name"), default,
                                _text(item.get("description", ""), f"{p}.description", nonempty=False)))
    fidelity = _text(d["fidelity"], f"{path}.fidelity")
    if fidelity not in RULE_FIDELITY:
        raise _SchemaError(f"{path}.fidelity", f"must be one of {RULE_FIDELITY}")
    return EvolutionRule(
        id=_text(d["id"], f"{path}.id"),
        event=Event(_enum(TaskType, ev["task"], f"{path}.event.task"),
                    _text(ev["element"], f"{path}.event.element"),
                    _enum(Scope, ev["scope"], f"{path}.event.scope")),
        condition=_text(d["condition"], f"{path}.condition", nonempty=False),
        action=_steps(d["action"], f"{path}.action"),
        inputs=tuple(inputs),
        fidelity=fidelity,
        summary=_text(d["summary"], f"{path}.summary"),
    )


def parse_guideline(d: Any, path: str = "guideline") -> Guideline:
    _obj(d, path, ["id", "element", "applicable_questions", "what_to_do", "how_to_represent",
                   "how_to_make", "tasks", "artifacts", "fidelity"], ["acronym"])
    fidelity = _text(d["fidelity"], f"{path}.fidelity")
    if fidelity not in GUIDELINE_FIDELITY:
        raise _SchemaError(f"{path}.fidelity", f"must be one of {GUIDELINE_FIDELITY}")
    what = d["what_to_do"]
    if what is not None:
        what = _text(what, f"{path}.what_to_do")
    reps = []
    for i, r in enumerate(_list(d["how_to_represent"], f"{path}.how_to_represent")):
        p = f"{path}.how_to_represent[{i}]"
        _obj(r, p, ["medium", "advice"])
        reps.append(Representation(_enum(Medium, r["medium"], f"{p}.medium"), _text(r["advice"], f"{p}.advice")))
    htm = _obj(d["how_to_make"], f"{path}.how_to_make", ["needs_analysis_when", "synthesis"])
    analysis = htm["needs_analysis_when"]
    if analysis is not None:
        analysis = _text(analysis, f"{path}.how_to_make.needs_analysis_when")
    if not isinstance(htm["synthesis"], bool):
        raise _SchemaError(f"{path}.how_to_make.synthesis", "must be a boolean")
    tasks_doc = _obj(d["tasks"], f"{path}.tasks", [t.value for t in TASK_ORDER])
    tasks = {
        t: tuple(_text(r, f"{path}.tasks.{t.value}[{i}]") for i, r in enumerate(_list(tasks_doc[t.value], f"{path}.tasks.{t.value}")))
        for t in TASK_ORDER
    }
    acronym = _text(d["acronym"], f"{path}.acronym") if "acronym" in d else None
    return Guideline(
        id=_text(d["id"], f"{path}.id"),
        element=_text(d["element"], f"{path}.element"),
        applicable_questions=tuple(
            _text(q, f"{path}.applicable_questions[{i}]")
            for i, q in enumerate(_list(d["applicable_questions"], f"{path}.applicable_questions"))
        ),
        what_to_do=what,
        how_to_represent=tuple(reps),
        how_to_make=HowToMake(analysis, htm["synthesis"]),
        tasks=tasks,
        artifacts=tuple(_enum(Artifact, a, f"{path}.artifacts[{i}]")
                        for i, a in enumerate(_list(d["artifacts"], f"{path}.artifacts"))),
        acronym=acronym,
        fidelity=fidelity,
    )


# -- validation ---------------------------------------------------------------------


def placeholders(template: str) -> list[str]:
    return PLACEHOLDER.findall(template)


def _iter_steps(steps: Iterable[Step], path: str):
    for i, s in enumerate(steps):
        p = f"{path}[{i}]"
        yield p, s
        if isinstance(s, Conditional):
            yield from _iter_steps(s.then, f"{p}.then")
            yield from _iter_steps(s.otherwise, f"{p}.else")


def step_templates(step: Step) -> list[tuple[str, str]]:
    """(field, template) pairs of a step, excluding nested branches."""
    out: list[tuple[str, str]] = []

    def q(field_name: str, query: Query | None):
        if query is not None and query.name is not None:
            out.append((f"{field_name}.name", query.name))

    if isinstance(step, CreateElement):
        out.append(("name", step.name))
        q("parent", step.parent)
        out.extend((f"attributes.{k}", v) for k, v in step.attributes)
    elif isinstance(step, (EnsureElement, RemoveElement)):
        q("query", step.query)
    elif isinstance(step, AttachChild):
        q("parent", step.parent)
        q("child", step.child)
    elif isinstance(step, WriteSection):
        q("target", step.target)
        out.append(("section", step.section))
        out.append(("content", step.content))
    elif isinstance(step, UpdateTraceability):
        for label, ep in (("source", step.source), ("target", step.target)):
            if ep.query is not None:
                q(f"{label}.query", ep.query)
            else:
                out.append((f"{label}.artifact", ep.artifact))
        out.append(("note", step.note))
    elif isinstance(step, Conditional):
        try:
            out.extend(("predicate", s) for s in conditions.strings_in(conditions.parse_condition(step.predicate)))
        except ConditionSyntaxError:
            pass
    return out


def step_kinds(step: Step) -> list[tuple[str, str]]:
    if isinstance(step, CreateElement):
        pairs = [("kind", step.kind)]
        if step.parent is not None:
            pairs.append(("parent.kind", step.parent.kind))
        return pairs
    if isinstance(step, (EnsureElement, RemoveElement)):
        return [("query.kind", step.query.kind)]
    if isinstance(step, AttachChild):
        return [("parent.kind", step.parent.kind), ("child.kind", step.child.kind)]
    if isinstance(step, WriteSection):
        return [("target.kind", step.target.kind)] if step.target is not None else []
    if isinstance(step, UpdateTraceability):
        return [(f"{lbl}.query.kind", ep.query.kind) for lbl, ep in (("source", step.source), ("target", step.target))
                if ep.query is not None]
    if isinstance(step, Conditional):
        try:
            return [("predicate", k) for k in sorted(conditions.kinds_in(conditions.parse_condition(step.predicate)))]
        except ConditionSyntaxError:
            return []
    return []


def validate_rule(rule: EvolutionRule, kinds: KindRegistry) -> list[Violation]:
    out: list[Violation] = []
    subject = rule.id

    def bad(invariant: str, message: str):
        out.append(Violation(subject, invariant, message))

    if not RULE_ID.match(rule.id):
        bad("id-format", f"rule id {rule.id!r} does not match R-<acronym>-<n>")
    if rule.event.element not in kinds:
        bad("unknown-kind", f"event element {rule.event.element!r} is not a registered kind")
    elif not kinds.get(rule.event.element).evolvable:
        bad("not-evolvable", f"event element {rule.event.element!r} is not evolvable")

    declared = set(IMPLICIT_INPUTS)
    for item in rule.inputs:
        if not INPUT_NAME.match(item.name) or item.name in IMPLICIT_INPUTS:
            bad("input-name", f"invalid input name {item.name!r}")
        if item.name in declared and item.name not in IMPLICIT_INPUTS:
            bad("input-name", f"input {item.name!r} declared twice")
        declared.add(item.name)
        if item.default is not None and placeholders(item.default):
            bad("input-default", f"default of {item.name!r} must be literal text")

    def check_template(where: str, template: str):
        for ph in placeholders(template):
            if ph not in declared:
                bad("undeclared-input", f"{where} references undeclared input {{{ph}}}")
        if template.count("{") != template.count("}"):
            bad("template", f"{where} has unbalanced braces")

    try:
        cond = conditions.parse_condition(rule.condition)
        for k in conditions.kinds_in(cond):
            if k not in kinds:
                bad("unknown-kind", f"condition names unknown kind {k!r}")
        for s in conditions.strings_in(cond):
            check_template("condition", s)
    except ConditionSyntaxError as exc:
        bad("condition-syntax", f"condition does not parse: {exc}")

    if not rule.action:
        bad("empty-action", "action list is empty")
    choose_inputs: dict[str, tuple[str, ...]] = {}
    for path, step in _iter_steps(rule.action, "action"):
        for where, kind in step_kinds(step):
            if kind not in kinds:
                bad("unknown-kind", f"{path}.{where}: unknown kind {kind!r}")
        for where, template in step_templates(step):
            check_template(f"{path}.{where}", template)
        if isinstance(step, CreateElement) and not step.name.strip():
            bad("template", f"{path}.name is empty")
        if isinstance(step, ChooseModelKind):
            if not step.options:
                bad("choose-options", f"{path}: no options to choose from")
            if len(set(step.options)) != len(step.options):
                bad("choose-options", f"{path}: duplicate options")
            if step.input not in declared or step.input in IMPLICIT_INPUTS:
                bad("undeclared-input", f"{path}: choice input {step.input!r} is not declared")
            decl = rule.input(step.input)
            if decl is not None and decl.default is not None and decl.default not in step.options:
                bad("choose-options", f"{path}: default {decl.default!r} is not an option")
            choose_inputs[step.input] = step.options
        if isinstance(step, UpdateTraceability) and not valid_relation(step.relation):
            bad("relation", f"{path}: invalid relation kind {step.relation!r}")
        if isinstance(step, Conditional):
            try:
                conditions.parse_condition(step.predicate)
            except ConditionSyntaxError as exc:
                bad("condition-syntax", f"{path}: predicate does not parse: {exc}")
            if not step.then and not step.otherwise:
                bad("empty-action", f"{path}: both branches are empty")
    return out


def validate_guideline(g: Guideline, kinds: KindRegistry, registry: QuestionRegistry) -> list[Violation]:
    out: list[Violation] = []

    def bad(invariant: str, message: str):
        out.append(Violation(g.id, invariant, message))

    m = GUIDELINE_ID.match(g.id)
    if not m:
        bad("id-format", f"guideline id {g.id!r} does not match D_<Element>_<n>")
    elif m.group(1) != element_token(g.element):
        bad("id-element", f"id names element {m.group(1)!r} but element is {g.element!r}")
    element_ok = g.element in kinds
    if not element_ok:
        bad("unknown-kind", f"element {g.element!r} is not a registered kind")
    elif not kinds.get(g.element).evolvable:
        bad("not-evolvable", f"element {g.element!r} is not evolvable")
    if g.acronym is not None and not re.fullmatch(r"[a-z]+", g.acronym):
        bad("acronym", f"acronym {g.acronym!r} must be a lowercase token")

    if g.fidelity == "published":
        if not g.what_to_do:
            bad("what-to-do", "published guideline needs what_to_do text")
        if not g.how_to_represent:
            bad("how-to-represent", "published guideline needs at least one representation")
    else:
        if g.what_to_do is not None or g.how_to_represent:
            bad("fidelity", "index-only guideline must not carry what_to_do/how_to_represent text")

    if not g.applicable_questions:
        bad("questions", "no applicable questions")
    seen: set[QuestionRef] = set()
    for text in g.applicable_questions:
        try:
            ref = QuestionRef.parse(text)
        except ParseError:
            bad("questions", f"{text!r} is not a question reference")
            continue
        if ref in seen:
            bad("questions", f"question {ref} listed twice")
        seen.add(ref)
        if str(ref) != text:
            bad("questions", f"question {text!r} is not in canonical form {ref}")
        if ref not in registry:
            bad("unknown-question", f"question {ref} is not in the registry")
        elif element_ok and g.element not in registry.categories_of(ref):
            bad("question-category", f"question {ref} is categorised {list(registry.categories_of(ref))}, not {g.element}")

    total = 0
    for task in TASK_ORDER:
        ids = g.rules_for(task)
        total += len(ids)
        if len(set(ids)) != len(ids):
            bad("rule-ref", f"{task.value} lists a rule twice")
        for rid in ids:
            if not RULE_ID.match(rid):
                bad("id-format", f"{task.value} rule id {rid!r} does not match R-<acronym>-<n>")
    if total == 0:
        bad("tasks", "guideline lists no evolution rules")
    if not g.artifacts:
        bad("artifacts", "no artifacts involved")
    if len(set(g.artifacts)) != len(g.artifacts):
        bad("artifacts", "artifact listed twice")
    return out


def validate_catalog(catalog: Catalog, registry: QuestionRegistry | None = None,
                     kinds: KindRegistry | None = None) -> list[Violation]:
    """Every structural and cross-reference violation; empty for a sound catalog."""
    registry = registry or seed_registry()
    kinds = kinds or seed_kinds()
    out: list[Violation] = []
    for g in catalog.guidelines.values():
        out.extend(validate_guideline(g, kinds, registry))
    for r in catalog.rules.values():
        out.extend(validate_rule(r, kinds))
    referenced: set[str] = set()
    for g in catalog.guidelines.values():
        for task in TASK_ORDER:
            for rid in g.rules_for(task):
                referenced.add(rid)
                rule = catalog.rules.get(rid)
                if rule is None:
                    if RULE_ID.match(rid):
                        out.append(Violation(g.id, "broken-rule-ref", f"{task.value} rule {rid} does not exist"))
                    continue
                if rule.event.task is not task:
                    out.append(Violation(g.id, "event-task", f"{rid} is listed under {task.value} but its event task is {rule.event.task.value}"))
                if rule.event.element != g.element:
                    out.append(Violation(g.id, "event-element", f"{rid} triggers on {rule.event.element}, guideline element is {g.element}"))
    for rid in catalog.rules:
        if rid not in referenced:
            out.append(Violation(rid, "orphan-rule", "rule is not referenced by any guideline"))
    return out


def catalog_warnings(catalog: Catalog) -> list[Violation]:
    """Non-fatal findings: rules shared across acronym families."""
    out = []
    for g in catalog.guidelines.values():
        if g.acronym is None:
            continue
        for task in TASK_ORDER:
            for rid in g.rules_for(task):
                m = RULE_ID.match(rid)
                if m and m.group(1) != g.acronym:
                    out.append(Violation(g.id, "acronym-family",
                                         f"{rid} belongs to acronym family {m.group(1)!r}, guideline family is {g.acronym!r}"))
    return out


_ERROR_FOR = {
    "schema": ParseError,
    "id-format": IdFormatError,
    "broken-rule-ref": BrokenRuleRef,
    "unknown-question": UnknownQuestion,
    "unknown-kind": UnknownKind,
}


def build_catalog(guideline_docs: Iterable[Any], rule_docs: Iterable[Any]) -> tuple[Catalog, list[Violation]]:
    """Parse documents leniently; schema problems come back as violations."""
    catalog = Catalog()
    out: list[Violation] = []
    for i, doc in enumerate(rule_docs):
        label = doc.get("id") if isinstance(doc, dict) and isinstance(doc.get("id"), str) else f"rules[{i}]"
        try:
            rule = parse_rule(doc, label)
        except _SchemaError as exc:
            out.append(Violation(label, "schema", str(exc)))
            continue
        if rule.id in catalog.rules:
            out.append(Violation(rule.id, "duplicate-id", "rule id defined twice"))
            continue
        catalog.rules[rule.id] = rule
    for i, doc in enumerate(guideline_docs):
        label = doc.get("id") if isinstance(doc, dict) and isinstance(doc.get("id"), str) else f"guidelines[{i}]"
        try:
            g = parse_guideline(doc, label)
        except _SchemaError as exc:
            out.append(Violation(label, "schema", str(exc)))
            continue
        if g.id in catalog.guidelines:
            out.append(Violation(g.id, "duplicate-id", "guideline id defined twice"))
            continue
        catalog.guidelines[g.id] = g
    return catalog, out


def check_catalog_docs(guideline_docs, rule_docs, registry: QuestionRegistry | None = None,
                       kinds: KindRegistry | None = None) -> list[Violation]:
    catalog, out = build_catalog(guideline_docs, rule_docs)
    return out + validate_catalog(catalog, registry, kinds)


def load_catalog(guideline_docs, rule_docs, registry: QuestionRegistry | None = None,
                 kinds: KindRegistry | None = None) -> Catalog:
    catalog, out = build_catalog(guideline_docs, rule_docs)
    out += validate_catalog(catalog, registry, kinds)
    if out:
        first = out[0]
        exc_type = _ERROR_FOR.get(first.invariant, CatalogError)
        message = f"catalog has {len(out)} violation(s); first: {first}"
        if issubclass(exc_type, CatalogError):
            raise exc_type(message, out)
        err = exc_type(message)
        err.violations = out
        raise err
    return catalog


def read_catalog_dir(root: str | Path) -> tuple[list[dict], list[dict]]:
    root = Path(root)
    guideline_docs = [parse_json(p.read_bytes(), p.name) for p in sorted(root.glob("*.guideline.json"))]
    rule_docs = [parse_json(p.read_bytes(), p.name) for p in sorted((root / "rules").glob("*.rule.json"))]
    return guideline_docs, rule_docs


def load_catalog_dir(root: str | Path, registry: QuestionRegistry | None = None,
                     kinds: KindRegistry | None = None) -> Catalog:
    return load_catalog(*read_catalog_dir(root), registry, kinds)


def seed_catalog_root():
    return resources.files("raevolve").joinpath("data/catalog")


def seed_catalog_docs() -> tuple[list[dict], list[dict]]:
    root = seed_catalog_root()
    gs = sorted((p for p in root.iterdir() if p.name.endswith(".guideline.json")), key=lambda p: p.name)
    rs = sorted((p for p in root.joinpath("rules").iterdir() if p.name.endswith(".rule.json")), key=lambda p: p.name)
    return [json.loads(p.read_text("utf-8")) for p in gs], [json.loads(p.read_text("utf-8")) for p in rs]


@lru_cache(maxsize=1)
def seed_catalog() -> Catalog:
    return load_catalog(*seed_catalog_docs())


# -- index --------------------------------------------------------------------------


@dataclass(frozen=True)
class IndexRow:
    element: str
    guideline: str
    questions: tuple[str, ...]
    task: TaskType
    rules: tuple[str, ...]

    def to_dict(self) -> dict:
        return {"element": self.element, "guideline": self.guideline, "questions": list(self.questions),
                "task": self.task.value, "rules": list(self.rules)}


@dataclass(frozen=True)
class CatalogIndex:
    rows: tuple[IndexRow, ...]

    def to_dict(self) -> dict:
        return {"rows": [r.to_dict() for r in self.rows]}

    def groups(self) -> dict[str, dict[str, list[IndexRow]]]:
        out: dict[str, dict[str, list[IndexRow]]] = {}
        for row in self.rows:
            out.setdefault(row.element, {}).setdefault(row.guideline, []).append(row)
        return out

    def to_table(self) -> str:
        from .model import display_name

        header = ("Element", "Guideline", "Questions", "Task", "Rules")
        lines = []
        for element, guidelines in self.groups().items():
            first_el = True
            for gid, rows in guidelines.items():
                for j, row in enumerate(rows):
                    lines.append((
                        display_name(element) if first_el else "",
                        gid if j == 0 else "",
                        "; ".join(row.questions) if j == 0 else "",
                        row.task.value,
                        "; ".join(row.rules) or "-",
                    ))
                    first_el = False
        widths = [max(len(h), *(len(l[i]) for l in lines)) if lines else len(h) for i, h in enumerate(header)]
        fmt = " | ".join(f"{{:<{w}}}" for w in widths)
        out = [fmt.format(*header), "-+-".join("-" * w for w in widths)]
        out += [fmt.format(*l).rstrip() for l in lines]
        return "\n".join(out) + "\n"


def render_index(catalog: Catalog) -> CatalogIndex:
    by_element: dict[str, list[Guideline]] = {}
    for g in catalog.guidelines.values():
        by_element.setdefault(g.element, []).append(g)
    rows = [
        IndexRow(element, g.id, tuple(g.applicable_questions), task, tuple(g.rules_for(task)))
        for element, gs in by_element.items()
        for g in gs
        for task in TASK_ORDER
    ]
    return CatalogIndex(tuple(rows))
