"""Execution of evolution rules as atomic, reversible change sets.

A rule runs against a private copy of the description.  Only when every
step succeeded is the copy's state moved into the caller's description, so
a failure at any step leaves the original untouched.  The resulting
:class:`ChangeSet` carries before/after snapshots of everything the rule
touched; that is enough both to replay it on an equal pre-state and to undo
it on the post-state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from . import conditions
from .catalog import (
    PLACEHOLDER,
    AttachChild,
    ChooseModelKind,
    Conditional,
    CreateElement,
    EnsureElement,
    Event,
    EvolutionRule,
    Query,
    RemoveElement,
    Scope,
    Step,
    TaskType,
    UpdateTraceability,
    WriteSection,
    _iter_steps,
)
from .errors import (
    ConditionNotMet,
    EventMismatch,
    HashMismatch,
    InjectedFault,
    InvalidInput,
    MissingInput,
    ParseError,
    QueryAmbiguous,
    RaevolveError,
    SectionNotFound,
    StepFailure,
    TargetNotFound,
)
from .model import (
    GENERAL,
    ArchitectureDescription,
    TraceEntry,
    WriteMode,
    content_hash,
    element_from_dict,
    element_to_dict,
    section_to_dict,
    trace_from_dict,
    trace_to_dict,
    _section_from,
)

CHANGESET_FORMAT = "raevolve/changeset@1"


# -- event and condition -----------------------------------------------------------


def as_event(request: Event | dict) -> Event:
    if isinstance(request, Event):
        return request
    return Event(TaskType(request["task"]), request["element"], Scope(request.get("scope", "Element")))


def check_event(rule: EvolutionRule, request: Event | dict) -> bool:
    req = as_event(request)
    ev = rule.event
    return (ev.task, ev.element, ev.scope) == (req.task, req.element, req.scope)


@dataclass(frozen=True)
class ConditionResult:
    holds: bool
    explanation: str

    def __bool__(self) -> bool:
        return self.holds


def _defaults(rule: EvolutionRule) -> dict[str, str]:
    out = {i.name: i.default for i in rule.inputs if i.default is not None}
    out["rule"] = rule.id
    return out


def check_condition(rule: EvolutionRule, desc: ArchitectureDescription,
                    inputs: dict[str, str] | None = None) -> ConditionResult:
    values = {**_defaults(rule), **(inputs or {})}
    holds, why = conditions.evaluate(rule.parsed_condition(), desc, lambda s: _render(s, values, strict=False))
    return ConditionResult(holds, why)


# -- inputs ------------------------------------------------------------------------


def _render(template: str, values: dict[str, str], strict: bool = True) -> str:
    def sub(m):
        key = m.group(1)
        if key in values:
            return values[key]
        if strict:
            raise MissingInput(f"no binding for placeholder {{{key}}}")
        return m.group(0)

    return PLACEHOLDER.sub(sub, template)


def _choices(rule: EvolutionRule) -> list[ChooseModelKind]:
    return [s for _, s in _iter_steps(rule.action, "action") if isinstance(s, ChooseModelKind)]


def bind_inputs(rule: EvolutionRule, inputs: dict[str, str] | None) -> dict[str, str]:
    """Merge defaults with supplied values and check completeness."""
    inputs = dict(inputs or {})
    declared = {i.name for i in rule.inputs}
    for key, value in inputs.items():
        if key not in declared:
            raise InvalidInput(f"{rule.id} declares no input {key!r}")
        if not isinstance(value, str):
            raise InvalidInput(f"input {key!r} must be text")
    values = {**_defaults(rule), **inputs}
    missing = [i.name for i in rule.inputs if i.name not in values]
    if missing:
        raise MissingInput(f"{rule.id} needs input(s): {', '.join(missing)}")
    for choose in _choices(rule):
        if values[choose.input] not in choose.options:
            raise InvalidInput(f"{choose.input}={values[choose.input]!r} is not one of {list(choose.options)}")
    return values


def _query_inputs(rule: EvolutionRule) -> dict[str, str]:
    """Inputs used verbatim as the name of an element query, mapped to the kind."""
    out: dict[str, str] = {}
    for _, step in _iter_steps(rule.action, "action"):
        queries: list[Query] = []
        if isinstance(step, (EnsureElement, RemoveElement)):
            queries.append(step.query)
        elif isinstance(step, AttachChild):
            queries += [step.parent, step.child]
        elif isinstance(step, WriteSection) and step.target is not None:
            queries.append(step.target)
        for q in queries:
            m = PLACEHOLDER.fullmatch(q.name or "")
            if m:
                out.setdefault(m.group(1), q.kind)
    return out


def probe_inputs(rule: EvolutionRule, desc: ArchitectureDescription | None = None) -> dict[str, str]:
    """Stand-in values for required inputs, used to pre-check applicability.

    Choices take their first option; a name that selects an existing element
    takes the first such element's name; anything else gets a marker text.
    """
    probe: dict[str, str] = {}
    options = {c.input: c.options[0] for c in _choices(rule)}
    by_query = _query_inputs(rule)
    for item in rule.inputs:
        if item.default is not None:
            continue
        if item.name in options:
            probe[item.name] = options[item.name]
        elif desc is not None and item.name in by_query:
            ids = desc.find_elements(by_query[item.name])
            probe[item.name] = desc.elements[ids[0]].name if ids else f"<{item.name}>"
        else:
            probe[item.name] = f"<{item.name}>"
    return probe


# -- change sets ---------------------------------------------------------------------


@dataclass(frozen=True)
class ExecutionPlan:
    rule: str
    inputs: dict[str, str]
    steps: tuple[dict, ...]

    def to_dict(self) -> dict:
        return {"rule": self.rule, "inputs": dict(self.inputs), "steps": [dict(s) for s in self.steps]}

    def lines(self) -> list[str]:
        return [describe_entry(e) for e in self.steps]


@dataclass(frozen=True)
class ChangeSet:
    id: str
    rule: str
    inputs: dict[str, str]
    steps_applied: tuple[dict, ...]
    delta: dict
    pre_hash: str
    post_hash: str
    reverts: str | None = None

    def to_dict(self) -> dict:
        return {
            "format": CHANGESET_FORMAT,
            "id": self.id,
            "rule": self.rule,
            "inputs": dict(self.inputs),
            "steps_applied": [dict(s) for s in self.steps_applied],
            "delta": self.delta,
            "pre_hash": self.pre_hash,
            "post_hash": self.post_hash,
            "reverts": self.reverts,
        }

    def summary(self) -> list[str]:
        d = self.delta
        out = [f"{self.id}: {self.rule}" + (f" (reverts {self.reverts})" if self.reverts else "")]
        for label, key in (("added", "elements_added"), ("removed", "elements_removed"),
                           ("modified", "elements_modified")):
            if d[key]:
                out.append(f"  elements {label}: {', '.join(d[key])}")
        for w in d["sections_written"]:
            out.append(f"  section {w['mode'].lower()}: {w['target']} / {w['section']}")
        for t in d["traces_added"]:
            out.append(f"  trace added: {t['source']} -{t['relation']}-> {t['target']}")
        for t in d["traces_removed"]:
            out.append(f"  trace removed: {t['source']} -{t['relation']}-> {t['target']}")
        return out


def changeset_from_dict(doc: Any) -> ChangeSet:
    fields = {"format", "id", "rule", "inputs", "steps_applied", "delta", "pre_hash", "post_hash", "reverts"}
    if not isinstance(doc, dict) or set(doc) != fields:
        raise ParseError(f"change set must have exactly the fields {sorted(fields)}")
    if doc["format"] != CHANGESET_FORMAT:
        raise ParseError(f"unsupported change set format {doc['format']!r}")
    if not isinstance(doc["delta"], dict) or not isinstance(doc["steps_applied"], list):
        raise ParseError("malformed change set body")
    return ChangeSet(doc["id"], doc["rule"], dict(doc["inputs"]), tuple(doc["steps_applied"]), doc["delta"],
                     doc["pre_hash"], doc["post_hash"], doc["reverts"])


def _snapshot(desc: ArchitectureDescription) -> dict:
    return {
        "elements": {k: element_to_dict(v) for k, v in desc.elements.items()},
        "general_sections": [section_to_dict(s) for s in desc.general_sections],
        "traceability": [trace_to_dict(t) for t in desc.traceability],
        "changesets": list(desc.changesets),
        "next_id": desc.next_id,
    }


def compute_delta(before: ArchitectureDescription, after: ArchitectureDescription,
                  written: list[dict] | None = None) -> dict:
    b, a = _snapshot(before), _snapshot(after)
    ids = sorted(set(b["elements"]) | set(a["elements"]), key=lambda i: (len(i), i))
    added = [i for i in ids if i not in b["elements"]]
    removed = [i for i in ids if i not in a["elements"]]
    modified = [i for i in ids if i in b["elements"] and i in a["elements"] and b["elements"][i] != a["elements"][i]]
    snapshots: dict[str, Any] = {
        "elements": {i: {"before": b["elements"].get(i), "after": a["elements"].get(i)}
                     for i in added + removed + modified},
    }
    for key in ("general_sections", "traceability", "changesets", "next_id"):
        if b[key] != a[key]:
            snapshots[key] = {"before": b[key], "after": a[key]}
    return {
        "elements_added": added,
        "elements_removed": removed,
        "elements_modified": modified,
        "sections_written": list(written or []),
        "traces_added": [t for t in a["traceability"] if t not in b["traceability"]],
        "traces_removed": [t for t in b["traceability"] if t not in a["traceability"]],
        "snapshots": snapshots,
    }


def delta_is_empty(delta: dict) -> bool:
    return not delta["snapshots"]["elements"] and len(delta["snapshots"]) == 1


def invert_delta(delta: dict) -> dict:
    snaps = delta["snapshots"]
    flipped = {"elements": {i: {"before": s["after"], "after": s["before"]} for i, s in snaps["elements"].items()}}
    for key, s in snaps.items():
        if key != "elements":
            flipped[key] = {"before": s["after"], "after": s["before"]}
    return {
        "elements_added": list(delta["elements_removed"]),
        "elements_removed": list(delta["elements_added"]),
        "elements_modified": list(delta["elements_modified"]),
        "sections_written": [],
        "traces_added": list(delta["traces_removed"]),
        "traces_removed": list(delta["traces_added"]),
        "snapshots": flipped,
    }


def apply_delta(desc: ArchitectureDescription, delta: dict) -> None:
    """Move ``desc`` from the delta's before-state to its after-state."""
    snaps = delta["snapshots"]
    for el_id, s in snaps["elements"].items():
        if s["after"] is None:
            desc.elements.pop(el_id, None)
        else:
            desc.elements[el_id] = element_from_dict(s["after"], el_id)
    if "general_sections" in snaps:
        desc.general_sections = [_section_from(s, "section") for s in snaps["general_sections"]["after"]]
    if "traceability" in snaps:
        desc.traceability = [trace_from_dict(t) for t in snaps["traceability"]["after"]]
    if "changesets" in snaps:
        desc.changesets = list(snaps["changesets"]["after"])
    if "next_id" in snaps:
        desc.next_id = snaps["next_id"]["after"]
    desc.sort_elements()


def replay(desc: ArchitectureDescription, cs: ChangeSet) -> None:
    """Re-apply a recorded change set to a description in its pre-state."""
    if content_hash(desc) != cs.pre_hash:
        raise HashMismatch(f"description does not match the pre-state of {cs.id}")
    apply_delta(desc, cs.delta)
    desc.version += 1
    if content_hash(desc) != cs.post_hash:
        raise HashMismatch(f"replaying {cs.id} did not reproduce its post-state")


def revert(desc: ArchitectureDescription, cs: ChangeSet) -> ChangeSet:
    """Undo ``cs``; the undo is itself recorded as a new change set."""
    if content_hash(desc) != cs.post_hash:
        raise HashMismatch(f"description does not match the post-state of {cs.id}")
    work = desc.copy()
    inverse = invert_delta(cs.delta)
    apply_delta(work, inverse)
    work.version = desc.version + 1
    post = content_hash(work)
    if post != cs.pre_hash:
        raise HashMismatch(f"undoing {cs.id} did not reproduce its pre-state")
    undo = ChangeSet(f"cs-{work.version}", cs.rule, dict(cs.inputs), (), inverse, cs.post_hash, post, reverts=cs.id)
    desc.restore_from(work)
    return undo


# -- step execution ----------------------------------------------------------------------


def describe_entry(e: dict) -> str:
    op = e["op"]
    head = f"[{e['index']}] "
    if op in ("create", "ensure"):
        verb = "create" if e["new"] else "use existing"
        return head + f"{verb} {e['kind']} \"{e['name']}\" as {e['id']}"
    if op == "choose":
        return head + f"model kind {e['value']!r} ({e['input']})"
    if op == "attach":
        return head + f"attach {e['child']} under {e['parent']}" + ("" if e["new"] else " (already attached)")
    if op == "remove":
        return head + f"remove {', '.join(e['removed'])} and {e['traces_removed']} trace(s)"
    if op == "write":
        return head + f"{e['mode'].lower()} section \"{e['section']}\" on {e['target']}"
    if op == "trace":
        return head + f"trace {e['source']} -{e['relation']}-> {e['target']}"
    if op == "branch":
        return head + f"branch {'then' if e['holds'] else 'else'}: {e['explanation']}"
    return head + op


@dataclass
class _Run:
    rule: EvolutionRule
    desc: ArchitectureDescription
    values: dict[str, str]
    changeset: str
    fail_at: int | None = None
    ordinal: int = 0
    created: list[str] = field(default_factory=list)
    log: list[dict] = field(default_factory=list)
    written: list[dict] = field(default_factory=list)

    def render(self, template: str) -> str:
        return _render(template, self.values)

    def lookup(self, query: Query) -> list[str]:
        name = self.render(query.name) if query.name is not None else None
        if name is not None and name.startswith("@"):
            el = self.desc.elements.get(name[1:])
            return [el.id] if el is not None and el.kind == query.kind else []
        return [el.id for el in self.desc.elements.values()
                if el.kind == query.kind and (name is None or el.name == name)]

    def resolve(self, query: Query, *, required: bool = True) -> str | None:
        hits = self.lookup(query)
        if len(hits) > 1:
            fresh = [h for h in hits if h in self.created]
            if len(fresh) == 1:
                return fresh[0]
            shown = Query(query.kind, self.render(query.name) if query.name is not None else None)
            raise QueryAmbiguous(f"{shown} matches {len(hits)} elements ({', '.join(hits)}); "
                                 f"bind the name to one element, for example \"@{hits[0]}\"")
        if not hits:
            if required:
                shown = Query(query.kind, self.render(query.name) if query.name is not None else None)
                raise TargetNotFound(f"no {shown} in the description")
            return None
        return hits[0]

    def run(self, steps: tuple[Step, ...]) -> None:
        for step in steps:
            index = self.ordinal
            self.ordinal += 1
            name = type(step).__name__
            try:
                if self.fail_at is not None and index == self.fail_at:
                    raise InjectedFault(f"fault injected before step {index}")
                entry = self.apply(step)
            except (MissingInput, InvalidInput, QueryAmbiguous, TargetNotFound) as exc:
                if exc.step_index is None:
                    exc.step_index = index
                    exc.args = (f"step {index} ({name}): {exc}",)
                raise
            except StepFailure:
                raise
            except (RaevolveError, ValueError, KeyError) as exc:
                raise StepFailure(index, exc, name) from exc
            self.log.append({"index": index, "step": name, **entry})
            if isinstance(step, Conditional):
                self.run(step.then if entry["holds"] else step.otherwise)

    def apply(self, step: Step) -> dict:
        d = self.desc
        if isinstance(step, CreateElement):
            parent = self.resolve(step.parent) if step.parent is not None else None
            kind, name = step.kind, self.render(step.name)
            el_id = d.add_element(kind, name, parent)
            d.elements[el_id].attributes.update({k: self.render(v) for k, v in step.attributes})
            self.created.append(el_id)
            return {"op": "create", "kind": kind, "name": name, "id": el_id, "new": True}
        if isinstance(step, EnsureElement):
            name = self.render(step.query.name) if step.query.name is not None else None
            found = self.resolve(step.query, required=step.on_missing == "Fail")
            if found is not None:
                return {"op": "ensure", "kind": step.query.kind, "name": d.elements[found].name,
                        "id": found, "new": False}
            if name is None or name.startswith("@"):
                raise TargetNotFound(f"cannot create {step.query}: no name to create it with")
            el_id = d.add_element(step.query.kind, name)
            self.created.append(el_id)
            return {"op": "ensure", "kind": step.query.kind, "name": name, "id": el_id, "new": True}
        if isinstance(step, ChooseModelKind):
            value = self.values[step.input]
            if value not in step.options:
                raise InvalidInput(f"{step.input}={value!r} is not one of {list(step.options)}")
            return {"op": "choose", "input": step.input, "value": value}
        if isinstance(step, AttachChild):
            parent, child = self.resolve(step.parent), self.resolve(step.child)
            new = d.attach_child(parent, child)
            return {"op": "attach", "parent": parent, "child": child, "new": new}
        if isinstance(step, RemoveElement):
            target = self.resolve(step.query)
            report = d.remove_element(target)
            return {"op": "remove", "id": target, "removed": report.element_ids, "traces_removed": len(report.traces)}
        if isinstance(step, WriteSection):
            target = self.resolve(step.target) if step.target is not None else GENERAL
            section, mode = self.render(step.section), WriteMode(step.mode)
            try:
                d.write_section(target, section, self.render(step.content), mode)
            except SectionNotFound as exc:
                raise TargetNotFound(str(exc)) from None
            self.written.append({"target": target, "section": section, "mode": mode.value})
            return {"op": "write", "target": target, "section": section, "mode": mode.value}
        if isinstance(step, UpdateTraceability):
            ends = []
            for ep in (step.source, step.target):
                ends.append(self.resolve(ep.query) if ep.query is not None else self.render(ep.artifact))
            entry = TraceEntry(ends[0], ends[1], step.relation, self.render(step.note), self.changeset)
            d.add_trace(entry)
            return {"op": "trace", "source": entry.source, "target": entry.target, "relation": entry.relation}
        if isinstance(step, Conditional):
            holds, why = conditions.evaluate(conditions.parse_condition(step.predicate), d, self.render)
            return {"op": "branch", "predicate": step.predicate, "holds": holds, "explanation": why}
        raise TypeError(f"unknown step {step!r}")


def _prepare(rule: EvolutionRule, desc: ArchitectureDescription, inputs, request) -> dict[str, str]:
    if request is not None and not check_event(rule, request):
        raise EventMismatch(f"{rule.id} is triggered by '{rule.event}', not '{as_event(request)}'")
    values = bind_inputs(rule, inputs)
    result = check_condition(rule, desc, values)
    if not result.holds:
        raise ConditionNotMet(f"condition of {rule.id} does not hold: {result.explanation}")
    return values


def _simulate(rule, desc, values, fail_at=None) -> tuple[ArchitectureDescription, _Run]:
    work = desc.copy()
    cs_id = f"cs-{desc.version + 1}"
    work.changesets.append(cs_id)
    run = _Run(rule, work, values, cs_id, fail_at)
    run.run(rule.action)
    work.version = desc.version + 1
    return work, run


def dry_run(rule: EvolutionRule, desc: ArchitectureDescription, inputs: dict[str, str] | None = None,
            request: Event | dict | None = None) -> ExecutionPlan:
    """Every concrete mutation ``execute`` would perform; ``desc`` is not touched.

    Ids in the plan are the ones the real run would allocate; entries with
    ``new`` set are elements the run would create.
    """
    values = _prepare(rule, desc, inputs, request)
    _, run = _simulate(rule, desc, values)
    return ExecutionPlan(rule.id, values, tuple(run.log))


def execute(rule: EvolutionRule, desc: ArchitectureDescription, inputs: dict[str, str] | None = None,
            request: Event | dict | None = None, *, fail_at: int | None = None) -> ChangeSet:
    """Apply ``rule`` to ``desc`` in place, all or nothing.

    ``fail_at`` injects a fault before the step with that execution ordinal
    (nested branch steps count too); it exists to exercise rollback.
    """
    values = _prepare(rule, desc, inputs, request)
    pre = content_hash(desc)
    work, run = _simulate(rule, desc, values, fail_at)
    delta = compute_delta(desc, work, run.written)
    post = content_hash(work)
    assert post != pre or delta_is_empty(delta)
    cs = ChangeSet(run.changeset, rule.id, {k: v for k, v in values.items() if k != "rule"},
                   tuple(run.log), delta, pre, post)
    desc.restore_from(work)
    return cs
