"""In-memory model of a reference architecture description.

A description is a plain mutable value: an id-keyed map of elements, an
ordered list of general sections and a flat traceability edge list.  All
mutation goes through the methods below, which enforce referential
integrity; :meth:`ArchitectureDescription.validate` re-checks every
invariant for values that were built some other way (deserialized,
hand-edited).

Element ids are generated (``el-1``, ``el-2`` ...) from a counter stored in
the description, so two equal descriptions always allocate the same ids.
"""

from __future__ import annotations

import copy
import enum
import hashlib
import json
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Any, Iterable

from .errors import (
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

DESCRIPTION_FORMAT = "raevolve/description@1"
GENERAL = "general"
IMPORTED = "imported"

_ELEMENT_ID = re.compile(r"^el-([1-9][0-9]*)$")


# -- canonical JSON -----------------------------------------------------------


def _reject_floats(obj: Any) -> None:
    if isinstance(obj, float):
        raise TypeError("canonical documents carry no floating-point values")
    if isinstance(obj, dict):
        for value in obj.values():
            _reject_floats(value)
    elif isinstance(obj, (list, tuple)):
        for value in obj:
            _reject_floats(value)


def canonical_bytes(obj: Any) -> bytes:
    """UTF-8 JSON with sorted keys, two-space indent and a trailing newline."""
    _reject_floats(obj)
    text = json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False)
    return (text + "\n").encode("utf-8")


def parse_json(data: bytes | str, what: str = "document") -> Any:
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"{what} is not valid UTF-8: {exc.reason}", 1, exc.start + 1) from exc
    try:
        return json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed {what}: {exc.msg}", exc.lineno, exc.colno) from exc


# -- element kinds ------------------------------------------------------------


class Origin(str, enum.Enum):
    STANDARD = "Standard42010"
    EXTENSION = "Extension"


@dataclass(frozen=True)
class ElementKind:
    name: str
    origin: Origin
    evolvable: bool


class KindRegistry:
    """Name-indexed set of element kinds, in file order."""

    def __init__(self, kinds: Iterable[ElementKind]):
        self._kinds: dict[str, ElementKind] = {}
        for kind in kinds:
            if kind.name in self._kinds:
                raise ParseError(f"duplicate element kind {kind.name!r}")
            self._kinds[kind.name] = kind

    def __contains__(self, name: object) -> bool:
        return name in self._kinds

    def __iter__(self):
        return iter(self._kinds.values())

    def __len__(self) -> int:
        return len(self._kinds)

    def get(self, name: str) -> ElementKind:
        try:
            return self._kinds[name]
        except (KeyError, TypeError):
            raise UnknownKind(f"unknown element kind {name!r}") from None

    def names(self) -> list[str]:
        return list(self._kinds)

    def evolvable(self) -> list[ElementKind]:
        return [k for k in self._kinds.values() if k.evolvable]


def load_kinds(doc: dict | bytes | str) -> KindRegistry:
    if not isinstance(doc, dict):
        doc = parse_json(doc, "kinds file")
    try:
        entries = doc["kinds"]
        kinds = [ElementKind(e["name"], Origin(e["origin"]), bool(e["evolvable"])) for e in entries]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed kinds file: {exc}") from exc
    for kind in kinds:
        if not isinstance(kind.name, str) or not re.fullmatch(r"[A-Z][A-Za-z]*", kind.name):
            raise ParseError(f"invalid kind name {kind.name!r}")
    return KindRegistry(kinds)


SEED_KIND_COUNT = 24
SEED_EVOLVABLE_COUNT = 22


def seed_kinds_document() -> dict:
    return json.loads(resources.files("raevolve").joinpath("data/kinds.json").read_text("utf-8"))


@lru_cache(maxsize=1)
def seed_kinds() -> KindRegistry:
    registry = load_kinds(seed_kinds_document())
    assert len(registry) == SEED_KIND_COUNT, len(registry)
    assert len(registry.evolvable()) == SEED_EVOLVABLE_COUNT
    assert not registry.get("SystemOfInterest").evolvable
    assert not registry.get("ReferenceArchitecture").evolvable
    return registry


def display_name(kind: str) -> str:
    """``InformationSource`` -> ``Information Source``."""
    return re.sub(r"(?<!^)(?=[A-Z])", " ", kind)


# -- description values ---------------------------------------------------------


class WriteMode(str, enum.Enum):
    CREATE = "Create"
    REPLACE = "Replace"
    APPEND = "Append"


RELATIONS = ("Represents", "DerivedFrom", "Satisfies", "Covers")


def valid_relation(relation: object) -> bool:
    if not isinstance(relation, str):
        return False
    if relation in RELATIONS:
        return True
    return relation.startswith("Custom:") and len(relation) > len("Custom:")


def is_element_ref(endpoint: str) -> bool:
    return bool(_ELEMENT_ID.match(endpoint))


def _id_sort_key(element_id: str) -> tuple[int, str]:
    m = _ELEMENT_ID.match(element_id)
    return (int(m.group(1)) if m else 1 << 62, element_id)


@dataclass
class Section:
    name: str
    content: str


@dataclass
class DescElement:
    id: str
    kind: str
    name: str
    body: list[Section] = field(default_factory=list)
    children: list[str] = field(default_factory=list)
    attributes: dict[str, str] = field(default_factory=dict)

    def section(self, name: str) -> Section | None:
        return next((s for s in self.body if s.name == name), None)


@dataclass(frozen=True)
class TraceEntry:
    source: str
    target: str
    relation: str
    note: str = ""
    changeset: str = IMPORTED


@dataclass(frozen=True)
class Violation:
    subject: str
    invariant: str
    message: str

    def __str__(self) -> str:
        return f"{self.subject}: [{self.invariant}] {self.message}"


@dataclass(frozen=True)
class RemovalReport:
    element_ids: list[str]
    traces: list[TraceEntry]


@dataclass
class ArchitectureDescription:
    name: str
    version: int = 0
    elements: dict[str, DescElement] = field(default_factory=dict)
    traceability: list[TraceEntry] = field(default_factory=list)
    general_sections: list[Section] = field(default_factory=list)
    changesets: list[str] = field(default_factory=list)
    next_id: int = 1
    kinds: KindRegistry = field(default_factory=seed_kinds, compare=False, repr=False)

    # -- queries

    def element(self, element_id: str) -> DescElement:
        try:
            return self.elements[element_id]
        except KeyError:
            raise ElementNotFound(f"no element {element_id!r}") from None

    def find_elements(self, kind: str, name_filter: str | None = None) -> list[str]:
        """Ids of elements of ``kind`` whose name contains ``name_filter``
        (case-insensitive), in creation order."""
        self.kinds.get(kind)
        needle = name_filter.casefold() if name_filter else None
        return [
            el.id
            for el in self.elements.values()
            if el.kind == kind and (needle is None or needle in el.name.casefold())
        ]

    def parents_of(self, element_id: str) -> list[str]:
        return [el.id for el in self.elements.values() if element_id in el.children]

    def has_section(self, name: str) -> bool:
        if any(s.name == name for s in self.general_sections):
            return True
        return any(el.section(name) is not None for el in self.elements.values())

    # -- mutation

    def add_element(self, kind: str, name: str, parent: str | None = None) -> str:
        self.kinds.get(kind)
        if not name:
            raise EmptyName("element name must not be empty")
        if parent is not None and parent not in self.elements:
            raise ParentNotFound(f"parent {parent!r} does not exist")
        element_id = f"el-{self.next_id}"
        self.next_id += 1
        self.elements[element_id] = DescElement(element_id, kind, name)
        if parent is not None:
            self.elements[parent].children.append(element_id)
        return element_id

    def attach_child(self, parent: str, child: str) -> bool:
        """Attach ``child`` under ``parent``; returns False when already attached."""
        parent_el = self.element(parent)
        self.element(child)
        if parent in self._subtree(child):
            raise ValueError(f"attaching {child} under {parent} would create a cycle")
        if child in parent_el.children:
            return False
        parent_el.children.append(child)
        return True

    def _subtree(self, root: str) -> list[str]:
        seen: list[str] = []
        stack = [root]
        while stack:
            current = stack.pop()
            if current in seen or current not in self.elements:
                continue
            seen.append(current)
            stack.extend(reversed(self.elements[current].children))
        return seen

    def remove_element(self, element_id: str) -> RemovalReport:
        """Remove an element with its whole child subtree and every trace entry
        touching a removed id."""
        self.element(element_id)
        removed = self._subtree(element_id)
        gone = set(removed)
        for rid in removed:
            del self.elements[rid]
        for el in self.elements.values():
            if any(c in gone for c in el.children):
                el.children = [c for c in el.children if c not in gone]
        kept, dropped = [], []
        for entry in self.traceability:
            (dropped if entry.source in gone or entry.target in gone else kept).append(entry)
        self.traceability = kept
        return RemovalReport(removed, dropped)

    def _sections_of(self, target: str) -> list[Section]:
        if target == GENERAL:
            return self.general_sections
        return self.element(target).body

    def write_section(self, target: str, section_name: str, content: str, mode: WriteMode | str) -> None:
        mode = WriteMode(mode)
        if not section_name:
            raise EmptyName("section name must not be empty")
        sections = self._sections_of(target)
        existing = next((s for s in sections if s.name == section_name), None)
        if mode is WriteMode.CREATE:
            if existing is not None:
                raise SectionExists(f"section {section_name!r} already exists on {target}")
            sections.append(Section(section_name, content))
            return
        if existing is None:
            raise SectionNotFound(f"section {section_name!r} not found on {target}")
        if mode is WriteMode.REPLACE:
            existing.content = content
        elif existing.content:
            existing.content = f"{existing.content}\n\n{content}"
        else:
            existing.content = content

    def add_trace(self, entry: TraceEntry) -> None:
        if entry.source == entry.target:
            raise SelfTrace(f"trace from {entry.source!r} to itself")
        if not valid_relation(entry.relation):
            raise ValueError(f"invalid relation kind {entry.relation!r}")
        for endpoint in (entry.source, entry.target):
            if not endpoint:
                raise DanglingRef("trace endpoint must not be empty")
            if is_element_ref(endpoint) and endpoint not in self.elements:
                raise DanglingRef(f"trace endpoint {endpoint!r} does not resolve")
        if entry.changeset != IMPORTED and entry.changeset not in self.changesets:
            raise DanglingRef(f"trace changeset {entry.changeset!r} is not recorded")
        self.traceability.append(entry)

    # -- invariants

    def validate(self) -> list[Violation]:
        out: list[Violation] = []
        if not self.name:
            out.append(Violation("description", "name", "description name is empty"))
        if self.version < 0:
            out.append(Violation("description", "version", "version is negative"))
        for key, el in self.elements.items():
            if el.id != key:
                out.append(Violation(key, "id", f"element stored under {key!r} carries id {el.id!r}"))
            if not _ELEMENT_ID.match(key):
                out.append(Violation(key, "id", "element id is not of the form el-<n>"))
            elif int(_ELEMENT_ID.match(key).group(1)) >= self.next_id:
                out.append(Violation(key, "id", "element id not below the id counter"))
            if el.kind not in self.kinds:
                out.append(Violation(key, "kind", f"unknown element kind {el.kind!r}"))
            if not el.name:
                out.append(Violation(key, "name", "element name is empty"))
            names = [s.name for s in el.body]
            if len(set(names)) != len(names):
                out.append(Violation(key, "sections", "duplicate section names"))
            if len(set(el.children)) != len(el.children):
                out.append(Violation(key, "children", "duplicate child ids"))
            for child in el.children:
                if child not in self.elements:
                    out.append(Violation(key, "children", f"child {child!r} does not resolve"))
        out.extend(self._cycle_violations())
        for el in self.elements.values():
            if el.kind != "View":
                continue
            viewpoints = [p for p in self.parents_of(el.id) if self.elements[p].kind == "Viewpoint"]
            if len(viewpoints) > 1:
                out.append(Violation(el.id, "view-viewpoint",
                                     f"view attached to {len(viewpoints)} viewpoints: {', '.join(viewpoints)}"))
        names = [s.name for s in self.general_sections]
        if len(set(names)) != len(names):
            out.append(Violation(GENERAL, "sections", "duplicate general section names"))
        for i, entry in enumerate(self.traceability):
            subject = f"trace[{i}]"
            if entry.source == entry.target:
                out.append(Violation(subject, "self-trace", f"source equals target {entry.source!r}"))
            if not valid_relation(entry.relation):
                out.append(Violation(subject, "relation", f"invalid relation {entry.relation!r}"))
            for endpoint in (entry.source, entry.target):
                if not endpoint:
                    out.append(Violation(subject, "dangling", "empty endpoint"))
                elif is_element_ref(endpoint) and endpoint not in self.elements:
                    out.append(Violation(subject, "dangling", f"endpoint {endpoint!r} does not resolve"))
            if entry.changeset != IMPORTED and entry.changeset not in self.changesets:
                out.append(Violation(subject, "changeset", f"changeset {entry.changeset!r} not recorded"))
        return out

    def _cycle_violations(self) -> list[Violation]:
        out = []
        state: dict[str, int] = {}

        def visit(node: str) -> bool:
            state[node] = 1
            for child in self.elements[node].children:
                if child not in self.elements:
                    continue
                if state.get(child) == 1:
                    return True
                if state.get(child) is None and visit(child):
                    return True
            state[node] = 2
            return False

        for el_id in self.elements:
            if state.get(el_id) is None and visit(el_id):
                out.append(Violation(el_id, "acyclic", "parent-child graph contains a cycle"))
                break
        return out

    def copy(self) -> ArchitectureDescription:
        clone = copy.deepcopy(self, memo={id(self.kinds): self.kinds})
        return clone

    def restore_from(self, other: ArchitectureDescription) -> None:
        """Overwrite this description's state with ``other``'s, in place."""
        for name in ("name", "version", "elements", "traceability", "general_sections", "changesets", "next_id"):
            setattr(self, name, getattr(other, name))

    def sort_elements(self) -> None:
        self.elements = {k: self.elements[k] for k in sorted(self.elements, key=_id_sort_key)}


def new_description(name: str, kinds: KindRegistry | None = None) -> ArchitectureDescription:
    if not name:
        raise EmptyName("description name must not be empty")
    return ArchitectureDescription(name=name, kinds=kinds or seed_kinds())


# -- serialization -------------------------------------------------------------


def section_to_dict(s: Section) -> dict:
    return {"name": s.name, "content": s.content}


def element_to_dict(el: DescElement) -> dict:
    return {
        "id": el.id,
        "kind": el.kind,
        "name": el.name,
        "body": [section_to_dict(s) for s in el.body],
        "children": list(el.children),
        "attributes": dict(el.attributes),
    }


def trace_to_dict(t: TraceEntry) -> dict:
    return {
        "source": t.source,
        "target": t.target,
        "relation": t.relation,
        "note": t.note,
        "changeset": t.changeset,
    }


def to_dict(desc: ArchitectureDescription, *, include_version: bool = True) -> dict:
    doc = {
        "format": DESCRIPTION_FORMAT,
        "name": desc.name,
        "next_id": desc.next_id,
        "changesets": list(desc.changesets),
        "elements": {k: element_to_dict(v) for k, v in desc.elements.items()},
        "general_sections": [section_to_dict(s) for s in desc.general_sections],
        "traceability": [trace_to_dict(t) for t in desc.traceability],
    }
    if include_version:
        doc["version"] = desc.version
    return doc


def serialize(desc: ArchitectureDescription) -> bytes:
    return canonical_bytes(to_dict(desc))


def content_hash(desc: ArchitectureDescription) -> str:
    """SHA-256 over the canonical bytes, version counter excluded."""
    return hashlib.sha256(canonical_bytes(to_dict(desc, include_version=False))).hexdigest()


def _str(value: Any, what: str) -> str:
    if not isinstance(value, str):
        raise ParseError(f"{what} must be a string")
    return value


def _section_from(d: Any, what: str) -> Section:
    if not isinstance(d, dict) or set(d) != {"name", "content"}:
        raise ParseError(f"{what} must be an object with name and content")
    return Section(_str(d["name"], f"{what}.name"), _str(d["content"], f"{what}.content"))


def element_from_dict(d: Any, key: str = "element") -> DescElement:
    expected = {"id", "kind", "name", "body", "children", "attributes"}
    if not isinstance(d, dict) or set(d) != expected:
        raise ParseError(f"element {key} must have exactly the fields {sorted(expected)}")
    if not isinstance(d["body"], list) or not isinstance(d["children"], list) or not isinstance(d["attributes"], dict):
        raise ParseError(f"element {key} has malformed body/children/attributes")
    return DescElement(
        id=_str(d["id"], f"{key}.id"),
        kind=_str(d["kind"], f"{key}.kind"),
        name=_str(d["name"], f"{key}.name"),
        body=[_section_from(s, f"{key}.body[{i}]") for i, s in enumerate(d["body"])],
        children=[_str(c, f"{key}.children") for c in d["children"]],
        attributes={_str(k, "attribute key"): _str(v, f"{key}.attributes") for k, v in d["attributes"].items()},
    )


def trace_from_dict(d: Any, what: str = "trace") -> TraceEntry:
    expected = {"source", "target", "relation", "note", "changeset"}
    if not isinstance(d, dict) or set(d) != expected:
        raise ParseError(f"{what} must have exactly the fields {sorted(expected)}")
    return TraceEntry(**{k: _str(d[k], f"{what}.{k}") for k in expected})


def from_dict(doc: Any, kinds: KindRegistry | None = None) -> ArchitectureDescription:
    expected = {"format", "name", "version", "next_id", "changesets", "elements", "general_sections", "traceability"}
    if not isinstance(doc, dict):
        raise ParseError("description document must be a JSON object")
    if set(doc) != expected:
        missing, extra = expected - set(doc), set(doc) - expected
        raise ParseError(f"description fields mismatch (missing {sorted(missing)}, unexpected {sorted(extra)})")
    if doc["format"] != DESCRIPTION_FORMAT:
        raise ParseError(f"unsupported description format {doc['format']!r}")
    for key in ("version", "next_id"):
        if type(doc[key]) is not int or doc[key] < 0:
            raise ParseError(f"{key} must be a non-negative integer")
    if not isinstance(doc["elements"], dict):
        raise ParseError("elements must be an object")
    for key in ("changesets", "general_sections", "traceability"):
        if not isinstance(doc[key], list):
            raise ParseError(f"{key} must be an array")
    desc = ArchitectureDescription(
        name=_str(doc["name"], "name"),
        version=doc["version"],
        elements={k: element_from_dict(v, k) for k, v in doc["elements"].items()},
        traceability=[trace_from_dict(t, f"traceability[{i}]") for i, t in enumerate(doc["traceability"])],
        general_sections=[_section_from(s, f"general_sections[{i}]") for i, s in enumerate(doc["general_sections"])],
        changesets=[_str(c, "changesets") for c in doc["changesets"]],
        next_id=doc["next_id"],
        kinds=kinds or seed_kinds(),
    )
    desc.sort_elements()
    return desc


def deserialize(data: bytes | str, kinds: KindRegistry | None = None) -> ArchitectureDescription:
    return from_dict(parse_json(data, "description"), kinds)
