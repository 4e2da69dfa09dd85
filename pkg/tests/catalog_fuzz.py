"""Single-field corruptions of catalog documents.

Every corruption produced here must make the catalog invalid: optional keys
and free-form attribute entries are never deleted, and fields whose empty
value is legal are never emptied.
"""

from __future__ import annotations

import copy
import random
from typing import Any

OPTIONAL_KEYS = {"acronym", "parent", "attributes", "note", "default", "description", "name"}
MAY_BE_EMPTY = {"condition", "note", "description"}
KIND_KEYS = {"element", "kind"}
ENUM_KEYS = {"task", "scope", "medium", "mode", "on_missing", "fidelity", "relation", "step"}
TEMPLATE_KEYS = {"name", "content", "section", "artifact", "prompt"}


def _paths(node: Any, prefix: tuple = ()):
    yield prefix, node
    if isinstance(node, dict):
        for k in sorted(node):
            yield from _paths(node[k], prefix + (k,))
    elif isinstance(node, list):
        for i, v in enumerate(node):
            yield from _paths(v, prefix + (i,))


def _wrong_type(value: Any) -> Any:
    if isinstance(value, bool):
        return "yes"
    if isinstance(value, str):
        return 7
    if isinstance(value, list):
        return "x"
    if isinstance(value, dict):
        return []
    return 7


def _mutations(doc_kind: str, path: tuple, value: Any) -> list[tuple[str, Any]]:
    """(label, replacement) pairs; replacement None with label 'delete' removes the key."""
    out = [("wrong-type", _wrong_type(value))]
    key = path[-1] if path else None
    parent_key = path[-2] if len(path) >= 2 else None
    in_tasks = len(path) >= 2 and path[0] == "tasks"
    if isinstance(key, str) and key not in OPTIONAL_KEYS and parent_key != "attributes":
        out.append(("delete", None))
    if isinstance(value, str):
        if key not in MAY_BE_EMPTY:
            out.append(("empty", ""))
        if path == ("id",):
            out.append(("bad-id", "DVar1" if doc_kind == "guideline" else "Rvar1"))
        if in_tasks:
            out.append(("broken-ref", "R-zzz-9"))
        if parent_key == "applicable_questions":
            out.append(("unknown-question", "4-99"))
        if key in KIND_KEYS:
            out.append(("unknown-kind", "Bogus"))
        if key in ENUM_KEYS or parent_key == "artifacts":
            out.append(("bad-enum", "Sideways"))
        if key in TEMPLATE_KEYS and path[0] == "action":
            out.append(("undeclared-placeholder", value + " {undeclared_x}"))
    if path == ("element",) and doc_kind == "guideline":
        out.append(("element-swap", "Quality" if value != "Quality" else "Variability"))
    if isinstance(value, list) and key in ("action", "applicable_questions", "options", "artifacts"):
        out.append(("empty-list", []))
    return out


def corrupt(guidelines: list[dict], rules: list[dict], rng: random.Random):
    """Return (guidelines, rules, description) with exactly one field corrupted."""
    guidelines, rules = copy.deepcopy(guidelines), copy.deepcopy(rules)
    docs = [("guideline", d) for d in guidelines] + [("rule", d) for d in rules]
    doc_kind, doc = rng.choice(docs)
    candidates = [(p, v) for p, v in _paths(doc) if p]
    path, value = rng.choice(candidates)
    label, replacement = rng.choice(_mutations(doc_kind, path, value))
    holder = doc
    for step in path[:-1]:
        holder = holder[step]
    if label == "delete":
        del holder[path[-1]]
    else:
        holder[path[-1]] = replacement
    where = f"{doc.get('id', '?')}:{'.'.join(map(str, path))}"
    return guidelines, rules, f"{label} at {where}"
