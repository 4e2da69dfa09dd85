"""Condition language of evolution rules.

Grammar (an empty string is the always-true condition)::

    expr    := term ("or" term)*
    term    := factor ("and" factor)*
    factor  := "not" factor | "(" expr ")" | "true"
             | "exists" "(" Kind ["," STRING] ")"
             | "section" "(" STRING ")"

String literals are double-quoted and may contain ``{input}`` placeholders.
``exists(Kind, "name")`` matches elements by exact name; ``section("name")``
holds when a general section or any element section has that name.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Union

from .errors import ConditionEvalError, ConditionSyntaxError

_TOKEN = re.compile(r'\s*(?:(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<string>"(?:[^"\\]|\\.)*")|(?P<punct>[(),]))')


@dataclass(frozen=True)
class TrueCond:
    def __str__(self) -> str:
        return "true"


@dataclass(frozen=True)
class Exists:
    kind: str
    name: str | None = None

    def __str__(self) -> str:
        return f'exists({self.kind}, "{self.name}")' if self.name is not None else f"exists({self.kind})"


@dataclass(frozen=True)
class HasSection:
    name: str

    def __str__(self) -> str:
        return f'section("{self.name}")'


@dataclass(frozen=True)
class Not:
    operand: Condition

    def __str__(self) -> str:
        return f"not ({self.operand})"


@dataclass(frozen=True)
class And:
    left: Condition
    right: Condition

    def __str__(self) -> str:
        return f"({self.left} and {self.right})"


@dataclass(frozen=True)
class Or:
    left: Condition
    right: Condition

    def __str__(self) -> str:
        return f"({self.left} or {self.right})"


Condition = Union[TrueCond, Exists, HasSection, Not, And, Or]
TRUE = TrueCond()


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens, pos = [], 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ConditionSyntaxError(f"unexpected character {text[pos:].lstrip()[:1]!r}", pos)
        kind = m.lastgroup
        value = m.group(kind)
        start = m.start(kind)
        if kind == "string":
            value = re.sub(r"\\(.)", r"\1", value[1:-1])
        tokens.append((kind, value, start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def take(self, kind: str, value: str | None = None) -> str:
        tk, tv, pos = self.peek()
        if tk != kind or (value is not None and tv != value):
            want = value or kind
            got = tv or "end of input"
            raise ConditionSyntaxError(f"expected {want!r}, got {got!r}", pos)
        self.i += 1
        return tv

    def at(self, kind: str, value: str) -> bool:
        tk, tv, _ = self.peek()
        return tk == kind and tv == value

    def expr(self) -> Condition:
        node = self.term()
        while self.at("name", "or"):
            self.i += 1
            node = Or(node, self.term())
        return node

    def term(self) -> Condition:
        node = self.factor()
        while self.at("name", "and"):
            self.i += 1
            node = And(node, self.factor())
        return node

    def factor(self) -> Condition:
        tk, tv, pos = self.peek()
        if tk == "punct" and tv == "(":
            self.i += 1
            node = self.expr()
            self.take("punct", ")")
            return node
        if tk != "name":
            raise ConditionSyntaxError(f"expected a predicate, got {tv or 'end of input'!r}", pos)
        self.i += 1
        if tv == "not":
            return Not(self.factor())
        if tv == "true":
            return TRUE
        if tv == "exists":
            self.take("punct", "(")
            kind = self.take("name")
            name = None
            if self.at("punct", ","):
                self.i += 1
                name = self.take("string")
            self.take("punct", ")")
            return Exists(kind, name)
        if tv == "section":
            self.take("punct", "(")
            name = self.take("string")
            self.take("punct", ")")
            return HasSection(name)
        raise ConditionSyntaxError(f"unknown predicate {tv!r}", pos)


def parse_condition(text: str) -> Condition:
    if not isinstance(text, str):
        raise ConditionSyntaxError("condition must be a string", 0)
    if not text.strip():
        return TRUE
    parser = _Parser(text)
    node = parser.expr()
    tk, tv, pos = parser.peek()
    if tk != "end":
        raise ConditionSyntaxError(f"trailing input {tv!r}", pos)
    return node


def walk(node: Condition):
    yield node
    if isinstance(node, Not):
        yield from walk(node.operand)
    elif isinstance(node, (And, Or)):
        yield from walk(node.left)
        yield from walk(node.right)


def kinds_in(node: Condition) -> set[str]:
    return {n.kind for n in walk(node) if isinstance(n, Exists)}


def strings_in(node: Condition) -> list[str]:
    out = []
    for n in walk(node):
        if isinstance(n, Exists) and n.name is not None:
            out.append(n.name)
        elif isinstance(n, HasSection):
            out.append(n.name)
    return out


def evaluate(node: Condition, desc, render: Callable[[str], str] = lambda s: s) -> tuple[bool, str]:
    """Evaluate against a description; returns (holds, explanation)."""
    if isinstance(node, TrueCond):
        return True, "no condition"
    if isinstance(node, Exists):
        if node.kind not in desc.kinds:
            raise ConditionEvalError(f"unknown element kind {node.kind!r} in condition")
        name = render(node.name) if node.name is not None else None
        hits = [el for el in desc.elements.values() if el.kind == node.kind and (name is None or el.name == name)]
        label = f'{node.kind} "{name}"' if name is not None else node.kind
        return bool(hits), f"{label} {'exists' if hits else 'does not exist'}"
    if isinstance(node, HasSection):
        name = render(node.name)
        ok = desc.has_section(name)
        return ok, f"section \"{name}\" {'exists' if ok else 'does not exist'}"
    if isinstance(node, Not):
        ok, why = evaluate(node.operand, desc, render)
        return not ok, f"not: {why}"
    if isinstance(node, And):
        ok, why = evaluate(node.left, desc, render)
        if not ok:
            return False, why
        return evaluate(node.right, desc, render)
    if isinstance(node, Or):
        ok, why = evaluate(node.left, desc, render)
        if ok:
            return True, why
        return evaluate(node.right, desc, render)
    raise ConditionEvalError(f"not a condition node: {node!r}")
