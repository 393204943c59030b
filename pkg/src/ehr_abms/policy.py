"""Monotone access policies: AST, parser, canonical text, and evaluation.

Grammar (tokens are case-sensitive)::

    expr      := and_expr ("OR" and_expr)*
    and_expr  := atom ("AND" atom)*
    atom      := ATTR | "(" expr ")" | INT "of" "(" expr ("," expr)* ")"
    ATTR      := NAME "@" NAME          e.g. doctor@hospital

AND binds tighter than OR.  There is no negation.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Union

from .errors import PolicySyntaxError

_NAME = r"[A-Za-z0-9_.\-]+"
_TOKEN_RE = re.compile(
    rf"\s*(?:(?P<attr>{_NAME}@{_NAME})|(?P<lp>\()|(?P<rp>\))|(?P<comma>,)|(?P<word>{_NAME}))"
)
_RESERVED = {"AND", "OR", "of"}


@dataclass(frozen=True)
class Leaf:
    name: str
    authority_id: str

    @property
    def label(self) -> str:
        return f"{self.name}@{self.authority_id}"


@dataclass(frozen=True)
class Gate:
    """A k-of-n threshold gate.  ``kind`` records how it was written."""

    kind: str  # "and" | "or" | "threshold"
    k: int
    children: tuple["Node", ...]

    def __post_init__(self):
        if not self.children:
            raise ValueError("gate needs at least one child")
        if not 1 <= self.k <= len(self.children):
            raise ValueError(f"threshold {self.k} out of range for {len(self.children)} children")


Node = Union[Leaf, Gate]


def leaf(label: str) -> Leaf:
    name, _, authority = label.partition("@")
    if not name or not authority:
        raise ValueError(f"attribute label {label!r} must look like name@authority")
    return Leaf(name, authority)


def and_(*children: Node) -> Node:
    return children[0] if len(children) == 1 else Gate("and", len(children), tuple(children))


def or_(*children: Node) -> Node:
    return children[0] if len(children) == 1 else Gate("or", 1, tuple(children))


def threshold(k: int, *children: Node) -> Gate:
    if not 1 <= k <= len(children):
        raise ValueError(f"threshold {k} out of range for {len(children)} children")
    return Gate("threshold", k, tuple(children))


@dataclass(frozen=True)
class AccessPolicy:
    root: Node

    def leaves(self) -> list[Leaf]:
        out: list[Leaf] = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, Leaf):
                out.append(node)
            else:
                stack.extend(reversed(node.children))
        return out

    def labels(self) -> set[str]:
        return {lf.label for lf in self.leaves()}

    def to_text(self) -> str:
        return _render(self.root, top=True)

    def __str__(self) -> str:
        return self.to_text()


def _render(node: Node, top: bool = False) -> str:
    if isinstance(node, Leaf):
        return node.label
    if node.kind == "threshold":
        return f"{node.k} of (" + ", ".join(_render(c, top=True) for c in node.children) + ")"
    if node.kind == "and":
        # a nested OR renders itself parenthesised
        return " AND ".join(_render(c) for c in node.children)
    text = " OR ".join(_render(c) for c in node.children)
    return text if top else f"({text})"


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            if text[pos:].strip() == "":
                break
            m = _TOKEN_RE.match(text, pos)
            if not m or m.end() == pos:
                bad = len(text) - len(text[pos:].lstrip())
                raise PolicySyntaxError(f"unexpected character {text[bad]!r}", bad)
            kind = m.lastgroup
            start = m.start(kind)
            value = m.group(kind)
            if kind == "word" and value == "NOT":
                raise PolicySyntaxError("negation is not allowed in monotone policies", start)
            self.tokens.append((kind, value, start))
            pos = m.end()
        self.i = 0

    def peek(self) -> tuple[str, str, int] | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def expect(self, kind: str, value: str | None = None) -> tuple[str, str, int]:
        tok = self.peek()
        if tok is None:
            raise PolicySyntaxError(f"expected {value or kind}, found end of input", len(self.text))
        if tok[0] != kind or (value is not None and tok[1] != value):
            raise PolicySyntaxError(f"expected {value or kind}, found {tok[1]!r}", tok[2])
        self.i += 1
        return tok

    def at_word(self, value: str) -> bool:
        tok = self.peek()
        return tok is not None and tok[0] == "word" and tok[1] == value

    def parse(self) -> AccessPolicy:
        if not self.tokens:
            raise PolicySyntaxError("empty policy", 0)
        root = self.expr()
        tok = self.peek()
        if tok is not None:
            raise PolicySyntaxError(f"unexpected token {tok[1]!r}", tok[2])
        return AccessPolicy(root)

    def expr(self) -> Node:
        parts = [self.and_expr()]
        while self.at_word("OR"):
            self.i += 1
            parts.append(self.and_expr())
        return _flatten("or", parts)

    def and_expr(self) -> Node:
        parts = [self.atom()]
        while self.at_word("AND"):
            self.i += 1
            parts.append(self.atom())
        return _flatten("and", parts)

    def atom(self) -> Node:
        tok = self.peek()
        if tok is None:
            raise PolicySyntaxError("unexpected end of input", len(self.text))
        kind, value, pos = tok
        if kind == "attr":
            self.i += 1
            return leaf(value)
        if kind == "lp":
            self.i += 1
            node = self.expr()
            self.expect("rp")
            return node
        if kind == "word" and value.isdigit():
            self.i += 1
            self.expect("word", "of")
            self.expect("lp")
            children = [self.expr()]
            while self.peek() is not None and self.peek()[0] == "comma":
                self.i += 1
                children.append(self.expr())
            self.expect("rp")
            k = int(value)
            if not 1 <= k <= len(children):
                raise PolicySyntaxError(f"threshold {k} out of range for {len(children)} children", pos)
            return Gate("threshold", k, tuple(children))
        if kind == "word" and value not in _RESERVED:
            raise PolicySyntaxError(f"attribute {value!r} lacks an @authority", pos)
        raise PolicySyntaxError(f"unexpected token {value!r}", pos)


def _flatten(kind: str, parts: list[Node]) -> Node:
    if len(parts) == 1:
        return parts[0]
    flat: list[Node] = []
    for p in parts:
        if isinstance(p, Gate) and p.kind == kind:
            flat.extend(p.children)
        else:
            flat.append(p)
    k = len(flat) if kind == "and" else 1
    return Gate(kind, k, tuple(flat))


def policy_parse(text: str) -> AccessPolicy:
    return _Parser(text).parse()


def _labels_of(attrs: Iterable) -> set[str]:
    out = set()
    for a in attrs:
        out.add(a if isinstance(a, str) else a.label)
    return out


def policy_satisfied(policy: AccessPolicy | Node, attrs: Iterable) -> bool:
    """Evaluate the monotone formula over a set of attributes (labels or objects with ``.label``)."""
    held = _labels_of(attrs)
    root = policy.root if isinstance(policy, AccessPolicy) else policy

    def ev(node: Node) -> bool:
        if isinstance(node, Leaf):
            return node.label in held
        return sum(ev(c) for c in node.children) >= node.k

    return ev(root)
