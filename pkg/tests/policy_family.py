"""Exhaustive family of small monotone policies for equivalence checks.

Shapes: every tree with 1..4 leaves whose gates have at least two
children, gate kinds AND, OR and k-of-m (1 < k < m).  A gate never has a
direct child of the same AND/OR kind, since the parser would flatten it.

Labels: either all leaves distinct, or (``with_repeats``) every way of
letting leaves share an attribute, enumerated as set partitions of the
leaf positions.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

from ehr_abms.policy import AccessPolicy, Gate, Leaf

UNIVERSE = ("a@x", "b@y", "c@z", "d@w")


def _compositions(n: int, parts: int):
    """Ordered ways to write n as a sum of `parts` positive integers."""
    if parts == 1:
        yield (n,)
        return
    for first in range(1, n - parts + 2):
        for rest in _compositions(n - first, parts - 1):
            yield (first,) + rest


@lru_cache(maxsize=None)
def shapes(n: int) -> tuple:
    """Tree shapes with n leaves; leaves are the placeholder "*"."""
    if n == 1:
        return ("*",)
    out = []
    for m in range(2, n + 1):
        for sizes in _compositions(n, m):
            for kids in itertools.product(*(shapes(s) for s in sizes)):
                kinds = [("and", m), ("or", 1)] + [("threshold", k) for k in range(2, m)]
                for kind, k in kinds:
                    if kind in ("and", "or") and any(isinstance(c, tuple) and c[0] == kind for c in kids):
                        continue
                    out.append((kind, k, kids))
    return tuple(out)


def _partitions(n: int):
    """Restricted growth strings: label index per leaf position."""
    def rec(prefix, top):
        if len(prefix) == n:
            yield tuple(prefix)
            return
        for v in range(top + 2):
            yield from rec(prefix + [v], max(top, v))
    yield from rec([0], 0)


def _build(shape, labels, pos):
    if shape == "*":
        label = labels[pos[0]]
        pos[0] += 1
        name, _, auth = label.partition("@")
        return Leaf(name, auth)
    kind, k, kids = shape
    return Gate(kind, k, tuple(_build(c, labels, pos) for c in kids))


def family(max_leaves: int = 4, with_repeats: bool = False) -> list[AccessPolicy]:
    seen: set[str] = set()
    out = []
    for n in range(1, max_leaves + 1):
        assignments = list(_partitions(n)) if with_repeats else [tuple(range(n))]
        for shape in shapes(n):
            for assign in assignments:
                labels = [UNIVERSE[i] for i in assign]
                pol = AccessPolicy(_build(shape, labels, [0]))
                text = pol.to_text()
                if text not in seen:
                    seen.add(text)
                    out.append(pol)
    return out


def subsets(labels) -> list[frozenset]:
    labels = sorted(labels)
    return [frozenset(c) for r in range(len(labels) + 1) for c in itertools.combinations(labels, r)]
