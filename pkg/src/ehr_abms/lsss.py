"""Compile monotone policies into linear secret sharing programs over Z_r.

Every gate is treated as a k-of-m threshold (AND is m-of-m, OR is 1-of-m).
A gate whose vector is v spawns k-1 fresh columns; child j (j = 1..m)
receives v extended with (j, j^2, ..., j^(k-1)) on those columns.  With
the secret in column 0 and random values elsewhere, child j's share is
p(j) for a degree k-1 polynomial p with p(0) equal to the parent's share,
so any k children recover the parent and fewer learn nothing.

A set of rows reconstructs iff (1, 0, ..., 0) lies in their span.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .pairing import GROUP_ORDER
from .policy import AccessPolicy, Gate, Leaf, Node
from .util import Entropy, draw, os_entropy

R = GROUP_ORDER


@dataclass(frozen=True)
class LsssProgram:
    matrix: tuple[tuple[int, ...], ...]
    row_labels: tuple[str, ...]

    @property
    def rows(self) -> int:
        return len(self.matrix)

    @property
    def cols(self) -> int:
        return len(self.matrix[0]) if self.matrix else 0

    def rows_for(self, labels: Iterable[str]) -> list[int]:
        held = set(labels)
        return [i for i, lab in enumerate(self.row_labels) if lab in held]

    def share(self, secret: int, entropy: Entropy = os_entropy) -> list[int]:
        """Shares lambda_x = M_x . (secret, y_2, ..., y_c) with uniform y_i."""
        vec = [secret % R] + [
            int.from_bytes(draw(entropy, 64), "big") % R for _ in range(self.cols - 1)
        ]
        return [sum(m * v for m, v in zip(row, vec)) % R for row in self.matrix]

    def reconstruction_coefficients(self, row_indices: Sequence[int]) -> dict[int, int] | None:
        """Coefficients c with sum c_x M_x = (1, 0, ..., 0), or None if the rows do not span it."""
        rows = [self.matrix[i] for i in row_indices]
        coeffs = solve_target(rows, self.cols)
        if coeffs is None:
            return None
        return {idx: c for idx, c in zip(row_indices, coeffs) if c}

    def reconstruct(self, shares: dict[int, int]) -> int | None:
        coeffs = self.reconstruction_coefficients(sorted(shares))
        if coeffs is None:
            return None
        return sum(c * shares[i] for i, c in coeffs.items()) % R


def policy_to_lsss(policy: AccessPolicy | Node) -> LsssProgram:
    root = policy.root if isinstance(policy, AccessPolicy) else policy
    rows: list[tuple[dict[int, int], str]] = []
    next_col = 1

    def walk(node: Node, vec: dict[int, int]) -> None:
        nonlocal next_col
        if isinstance(node, Leaf):
            rows.append((vec, node.label))
            return
        assert isinstance(node, Gate)
        fresh = list(range(next_col, next_col + node.k - 1))
        next_col += node.k - 1
        for j, child in enumerate(node.children, start=1):
            child_vec = dict(vec)
            power = 1
            for col in fresh:
                power = power * j % R
                child_vec[col] = power
            walk(child, child_vec)

    walk(root, {0: 1})
    width = next_col
    matrix = tuple(tuple(v.get(c, 0) for c in range(width)) for v, _ in rows)
    return LsssProgram(matrix, tuple(label for _, label in rows))


def solve_target(rows: Sequence[Sequence[int]], cols: int) -> list[int] | None:
    """Solve c^T A = e_1 over Z_r by Gaussian elimination on A^T.

    Returns one solution (free variables set to zero) or None.
    """
    n = len(rows)
    if n == 0:
        return None
    # augmented system: cols equations, n unknowns
    aug = [[rows[i][j] % R for i in range(n)] + [1 if j == 0 else 0] for j in range(cols)]
    pivots: list[int] = []
    r = 0
    for c in range(n):
        piv = next((i for i in range(r, cols) if aug[i][c]), None)
        if piv is None:
            continue
        aug[r], aug[piv] = aug[piv], aug[r]
        inv = pow(aug[r][c], -1, R)
        aug[r] = [x * inv % R for x in aug[r]]
        for i in range(cols):
            if i != r and aug[i][c]:
                f = aug[i][c]
                aug[i] = [(x - f * y) % R for x, y in zip(aug[i], aug[r])]
        pivots.append(c)
        r += 1
        if r == cols:
            break
    for i in range(r, cols):
        if aug[i][n]:
            return None
    sol = [0] * n
    for i, c in enumerate(pivots):
        sol[c] = aug[i][n]
    return sol
