"""Reference implementations kept independent of the package under test."""

import sympy


def oracle_spans_target(matrix, rows) -> bool:
    """Independent check with sympy over the rationals.

    The compiled entries are tiny integers (powers of child indices up to
    4), so no minor can reach the prime r and rank over Q equals rank mod r.
    """
    if not rows:
        return False
    a = sympy.Matrix([list(matrix[i]) for i in rows])
    e1 = sympy.Matrix([[1] + [0] * (a.shape[1] - 1)])
    return a.rank() == a.col_join(e1).rank()
