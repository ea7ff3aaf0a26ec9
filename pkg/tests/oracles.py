"""Independent reference implementations used by the scoring tests."""

from fractions import Fraction
from itertools import combinations

import numpy as np


def exact_ridge(Z, Y, alpha):
    """Solve (Z^T Z + alpha I) l = Z^T Y in exact rational arithmetic."""
    Z = [[Fraction(float(v)) for v in row] for row in np.atleast_2d(Z)]
    Y = [Fraction(float(v)) for v in Y]
    a = Fraction(float(alpha))
    m = len(Z[0])
    A = [[sum(r[i] * r[j] for r in Z) + (a if i == j else 0) for j in range(m)] for i in range(m)]
    b = [sum(r[i] * y for r, y in zip(Z, Y)) for i in range(m)]
    for col in range(m):
        piv = next(r for r in range(col, m) if A[r][col] != 0)
        A[col], A[piv] = A[piv], A[col]
        b[col], b[piv] = b[piv], b[col]
        for r in range(m):
            if r != col and A[r][col] != 0:
                f = A[r][col] / A[col][col]
                A[r] = [x - f * y for x, y in zip(A[r], A[col])]
                b[r] -= f * b[col]
    return np.array([float(b[i] / A[i][i]) for i in range(m)])


def simplex_oracle(v):
    """Projection onto the simplex by enumerating every candidate support.

    For a support S the KKT point is v_S shifted by a common constant; the
    projection is the feasible candidate nearest to v.
    """
    v = np.asarray(v, dtype=float)
    m = v.size
    best, best_d = None, np.inf
    for k in range(1, m + 1):
        for S in combinations(range(m), k):
            S = list(S)
            w = np.zeros(m)
            w[S] = v[S] - (v[S].sum() - 1.0) / k
            if (w[S] < -1e-15).any():
                continue
            d = float(((w - v) ** 2).sum())
            if d < best_d:
                best, best_d = w, d
    return best
