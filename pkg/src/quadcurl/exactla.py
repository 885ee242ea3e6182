"""Exact rational linear algebra used by the verify-mode paths.

Matrices are plain lists of lists of rational scalars.  gmpy2.mpq is used
when available (it is 5-10x faster than fractions.Fraction); the pure-Python
Fraction fallback produces identical results.
"""

from __future__ import annotations

try:
    from gmpy2 import mpq as QQ
except ImportError:  # pragma: no cover
    from fractions import Fraction as QQ

import numpy as np

__all__ = ["QQ", "rr_echelon", "nullspace", "solve_dual", "det_and_inverse",
           "rank_mod_p", "to_float"]

_P_RANK = (1 << 31) - 1  # Mersenne prime; products of residues fit in int64


def to_float(x):
    return float(QQ(x))


def rr_echelon(rows):
    """In-place reduced row echelon form. Returns the pivot column list."""
    nrows = len(rows)
    ncols = len(rows[0]) if nrows else 0
    pivots = []
    r = 0
    for c in range(ncols):
        p = None
        for i in range(r, nrows):
            if rows[i][c] != 0:
                p = i
                break
        if p is None:
            continue
        rows[r], rows[p] = rows[p], rows[r]
        inv = 1 / rows[r][c]
        rows[r] = [v * inv for v in rows[r]]
        piv = rows[r]
        for i in range(nrows):
            if i != r and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [a - f * b for a, b in zip(rows[i], piv)]
        pivots.append(c)
        r += 1
        if r == nrows:
            break
    return pivots


def nullspace(rows, ncols):
    """Exact nullspace basis (list of column vectors) of a rational matrix."""
    work = [list(row) for row in rows]
    if not work:
        return [[QQ(1) if i == j else QQ(0) for i in range(ncols)]
                for j in range(ncols)]
    pivots = rr_echelon(work)
    pivot_set = set(pivots)
    free = [c for c in range(ncols) if c not in pivot_set]
    basis = []
    for fc in free:
        vec = [QQ(0)] * ncols
        vec[fc] = QQ(1)
        for r, pc in enumerate(pivots):
            vec[pc] = -work[r][fc]
        basis.append(vec)
    return basis


def det_and_inverse(matrix):
    """Exact determinant and inverse by Gauss-Jordan with partial pivoting.

    Pivots are chosen by largest float magnitude, which keeps intermediate
    rationals reasonably small on the matrices seen here.
    """
    n = len(matrix)
    a = [list(row) + [QQ(0)] * n for row in matrix]
    for i in range(n):
        a[i][n + i] = QQ(1)
    det = QQ(1)
    for c in range(n):
        p, best = None, -1.0
        for i in range(c, n):
            v = a[i][c]
            if v != 0:
                m = abs(to_float(v))
                if m > best:
                    p, best = i, m
        if p is None:
            return QQ(0), None
        if p != c:
            a[c], a[p] = a[p], a[c]
            det = -det
        piv = a[c][c]
        det *= piv
        inv = 1 / piv
        a[c] = [v * inv for v in a[c]]
        rowc = a[c]
        for i in range(n):
            if i != c and a[i][c] != 0:
                f = a[i][c]
                ai = a[i]
                a[i] = [x - f * y for x, y in zip(ai, rowc)]
    invm = [row[n:] for row in a]
    return det, invm


def solve_dual(matrix):
    """Return (det, C) with matrix @ C = I, both exact."""
    det, inv = det_and_inverse(matrix)
    return det, inv


def rank_mod_p(int_rows, p=_P_RANK):
    """Rank of an integer matrix modulo a prime, vectorized with numpy.

    rank_mod_p <= true rank, so a full-rank result is an exact certificate
    of linear independence.
    """
    a = np.array(int_rows, dtype=object) % p
    a = a.astype(np.int64)
    nrows, ncols = a.shape
    r = 0
    for c in range(ncols):
        nz = np.nonzero(a[r:, c])[0]
        if nz.size == 0:
            continue
        i = r + nz[0]
        if i != r:
            a[[r, i]] = a[[i, r]]
        inv = pow(int(a[r, c]), p - 2, p)
        a[r] = (a[r] * inv) % p
        col = a[:, c].copy()
        col[r] = 0
        a = (a - np.outer(col, a[r])) % p
        r += 1
        if r == nrows:
            break
    return r
