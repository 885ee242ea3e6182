"""Multivariate polynomial arithmetic and the element polynomial space.

Polynomials are sparse exponent->coefficient maps.  Coefficients are either
exact rationals (verify mode) or Python floats (solve mode); arithmetic never
mixes the two inside one polynomial.  Monomial ordering is graded
lexicographic with x > y > z, fixed library-wide.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np

from .exactla import QQ, nullspace, rr_echelon, rank_mod_p, to_float


class RankDeficiency(Exception):
    """A claimed direct-sum decomposition failed its exact rank check."""


# ---------------------------------------------------------------------------
# monomial bookkeeping

@lru_cache(maxsize=None)
def monomials(k, nvars=3):
    """Graded-lex ordered exponent tuples of total degree <= k."""
    out = []
    for deg in range(k + 1):
        out.extend(_homogeneous(deg, nvars))
    return tuple(out)


@lru_cache(maxsize=None)
def _homogeneous(deg, nvars):
    if nvars == 1:
        return ((deg,),)
    out = []
    for a in range(deg, -1, -1):
        for rest in _homogeneous(deg - a, nvars - 1):
            out.append((a,) + rest)
    return tuple(out)


@lru_cache(maxsize=None)
def monomial_index(k, nvars=3):
    return {m: i for i, m in enumerate(monomials(k, nvars))}


def dim_P(k, nvars=3):
    if k < 0:
        return 0
    return math.comb(k + nvars, nvars)


# ---------------------------------------------------------------------------
# sparse polynomials

class Poly:
    """Sparse polynomial in `nvars` variables."""

    __slots__ = ("c", "nvars")

    def __init__(self, coeffs=None, nvars=3):
        self.c = dict(coeffs) if coeffs else {}
        self.nvars = nvars

    @classmethod
    def const(cls, value, nvars=3):
        p = cls(nvars=nvars)
        if value != 0:
            p.c[(0,) * nvars] = value
        return p

    @classmethod
    def variable(cls, i, nvars=3, one=QQ(1)):
        e = [0] * nvars
        e[i] = 1
        return cls({tuple(e): one}, nvars=nvars)

    def copy(self):
        return Poly(self.c, self.nvars)

    def degree(self):
        return max((sum(e) for e in self.c), default=-1)

    def __add__(self, other):
        out = dict(self.c)
        for e, v in other.c.items():
            w = out.get(e)
            s = v if w is None else w + v
            if s == 0:
                out.pop(e, None)
            else:
                out[e] = s
        return Poly(out, self.nvars)

    def __sub__(self, other):
        return self + (other * -1)

    def __mul__(self, other):
        if isinstance(other, Poly):
            out = {}
            for e1, v1 in self.c.items():
                for e2, v2 in other.c.items():
                    e = tuple(a + b for a, b in zip(e1, e2))
                    w = out.get(e)
                    s = v1 * v2 if w is None else w + v1 * v2
                    if s == 0:
                        out.pop(e, None)
                    else:
                        out[e] = s
            return Poly(out, self.nvars)
        if other == 0:
            return Poly(nvars=self.nvars)
        return Poly({e: v * other for e, v in self.c.items()}, self.nvars)

    __rmul__ = __mul__

    def diff(self, var):
        out = {}
        for e, v in self.c.items():
            if e[var] == 0 or v == 0:
                continue
            e2 = list(e)
            e2[var] -= 1
            out[tuple(e2)] = v * e[var]
        return Poly(out, self.nvars)

    def eval(self, point):
        total = 0
        for e, v in self.c.items():
            term = v
            for x, a in zip(point, e):
                for _ in range(a):
                    term = term * x
            total = term if total == 0 else total + term
        return total

    def compose_affine(self, point, dirs):
        """Substitute x_i = point_i + sum_j s_j dirs[j][i]; result in the s_j."""
        m = len(dirs)
        subs = []
        for i in range(self.nvars):
            p = Poly.const(point[i], nvars=m)
            for j in range(m):
                if dirs[j][i] != 0:
                    p = p + Poly.variable(j, nvars=m, one=dirs[j][i])
            subs.append(p)
        out = Poly(nvars=m)
        for e, v in self.c.items():
            term = Poly.const(v, nvars=m)
            for i, a in enumerate(e):
                for _ in range(a):
                    term = term * subs[i]
            out = out + term
        return out

    def astype_float(self):
        return Poly({e: to_float(v) for e, v in self.c.items()}, self.nvars)

    def is_zero(self):
        return all(v == 0 for v in self.c.values())


class VectorPoly:
    """Three-component polynomial field."""

    __slots__ = ("comps",)

    def __init__(self, comps):
        self.comps = tuple(comps)

    @classmethod
    def zero(cls):
        return cls([Poly(), Poly(), Poly()])

    def __add__(self, other):
        return VectorPoly([a + b for a, b in zip(self.comps, other.comps)])

    def __sub__(self, other):
        return VectorPoly([a - b for a, b in zip(self.comps, other.comps)])

    def __mul__(self, scalar):
        return VectorPoly([c * scalar for c in self.comps])

    __rmul__ = __mul__

    def degree(self):
        return max(c.degree() for c in self.comps)

    def eval(self, point):
        return [c.eval(point) for c in self.comps]

    def dot(self, vec):
        out = Poly(nvars=self.comps[0].nvars)
        for c, v in zip(self.comps, vec):
            if v != 0:
                out = out + c * v
        return out

    def astype_float(self):
        return VectorPoly([c.astype_float() for c in self.comps])

    def is_zero(self):
        return all(c.is_zero() for c in self.comps)


def curl(p: VectorPoly) -> VectorPoly:
    u1, u2, u3 = p.comps
    return VectorPoly([u3.diff(1) - u2.diff(2),
                       u1.diff(2) - u3.diff(0),
                       u2.diff(0) - u1.diff(1)])


def divergence(p: VectorPoly) -> Poly:
    return p.comps[0].diff(0) + p.comps[1].diff(1) + p.comps[2].diff(2)


def grad(q: Poly) -> VectorPoly:
    return VectorPoly([q.diff(0), q.diff(1), q.diff(2)])


def cross_with_x(p: VectorPoly) -> VectorPoly:
    """x cross p, with x the coordinate position field."""
    x = [Poly.variable(i) for i in range(3)]
    p1, p2, p3 = p.comps
    return VectorPoly([x[1] * p3 - x[2] * p2,
                       x[2] * p1 - x[0] * p3,
                       x[0] * p2 - x[1] * p1])


# ---------------------------------------------------------------------------
# spaces

@dataclass
class SpaceBasis:
    tag: str
    members: list

    def __len__(self):
        return len(self.members)


def vector_monomial_basis(k):
    """Basis of P_k^3, component-major then graded-lex."""
    out = []
    for comp in range(3):
        for e in monomials(k):
            comps = [Poly(), Poly(), Poly()]
            comps[comp] = Poly({e: QQ(1)})
            out.append(VectorPoly(comps))
    return out


def dim_Rk(k):
    return k * (k + 2) * (k + 3) // 2


def dim_Sk(k):
    return k * (k + 2)


def build_Sk(k):
    """Basis of {p homogeneous of degree k : x . p = 0} via exact nullspace."""
    hom = [e for e in monomials(k) if sum(e) == k]
    cols = [(comp, e) for comp in range(3) for e in hom]
    rows_idx = {e: i for i, e in enumerate(_homogeneous(k + 1, 3))}
    mat = [[QQ(0)] * len(cols) for _ in rows_idx]
    for j, (comp, e) in enumerate(cols):
        e2 = list(e)
        e2[comp] += 1
        mat[rows_idx[tuple(e2)]][j] = QQ(1)
    null = nullspace(mat, len(cols))
    members = []
    for vec in null:
        comps = [Poly(), Poly(), Poly()]
        for j, v in enumerate(vec):
            if v != 0:
                comp, e = cols[j]
                comps[comp].c[e] = v
        members.append(VectorPoly(comps))
    if len(members) != dim_Sk(k):
        raise RankDeficiency(f"S_{k} nullspace has dimension {len(members)}, "
                             f"expected {dim_Sk(k)}")
    return members


def build_Rk(k) -> SpaceBasis:
    """Basis of R_k = P_{k-1}^3 + S_k with an exact independence certificate."""
    if k < 1:
        raise ValueError("k must be >= 1")
    members = vector_monomial_basis(k - 1) + build_Sk(k)
    if len(members) != dim_Rk(k):
        raise RankDeficiency(f"R_{k} basis has length {len(members)}")
    rank = rank_mod_p(_int_coeff_rows(members, k))
    if rank != len(members):
        raise RankDeficiency(f"R_{k} basis rank {rank} < {len(members)}")
    return SpaceBasis("Rk", members)


def _int_coeff_rows(members, k):
    """Integer coefficient rows over the P_k^3 monomial frame."""
    idx = monomial_index(k)
    ncols = 3 * len(idx)
    rows = []
    for vp in members:
        row = [0] * ncols
        denom = 1
        for comp, poly in enumerate(vp.comps):
            for e, v in poly.c.items():
                q = QQ(v)
                denom = denom * q.denominator // math.gcd(denom, int(q.denominator))
        for comp, poly in enumerate(vp.comps):
            for e, v in poly.c.items():
                q = QQ(v) * denom
                row[comp * len(idx) + idx[e]] = int(q)
        rows.append(row)
    return rows


def _rational_rank(members, k):
    idx = monomial_index(k)
    ncols = 3 * len(idx)
    rows = []
    for vp in members:
        row = [QQ(0)] * ncols
        for comp, poly in enumerate(vp.comps):
            for e, v in poly.c.items():
                row[comp * len(idx) + idx[e]] = QQ(v)
        rows.append(row)
    return len(rr_echelon(rows))


def verify_decompositions(k):
    """Exact rank verification of both direct decompositions of P_k^3.

    Returns a dict of the checked dimensions; raises RankDeficiency on any
    failure.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > 7:
        raise ValueError("decomposition check supports k <= 7")
    n = 3 * dim_P(k)

    grads = [grad(Poly({e: QQ(1)})) for e in monomials(k + 1) if sum(e) > 0]
    cross = [cross_with_x(vp) for vp in vector_monomial_basis(k - 1)]
    r_grad = _rational_rank(grads, k)
    r_cross = _rational_rank(cross, k)
    r_all = _rational_rank(grads + cross, k)
    dim_cross_expected = n - dim_P(k + 1) + 1
    if not (r_grad == dim_P(k + 1) - 1 and r_cross == dim_cross_expected
            and r_all == n and r_grad + r_cross == n):
        raise RankDeficiency(
            f"grad/cross decomposition of P_{k}: ranks {r_grad}+{r_cross}!={r_all}")

    curls = [curl(vp) for vp in build_Rk(k + 1).members]
    radial = [VectorPoly([Poly({e: QQ(1)}) * Poly.variable(i)
                          for i in range(3)])
              for e in monomials(k - 1)]
    r_curl = _rational_rank(curls, k)
    r_rad = _rational_rank(radial, k)
    r_all2 = _rational_rank(curls + radial, k)
    if not (r_curl == n - dim_P(k - 1) and r_rad == dim_P(k - 1)
            and r_all2 == n and r_curl + r_rad == n):
        raise RankDeficiency(
            f"curl/radial decomposition of P_{k}: ranks {r_curl}+{r_rad}!={r_all2}")

    return {
        "dim_Pk_vec": n,
        "dim_grad": r_grad,
        "dim_x_cross": r_cross,
        "dim_curl_Rkp1": r_curl,
        "dim_x_Pkm1": r_rad,
    }


# ---------------------------------------------------------------------------
# float coefficient arrays

def poly_to_array(poly: Poly, k) -> np.ndarray:
    idx = monomial_index(k)
    out = np.zeros(len(idx))
    for e, v in poly.c.items():
        out[idx[e]] = to_float(v) if not isinstance(v, float) else v
    return out


def vector_poly_to_array(vp: VectorPoly, k) -> np.ndarray:
    return np.stack([poly_to_array(c, k) for c in vp.comps])


def monomial_values(points: np.ndarray, k) -> np.ndarray:
    """Values of all graded-lex monomials of degree <= k at points [n,3]."""
    pts = np.asarray(points, dtype=float)
    monos = monomials(k)
    pw = np.ones((3, k + 1, len(pts)))
    for i in range(3):
        for a in range(1, k + 1):
            pw[i, a] = pw[i, a - 1] * pts[:, i]
    out = np.empty((len(pts), len(monos)))
    for j, (a, b, c) in enumerate(monos):
        out[:, j] = pw[0, a] * pw[1, b] * pw[2, c]
    return out
