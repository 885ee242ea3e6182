"""Quadrature on the reference edge, triangle, and tetrahedron.

1-D rules are Gauss-Legendre on [0,1].  The 2-D/3-D rules are collapsed
Gauss-Jacobi tensor constructions on the unit simplices; weights are positive
by construction and every shipped rule is certified against the closed-form
factorial integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .exactla import QQ
from .polyspace import monomials

MAX_DEGREE = 20


class UnsupportedDegree(Exception):
    pass


@dataclass(frozen=True)
class QuadratureRule:
    dimension: int
    points: np.ndarray    # [n, dimension], reference coordinates
    weights: np.ndarray   # [n], sum to the reference measure
    exactness_degree: int


def exact_monomial_integral(domain, exponents):
    """Exact integral of a monomial over the reference domain.

    domain: 'edge' ([0,1]), 'triangle' (x,y>=0, x+y<=1), or 'tet'.
    """
    if domain == "edge":
        (a,) = exponents
        return QQ(1, a + 1)
    if domain == "triangle":
        a, b = exponents
        return QQ(math.factorial(a) * math.factorial(b),
                  math.factorial(a + b + 2))
    if domain == "tet":
        a, b, c = exponents
        return QQ(math.factorial(a) * math.factorial(b) * math.factorial(c),
                  math.factorial(a + b + c + 3))
    raise ValueError(f"unknown domain {domain!r}")


def _gauss01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return (x + 1.0) / 2.0, w / 2.0


def _jacobi01(n, alpha):
    """Nodes/weights for integral over [0,1] with weight (1-t)^alpha."""
    x, w = roots_jacobi(n, alpha, 0.0)
    return (x + 1.0) / 2.0, w / 2.0 ** (alpha + 1)


@lru_cache(maxsize=None)
def rule_for(dimension, degree) -> QuadratureRule:
    """Rule integrating polynomials of total degree <= degree exactly."""
    if degree > MAX_DEGREE:
        raise UnsupportedDegree(f"degree {degree} > {MAX_DEGREE}")
    degree = max(degree, 0)
    n = degree // 2 + 1
    if dimension == 1:
        x, w = _gauss01(n)
        rule = QuadratureRule(1, x[:, None].copy(), w.copy(), 2 * n - 1)
    elif dimension == 2:
        xa, wa = _gauss01(n)
        xb, wb = _jacobi01(n, 1.0)
        pts, wts = [], []
        for b, vb in zip(xb, wb):
            for a, va in zip(xa, wa):
                pts.append((a * (1.0 - b), b))
                wts.append(va * vb)
        rule = QuadratureRule(2, np.array(pts), np.array(wts), 2 * n - 1)
    elif dimension == 3:
        xa, wa = _gauss01(n)
        xb, wb = _jacobi01(n, 1.0)
        xc, wc = _jacobi01(n, 2.0)
        pts, wts = [], []
        for c, vc in zip(xc, wc):
            for b, vb in zip(xb, wb):
                for a, va in zip(xa, wa):
                    pts.append((a * (1.0 - b) * (1.0 - c), b * (1.0 - c), c))
                    wts.append(va * vb * vc)
        rule = QuadratureRule(3, np.array(pts), np.array(wts), 2 * n - 1)
    else:
        raise ValueError(f"dimension must be 1, 2, or 3, got {dimension}")
    assert np.all(rule.weights > 0)
    return rule


_DOMAIN = {1: "edge", 2: "triangle", 3: "tet"}


def certify_rule(rule: QuadratureRule, rtol=1e-13):
    """Check the rule against the exact factorial integrals.

    Returns the worst relative error; raises AssertionError beyond rtol.
    """
    domain = _DOMAIN[rule.dimension]
    worst = 0.0
    for expo in monomials(rule.exactness_degree, rule.dimension):
        vals = np.ones(len(rule.points))
        for i, a in enumerate(expo):
            if a:
                vals *= rule.points[:, i] ** a
        approx = float(rule.weights @ vals)
        exact = float(exact_monomial_integral(domain, expo))
        err = abs(approx - exact) / abs(exact)
        worst = max(worst, err)
    assert worst <= rtol, f"rule dim={rule.dimension} off by {worst}"
    return worst
