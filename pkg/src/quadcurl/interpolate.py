"""Field oracles, the global interpolation operator, and error norms."""

from __future__ import annotations

import numpy as np
import sympy as sp

from .elements import ElementContext, OracleField, apply_dofs
from .mesh import DofMap, MeshComplex
from .polyspace import monomial_values
from .quadrature import rule_for
from .reference import ReferenceBasis
from .transform import element_basis


class NegativeDifference(Exception):
    pass


def _vectorize(fn):
    def call(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = fn(x[:, 0], x[:, 1], x[:, 2])
        return out
    return call


def _lambdify_vec(exprs, syms, shape):
    fns = [sp.lambdify(syms, e, "numpy") for e in exprs]

    def call(x, y, z):
        n = len(x)
        out = np.empty((n,) + (len(fns),))
        for i, f in enumerate(fns):
            v = f(x, y, z)
            out[:, i] = np.broadcast_to(v, (n,))
        return out.reshape((n,) + shape)
    return call


class SymbolicOracle:
    """Analytic field with symbolic derivatives of its curl.

    Derivatives required by the pointwise DOFs come from exact symbolic
    differentiation; finite differences would wreck the high-order rates.
    """

    def __init__(self, u_exprs, syms=None):
        syms = syms or sp.symbols("x y z")
        x, y, z = syms
        self.syms = syms
        self.u_exprs = [sp.sympify(e) for e in u_exprs]
        c = self._curl_exprs(self.u_exprs)
        cc = self._curl_exprs(c)
        self._u = _lambdify_vec(self.u_exprs, syms, (3,))
        self._curl = _lambdify_vec(c, syms, (3,))
        self._curlcurl = _lambdify_vec(cc, syms, (3,))
        jac = [sp.diff(c[i], s) for i in range(3) for s in syms]
        self._jac = _lambdify_vec(jac, syms, (3, 3))
        hess = [sp.diff(c[i], s1, s2) for i in range(3)
                for s1 in syms for s2 in syms]
        self._hess = _lambdify_vec(hess, syms, (3, 3, 3))
        self.curl_exprs = c
        self.curlcurl_exprs = cc

    def _curl_exprs(self, u):
        x, y, z = self.syms
        return [sp.diff(u[2], y) - sp.diff(u[1], z),
                sp.diff(u[0], z) - sp.diff(u[2], x),
                sp.diff(u[1], x) - sp.diff(u[0], y)]

    def quad_curl_rhs(self):
        """Source field (curl^4 + identity) applied to this solution."""
        c2 = self.curlcurl_exprs
        c4 = self._curl_exprs(self._curl_exprs(c2))
        f = [sp.simplify(a + b) for a, b in zip(c4, self.u_exprs)]
        return CallableOracle(_vectorize(_lambdify_vec(f, self.syms, (3,))))

    u = property(lambda self: _vectorize(self._u))
    curl = property(lambda self: _vectorize(self._curl))
    curlcurl = property(lambda self: _vectorize(self._curlcurl))
    curl_jac = property(lambda self: _vectorize(self._jac))
    curl_hess = property(lambda self: _vectorize(self._hess))


class CallableOracle:
    """Oracle from plain callables, meant for source terms.

    Only the values are required (sources are only integrated against test
    functions); omitted curl data defaults to zero and omitted derivative
    callables stay unset.
    """

    def __init__(self, u, curl=None, curl_jac=None, curl_hess=None,
                 curlcurl=None):
        self.u = u
        self.curl = curl or (lambda x: np.zeros_like(np.atleast_2d(x)))
        self.curl_jac = curl_jac
        self.curl_hess = curl_hess
        self.curlcurl = curlcurl or (lambda x: np.zeros_like(np.atleast_2d(x)))


class ZeroOracle:
    def u(self, x):
        return np.zeros((len(np.atleast_2d(x)), 3))

    curl = curlcurl = u

    def curl_jac(self, x):
        return np.zeros((len(np.atleast_2d(x)), 3, 3))

    def curl_hess(self, x):
        return np.zeros((len(np.atleast_2d(x)), 3, 3, 3))


class PolyOracle:
    """Oracle for a polynomial field given by float coefficient arrays."""

    def __init__(self, coeffs, k):
        from .reference import _diff_matrix
        self.k = k
        self.coeffs = np.asarray(coeffs, dtype=float)  # [3, M_k]
        dx, dy, dz = (_diff_matrix(k, v) for v in range(3))
        c = self.coeffs
        self.curl_coeffs = np.stack([c[2] @ dy - c[1] @ dz,
                                     c[0] @ dz - c[2] @ dx,
                                     c[1] @ dx - c[0] @ dy])
        d2 = [_diff_matrix(k - 1, v) for v in range(3)]
        self.jac_coeffs = np.stack([
            np.stack([self.curl_coeffs[c_] @ d2[d] for d in range(3)])
            for c_ in range(3)])
        d3 = [_diff_matrix(k - 2, v) for v in range(3)]
        self.hess_coeffs = np.stack([
            np.stack([np.stack([self.jac_coeffs[c_, d] @ d3[e]
                                for e in range(3)]) for d in range(3)])
            for c_ in range(3)])

    def u(self, x):
        return monomial_values(np.atleast_2d(x), self.k) @ self.coeffs.T

    def curl(self, x):
        return monomial_values(np.atleast_2d(x), self.k - 1) @ self.curl_coeffs.T

    def curlcurl(self, x):
        jac = self.curl_jac(x)
        return np.stack([jac[:, 2, 1] - jac[:, 1, 2],
                         jac[:, 0, 2] - jac[:, 2, 0],
                         jac[:, 1, 0] - jac[:, 0, 1]], axis=-1)

    def curl_jac(self, x):
        tab = monomial_values(np.atleast_2d(x), self.k - 2)
        return np.einsum("nm,cdm->ncd", tab, self.jac_coeffs)

    def curl_hess(self, x):
        tab = monomial_values(np.atleast_2d(x), self.k - 3)
        return np.einsum("nm,cdem->ncde", tab, self.hess_coeffs)


class DiscreteField:
    """Global coefficient vector over a DofMap with element-wise evaluators."""

    def __init__(self, mesh: MeshComplex, dofmap: DofMap,
                 ref: ReferenceBasis, coeffs=None, dtype=np.float64):
        self.mesh = mesh
        self.dofmap = dofmap
        self.ref = ref
        self.dtype = dtype
        self.coeffs = (np.zeros(dofmap.n_dofs, dtype=dtype)
                       if coeffs is None else np.asarray(coeffs, dtype=dtype))
        self._ctx = {}
        self._basis = {}

    def context(self, t) -> ElementContext:
        if t not in self._ctx:
            self._ctx[t] = ElementContext(self.mesh.element_vertices(t))
        return self._ctx[t]

    def basis(self, t):
        if t not in self._basis:
            self._basis[t] = element_basis(self.context(t), self.ref,
                                           dtype=self.dtype)
        return self._basis[t]

    def local_pushed_coeffs(self, t):
        eb = self.basis(t)
        return eb.C @ self.coeffs[self.dofmap.gather(t)]

    def eval_element(self, t, xhat, what="u"):
        """Evaluate on element t at reference points xhat."""
        eb = self.basis(t)
        mu = self.local_pushed_coeffs(t)
        pb = eb.pushed
        if what == "u":
            tab = pb.values(xhat)
        elif what == "curl":
            tab = pb.curls(xhat)
        elif what == "curlcurl":
            tab = pb.curl_curls(xhat)
        elif what == "curl_jac":
            tab = pb.curl_jacs(xhat)
        elif what == "curl_hess":
            tab = pb.curl_hess(xhat)
        else:
            raise ValueError(what)
        return np.einsum("nj...,j->n...", tab, mu)


class DiscreteOracle:
    """FieldOracle view of a DiscreteField on a structured mesh.

    Needs point location; supported for the structured cube/L-shape families
    where the containing cell follows from coordinates.
    """

    def __init__(self, field: DiscreteField, N):
        self.field = field
        self.N = N
        mesh = field.mesh
        self._by_key = {self._tet_key(mesh.vertices[mesh.tets[t]]): t
                        for t in range(mesh.n_tets)}

    @staticmethod
    def _tet_key(vv):
        return tuple(np.round(np.asarray(vv).ravel(), 12))

    def locate(self, x):
        """Element ids containing points x (boundary ties resolved inward)."""
        mesh = self.field.mesh
        N = self.N
        x = np.atleast_2d(x)
        out = np.empty(len(x), dtype=np.int64)
        for n, pt in enumerate(x):
            cell = np.clip(np.floor(pt * N - 1e-12).astype(int), 0, N - 1)
            loc = pt * N - cell
            order = np.argsort(-loc, kind="stable")  # descending coordinates
            # Kuhn tet with x_{pi(1)} <= ... <= x_{pi(3)} : path adds axes in
            # descending-coordinate order
            base = cell / N
            path = [base.copy()]
            for axis in order:
                nxt = path[-1].copy()
                nxt[axis] += 1.0 / N
                path.append(nxt)
            vv = np.array(sorted(map(tuple, path)))
            out[n] = self._by_key[self._tet_key(vv)]
        return out

    def _eval(self, x, what):
        x = np.atleast_2d(x)
        tids = self.locate(x)
        shapes = {"u": (3,), "curl": (3,), "curlcurl": (3,),
                  "curl_jac": (3, 3), "curl_hess": (3, 3, 3)}
        out = np.empty((len(x),) + shapes[what])
        for t in np.unique(tids):
            sel = tids == t
            xhat = self.field.context(t).amap.pull(x[sel])
            out[sel] = self.field.eval_element(t, xhat, what)
        return out

    def u(self, x):
        return self._eval(x, "u")

    def curl(self, x):
        return self._eval(x, "curl")

    def curlcurl(self, x):
        return self._eval(x, "curlcurl")

    def curl_jac(self, x):
        return self._eval(x, "curl_jac")

    def curl_hess(self, x):
        return self._eval(x, "curl_hess")


def check_oracle(oracle, mesh, n_samples=8, tol=1e-10):
    """Sanity check: the curl Jacobian must be trace-free (div curl = 0)."""
    step = max(1, mesh.n_tets // n_samples)
    pts = np.stack([mesh.element_vertices(t).mean(axis=0)
                    for t in range(0, mesh.n_tets, step)])
    jac = np.asarray(oracle.curl_jac(pts))
    div = np.trace(jac, axis1=1, axis2=2)
    scale = max(np.abs(jac).max(), 1.0)
    if np.abs(div).max() > tol * scale:
        raise ValueError(f"oracle curl is not divergence-free: "
                         f"|div| up to {np.abs(div).max():.2e}")


def interpolate(oracle, mesh: MeshComplex, dofmap: DofMap,
                ref: ReferenceBasis, quad_degree=14) -> DiscreteField:
    """Global interpolant: every DOF of the result equals the oracle's DOF."""
    check_oracle(oracle, mesh)
    field = DiscreteField(mesh, dofmap, ref)
    of = OracleField(oracle)
    for t in range(mesh.n_tets):
        ctx = field.context(t)
        vals = apply_dofs(ctx, of, quad_degree=quad_degree)[:, 0]
        field.coeffs[dofmap.gather(t)] = vals
    return field


def error_norms(field: DiscreteField, oracle, quad_degree=14):
    """(L2, curl, curlcurl) errors of oracle - field by element quadrature."""
    rule = rule_for(3, quad_degree)
    xhat = rule.points
    w = rule.weights
    acc = np.zeros(3)
    for t in range(field.mesh.n_tets):
        ctx = field.context(t)
        xphys = ctx.amap.apply(xhat)
        scale = abs(ctx.amap.det)
        for i, what in enumerate(("u", "curl", "curlcurl")):
            fh = field.eval_element(t, xhat, what)
            ex = getattr(oracle, {"u": "u", "curl": "curl",
                                  "curlcurl": "curlcurl"}[what])(xphys)
            acc[i] += scale * float(w @ ((fh - ex) ** 2).sum(axis=1))
    return tuple(np.sqrt(acc))


def field_norms(field: DiscreteField, quad_degree=14):
    """(L2, curl, curlcurl) norms of a discrete field."""
    return error_norms(field, ZeroOracle(), quad_degree=quad_degree)


def energy_norm(field: DiscreteField, quad_degree=14):
    l2, _, cc = field_norms(field, quad_degree)
    return float(np.sqrt(l2 ** 2 + cc ** 2))


def energy_norm_difference(coarse_energy, fine_energy):
    """sqrt(|||u_fine|||^2 - |||u_coarse|||^2) for nested Galerkin solutions."""
    rad = fine_energy ** 2 - coarse_energy ** 2
    if rad < -1e-12:
        raise NegativeDifference(f"radicand {rad:.3e} < 0: non-nested spaces "
                                 "or solver failure")
    return float(np.sqrt(max(rad, 0.0)))
