"""Interior-penalty assembly for the folded biharmonic problem.

Jump/average convention on an edge with orientation owner T+ and normal n
pointing out of T+::

    [v] = v|_{T-} - v|_{T+},   {v} = (v|_{T+} + v|_{T-}) / 2

so that on a Dirichlet edge (no T-) ``[v] = -v`` and ``{v} = v``. With this
choice the consistency terms below are exact for smooth solutions.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .mesh import EdgeTag, Mesh
from .space import DgSpace, edge_quadrature, triangle_quadrature

STABLE_PENALTY = 30.0


class AssemblyError(ValueError):
    pass


@dataclass(frozen=True)
class Penalties:
    gamma0: float = 30.0
    gamma1: float = 30.0

    def __post_init__(self):
        if not (self.gamma0 > 0 and self.gamma1 > 0):
            raise AssemblyError("penalty parameters must be positive")
        if min(self.gamma0, self.gamma1) < STABLE_PENALTY:
            warnings.warn(
                f"penalties ({self.gamma0}, {self.gamma1}) below {STABLE_PENALTY}; "
                "the discrete problem may be unstable", RuntimeWarning, stacklevel=3)


@dataclass
class ExactSolution:
    """Vectorised callables ``(x, y) -> array``; grad/hess append axes (2,)/(2, 2)."""

    value: Callable
    grad: Callable
    hess: Callable
    third: Callable | None = None


@dataclass
class ProblemSpec:
    """Data of a folding problem.

    ``dirichlet(x, y) -> bool`` decides which boundary edges are clamped; the
    mesh stores the result as edge tags. ``phi(x, y)`` returns an array with a
    trailing axis of length 2.
    """

    f: Callable
    g: Callable | None = None
    phi: Callable | None = None
    fold: object = None
    dirichlet: Callable | None = None
    point_constraints: list = field(default_factory=list)
    exact: ExactSolution | None = None
    domain: str = "unit_square"

    def scaled(self, s: float) -> "ProblemSpec":
        sc = lambda fn: None if fn is None else (lambda x, y: s * np.asarray(fn(x, y)))  # noqa: E731
        ex = None
        if self.exact is not None:
            e = self.exact
            ex = ExactSolution(sc(e.value), sc(e.grad), sc(e.hess), sc(e.third))
        return replace(self, f=sc(self.f), g=sc(self.g), phi=sc(self.phi), exact=ex,
                       point_constraints=[(p, s * v) for p, v in self.point_constraints])


def zero(x, y):
    return np.zeros(np.broadcast(x, y).shape)


def zero_vec(x, y):
    return np.zeros(np.broadcast(x, y).shape + (2,))


def check_compatibility(prob: ProblemSpec, mesh: Mesh, tol: float = 1e-10, step: float = 1e-3,
                        avoid_fold: float = 5e-3) -> float:
    """Max |Phi - grad g| over Dirichlet edge quadrature points.

    grad g is a fourth-order central difference of ``g``; points within
    ``avoid_fold`` of the fold are skipped (g may kink there).
    """
    ed = mesh.edges_with(EdgeTag.DIRICHLET)
    if len(ed) == 0 or prob.g is None:
        return 0.0
    q = edge_quadrature(4)
    P = mesh.edge_points(ed, q.s).reshape(-1, 2)
    if prob.fold is not None:
        keep = np.array([prob.fold.distance(p) > avoid_fold for p in P])
        P = P[keep]
    x, y = P[:, 0], P[:, 1]
    g = prob.g

    def d(fn):
        return (-fn(2) + 8 * fn(1) - 8 * fn(-1) + fn(-2)) / (12 * step)

    gx = d(lambda i: g(x + i * step, y))
    gy = d(lambda i: g(x, y + i * step))
    err = np.max(np.abs(np.asarray(prob.phi(x, y)) - np.column_stack([gx, gy])), initial=0.0)
    if err > tol:
        raise AssemblyError(f"Dirichlet data incompatible: |Phi - grad g| = {err:.3e}")
    return float(err)


@dataclass
class LinearSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray

    def energy(self, v) -> float:
        return float(v @ (self.matrix @ v))


# ---------------------------------------------------------------------------
# traces


@dataclass
class EdgeTraces:
    """Basis traces on one side of a batch of edges.

    V: (nE, nq, nb); G, Hn: (nE, nq, nb, 2); DL: (nE, nq, nb). Hn is D^2 v n
    and DL is the normal derivative of the Laplacian.
    """

    tris: np.ndarray
    V: np.ndarray
    G: np.ndarray
    Hn: np.ndarray
    DL: np.ndarray
    H: np.ndarray


def edge_traces(space: DgSpace, edge_ids, s, side: str = "owner") -> EdgeTraces:
    mesh = space.mesh
    if side == "owner":
        tris, loc = mesh.edge_owner[edge_ids], mesh.edge_owner_local[edge_ids]
    else:
        tris, loc = mesh.edge_neighbor[edge_ids], mesh.edge_neighbor_local[edge_ids]
    ref = mesh.edge_reference_points(edge_ids, tris, loc, s)
    n = mesh.edge_normals()[edge_ids]
    V = space.tabulate(tris, ref, 0)
    G = space.tabulate(tris, ref, 1)
    H = space.tabulate(tris, ref, 2)
    T3 = space.tabulate(tris, ref, 3)
    Hn = np.einsum("eqnij,ej->eqni", H, n)
    DL = np.einsum("eqnjji,ei->eqn", T3, n)
    return EdgeTraces(tris, V, G, Hn, DL, H)


def _edge_quad(space):
    return edge_quadrature(2 * space.k + 2)


def _load_quad(space):
    return triangle_quadrature(2 * space.k + 2)


def _scatter(rows, cols, vals, n):
    A = sp.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n))
    return A.tocsr()


# ---------------------------------------------------------------------------
# assembly


def assemble(mesh: Mesh, space: DgSpace, prob: ProblemSpec, pen: Penalties) -> LinearSystem:
    """Matrix of a_h and vector of l_h."""
    if space.mesh is not mesh:
        raise AssemblyError("space was built on a different mesh")
    nb, N = space.nb, space.ndofs
    rows, cols, vals = [], [], []
    g0, g1 = pen.gamma0, pen.gamma1

    # volume: D^2 u : D^2 v and f v
    qv = triangle_quadrature(2 * space.k)
    H = space.tabulate(np.arange(mesh.n_triangles), qv.xy, 2)
    detB = 2.0 * mesh.areas()
    Ke = np.einsum("eqnij,eqmij,q,e->enm", H, H, qv.weights, detB, optimize=True)
    dofs = space.dofs()
    rows.append(np.repeat(dofs[:, :, None], nb, axis=2))
    cols.append(np.repeat(dofs[:, None, :], nb, axis=1))
    vals.append(Ke)

    ql = _load_quad(space)
    B, x0 = mesh.affine_maps()
    X = x0[:, None, :] + np.einsum("eij,qj->eqi", B, ql.xy)
    fx = np.broadcast_to(prob.f(X[..., 0], X[..., 1]), X.shape[:2])
    V = space.tabulate(np.arange(mesh.n_triangles), ql.xy, 0)
    rhs = np.einsum("eqn,eq,q,e->en", V, fx, ql.weights, detB).ravel()

    qe = _edge_quad(space)
    w = qe.weights
    h = mesh.edge_lengths()

    # interior and crease edges
    ie = mesh.edges_with(EdgeTag.INTERIOR, EdgeTag.CREASE)
    if len(ie):
        o = edge_traces(space, ie, qe.s, "owner")
        b = edge_traces(space, ie, qe.s, "neighbor")
        jV = np.concatenate([-o.V, b.V], axis=2)
        jG = np.concatenate([-o.G, b.G], axis=2)
        aHn = 0.5 * np.concatenate([o.Hn, b.Hn], axis=2)
        aDL = 0.5 * np.concatenate([o.DL, b.DL], axis=2)
        grad_on = (mesh.edge_tags[ie] != EdgeTag.CREASE).astype(float)
        Me = _edge_matrix(jV, jG, aHn, aDL, w, h[ie], g0, g1, grad_on)
        d = np.concatenate([space.dofs(o.tris), space.dofs(b.tris)], axis=1)
        rows.append(np.repeat(d[:, :, None], 2 * nb, axis=2))
        cols.append(np.repeat(d[:, None, :], 2 * nb, axis=1))
        vals.append(Me)

    # Dirichlet edges: matrix terms and data
    de = mesh.edges_with(EdgeTag.DIRICHLET)
    if len(de):
        o = edge_traces(space, de, qe.s, "owner")
        he = h[de]
        Me = _edge_matrix(-o.V, -o.G, o.Hn, o.DL, w, he, g0, g1, np.ones(len(de)))
        d = space.dofs(o.tris)
        rows.append(np.repeat(d[:, :, None], nb, axis=2))
        cols.append(np.repeat(d[:, None, :], nb, axis=1))
        vals.append(Me)
        P = mesh.edge_points(de, qe.s)
        gx = np.broadcast_to(prob.g(P[..., 0], P[..., 1]), P.shape[:2]) if prob.g else 0 * P[..., 0]
        Phi = np.asarray(prob.phi(P[..., 0], P[..., 1])) if prob.phi else 0 * P
        Phi = np.broadcast_to(Phi, P.shape)
        # l_h: -{dn grad v}.Phi + {dn Lap v} g - g1/h [grad v].Phi - g0/h^3 [v] g
        le = (-np.einsum("eqni,eqi->eqn", o.Hn, Phi)
              + o.DL * gx[:, :, None]
              + (g1 / he)[:, None, None] * np.einsum("eqni,eqi->eqn", o.G, Phi)
              + (g0 / he**3)[:, None, None] * o.V * gx[:, :, None])
        fe = np.einsum("eqn,q,e->en", le, w, he)
        np.add.at(rhs, d.ravel(), fe.ravel())

    A = _scatter(np.concatenate([r.ravel() for r in rows]),
                 np.concatenate([c.ravel() for c in cols]),
                 np.concatenate([v.ravel() for v in vals]), N)
    sys = LinearSystem(A, rhs)
    for loc, value in prob.point_constraints:
        sys = apply_point_constraint(sys, space, loc, value, gamma0=g0)
    return sys


def _edge_matrix(jV, jG, aHn, aDL, w, h, g0, g1, grad_on):
    """Local edge matrices for the consistency, symmetry and penalty terms."""
    c = np.einsum("eqni,eqmi,q->enm", aHn, jG, w, optimize=True)
    pg = np.einsum("eqni,eqmi,q->enm", jG, jG, w, optimize=True)
    d = np.einsum("eqn,eqm,q->enm", aDL, jV, w, optimize=True)
    pv = np.einsum("eqn,eqm,q->enm", jV, jV, w, optimize=True)
    grad = (c + c.transpose(0, 2, 1)) + (g1 / h)[:, None, None] * pg
    val = -(d + d.transpose(0, 2, 1)) + (g0 / h**3)[:, None, None] * pv
    return h[:, None, None] * (grad_on[:, None, None] * grad + val)


def apply_point_constraint(sys: LinearSystem, space: DgSpace, loc, value: float,
                           weight: float | None = None, gamma0: float | None = None) -> LinearSystem:
    """Symmetric penalty enforcing ``u_h(loc) = value`` on every element
    whose closure contains ``loc``.

    The default weight on element T is ``gamma0 / h_T**3``.
    """
    mesh = space.mesh
    tris = mesh.locate(loc)
    if len(tris) == 0:
        raise AssemblyError(f"point {tuple(loc)} lies outside the mesh")
    if weight is None and gamma0 is None:
        raise AssemblyError("need an explicit weight or gamma0")
    hT = mesh.diameters()
    rows, cols, vals = [], [], []
    rhs = sys.rhs.copy()
    for T in tris:
        lam = mesh.barycentric(T, loc)
        phi = space.tabulate([T], lam[1:][None, :], 0)[0, 0]
        wT = weight if weight is not None else gamma0 / hT[T] ** 3
        d = space.dofs([T])[0]
        rows.append(np.repeat(d, len(d)))
        cols.append(np.tile(d, len(d)))
        vals.append(wT * np.outer(phi, phi).ravel())
        rhs[d] += wT * value * phi
    P = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=sys.matrix.shape)
    return LinearSystem((sys.matrix + P).tocsr(), rhs)


# ---------------------------------------------------------------------------
# norms


def _norm_terms(mesh: Mesh, space: DgSpace, prob: ProblemSpec | None, pen: Penalties,
                coeffs, exact: bool):
    c = space.element_coeffs(coeffs)
    ql = _load_quad(space)
    H = space.tabulate(np.arange(mesh.n_triangles), ql.xy, 2)
    D2 = np.einsum("eqnij,en->eqij", H, c)
    if exact:
        B, x0 = mesh.affine_maps()
        X = x0[:, None, :] + np.einsum("eij,qj->eqi", B, ql.xy)
        D2 = np.asarray(prob.exact.hess(X[..., 0], X[..., 1])) - D2
    vol = np.einsum("eqij,eqij,q,e->e", D2, D2, ql.weights, 2.0 * mesh.areas())

    qe = _edge_quad(space)
    h = mesh.edge_lengths()
    jumps_v = np.zeros(mesh.n_edges)
    jumps_g = np.zeros(mesh.n_edges)
    ie = mesh.edges_with(EdgeTag.INTERIOR, EdgeTag.CREASE)
    if len(ie):
        o = edge_traces(space, ie, qe.s, "owner")
        b = edge_traces(space, ie, qe.s, "neighbor")
        jv = np.einsum("eqn,en->eq", b.V, c[b.tris]) - np.einsum("eqn,en->eq", o.V, c[o.tris])
        jg = np.einsum("eqni,en->eqi", b.G, c[b.tris]) - np.einsum("eqni,en->eqi", o.G, c[o.tris])
        jumps_v[ie] = np.einsum("eq,q->e", jv**2, qe.weights) * h[ie]
        gj = np.einsum("eqi,q->e", jg**2, qe.weights) * h[ie]
        jumps_g[ie] = np.where(mesh.edge_tags[ie] == EdgeTag.CREASE, 0.0, gj)
    de = mesh.edges_with(EdgeTag.DIRICHLET)
    if len(de):
        o = edge_traces(space, de, qe.s, "owner")
        jv = -np.einsum("eqn,en->eq", o.V, c[o.tris])
        jg = -np.einsum("eqni,en->eqi", o.G, c[o.tris])
        if exact:
            P = mesh.edge_points(de, qe.s)
            jv = jv + prob.g(P[..., 0], P[..., 1])
            jg = jg + np.asarray(prob.phi(P[..., 0], P[..., 1]))
        jumps_v[de] = np.einsum("eq,q->e", jv**2, qe.weights) * h[de]
        jumps_g[de] = np.einsum("eqi,q->e", jg**2, qe.weights) * h[de]
    return vol, pen.gamma0 / h**3 * jumps_v, pen.gamma1 / h * jumps_g


def dg_norm(mesh: Mesh, space: DgSpace, prob: ProblemSpec | None, pen: Penalties, coeffs) -> float:
    """DG energy norm of a discrete function (Dirichlet jumps are -v)."""
    vol, jv, jg = _norm_terms(mesh, space, prob, pen, coeffs, exact=False)
    return float(np.sqrt(vol.sum() + jv.sum() + jg.sum()))


def dg_error(mesh: Mesh, space: DgSpace, prob: ProblemSpec, pen: Penalties, coeffs) -> float:
    """DG norm of u - u_h using the exact solution of ``prob``."""
    if prob.exact is None:
        raise AssemblyError("problem has no exact solution")
    vol, jv, jg = _norm_terms(mesh, space, prob, pen, coeffs, exact=True)
    return float(np.sqrt(vol.sum() + jv.sum() + jg.sum()))
