"""Discontinuous Lagrange spaces on triangles.

The reference element is the unit simplex with vertices (0, 0), (1, 0), (0, 1).
Basis functions are nodal Lagrange polynomials on the principal lattice, stored
as monomial coefficient vectors so that every derivative up to order four is
exact polynomial differentiation.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

MAX_ORDER = 4
MAX_QUAD_DEGREE = 20


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature on a reference cell.

    ``points`` are barycentric coordinates, shape (n, 3) on the triangle and
    (n, 2) on the unit edge. ``weights`` sum to the reference measure.
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int

    @property
    def xy(self) -> np.ndarray:
        """Cartesian reference coordinates (triangle rules only)."""
        return self.points[:, 1:]

    @property
    def s(self) -> np.ndarray:
        """Edge parameter in [0, 1] (edge rules only)."""
        return self.points[:, 1]


def _check_degree(degree: int) -> None:
    if not 0 <= degree <= MAX_QUAD_DEGREE:
        raise ValueError(f"unsupported quadrature degree {degree} (0..{MAX_QUAD_DEGREE})")


@lru_cache(maxsize=None)
def triangle_quadrature(degree: int) -> QuadratureRule:
    """Collapsed Gauss-Jacobi (Stroud conical product) rule exact to ``degree``."""
    _check_degree(degree)
    n = degree // 2 + 1
    xa, wa = roots_jacobi(n, 1.0, 0.0)
    xb, wb = roots_legendre(n)
    s = 0.5 * (xa + 1.0)
    t = 0.5 * (xb + 1.0)
    S, T = np.meshgrid(s, t, indexing="ij")
    W = np.outer(wa, wb) / 8.0
    x = S.ravel()
    y = ((1.0 - S) * T).ravel()
    pts = np.column_stack([1.0 - x - y, x, y])
    return QuadratureRule(pts, W.ravel(), degree)


@lru_cache(maxsize=None)
def edge_quadrature(degree: int) -> QuadratureRule:
    """Gauss-Legendre rule on [0, 1] exact to ``degree``."""
    _check_degree(degree)
    n = degree // 2 + 1
    x, w = roots_legendre(n)
    s = 0.5 * (x + 1.0)
    return QuadratureRule(np.column_stack([1.0 - s, s]), 0.5 * w, degree)


# ---------------------------------------------------------------------------
# reference basis


def lattice_nodes(k: int) -> np.ndarray:
    """Principal lattice of degree k in reference coordinates, shape (nb, 2).

    Ordering: the three vertices, then edge nodes (edge 0 = v1->v2, edge 1 =
    v2->v0, edge 2 = v0->v1), then interior nodes row by row.
    """
    if k < 1:
        raise ValueError("degree must be >= 1")
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    nodes = [verts[0], verts[1], verts[2]]
    for a, b in ((1, 2), (2, 0), (0, 1)):
        for i in range(1, k):
            nodes.append(verts[a] + i / k * (verts[b] - verts[a]))
    for j in range(1, k):
        for i in range(1, k - j):
            nodes.append(np.array([i / k, j / k]))
    return np.array(nodes)


def monomial_exponents(k: int) -> list[tuple[int, int]]:
    return [(a, d - a) for d in range(k + 1) for a in range(d, -1, -1)]


@lru_cache(maxsize=None)
def _coefficients(k: int) -> np.ndarray:
    """Monomial coefficients of the Lagrange basis, shape (nb, nmono)."""
    nodes = lattice_nodes(k)
    exps = monomial_exponents(k)
    V = np.array([[x**a * y**b for a, b in exps] for x, y in nodes])
    return np.linalg.inv(V).T


def _falling(n: int, r: int) -> int:
    out = 1
    for i in range(r):
        out *= n - i
    return out


def _monomial_derivative(exps, pts, dx: int, dy: int) -> np.ndarray:
    """d^dx/dx d^dy/dy of every monomial at pts, shape (npts, nmono)."""
    x, y = pts[:, 0:1], pts[:, 1:2]
    cols = []
    for a, b in exps:
        if a < dx or b < dy:
            cols.append(np.zeros(len(pts)))
            continue
        c = _falling(a, dx) * _falling(b, dy)
        cols.append(c * x[:, 0] ** (a - dx) * y[:, 0] ** (b - dy))
    return np.column_stack(cols)


def reference_derivatives(k: int, pts: np.ndarray, order: int) -> np.ndarray:
    """Order-``order`` derivative tensors of all basis functions.

    Returns an array of shape (npts, nb) + (2,) * order, fully symmetric in
    the trailing axes.
    """
    if order > MAX_ORDER:
        raise ValueError(f"derivative order {order} > {MAX_ORDER} unsupported")
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    C = _coefficients(k)
    exps = monomial_exponents(k)
    nb = C.shape[0]
    out = np.empty((len(pts), nb) + (2,) * order)
    cache = {}
    for idx in itertools.product((0, 1), repeat=order):
        dy = sum(idx)
        dx = order - dy
        if (dx, dy) not in cache:
            cache[(dx, dy)] = _monomial_derivative(exps, pts, dx, dy) @ C.T
        out[(slice(None), slice(None)) + idx] = cache[(dx, dy)]
    return out


@dataclass
class BasisEval:
    """Values and derivative tensors of every basis function at one point."""

    value: np.ndarray
    gradient: np.ndarray
    hessian: np.ndarray | None = None
    third: np.ndarray | None = None
    fourth: np.ndarray | None = None


def reference_basis(k: int, p, max_order: int = 2) -> BasisEval:
    """Evaluate the degree-k Lagrange basis at one barycentric point ``p``.

    ``p`` may also be given as reference (x, y) coordinates.
    """
    if max_order > MAX_ORDER:
        raise ValueError(f"max_order {max_order} > {MAX_ORDER} unsupported")
    p = np.asarray(p, dtype=float)
    xy = p[1:] if p.shape == (3,) else p
    if min(xy[0], xy[1], 1.0 - xy[0] - xy[1]) < -1e-12:
        raise ValueError("point outside the reference triangle")
    xy = xy[None, :]
    tensors = [reference_derivatives(k, xy, r)[0] for r in range(max(max_order, 1) + 1)]
    tensors += [None] * (5 - len(tensors))
    return BasisEval(*tensors)


def push_forward(ref: np.ndarray, K: np.ndarray, order: int) -> np.ndarray:
    """Chain rule for affine maps.

    ``ref`` has shape (..., npts, nb) + (2,)*order with a leading element axis
    matching ``K`` (ne, 2, 2), where K = J^{-1}, i.e. d(xi_a)/d(x_i) = K[a, i].
    """
    if order == 0:
        return ref
    letters = "abcd"[:order]
    phys = "ijkl"[:order]
    subs = ",".join(f"e{a}{i}" for a, i in zip(letters, phys))
    expr = f"{subs},eqn{letters}->eqn{phys}"
    return np.einsum(expr, *([K] * order), ref, optimize=True)


# ---------------------------------------------------------------------------
# the global space


class DgSpace:
    """Fully discontinuous P_k space on a triangulation.

    Degrees of freedom of element ``T`` occupy ``T*nb : (T+1)*nb``.
    """

    def __init__(self, mesh, k: int = 2):
        if not 1 <= k <= 4:
            raise ValueError("supported degrees are 1..4")
        self.mesh = mesh
        self.k = k
        self.nb = (k + 1) * (k + 2) // 2
        self.ndofs = mesh.n_triangles * self.nb

    def dofs(self, tris=None) -> np.ndarray:
        tris = np.arange(self.mesh.n_triangles) if tris is None else np.asarray(tris)
        return tris[:, None] * self.nb + np.arange(self.nb)[None, :]

    def element_coeffs(self, coeffs) -> np.ndarray:
        return np.asarray(coeffs).reshape(self.mesh.n_triangles, self.nb)

    def node_positions(self) -> np.ndarray:
        """Physical lattice nodes of every element, shape (nT, nb, 2)."""
        ref = lattice_nodes(self.k)
        B, x0 = self.mesh.affine_maps()
        return x0[:, None, :] + np.einsum("eij,nj->eni", B, ref)

    def interpolate(self, func) -> np.ndarray:
        """Nodal interpolant of ``func(x, y)`` as a coefficient vector."""
        P = self.node_positions()
        vals = np.asarray(func(P[..., 0], P[..., 1]), dtype=float)
        return np.broadcast_to(vals, P.shape[:2]).ravel().copy()

    # --- evaluation -------------------------------------------------------
    def tabulate(self, tris, ref_pts, order: int) -> np.ndarray:
        """Physical derivative tensors of the basis at reference points.

        ``ref_pts`` is (npts, 2) shared by all elements or (ne, npts, 2).
        Returns (ne, npts, nb) + (2,)*order.
        """
        tris = np.asarray(tris)
        ref_pts = np.asarray(ref_pts, dtype=float)
        if ref_pts.ndim == 2:
            R = reference_derivatives(self.k, ref_pts, order)
            R = np.broadcast_to(R, (len(tris),) + R.shape)
        else:
            flat = reference_derivatives(self.k, ref_pts.reshape(-1, 2), order)
            R = flat.reshape(ref_pts.shape[:2] + flat.shape[1:])
        return push_forward(R, self.mesh.inverse_jacobians()[tris], order)

    def physical_eval(self, T: int, p, coeffs, max_order: int = 4):
        """Value and derivatives (through ``max_order``) of a discrete function
        restricted to element ``T`` at physical point ``p``.

        ``coeffs`` is either the element's coefficient slice or the global
        vector.
        """
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.size != self.nb:
            coeffs = self.element_coeffs(coeffs)[T]
        lam = self.mesh.barycentric(T, p)
        if lam.min() < -1e-12:
            raise ValueError(f"point {tuple(p)} outside element {T}")
        xy = lam[1:][None, :]
        out = []
        for r in range(max_order + 1):
            tab = self.tabulate([T], xy, r)[0, 0]
            out.append(np.tensordot(coeffs, tab, axes=(0, 0)))
        return tuple(out)
