"""Crease-fitted triangular meshes with newest-vertex bisection.

Triangles are stored counter-clockwise as ``(t0, t1, t2)`` where ``(t0, t1)``
is the refinement edge and ``t2`` the newest vertex. Edges are stored with
sorted vertex pairs; every edge has an orientation owner ``T+`` and its unit
normal points out of the owner.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable

import numpy as np


class EdgeTag(IntEnum):
    INTERIOR = 0
    DIRICHLET = 1
    NEUMANN = 2
    CREASE = 3


class MeshError(ValueError):
    pass


# ---------------------------------------------------------------------------
# fold curves


@dataclass(frozen=True)
class FoldCurve:
    """A fold given as the graph of a function over one coordinate axis.

    ``axis=0`` means the curve is ``x2 = c(x1)``, ``axis=1`` means
    ``x1 = c(x2)``. Points with the dependent coordinate below ``c`` form
    Omega_1.
    """

    func: Callable
    interval: tuple[float, float]
    axis: int = 0
    kind: str = "smooth"
    breakpoints: tuple[float, ...] = ()
    dfunc: Callable | None = None
    ddfunc: Callable | None = None
    name: str = ""

    def point(self, t):
        t = np.asarray(t, dtype=float)
        c = np.asarray(self.func(t), dtype=float)
        return np.stack([t, c], axis=-1) if self.axis == 0 else np.stack([c, t], axis=-1)

    def _split(self, p):
        p = np.asarray(p, dtype=float)
        return (p[..., 0], p[..., 1]) if self.axis == 0 else (p[..., 1], p[..., 0])

    def side(self, p):
        """1 for Omega_1, 2 for Omega_2 (points on the fold count as 2)."""
        t, d = self._split(p)
        return np.where(d < self.func(np.clip(t, *self.interval)), 1, 2)

    def knots(self) -> np.ndarray:
        a, b = self.interval
        inner = [x for x in self.breakpoints if a < x < b]
        return np.array([a, *sorted(inner), b], dtype=float)

    def project(self, p) -> np.ndarray:
        """Closest point of the curve to ``p``."""
        p = np.asarray(p, dtype=float)
        if self.kind == "polyline":
            best, bestd = None, np.inf
            ts = self.knots()
            for t0, t1 in zip(ts[:-1], ts[1:]):
                a, b = self.point(t0), self.point(t1)
                d = b - a
                s = np.clip(np.dot(p - a, d) / np.dot(d, d), 0.0, 1.0)
                # evaluate on the curve itself so the result lies on it exactly
                q = self.point(t0 + s * (t1 - t0))
                dist = np.linalg.norm(q - p)
                if dist < bestd:
                    best, bestd = q, dist
            return best
        return self.point(self._newton(p))

    def _newton(self, p) -> float:
        t_p, d_p = self._split(p)
        lo, hi = self.interval
        grid = np.linspace(lo, hi, 401)
        dist = (grid - t_p) ** 2 + (self.func(grid) - d_p) ** 2
        t = float(grid[np.argmin(dist)])
        t = float(np.clip(t_p, lo, hi)) if abs(t - t_p) < (hi - lo) / 400 else t
        if self.dfunc is None:
            return t
        for _ in range(50):
            c, dc = self.func(t), self.dfunc(t)
            ddc = self.ddfunc(t) if self.ddfunc is not None else 0.0
            g = (t - t_p) + (c - d_p) * dc
            H = 1.0 + dc * dc + (c - d_p) * ddc
            step = g / H if H > 0 else g
            t = float(np.clip(t - step, lo, hi))
            if abs(step) < 1e-15:
                break
        return t

    def distance(self, p) -> float:
        return float(np.linalg.norm(self.project(p) - np.asarray(p, dtype=float)))


# ---------------------------------------------------------------------------
# the mesh


class Mesh:
    """Immutable conforming triangulation with tagged edges."""

    def __init__(self, vertices, triangles, fold: FoldCurve | None = None,
                 special_edges: dict | None = None, levels=None, parents=None,
                 owner_flips=()):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        self.fold = fold
        self.special_edges = dict(special_edges or {})
        nT = len(self.triangles)
        self.levels = np.zeros(nT, dtype=np.int64) if levels is None else np.asarray(levels)
        self.parents = np.full(nT, -1, dtype=np.int64) if parents is None else np.asarray(parents)
        self._owner_flips = frozenset(owner_flips)
        self._build_topology()
        self._geometry_cache = {}
        for arr in (self.vertices, self.triangles, self.levels, self.parents):
            arr.setflags(write=False)

    # --- construction helpers --------------------------------------------
    def _build_topology(self):
        T = self.triangles
        nT = len(T)
        loc = np.array([[1, 2], [2, 0], [0, 1]])
        pairs = T[:, loc].reshape(-1, 2)  # (3nT, 2); row 3t+j is local edge j
        keys = np.sort(pairs, axis=1)
        uniq, inv, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
        inv = inv.ravel()
        if counts.max(initial=0) > 2:
            raise MeshError("non-manifold edge (more than two adjacent triangles)")
        nE = len(uniq)
        occ = np.argsort(inv, kind="stable")
        first = np.full(nE, -1)
        second = np.full(nE, -1)
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        first[:] = occ[starts]
        has2 = counts == 2
        second[has2] = occ[starts[has2] + 1]

        self.edges = uniq
        self.tri_edges = inv.reshape(nT, 3)
        self.edge_key_to_id = {(int(a), int(b)): i for i, (a, b) in enumerate(uniq)}
        tag = np.where(has2, EdgeTag.INTERIOR, EdgeTag.DIRICHLET).astype(np.int64)
        for key, t in self.special_edges.items():
            i = self.edge_key_to_id.get(key)
            if i is None:
                continue
            if t == EdgeTag.CREASE:
                if not has2[i]:
                    raise MeshError(f"crease edge {key} lies on the boundary")
                tag[i] = EdgeTag.CREASE
            elif not has2[i]:
                tag[i] = t
        self.edge_tags = tag

        # owner / neighbour occurrences (tri*3 + local)
        own = first.copy()
        nbr = second.copy()
        tri_of = lambda o: o // 3  # noqa: E731
        swap = has2 & (tri_of(second) < tri_of(first))
        own[swap], nbr[swap] = second[swap], first[swap]
        crease = tag == EdgeTag.CREASE
        if crease.any() and self.fold is not None:
            cen = self.vertices[T].mean(axis=1)
            side_own = self.fold.side(cen[tri_of(own[crease])])
            idx = np.flatnonzero(crease)
            flip = idx[side_own != 1]
            own[flip], nbr[flip] = nbr[flip].copy(), own[flip].copy()
        for i in self._owner_flips:
            if nbr[i] >= 0:
                own[i], nbr[i] = nbr[i], own[i]
        self.edge_owner = own // 3
        self.edge_owner_local = own % 3
        self.edge_neighbor = np.where(nbr >= 0, nbr // 3, -1)
        self.edge_neighbor_local = np.where(nbr >= 0, nbr % 3, -1)

    # --- sizes --------------------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def edges_with(self, *tags) -> np.ndarray:
        return np.flatnonzero(np.isin(self.edge_tags, [int(t) for t in tags]))

    # --- element geometry -----------------------------------------------
    def affine_maps(self):
        """(B, x0) with x = x0 + B @ xi for each triangle."""
        if "affine" not in self._geometry_cache:
            P = self.vertices[self.triangles]
            B = np.stack([P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]], axis=2)
            self._geometry_cache["affine"] = (B, P[:, 0].copy())
        return self._geometry_cache["affine"]

    def inverse_jacobians(self) -> np.ndarray:
        if "K" not in self._geometry_cache:
            self._geometry_cache["K"] = np.linalg.inv(self.affine_maps()[0])
        return self._geometry_cache["K"]

    def areas(self) -> np.ndarray:
        B, _ = self.affine_maps()
        return 0.5 * (B[:, 0, 0] * B[:, 1, 1] - B[:, 0, 1] * B[:, 1, 0])

    def diameters(self) -> np.ndarray:
        P = self.vertices[self.triangles]
        d = [np.linalg.norm(P[:, i] - P[:, j], axis=1) for i, j in ((0, 1), (1, 2), (2, 0))]
        return np.max(d, axis=0)

    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def min_angle(self) -> float:
        P = self.vertices[self.triangles]
        angs = []
        for i in range(3):
            a = P[:, (i + 1) % 3] - P[:, i]
            b = P[:, (i + 2) % 3] - P[:, i]
            c = np.sum(a * b, axis=1) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
            angs.append(np.arccos(np.clip(c, -1, 1)))
        return float(np.min(angs))

    def barycentric(self, T: int, p) -> np.ndarray:
        B, x0 = self.affine_maps()
        xi = np.linalg.solve(B[T], np.asarray(p, dtype=float) - x0[T])
        return np.array([1.0 - xi.sum(), xi[0], xi[1]])

    def locate(self, p, tol: float = 1e-12) -> np.ndarray:
        """All triangles whose closure contains ``p``."""
        B, x0 = self.affine_maps()
        xi = np.einsum("eij,ej->ei", self.inverse_jacobians(), np.asarray(p, dtype=float) - x0)
        lam = np.column_stack([1.0 - xi.sum(axis=1), xi])
        return np.flatnonzero(lam.min(axis=1) >= -tol)

    # --- edge geometry ---------------------------------------------------
    def edge_lengths(self) -> np.ndarray:
        return self._edge_frame()[2]

    def edge_normals(self) -> np.ndarray:
        return self._edge_frame()[0]

    def edge_tangents(self) -> np.ndarray:
        return self._edge_frame()[1]

    def edge_midpoints(self) -> np.ndarray:
        return self._edge_frame()[3]

    def _edge_frame(self):
        if "edge" not in self._geometry_cache:
            a = self.vertices[self.edges[:, 0]]
            b = self.vertices[self.edges[:, 1]]
            d = b - a
            h = np.linalg.norm(d, axis=1)
            t = d / h[:, None]
            n = np.column_stack([t[:, 1], -t[:, 0]])
            mid = 0.5 * (a + b)
            cen = self.centroids()[self.edge_owner]
            sgn = np.where(np.sum(n * (mid - cen), axis=1) < 0, -1.0, 1.0)
            n = n * sgn[:, None]
            tau = np.column_stack([-n[:, 1], n[:, 0]])
            self._geometry_cache["edge"] = (n, tau, h, mid)
        return self._geometry_cache["edge"]

    def edge_geometry(self, e: int):
        """(normal, tangent, length, midpoint) of edge ``e``; the normal points
        out of the orientation owner."""
        if not 0 <= e < self.n_edges:
            raise IndexError(f"edge id {e} out of range")
        n, t, h, m = self._edge_frame()
        return n[e], t[e], float(h[e]), m[e]

    def edge_points(self, edge_ids, s) -> np.ndarray:
        """Physical points at edge parameters ``s`` (from vertex a to b)."""
        a = self.vertices[self.edges[edge_ids, 0]]
        b = self.vertices[self.edges[edge_ids, 1]]
        return a[:, None, :] + np.asarray(s)[None, :, None] * (b - a)[:, None, :]

    def edge_reference_points(self, edge_ids, tris, local, s) -> np.ndarray:
        """Reference coordinates in ``tris`` of the edge points at ``s``."""
        R = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        tri_v = self.triangles[tris]
        j = np.asarray(local)
        p = tri_v[np.arange(len(j)), (j + 1) % 3]
        start = R[(j + 1) % 3]
        end = R[(j + 2) % 3]
        forward = p == self.edges[edge_ids, 0]
        st = np.where(forward[:, None], start, end)
        en = np.where(forward[:, None], end, start)
        s = np.asarray(s)
        return st[:, None, :] + s[None, :, None] * (en - st)[:, None, :]

    # --- variants ----------------------------------------------------------
    def with_flipped_owner(self, edge_ids) -> "Mesh":
        """Copy with the orientation owner of the given interior edges swapped."""
        flips = set(self._owner_flips) ^ set(int(e) for e in np.atleast_1d(edge_ids))
        return Mesh(self.vertices, self.triangles, self.fold, self.special_edges,
                    self.levels, self.parents, owner_flips=flips)

    # --- invariants ----------------------------------------------------------
    def check(self, fold_tol: float = 1e-12) -> None:
        """Raise MeshError if any structural invariant is violated."""
        if np.any(self.areas() <= 0):
            raise MeshError("non-positive triangle area")
        V, E, T = self.n_vertices, self.n_edges, self.n_triangles
        used = np.unique(self.triangles)
        if len(used) != V:
            raise MeshError("unreferenced vertices")
        # simply connected planar triangulation: V - E + (T + 1) = 2
        if V - E + T != 1:
            raise MeshError(f"Euler relation violated: V-E+T = {V - E + T}")
        if self.fold is not None:
            for e in self.edges_with(EdgeTag.CREASE):
                for v in self.edges[e]:
                    if self.fold.distance(self.vertices[v]) > fold_tol:
                        raise MeshError(f"crease vertex {v} off the fold")
        interior = self.edge_neighbor >= 0
        if np.any(np.isin(self.edge_tags[~interior], [EdgeTag.INTERIOR, EdgeTag.CREASE])):
            raise MeshError("boundary edge tagged interior/crease")


# ---------------------------------------------------------------------------
# structured generators

_DOMAINS = {
    "unit_square": np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]),
    "l_shape": np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 0.0], [0.0, 0.0],
                         [0.0, 1.0], [-1.0, 1.0]]),
}


def on_boundary(domain: str, p, tol: float = 1e-12) -> bool:
    poly = _DOMAINS[domain]
    p = np.asarray(p, dtype=float)
    for a, b in zip(poly, np.roll(poly, -1, axis=0)):
        d = b - a
        s = np.clip(np.dot(p - a, d) / np.dot(d, d), 0.0, 1.0)
        if np.linalg.norm(a + s * d - p) <= tol:
            return True
    return False


def _orient(vertices, tri):
    """Rotate a CCW triangle so its longest edge comes first.

    Ties go to the smallest opposite-vertex index.
    """
    P = vertices[list(tri)]
    best = None
    for j in range(3):
        L = np.linalg.norm(P[(j + 1) % 3] - P[(j + 2) % 3])
        key = (-round(L, 12), tri[j])
        if best is None or key < best[0]:
            best = (key, j)
    j = best[1]
    return (tri[(j + 1) % 3], tri[(j + 2) % 3], tri[j])


def build_structured(domain: str = "unit_square", n: int = 4, fold: FoldCurve | None = None,
                     dirichlet: Callable | None = None) -> Mesh:
    """Structured crease-fitted mesh.

    The domain is split into squares of side 1/n, each cut along its "/"
    diagonal. A fold is fitted by sliding the grid lines orthogonal to its
    parameter axis so that the middle row (or column) of each unit block
    lands on the curve.

    ``dirichlet(x, y)`` classifies boundary edges by midpoint; the default
    makes the whole boundary Dirichlet.
    """
    if domain not in _DOMAINS:
        raise MeshError(f"unknown domain {domain!r}")
    if n < 2 or n % 2:
        raise MeshError("n must be even and >= 2 so the fold can be resolved")
    if domain == "unit_square":
        lo, m = 0.0, n
        keep_cell = lambda i, j: True  # noqa: E731
    else:
        lo, m = -1.0, 2 * n
        keep_cell = lambda i, j: not (i >= n and j >= n)  # noqa: E731

    idx = -np.ones((m + 1, m + 1), dtype=np.int64)
    cells = [(i, j) for i in range(m) for j in range(m) if keep_cell(i, j)]
    for i, j in cells:
        for di in (0, 1):
            for dj in (0, 1):
                idx[i + di, j + dj] = 0
    ij = np.argwhere(idx == 0)
    idx[ij[:, 0], ij[:, 1]] = np.arange(len(ij))
    V = lo + ij.astype(float) / n
    on_fold = np.zeros(len(V), dtype=bool)

    if fold is not None:
        V, on_fold = _fit_fold(domain, n, lo, ij, V, fold)

    tris = []
    for i, j in cells:
        a, b, c, d = idx[i, j], idx[i + 1, j], idx[i + 1, j + 1], idx[i, j + 1]
        tris.append(_orient(V, (a, b, c)))
        tris.append(_orient(V, (a, c, d)))
    tris = np.array(tris, dtype=np.int64)

    special = {}
    pre = Mesh(V, tris, fold)
    for e, (a, b) in enumerate(pre.edges):
        key = (int(a), int(b))
        if pre.edge_neighbor[e] < 0:
            if on_fold[a] and on_fold[b]:
                raise MeshError("fold runs along the domain boundary")
            mid = 0.5 * (V[a] + V[b])
            is_d = True if dirichlet is None else bool(dirichlet(*mid))
            special[key] = EdgeTag.DIRICHLET if is_d else EdgeTag.NEUMANN
        elif on_fold[a] and on_fold[b]:
            special[key] = EdgeTag.CREASE
    mesh = Mesh(V, tris, fold, special)
    if np.any(mesh.areas() <= 1e-14):
        raise MeshError("fold fitting produced a degenerate triangle")
    return mesh


def _fit_fold(domain, n, lo, ij, V, fold: FoldCurve):
    """Slide grid vertices so that one grid line interpolates the fold."""
    a, b = fold.interval
    for t in (a, b):
        if not on_boundary(domain, fold.point(t), tol=1e-10):
            raise MeshError("fold endpoints must lie on the domain boundary")
    ax = fold.axis
    other = 1 - ax
    if domain == "l_shape" and ax != 0:
        raise MeshError("l_shape supports folds given as x2 = c(x1) only")
    # band of the dependent coordinate that contains the fold
    band_lo = lo
    band_hi = lo + 1.0
    jf = n // 2
    if fold.kind == "polyline":
        for x in fold.breakpoints:
            if abs(round((x - lo) * n) - (x - lo) * n) > 1e-12:
                raise MeshError("fold breakpoint does not fall on a grid line")
    V = V.copy()
    on_fold = np.zeros(len(V), dtype=bool)
    t = V[:, ax]
    in_span = (t >= a - 1e-14) & (t <= b + 1e-14)
    jrow = ij[:, other] - round((band_lo - lo) * n)
    in_band = in_span & (jrow >= 0) & (jrow <= n)
    c = np.asarray(fold.func(np.clip(t, a, b)), dtype=float)
    if np.any((c[in_band] <= band_lo) | (c[in_band] >= band_hi)):
        raise MeshError("fold leaves the fitting band")
    below = in_band & (jrow <= jf)
    above = in_band & (jrow > jf)
    V[below, other] = band_lo + (c[below] - band_lo) * jrow[below] / jf
    V[above, other] = c[above] + (band_hi - c[above]) * (jrow[above] - jf) / (n - jf)
    on = in_band & (jrow == jf)
    V[on, other] = c[on]
    on_fold[on] = True
    return V, on_fold


# ---------------------------------------------------------------------------
# newest-vertex bisection


def refine(mesh: Mesh, marked) -> Mesh:
    """Bisect every marked triangle at least once, with conforming closure.

    New vertices on crease edges are projected onto the fold curve.
    """
    marked = sorted(set(int(t) for t in marked))
    if not marked:
        return mesh
    if marked[0] < 0 or marked[-1] >= mesh.n_triangles:
        raise IndexError("marked triangle id out of range")
    T = mesh.triangles
    key = lambda a, b: (a, b) if a < b else (b, a)  # noqa: E731
    ref_edge = [key(int(t[0]), int(t[1])) for t in T]
    tris_of_edge = {}
    for ti, t in enumerate(T):
        for j in range(3):
            tris_of_edge.setdefault(key(int(t[(j + 1) % 3]), int(t[(j + 2) % 3])), []).append(ti)

    split = set()
    queue = deque()
    for ti in marked:
        if ref_edge[ti] not in split:
            split.add(ref_edge[ti])
            queue.append(ref_edge[ti])
    while queue:
        e = queue.popleft()
        for ti in tris_of_edge[e]:
            r = ref_edge[ti]
            if r not in split:
                split.add(r)
                queue.append(r)

    verts = [tuple(v) for v in mesh.vertices]
    special = dict(mesh.special_edges)
    mids = {}

    def midpoint(a, b):
        k = key(a, b)
        if k in mids:
            return mids[k]
        pa, pb = mesh.vertices[a], mesh.vertices[b]
        p = 0.5 * (pa + pb)
        tag = special.pop(k, None)
        if tag == EdgeTag.CREASE and mesh.fold is not None:
            q = mesh.fold.project(p)
            if np.linalg.norm(q - p) > 0.5 * np.linalg.norm(pb - pa):
                raise MeshError(f"fold projection failed for edge {k}")
            p = q
        verts.append((float(p[0]), float(p[1])))
        m = len(verts) - 1
        if tag is not None:
            special[key(a, m)] = tag
            special[key(m, b)] = tag
        mids[k] = m
        return m

    new_tris, new_levels, new_parents = [], [], []

    def bisect(t, level, parent):
        a, b, c = t
        if key(a, b) not in split:
            new_tris.append(t)
            new_levels.append(level)
            new_parents.append(parent)
            return
        m = midpoint(a, b)
        bisect((c, a, m), level + 1, parent)
        bisect((b, c, m), level + 1, parent)

    for ti, t in enumerate(T):
        if ref_edge[ti] in split:
            bisect(tuple(int(v) for v in t), int(mesh.levels[ti]), ti)
        else:
            new_tris.append(tuple(int(v) for v in t))
            new_levels.append(int(mesh.levels[ti]))
            new_parents.append(ti)

    return Mesh(np.array(verts), np.array(new_tris), mesh.fold, special,
                np.array(new_levels), np.array(new_parents))


def refine_uniform(mesh: Mesh) -> Mesh:
    """Two full bisection sweeps: every triangle becomes four, h halves."""
    for _ in range(2):
        mesh = refine(mesh, range(mesh.n_triangles))
    return mesh
