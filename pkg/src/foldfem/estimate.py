"""Residual a posteriori estimators eta_1 .. eta_6 and element indicators."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assemble import ProblemSpec, _edge_quad, _load_quad, edge_traces
from .mesh import EdgeTag, Mesh
from .space import DgSpace

EDGE_ESTIMATORS = ("eta2", "eta3", "eta4", "eta5", "eta6")
VARIANTS = ("with_eta1", "paper_mode")


@dataclass
class EstimatorReport:
    """Squared local contributions.

    ``eta1_sq`` is per element; ``edge_sq[name]`` is per edge (zero where
    the estimator is not defined).
    """

    eta1_sq: np.ndarray
    edge_sq: dict
    variant: str = "with_eta1"

    @property
    def totals(self) -> dict:
        out = {"eta1": float(np.sqrt(self.eta1_sq.sum()))}
        for name in EDGE_ESTIMATORS:
            out[name] = float(np.sqrt(self.edge_sq[name].sum()))
        return out

    def eta_tot(self, variant: str | None = None) -> float:
        variant = variant or self.variant
        s = sum(float(self.edge_sq[k].sum()) for k in EDGE_ESTIMATORS)
        if variant == "with_eta1":
            s += float(self.eta1_sq.sum())
        elif variant != "paper_mode":
            raise ValueError(f"unknown estimator variant {variant!r}")
        return float(np.sqrt(s))


def compute_estimators(mesh: Mesh, space: DgSpace, prob: ProblemSpec, coeffs,
                       variant: str = "with_eta1") -> EstimatorReport:
    c = space.element_coeffs(coeffs)
    nT, nE = mesh.n_triangles, mesh.n_edges

    # eta1: h_T^2 ||f - bilaplacian u_h||
    ql = _load_quad(space)
    B, x0 = mesh.affine_maps()
    X = x0[:, None, :] + np.einsum("eij,qj->eqi", B, ql.xy)
    res = np.broadcast_to(prob.f(X[..., 0], X[..., 1]), X.shape[:2]).astype(float)
    if space.k >= 4:
        D4 = space.tabulate(np.arange(nT), ql.xy, 4)
        res = res - np.einsum("eqniijj,en->eq", D4, c)
    hT = mesh.diameters()
    eta1 = hT**4 * np.einsum("eq,q,e->e", res**2, ql.weights, 2.0 * mesh.areas())

    qe = _edge_quad(space)
    w = qe.weights
    h = mesh.edge_lengths()
    sq = {k: np.zeros(nE) for k in EDGE_ESTIMATORS}

    def integrate(vals, ids):
        # vals: (nE, nq) or (nE, nq, 2) pointwise squares
        if vals.ndim == 3:
            vals = vals.sum(axis=2)
        return np.einsum("eq,q->e", vals, w) * h[ids]

    ie = mesh.edges_with(EdgeTag.INTERIOR, EdgeTag.CREASE)
    if len(ie):
        o = edge_traces(space, ie, qe.s, "owner")
        b = edge_traces(space, ie, qe.s, "neighbor")
        co, cb = c[o.tris], c[b.tris]
        tr = lambda arr, cc, sig: np.einsum(sig, arr, cc)  # noqa: E731
        jv = tr(b.V, cb, "eqn,en->eq") - tr(o.V, co, "eqn,en->eq")
        jg = tr(b.G, cb, "eqni,en->eqi") - tr(o.G, co, "eqni,en->eqi")
        hn_o, hn_b = tr(o.Hn, co, "eqni,en->eqi"), tr(b.Hn, cb, "eqni,en->eqi")
        jdl = tr(b.DL, cb, "eqn,en->eq") - tr(o.DL, co, "eqn,en->eq")
        he = h[ie]
        crease = mesh.edge_tags[ie] == EdgeTag.CREASE
        sq["eta2"][ie] = integrate(jv**2, ie) / he**3
        sq["eta3"][ie] = np.where(crease, 0.0, integrate(jg**2, ie) / he)
        sq["eta4"][ie] = integrate((hn_b - hn_o) ** 2, ie) * he
        sq["eta5"][ie] = np.where(crease, integrate((0.5 * (hn_o + hn_b)) ** 2, ie) * he, 0.0)
        sq["eta6"][ie] = integrate(jdl**2, ie) * he**3

    de = mesh.edges_with(EdgeTag.DIRICHLET)
    if len(de):
        o = edge_traces(space, de, qe.s, "owner")
        co = c[o.tris]
        P = mesh.edge_points(de, qe.s)
        g = np.broadcast_to(prob.g(P[..., 0], P[..., 1]), P.shape[:2]) if prob.g else 0.0
        Phi = np.asarray(prob.phi(P[..., 0], P[..., 1])) if prob.phi else 0.0
        jv = g - np.einsum("eqn,en->eq", o.V, co)
        jg = Phi - np.einsum("eqni,en->eqi", o.G, co)
        he = h[de]
        sq["eta2"][de] = integrate(jv**2, de) / he**3
        sq["eta3"][de] = integrate(jg**2, de) / he

    return EstimatorReport(eta1, sq, variant)


def local_indicators(report: EstimatorReport, mesh: Mesh) -> np.ndarray:
    """Per-element indicators whose squares sum to eta_tot^2.

    Interior and crease edges split their mass evenly between both
    neighbours; boundary edges give all of it to their element.
    """
    edge_total = sum(report.edge_sq[k] for k in EDGE_ESTIMATORS)
    two_sided = mesh.edge_neighbor >= 0
    share = np.where(two_sided, 0.5, 1.0) * edge_total
    ind = np.zeros(mesh.n_triangles)
    if report.variant == "with_eta1":
        ind += report.eta1_sq
    np.add.at(ind, mesh.edge_owner, share)
    np.add.at(ind, mesh.edge_neighbor[two_sided], share[two_sided])
    return np.sqrt(ind)
