"""Edge bubble functions on a two-triangle patch and checks of their jump identities.

The patch is the quadrilateral ``A, P+, B, P-`` split along the shared edge
``e = AB`` into ``T+ = (A, B, P+)`` and ``T- = (A, B, P-)``. The unit normal
``n`` points out of ``T+`` into ``T-`` and the tangent ``tau`` runs from A
to B. On each triangle

    phi = psi * lam_B**4 * lam_A**4,

where ``lam_B`` (``lam_A``) is the barycentric coordinate vanishing on the
outer edge through A (through B), and ``psi`` is affine with gradient
``+alpha / (2 h_e)`` on ``T+`` and ``-alpha / (2 h_e)`` on ``T-``.

Jumps here follow the patch orientation: ``[v] = v|T+ - v|T-`` on ``e``
and ``[v] = {v} = v|T`` on the outer edges.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .space import edge_quadrature


class PatchError(ValueError):
    """Degenerate or wrongly oriented patch."""


@dataclass(frozen=True)
class RhombusPatch:
    A: np.ndarray
    P_plus: np.ndarray
    B: np.ndarray
    P_minus: np.ndarray

    def __post_init__(self):
        for name in ("A", "P_plus", "B", "P_minus"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(2))
        h = np.linalg.norm(self.B - self.A)
        if h < 1e-14:
            raise PatchError("shared edge has zero length")
        tol = 1e-12 * h * h
        if _cross(self.B - self.A, self.P_plus - self.A) * _cross(self.B - self.A, self.P_minus - self.A) >= 0:
            raise PatchError("P+ and P- must lie strictly on opposite sides of AB")
        if abs(_cross(self.B - self.A, self.P_plus - self.A)) < tol or \
                abs(_cross(self.B - self.A, self.P_minus - self.A)) < tol:
            raise PatchError("degenerate triangle in patch")

    @property
    def h(self) -> float:
        return float(np.linalg.norm(self.B - self.A))

    @property
    def tangent(self) -> np.ndarray:
        return (self.B - self.A) / self.h

    @property
    def normal(self) -> np.ndarray:
        t = self.tangent
        n = np.array([t[1], -t[0]])
        return n if n @ (self.P_minus - self.A) > 0 else -n

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.A + self.B)

    def triangle(self, side: int) -> np.ndarray:
        """Vertices (A, B, P) of T+ (``side=+1``) or T- (``side=-1``)."""
        return np.array([self.A, self.B, self.P_plus if side > 0 else self.P_minus])

    def edges(self):
        """(label, start, end, sides) for the shared edge and the four outer edges."""
        return [("AB", self.A, self.B, (1, -1)),
                ("AP+", self.A, self.P_plus, (1,)),
                ("P+B", self.P_plus, self.B, (1,)),
                ("AP-", self.A, self.P_minus, (-1,)),
                ("P-B", self.P_minus, self.B, (-1,))]

    # --- stock patches ------------------------------------------------

    @classmethod
    def symmetric(cls, h: float = 1.0) -> "RhombusPatch":
        """Rhombus with unit-length sides scaled by ``h``; the short diagonal is AB."""
        s = 0.5 * np.sqrt(3.0) * h
        return cls((0.0, 0.0), (0.5 * h, s), (h, 0.0), (0.5 * h, -s))

    @classmethod
    def skewed(cls, angle_deg: float = 30.0) -> "RhombusPatch":
        """Unit rhombus with acute angle ``angle_deg`` at A and B; AB is the long diagonal."""
        a = np.radians(angle_deg)
        u, v = np.array([1.0, 0.0]), np.array([np.cos(a), np.sin(a)])
        return cls((0.0, 0.0), v, u + v, u)

    @classmethod
    def random(cls, rng: np.random.Generator) -> "RhombusPatch":
        """Random convex patch: random apexes on either side, then a random similarity map."""
        pp = np.array([rng.uniform(0.2, 0.8), rng.uniform(0.3, 1.2)])
        pm = np.array([rng.uniform(0.2, 0.8), -rng.uniform(0.3, 1.2)])
        th = rng.uniform(0, 2 * np.pi)
        R = rng.uniform(0.1, 2.0) * np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
        x0 = rng.uniform(-1, 1, size=2)
        m = lambda p: x0 + R @ p  # noqa: E731
        return cls(m(np.zeros(2)), m(pp), m(np.array([1.0, 0.0])), m(pm))


def _cross(u, v):
    return float(u[0] * v[1] - u[1] * v[0])


def _bary(tri, x):
    """Barycentric coordinates and their (constant) gradients on ``tri``."""
    B = np.column_stack([tri[1] - tri[0], tri[2] - tri[0]])
    Binv = np.linalg.inv(B)
    ref = (np.atleast_2d(x) - tri[0]) @ Binv.T
    lam = np.column_stack([1 - ref.sum(axis=1), ref])
    grads = np.vstack([-Binv.sum(axis=0), Binv])
    return lam, grads


@dataclass
class BubbleFunction:
    patch: RhombusPatch
    direction: str  # "normal" or "tangential"

    @property
    def alpha(self) -> np.ndarray:
        return self.patch.normal if self.direction == "normal" else self.patch.tangent

    def trace(self, x, side: int):
        """Value and gradient of the restriction to T+ or T- (extended polynomially)."""
        p = self.patch
        x = np.atleast_2d(np.asarray(x, dtype=float))
        lam, dlam = _bary(p.triangle(side), x)
        la, lb = lam[:, 0], lam[:, 1]  # lam_A vanishes on P B, lam_B on A P
        d = lb**4 * la**4
        dd = 4 * lb[:, None] ** 3 * la[:, None] ** 4 * dlam[1] + 4 * lb[:, None] ** 4 * la[:, None] ** 3 * dlam[0]
        gpsi = side * self.alpha / (2 * p.h)
        psi = (x - p.midpoint) @ gpsi
        return psi * d, d[:, None] * gpsi + psi[:, None] * dd

    def __call__(self, x):
        """Value and gradient at arbitrary points; zero outside the patch."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        val = np.zeros(len(x))
        grad = np.zeros((len(x), 2))
        done = np.zeros(len(x), dtype=bool)
        for side in (1, -1):
            lam, _ = _bary(self.patch.triangle(side), x)
            inside = np.all(lam >= -1e-14, axis=1) & ~done
            if np.any(inside):
                v, g = self.trace(x[inside], side)
                val[inside], grad[inside] = v, g
            done |= inside
        return val, grad

    def expected_grad_jump(self, x) -> np.ndarray:
        """h_e^{-1} lam_B^4 lam_A^4 alpha along the shared edge."""
        lam, _ = _bary(self.patch.triangle(1), x)
        return (lam[:, 1] ** 4 * lam[:, 0] ** 4 / self.patch.h)[:, None] * self.alpha


def build_bubble(patch: RhombusPatch, direction: str = "normal") -> BubbleFunction:
    if direction not in ("normal", "tangential"):
        raise ValueError("direction must be 'normal' or 'tangential'")
    return BubbleFunction(patch, direction)


IDENTITIES = ("jump", "avg", "avg_grad", "grad_jump")


@dataclass
class IdentityReport:
    """Largest violation of each identity, plus the sampled rows behind it."""

    direction: str
    violations: dict
    rows: list = field(default_factory=list)
    label: str = ""

    @property
    def worst(self) -> float:
        return max(self.violations.values())

    def passed(self, tol: float = 1e-12) -> bool:
        return self.worst <= tol


def _edge_samples(d: int, n_uniform: int = 50) -> np.ndarray:
    return np.concatenate([edge_quadrature(d).s, np.linspace(0.0, 1.0, n_uniform)])


def verify_bubble_identities(bubble: BubbleFunction, quad_degree: int = 12,
                             label: str = "") -> IdentityReport:
    """Sample every patch edge at Gauss nodes and 50 equispaced points.

    Checks ``[phi] = {phi} = 0`` and ``{grad phi} = 0`` on all edges,
    ``[grad phi] = 0`` on the outer edges and
    ``[grad phi] = h_e^{-1} lam_B^4 lam_A^4 alpha`` on the shared edge.
    """
    if quad_degree < 10:
        raise ValueError("quad_degree must be at least 10")
    s = _edge_samples(quad_degree)
    worst = dict.fromkeys(IDENTITIES, 0.0)
    rows = []
    for name, p0, p1, sides in bubble.patch.edges():
        x = p0 + s[:, None] * (p1 - p0)
        tr = [bubble.trace(x, side) for side in sides]
        if len(sides) == 2:
            (vp, gp), (vm, gm) = tr
            jump, avg = vp - vm, 0.5 * (vp + vm)
            gjump, gavg = gp - gm, 0.5 * (gp + gm)
            dev = gjump - bubble.expected_grad_jump(x)
        else:
            (v, g), = tr
            jump = avg = v
            gjump = gavg = g
            dev = gjump
        err = {"jump": np.abs(jump), "avg": np.abs(avg),
               "avg_grad": np.linalg.norm(gavg, axis=1), "grad_jump": np.linalg.norm(dev, axis=1)}
        for k in IDENTITIES:
            worst[k] = max(worst[k], float(err[k].max()))
        for i in range(len(s)):
            rows.append((label, bubble.direction, name, float(s[i]), *(float(err[k][i]) for k in IDENTITIES)))
    return IdentityReport(bubble.direction, worst, rows, label)


def standard_patches(seed: int = 0) -> dict:
    """The five verification patches: symmetric, three random convex, 30/150 skewed."""
    rng = np.random.default_rng(seed)
    out = {"symmetric": RhombusPatch.symmetric()}
    for i in range(3):
        out[f"random{i}"] = RhombusPatch.random(rng)
    out["skewed30"] = RhombusPatch.skewed(30.0)
    return out


def run_identity_suite(quad_degree: int = 12, seed: int = 0) -> list:
    """Reports for every standard patch and both directions."""
    reports = []
    for label, patch in standard_patches(seed).items():
        for direction in ("normal", "tangential"):
            reports.append(verify_bubble_identities(build_bubble(patch, direction), quad_degree, label))
    return reports


def write_identity_csv(reports, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["patch", "direction", "edge", "s", *IDENTITIES])
        for rep in reports:
            for row in rep.rows:
                w.writerow([*row[:3], repr(row[3]), *(f"{v:.3e}" for v in row[4:])])
