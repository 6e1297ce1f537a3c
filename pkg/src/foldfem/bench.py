"""Benchmark problems: flat fold, V-shaped fold, L-shape with sinusoidal fold."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assemble import ExactSolution, Penalties, ProblemSpec, zero
from .mesh import FoldCurve, Mesh, build_structured


@dataclass
class BenchmarkCase:
    name: str
    problem: ProblemSpec
    penalties: Penalties
    domain: str = "unit_square"
    n: int = 4
    reference_slopes: dict = field(default_factory=dict)

    def initial_mesh(self, n: int | None = None) -> Mesh:
        p = self.problem
        return build_structured(self.domain, n or self.n, p.fold, p.dirichlet)


# ---------------------------------------------------------------------------
# flat fold along x1 = 1/2

FLAT_FOLD = FoldCurve(func=lambda t: np.full(np.shape(t), 0.5), interval=(0.0, 1.0), axis=1,
                      kind="polyline", name="flat")


def _p(t, order):
    """Derivatives of p(t) = t^3/2 - t^2 + t."""
    return [0.5 * t**3 - t**2 + t, 1.5 * t**2 - 2 * t + 1, 3 * t - 2,
            3 + 0 * t, 0 * t][order]


_BINOM = [[1], [1, 1], [1, 2, 1], [1, 3, 3, 1], [1, 4, 6, 4, 1]]


def flat_fold_profile(x1, order: int = 0):
    """d^order/dx1^order of the one-dimensional exact solution.

    Zero for x1 < 1/2; (t^3/2 - t^2 + t) e^t with t = x1 - 1/2 otherwise.
    Derivatives follow from the Leibniz rule.
    """
    x1 = np.asarray(x1, dtype=float)
    t = x1 - 0.5
    right = sum(c * _p(t, j) for j, c in enumerate(_BINOM[order])) * np.exp(t)
    return np.where(x1 >= 0.5, right, 0.0)


def _flat_exact() -> ExactSolution:
    def value(x, y):
        return np.broadcast_to(flat_fold_profile(x, 0), np.broadcast(x, y).shape)

    def grad(x, y):
        x, y = np.broadcast_arrays(x, y)
        return np.stack([flat_fold_profile(x, 1), np.zeros_like(x)], axis=-1)

    def hess(x, y):
        x, y = np.broadcast_arrays(x, y)
        out = np.zeros(x.shape + (2, 2))
        out[..., 0, 0] = flat_fold_profile(x, 2)
        return out

    def third(x, y):
        x, y = np.broadcast_arrays(x, y)
        out = np.zeros(x.shape + (2, 2, 2))
        out[..., 0, 0, 0] = flat_fold_profile(x, 3)
        return out

    return ExactSolution(value, grad, hess, third)


def case_flat_fold(n: int = 4) -> BenchmarkCase:
    ex = _flat_exact()
    prob = ProblemSpec(
        f=lambda x, y: np.broadcast_to(flat_fold_profile(x, 4), np.broadcast(x, y).shape),
        g=ex.value, phi=ex.grad, fold=FLAT_FOLD, exact=ex, domain="unit_square")
    return BenchmarkCase("flat_fold", prob, Penalties(30.0, 30.0), "unit_square", n,
                         {"dg_error_vs_h": 1.0, "eta_vs_dofs": -0.5})


def flat_fold_interface_residuals(n_samples: int = 50, seed: int = 0) -> dict:
    """Crease conditions of the closed-form flat-fold solution at random fold points.

    Traces are taken one floating-point step either side of x1 = 1/2, so the
    two branches of the exact solution are evaluated separately. Returns the
    maximum of |[u]|, |D^2u n| on each side and |[d_n lap u]|, with n = (1, 0).
    """
    ex = _flat_exact()
    y = np.random.default_rng(seed).uniform(0.0, 1.0, n_samples)
    left = np.full_like(y, np.nextafter(0.5, 0.0))
    right = np.full_like(y, 0.5)
    n = np.array([1.0, 0.0])

    def d_n_lap(x):
        T = ex.third(x, y)
        return np.einsum("qiij,j->q", T, n)

    out = {"jump_u": np.abs(ex.value(right, y) - ex.value(left, y)).max()}
    for side, x in (("omega1", left), ("omega2", right)):
        out[f"dn_grad_{side}"] = np.abs(ex.hess(x, y) @ n).max()
    out["jump_dn_lap"] = np.abs(d_n_lap(right) - d_n_lap(left)).max()
    return {k: float(v) for k, v in out.items()}


# ---------------------------------------------------------------------------
# V-shaped fold, clamped along x2 = 1, pinned at (1/2, 0)

V_FOLD = FoldCurve(func=lambda t: 0.5 * (1.0 + np.abs(np.asarray(t) - 0.5)), interval=(0.0, 1.0),
                   axis=0, kind="polyline", breakpoints=(0.5,), name="v")


def case_v_fold(n: int = 4) -> BenchmarkCase:
    prob = ProblemSpec(
        f=zero,
        g=lambda x, y: 0.35 * np.sin(np.pi * np.asarray(x)) + 0 * np.asarray(y),
        phi=lambda x, y: np.stack(np.broadcast_arrays(0.35 * np.pi * np.cos(np.pi * np.asarray(x)),
                                                      0.0 * np.asarray(y)), axis=-1),
        fold=V_FOLD,
        dirichlet=lambda x, y: y > 1.0 - 1e-12,
        point_constraints=[((0.5, 0.0), 1.0)],
        domain="unit_square")
    return BenchmarkCase("v_fold", prob, Penalties(70.0, 70.0), "unit_square", n,
                         {"eta_vs_dofs": -0.5})


# ---------------------------------------------------------------------------
# L-shaped domain with a sinusoidal fold


def _sin_fold(t):
    return np.sin(np.pi * (np.asarray(t) + 1.0)) / 6.0 - 0.5


SIN_FOLD = FoldCurve(
    func=_sin_fold, interval=(-1.0, 1.0), axis=0, kind="smooth",
    dfunc=lambda t: np.pi * np.cos(np.pi * (t + 1.0)) / 6.0,
    ddfunc=lambda t: -np.pi**2 * np.sin(np.pi * (t + 1.0)) / 6.0,
    name="sin")


def _l_g(x, y):
    x, y = np.asarray(x), np.asarray(y)
    return (x**2 + y**2 + 2 * x * y - x - y) / 6.0


def _l_phi(x, y):
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    s = (2 * x + 2 * y - 1.0) / 6.0
    return np.stack([s, s], axis=-1)


def case_l_shape(n: int = 4) -> BenchmarkCase:
    prob = ProblemSpec(f=zero, g=_l_g, phi=_l_phi, fold=SIN_FOLD, domain="l_shape")
    return BenchmarkCase("l_shape", prob, Penalties(50.0, 50.0), "l_shape", n,
                         {"eta_vs_dofs": -0.5})


# ---------------------------------------------------------------------------
# manufactured solutions


def manufactured(value, grad, hess, *, fold=None, domain="unit_square", f=zero, n=4,
                 dirichlet=None, penalties=None, name="custom") -> BenchmarkCase:
    """Case whose Dirichlet data are the traces of a given exact solution."""
    ex = ExactSolution(value, grad, hess)
    prob = ProblemSpec(f=f, g=value, phi=grad, fold=fold, dirichlet=dirichlet, exact=ex,
                       domain=domain)
    return BenchmarkCase(name, prob, penalties or Penalties(), domain, n)


CASES = {"flat_fold": case_flat_fold, "v_fold": case_v_fold, "l_shape": case_l_shape}


def get_case(name: str, **kw) -> BenchmarkCase:
    try:
        return CASES[name](**kw)
    except KeyError:
        raise KeyError(f"unknown case {name!r}; choose from {sorted(CASES)}") from None
