import numpy as np
import pytest

from foldfem.assemble import ProblemSpec, assemble, zero, zero_vec
from foldfem.bench import FLAT_FOLD
from foldfem.estimate import EDGE_ESTIMATORS, compute_estimators, local_indicators
from foldfem.linalg import solve_spd
from foldfem.mesh import EdgeTag, Mesh, build_structured, refine_uniform
from foldfem.space import DgSpace


@pytest.fixture(scope="module")
def flat_level3(flat_case):
    m = flat_case.initial_mesh()
    for _ in range(3):
        m = refine_uniform(m)
    V = DgSpace(m, 2)
    x = solve_spd(*(lambda s: (s.matrix, s.rhs))(assemble(m, V, flat_case.problem, flat_case.penalties))).x
    return m, V, x


def test_zero_data_zero_solution(flat_case):
    m = flat_case.initial_mesh()
    V = DgSpace(m, 2)
    prob = ProblemSpec(f=zero, g=zero, phi=zero_vec, fold=FLAT_FOLD)
    rep = compute_estimators(m, V, prob, np.zeros(V.ndofs))
    assert rep.eta_tot() == 0.0
    assert np.all(local_indicators(rep, m) == 0)


def test_global_quadratic_has_no_jump_estimators():
    m = build_structured("unit_square", 4, FLAT_FOLD)
    V = DgSpace(m, 2)
    u = lambda x, y: np.asarray(y, float) ** 2 + 0 * np.asarray(x)  # noqa: E731
    phi = lambda x, y: np.stack(np.broadcast_arrays(0 * np.asarray(x, float), 2 * np.asarray(y, float)), -1)  # noqa: E731
    prob = ProblemSpec(f=zero, g=u, phi=phi, fold=FLAT_FOLD)
    tot = compute_estimators(m, V, prob, V.interpolate(u)).totals
    for name in EDGE_ESTIMATORS:
        assert tot[name] <= 1e-10, name
    assert tot["eta1"] == 0.0


def test_constant_on_single_element():
    # u_h = c, g = 0, Phi = 0 on a clamped triangle: only the value jump is nonzero,
    # eta2^2 = sum_e |e| c^2 / |e|^3
    m = Mesh([[0, 0], [1, 0], [0, 1]], [[1, 2, 0]])
    V = DgSpace(m, 2)
    c = 0.7
    prob = ProblemSpec(f=zero, g=zero, phi=zero_vec)
    rep = compute_estimators(m, V, prob, np.full(V.ndofs, c))
    h = m.edge_lengths()
    assert rep.totals["eta2"] ** 2 == pytest.approx(c**2 * np.sum(h**-2), rel=1e-13)
    for name in ("eta3", "eta4", "eta5", "eta6"):
        assert rep.totals[name] <= 1e-13


def test_element_residual_oracle():
    # k = 2: bilaplacian of u_h vanishes, so eta1^2 = h_T^4 * int_T f^2 = diam^4 * area * f^2
    m = Mesh([[0, 0], [1, 0], [0, 1]], [[1, 2, 0]])
    V = DgSpace(m, 2)
    prob = ProblemSpec(f=lambda x, y: 3.0 + 0 * np.asarray(x), g=zero, phi=zero_vec)
    rep = compute_estimators(m, V, prob, np.zeros(V.ndofs))
    assert rep.totals["eta1"] ** 2 == pytest.approx(np.sqrt(2) ** 4 * 0.5 * 9, rel=1e-13)


def test_eta1_uses_fourth_derivatives_for_k4():
    m = Mesh([[0, 0], [1, 0], [0, 1]], [[1, 2, 0]])
    V = DgSpace(m, 4)
    prob = ProblemSpec(f=lambda x, y: 24.0 + 0 * np.asarray(x), g=zero, phi=zero_vec)
    rep = compute_estimators(m, V, prob, V.interpolate(lambda x, y: x**4))
    assert rep.totals["eta1"] <= 1e-8


@pytest.mark.parametrize("variant", ["with_eta1", "paper_mode"])
def test_indicators_reproduce_total(flat_level3, flat_case, variant):
    m, V, x = flat_level3
    rep = compute_estimators(m, V, flat_case.problem, x, variant)
    ind = local_indicators(rep, m)
    assert np.sum(ind**2) == pytest.approx(rep.eta_tot() ** 2, rel=1e-12)


def test_paper_mode_drops_eta1(flat_level3, flat_case):
    m, V, x = flat_level3
    rep = compute_estimators(m, V, flat_case.problem, x)
    t = rep.totals
    assert rep.eta_tot("paper_mode") ** 2 == pytest.approx(sum(t[k] ** 2 for k in EDGE_ESTIMATORS), rel=1e-13)
    assert rep.eta_tot("with_eta1") ** 2 == pytest.approx(rep.eta_tot("paper_mode") ** 2 + t["eta1"] ** 2,
                                                           rel=1e-13)
    with pytest.raises(ValueError):
        rep.eta_tot("other")


def test_estimators_scale_linearly(flat_level3, flat_case):
    m, V, x = flat_level3
    s = 2.5
    a = compute_estimators(m, V, flat_case.problem, x).totals
    b = compute_estimators(m, V, flat_case.problem.scaled(s), s * np.asarray(x)).totals
    for k in a:
        assert b[k] == pytest.approx(s * a[k], rel=1e-12, abs=1e-300)


def test_crease_only_estimators(flat_level3, flat_case):
    m, V, x = flat_level3
    rep = compute_estimators(m, V, flat_case.problem, x)
    crease = m.edge_tags == EdgeTag.CREASE
    assert np.all(rep.edge_sq["eta5"][~crease] == 0)
    assert np.any(rep.edge_sq["eta5"][crease] > 0)
    assert np.all(rep.edge_sq["eta3"][crease] == 0)
    boundary = m.edge_neighbor < 0
    for k in ("eta4", "eta5", "eta6"):
        assert np.all(rep.edge_sq[k][boundary] == 0)


def test_two_element_split():
    # one interior edge: its contribution is shared half-and-half
    m = Mesh([[0, 0], [1, 0], [1, 1], [0, 1]], [[0, 2, 3], [2, 0, 1]])
    V = DgSpace(m, 2)
    prob = ProblemSpec(f=zero, g=zero, phi=zero_vec)
    coeffs = np.concatenate([np.zeros(V.nb), np.ones(V.nb)])
    rep = compute_estimators(m, V, prob, coeffs)
    inner = int(np.flatnonzero(m.edge_neighbor >= 0)[0])
    edge_sum = sum(rep.edge_sq[k] for k in EDGE_ESTIMATORS)
    ind = local_indicators(rep, m) ** 2
    T1 = int(m.edge_neighbor[inner]) if int(m.edge_owner[inner]) == 0 else int(m.edge_owner[inner])
    own_boundary = [e for e in m.tri_edges[T1] if e != inner]
    assert ind[T1] == pytest.approx(0.5 * edge_sum[inner] + edge_sum[own_boundary].sum(), rel=1e-13)
    assert ind[1 - T1] == pytest.approx(0.5 * edge_sum[inner], rel=1e-13)


def test_indicators_concentrate_right_of_crease(flat_level3, flat_case):
    # the left half carries u = 0, the estimate concentrates to the right of the crease
    m, V, x = flat_level3
    ind = local_indicators(compute_estimators(m, V, flat_case.problem, x), m)
    left = m.centroids()[:, 0] < 0.5
    assert ind[left].sum() < ind[~left].sum()
