import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from foldfem.adapt import (CSV_COLUMNS, AdaptConfig, AdaptiveRunError, loglog_slope, mark,
                           mark_dorfler, run_adaptive)
from foldfem.assemble import Penalties


def test_mark_top_half():
    assert mark([4, 3, 2, 1], 0.5).tolist() == [0, 1]


def test_mark_ties_prefer_lower_index():
    assert mark(np.ones(10), 0.1).tolist() == [0]


def test_mark_everything():
    assert mark([0.3, 0.1, 0.2], 1.0).tolist() == [0, 1, 2]


@settings(max_examples=50, deadline=None)
@given(eta=st.lists(st.floats(0, 1e3, allow_nan=False), min_size=1, max_size=60),
       theta=st.floats(0.01, 1.0))
def test_mark_count_and_dominance(eta, theta):
    m = mark(eta, theta)
    assert len(m) == math.ceil(theta * len(eta) - 1e-12)
    eta = np.asarray(eta)
    rest = np.setdiff1d(np.arange(len(eta)), m)
    if len(rest):
        assert eta[m].min() >= eta[rest].max()


@pytest.mark.parametrize("bad", [[], [-1.0, 2.0]])
def test_mark_rejects_bad_indicators(bad):
    with pytest.raises(ValueError):
        mark(bad, 0.5)


@pytest.mark.parametrize("theta", [0.0, 1.5])
def test_theta_range(theta):
    with pytest.raises(ValueError):
        mark([1.0], theta)
    with pytest.raises(ValueError):
        AdaptConfig(theta=theta)


def test_dorfler_marks_mass_fraction():
    # squares 16, 9, 4, 1 (total 30): 16 covers half, 60% needs 16 + 9
    assert mark_dorfler([4, 3, 2, 1], 0.5).tolist() == [0]
    assert mark_dorfler([4, 3, 2, 1], 0.6).tolist() == [0, 1]
    assert mark_dorfler([4, 3, 2, 1], 0.5 * 16 / 30).tolist() == [0]


def test_loglog_slope():
    x = np.array([10, 100, 1000])
    assert loglog_slope(x, 3 * x**-0.5) == pytest.approx(-0.5)


@pytest.fixture(scope="module")
def short_run(flat_case):
    cfg = AdaptConfig(theta=0.2, max_levels=4)
    return run_adaptive(flat_case.problem, cfg, flat_case.penalties, 2, flat_case.initial_mesh(),
                        keep_states=True)


def test_dofs_increase_and_records_complete(short_run):
    assert len(short_run) == 4
    dofs = short_run.column("dofs")
    assert np.all(np.diff(dofs) > 0)
    for r in short_run.records:
        assert r.dofs == 6 * r.elements
        assert r.residual <= 1e-10
        assert r.eff_index == pytest.approx(r.eta_tot / r.dg_error)


def test_run_is_deterministic(short_run, flat_case):
    cfg = AdaptConfig(theta=0.2, max_levels=4)
    again = run_adaptive(flat_case.problem, cfg, flat_case.penalties, 2, flat_case.initial_mesh())
    assert np.array_equal(again.column("dofs"), short_run.column("dofs"))
    assert np.array_equal(again.column("eta_tot"), short_run.column("eta_tot"))
    assert np.array_equal(again.column("dg_error"), short_run.column("dg_error"))


def test_states_kept(short_run):
    assert len(short_run.states) == 4
    s = short_run.states[-1]
    assert len(s.indicators) == s.mesh.n_triangles


def test_uniform_run_quadruples(flat_case):
    cfg = AdaptConfig(uniform=True, max_levels=3)
    h = run_adaptive(flat_case.problem, cfg, flat_case.penalties, 2, flat_case.initial_mesh())
    assert h.column("elements").tolist() == [32, 128, 512]


def test_dof_budget_stops_run(flat_case):
    cfg = AdaptConfig(uniform=True, max_levels=10, max_dofs=1000)
    h = run_adaptive(flat_case.problem, cfg, flat_case.penalties, 2, flat_case.initial_mesh())
    assert h.column("dofs").max() <= 1000 and len(h) == 2


def test_csv_columns(short_run, tmp_path):
    path = tmp_path / "c.csv"
    short_run.write_csv(path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 5
    assert int(rows[1][2]) == short_run.records[0].dofs
    assert float(rows[-1][9]) == short_run.records[-1].eta_tot


def test_v_fold_csv_leaves_error_blank(v_case, tmp_path):
    cfg = AdaptConfig(max_levels=2)
    h = run_adaptive(v_case.problem, cfg, v_case.penalties, 2, v_case.initial_mesh())
    path = tmp_path / "v.csv"
    h.write_csv(path)
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    assert all(r["dg_error"] == "" and r["eff_index"] == "" for r in rows)


def test_unstable_penalties_abort_with_level(flat_case):
    with pytest.warns(RuntimeWarning):
        pen = Penalties(1e-3, 1e-3)
    with pytest.raises(AdaptiveRunError) as info:
        run_adaptive(flat_case.problem, AdaptConfig(max_levels=2), pen, 2, flat_case.initial_mesh())
    assert info.value.level == 0


def test_initial_mesh_required(flat_case):
    with pytest.raises(ValueError):
        run_adaptive(flat_case.problem, AdaptConfig(), flat_case.penalties, 2, None)
