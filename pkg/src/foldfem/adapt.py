"""Marking and the solve-estimate-mark-refine loop."""
from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from .assemble import Penalties, ProblemSpec, assemble, dg_error
from .estimate import compute_estimators, local_indicators
from .linalg import SolverError, solve_spd
from .mesh import Mesh, refine, refine_uniform
from .space import DgSpace

log = logging.getLogger(__name__)

CSV_COLUMNS = ("level", "elements", "dofs", "eta1", "eta2", "eta3", "eta4", "eta5", "eta6",
               "eta_tot", "dg_error", "eff_index", "wall_ms")


@dataclass
class AdaptConfig:
    theta: float = 0.1
    max_levels: int = 10
    max_dofs: int = 200_000
    uniform: bool = False
    variant: str = "with_eta1"
    strategy: str = "count"  # or "dorfler"
    solver: str = "auto"
    tol: float = 1e-10

    def __post_init__(self):
        if not 0 < self.theta <= 1:
            raise ValueError("theta must lie in (0, 1]")
        if self.strategy not in ("count", "dorfler"):
            raise ValueError(f"unknown marking strategy {self.strategy!r}")


@dataclass
class LevelRecord:
    level: int
    elements: int
    dofs: int
    eta1: float
    eta2: float
    eta3: float
    eta4: float
    eta5: float
    eta6: float
    eta_tot: float
    dg_error: float | None
    eff_index: float | None
    wall_ms: float
    residual: float = 0.0
    h_max: float = 0.0


@dataclass
class LevelState:
    """Everything produced at one level (kept only when requested)."""

    mesh: Mesh
    space: DgSpace
    coeffs: np.ndarray
    indicators: np.ndarray


@dataclass
class ConvergenceHistory:
    records: list = field(default_factory=list)
    states: list = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def __len__(self):
        return len(self.records)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for r in self.records:
                row = asdict(r)
                w.writerow(["" if row[c] is None else _fmt(row[c]) for c in CSV_COLUMNS])


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


class AdaptiveRunError(RuntimeError):
    def __init__(self, level, cause):
        super().__init__(f"level {level}: {cause}")
        self.level = level
        self.cause = cause


def mark(indicators, theta: float) -> np.ndarray:
    """The ceil(theta*N) elements with the largest indicator (ties: lower id)."""
    eta = np.asarray(indicators, dtype=float)
    if eta.size == 0:
        raise ValueError("empty indicator list")
    if not 0 < theta <= 1:
        raise ValueError("theta must lie in (0, 1]")
    if np.any(eta < 0):
        raise ValueError("indicators must be nonnegative")
    k = math.ceil(theta * eta.size - 1e-12)
    order = np.lexsort((np.arange(eta.size), -eta))
    return np.sort(order[:k])


def mark_dorfler(indicators, theta: float) -> np.ndarray:
    """Smallest set (by decreasing indicator) carrying theta of the total squared mass."""
    eta2 = np.asarray(indicators, dtype=float) ** 2
    if eta2.size == 0:
        raise ValueError("empty indicator list")
    order = np.lexsort((np.arange(eta2.size), -eta2))
    cum = np.cumsum(eta2[order])
    k = int(np.searchsorted(cum, theta * cum[-1] * (1 - 1e-14))) + 1
    return np.sort(order[:min(k, eta2.size)])


def run_adaptive(prob: ProblemSpec, cfg: AdaptConfig, pen: Penalties, k: int = 2,
                 mesh: Mesh | None = None, keep_states: bool = False,
                 callback=None) -> ConvergenceHistory:
    """Run the adaptive (or uniform) loop starting from ``mesh``."""
    if mesh is None:
        raise ValueError("an initial fitted mesh is required")
    hist = ConvergenceHistory()
    for level in range(cfg.max_levels):
        t0 = time.perf_counter()
        space = DgSpace(mesh, k)
        if space.ndofs > cfg.max_dofs:
            break
        try:
            sys = assemble(mesh, space, prob, pen)
            sol = solve_spd(sys.matrix, sys.rhs, tol=cfg.tol, method=cfg.solver, block=space.nb)
        except SolverError as exc:
            raise AdaptiveRunError(level, exc) from exc
        rep = compute_estimators(mesh, space, prob, sol.x, cfg.variant)
        ind = local_indicators(rep, mesh)
        err = dg_error(mesh, space, prob, pen, sol.x) if prob.exact is not None else None
        tot = rep.totals
        eta_tot = rep.eta_tot()
        rec = LevelRecord(level, mesh.n_triangles, space.ndofs, *(tot[f"eta{i}"] for i in range(1, 7)),
                          eta_tot, err, (eta_tot / err if err else None),
                          1e3 * (time.perf_counter() - t0), sol.residual,
                          float(mesh.diameters().max()))
        hist.records.append(rec)
        if keep_states:
            hist.states.append(LevelState(mesh, space, sol.x, ind))
        if callback is not None:
            callback(rec, LevelState(mesh, space, sol.x, ind))
        log.info("level %d: %d dofs, eta_tot=%.4e", level, space.ndofs, eta_tot)
        if level == cfg.max_levels - 1:
            break
        if cfg.uniform:
            mesh = refine_uniform(mesh)
        else:
            marker = mark if cfg.strategy == "count" else mark_dorfler
            mesh = refine(mesh, marker(ind, cfg.theta))
    return hist


def loglog_slope(x, y) -> float:
    """Least-squares slope of log y against log x."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])
