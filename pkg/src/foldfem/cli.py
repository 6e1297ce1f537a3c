"""Command-line driver: benchmark studies, CSV/VTK/PNG output, bubble-identity report."""
from __future__ import annotations

import argparse
import logging
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path

from .adapt import AdaptConfig, AdaptiveRunError, run_adaptive
from .assemble import AssemblyError, Penalties
from .bench import CASES, get_case
from .mesh import MeshError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IDENTITY = 4

log = logging.getLogger("foldfem")


@dataclass
class RunConfig:
    case: str | None
    k: int = 2
    theta: float = 0.1
    gamma0: float | None = None
    gamma1: float | None = None
    uniform: bool = False
    levels: int = 10
    max_dofs: int = 200_000
    variant: str = "with_eta1"
    out: Path = Path(".")
    vtk: bool = False
    verify_bubble: bool = False
    plot: bool = False

    def validate(self) -> None:
        if self.case is None and not self.verify_bubble:
            raise ValueError("nothing to do: give --case and/or --verify-bubble")
        if self.case is not None and self.case not in CASES:
            raise ValueError(f"unknown case {self.case!r}; choose from {sorted(CASES)}")
        if not 1 <= self.k <= 4:
            raise ValueError("--k must lie in 1..4")
        if self.levels < 1:
            raise ValueError("--levels must be at least 1")
        if self.max_dofs < 1:
            raise ValueError("--max-dofs must be positive")
        AdaptConfig(theta=self.theta)  # reuses the theta check
        for g in (self.gamma0, self.gamma1):
            if g is not None and not g > 0:
                raise ValueError("penalty parameters must be positive")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="foldfem", description=__doc__)
    p.add_argument("--case", choices=sorted(CASES))
    p.add_argument("--k", type=int, default=2, help="polynomial degree (default 2)")
    p.add_argument("--theta", type=float, default=0.1, help="marking fraction (default 0.1)")
    p.add_argument("--gamma0", type=float, help="value-jump penalty (default: per case)")
    p.add_argument("--gamma1", type=float, help="gradient-jump penalty (default: per case)")
    p.add_argument("--uniform", action="store_true", help="refine uniformly instead of adaptively")
    p.add_argument("--levels", type=int, default=10)
    p.add_argument("--max-dofs", type=int, default=200_000)
    p.add_argument("--paper-mode", action="store_true",
                   help="leave eta1 out of eta_tot and of the marking indicators")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--vtk", action="store_true", help="write mesh_level_{L}.vtk per level")
    p.add_argument("--verify-bubble", action="store_true",
                   help="check the edge-bubble identities and write their report")
    p.add_argument("--plot", action="store_true", help="render PNG figures next to the CSV")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _config(ns) -> RunConfig:
    return RunConfig(case=ns.case, k=ns.k, theta=ns.theta, gamma0=ns.gamma0, gamma1=ns.gamma1,
                     uniform=ns.uniform, levels=ns.levels, max_dofs=ns.max_dofs,
                     variant="paper_mode" if ns.paper_mode else "with_eta1", out=ns.out,
                     vtk=ns.vtk, verify_bubble=ns.verify_bubble, plot=ns.plot)


def _verify_bubble(cfg: RunConfig) -> bool:
    from .theory import run_identity_suite, write_identity_csv

    reports = run_identity_suite()
    write_identity_csv(reports, cfg.out / "bubble_identities.csv")
    lines = [f"{'patch':<10} {'direction':<11} " + " ".join(f"{k:>10}" for k in reports[0].violations)
             + "  status"]
    for r in reports:
        lines.append(f"{r.label:<10} {r.direction:<11} "
                     + " ".join(f"{v:10.2e}" for v in r.violations.values())
                     + ("  ok" if r.passed() else "  VIOLATED"))
    text = "\n".join(lines) + "\n"
    (cfg.out / "bubble_report.txt").write_text(text)
    print(text, end="")
    return all(r.passed() for r in reports)


def _study(cfg: RunConfig) -> None:
    case = get_case(cfg.case)
    pen = Penalties(cfg.gamma0 if cfg.gamma0 is not None else case.penalties.gamma0,
                    cfg.gamma1 if cfg.gamma1 is not None else case.penalties.gamma1)
    acfg = AdaptConfig(theta=cfg.theta, max_levels=cfg.levels, max_dofs=cfg.max_dofs,
                       uniform=cfg.uniform, variant=cfg.variant)
    last = {}

    def on_level(rec, state):
        print(f"level {rec.level:3d}  elements {rec.elements:7d}  dofs {rec.dofs:8d}  "
              f"eta_tot {rec.eta_tot:.4e}"
              + (f"  dg_error {rec.dg_error:.4e}" if rec.dg_error is not None else ""), flush=True)
        if cfg.vtk:
            from .output import write_level_vtk

            write_level_vtk(cfg.out, rec.level, state.space, state.coeffs, state.indicators)
        last["state"] = state

    hist = run_adaptive(case.problem, acfg, pen, cfg.k, case.initial_mesh(), callback=on_level)
    csv_path = cfg.out / "convergence.csv"
    hist.write_csv(csv_path)
    print(f"wrote {csv_path}")
    if cfg.plot:
        from .plots import plot_convergence, plot_estimators, plot_mesh

        title = f"{cfg.case} ({'uniform' if cfg.uniform else 'adaptive'})"
        for path in (plot_convergence(hist, cfg.out / "convergence.png", title),
                     plot_estimators(hist, cfg.out / "estimators.png", title),
                     plot_mesh(last["state"].mesh, cfg.out / "mesh_final.png",
                               last["state"].indicators, title)):
            print(f"wrote {path}")


def run(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:  # argparse has already printed the usage error
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = _config(ns)
    try:
        cfg.validate()
        cfg.out.mkdir(parents=True, exist_ok=True)
    except (ValueError, OSError) as exc:
        print(f"foldfem: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    status = EXIT_OK
    if cfg.verify_bubble and not _verify_bubble(cfg):
        print("foldfem: some bubble identities are violated (see bubble_report.txt)", file=sys.stderr)
        status = EXIT_IDENTITY
    if cfg.case is not None:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("always", RuntimeWarning)
                _study(cfg)
        except AdaptiveRunError as exc:
            print(f"foldfem: numerical failure at {exc}", file=sys.stderr)
            return EXIT_NUMERICAL
        except (AssemblyError, MeshError) as exc:
            print(f"foldfem: configuration error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    return status


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
