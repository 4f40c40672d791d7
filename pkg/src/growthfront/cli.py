"""Command-line driver: ``growthfront <mode> --config <path> [--out <dir>] [--set key=value ...]``.

Exit codes:

====  ==========================================================
0     success
1     other solver error (domain, unsupported metric, ...)
2     configuration error, or compare refused a stale mask.csv
3     fixed point not reached within max_iter
4     node cap exceeded
====  ==========================================================
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import Scenario, escape_path, predicted_boundary, trapping_radius_bound
from .config import MODES, ConfigError, RunConfig, load_config
from .errors import GrowthFrontError, ResourceError
from .grid import build_grid
from .io import (
    fmt,
    read_config_hash,
    read_mask_csv,
    write_csv,
    write_curve_csv,
    write_json,
    write_manifest,
    write_mask_csv,
    write_profile_csv,
    write_slice_csv,
)
from .solver import (
    FixedPoint,
    NonConvergenceWarning,
    boundary_residual,
    classify_boundedness,
    default_r_max,
    extract_profile,
    solve,
    solve_with_doubling,
    time_slices,
)

log = logging.getLogger("growthfront")

EXIT_OK = 0
EXIT_SOLVER = 1
EXIT_CONFIG = 2
EXIT_NONCONVERGED = 3
EXIT_RESOURCE = 4


class StaleArtifactError(GrowthFrontError):
    pass


def _grid_kwargs(cfg: RunConfig) -> dict:
    g = cfg.grid
    return dict(n_r=g.n_r, n_theta=g.n_theta, stencil_order=g.stencil_order, max_iter=g.max_iter, node_cap=g.node_cap)


def _solve_quiet(metric, scn, r_max, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonConvergenceWarning)
        return solve(metric, scn, r_max=r_max, **kw)


def _summary(cfg: RunConfig, sol, chash: str) -> dict:
    grid, fp, prof, v = sol.grid, sol.fixed_point, sol.profile, sol.verdict
    return {
        "config_hash": chash,
        "version": __version__,
        "classification": v.kind,
        "escape_sector": list(v.sector) if v.sector else None,
        "max_f": prof.max_finite if prof.finite.any() else None,
        "margin": v.margin,
        "iterations": fp.iterations,
        "converged": fp.converged,
        "residual": sol.residual,
        "mirror_defect": prof.mirror_defect(),
        "omega_nodes": int(fp.omega.sum()),
        "grid": {
            "r_max": grid.r_max,
            "n_r": grid.n_r,
            "n_theta": grid.n_theta,
            "stencil_order": grid.stencil_order,
            "dr": grid.dr,
            "dtheta": grid.dtheta,
        },
        "scenario": {"lambda": cfg.lam, "ell": cfg.ell},
        "metric": {"kind": cfg.metric.kind, "kappa": cfg.metric.kappa, "tail": sol.grid.metric.tail_model},
    }


def _slice_name(t: float) -> str:
    return f"slice_t{fmt(t)}.csv"


def _write_curves(out: Path, metric, scn, chash) -> list:
    files = []
    try:
        pb = predicted_boundary(metric, scn)
    except GrowthFrontError as exc:
        log.info("no predicted boundary: %s", exc)
    else:
        files.append(write_curve_csv(out / "predicted_boundary.csv", pb.polyline(), chash))
    T = trapping_radius_bound(metric, scn)
    if math.isfinite(T):
        try:
            ep = escape_path(metric, scn, math.pi)
        except GrowthFrontError as exc:
            log.info("no escape path: %s", exc)
        else:
            files.append(write_curve_csv(out / "escape_path.csv", ep.path.samples, chash))
    return files


def _manifest(out: Path, chash: str):
    """List every artifact in ``out`` produced from this configuration."""
    files = [p for p in sorted(out.iterdir()) if p.is_file() and p.name != "manifest.json" and read_config_hash(p) == chash]
    return write_manifest(out, files, chash)


# -- modes -----------------------------------------------------------------------------


def run_solve(cfg: RunConfig, out: Path) -> int:
    metric, scn, chash = cfg.build_metric(), cfg.scenario(), cfg.config_hash()
    sol = _solve_quiet(metric, scn, cfg.grid.r_max, **_grid_kwargs(cfg))
    arts = cfg.outputs.artifacts
    if "summary" in arts:
        write_json(out / "summary.json", _summary(cfg, sol, chash))
    if "profile" in arts:
        write_profile_csv(out / "profile.csv", sol.profile, chash)
    if "mask" in arts:
        write_mask_csv(out / "mask.csv", sol.grid, sol.omega, chash)
    if "slices" in arts:
        times = cfg.outputs.times
        for t, (A, B) in zip(times, time_slices(sol.grid, sol.fixed_point, scn, times)):
            write_slice_csv(out / _slice_name(t), sol.grid, A, B, chash)
    if "curves" in arts:
        _write_curves(out, metric, scn, chash)
    _manifest(out, chash)
    log.info("classification=%s iterations=%d residual=%s", sol.verdict.kind, sol.fixed_point.iterations, fmt(sol.residual))
    return EXIT_OK if sol.fixed_point.converged else EXIT_NONCONVERGED


def _refine_cell(args):
    cfg, n_r = args
    metric, scn = cfg.build_metric(), cfg.scenario()
    r_max = cfg.grid.r_max if cfg.grid.r_max is not None else default_r_max(metric, scn)
    kw = _grid_kwargs(cfg)
    kw["n_r"] = n_r
    sol = _solve_quiet(metric, scn, r_max, **kw)
    return {
        "n_r": n_r,
        "dr": sol.grid.dr,
        "residual": sol.residual,
        "max_f": sol.profile.max_finite if sol.profile.finite.any() else math.inf,
        "classification": sol.verdict.kind,
        "iterations": sol.fixed_point.iterations,
        "converged": sol.fixed_point.converged,
    }


def observed_orders(dr, residual):
    """Empirical order log(e_k / e_{k+1}) / log(dr_k / dr_{k+1}) between consecutive levels."""
    out = []
    for k in range(len(dr) - 1):
        e0, e1 = residual[k], residual[k + 1]
        if e0 > 0 and e1 > 0:
            out.append(math.log(e0 / e1) / math.log(dr[k] / dr[k + 1]))
        else:
            out.append(math.nan)
    return out


def _map(fn, cells, workers):
    if workers <= 1 or len(cells) <= 1:
        return [fn(c) for c in cells]
    with ProcessPoolExecutor(max_workers=min(workers, len(cells))) as ex:
        return list(ex.map(fn, cells))


def run_refine(cfg: RunConfig, out: Path) -> int:
    """Residual against resolution at n_r = N, 2N, 4N, ... with n_theta held fixed."""
    chash = cfg.config_hash()
    levels = [cfg.grid.n_r * 2**k for k in range(cfg.refine.levels)]
    rows = _map(_refine_cell, [(cfg, n) for n in levels], cfg.sweep.workers)
    rows.sort(key=lambda r: r["n_r"])
    orders = observed_orders([r["dr"] for r in rows], [r["residual"] for r in rows])
    write_csv(
        out / "refine.csv",
        "n_r,dr,residual,observed_order,max_f,classification,iterations,converged",
        (
            (str(r["n_r"]), fmt(r["dr"]), fmt(r["residual"]), fmt(o) if k else "", fmt(r["max_f"]), r["classification"], str(r["iterations"]), str(r["converged"]).lower())
            for k, (r, o) in enumerate(zip(rows, [math.nan] + orders))
        ),
        chash,
    )
    write_json(out / "refine.json", {"config_hash": chash, "version": __version__, "levels": rows, "observed_orders": orders})
    _manifest(out, chash)
    return EXIT_OK if all(r["converged"] for r in rows) else EXIT_NONCONVERGED


@dataclass(frozen=True)
class SweepCell:
    lam: float
    ell: float


def _sweep_cell(args):
    cfg, cell = args
    metric = cfg.build_metric()
    scn = Scenario(cell.lam, cell.ell)
    r_max = cfg.grid.r_max
    if r_max is None or r_max <= cell.ell:
        r_max = default_r_max(metric, scn)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonConvergenceWarning)
        runs = solve_with_doubling(metric, scn, r_max=r_max, max_doublings=cfg.sweep.max_doublings, **_grid_kwargs(cfg))
    last = runs[-1]
    return {
        "lambda": cell.lam,
        "ell": cell.ell,
        "classification": last.verdict.kind,
        "max_f": last.profile.max_finite if last.profile.finite.any() else math.inf,
        "r_max": last.grid.r_max,
        "runs": len(runs),
        "converged": all(r.fixed_point.converged for r in runs),
    }


def run_sweep(cfg: RunConfig, out: Path) -> int:
    """Raw trichotomy per (lambda, ell) cell; row order is fixed by sorting, not by completion."""
    chash = cfg.config_hash()
    cells = sorted({SweepCell(l, e) for l in cfg.sweep.lambdas for e in cfg.sweep.ells}, key=lambda c: (c.lam, c.ell))
    rows = _map(_sweep_cell, [(cfg, c) for c in cells], cfg.sweep.workers)
    rows.sort(key=lambda r: (r["lambda"], r["ell"]))
    write_csv(
        out / "sweep.csv",
        "lambda,ell,classification,max_f,r_max,runs,converged",
        ((fmt(r["lambda"]), fmt(r["ell"]), r["classification"], fmt(r["max_f"]), fmt(r["r_max"]), str(r["runs"]), str(r["converged"]).lower()) for r in rows),
        chash,
    )
    _manifest(out, chash)
    return EXIT_OK if all(r["converged"] for r in rows) else EXIT_NONCONVERGED


# -- compare ------------------------------------------------------------------------------


def densify(poly, step_r, metric):
    """Insert points along each (r, theta) segment so consecutive chart distances are <= step_r."""
    poly = np.asarray(poly, float)
    if len(poly) < 2:
        return poly
    out = [poly[:1]]
    for p0, p1 in zip(poly[:-1], poly[1:]):
        d = chart_distance(metric, p0[None, :], p1[None, :])[0, 0]
        n = max(1, int(math.ceil(d / step_r)))
        s = np.linspace(0.0, 1.0, n + 1)[1:, None]
        out.append(p0 + s * (p1 - p0))
    return np.vstack(out)


def chart_distance(metric, a, b):
    """Pairwise sqrt(dr^2 + G(r_mean)^2 dtheta^2) with dtheta wrapped to [-pi, pi]."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    dr = a[:, None, 0] - b[None, :, 0]
    dth = np.angle(np.exp(1j * (a[:, None, 1] - b[None, :, 1])))
    G = metric.G(0.5 * (a[:, None, 0] + b[None, :, 0]))
    return np.sqrt(dr * dr + (G * dth) ** 2)


def _directed(metric, a, b, chunk=2048):
    worst = 0.0
    for k in range(0, len(a), chunk):
        worst = max(worst, float(chart_distance(metric, a[k : k + chunk], b).min(axis=1).max()))
    return worst


def hausdorff(metric, a, b) -> float:
    if len(a) == 0 or len(b) == 0:
        return math.inf if len(a) or len(b) else 0.0
    return max(_directed(metric, a, b), _directed(metric, b, a))


def grid_polyline(profile) -> np.ndarray:
    """Finite part of the grid boundary as (r, theta) with theta in (-pi, pi], sorted by theta."""
    th = np.angle(np.exp(1j * profile.theta))
    keep = profile.finite
    pts = np.column_stack([profile.f[keep], th[keep]])
    return pts[np.argsort(pts[:, 1], kind="stable")]


@dataclass(frozen=True)
class ComparisonReport:
    hausdorff: float
    hausdorff_visible_arc: float
    hausdorff_spirals: float
    cells: float
    classification: str
    predicted_bounded: bool
    residual: float
    config_hash: str

    def to_dict(self):
        return {
            "config_hash": self.config_hash,
            "version": __version__,
            "hausdorff": self.hausdorff,
            "hausdorff_cells": self.cells,
            "regions": {"visible_arc": self.hausdorff_visible_arc, "spirals": self.hausdorff_spirals},
            "classification": self.classification,
            "predicted_bounded": self.predicted_bounded,
            "residual": self.residual,
        }


def compare_solution(metric, scn, grid, profile, classification, residual, chash) -> ComparisonReport:
    """Hausdorff distances between the grid boundary and the predicted one.

    Both curves are clipped to r <= r_max and split at the tangency angle
    into the visible arc (|theta| <= a) and the spiral parts.
    """
    pb = predicted_boundary(metric, scn, r_end=grid.r_max)
    step = grid.dr / 4
    pred = pb.polyline()
    pred = pred[pred[:, 0] <= grid.r_max]
    pred = densify(pred, step, metric)
    gpts = densify(grid_polyline(profile), step, metric)
    a = pb.a
    parts = {}
    for name, sel in (("arc", lambda p: np.abs(p[:, 1]) <= a), ("spiral", lambda p: np.abs(p[:, 1]) > a)):
        parts[name] = hausdorff(metric, gpts[sel(gpts)], pred[sel(pred)])
    total = hausdorff(metric, gpts, pred)
    return ComparisonReport(total, parts["arc"], parts["spiral"], total / grid.dr, classification, pb.bounded, residual, chash)


def run_compare(cfg: RunConfig, out: Path) -> int:
    metric, scn, chash = cfg.build_metric(), cfg.scenario(), cfg.config_hash()
    mask_path = out / "mask.csv"
    converged = True
    if mask_path.exists():
        found = read_config_hash(mask_path)
        if found != chash:
            raise StaleArtifactError(f"{mask_path} was produced by config {found}, not {chash}; refusing to compare")
        r_max = cfg.grid.r_max if cfg.grid.r_max is not None else default_r_max(metric, scn)
        g = cfg.grid
        grid = build_grid(metric, scn, r_max, g.n_r, g.n_theta, g.stencil_order, node_cap=g.node_cap)
        omega = read_mask_csv(mask_path, grid)
        dist = grid.distances(grid.q_node, omega)
        fp = FixedPoint(omega, dist, 0, [], True)
        profile = extract_profile(grid, omega)
        verdict = classify_boundedness(grid, profile)
        residual = boundary_residual(grid, fp, scn)
    else:
        sol = _solve_quiet(metric, scn, cfg.grid.r_max, **_grid_kwargs(cfg))
        grid, profile, verdict, residual = sol.grid, sol.profile, sol.verdict, sol.residual
        converged = sol.fixed_point.converged
    report = compare_solution(metric, scn, grid, profile, verdict.kind, residual, chash)
    write_json(out / "comparison.json", report.to_dict())
    _manifest(out, chash)
    log.info("hausdorff=%s (%s cells)", fmt(report.hausdorff), fmt(report.cells))
    return EXIT_OK if converged else EXIT_NONCONVERGED


RUNNERS = {"solve": run_solve, "refine": run_refine, "sweep": run_sweep, "compare": run_compare}


def run(cfg: RunConfig, out=None) -> int:
    out = Path(out if out is not None else cfg.outputs.directory)
    out.mkdir(parents=True, exist_ok=True)
    return RUNNERS[cfg.mode](cfg, out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="growthfront", description="Grid solver for two-set growth competition on rotationally symmetric surfaces.")
    p.add_argument("mode", choices=MODES)
    p.add_argument("--config", required=True, help="YAML run configuration")
    p.add_argument("--out", help="output directory (overrides outputs.directory)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE", help="override a scalar field, e.g. grid.n_r=200")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, overrides=args.overrides, mode=args.mode)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"{args.config}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run(cfg, args.out)
    except StaleArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except GrowthFrontError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
