"""Single runs, run analysis and the parallel (rho, nu) sweep.

A run directory holds ``config.txt``, ``series.csv``, ``snapshots/`` and
``final.ckpt``; :func:`analyse_run_dir` rebuilds a :class:`BoundReport` from
those files alone, which is what ``verify`` does. Sweep workers only write
their own run directory; all cross-run analysis happens afterwards in the
parent, in a fixed order, so artifacts do not depend on the worker count.
Wall-clock durations are only logged, never written to the output directory.
"""

import logging
import math
import os
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from . import output
from .config import SweepSpec, config_hash, parse_config
from .coupled import dump_checkpoint, run_simulation
from .errors import FrontChannelError, SandwichInfeasible
from .flow import gradient_bound_check, solve_stationary_stokes
from .grid import ScalarField
from .laminar import laminar_front

log = logging.getLogger(__name__)

DIV_LIMIT = 1e-10
OVERSHOOT = 1e-3


@dataclass
class RunRecord:
    rho: float
    nu: float
    config_hash: str
    run_dir: str
    series_path: str = None
    snapshot_paths: list = field(default_factory=list)
    report_path: str = None
    duration: float = 0.0
    error: str = None
    final: dict = None


def late_speed(series, fraction=0.5):
    t, x = series["t"], series["front_pos"]
    late = t >= (1 - fraction) * t[-1]
    return float(np.polyfit(t[late], x[late], 1)[0])


def execute_run(text, run_dir, seed=0, base_dir=None, profile=None):
    """Run one simulation from config text and write its directory; returns a RunRecord."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    cfg = parse_config(text, base_dir, seed)
    rec = RunRecord(cfg.gravity.rho, cfg.nu, config_hash(text), str(run_dir))
    (run_dir / "config.txt").write_text(text)
    if profile is None:
        profile = laminar_front(cfg.reaction)
    start = time.perf_counter()
    result = run_simulation(cfg, profile)
    rec.duration = time.perf_counter() - start
    rec.series_path = str(output.emit_series(result.series, run_dir / "series.csv"))
    rec.snapshot_paths = [str(p) for p in output.write_snapshots(result.snapshots, run_dir / "snapshots")]
    dump_checkpoint(result.state, run_dir / "final.ckpt")
    output.write_json(run_dir / "run.json", {
        "max_div": result.state.max_div,
        "theta_min": result.state.theta_range[0],
        "theta_max": result.state.theta_range[1],
        "steps": result.state.steps,
    })
    fin = result.series.final()
    rec.final = {"Bbar": fin["Bbar"], "Nbar": fin["Nbar"], "Ubar": fin["Ubar"],
                 "speed": late_speed(result.series)}
    return rec


def _worker(task):
    # one BLAS/FFT thread per process keeps results independent of the pool size
    os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
    os.environ.setdefault("OMP_NUM_THREADS", "1")
    index, text, run_dir, seed, base_dir = task
    try:
        return index, execute_run(text, run_dir, seed, base_dir)
    except FrontChannelError as exc:
        cfg_hash = config_hash(text)
        rec = RunRecord(math.nan, math.nan, cfg_hash, str(run_dir), error=f"{type(exc).__name__}: {exc}")
        return index, rec
    except Exception:  # record and keep the sweep going
        rec = RunRecord(math.nan, math.nan, config_hash(text), str(run_dir), error=traceback.format_exc())
        return index, rec


def analyse_run_dir(run_dir, profile=None, speed=None, flow_check=True, base_dir=None):
    """Rebuild the BoundReport of one run directory from its files."""
    run_dir = Path(run_dir)
    cfg = parse_config((run_dir / "config.txt").read_text(), base_dir)
    series = output.read_series(run_dir / "series.csv")
    snaps = output.read_snapshots(run_dir / "snapshots")
    meta = {}
    if (run_dir / "run.json").exists():
        import json

        meta = json.loads((run_dir / "run.json").read_text())
    profile = laminar_front(cfg.reaction) if profile is None else profile
    g = cfg.grid
    report = dg.BoundReport()

    worst = None
    for k, s in enumerate(snaps):
        th = ScalarField(g, s.theta, "neumann-walls", (1.0, 0.0))
        rec = dg.lemma_h_check(th, cfg.gravity, name=f"lemma_h[{k}]")
        if worst is None or (rec.lhs - rec.rhs) > (worst.lhs - worst.rhs):
            worst = rec
        if not rec.passed:
            report.add(rec)
    worst = replace(worst, name="lemma_h(all snapshots)",
                    passed=all(r.passed for r in report.records) and worst.passed)
    report.add(worst)

    div = max(float(series["div_max"].max()), float(meta.get("max_div", 0.0)))
    report.add(dg.CheckRecord("divergence_max", lhs=div, rhs=DIV_LIMIT, explicit=True,
                              passed=bool(div <= DIV_LIMIT)))
    lo = float(meta.get("theta_min", min(s.theta.min() for s in snaps)))
    hi = float(meta.get("theta_max", max(s.theta.max() for s in snaps)))
    over = max(-lo, hi - 1.0, 0.0)
    report.add(dg.CheckRecord("max_principle_overshoot", lhs=over, rhs=OVERSHOOT, explicit=True,
                              passed=bool(over <= OVERSHOOT)))

    if flow_check and cfg.gravity.rho > 0:
        th = ScalarField(g, snaps[-1].theta, "neumann-walls", (1.0, 0.0))
        st = solve_stationary_stokes(th, cfg.gravity, cfg.nu)
        report.add(dg.CheckRecord(**gradient_bound_check(st, th, cfg.gravity)))

    report.extend(dg.lemma31_check(series, profile.c0, cfg.t_min, reference_speed=speed))
    try:
        report.extend(dg.sandwich_check(snaps, series, profile, g, cfg.x_center, speed=speed,
                                        t_min=cfg.t_min))
    except SandwichInfeasible as exc:
        report.add(dg.CheckRecord("sandwich_feasible", lhs=1.0, rhs=0.0, explicit=True,
                                  passed=False, details={"error": str(exc)}))
    return report


@dataclass
class SweepResult:
    records: list
    rows: list
    report: dg.BoundReport
    c0: float
    refined_rows: list = None


def _run_all(spec, tasks):
    results = [None] * len(tasks)
    if spec.parallel == 1 or len(tasks) == 1:
        for t in tasks:
            i, rec = _worker(t)
            results[i] = rec
    else:
        with ProcessPoolExecutor(max_workers=spec.parallel) as pool:
            for i, rec in pool.map(_worker, tasks):
                results[i] = rec
    return results


def _summarise(records, out_dir, c0, base_dir, profile, flow_check):
    """Per-run reports (with a resolution-matched laminar speed) and summary rows."""
    base_speed = {r.nu: r.final["speed"] for r in records if r.error is None and r.rho == 0.0}
    rows = []
    for r in records:
        if r.error is not None:
            continue
        speed = base_speed.get(r.nu)
        try:
            rep = analyse_run_dir(r.run_dir, profile, speed, flow_check, base_dir)
        except FrontChannelError as exc:
            r.error = f"analysis: {type(exc).__name__}: {exc}"
            log.warning("%s analysis failed: %s", Path(r.run_dir).name, exc)
            continue
        r.report_path = str(output.write_json(Path(r.run_dir) / "report.json", rep.to_dict()))
        rows.append({"rho": r.rho, "nu": r.nu, **r.final, "run_passed": rep.passed})
    output.write_csv(
        Path(out_dir) / "summary.csv",
        ["rho", "nu", "Bbar", "Nbar", "Ubar", "abs_Bbar_minus_c0", "speed", "config_hash"],
        [(r.rho, r.nu, r.final["Bbar"], r.final["Nbar"], r.final["Ubar"],
          abs(r.final["Bbar"] - c0), r.final["speed"], r.config_hash)
         for r in records if r.error is None],
    )
    return rows


def run_sweep(spec, refine=False, flow_check=True):
    """Execute every (rho, nu) run, then analyse them in a fixed order."""
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    base_cfg = parse_config(spec.base_text, spec.base_dir, spec.seed)
    profile = laminar_front(base_cfg.reaction)
    c0 = profile.c0

    levels = [("", {})]
    if refine:
        levels.append(("refined", {"grid.nx": str(2 * base_cfg.nx), "grid.ny": str(2 * base_cfg.ny)}))
    all_records, level_rows = [], []
    for sub, overrides in levels:
        lvl_spec = replace(spec, overrides={**spec.overrides, **overrides})
        lvl_dir = out / sub if sub else out
        tasks = []
        for i, (rho, nu, text) in enumerate(lvl_spec.run_texts()):
            run_dir = lvl_dir / f"run_rho{rho:g}_nu{nu:g}"
            tasks.append((i, text, str(run_dir), spec.seed, spec.base_dir))
        records = _run_all(spec, tasks)
        for rec, (_, _, run_dir, _, _) in zip(records, tasks):
            if rec.error:
                log.warning("%s failed: %s", Path(run_dir).relative_to(out), rec.error.splitlines()[-1])
            else:
                log.info("%s finished in %.1f s", Path(run_dir).relative_to(out), rec.duration)
        rows = _summarise(records, lvl_dir, c0, spec.base_dir, profile, flow_check)
        all_records.extend(records)
        level_rows.append(rows)

    report = dg.theorem_main_check(level_rows[0], c0,
                                   refined_rows=level_rows[1] if refine else None)
    for r in all_records:
        if r.error is not None:
            report.add(dg.CheckRecord(f"run_error({Path(r.run_dir).name})", lhs=1.0, rhs=0.0,
                                      explicit=True, passed=False, details={"error": r.error}))
    for rows, (sub, _) in zip(level_rows, levels):
        for row in rows:
            if not row["run_passed"]:
                report.add(dg.CheckRecord(f"run_checks({sub or 'base'}, rho={row['rho']:g}, nu={row['nu']:g})",
                                          lhs=1.0, rhs=0.0, explicit=True, passed=False))
    output.write_json(out / "sweep_report.json", report.to_dict())
    (out / "sweep_report.txt").write_text(report.table())
    output.plot_sweep(level_rows[0], c0, out)
    return SweepResult(all_records, level_rows[0], report, c0,
                       level_rows[1] if refine else None)


def make_spec(text, out_dir, parallel=1, seed=0, base_dir=None):
    return SweepSpec.from_text(text, parallel=parallel, out_dir=str(out_dir), seed=seed,
                               base_dir=base_dir)
