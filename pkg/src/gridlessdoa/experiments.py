"""Declarative Monte-Carlo experiment runner.

Experiments are described by flat ``key = value`` config files with dotted
sections (see ``CONFIG_KEYS``).  A run sweeps one axis (SNR, correlation
magnitude, snapshot count, or nothing), fans independent trials out over
workers, and writes deterministic CSV tables plus a metadata JSON with
timing.  Results are keyed by (axis, trial) so the output is invariant to
the degree of parallelism, and all randomness is derived from the base seed
and trial index.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .estimate import DoaEstimate, method1, method2, music_spectrum, root_music
from .geometry import ArrayGeometry, coarray, toeplitz_embed
from .metrics import TrialReport, assign_errors, crb_rmse, empirical_bias, rmse_u, success_rate
from .mlesolve import CompletionPlan, MleConfig, em_gridless, structcov_mle
from .refine import multires_refine
from .sigmodel import SnapshotMatrix, SourceScene, fb_average, scm, simulate

EXPERIMENT_KINDS = (
    "single_snapshot",
    "more_sources",
    "correlation_sweep",
    "snr_sweep",
    "resolution",
    "refine_arbitrary",
    "custom",
)

ESTIMATORS = ("scm-music", "fb-music", "structcovmle", "method1", "method2", "em", "refine")

SWEEP_AXES = ("none", "snr_db", "rho_abs", "snapshots")

CONFIG_KEYS = {
    "experiment.kind": f"one of {', '.join(EXPERIMENT_KINDS)}",
    "experiment.trials": "integer >= 1",
    "experiment.seed": "integer",
    "geometry.positions": "comma-separated sensor positions starting at 0",
    "scene.u": "comma-separated ascending source directions in [-1, 1)",
    "scene.snr_db": "per-source SNR in dB (scalar or one per source)",
    "scene.rho_abs": "correlation magnitude in [0, 1]",
    "scene.rho_phase": "correlation phase in radians",
    "scene.snapshots": "integer >= 1",
    "estimate.k": "number of sources to estimate (defaults to len(scene.u))",
    "estimators": f"comma-separated subset of {', '.join(ESTIMATORS)}",
    "sweep.axis": f"one of {', '.join(SWEEP_AXES)}",
    "sweep.values": "comma-separated axis values (nonempty unless axis=none)",
    "solver.iter": "outer MM iterations (default 20)",
    "solver.lambda": "noise variance fed to the solver (default 1.0)",
    "solver.lambda_m_factor": "latent-sensor noise multiplier (default 1000)",
    "solver.inner_iter": "inner iterations for the EM variant (default 1)",
    "refine.grid_size": "initial uniform grid size (default 150)",
    "refine.g_factor": "per-round resolution factor (default 3)",
    "refine.gamma_thresh": "pruning threshold (default 1e-3)",
    "refine.rounds": "refinement rounds (default 5)",
    "refine.sbl_iters": "SBL iteration cap per run (default 5000)",
    "spectrum.grid": "pseudospectrum grid size (default 600)",
    "output.prefix": "file name prefix for artifacts",
}


class ConfigError(Exception):
    """Invalid experiment configuration; message names the key and constraint."""


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    geometry: ArrayGeometry
    scene_u: tuple[float, ...]
    scene_snr_db: tuple[float, ...]
    rho_abs: float
    rho_phase: float
    snapshots: int
    estimators: tuple[str, ...]
    k: int
    sweep_axis: str
    sweep_values: tuple[float, ...]
    trials: int
    seed: int
    solver_iter: int = 20
    solver_lambda: float = 1.0
    solver_lambda_m_factor: float = 1000.0
    solver_inner_iter: int = 1
    refine_grid_size: int = 150
    refine_g_factor: int = 3
    refine_gamma_thresh: float = 1e-3
    refine_rounds: int = 5
    refine_sbl_iters: int = 5000
    spectrum_grid: int = 600
    out_prefix: str = "experiment"


def _fail(key: str, why: str):
    hint = CONFIG_KEYS.get(key, "")
    raise ConfigError(f"config key '{key}': {why}" + (f" (expected: {hint})" if hint else ""))


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate the flat key = value config format."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = body.split("=", 1)
        raw[key.strip()] = value.strip()

    unknown = set(raw) - set(CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    def need(key: str) -> str:
        if key not in raw:
            _fail(key, "missing")
        return raw[key]

    def floats(key: str) -> tuple[float, ...]:
        try:
            return tuple(float(tok) for tok in need(key).split(",") if tok.strip())
        except ValueError:
            _fail(key, f"could not parse {raw[key]!r} as numbers")

    def one_float(key: str, default: float | None = None) -> float:
        if key not in raw and default is not None:
            return default
        try:
            return float(need(key))
        except ValueError:
            _fail(key, f"could not parse {raw[key]!r} as a number")

    def one_int(key: str, default: int | None = None) -> int:
        if key not in raw and default is not None:
            return default
        try:
            return int(need(key))
        except ValueError:
            _fail(key, f"could not parse {raw[key]!r} as an integer")

    kind = need("experiment.kind")
    if kind not in EXPERIMENT_KINDS:
        _fail("experiment.kind", f"{kind!r} is not a known kind")

    try:
        geometry = ArrayGeometry.parse(need("geometry.positions"))
    except Exception as exc:
        _fail("geometry.positions", str(exc))

    u = floats("scene.u")
    if not u or any(b - a <= 0 for a, b in zip(u, u[1:])):
        _fail("scene.u", "directions must be nonempty and strictly increasing")
    snr = floats("scene.snr_db")
    if len(snr) == 1:
        snr = snr * len(u)
    if len(snr) != len(u):
        _fail("scene.snr_db", "need one SNR per source (or a single shared value)")

    rho_abs = one_float("scene.rho_abs", 0.0)
    if not 0.0 <= rho_abs <= 1.0:
        _fail("scene.rho_abs", f"{rho_abs} outside [0, 1]")

    trials = one_int("experiment.trials")
    if trials < 1:
        _fail("experiment.trials", "must be at least 1")

    snapshots = one_int("scene.snapshots")
    if snapshots < 1:
        _fail("scene.snapshots", "must be at least 1")

    estimators = tuple(tok.strip() for tok in need("estimators").split(",") if tok.strip())
    bad = [e for e in estimators if e not in ESTIMATORS]
    if bad or not estimators:
        _fail("estimators", f"unknown estimators {bad}" if bad else "must be nonempty")

    axis = raw.get("sweep.axis", "none")
    if axis not in SWEEP_AXES:
        _fail("sweep.axis", f"{axis!r} is not a known axis")
    values = floats("sweep.values") if "sweep.values" in raw else tuple()
    if axis == "none":
        values = (math.nan,)
    elif not values:
        _fail("sweep.values", "must be nonempty for a sweeping axis")

    k = one_int("estimate.k", len(u))
    if k < 1:
        _fail("estimate.k", "must be at least 1")

    return ExperimentConfig(
        kind=kind,
        geometry=geometry,
        scene_u=u,
        scene_snr_db=snr,
        rho_abs=rho_abs,
        rho_phase=one_float("scene.rho_phase", 0.0),
        snapshots=snapshots,
        estimators=estimators,
        k=k,
        sweep_axis=axis,
        sweep_values=values,
        trials=trials,
        seed=one_int("experiment.seed"),
        solver_iter=one_int("solver.iter", 20),
        solver_lambda=one_float("solver.lambda", 1.0),
        solver_lambda_m_factor=one_float("solver.lambda_m_factor", 1000.0),
        solver_inner_iter=one_int("solver.inner_iter", 1),
        refine_grid_size=one_int("refine.grid_size", 150),
        refine_g_factor=one_int("refine.g_factor", 3),
        refine_gamma_thresh=one_float("refine.gamma_thresh", 1e-3),
        refine_rounds=one_int("refine.rounds", 5),
        refine_sbl_iters=one_int("refine.sbl_iters", 5000),
        spectrum_grid=one_int("spectrum.grid", 600),
        out_prefix=raw.get("output.prefix", "experiment"),
    )


# -- scene / estimator plumbing -----------------------------------------------


def scene_for_axis(cfg: ExperimentConfig, axis_value: float) -> SourceScene:
    snr = cfg.scene_snr_db
    rho_abs = cfg.rho_abs
    if cfg.sweep_axis == "snr_db":
        snr = tuple(axis_value for _ in cfg.scene_u)
    elif cfg.sweep_axis == "rho_abs":
        rho_abs = axis_value
    rho = rho_abs * np.exp(1j * cfg.rho_phase)
    return SourceScene.from_snr(cfg.scene_u, snr, rho=rho)


def snapshots_for_axis(cfg: ExperimentConfig, axis_value: float) -> int:
    if cfg.sweep_axis == "snapshots":
        return int(axis_value)
    return cfg.snapshots


def _mle_config(cfg: ExperimentConfig, trace: list[float]) -> MleConfig:
    return MleConfig(
        lam=cfg.solver_lambda,
        lam_m=cfg.solver_lambda * cfg.solver_lambda_m_factor,
        outer_iters=cfg.solver_iter,
        inner_iters=cfg.solver_inner_iter,
        callback=lambda _k, _v, cost: trace.append(cost),
    )


def run_estimator(
    name: str, y: SnapshotMatrix, cfg: ExperimentConfig, diagnostics: dict
) -> DoaEstimate:
    """Dispatch one estimator; records solver cost traces in diagnostics."""
    g = cfg.geometry
    k = cfg.k
    if name == "scm-music":
        return root_music(scm(y), k)
    if name == "fb-music":
        return root_music(fb_average(scm(y)), k)
    trace: list[float] = []
    if name == "structcovmle":
        v = structcov_mle(scm(y), g, _mle_config(cfg, trace))
        diagnostics["cost_trace"] = trace
        return root_music(toeplitz_embed(v), k)
    if name == "method1":
        v = structcov_mle(scm(y), g, _mle_config(cfg, trace))
        diagnostics["cost_trace"] = trace
        return method1(v, g, k)
    if name == "method2":
        est = method2(scm(y), g, k, _mle_config(cfg, trace))
        diagnostics["cost_trace"] = trace
        return est
    if name == "em":
        plan = CompletionPlan.from_geometry(g)
        v = em_gridless(y, g, plan, _mle_config(cfg, trace))
        diagnostics["cost_trace"] = trace
        return root_music(toeplitz_embed(v), k)
    if name == "refine":
        rounds: list[dict] = []
        est = multires_refine(
            y,
            g,
            k,
            lam=cfg.solver_lambda,
            grid_size=cfg.refine_grid_size,
            g_factor=cfg.refine_g_factor,
            gamma_thresh=cfg.refine_gamma_thresh,
            rounds=cfg.refine_rounds,
            sbl_iters=cfg.refine_sbl_iters,
            on_round=rounds.append,
        )
        diagnostics["rounds"] = rounds
        return est
    raise ConfigError(f"config key 'estimators': unknown estimator {name!r}")


def _trial_seed_key(axis_index: int, trial: int) -> int:
    return axis_index * 1_000_000 + trial


def run_one_trial(cfg: ExperimentConfig, axis_index: int, trial: int) -> dict:
    """One (axis value, trial) cell: simulate once, run every estimator."""
    axis_value = cfg.sweep_values[axis_index]
    scene = scene_for_axis(cfg, axis_value)
    n_snap = snapshots_for_axis(cfg, axis_value)
    y = simulate(scene, cfg.geometry, n_snap, seed=cfg.seed, trial=_trial_seed_key(axis_index, trial))
    out: dict = {"axis_index": axis_index, "trial": trial, "results": {}}
    for name in cfg.estimators:
        diagnostics: dict = {}
        start = time.perf_counter()
        try:
            est = run_estimator(name, y, cfg, diagnostics)
            errors = assign_errors(est, scene)
            record = {
                "u_hat": est.u.tolist(),
                "errors": errors.tolist(),
                "failed": False,
            }
        except Exception as exc:  # failures are data, not crashes
            record = {"u_hat": [], "errors": [], "failed": True, "message": str(exc)}
        record["runtime_s"] = time.perf_counter() - start
        trace = diagnostics.get("cost_trace")
        if trace:
            record["solver_runs"] = 1
            record["descent_violations"] = int(
                sum(1 for a, b in zip(trace, trace[1:]) if b > a + 1e-9)
            )
        if "rounds" in diagnostics:
            record["rounds"] = diagnostics["rounds"]
        out["results"][name] = record
    return out


def _spectrum_trial(cfg: ExperimentConfig, trial: int) -> dict:
    """Pseudospectra for the single-snapshot style study."""
    scene = scene_for_axis(cfg, cfg.sweep_values[0])
    y = simulate(scene, cfg.geometry, cfg.snapshots, seed=cfg.seed, trial=_trial_seed_key(0, trial))
    grid = np.linspace(-1.0, 1.0, cfg.spectrum_grid, endpoint=False)
    out: dict = {"trial": trial, "spectra": {}}
    r = scm(y)
    for name in cfg.estimators:
        diagnostics: dict = {}
        if name == "scm-music":
            cov = r
        elif name == "fb-music":
            cov = fb_average(r)
        elif name == "structcovmle":
            trace: list[float] = []
            v = structcov_mle(r, cfg.geometry, _mle_config(cfg, trace))
            cov = toeplitz_embed(v)
            diagnostics["cost_trace"] = trace
        else:
            raise ConfigError(
                "config key 'estimators': single_snapshot supports scm-music, fb-music, structcovmle"
            )
        spec = music_spectrum(cov, cfg.k, grid)
        rec: dict = {"spectrum": spec.tolist()}
        if "cost_trace" in diagnostics:
            rec["solver_runs"] = 1
            rec["descent_violations"] = int(
                sum(1 for a, b in zip(diagnostics["cost_trace"], diagnostics["cost_trace"][1:]) if b > a + 1e-9)
            )
        out["spectra"][name] = rec
    return out


# -- output writers ------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return f"{x:.12g}"
    return str(x)


def write_csv(path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def write_svg_lines(path, series: dict[str, tuple[list[float], list[float]]], log_y: bool) -> None:
    """Minimal polyline plot; one series per estimator, optional log10 y."""
    width, height, pad = 640, 420, 50
    pts_all = [(x, y) for xs, ys in series.values() for x, y in zip(xs, ys) if np.isfinite(y)]
    if not pts_all:
        return
    ys = [math.log10(max(y, 1e-12)) if log_y else y for _, y in pts_all]
    xs = [x for x, _ in pts_all]
    x0, x1 = min(xs), max(xs) or 1.0
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    def sx(x):
        return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(y):
        yy = math.log10(max(y, 1e-12)) if log_y else y
        return height - pad - (yy - y0) / (y1 - y0) * (height - 2 * pad)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height-pad}" x2="{width-pad}" y2="{height-pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height-pad}" stroke="black"/>',
    ]
    for i, (name, (xs_i, ys_i)) in enumerate(sorted(series.items())):
        pts = " ".join(
            f"{sx(x):.1f},{sy(y):.1f}" for x, y in zip(xs_i, ys_i) if np.isfinite(y)
        )
        color = colors[i % len(colors)]
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        parts.append(
            f'<text x="{width-pad+4}" y="{pad+14*i+10}" font-size="11" fill="{color}">{name}</text>'
        )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts))


# -- the runner ------------------------------------------------------------


def _run_cells(cfg: ExperimentConfig, jobs: int) -> list[dict]:
    cells = [(a, t) for a in range(len(cfg.sweep_values)) for t in range(cfg.trials)]
    if jobs <= 1:
        return [run_one_trial(cfg, a, t) for a, t in cells]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(run_one_trial, cfg, a, t) for a, t in cells]
        results = [f.result() for f in futures]
    results.sort(key=lambda r: (r["axis_index"], r["trial"]))
    return results


def run_experiment(cfg: ExperimentConfig, out_dir, jobs: int = 1, svg: bool = False) -> dict:
    """Run the experiment, write artifacts, and return the summary.

    Artifacts: ``<prefix>_summary.csv`` (axis, estimator, rmse, per-source
    bias, crb, trials), ``<prefix>_trials.csv`` (per-trial directions and
    errors), ``<prefix>_meta.json`` (timing and solver diagnostics; kept out
    of the CSVs so re-runs are byte-identical), spectra/rounds CSVs for the
    kinds that produce them, and an optional SVG plot.
    """
    import os

    os.makedirs(out_dir, exist_ok=True)
    prefix = os.path.join(out_dir, cfg.out_prefix)
    started = time.time()

    if cfg.kind == "single_snapshot":
        return _run_spectrum_experiment(cfg, prefix, started)

    results = _run_cells(cfg, jobs)

    summary_rows: list[list] = []
    trial_rows: list[list] = []
    meta_cells: dict[str, dict] = {}
    series: dict[str, tuple[list[float], list[float]]] = {}
    solver_runs = 0
    descent_violations = 0
    for a, axis_value in enumerate(cfg.sweep_values):
        scene = scene_for_axis(cfg, axis_value)
        n_snap = snapshots_for_axis(cfg, axis_value)
        try:
            crb = crb_rmse(scene, cfg.geometry, n_snap) if cfg.k == scene.k else math.nan
        except Exception:
            crb = math.nan
        cell_results = [r for r in results if r["axis_index"] == a]
        for name in cfg.estimators:
            recs = [r["results"][name] for r in cell_results]
            good = [
                DoaEstimate(u=np.asarray(rec["u_hat"]))
                for rec in recs
                if not rec["failed"] and len(rec["u_hat"]) == scene.k
            ]
            rmse = rmse_u(good, scene) if good else math.nan
            biases = (
                [empirical_bias(good, scene, kk) for kk in range(scene.k)]
                if good
                else [math.nan] * scene.k
            )
            hit = success_rate(good, scene) if good else math.nan
            summary_rows.append(
                [axis_value, name, rmse] + biases + [crb, len(good), hit]
            )
            solver_runs += sum(rec.get("solver_runs", 0) for rec in recs)
            descent_violations += sum(rec.get("descent_violations", 0) for rec in recs)
            meta_cells[f"{axis_value}/{name}"] = {
                "wallclock_ms": 1e3 * float(np.sum([rec["runtime_s"] for rec in recs])),
                "failures": int(sum(rec["failed"] for rec in recs)),
            }
            xs, ys = series.setdefault(name, ([], []))
            xs.append(axis_value)
            ys.append(rmse)
            for rec, cell in zip(recs, cell_results):
                report = TrialReport(
                    trial=cell["trial"],
                    seed=cfg.seed,
                    estimator=name,
                    u_hat=tuple(rec["u_hat"]),
                    errors=tuple(rec["errors"]),
                    runtime_s=rec["runtime_s"],
                    diagnostics={"failed": rec["failed"]},
                )
                trial_rows.append(
                    [
                        axis_value,
                        report.estimator,
                        report.trial,
                        "ok" if not rec["failed"] else "failed",
                        ";".join(_fmt(x) for x in report.u_hat),
                        ";".join(_fmt(x) for x in report.errors),
                    ]
                )

    bias_cols = [f"bias_{kk}" for kk in range(len(cfg.scene_u))]
    write_csv(
        f"{prefix}_summary.csv",
        ["axis", "estimator", "rmse"] + bias_cols + ["crb", "trials", "success_rate"],
        summary_rows,
    )
    write_csv(
        f"{prefix}_trials.csv",
        ["axis", "estimator", "trial", "status", "u_hat", "errors"],
        trial_rows,
    )
    if cfg.kind == "refine_arbitrary":
        _write_round_table(cfg, results, prefix)
    meta = {
        "kind": cfg.kind,
        "seed": cfg.seed,
        "started_unix": started,
        "elapsed_s": time.time() - started,
        "solver_runs": solver_runs,
        "descent_violations": descent_violations,
        "cells": meta_cells,
    }
    with open(f"{prefix}_meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    if svg:
        write_svg_lines(f"{prefix}.svg", series, log_y=True)
    return meta


def _write_round_table(cfg: ExperimentConfig, results: list[dict], prefix: str) -> None:
    """Per-round average RMSE and grid size for the refinement study."""
    rows = []
    truth = np.asarray(cfg.scene_u)
    n_rounds = cfg.refine_rounds + 1
    for rnd in range(n_rounds):
        errs = []
        sizes = []
        costs = []
        for cell in results:
            rec = cell["results"].get("refine")
            if rec is None or rec["failed"] or len(rec.get("rounds", [])) <= rnd:
                continue
            info = rec["rounds"][rnd]
            u_hat = np.sort(np.asarray(info["u_hat"]))
            if u_hat.size == truth.size:
                errs.append(np.mean((u_hat - truth) ** 2))
            sizes.append(info["grid_size"])
            costs.append(info["sbl_cost"])
        rows.append(
            [
                rnd,
                math.sqrt(np.mean(errs)) if errs else math.nan,
                float(np.mean(sizes)) if sizes else math.nan,
                float(np.mean(costs)) if costs else math.nan,
            ]
        )
    write_csv(f"{prefix}_rounds.csv", ["round", "rmse", "mean_grid_size", "mean_sbl_cost"], rows)


def _run_spectrum_experiment(cfg: ExperimentConfig, prefix: str, started: float) -> dict:
    grid = np.linspace(-1.0, 1.0, cfg.spectrum_grid, endpoint=False)
    trials = [_spectrum_trial(cfg, t) for t in range(cfg.trials)]
    solver_runs = 0
    descent_violations = 0
    for name in cfg.estimators:
        rows = []
        for i, u in enumerate(grid):
            rows.append([u] + [tr["spectra"][name]["spectrum"][i] for tr in trials])
        write_csv(
            f"{prefix}_{name.replace('-', '_')}_spectrum.csv",
            ["u"] + [f"trial_{t}" for t in range(cfg.trials)],
            rows,
        )
        solver_runs += sum(tr["spectra"][name].get("solver_runs", 0) for tr in trials)
        descent_violations += sum(
            tr["spectra"][name].get("descent_violations", 0) for tr in trials
        )
    meta = {
        "kind": cfg.kind,
        "seed": cfg.seed,
        "started_unix": started,
        "elapsed_s": time.time() - started,
        "solver_runs": solver_runs,
        "descent_violations": descent_violations,
    }
    with open(f"{prefix}_meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    return meta


def describe_geometry(g: ArrayGeometry) -> str:
    """Human-readable coarray report for a geometry."""
    lines = [f"positions: {', '.join(_fmt(p) for p in g.positions)}", f"sensors: {g.m}"]
    if g.on_grid:
        lag = coarray(g)
        lines += [
            f"aperture: {lag.aperture}",
            f"nonnegative lags: {', '.join(map(str, lag.nonneg))}",
            f"holes: {', '.join(map(str, lag.holes)) if lag.holes else '(none)'}",
            f"contiguous run from 0: {lag.contiguous}",
        ]
        from .geometry import nested_completion

        missing = nested_completion(g)
        lines.append(
            "hole-free completion adds: " + (", ".join(map(str, missing)) if missing else "(nothing)")
        )
    else:
        lines.append("off-grid geometry: no integer coarray (use the refine estimator)")
    return "\n".join(lines)
