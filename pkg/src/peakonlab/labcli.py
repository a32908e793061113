"""Experiment definition, execution and reproducible output.

A run is described by one JSON config file; its SHA-256 prefix becomes the
run id, and re-running an identical config reproduces every CSV byte for
byte.  Subcommands: simulate, peakons, predict, diagnose, sweep.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import diagnostics as diag
from .chsolver import RunResult, SolverConfig, simulate
from .field import (FieldState, init_from_measure, invariants,
                    misplaced_sign_mass, write_state_csv)
from .grid import GridFunction, SpatialGrid, h1_norm
from .multipeakon import (CollisionImminent, PeakonEnsemble, Trajectory,
                          ensemble_atoms, integrate_ensemble, predict_speeds)

ETA_BUDGET = 2.0 ** -10
EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_GUARD = 3


class ConfigError(ValueError):
    """Invalid experiment configuration (reported before any compute)."""


SCENARIOS = ("single_peakon", "perturbed_peakon", "well_ordered_train",
             "not_well_ordered_train", "custom_measure")


@dataclass
class ExperimentConfig:
    scenario: str
    grid: Optional[SpatialGrid]
    solver: SolverConfig
    mode: str = "grid"                     # grid | particle | both
    c: float = 1.0
    x_start: float = 0.0
    ensemble: Optional[dict] = None        # {"p": [...], "q": [...]}
    perturbation: Optional[dict] = None
    theta: float = 0.5
    sign_split_x0: Optional[float] = None
    particle_dt: float = 0.005
    particle_stride: int = 10
    diagnostics: list = dc_field(default_factory=list)
    seed: int = 0
    raw: dict = dc_field(default_factory=dict)

    @staticmethod
    def from_dict(d: dict) -> "ExperimentConfig":
        d = dict(d)
        scenario = d.get("scenario")
        if scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}, got {scenario!r}")
        mode = d.get("mode", "grid")
        if mode not in ("grid", "particle", "both"):
            raise ConfigError(f"mode must be grid|particle|both, got {mode!r}")
        g = d.get("grid")
        grid = None
        if g is not None:
            if "h" in g:
                grid = SpatialGrid.regular(g["x_min"], g["x_max"], g["h"])
            else:
                grid = SpatialGrid(g["x_min"], g["x_max"], g["n_nodes"])
        elif mode != "particle":
            raise ConfigError("grid section required unless mode='particle'")
        s = d.get("solver", {})
        solver = SolverConfig(
            cfl=s.get("cfl", 0.3),
            t_end=s.get("t_end", 10.0),
            output_stride=s.get("output_stride", 10),
            mollification_n=s.get("mollification_n", 64),
            derivative_scheme=s.get("derivative_scheme", "central"),
        )
        return ExperimentConfig(
            scenario=scenario, grid=grid, solver=solver, mode=mode,
            c=d.get("c", 1.0), x_start=d.get("x_start", 0.0),
            ensemble=d.get("ensemble"), perturbation=d.get("perturbation"),
            theta=d.get("theta", 0.5),
            sign_split_x0=d.get("sign_split_x0"),
            particle_dt=d.get("particle_dt", 0.005),
            particle_stride=d.get("particle_stride", 10),
            diagnostics=d.get("diagnostics", []),
            seed=d.get("seed", 0), raw=d)


def config_hash(d: dict) -> str:
    blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


# -----------------------------------------------------------------------
# scenario -> atoms / ensemble
# -----------------------------------------------------------------------


def _build_ensemble(cfg: ExperimentConfig) -> Optional[PeakonEnsemble]:
    if cfg.scenario in ("single_peakon", "perturbed_peakon"):
        return PeakonEnsemble(np.array([cfg.c]), np.array([cfg.x_start]))
    if cfg.ensemble is None:
        if cfg.scenario == "custom_measure":
            return None
        raise ConfigError(f"scenario {cfg.scenario} requires an ensemble")
    p = np.asarray(cfg.ensemble["p"], dtype=float)
    q = np.asarray(cfg.ensemble["q"], dtype=float)
    try:
        ens = PeakonEnsemble(p, q)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.scenario == "custom_measure":
        return ens  # exploratory: may sit outside the sign split (guards fire)
    if not ens.is_well_ordered():
        raise ConfigError(
            "sign split violated: a negative amplitude sits right of a "
            "positive one")
    if cfg.scenario == "well_ordered_train" and np.any(np.diff(p) <= 0):
        raise ConfigError(
            "well_ordered_train requires amplitudes increasing left to right "
            f"(no overtaking); got {p.tolist()}")
    return ens


def _perturbation_atoms(cfg: ExperimentConfig) -> list[tuple[float, float]]:
    """Momentum-space perturbation atoms with a declared side."""
    pert = cfg.perturbation
    if pert is None:
        return []
    shape = pert.get("shape", "atom")
    if shape == "atom":
        return [(float(pert["mass"]), float(pert["location"]))]
    if shape == "atoms":
        return [(float(m), float(a)) for m, a in pert["atoms"]]
    if shape in ("gaussian", "one_sided_exp"):
        return []  # handled as a smooth y part
    raise ConfigError(f"unknown perturbation shape {shape!r}")


def _perturbation_smooth(cfg: ExperimentConfig) -> Optional[GridFunction]:
    pert = cfg.perturbation
    if pert is None or cfg.grid is None:
        return None
    shape = pert.get("shape", "atom")
    if shape not in ("gaussian", "one_sided_exp"):
        return None
    side = pert.get("side", "right")
    dist = float(pert.get("distance", 6.0))
    width = float(pert.get("width", 1.0))
    center = cfg.x_start + (dist if side == "right" else -dist)
    sgn = +1.0 if side == "right" else -1.0
    x = cfg.grid.x
    if shape == "gaussian":
        prof = np.exp(-0.5 * ((x - center) / width) ** 2)
    else:
        arg = sgn * (x - center)
        prof = np.where(arg >= 0, np.exp(-np.maximum(arg, 0.0) / width), 0.0)
    # scale the induced velocity bump to the requested H1 size
    y_gf = GridFunction(cfg.grid, sgn * prof)
    target = float(pert.get("h1_size", 0.01))
    u_pert = _u_of_smooth_y(y_gf)
    ux = np.gradient(u_pert, cfg.grid.h, edge_order=2)
    size = h1_norm(u_pert, ux, cfg.grid.h)
    return GridFunction(cfg.grid, y_gf.values * (target / size))


def _u_of_smooth_y(y: GridFunction) -> np.ndarray:
    from .kernels import exp_convolve
    return exp_convolve(y).values


def build_initial_state(cfg: ExperimentConfig) -> FieldState:
    if cfg.grid is None:
        raise ConfigError("grid required for field construction")
    if cfg.scenario == "custom_measure":
        ens = _build_ensemble(cfg)
        atoms = (ensemble_atoms(ens) if ens is not None
                 else [(float(m), float(a)) for m, a in cfg.raw.get("atoms", [])])
    else:
        ens = _build_ensemble(cfg)
        atoms = ensemble_atoms(ens)
    atoms = sorted(atoms + _perturbation_atoms(cfg), key=lambda t: t[1])
    x0 = cfg.sign_split_x0
    if x0 is None:
        x0 = _auto_split_point(atoms)
    try:
        return init_from_measure(
            atoms, cfg.grid, n=cfg.solver.mollification_n,
            smooth_part=_perturbation_smooth(cfg), sign_split_x0=x0)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _auto_split_point(atoms) -> Optional[float]:
    neg = [a for m, a in atoms if m < 0]
    pos = [a for m, a in atoms if m > 0]
    if not neg:
        return min(pos) - 1.0 if pos else None
    if not pos:
        return max(neg) + 1.0
    if max(neg) >= min(pos):
        return None  # not sign-split; leave marker unset
    return 0.5 * (max(neg) + min(pos))


def validate_padding(cfg: ExperimentConfig) -> None:
    if cfg.grid is None or cfg.mode == "particle":
        return
    ens = _build_ensemble(cfg)
    if ens is None:
        return
    vmax = 1.2 * float(np.max(np.abs(ens.p))) + 0.1
    t_end = cfg.solver.t_end
    margin = 10.0
    right_need = float(np.max(ens.q)) + vmax * t_end + margin
    left_need = float(np.min(ens.q)) - vmax * t_end - margin
    if right_need > cfg.grid.x_max or left_need < cfg.grid.x_min:
        raise ConfigError(
            f"grid [{cfg.grid.x_min}, {cfg.grid.x_max}] cannot contain the "
            f"run: needs [{left_need:g}, {right_need:g}] "
            f"(max speed {vmax:g} x t_end {t_end:g} + margin)")


# -----------------------------------------------------------------------
# run execution
# -----------------------------------------------------------------------


@dataclass
class RunRecord:
    run_id: str
    out_dir: Path
    summary: dict
    failed: bool = False

    @property
    def outputs(self) -> dict:
        return self.summary.get("outputs", {})


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def output_root() -> Path:
    return Path(os.environ.get("PEAKONLAB_OUT", "runs"))


def _fit_speed(times: np.ndarray, pos: np.ndarray) -> float:
    """Least-squares slope over the second half of the samples."""
    m = times >= 0.5 * (times[0] + times[-1])
    if np.count_nonzero(m) < 2:
        return float("nan")
    A = np.vstack([times[m], np.ones(np.count_nonzero(m))]).T
    return float(np.linalg.lstsq(A, pos[m], rcond=None)[0][0])


def run(config: dict, out_root: Optional[Path] = None) -> RunRecord:
    """Validate, execute and persist one experiment.

    All validation (config shape, ordering, padding, initial data) happens
    before anything is written; a ConfigError leaves no outputs behind.
    """
    cfg = ExperimentConfig.from_dict(config)
    run_id = config_hash(config)
    validate_padding(cfg)
    ens = _build_ensemble(cfg)
    if cfg.mode in ("particle", "both") and ens is None:
        raise ConfigError("particle mode needs an ensemble scenario")
    state0 = build_initial_state(cfg) if cfg.mode in ("grid", "both") else None

    out_dir = (out_root or output_root()) / run_id
    out_dir.mkdir(parents=True, exist_ok=True)
    _atomic_write(out_dir / "config.json",
                  json.dumps(config, indent=2, sort_keys=True) + "\n")

    t_wall = time.perf_counter()
    summary: dict[str, Any] = {"run_id": run_id, "scenario": cfg.scenario,
                               "mode": cfg.mode, "guards": [], "outputs": {}}
    failed = False

    traj: Optional[Trajectory] = None
    if cfg.mode in ("particle", "both"):
        try:
            traj = integrate_ensemble(ens, cfg.solver.t_end, cfg.particle_dt,
                                      cfg.particle_stride)
            H = traj.hamiltonians()
            summary["particle"] = {
                "H0": H[0],
                "H_drift_rel": float(np.max(np.abs(H - H[0]))
                                     / max(abs(H[0]), 1e-300)),
                "final_q": traj.q[-1].tolist(),
                "final_speeds": _terminal_speeds(traj),
            }
            path = out_dir / "trajectory.csv"
            buf = io.StringIO()
            traj.write_csv(buf)
            _atomic_write(path, buf.getvalue())
            summary["outputs"]["trajectory"] = path.name
        except CollisionImminent as exc:
            summary["guards"].append(f"CollisionImminent: {exc}")
            failed = True

    result: Optional[RunResult] = None
    if state0 is not None and not failed:
        summary["perturbation_budget"] = _budget_report(cfg, state0)
        result = simulate(state0, cfg.solver, gronwall_guard=True)
        summary["guards"].extend(result.guard_events)
        failed = failed or bool(result.guard_events)
        summary["grid"] = _grid_summary(cfg, result, traj)
        buf = io.StringIO()
        for s in result.snapshots:
            write_state_csv(s, buf, cfg.solver.mollification_n)
        path = out_dir / "snapshots.csv"
        _atomic_write(path, buf.getvalue())
        summary["outputs"]["snapshots"] = path.name

    if result is not None and cfg.diagnostics:
        dpath = out_dir / "diagnostics.csv"
        rate_fits = _run_diagnostics(cfg, run_id, result, dpath)
        summary["outputs"]["diagnostics"] = dpath.name
        if rate_fits:
            summary["rate_fits"] = rate_fits

    summary["wall_clock_s"] = time.perf_counter() - t_wall
    summary["failed"] = failed
    _atomic_write(out_dir / "summary.json",
                  json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return RunRecord(run_id, out_dir, summary, failed)


def _terminal_speeds(traj: Trajectory) -> list[float]:
    from .multipeakon import ensemble_rhs
    e = PeakonEnsemble(traj.p[-1], traj.q[-1], float(traj.times[-1]))
    _, dq = ensemble_rhs(e)
    return [float(v) for v in dq]


def _budget_report(cfg: ExperimentConfig, state0: FieldState) -> dict:
    """Perturbation size against the smallness budget eta (theta/c)^8."""
    budget = ETA_BUDGET * (cfg.theta / max(cfg.c, 1e-300)) ** 8
    rep = {"eta": ETA_BUDGET, "theta": cfg.theta, "budget_h1": budget}
    if cfg.perturbation is not None and cfg.grid is not None:
        base_cfg = ExperimentConfig.from_dict(
            {**cfg.raw, "perturbation": None})
        base = build_initial_state(base_cfg)
        d = state0.u.values - base.u.values
        dx = np.gradient(d, cfg.grid.h, edge_order=2)
        size = h1_norm(d, dx, cfg.grid.h)
        rep["h1_size"] = size
        rep["ratio_to_budget"] = size / budget
    return rep


def _grid_summary(cfg: ExperimentConfig, result: RunResult,
                  traj: Optional[Trajectory]) -> dict:
    snaps = result.snapshots
    times = result.times
    inv = [invariants(s) for s in snaps]
    E = np.array([v.E for v in inv])
    M = np.array([v.M for v in inv])
    F = np.array([v.F for v in inv])
    out: dict[str, Any] = {
        "steps": result.steps,
        "t_final": snaps[-1].t,
        "E0": E[0], "M0": M[0], "F0": F[0],
        "E_drift_rel": float(np.max(np.abs(E - E[0])) / max(abs(E[0]), 1e-300)),
        "M_drift_rel": float(np.max(np.abs(M - M[0])) / max(abs(M[0]), 1e-300)),
        "F_drift_rel": float(np.max(np.abs(F - F[0])) / max(abs(F[0]), 1e-300)),
        "misplaced_sign_mass_max": float(max(
            misplaced_sign_mass(s) for s in snaps)),
        "misplaced_sign_mass_weak_max": float(max(
            misplaced_sign_mass(s, audit_n=1) for s in snaps)),
    }
    crests = _crest_tracks(cfg, snaps, traj)
    if crests:
        out["crests"] = {}
        for name, series in crests.items():
            out["crests"][name] = {
                "final": series[-1],
                "speed": _fit_speed(times, np.array(series)),
            }
    if traj is not None:
        disc = []
        for k, t in enumerate(times):
            j = int(np.argmin(np.abs(traj.times - t)))
            for i in range(traj.q.shape[1]):
                series = crests.get(f"crest_{i+1}")
                if series is not None:
                    disc.append(abs(series[k] - traj.q[j, i]))
        if disc:
            out["particle_grid_max_discrepancy"] = float(max(disc))
    return out


def _crest_tracks(cfg: ExperimentConfig, snaps: list[FieldState],
                  traj: Optional[Trajectory]) -> dict[str, list[float]]:
    tracks: dict[str, list[float]] = {}
    if traj is not None:
        npart = traj.q.shape[1]
        for i in range(npart):
            tracks[f"crest_{i+1}"] = []
        for s in snaps:
            j = int(np.argmin(np.abs(traj.times - s.t)))
            for i in range(npart):
                qi = traj.q[j, i]
                gaps = [abs(qi - traj.q[j, k]) for k in range(npart) if k != i]
                w = min(min(gaps) / 2.0 if gaps else 5.0, 5.0)
                w = max(w, 1.0)
                tracks[f"crest_{i+1}"].append(diag.crest_position(
                    s.u, negative=traj.p[j, i] < 0, window=(qi - w, qi + w)))
    else:
        tracks["crest_1"] = [diag.crest_position(s.u) for s in snaps]
    return tracks


def _run_diagnostics(cfg: ExperimentConfig, run_id: str, result: RunResult,
                     path: Path) -> dict:
    """Evaluate requested functionals; long-format CSV + rate-fit summary."""
    snaps = result.snapshots
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["run_id", "functional", "params", "t", "value"])
    rate_fits: dict[str, Any] = {}

    def emit(name: str, params: dict, times, values):
        blob = json.dumps(params, sort_keys=True, separators=(",", ":"))
        for t, v in zip(times, values):
            writer.writerow([run_id, name, blob, f"{t:.17g}", f"{v:.17g}"])

    for spec in cfg.diagnostics:
        kind = spec.get("kind")
        if kind == "lambda_z":
            for z in np.atleast_1d(spec.get("z", [0.0])):
                series = diag.lambda_z_series(snaps, spec.get("theta", cfg.theta),
                                              float(z))
                emit("lambda_z", {"theta": series.params["theta"], "z": float(z)},
                     series.times, series.values)
                rate_fits[f"lambda_z[z={z:g}]"] = {
                    "max_upward_increment": diag.max_upward_increment(series),
                    "warnings": series.warnings}
        elif kind == "x_gamma":
            for g in np.atleast_1d(spec.get("gamma", [0.5])):
                track = diag.x_gamma_track(snaps, float(g))
                emit("x_gamma", {"gamma": float(g)}, track.times, track.x_gamma)
                rate_fits[f"x_gamma[gamma={g:g}]"] = {
                    "max_decrease": track.max_decrease()}
        elif kind == "left_mass":
            window = spec.get("window", "fixed_point")
            series = diag.left_mass_audit(
                snaps, window, z=spec.get("z", 0.0),
                rate=spec.get("rate", cfg.c / 96.0))
            emit(f"left_mass_{window}", {k: v for k, v in spec.items()
                                         if k != "kind"},
                 series.times, series.values)
            rate_fits[f"left_mass[{window}]"] = {"fitted_rate": series.fitted_rate}
        elif kind == "monotonicity_I":
            track = diag.modulation_track(snaps, c_ref=cfg.c)
            zfun = _z_path_from_track(track, spec.get("alpha", 1.0 / 3.0))
            for R in np.atleast_1d(spec.get("R", [6.0])):
                series = diag.functional_I(
                    snaps, t0=spec.get("t0", snaps[-1].t), R=float(R),
                    gamma=spec.get("gamma", 0.0), sign=spec.get("sign", "+R"),
                    z_path=zfun, track=track,
                    alpha=spec.get("alpha", 1.0 / 3.0),
                    beta=spec.get("beta", 1.0 / 3.0))
                emit("monotonicity_I", {**series.params, "R": float(R)},
                     series.times, series.values)
        elif kind == "modulation":
            track = diag.modulation_track(snaps, c_ref=cfg.c)
            emit("x_mod", {}, [m.t for m in track], [m.x_mod for m in track])
            emit("lambda", {}, [m.t for m in track], [m.lam for m in track])
            rate_fits["modulation"] = {
                "max_residual": max(m.residual for m in track),
                "xdot_final": track[-1].xdot_est}
        else:
            raise ConfigError(f"unknown diagnostic kind {kind!r}")

    _atomic_write(path, buf.getvalue())
    return rate_fits


def _z_path_from_track(track, alpha: float):
    times = np.array([m.t for m in track])
    xs = np.array([m.x_mod for m in track])

    def z(t: float) -> float:
        return (1.0 - alpha) * float(np.interp(t, times, xs))

    return z


# -----------------------------------------------------------------------
# predict and sweep
# -----------------------------------------------------------------------


def predict(ensemble: dict) -> dict:
    ens = PeakonEnsemble(np.asarray(ensemble["p"], float),
                         np.asarray(ensemble["q"], float))
    return predict_speeds(ens).as_dict()


def _sweep_one(args: tuple) -> tuple[str, bool, str]:
    config, out_root = args
    try:
        rec = run(config, Path(out_root))
        return rec.run_id, rec.failed, ""
    except Exception as exc:  # isolated: a failed run must not kill siblings
        return config_hash(config), True, f"{type(exc).__name__}: {exc}"


def sweep(template: dict, axes: list[dict], out_root: Optional[Path] = None,
          cap: int = 64, parallel: bool = True) -> list[dict]:
    """Cartesian sweep over parameter axes: [{"path": "solver.cfl", "values": [...]}]."""
    configs = [json.loads(json.dumps(template))]
    for axis in axes:
        path, values = axis["path"], axis["values"]
        configs = [_with_value(c, path, v) for c in configs for v in values]
    if len(configs) > cap:
        raise ConfigError(f"sweep of {len(configs)} runs exceeds cap {cap}")
    master_seed = template.get("seed", 0)
    for i, c in enumerate(configs):
        c["seed"] = master_seed + i
    root = out_root or output_root()
    results = []
    if parallel and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=min(len(configs), os.cpu_count() or 1)) as ex:
            for (rid, failed, err), c in zip(
                    ex.map(_sweep_one, [(c, str(root)) for c in configs]), configs):
                results.append({"run_id": rid, "failed": failed, "error": err,
                                "config": c})
    else:
        for c in configs:
            rid, failed, err = _sweep_one((c, str(root)))
            results.append({"run_id": rid, "failed": failed, "error": err,
                            "config": c})
    lines = ["run_id,failed,error"]
    for r in results:
        lines.append(f'{r["run_id"]},{int(r["failed"])},"{r["error"]}"')
    root.mkdir(parents=True, exist_ok=True)
    _atomic_write(root / "sweep_summary.csv", "\n".join(lines) + "\n")
    return results


def _with_value(config: dict, path: str, value) -> dict:
    out = json.loads(json.dumps(config))
    node = out
    keys = path.split(".")
    for k in keys[:-1]:
        node = node.setdefault(k, {})
    node[keys[-1]] = value
    return out


# -----------------------------------------------------------------------
# CLI
# -----------------------------------------------------------------------


def main(argv: Optional[list[str]] = None) -> int:
    ap = argparse.ArgumentParser(prog="peakonlab",
                                 description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    p_sim = sub.add_parser("simulate", help="grid (or grid+particle) run")
    p_sim.add_argument("config", type=Path)
    p_pk = sub.add_parser("peakons", help="particle-only run")
    p_pk.add_argument("config", type=Path)
    p_pred = sub.add_parser("predict", help="asymptotic speed eigenvalues")
    p_pred.add_argument("ensemble", type=Path,
                        help='JSON file {"p": [...], "q": [...]}')
    p_diag = sub.add_parser("diagnose", help="re-run diagnostics on a run")
    p_diag.add_argument("run_id")
    p_diag.add_argument("specs", type=Path, help="JSON list of functional specs")
    p_swp = sub.add_parser("sweep", help="cartesian parameter sweep")
    p_swp.add_argument("template", type=Path)
    p_swp.add_argument("axes", type=Path, help="JSON list of axes")
    p_swp.add_argument("--cap", type=int, default=64)
    p_swp.add_argument("--serial", action="store_true")

    args = ap.parse_args(argv)
    try:
        if args.cmd in ("simulate", "peakons"):
            config = json.loads(args.config.read_text())
            if args.cmd == "peakons":
                config["mode"] = "particle"
            rec = run(config)
            print(json.dumps(rec.summary, indent=2, sort_keys=True))
            return EXIT_GUARD if rec.failed else EXIT_OK
        if args.cmd == "predict":
            ens = json.loads(args.ensemble.read_text())
            res = predict(ens)
            print(json.dumps(res, indent=2))
            out = output_root()
            out.mkdir(parents=True, exist_ok=True)
            _atomic_write(out / "prediction.json", json.dumps(res, indent=2) + "\n")
            return EXIT_OK
        if args.cmd == "diagnose":
            return _cmd_diagnose(args.run_id, args.specs)
        if args.cmd == "sweep":
            template = json.loads(args.template.read_text())
            axes = json.loads(args.axes.read_text())
            results = sweep(template, axes, cap=args.cap,
                            parallel=not args.serial)
            print(json.dumps(results, indent=2, default=str))
            return EXIT_GUARD if any(r["failed"] for r in results) else EXIT_OK
    except ConfigError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (CollisionImminent,) as exc:
        print(f"guard event: {exc}", file=sys.stderr)
        return EXIT_GUARD
    return EXIT_OK


def _cmd_diagnose(run_id: str, specs_path: Path) -> int:
    from .field import read_states_csv
    out_dir = output_root() / run_id
    snap_path = out_dir / "snapshots.csv"
    if not snap_path.exists():
        print(f"validation error: no snapshots for run {run_id}", file=sys.stderr)
        return EXIT_VALIDATION
    with open(snap_path) as fh:
        snaps = read_states_csv(fh)
    specs = json.loads(specs_path.read_text())
    config = json.loads((out_dir / "config.json").read_text())
    cfg = ExperimentConfig.from_dict({**config, "diagnostics": specs})
    result = RunResult(snapshots=snaps, steps=0)
    rate_fits = _run_diagnostics(cfg, run_id, result, out_dir / "diagnostics.csv")
    print(json.dumps(rate_fits, indent=2, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
