"""Command-line interface.

Subcommands
-----------
simulate-oup   Monte Carlo ensemble tracking an Ornstein-Uhlenbeck field.
simulate-mcg   ensemble tracking the noisy cardiac-like (VdP) waveform.
bound          tabulate the quantum error bounds over time / atom number.
presets        list the built-in scenario presets.

Each simulation run writes four files into --out: an ensemble CSV, a
sample-trajectory CSV (trajectory 0), a JSON summary with headline
statistics, and a JSON manifest echoing the fully resolved configuration
(the echo re-parses to the identical scenario).  Exit codes: 0 success,
2 configuration error, 3 runtime/divergence error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from dataclasses import replace

import numpy as np

from . import __version__, analysis, backend as bk, presets
from .bounds import BoundQuery, cs_bound_amse, cs_bound_finite_prior, effective_dephasing, sql_bound
from .config import ConfigError, load_scenario, scenario_from_dict, scenario_to_dict
from .experiment import EnsembleError, ScenarioConfig, run_ensemble, run_trajectory

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

ENSEMBLE_COLUMNS = (
    "t_s",
    "amse_rad2_s2",
    "sqrt_amse",
    "ekf_var_mean",
    "squeezing_mean_db",
    "bound_rad2_s2",
    "squeezing_est_mean_db",
    "amse_stderr_rad2_s2",
)
MCG_ENSEMBLE_EXTRA = ("omega_clean_rad_s", "omega_clean_pt")
TRAJECTORY_COLUMNS = (
    "t_s",
    "omega_true_rad_s",
    "omega_est_rad_s",
    "u_rad_s",
    "y_increment",
    "squeezing_db",
    "sigma_omega_rad2_s2",
)
MCG_TRAJECTORY_EXTRA = ("omega_noisy_rad_s", "omega_true_pt", "omega_est_pt")
BOUND_COLUMNS = (
    "t_s",
    "n_atoms",
    "kappa_eff_hz",
    "v_inf_rad2_s2",
    "v_prior_rad2_s2",
    "sql_rad2_s2",
    "sqrt_v_inf_rad_s",
    "sqrt_v_inf_hz",
)


def _write_csv(path: str, columns: tuple[str, ...], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([f"{v:.12g}" if isinstance(v, float) else v for v in row])


def _resolve_scenario(args) -> tuple[ScenarioConfig, str]:
    if bool(args.config) == bool(args.preset):
        raise ConfigError("exactly one of --config or --preset is required")
    if args.config:
        cfg = load_scenario(args.config)
        name = os.path.splitext(os.path.basename(args.config))[0]
    else:
        try:
            cfg = presets.get_preset(args.preset)
        except KeyError as exc:
            raise ConfigError(str(exc)) from None
        name = args.preset
    updates = {}
    if args.trajectories is not None:
        updates["n_trajectories"] = args.trajectories
    if args.seed is not None:
        updates["base_seed"] = args.seed
    if args.horizon is not None:
        updates["horizon"] = args.horizon
    if args.record_stride is not None:
        updates["record_stride"] = args.record_stride
    try:
        if args.dt is not None:
            sensor = replace(cfg.sensor, dt=args.dt)
            updates["sensor"] = sensor
            updates["ekf_model"] = replace(cfg.ekf_model, sensor=sensor)
        if updates:
            cfg = replace(cfg, **updates)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg, name


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="YAML scenario configuration")
    p.add_argument("--preset", metavar="NAME", help="built-in preset name")
    p.add_argument("--trajectories", type=int, metavar="N")
    p.add_argument("--seed", type=int, metavar="U64")
    p.add_argument("--dt", type=float, metavar="SECONDS")
    p.add_argument("--horizon", type=float, metavar="SECONDS")
    p.add_argument("--record-stride", type=int, metavar="STEPS")
    p.add_argument("--threads", type=int, metavar="N",
                   help="worker threads (default: hardware parallelism)")
    p.add_argument("--out", metavar="DIR", default=".", help="output directory")
    p.add_argument("--backend", choices=("auto", "compiled", "python"),
                   default=None, help="trajectory kernel to use")


def _simulate(args, kind: str) -> int:
    cfg, name = _resolve_scenario(args)
    if cfg.kind != kind:
        raise ConfigError(
            f"scenario is a {cfg.kind!r} configuration; this subcommand needs {kind!r}"
        )
    os.makedirs(args.out, exist_ok=True)
    started = time.time()
    stats = run_ensemble(cfg, threads=args.threads, backend=args.backend)
    sample = run_trajectory(cfg, 0, backend=args.backend)
    runtime = time.time() - started

    tag = name.replace("/", "_")
    ens_path = os.path.join(args.out, f"{tag}_ensemble.csv")
    trj_path = os.path.join(args.out, f"{tag}_trajectory0.csv")
    sum_path = os.path.join(args.out, f"{tag}_summary.json")
    man_path = os.path.join(args.out, f"{tag}_manifest.json")

    columns = ENSEMBLE_COLUMNS + (MCG_ENSEMBLE_EXTRA if kind == "vdp" else ())
    rows = []
    sqrt_amse = np.sqrt(stats.amse)
    for i, t in enumerate(stats.t):
        row = [
            float(t),
            float(stats.amse[i]),
            float(sqrt_amse[i]),
            float(stats.mean_sigma_omega[i]),
            float(stats.mean_squeezing_db[i]),
            float(stats.bound[i]),
            float(stats.mean_squeezing_est_db[i]),
            float(stats.amse_stderr[i]),
        ]
        if kind == "vdp":
            clean = float(sample.omega_true[i])
            row += [clean, float(analysis.rad_s_to_pt(clean))]
        rows.append(row)
    _write_csv(ens_path, columns, rows)

    columns = TRAJECTORY_COLUMNS + (MCG_TRAJECTORY_EXTRA if kind == "vdp" else ())
    rows = []
    for i, t in enumerate(sample.t):
        row = [
            float(t),
            float(sample.omega_true[i]),
            float(sample.omega_est[i]),
            float(sample.u[i]),
            float(sample.y_increment[i]),
            float(sample.squeezing_db[i]),
            float(sample.sigma_omega[i]),
        ]
        if kind == "vdp":
            row += [
                float(sample.omega_noisy[i]),
                float(analysis.rad_s_to_pt(sample.omega_true[i])),
                float(analysis.rad_s_to_pt(sample.omega_est[i])),
            ]
        rows.append(row)
    _write_csv(trj_path, columns, rows)

    summary = {
        "scenario": name,
        "kind": kind,
        "n_trajectories_used": stats.n_used,
        "n_failed": len(stats.failures),
        "total_cov_clamps": stats.total_cov_clamps,
        "total_psd_floors": stats.total_psd_floors,
        "squeezing": analysis.squeezing_summary(stats),
        "bound_violations_3sigma": analysis.bound_violations(stats),
    }
    horizon = cfg.time_grid()[-1]
    if kind == "oup":
        summary["plateau"] = analysis.plateau_stats(stats, horizon / 2.0, horizon)
        summary["plateau_post_lock"] = analysis.plateau_stats(
            stats, min(1e-3, horizon / 2.0), min(3e-3, horizon)
        )
    else:
        clean = sample.omega_true
        summary["waveform_range_rad_s"] = [float(clean.min()), float(clean.max())]
        summary["waveform_range_pt"] = [
            float(analysis.rad_s_to_pt(clean.min())),
            float(analysis.rad_s_to_pt(clean.max())),
        ]
        try:
            summary["third_cycle"] = analysis.mcg_cycle_stats(stats, clean, cycle=3)
        except ValueError as exc:
            summary["third_cycle"] = {"error": str(exc)}
    with open(sum_path, "w") as fh:
        json.dump(summary, fh, indent=2)

    manifest = {
        "version": f"spintrack-{__version__}",
        "seed": cfg.base_seed,
        "runtime_s": runtime,
        "backend": bk.get_backend(args.backend).name,
        "threads": args.threads or os.cpu_count() or 1,
        "config": scenario_to_dict(cfg),
        "outputs": [ens_path, trj_path, sum_path],
    }
    with open(man_path, "w") as fh:
        json.dump(manifest, fh, indent=2)

    print(f"{name}: {stats.n_used} trajectories in {runtime:.1f}s -> {args.out}")
    for path in (ens_path, trj_path, sum_path, man_path):
        print(f"  {path}")
    return EXIT_OK


def _bound_rows(t_grid, n_grid, q_omega, kappa_loc, kappa_coll, sigma0):
    for n in n_grid:
        kappa = effective_dephasing(n, kappa_loc, kappa_coll)
        for t in t_grid:
            if q_omega > 0.0:
                q = BoundQuery(t=t, n_atoms=n, q_omega=q_omega,
                               kappa_loc=kappa_loc, kappa_coll=kappa_coll,
                               sigma0=sigma0)
                v_inf = cs_bound_amse(q)
                v_prior = cs_bound_finite_prior(q)
            else:
                v_inf = sql_bound(t, n, kappa_loc, kappa_coll)
                v_prior = v_inf
            yield [
                float(t), float(n), float(kappa), float(v_inf), float(v_prior),
                float(sql_bound(t, n, kappa_loc, kappa_coll)),
                float(math.sqrt(v_inf)),
                float(analysis.rad_s_to_hz(math.sqrt(v_inf))),
            ]


def _cmd_bound(args) -> int:
    if args.preset == "fig5":
        args.q_omega, args.kappa_loc, args.kappa_coll = 1e6, 100.0, 0.0
        args.sigma0 = 10.0
        args.n_scan = True
        args.t_min, args.t_max, args.t_points = 1e-4, 1.0, 25
        args.n_min, args.n_max, args.n_points = 1e6, 1e14, 33
    elif args.preset is not None:
        raise ConfigError(f"unknown bound preset {args.preset!r} (only 'fig5')")
    if args.t_min <= 0 or args.t_max < args.t_min:
        raise ConfigError("need 0 < --t-min <= --t-max")
    if args.q_omega < 0:
        raise ConfigError("--q-omega-rad2-s3 must be >= 0")
    if args.kappa_loc <= 0 and args.kappa_coll <= 0:
        raise ConfigError("at least one of --kappa-loc-hz/--kappa-coll-hz must be positive")

    t_grid = np.geomspace(args.t_min, args.t_max, args.t_points)
    if args.n_scan:
        n_grid = np.geomspace(args.n_min, args.n_max, args.n_points)
    else:
        n_grid = np.array([args.n_atoms])

    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "bound.csv")
    _write_csv(path, BOUND_COLUMNS,
               _bound_rows(t_grid, n_grid, args.q_omega, args.kappa_loc,
                           args.kappa_coll, args.sigma0))
    manifest = {
        "version": f"spintrack-{__version__}",
        "parameters": {
            "q_omega_rad2_s3": args.q_omega,
            "kappa_loc_hz": args.kappa_loc,
            "kappa_coll_hz": args.kappa_coll,
            "sigma0_rad_s": args.sigma0,
            "t_grid_s": [args.t_min, args.t_max, args.t_points],
            "n_grid": [args.n_min, args.n_max, args.n_points] if args.n_scan
                      else [args.n_atoms],
        },
        "outputs": [path],
    }
    man_path = os.path.join(args.out, "bound_manifest.json")
    with open(man_path, "w") as fh:
        json.dump(manifest, fh, indent=2)
    print(f"bound table -> {path}")
    return EXIT_OK


def _cmd_presets(args) -> int:
    for name in sorted(presets.PRESETS):
        print(f"{name:16s} {presets.PRESET_NOTES[name]}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spintrack",
        description="Spin-precession magnetometer tracking simulator",
    )
    parser.add_argument("--version", action="version",
                        version=f"spintrack {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_oup = sub.add_parser("simulate-oup", help="track a fluctuating (OUP) field")
    _add_run_flags(p_oup)
    p_mcg = sub.add_parser("simulate-mcg", help="track a noisy cardiac-like waveform")
    _add_run_flags(p_mcg)

    p_bound = sub.add_parser("bound", help="tabulate quantum tracking-error bounds")
    p_bound.add_argument("--preset", metavar="NAME", help="'fig5' for the N x t surface")
    p_bound.add_argument("--t-min", type=float, default=1e-4)
    p_bound.add_argument("--t-max", type=float, default=1e-2)
    p_bound.add_argument("--t-points", type=int, default=50)
    p_bound.add_argument("--n-atoms", type=float, default=1e13)
    p_bound.add_argument("--n-scan", action="store_true",
                         help="scan atom number over a log grid")
    p_bound.add_argument("--n-min", type=float, default=1e6)
    p_bound.add_argument("--n-max", type=float, default=1e14)
    p_bound.add_argument("--n-points", type=int, default=33)
    p_bound.add_argument("--q-omega-rad2-s3", dest="q_omega", type=float, default=1e6)
    p_bound.add_argument("--kappa-loc-hz", dest="kappa_loc", type=float, default=100.0)
    p_bound.add_argument("--kappa-coll-hz", dest="kappa_coll", type=float, default=0.0)
    p_bound.add_argument("--sigma0-rad-s", dest="sigma0", type=float, default=10.0)
    p_bound.add_argument("--out", metavar="DIR", default=".")

    p_presets = sub.add_parser("presets", help="list built-in presets")
    p_presets.add_argument("action", nargs="?", default="list", choices=["list"])

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate-oup":
            return _simulate(args, "oup")
        if args.command == "simulate-mcg":
            return _simulate(args, "vdp")
        if args.command == "bound":
            return _cmd_bound(args)
        if args.command == "presets":
            return _cmd_presets(args)
        parser.error(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EnsembleError, bk.TrajectoryError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
