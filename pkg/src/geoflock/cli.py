"""Command line entry point.

Subcommands:

* ``run <config.json>``                   dispatch a configured experiment
* ``transport <a.csv> <b.csv> --space S`` exact W2 between two measure files
* ``verify --suite <name> --seed <u64>``  run a named check suite, write NDJSON
* ``figures --out <dir>``                 produce the canonical figure data

Exit codes: 0 ok, 2 usage/config error, 3 numerical failure.  The
``GEOFLOCK_THREADS`` environment variable (or ``--workers``) sizes the
replica worker pool.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis as an
from . import dynamics as dyn
from . import geometry as geo
from . import kernels as kn
from . import measures as ms
from .errors import DomainError, NumericalError, ResourceError, UsageError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

MODES = ("particles", "grid", "verify", "transport", "example1", "example2", "figures")

FIGURE_SNAPSHOT_TIMES = [0.0, 1.0, 2.0, 3.0, 5.0, 7.0, 10.0, 15.0, 20.0]
REFERENCE_ANCHOR_TIME = 10.0


def _workers(cli_value):
    if cli_value is not None:
        return max(1, int(cli_value))
    env = os.environ.get("GEOFLOCK_THREADS")
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise UsageError(f"GEOFLOCK_THREADS must be an integer, got {env!r}") from exc
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# config handling


def _require(cfg: dict, key: str, kind, mode: str):
    if key not in cfg:
        raise UsageError(f"field '{key}' is required for mode '{mode}'")
    value = cfg[key]
    if not isinstance(value, kind):
        name = kind.__name__ if isinstance(kind, type) else "/".join(k.__name__ for k in kind)
        raise UsageError(f"field '{key}': expected {name}, got {type(value).__name__}")
    return value


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    mode = cfg.get("mode")
    if mode not in MODES:
        raise UsageError(f"field 'mode': expected one of {MODES}, got {mode!r}")
    return cfg


def _sim_config(cfg: dict, mode: str) -> dyn.SimConfig:
    space = geo.parse_space(_require(cfg, "space", str, mode))
    kernel = kn.parse_kernel(cfg.get("kernel", "midpoint"), space)
    sim = dyn.SimConfig(
        space=space,
        kernel=kernel,
        mode=mode,
        n_particles=int(cfg.get("n_particles", 0)),
        grid_size=int(cfg.get("grid_size", 0)),
        t_end=float(_require(cfg, "t_end", (int, float), mode)),
        record_interval=float(_require(cfg, "record_interval", (int, float), mode)),
        dt=float(cfg.get("dt", 0.01)),
        seed=int(cfg.get("seed", 0)),
        replicas=int(cfg.get("replicas", 1)),
        update_mode=cfg.get("update_mode", "single"),
        initial=cfg.get("initial", {"type": "uniform"}),
        snapshot_times=cfg.get("snapshot_times"),
    )
    sim.validate()
    return sim


def _out_dir(cfg: dict, default: str = "out") -> Path:
    out = Path(cfg.get("out", default))
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# mode implementations


def _run_particles(cfg: dict, workers: int) -> int:
    sim = _sim_config(cfg, "particles")
    records = dyn.simulate_particles(sim, workers=workers)
    out = _out_dir(cfg)
    for rec in records:
        dyn.write_trajectory(out / f"trajectory_r{rec.replica}.csv", rec)
        if rec.snapshots:
            rep_dir = out / f"replica_{rec.replica}"
            rep_dir.mkdir(exist_ok=True)
            for t, positions in rec.snapshots:
                np.savetxt(
                    rep_dir / f"positions_{t:g}.csv",
                    positions,
                    delimiter=",",
                    fmt="%.17g",
                    header=",".join(f"c{i}" for i in range(positions.shape[1])),
                    comments="",
                )
    print(f"wrote {len(records)} trajectories to {out}")
    return EXIT_OK


def _run_grid(cfg: dict) -> int:
    sim = _sim_config(cfg, "grid")
    rec = dyn.run_circle_grid(sim)
    out = _out_dir(cfg)
    dyn.write_trajectory(out / "trajectory.csv", rec)
    for t, density in rec.snapshots:
        dyn.write_snapshot(out / f"snapshot_{t:g}.csv", density)
    print(f"wrote trajectory with {len(rec.times)} records to {out}")
    return EXIT_OK


def _write_series_csv(path, header, columns):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*columns):
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")


def reference_series(times, energy, anchor_time=REFERENCE_ANCHOR_TIME):
    """Exponential reference e^{-t/2} anchored at the record nearest the
    anchor time."""
    times = np.asarray(times)
    energy = np.asarray(energy)
    k = int(np.argmin(np.abs(times - anchor_time)))
    return energy[k] * np.exp(-0.5 * (times - times[k]))


def run_figures(out_dir, seed: int = 7) -> dyn.TrajectoryRecord:
    """Canonical figure scenario: circle grid run from the documented bump,
    with density snapshots, the first-moment angle series, and the energy
    series next to its exponential reference."""
    sim = dyn.SimConfig(
        space=geo.circle(),
        kernel=kn.midpoint_kernel(geo.circle()),
        mode="grid",
        grid_size=256,
        t_end=20.0,
        record_interval=0.5,
        dt=0.01,
        seed=seed,
        initial=dict(dyn.FIGURE_BUMP),
        snapshot_times=FIGURE_SNAPSHOT_TIMES,
    )
    rec = dyn.run_circle_grid(sim)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dyn.write_trajectory(out / "trajectory.csv", rec)
    for t, density in rec.snapshots:
        dyn.write_snapshot(out / f"snapshot_{t:g}.csv", density)
    theta1 = np.mod(np.arctan2(rec.moments[:, 1], rec.moments[:, 0]), geo.TWO_PI)
    _write_series_csv(out / "theta1.csv", ["t", "theta1"], [rec.times, theta1])
    _write_series_csv(
        out / "energy.csv",
        ["t", "energy", "reference"],
        [rec.times, rec.energy, reference_series(rec.times, rec.energy)],
    )
    return rec


def _run_transport(cfg_or_args, out_plan=None) -> int:
    if isinstance(cfg_or_args, dict):
        cfg = cfg_or_args
        files = _require(cfg, "files", list, "transport")
        if len(files) != 2:
            raise UsageError("field 'files': transport mode needs exactly two paths")
        space = geo.parse_space(_require(cfg, "space", str, "transport"))
        plan_out = cfg.get("plan_out")
    else:
        files = [cfg_or_args.file_a, cfg_or_args.file_b]
        space = geo.parse_space(cfg_or_args.space)
        plan_out = out_plan
    rho = ms.read_measure(files[0], space)
    sigma = ms.read_measure(files[1], space)
    value, plan = ms.w2_exact(rho, sigma)
    print(f"{value:.12g}")
    if plan_out:
        ms.write_plan(plan_out, plan)
    return EXIT_OK


def _run_verify(suite: str, seed: int, out_path) -> int:
    results = an.run_suite(suite, seed)
    an.write_ndjson(out_path, results)
    failed = [r for r in results if not r.passed]
    for r in results:
        mark = "ok" if r.passed else "FAIL"
        print(f"[{mark}] {r.check}  statistic={r.statistic:.6g} bound={r.bound:.6g}")
    print(f"report: {out_path} ({len(results)} checks, {len(failed)} failed)")
    if failed:
        print(f"first failing check: {failed[0].check}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _run_example1(cfg: dict) -> int:
    """Sensitivity of the circle dynamics to the initial data: two nearly
    identical two-atom initial conditions land on opposite semicircles."""
    m = int(cfg.get("grid_size", 256))
    dt = float(cfg.get("dt", 0.01))
    # evaluate just below 4 ln 4 + 1 on the step grid; separation grows in t
    t_end = dt * math.floor((4.0 * math.log(4.0) + 1.0) / dt)
    space = geo.circle()
    records = []
    for sign in (-1.0, +1.0):
        sim = dyn.SimConfig(
            space=space,
            kernel=kn.midpoint_kernel(space),
            mode="grid",
            grid_size=m,
            t_end=t_end,
            record_interval=t_end / 2,
            dt=dt,
            initial={"type": "two_atoms", "angles": [0.0, math.pi + sign * 0.05]},
            snapshot_times=[0.0, t_end],
        )
        records.append(dyn.run_circle_grid(sim))
    rec_a, rec_b = records
    rho_a = rec_a.snapshots[-1][1].to_measure()
    rho_b = rec_b.snapshots[-1][1].to_measure()

    def _support(rho):
        keep = rho.weights > 0.0
        return ms.measure(space, rho.points[keep], rho.weights[keep])

    w2_final, _ = ms.w2_exact(_support(rho_a), _support(rho_b))
    w2_init, _ = ms.w2_exact(
        _support(rec_a.snapshots[0][1].to_measure()),
        _support(rec_b.snapshots[0][1].to_measure()),
    )
    conf_a = dyn.semicircle_confinement_check(rec_a)
    conf_b = dyn.semicircle_confinement_check(rec_b)
    threshold = math.pi / 2
    ok = w2_final >= threshold and conf_a is True and conf_b is True
    print(f"initial separation W2 = {w2_init:.6f} (atoms differ by 0.1 in angle)")
    print(f"separation at t = 4 ln 4 + 1: W2 = {w2_final:.6f}  (threshold {threshold:.6f})")
    print(f"semicircle confinement: lower arc {conf_a}, upper arc {conf_b}")
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_NUMERICAL


def _run_example2(cfg: dict) -> int:
    """Three-atom drift of the first moment, against the cited first-order
    values; see the repository notes for the x-component discrepancy."""
    eps = float(cfg.get("eps", 0.01))
    moment, deriv, cross = an.three_atom_moment_derivative(eps)
    cited_moment = (-1.0 / 3.0, eps / 3.0)
    cited_deriv = (-4.0 / 9.0 + eps / 3.0, -eps / 9.0)
    tol = 1e-3
    rows = [
        ("moment_x", moment[0], cited_moment[0]),
        ("moment_y", moment[1], cited_moment[1]),
        ("derivative_x", deriv[0], cited_deriv[0]),
        ("derivative_y", deriv[1], cited_deriv[1]),
    ]
    ok = True
    for name, got, want in rows:
        good = abs(got - want) <= tol
        ok = ok and good
        print(f"{name}: computed {got:+.6f}  cited {want:+.6f}  {'ok' if good else 'MISMATCH'}")
    print(f"cross product (non-collinearity): {cross:+.6e} (must be nonzero)")
    ok = ok and cross != 0.0
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_NUMERICAL


def _dispatch_run(args) -> int:
    cfg = load_config(args.config)
    mode = cfg["mode"]
    workers = _workers(args.workers)
    if mode == "particles":
        return _run_particles(cfg, workers)
    if mode == "grid":
        return _run_grid(cfg)
    if mode == "figures":
        run_figures(_out_dir(cfg, "figures"), seed=int(cfg.get("seed", 7)))
        print(f"figure data written to {cfg.get('out', 'figures')}")
        return EXIT_OK
    if mode == "verify":
        out = _out_dir(cfg, "verify")
        return _run_verify(cfg.get("suite", "all"), int(cfg.get("seed", 0)), out / "report.ndjson")
    if mode == "transport":
        return _run_transport(cfg)
    if mode == "example1":
        return _run_example1(cfg)
    return _run_example2(cfg)


# ---------------------------------------------------------------------------
# argument parsing


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geoflock", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a JSON config")
    p_run.add_argument("config")
    p_run.add_argument("--workers", type=int, default=None)

    p_tr = sub.add_parser("transport", help="exact W2 between two measure files")
    p_tr.add_argument("file_a")
    p_tr.add_argument("file_b")
    p_tr.add_argument("--space", required=True)
    p_tr.add_argument("--plan", default=None, help="write the optimal plan CSV here")

    p_ver = sub.add_parser("verify", help="run a named verification suite")
    p_ver.add_argument("--suite", default="all", choices=an.suite_names())
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.add_argument("--out", default="verify-report.ndjson")

    p_fig = sub.add_parser("figures", help="write the canonical figure data")
    p_fig.add_argument("--out", required=True)
    p_fig.add_argument("--seed", type=int, default=7)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        if args.command == "run":
            return _dispatch_run(args)
        if args.command == "transport":
            return _run_transport(args, out_plan=args.plan)
        if args.command == "verify":
            return _run_verify(args.suite, args.seed, args.out)
        if args.command == "figures":
            run_figures(args.out, seed=args.seed)
            print(f"figure data written to {args.out}")
            return EXIT_OK
        return EXIT_USAGE
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, NumericalError, ResourceError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
