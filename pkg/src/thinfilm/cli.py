"""Command-line entry point ``tflm``.

Exit codes: 0 success, 1 I/O or validation failure, 2 solver divergence,
3 configuration error, 4 region/schedule/resolution error, 5 too few fit points.
"""
from __future__ import annotations

import argparse
import glob
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional


from . import diagnostics as dg
from . import initial, io_store, regularity, solver
from .cutoff import CutoffProfile
from .errors import (
    AllZeroExcess, ConfigError, Diverged, InsufficientPoints, IoFailure, NonFinite, NotBadTime,
    RampUnresolved, RegimeViolation, RegionError, ScheduleError, SnapshotError, ThinFilmError,
)
from .grid import Ball, Field

EXIT_OK, EXIT_FAIL, EXIT_DIVERGED, EXIT_CONFIG, EXIT_REGION, EXIT_POINTS = 0, 1, 2, 3, 4, 5


def _threads() -> int:
    raw = os.environ.get("TFLM_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return n if n > 0 else 1


def _pmap(fn, items):
    """Ordered map, fanned out over ``TFLM_THREADS`` workers when set."""
    items = list(items)
    workers = min(_threads(), max(len(items), 1))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _err(msg: str):
    print(f"tflm: {msg}", file=sys.stderr)


def _point(text: str):
    try:
        parts = tuple(float(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y got {text!r}") from None
    if len(parts) not in (1, 2):
        raise argparse.ArgumentTypeError(f"expected x,y got {text!r}")
    return parts


def _region_message(exc: RegionError) -> str:
    msg = str(exc)
    if isinstance(exc, RampUnresolved) and exc.min_radius is not None:
        msg += f" (minimum resolvable radius {exc.min_radius:.17g})"
    return msg


# -- initial data and per-snapshot diagnostics --------------------------------------

def build_initial(cfg: io_store.ExperimentConfig) -> Field:
    g = cfg.grid
    amp = cfg.init_amplitude
    center = cfg.init_center
    if cfg.init == "constant":
        return initial.constant(g, 1.0 if amp is None else amp)
    if cfg.init == "mode":
        return initial.mode(g, amplitude=0.1 if amp is None else amp)
    if cfg.init == "droplet":
        return initial.droplet(g, amplitude=1.0 if amp is None else amp, center=center, width=cfg.init_width)
    if cfg.init == "random":
        return initial.random_positive(g, seed=cfg.seed, amplitude=0.3 if amp is None else amp)
    x0 = None if center is None else center[0]
    return initial.travelwave1d(g, n=cfg.n_exponent, x0=x0, amplitude=1.0 if amp is None else amp)


def schedule_from_config(cfg: io_store.ExperimentConfig) -> Optional[regularity.RadiusSchedule]:
    if cfg.sweep_r_min is None and cfg.sweep_r_max is None:
        return None
    g = cfg.grid
    r_min = cfg.sweep_r_min if cfg.sweep_r_min is not None else 8 * g.h
    r_max = cfg.sweep_r_max if cfg.sweep_r_max is not None else g.length / 8
    sched = regularity.RadiusSchedule(r_min, r_max, cfg.sweep_lambda)
    sched.validate(g)
    return sched


def diagnostics_row(u: Field, n: float, center, sched, eps_floor: float = dg.EPS_FLOOR) -> dict:
    g = u.grid
    nan = float("nan")
    row = {
        "t": u.time,
        "mass": u.mass(),
        "energy": dg.energy(u),
        "dissipation": dg.dissipation(u, n, eps_floor=eps_floor),
        "l3_gradnorm": dg.l3_gradient_norm(u),
    }
    lo, hi = dg.alpha_range(n)
    if lo < hi:
        a = dg.default_alpha(n)
        row["entropy_a1"] = dg.entropy(u, a, n, eps_floor)
        row["entropy_rhs_a1"] = dg.entropy_dissipation_rhs(u, n, a, eps_floor)
    else:
        row["entropy_a1"] = row["entropy_rhs_a1"] = nan
    try:
        bg = dg.bernis_gruen_sides(u, n, CutoffProfile.ball(g.length / 8, center), eps_floor)
        row.update(bg_lhs=bg.lhs, bg_rhs_diss=bg.rhs_components["dissipation_term"],
                   bg_rhs_cut=bg.rhs_components["cutoff_term"])
    except RegionError:
        row.update(bg_lhs=nan, bg_rhs_diss=nan, bg_rhs_cut=nan)
    if sched is not None:
        for lvl in regularity.excess_sweep(u, center, sched, u.time):
            row[f"class_r{lvl.level}"] = lvl.tclass.label
            row[f"excess_r{lvl.level}"] = lvl.excess
    return row


# -- subcommands ------------------------------------------------------------------------

def cmd_run(args) -> int:
    try:
        cfg = io_store.load_config(args.config)
        regularity.regime_gate(cfg.n_exponent, strict=cfg.strict_regime)
        sched = schedule_from_config(cfg)
    except (ConfigError, RegimeViolation, ScheduleError) as exc:
        _err(f"config error: {exc}")
        return EXIT_CONFIG
    except IoFailure as exc:
        _err(str(exc))
        return EXIT_FAIL
    u0 = build_initial(cfg)
    center = u0.grid.center if cfg.init_center is None else cfg.init_center
    scfg = solver.SolverConfig(
        solver.MobilityModel(cfg.n_exponent, cfg.eps_floor), t_end=cfg.t_end,
        snapshot_every=cfg.snapshot_every, dt_safety=cfg.dt_safety, scheme=cfg.scheme,
    )
    try:
        os.makedirs(args.out, exist_ok=True)
    except OSError as exc:
        _err(f"cannot create {args.out}: {exc}")
        return EXIT_FAIL
    try:
        traj = solver.run(u0, scfg)
    except (Diverged, NonFinite) as exc:
        _err(f"diverged: {exc}")
        return EXIT_DIVERGED
    try:
        for k, s in enumerate(traj.snapshots):
            io_store.write_snapshot(s, os.path.join(args.out, io_store.snapshot_name(k)), cfg.n_exponent)
        levels = 0 if sched is None else sched.K + 1
        table = io_store.DiagnosticsTable.create(os.path.join(args.out, "diagnostics.csv"), levels)
        rows = _pmap(lambda s: diagnostics_row(s, cfg.n_exponent, center, sched, cfg.eps_floor), traj.snapshots)
        for row in rows:
            io_store.append_diagnostics_row(table, row)
    except IoFailure as exc:
        _err(str(exc))
        return EXIT_FAIL
    except RegionError as exc:
        _err(_region_message(exc))
        return EXIT_REGION
    print(f"wrote {len(traj.snapshots)} snapshots to {args.out}")
    return EXIT_OK


def _fmt(v) -> str:
    return io_store.format_cell(v)


def diagnose_lines(u: Field, n: float, center, r: float, full: bool) -> List[str]:
    """CSV fragment ``check,component,value`` in a fixed order."""
    lines = ["check,component,value"]

    def add(check, comp, val):
        lines.append(f"{check},{comp},{_fmt(val)}")

    def add_ineq(ic: dg.InequalityCheck):
        add(ic.name, "lhs", ic.lhs)
        for k, v in ic.rhs_components.items():
            add(ic.name, k, v)
        add(ic.name, "ratio", ic.ratio)

    add("energy", "value", dg.energy(u))
    add("dissipation", "value", dg.dissipation(u, n))
    tc = dg.classify_time(u, Ball(center, r))
    lines.append(f"classify,label,{tc.label}")
    add("classify", "sup", tc.sup)
    add("classify", "inf", tc.inf)
    terms = dg.bernis_gruen_terms(u, n, CutoffProfile.ball(r, center))
    for k in ("grad6", "mixed", "third", "dissipation", "cutoff"):
        add("bernis_gruen_terms", k, terms[k])
    add_ineq(dg.bernis_gruen_sides(u, n, CutoffProfile.ball(r, center)))
    av = dg.smoothed_averages(u, r, center)
    for name, val in (("b_xx", av.b[0, 0]), ("b_xy", av.b[0, 1]), ("b_yy", av.b[1, 1]),
                      ("c_x", av.c[0]), ("c_y", av.c[1]), ("asymmetry", av.asymmetry)):
        add("smoothed_averages", name, val)
    add("tilt_excess", "value", dg.tilt_excess(u, r, av, center).value)
    if full:
        lo, hi = dg.alpha_range(n)
        if lo < hi:
            a = dg.default_alpha(n)
            add("entropy", "alpha", a)
            add("entropy", "value", dg.entropy(u, a, n))
            add("entropy", "rhs", dg.entropy_dissipation_rhs(u, n, a))
        for ic in dg.poincare_checks(u, r, center, av):
            add_ineq(ic)
        add_ineq(dg.third_derivative_check(u, r, center))
        add_ineq(dg.second_derivative_check(u, n, CutoffProfile.ball(r, center)))
        try:
            add_ineq(dg.morrey_sup_check(u, n, r, 1.0, center))
        except NotBadTime:
            lines.append("morrey_sup,status,skipped (good time on B_2r)")
    return lines


def cmd_diagnose(args) -> int:
    try:
        snap = io_store.load_snapshot(args.snapshot)
    except (IoFailure, SnapshotError) as exc:
        _err(str(exc))
        return EXIT_FAIL
    u = snap.field
    n = args.n if args.n is not None else snap.n_exponent
    if not (n is not None and math.isfinite(n) and n > 0):
        n = 2.0
    center = args.center if args.center is not None else u.grid.center
    r = args.radius if args.radius is not None else u.grid.length / 8
    try:
        lines = diagnose_lines(u, n, center, r, args.all)
    except RegionError as exc:
        _err(_region_message(exc))
        return EXIT_REGION
    text = "\n".join(lines) + "\n"
    if args.out:
        try:
            with open(args.out, "w", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            _err(f"cannot write {args.out}: {exc}")
            return EXIT_FAIL
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _snapshot_paths(directory: str) -> List[str]:
    return sorted(glob.glob(os.path.join(directory, "snap_*.tflm")))


def cmd_sweep(args) -> int:
    paths = _snapshot_paths(args.traj)
    if not paths:
        _err(f"no snapshots (snap_*.tflm) in {args.traj}")
        return EXIT_FAIL
    try:
        fields = [io_store.read_snapshot(p) for p in paths]
    except (IoFailure, SnapshotError) as exc:
        _err(str(exc))
        return EXIT_FAIL
    try:
        sched = regularity.RadiusSchedule(args.rmin, args.rmax, args.Lambda)
        sched.validate(fields[0].grid)
        results = _pmap(lambda f: regularity.excess_sweep(f, args.center, sched, f.time), fields)
    except (ScheduleError, RegionError) as exc:
        _err(_region_message(exc) if isinstance(exc, RegionError) else str(exc))
        return EXIT_REGION
    out = ["t,level,r,excess,class"]
    for f, levels in zip(fields, results):
        for lvl in levels:
            ex = 0.0 if lvl.zero else lvl.excess
            out.append(f"{_fmt(f.time)},{lvl.level},{_fmt(lvl.r)},{_fmt(ex)},{lvl.tclass.label}")
        if all(lvl.zero for lvl in levels):
            print(f"t={_fmt(f.time)}: all excess levels zero (super-polynomial decay)")
    try:
        with open(args.out, "w", newline="") as fh:
            fh.write("\n".join(out) + "\n")
    except OSError as exc:
        _err(f"cannot write {args.out}: {exc}")
        return EXIT_FAIL
    return EXIT_OK


def cmd_fit(args) -> int:
    try:
        header, rows = io_store.read_csv(args.csv)
    except (IoFailure, ThinFilmError) as exc:
        _err(str(exc))
        return EXIT_FAIL
    if "r" not in header or "excess" not in header:
        _err("CSV needs 'r' and 'excess' columns")
        return EXIT_FAIL
    ir, ie = header.index("r"), header.index("excess")
    it = header.index("t") if "t" in header else None
    groups = {}
    for row in rows:
        key = row[it] if it is not None else ""
        groups.setdefault(key, []).append((float(row[ir]), float(row[ie])))
    code = EXIT_OK
    for key in sorted(groups, key=lambda s: float(s) if s else 0.0):
        label = f"t={key} " if key else ""
        try:
            fit = regularity.fit_decay(groups[key], p=args.p)
        except AllZeroExcess:
            print(f"{label}super-polynomial decay: all excess levels zero (beta = inf)")
            continue
        except InsufficientPoints as exc:
            _err(f"{label}{exc}")
            code = EXIT_POINTS
            continue
        msg = f"{label}beta={fit.beta:.6f} residual_rms={fit.residual_rms:.3g} sigma_x={0.5 * fit.beta:.6f}"
        if fit.gamma is not None:
            msg += f" gamma={fit.gamma:.6f} min(beta,gamma)={fit.beta_eff:.6f} sigma_x_eff={fit.sigma_x:.6f}"
        print(msg)
    return code


def cmd_validate(args) -> int:
    from . import validate

    results = validate.run_all(args.tmpdir)
    width = max(len(f"{r.suite}/{r.name}") for r in results)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{(r.suite + '/' + r.name).ljust(width)}  {status}  {r.detail}")
    failed = [f"{r.suite}/{r.name}" for r in results if not r.passed]
    if failed:
        print("failing checks: " + ", ".join(failed))
        return EXIT_FAIL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tflm", description="Thin-film equation solver and regularity diagnostics.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="integrate an experiment config")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_run)

    d = sub.add_parser("diagnose", help="evaluate diagnostics on one snapshot")
    d.add_argument("--snapshot", required=True)
    d.add_argument("--center", type=_point)
    d.add_argument("--radius", type=float)
    d.add_argument("--n", type=float, help="mobility exponent (defaults to the snapshot header)")
    d.add_argument("--all", action="store_true", help="include every inequality check")
    d.add_argument("--out", help="write the CSV fragment here instead of stdout")
    d.set_defaults(func=cmd_diagnose)

    s = sub.add_parser("sweep", help="dyadic tilt-excess sweep over a snapshot directory")
    s.add_argument("--traj", required=True)
    s.add_argument("--center", type=_point, required=True)
    s.add_argument("--rmin", type=float, required=True)
    s.add_argument("--rmax", type=float, required=True)
    s.add_argument("--lambda", dest="Lambda", type=float, default=2.0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    f = sub.add_parser("fit", help="fit the excess decay exponent")
    f.add_argument("--csv", required=True)
    f.add_argument("--p", type=float)
    f.set_defaults(func=cmd_fit)

    v = sub.add_parser("validate", help="run the built-in self-checks")
    v.add_argument("--tmpdir", help="directory for round-trip scratch files")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "p", None) is not None and not args.p > 2:
        _err("--p must exceed 2")
        return EXIT_CONFIG
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
