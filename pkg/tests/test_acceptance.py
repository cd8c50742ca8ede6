"""Acceptance criteria 1-10.

Each test prints one ``criterion k: PASS|FAIL`` line (collected again in the
terminal summary) before asserting.  Tolerances are the stated ones.
"""
import math

import numpy as np

import oracles as O
from thinfilm import cli, diagnostics as D, initial, io_store, regularity as R, solver, validate
from thinfilm.cutoff import CutoffProfile
from thinfilm.errors import NotBadTime, RegimeViolation
from thinfilm.grid import Ball, Field, Grid, gather


# -- 1 -----------------------------------------------------------------------------

def test_c01_operator_convergence(acceptance):
    ratios = validate.convergence_ratios((64, 128, 256))
    ok = all(3.5 <= r <= 4.5 for rs in ratios.values() for r in rs)
    detail = "; ".join(f"{k} " + "/".join(f"{r:.4f}" for r in rs) for k, rs in ratios.items())
    acceptance(1, ok, detail)
    assert ok


# -- 2 -----------------------------------------------------------------------------

def test_c02_travelling_wave_speed(acceptance):
    m = validate.travelwave_measurement(nx=1024, n=1.0)
    seam_clear = bool(np.all(m.fronts > 0.05) and np.all(m.fronts < 0.95))
    ok = m.rel_error <= 0.05 and seam_clear and math.isclose(abs(m.expected), 6.0)
    acceptance(2, ok, f"front speed {m.speed:.5f}, |c_1| = 6, relative error {m.rel_error:.3%}")
    assert ok


# -- 3 -----------------------------------------------------------------------------

def _smooth_suite(g):
    return {
        "constant": initial.constant(g, 1.0),
        "mode": initial.mode(g, amplitude=0.2, base=1.0, kx=1, ky=1),
        "droplet": initial.droplet(g, amplitude=0.5, base=0.5, width=0.5),
    }


def test_c03_conservation_and_dissipation(acceptance):
    g = Grid.square(32)
    worst_mass, worst_energy, bad = 0.0, 0.0, []
    for name, u0 in _smooth_suite(g).items():
        for n in (1.5, 2.0, 2.5):
            mob = solver.MobilityModel(n)
            _, dt = solver.step(u0, solver.SolverConfig(mob, t_end=1.0, snapshot_every=1.0))
            t_end = 3e4 * dt
            cfg = solver.SolverConfig(mob, t_end=t_end, snapshot_every=t_end / 60)
            tr = solver.run(u0, cfg, max_steps=10_000)
            assert tr.step_mass.size == 10_000
            m0 = tr.masses[0]
            drift = float(np.max(np.abs(tr.step_mass - m0)) / m0)
            e = np.array(tr.energies)
            rise = float(np.max(np.diff(e))) if e.size > 1 else 0.0
            tol = 1e-8 * e[0]
            worst_mass = max(worst_mass, drift)
            worst_energy = max(worst_energy, rise / e[0] if e[0] > 0 else rise)
            if drift > 1e-10 or rise > tol:
                bad.append(f"{name}/n={n}")
    ok = not bad
    acceptance(3, ok, f"max mass drift {worst_mass:.2e} over 1e4 steps, max energy rise "
                      f"{worst_energy:.2e} E0 per interval" + (f"; failing {bad}" if bad else ""))
    assert ok


# -- 4 -----------------------------------------------------------------------------

def _quadratic(nx, Q):
    g = Grid.square(nx)
    c = g.center
    u = Field.from_function(g, lambda X, Y: 0.5 * (Q[0, 0] * (X - c[0]) ** 2
                                                   + 2 * Q[0, 1] * (X - c[0]) * (Y - c[1])
                                                   + Q[1, 1] * (Y - c[1]) ** 2))
    r = g.length / 8
    av = D.smoothed_averages(u, r, c)
    err = float(max(np.abs(av.b - Q).max(), np.abs(av.c).max()))
    tilt = D.tilt_excess(u, r, av, c).value
    return err, tilt, r


def test_c04_quadratic_identity(acceptance):
    Q = np.array([[1.0, 0.25], [0.25, -0.5]])
    qn = np.linalg.norm(Q)
    e128, tilt128, r = _quadratic(128, Q)
    e256, tilt256, _ = _quadratic(256, Q)
    ok_err = e128 <= 1e-3 * qn
    shrink = e128 / e256 if e256 > 0 else math.inf
    ok_shrink = shrink >= 3.5
    bound = 1e-8 * qn ** 2 * r ** 4
    ok_tilt = tilt128 <= bound and tilt256 <= bound
    ok = ok_err and ok_shrink and ok_tilt
    acceptance(4, ok, f"error/|Q| {e128 / qn:.2e} at 128 (<= 1e-3: {ok_err}); shrink to 256 "
                      f"x{shrink:.3f} (>= 3.5: {ok_shrink}); tilt {tilt128:.2e} vs bound "
                      f"{bound:.2e} ({ok_tilt})")
    assert ok_err
    assert ok_tilt
    assert ok_shrink


# -- 5 -----------------------------------------------------------------------------

def _rel(a, b):
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


def _oracle_suite():
    g = Grid.square(64)
    rng = np.random.default_rng(2024)
    for k in range(10):
        base, amp = (0.55, 0.45) if k % 2 == 0 else (1.0, 0.3)
        u = initial.random_positive(g, seed=100 + k, base=base, amplitude=amp)
        n = (1.5, 2.0, 2.5)[k % 3]
        center = tuple(rng.uniform(0.0, 1.0, 2))
        yield g, u, n, center


def _compare_all(g, u, n, center):
    h = g.h
    a = u.values
    r = 8 * h
    errs = {}

    def put(name, got, want):
        errs[name] = max(errs.get(name, 0.0), _rel(got, want))

    put("energy", D.energy(u), O.energy(a, h))
    put("dissipation", D.dissipation(u, n), O.dissipation(a, h, n))
    alpha = D.default_alpha(n)
    put("entropy", D.entropy(u, alpha, n), O.entropy(a, h, alpha))
    put("entropy_rhs", D.entropy_dissipation_rhs(u, n, alpha), O.entropy_rhs(a, h, n, alpha))
    bg = D.bernis_gruen_terms(u, n, CutoffProfile.ball(r, center))
    for key, val in O.bernis_gruen(a, h, n, center, r).items():
        put(f"bernis_gruen.{key}", bg[key], val)
    av = D.smoothed_averages(u, r, center)
    ob, oc = O.smoothed_averages(a, h, center, r)
    scale = max(np.abs(ob).max(), np.abs(oc).max())
    errs["smoothed_averages"] = float(max(np.abs(av.b - ob).max(), np.abs(av.c - oc).max()) / scale)
    put("tilt_excess", D.tilt_excess(u, r, av, center).value, O.tilt_excess(a, h, center, r, ob, oc))
    for got, (lhs, rhs) in zip(D.poincare_checks(u, r, center, av), O.poincare(a, h, center, r, ob, oc)):
        put(f"{got.name}.lhs", got.lhs, lhs)
        for key, val in rhs.items():
            put(f"{got.name}.{key}", got.rhs_components[key], val)
    for got, (lhs, rhs) in ((D.third_derivative_check(u, r, center), O.third_derivative(a, h, center, r)),
                            (D.second_derivative_check(u, n, CutoffProfile.ball(r, center)),
                             O.second_derivative(a, h, n, center, r))):
        put(f"{got.name}.lhs", got.lhs, lhs)
        for key, val in rhs.items():
            put(f"{got.name}.{key}", got.rhs_components[key], val)
    try:
        m = D.morrey_sup_check(u, n, r, 0.5, center)
    except NotBadTime:
        pass
    else:
        lhs, rhs = O.morrey(a, h, n, center, r, 0.5)
        put("morrey.lhs", m.lhs, lhs)
        for key, val in rhs.items():
            put(f"morrey.{key}", m.rhs_components[key], val)
    return errs


def _hole_filling_errors():
    g = Grid.square(64)
    times = [0.0, 0.1, 0.25, 0.4, 0.7]
    snaps = []
    for k, t in enumerate(times):
        base, amp = (0.55, 0.45) if k % 2 else (1.0, 0.2)
        f = initial.random_positive(g, seed=300 + k, base=base, amplitude=amp)
        snaps.append(Field(g, f.values, t))
    traj = solver.Trajectory.from_snapshots(snaps, 2.0)
    center, r = (0.431, 0.577), 8 * g.h
    rep = D.hole_filling_sides(traj, 0.0, 0.7, r, 0.5, center)
    want = O.hole_filling([(s.time, s.values) for s in snaps], g.h, 2.0, center, r, 0.5)
    labels = set(rep.labels)
    return {f"hole_filling.{k}": _rel(v, want[k]) for k, v in rep.as_dict().items()}, labels


def test_c05_oracle_equivalence(acceptance):
    worst = {}
    for g, u, n, center in _oracle_suite():
        for k, v in _compare_all(g, u, n, center).items():
            worst[k] = max(worst.get(k, 0.0), v)
    hf, labels = _hole_filling_errors()
    worst.update(hf)
    top = max(worst, key=worst.get)
    ok = worst[top] <= 1e-9 and "morrey.lhs" in worst and labels == {D.GOOD, D.BAD}
    acceptance(5, ok, f"{len(worst)} quantities over 10 fields plus a hole-filling trajectory; "
                      f"worst relative deviation {worst[top]:.2e} ({top})")
    assert ok, {k: v for k, v in worst.items() if v > 1e-9}


# -- 6 -----------------------------------------------------------------------------

def _max_ratios(nx, seeds):
    g = Grid.square(nx)
    c, r = g.center, g.length / 8
    out = {k: 0.0 for k in ("bernis_gruen", "poincare_grad_annulus", "poincare_hess_annulus",
                            "third_derivative", "morrey_sup")}
    for s in seeds:
        u = initial.random_positive(g, seed=s, base=0.55, amplitude=0.45)
        checks = [D.bernis_gruen_sides(u, 2.0, CutoffProfile.ball(r, c))]
        checks += D.poincare_checks(u, r, c)[:2]
        checks.append(D.third_derivative_check(u, r, c))
        try:
            checks.append(D.morrey_sup_check(u, 2.0, r, 0.5, c))
        except NotBadTime:
            pass
        for ch in checks:
            out[ch.name] = max(out[ch.name], ch.ratio)
    return out


def test_c06_ratio_stability(acceptance):
    seeds = range(50)
    a, b = _max_ratios(128, seeds), _max_ratios(256, seeds)
    changes = {k: max(a[k], b[k]) / min(a[k], b[k]) for k in a}
    ok = all(math.isfinite(a[k]) and math.isfinite(b[k]) and min(a[k], b[k]) > 0 and changes[k] < 2 for k in a)
    acceptance(6, ok, "; ".join(f"{k} {a[k]:.4g}->{b[k]:.4g} (x{changes[k]:.3f})" for k in a))
    assert ok


# -- 7 -----------------------------------------------------------------------------

def test_c07_classifier_laws(acceptance):
    g = Grid.square(32)
    rng = np.random.default_rng(7)
    fields = [initial.random_positive(g, seed=s, base=1.0, amplitude=float(rng.uniform(0.2, 0.9)))
              for s in range(20)]
    violations = 0
    goods = 0
    for _ in range(1000):
        u = fields[int(rng.integers(len(fields)))]
        R_out = float(rng.uniform(1.5 * g.h, g.length / 4))
        r_in = float(rng.uniform(0.5 * g.h, R_out))
        c = rng.uniform(0, g.length, 2)
        ang = rng.uniform(0, 2 * np.pi)
        off = float(rng.uniform(0, R_out - r_in))
        ci = c + off * np.array([np.cos(ang), np.sin(ang)])
        outer = D.classify_time(u, Ball(tuple(c), R_out))
        try:
            inner = D.classify_time(u, Ball(tuple(ci), r_in))
        except Exception:
            continue
        vals = gather(u.values, Ball(tuple(c), R_out), g)
        alt_bad = vals.min() < 0.5 * vals.max()
        if (outer.label == D.BAD) != alt_bad or outer.label not in (D.GOOD, D.BAD):
            violations += 1
        if outer.good:
            goods += 1
            if not inner.good:
                violations += 1
    ok = violations == 0 and 0 < goods < 1000
    acceptance(7, ok, f"{violations} violations in 1000 instances ({goods} good outer balls)")
    assert ok


# -- 8 -----------------------------------------------------------------------------

def _sqrt_cone(nx):
    g = Grid.square(nx)
    c = g.center
    X, Y = g.coords()
    L = g.length
    dx = (X - c[0] + L / 2) % L - L / 2
    dy = (Y - c[1] + L / 2) % L - L / 2
    return Field(g, np.sqrt(np.hypot(dx, dy)))


def test_c08_decay_pipeline(acceptance):
    g = Grid.square(256)
    u0 = initial.droplet(g, amplitude=1.0, width=0.5, base=0.1)
    mob = solver.MobilityModel(2.0)
    _, dt = solver.step(u0, solver.SolverConfig(mob, t_end=1.0, snapshot_every=1.0))
    t_end = 300 * dt
    traj = solver.run(u0, solver.SolverConfig(mob, t_end=t_end, snapshot_every=t_end))
    sched = R.RadiusSchedule(8 * g.h, g.length / 8, 1.5)
    center = (0.75, 0.6)
    levels = R.excess_sweep(traj, center, sched, traj.times[-1])
    fit = R.fit_decay([(lv.r, lv.excess) for lv in levels])
    sig = [R.spatial_holder(_sqrt_cone(nx)).sigma_x for nx in (256, 512)]
    ok_fit = len(levels) == 4 and fit.beta > 0 and fit.residual_rms < 0.3
    ok_holder = all(0.4 <= s <= 0.6 for s in sig)
    ok = ok_fit and ok_holder
    acceptance(8, ok, f"beta {fit.beta:.3f}, residual_rms {fit.residual_rms:.3f} over {len(levels)} levels; "
                      f"sigma {sig[0]:.2f} (256), {sig[1]:.2f} (512)")
    assert ok


# -- 9 -----------------------------------------------------------------------------

def test_c09_regime_gate(acceptance):
    want = {1.105: False, 1.106: True, 2.999: True, 3.0: False}
    got = {}
    for n in want:
        try:
            got[n] = R.regime_gate(n, strict=True).accepted
        except RegimeViolation:
            got[n] = False
    lower = 2 - math.sqrt(4 / 5)
    edges = {lower: False, math.nextafter(lower, 3): True, math.nextafter(3.0, 0): True}
    for n, w in edges.items():
        got_edge = solver.in_regime(n)
        got[n] = got_edge
        want[n] = w
    ok = got == want
    acceptance(9, ok, ", ".join(f"{n:.6g}:{'accept' if got[n] else 'reject'}" for n in list(want)[:4])
               + f"; lower bound {lower:.9f}")
    assert ok


# -- 10 ----------------------------------------------------------------------------

GOLDEN_CONFIG = """\
nx=128
n_exponent=2
init=random
seed=11
t_end=2e-9
snapshot_every=5e-10
sweep.r_min=0.0625
sweep.r_max=0.125
sweep.lambda=1.25
"""


def test_c10_persistence(acceptance, tmp_path):
    g = Grid.square(48)
    f = Field(g, initial.random_positive(g, seed=5).values, 0.3125)
    p = tmp_path / "snap.tflm"
    io_store.write_snapshot(f, p, 2.5)
    back = io_store.load_snapshot(p)
    same_snap = back.field.values.tobytes() == f.values.tobytes() and back.field.time == f.time \
        and back.n_exponent == 2.5 and p.read_bytes() == io_store.encode_snapshot(back.field, 2.5)

    cfg = tmp_path / "golden.cfg"
    cfg.write_text(GOLDEN_CONFIG)
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert cli.main(["run", "--config", str(cfg), "--out", str(out)]) == 0
        outs.append((out / "diagnostics.csv").read_bytes())
    same_csv = outs[0] == outs[1] and len(outs[0].splitlines()) == 6
    ok = same_snap and same_csv
    acceptance(10, ok, f"snapshot round trip bitwise {same_snap}; diagnostics.csv identical across runs "
                       f"{same_csv} ({len(outs[0])} bytes)")
    assert ok
