"""Dyadic excess sweeps, decay fits and Holder exponent estimates."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import diagnostics as dg
from .cutoff import CutoffProfile, MIN_CELLS_PER_RADIUS
from .errors import (
    AllZeroExcess, InsufficientPoints, InsufficientSnapshots, RegimeViolation, ScheduleError,
)
from .grid import Ball, Field, Grid, member_cells
from .solver import REGIME_LOWER, REGIME_UPPER, in_regime


# -- schedules ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RadiusSchedule:
    """Geometric radii ``r_min * Lambda^k`` for ``k = 0..K``, ``K = floor(log_Lambda(r_max/r_min))``."""

    r_min: float
    r_max: float
    Lambda: float = 2.0

    def __post_init__(self):
        if not (self.r_min > 0 and self.r_max > self.r_min):
            raise ScheduleError(f"need 0 < r_min < r_max, got {self.r_min}, {self.r_max}")
        if not self.Lambda > 1:
            raise ScheduleError(f"Lambda must exceed 1, got {self.Lambda}")
        if self.K < 3:
            raise ScheduleError(
                f"only K = {self.K} levels between r_min = {self.r_min:g} and r_max = {self.r_max:g} "
                f"at Lambda = {self.Lambda:g}; need K >= 3"
            )

    @property
    def K(self) -> int:
        return int(math.floor(math.log(self.r_max / self.r_min) / math.log(self.Lambda) + 1e-9))

    @property
    def radii(self) -> List[float]:
        return [self.r_min * self.Lambda ** k for k in range(self.K + 1)]

    def validate(self, grid: Grid):
        """Check resolvability and the periodic-overlap limit on ``grid``.

        The reference averages at ``r`` live on ``B_2r``, so every level must satisfy
        ``r <= L/8`` in addition to ``r_max <= L/4``.
        """
        min_r = MIN_CELLS_PER_RADIUS * grid.h
        L = grid.length
        tol = 1 + 1e-12
        if self.r_min * tol < min_r:
            raise ScheduleError(f"r_min = {self.r_min:g} below the resolvable minimum {min_r:g}")
        if self.r_max > L / 4 * tol:
            raise ScheduleError(f"r_max = {self.r_max:g} exceeds L/4 = {L / 4:g}")
        top = self.radii[-1]
        if top > L / 8 * tol:
            raise ScheduleError(
                f"top level r = {top:g} exceeds L/8 = {L / 8:g}; its averaging annulus would wrap"
            )


# -- sweep and fit ---------------------------------------------------------------------

# excess below this fraction of the ball energy is indistinguishable from quadrature error
ZERO_REL = 1e-8


@dataclass(frozen=True)
class SweepLevel:
    level: int
    r: float
    excess: float
    tclass: dg.TimeClass
    scale: float = 0.0

    @property
    def zero(self) -> bool:
        """True when the excess is numerically zero relative to ``1/2 int_{B_r} |grad u|^2``."""
        return self.excess <= ZERO_REL * self.scale


def _level(u: Field, center, k: int, r: float) -> SweepLevel:
    ref = dg.smoothed_averages(u, r, center)
    ex = dg.tilt_excess(u, r, ref, center).value
    scale = dg.energy(u, Ball(center, r))
    return SweepLevel(k, r, ex, dg.classify_time(u, Ball(center, r)), scale)


def excess_sweep(traj, center, sched: RadiusSchedule, t: float, mapper: Callable = map) -> List[SweepLevel]:
    """Tilt excess on ``B_{r_k}`` against the averages at ``r_k``, plus the time class.

    ``traj`` may be a Trajectory or a single Field.  ``mapper`` lets callers fan
    levels out to a pool; results are returned in level order regardless.
    """
    u = traj if isinstance(traj, Field) else traj.at(t)
    sched.validate(u.grid)
    radii = sched.radii
    return list(mapper(lambda kr: _level(u, center, *kr), list(enumerate(radii))))


@dataclass(frozen=True)
class DecayFit:
    beta: float
    intercept: float
    residual_rms: float
    points: Tuple[Tuple[float, float], ...]
    excluded: Tuple[float, ...] = ()
    gamma: Optional[float] = None

    @property
    def beta_eff(self) -> float:
        return self.beta if self.gamma is None else min(self.beta, self.gamma)

    @property
    def sigma_x(self) -> float:
        return 0.5 * self.beta_eff


def gamma_from_p(p: float) -> float:
    if not p > 2:
        raise ValueError(f"integrability exponent must exceed 2, got {p}")
    return 2.0 * (p - 2.0) / p


def fit_decay(points: Sequence[Tuple[float, float]], p: Optional[float] = None) -> DecayFit:
    """Least-squares slope of ``log E`` against ``log r`` over the positive levels."""
    pts = [(float(r), float(e)) for r, e in points]
    if len(pts) == 0:
        raise InsufficientPoints("no levels supplied")
    pos = [(r, e) for r, e in pts if e > 0]
    zero = tuple(r for r, e in pts if not e > 0)
    if not pos:
        raise AllZeroExcess("every level has zero excess", levels=[r for r, _ in pts])
    if len(pos) < 3:
        raise InsufficientPoints(f"{len(pos)} positive-excess levels, need at least 3")
    x = np.log([r for r, _ in pos])
    y = np.log([e for _, e in pos])
    A = np.vstack([x, np.ones_like(x)]).T
    (beta, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - (beta * x + icpt)
    return DecayFit(
        float(beta), float(icpt), float(np.sqrt(np.mean(res * res))), tuple(pos), zero,
        None if p is None else gamma_from_p(p),
    )


def telescoping_check(traj, t: float, sched: RadiusSchedule, center) -> List[dg.InequalityCheck]:
    """For consecutive levels ``r < R``: ``|b_R - b_r|^2`` and ``|c_R - c_r|^2``
    against ``R^-4`` and ``R^-2`` times ``1/2 int_{B_2R} |grad u - b_R x - c_R|^2``.
    """
    u = traj if isinstance(traj, Field) else traj.at(t)
    sched.validate(u.grid)
    radii = sched.radii
    avg = [dg.smoothed_averages(u, r, center) for r in radii]
    out = []
    for k in range(len(radii) - 1):
        R = radii[k + 1]
        big, small = avg[k + 1], avg[k]
        ex = dg.tilt_excess(u, 2.0 * R, big, center).value
        db = float(np.sum((big.b - small.b) ** 2))
        dc = float(np.sum((big.c - small.c) ** 2))
        out.append(dg.InequalityCheck(db, {"excess_term": ex / R ** 4}, f"telescope_b_{k}"))
        out.append(dg.InequalityCheck(dc, {"excess_term": ex / R ** 2}, f"telescope_c_{k}"))
    return out


# -- Holder estimates ----------------------------------------------------------------

@dataclass
class HolderEstimate:
    sigma_x: Optional[float]
    sigma_t: Optional[float]
    seminorm: float
    pair_count: int
    curve: Dict[float, float] = field(default_factory=dict)
    slope: Optional[float] = None
    sigma_t_theory: Optional[float] = None
    details: Dict[str, object] = field(default_factory=dict)


DEFAULT_EXPONENTS = tuple(np.round(np.arange(1, 21) * 0.05, 2))
MAX_PAIRS = 1_000_000
RATIO_LIMIT = 10.0


def _pair_offsets(grid: Grid):
    """Axis and diagonal offsets with dyadic lengths from 2 cells up to L/4."""
    lengths = []
    k = 2
    while k <= grid.nx // 4:
        lengths.append(k)
        k *= 2
    dirs = [(1, 0)] if grid.is_1d else [(1, 0), (0, 1), (1, 1), (1, -1)]
    return [(dx * k, dy * k) for k in lengths for dx, dy in dirs]


def oscillation_profile(u: Field, region=None, max_pairs: int = MAX_PAIRS):
    """Max ``|u(x1) - u(x2)|`` per offset over a strided deterministic pair sample.

    Returns ``(distances, oscillations, pair_count)`` with distances normalized by
    the torus diameter, so every distance lies in ``(0, 1]``.
    """
    g = u.grid
    offsets = _pair_offsets(g)
    v = u.values
    diam = 0.5 * g.length * (1.0 if g.is_1d else math.sqrt(2.0))
    if region is None:
        base = np.arange(g.nx * g.ny)
    else:
        base = member_cells(region, g).index
    inside = None
    if region is not None:
        inside = np.zeros(g.nx * g.ny, dtype=bool)
        inside[base] = True
    stride = max(1, int(math.ceil(len(base) * len(offsets) / max_pairs)))
    base = base[::stride]
    bj, bi = np.divmod(base, g.nx)
    flat = v.reshape(-1)
    dist, osc = [], []
    count = 0
    for ox, oy in offsets:
        pj = (bj + oy) % g.ny
        pi = (bi + ox) % g.nx
        partner = pj * g.nx + pi
        if inside is not None:
            keep = inside[partner]
            diff = np.abs(flat[base[keep]] - flat[partner[keep]])
        else:
            diff = np.abs(flat[base] - flat[partner])
        count += diff.size
        dist.append(math.hypot(ox, oy) * g.h / diam)
        osc.append(float(diff.max()) if diff.size else 0.0)
    return np.array(dist), np.array(osc), count


def _seminorm(dist, osc, sigma):
    return float(np.max(osc / dist ** sigma))


def small_scale_slope(dist, osc, n_scales: int = 3) -> Optional[float]:
    """Log-log slope of the oscillation over the smallest ``n_scales`` dyadic lengths."""
    # axis and diagonal offsets of the same dyadic length form one scale
    keep = []
    for lvl in range(n_scales):
        lo, hi = 2.0 ** lvl, 2.0 ** lvl * math.sqrt(2.0)
        m = (dist / dist.min() >= lo - 1e-9) & (dist / dist.min() <= hi + 1e-9)
        if not m.any():
            break
        keep.append((float(np.mean(dist[m])), float(np.max(osc[m]))))
    keep = [(d, o) for d, o in keep if o > 0]
    if len(keep) < 2:
        return None
    x = np.log([d for d, _ in keep])
    y = np.log([o for _, o in keep])
    return float(np.polyfit(x, y, 1)[0])


def spatial_holder(u: Field, exponent_grid: Sequence[float] = DEFAULT_EXPONENTS, region=None,
                   max_pairs: int = MAX_PAIRS) -> HolderEstimate:
    """Largest candidate exponent whose Holder quotient stays controlled.

    A candidate ``s`` is accepted when ``seminorm(s) / seminorm(s/2) <= 10`` and
    ``s`` does not exceed the small-scale log-log slope of the oscillation (the
    ratio test alone barely reacts to mild singularities on desk-size grids).
    """
    dist, osc, count = oscillation_profile(u, region, max_pairs)
    grid = sorted(float(s) for s in exponent_grid)
    curve = {s: _seminorm(dist, osc, s) for s in grid}
    if not np.any(osc > 0):
        return HolderEstimate(1.0, None, 0.0, count, curve, None)
    slope = small_scale_slope(dist, osc)
    cap = 1.0 if slope is None else slope
    best = None
    for s in grid:
        ratio = curve[s] / _seminorm(dist, osc, 0.5 * s)
        if ratio <= RATIO_LIMIT and s <= cap + 1e-9:
            best = s
    sigma = min(1.0, best if best is not None else grid[0])
    return HolderEstimate(sigma, None, curve.get(sigma, _seminorm(dist, osc, sigma)), count, curve, slope)


def sigma_t_theory(sigma_x: float, d: int = 2) -> float:
    return sigma_x / (2.0 * (sigma_x + d + 1.0))


def _unit_mass_cutoff(grid: Grid, r: float, x):
    cv = CutoffProfile.ball(r, x).sample(grid)
    mass = float(cv.value.sum() * grid.cell_area)
    return cv, mass


def temporal_holder(traj, x, r_grid: Sequence[float], sigma_x: Optional[float] = None,
                    eps_floor: float = dg.EPS_FLOOR) -> HolderEstimate:
    """Empirical time-Holder exponent of ``u(x, .)`` with the mollified bound ingredients.

    The empirical exponent is the log-log slope of the largest point difference
    against the time lag.  For each ``r`` the smoothed values ``int eta_r u`` and the
    Cauchy-Schwarz flux bound ``sup|grad eta_r| (int int u^n)^(1/2) (int int u^n |grad lap u|^2)^(1/2)``
    are reported for every snapshot pair.
    """
    snaps = list(traj.snapshots)
    if len(snaps) < 3:
        raise InsufficientSnapshots(f"{len(snaps)} snapshots, need at least 3")
    g = snaps[0].grid
    d = 1 if g.is_1d else 2
    n = traj.n
    times = np.array([s.time for s in snaps])
    cell = member_cells(Ball(x, 0.5 * g.h * 1.0001), g).index[0]
    pv = np.array([s.values.reshape(-1)[cell] for s in snaps])

    # per-snapshot spatial integrals for the flux bound
    mob_int, diss_int, smooth = {}, {}, {}
    for r in r_grid:
        cv, mass = _unit_mass_cutoff(g, r, x)
        idx = cv.cells.index
        smooth[r] = np.array([float((cv.value * s.values.reshape(-1)[idx]).sum()) * g.cell_area / mass for s in snaps])
        gmax = float(cv.grad_norm().max()) / mass
        mob = [float((np.maximum(s.values.reshape(-1)[idx], 0.0) ** n).sum()) * g.cell_area for s in snaps]
        mob_int[r] = (gmax, np.array(mob))
        diss_int[r] = np.array([
            float((dg._mobility(s.values, n, eps_floor) * dg.grad_laplacian(s).norm_sq()).reshape(-1)[idx].sum()) * g.cell_area
            for s in snaps
        ])

    def cum(y):
        out = np.zeros_like(y)
        out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(times))
        return out

    pairs = [(i, j) for i in range(len(snaps)) for j in range(i + 1, len(snaps))]
    lags = np.array([times[j] - times[i] for i, j in pairs])
    diffs = np.array([abs(pv[j] - pv[i]) for i, j in pairs])
    per_r = {}
    for r in r_grid:
        gmax, mob = mob_int[r]
        cm, cd = cum(mob), cum(diss_int[r])
        sm = smooth[r]
        per_r[r] = {
            "smoothed_diff": np.array([abs(sm[j] - sm[i]) for i, j in pairs]),
            "flux_bound": np.array([gmax * math.sqrt(max(cm[j] - cm[i], 0.0) * max(cd[j] - cd[i], 0.0)) for i, j in pairs]),
        }

    lag_keys = np.unique(np.round(lags / lags.min(), 9))
    dmax = []
    for key in lag_keys:
        m = np.isclose(lags / lags.min(), key, rtol=0, atol=1e-6)
        dmax.append((float(lags[m][0]), float(diffs[m].max())))
    pos = [(lag, v) for lag, v in dmax if v > 0]
    if len(pos) >= 2:
        slope = float(np.polyfit(np.log([p[0] for p in pos]), np.log([p[1] for p in pos]), 1)[0])
        sigma_t = float(min(1.0, max(slope, 1e-12)))
    else:
        slope = None
        sigma_t = 1.0
    seminorm = float(np.max(diffs / lags ** sigma_t)) if diffs.size else 0.0
    theory = None if sigma_x is None else sigma_t_theory(sigma_x, d)
    return HolderEstimate(
        sigma_x, sigma_t, seminorm, len(pairs), {}, slope, theory,
        {"lags": lags, "diffs": diffs, "per_radius": per_r, "max_by_lag": dmax},
    )


# -- regime gate -----------------------------------------------------------------------

@dataclass(frozen=True)
class GateDecision:
    n: float
    accepted: bool
    in_regime: bool
    message: str


def regime_gate(n: float, strict: bool = True) -> GateDecision:
    """Open-interval check on the mobility exponent."""
    inside = in_regime(n)
    bounds = f"({REGIME_LOWER:.5f}..., {REGIME_UPPER:g})"
    if inside:
        return GateDecision(n, True, True, f"n = {n:g} inside {bounds}")
    msg = f"n = {n:g} outside the admissible range {bounds}"
    if strict:
        raise RegimeViolation(msg)
    warnings.warn(msg + "; proceeding without regularity guarantees", stacklevel=2)
    return GateDecision(n, True, False, msg)
