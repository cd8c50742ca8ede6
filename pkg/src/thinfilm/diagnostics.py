"""Functionals, local averages, classifiers and inequality sides for thin-film fields.

Every quantity is a midpoint-rule sum over the member cells of a region (or over
the support of a cutoff), built from the centered stencils in :mod:`thinfilm.grid`.
Fractional and negative powers of ``u`` are evaluated on ``max(u, eps_floor)``;
dissipation-type integrands vanish where ``u <= eps_floor``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .cutoff import CutoffProfile, CutoffValues
from .errors import AlphaOutOfRange, InsufficientSnapshots, NotBadTime
from .grid import (
    Annulus, Ball, Field, Whole, _dx, _dy, gather, gradient, grad_laplacian, hessian,
    member_cells, third_derivatives,
)

EPS_FLOOR = 1e-10
GOOD = "Good"
BAD = "Bad"


# -- result types ------------------------------------------------------------------

@dataclass(frozen=True)
class InequalityCheck:
    """Both sides of an inequality ``lhs <= C * sum(rhs_components)``."""

    lhs: float
    rhs_components: Dict[str, float]
    name: str = ""

    @property
    def rhs(self) -> float:
        return float(sum(self.rhs_components.values()))

    @property
    def ratio(self) -> float:
        if self.lhs == 0:
            return 0.0
        rhs = self.rhs
        return self.lhs / rhs if rhs > 0 else math.inf


@dataclass(frozen=True)
class TimeClass:
    label: str
    sup: float
    inf: float
    region: object

    @property
    def good(self) -> bool:
        return self.label == GOOD


@dataclass(frozen=True)
class AnnulusAverages:
    """Smoothed second/first derivative proxies ``b`` (symmetric) and ``c``."""

    b: np.ndarray
    c: np.ndarray
    r: float
    t: float
    center: tuple = (0.0, 0.0)
    asymmetry: float = 0.0

    @classmethod
    def zero(cls, r=1.0, t=0.0, center=(0.0, 0.0)):
        return cls(np.zeros((2, 2)), np.zeros(2), r, t, center)


@dataclass(frozen=True)
class TiltExcessReport:
    value: float
    b: np.ndarray
    c: np.ndarray
    r: float
    r_ref: float
    t: float


# -- helpers ---------------------------------------------------------------------------

def _pow(u: np.ndarray, p: float, eps: float) -> np.ndarray:
    """``u^p`` with the floor applied for exponents below one."""
    if p < 1.0:
        return np.maximum(u, eps) ** p
    return np.maximum(u, 0.0) ** p


def _grad_arr(a, h):
    return np.stack([_dx(a, h), _dy(a, h)])


def _hessian(a, h):
    return np.stack([
        (np.roll(a, -1, -1) - 2 * a + np.roll(a, 1, -1)) / (h * h),
        _dx(_dy(a, h), h),
        np.zeros_like(a) if a.shape[0] == 1 else (np.roll(a, -1, -2) - 2 * a + np.roll(a, 1, -2)) / (h * h),
    ])


def _third(a, h):
    H = _hessian(a, h)
    return np.stack([_dx(H[0], h), _dy(H[0], h), _dx(H[2], h), _dy(H[2], h)])


def _mat_norm_sq(m):
    return m[0] ** 2 + 2.0 * m[1] ** 2 + m[2] ** 2


def _t3_norm_sq(t):
    return t[0] ** 2 + 3.0 * t[1] ** 2 + 3.0 * t[2] ** 2 + t[3] ** 2


def _flat(a):
    """Reshape ``(k, ny, nx)`` or ``(ny, nx)`` data to ``(k, N)`` / ``(N,)``."""
    a = np.asarray(a)
    return a.reshape(a.shape[0], -1) if a.ndim == 3 else a.reshape(-1)


def _sum_over(integrand, region, grid) -> float:
    return float(gather(integrand, region, grid).sum() * grid.cell_area)


def _cut_sum(integrand, cv: CutoffValues, grid) -> float:
    return float((_flat(integrand)[cv.cells.index]).sum() * grid.cell_area)


def _on(cv: CutoffValues, a):
    return _flat(a)[..., cv.cells.index]


def _offsets(cells, grid):
    """Displacements from the region center with the y-component zeroed in 1D."""
    return cells.dx, (np.zeros_like(cells.dy) if grid.is_1d else cells.dy)


def _mobility(u, n, eps):
    up = np.maximum(u, 0.0)
    return np.where(u > eps, up ** n, 0.0)


# -- global functionals ----------------------------------------------------------------

def energy(u: Field, region=Whole()) -> float:
    """``1/2 * int_R |grad u|^2``."""
    return 0.5 * _sum_over(gradient(u).norm_sq(), region, u.grid)


def dissipation(u: Field, n: float, region=Whole(), eps_floor: float = EPS_FLOOR) -> float:
    """``int_R u^n |grad lap u|^2`` restricted to ``{u > eps_floor}``."""
    g = grad_laplacian(u).norm_sq()
    return _sum_over(_mobility(u.values, n, eps_floor) * g, region, u.grid)


def alpha_range(n: float):
    """Open interval of admissible entropy exponents (0 itself excluded)."""
    return max(-1.0, 0.5 - n), 2.0 - n


def default_alpha(n: float) -> float:
    """Midpoint of the admissible interval, nudged off zero when necessary."""
    lo, hi = alpha_range(n)
    a = 0.5 * (lo + hi)
    if a == 0.0:
        a = 0.5 * (lo + 0.0)
    return a


def check_alpha(alpha: float, n: Optional[float] = None):
    if alpha == 0.0 or alpha == -1.0 or not math.isfinite(alpha):
        raise AlphaOutOfRange(f"alpha = {alpha} is excluded")
    if n is not None:
        lo, hi = alpha_range(n)
        if not (lo < alpha < hi):
            raise AlphaOutOfRange(f"alpha = {alpha} outside ({lo:g}, {hi:g}) for n = {n:g}")


def entropy(u: Field, alpha: float, n: Optional[float] = None, eps_floor: float = EPS_FLOOR) -> float:
    """``int u^(1+alpha) / (alpha (1+alpha))``; ``n`` enables the range check."""
    check_alpha(alpha, n)
    p = 1.0 + alpha
    return _sum_over(_pow(u.values, p, eps_floor), Whole(), u.grid) / (alpha * p)


def entropy_dissipation_rhs(u: Field, n: float, alpha: float, eps_floor: float = EPS_FLOOR) -> float:
    """``int |D^2 u^((n+a+1)/2)|^2 + |grad u^((n+a+1)/4)|^4``."""
    check_alpha(alpha, n)
    h = u.grid.h
    q = n + alpha + 1.0
    w2 = _pow(u.values, q / 2.0, eps_floor)
    w4 = _pow(u.values, q / 4.0, eps_floor)
    g = _grad_arr(w4, h)
    integrand = _mat_norm_sq(_hessian(w2, h)) + (g[0] ** 2 + g[1] ** 2) ** 2
    return _sum_over(integrand, Whole(), u.grid)


def l3_gradient_norm(u: Field) -> float:
    """``int |grad u|^3``."""
    return _sum_over(gradient(u).norm_sq() ** 1.5, Whole(), u.grid)


# -- weighted inequality -------------------------------------------------------------------

def bernis_gruen_terms(u: Field, n: float, cut: CutoffProfile, eps_floor: float = EPS_FLOOR) -> Dict[str, float]:
    """The five cutoff-weighted integrals of the weighted Bernis-Grun inequality.

    ``grad6``: |grad u^((n+2)/6)|^6 eta^6;
    ``mixed``: 36/(n+2)^2 u^(2(n-1)/3) |D^2 u|^2 |grad u^((n+2)/6)|^2 eta^6;
    ``third``: |D^3 u^((n+2)/2)|^2 eta^6;
    ``dissipation``: u^n |grad lap u|^2 eta^6;
    ``cutoff``: u^(n+2) (|grad eta|^6 + eta^3 |D^2 eta|^3 + eta^4 |D^3 eta|^2).
    """
    g = u.grid
    h = g.h
    cv = cut.sample(g)
    v = u.values
    e6 = cv.value ** 6
    w6 = _pow(v, (n + 2.0) / 6.0, eps_floor)
    gw = _on(cv, _grad_arr(w6, h))
    gw2 = gw[0] ** 2 + gw[1] ** 2
    grad6 = gw2 ** 3
    hu = _on(cv, _mat_norm_sq(hessian(u).data))
    pre = 36.0 / (n + 2.0) ** 2 * _on(cv, _pow(v, 2.0 * (n - 1.0) / 3.0, eps_floor))
    mixed = pre * hu * gw2
    third = _on(cv, _t3_norm_sq(_third(_pow(v, (n + 2.0) / 2.0, eps_floor), h)))
    diss = _on(cv, _mobility(v, n, eps_floor) * grad_laplacian(u).norm_sq())
    cutw = (
        cv.grad_norm() ** 6
        + cv.value ** 3 * cv.hess_norm() ** 3
        + cv.value ** 4 * cv.third_norm_sq()
    )
    cutoff = _on(cv, np.maximum(v, 0.0) ** (n + 2.0)) * cutw
    a = g.cell_area
    return {
        "grad6": float((grad6 * e6).sum() * a),
        "mixed": float((mixed * e6).sum() * a),
        "third": float((third * e6).sum() * a),
        "dissipation": float((diss * e6).sum() * a),
        "cutoff": float(cutoff.sum() * a),
    }


def bernis_gruen_sides(u: Field, n: float, cut: CutoffProfile, eps_floor: float = EPS_FLOOR) -> InequalityCheck:
    t = bernis_gruen_terms(u, n, cut, eps_floor)
    return InequalityCheck(
        t["grad6"] + t["mixed"] + t["third"],
        {"dissipation_term": t["dissipation"], "cutoff_term": t["cutoff"]},
        "bernis_gruen",
    )


# -- good / bad times --------------------------------------------------------------------

def classify_values(sup: float, inf: float) -> str:
    return GOOD if sup <= 2.0 * inf else BAD


def classify_time(u: Field, region: Ball) -> TimeClass:
    """Good iff ``max <= 2 min`` over the member cells (equality counts as Good)."""
    vals = gather(u.values, region, u.grid)
    sup, inf = float(vals.max()), float(vals.min())
    return TimeClass(classify_values(sup, inf), sup, inf, region)


# -- smoothed averages and tilt excess --------------------------------------------------

def smoothed_averages(u: Field, r: float, center) -> AnnulusAverages:
    """Annulus-weighted averages ``b = -<grad eta~ (x) grad u>``, ``c = <eta~ grad u>``.

    Brackets denote ``(1 / int eta~) int ...`` with ``eta~`` the annulus kernel at
    radius ``r``.  ``b`` is returned symmetrized; the raw antisymmetric part's
    magnitude is kept in ``asymmetry``.
    """
    cut = CutoffProfile.annulus(r, center)
    cv = cut.sample(u.grid)
    gu = _on(cv, gradient(u).data)
    a = u.grid.cell_area
    mass = float(cv.value.sum() * a)
    raw = -np.einsum("im,jm->ij", cv.grad, gu) * a / mass
    c = (cv.value * gu).sum(axis=1) * a / mass
    b = 0.5 * (raw + raw.T)
    return AnnulusAverages(b, c, r, u.time, cut.center, float(abs(raw[0, 1] - raw[1, 0])))


def averages_rate(u: Field, n: float, r: float, center, eps_floor: float = EPS_FLOOR):
    """Time derivatives ``(b_dot, c_dot)`` of the smoothed averages under the flow.

    ``b_dot_ij = <D^3 eta~_ijk F_k>`` and ``c_dot_i = -<D^2 eta~_ik F_k>`` where
    ``F = u^n grad lap u`` is the flux.
    """
    cut = CutoffProfile.annulus(r, center)
    cv = cut.sample(u.grid)
    a = u.grid.cell_area
    mass = float(cv.value.sum() * a)
    F = _on(cv, _mobility(u.values, n, eps_floor) * grad_laplacian(u).data)
    H, T = cv.hess, cv.third
    bxx = (T[0] * F[0] + T[1] * F[1]).sum()
    bxy = (T[1] * F[0] + T[2] * F[1]).sum()
    byy = (T[2] * F[0] + T[3] * F[1]).sum()
    b_dot = np.array([[bxx, bxy], [bxy, byy]]) * a / mass
    cx = (H[0] * F[0] + H[1] * F[1]).sum()
    cy = (H[1] * F[0] + H[2] * F[1]).sum()
    c_dot = -np.array([cx, cy]) * a / mass
    return b_dot, c_dot


def _affine_residual_sq(u: Field, cells, ref: AnnulusAverages):
    gu = _flat(gradient(u).data)[:, cells.index]
    dx, dy = _offsets(cells, u.grid)
    b, c = ref.b, ref.c
    rx = gu[0] - (b[0, 0] * dx + b[0, 1] * dy) - c[0]
    ry = gu[1] - (b[1, 0] * dx + b[1, 1] * dy) - c[1]
    if u.grid.is_1d:
        ry = np.zeros_like(ry)
    return rx * rx + ry * ry


def tilt_excess(u: Field, r: float, ref: AnnulusAverages, center) -> TiltExcessReport:
    """``1/2 int_{B_r} |grad u - b x - c|^2`` with ``x`` measured from ``center``."""
    region = Ball(center, r)
    cells = member_cells(region, u.grid)
    val = 0.5 * float(_affine_residual_sq(u, cells, ref).sum() * u.grid.cell_area)
    return TiltExcessReport(val, ref.b, ref.c, r, ref.r, u.time)


# -- local inequalities -----------------------------------------------------------------

def _grad6_integrand(u: Field, n: float, eps: float):
    w = _pow(u.values, (n + 2.0) / 6.0, eps)
    g = _grad_arr(w, u.grid.h)
    return (g[0] ** 2 + g[1] ** 2) ** 3


def morrey_sup_check(u: Field, n: float, r: float, delta: float, center,
                     eps_floor: float = EPS_FLOOR) -> InequalityCheck:
    """Sup bound by the gradient-power integral on ``B_2r`` split at radius ``delta r``.

    Requires a Bad time on ``B_2r``.  A field vanishing on ``B_2r`` satisfies the
    bound trivially and is returned without classification.
    """
    if not (0 < delta <= 1):
        raise ValueError("delta must lie in (0, 1]")
    g = u.grid
    d = 1 if g.is_1d else 2
    outer = Ball(center, 2.0 * r)
    vals = gather(u.values, outer, g)
    sup = float(vals.max())
    dens = _grad6_integrand(u, n, eps_floor)
    inner_r = delta * r
    if inner_r < 2.0 * r:
        ann = _sum_over(dens, Annulus(center, inner_r, 2.0 * r), g)
    else:
        ann = 0.0
    core = _sum_over(dens, Ball(center, inner_r), g)
    if sup > 0:
        tc = classify_values(sup, float(vals.min()))
        if tc != BAD:
            raise NotBadTime(f"B_2r is a good time here (sup {sup:.6g}, inf {float(vals.min()):.6g})")
    lhs = max(sup, 0.0) ** (n + 2.0)
    w = r ** (6 - d)
    return InequalityCheck(lhs, {"annulus_term": w * ann, "core_term": w * delta * core}, "morrey_sup")


def poincare_checks(u: Field, r: float, center, ref: Optional[AnnulusAverages] = None) -> List[InequalityCheck]:
    """Poincare-type bounds on ``B_2r \\ B_r`` and on the ball ``B_2r``.

    Returned in order: annulus gradient, annulus Hessian, ball Poincare-Sobolev,
    ball gradient, ball Hessian.
    """
    g = u.grid
    ref = smoothed_averages(u, r, center) if ref is None else ref
    ann = Annulus(center, r, 2.0 * r)
    ball = Ball(center, 2.0 * r)
    H = hessian(u).data
    D = H - np.array([ref.b[0, 0], ref.b[0, 1], ref.b[1, 1]])[:, None, None]
    if g.is_1d:
        D[1:] = 0.0
    d2 = _mat_norm_sq(D)
    t3 = third_derivatives(u).norm_sq()
    a = g.cell_area

    def grad_term(region):
        cells = member_cells(region, g)
        return float(_affine_residual_sq(u, cells, ref).sum() * a)

    ann_g, ann_d2, ann_t3 = grad_term(ann), _sum_over(d2, ann, g), _sum_over(t3, ann, g)
    ball_g, ball_d2, ball_t3 = grad_term(ball), _sum_over(d2, ball, g), _sum_over(t3, ball, g)
    ball_t1 = _sum_over(np.sqrt(t3), ball, g)
    r2 = r * r
    return [
        InequalityCheck(ann_g, {"hessian_term": r2 * ann_d2}, "poincare_grad_annulus"),
        InequalityCheck(ann_d2, {"third_term": r2 * ann_t3}, "poincare_hess_annulus"),
        InequalityCheck(ball_d2, {"third_l1_sq": ball_t1 ** 2}, "poincare_sobolev_ball"),
        InequalityCheck(ball_g, {"hessian_term": r2 * ball_d2}, "poincare_grad_ball"),
        InequalityCheck(ball_d2, {"third_term": r2 * ball_t3}, "poincare_hess_ball"),
    ]


def third_derivative_check(u: Field, r: float, center) -> InequalityCheck:
    """``int_{B_r} |D^3 u|^2`` against ``int_{B_2r} |grad lap u|^2`` plus the annulus term."""
    g = u.grid
    t3 = third_derivatives(u).norm_sq()
    lhs = _sum_over(t3, Ball(center, r), g)
    diss = _sum_over(grad_laplacian(u).norm_sq(), Ball(center, 2.0 * r), g)
    ann = _sum_over(t3, Annulus(center, r, 2.0 * r), g)
    return InequalityCheck(lhs, {"dissipation_term": diss, "annulus_term": ann}, "third_derivative")


def second_derivative_check(u: Field, n: float, cut: CutoffProfile, eps_floor: float = EPS_FLOOR) -> InequalityCheck:
    """Weighted Hessian bound with ``u^(n-2)`` evaluated on the floored field."""
    g = u.grid
    cv = cut.sample(g)
    v = u.values
    un = _on(cv, np.maximum(v, 0.0) ** n)
    gu = gradient(u).norm_sq()
    e = cv.value
    lhs = (un * _on(cv, hessian(u).norm_sq()) * e * e).sum()
    diss = _on(cv, _mobility(v, n, eps_floor) * grad_laplacian(u).norm_sq()).sum()
    grad_t = (un * _on(cv, gu) * (e ** 4 + cv.grad_norm() ** 2)).sum()
    deg = (_on(cv, _pow(v, n - 2.0, eps_floor) * gu * gu) * e * e).sum()
    a = g.cell_area
    return InequalityCheck(
        float(lhs * a),
        {"dissipation_term": float(diss * a), "gradient_term": float(grad_t * a), "degenerate_term": float(deg * a)},
        "second_derivative",
    )


# -- hole filling ------------------------------------------------------------------------

@dataclass
class HoleFillingReport:
    """Raw ingredients of the hole-filling estimate between ``t1`` and ``t2``.

    Excess terms use the reference averages at radius ``r`` of the same snapshot.
    Bulk terms are integrals over ``B_2r`` integrated in time by the trapezoid rule,
    each snapshot weighted by its Good/Bad classification on ``B_2r``.
    """

    t1: float
    t2: float
    r: float
    delta: float
    excess_t2_inner: float
    excess_t1_outer: float
    good_dissipation: float
    good_third: float
    bad_dissipation: float
    bad_gradient6: float
    times: np.ndarray = field(default_factory=lambda: np.empty(0))
    labels: List[str] = field(default_factory=list)

    def as_dict(self) -> Dict[str, float]:
        keys = ("excess_t2_inner", "excess_t1_outer", "good_dissipation",
                "good_third", "bad_dissipation", "bad_gradient6")
        return {k: getattr(self, k) for k in keys}


def _trapezoid(t, y):
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(t)))


def hole_filling_sides(traj, t1: float, t2: float, r: float, delta: float, center,
                       n: Optional[float] = None, eps_floor: float = EPS_FLOOR) -> HoleFillingReport:
    if not t1 < t2:
        raise ValueError("need t1 < t2")
    n = traj.n if n is None else n
    snaps = traj.window(t1, t2)
    if len(snaps) < 3:
        raise InsufficientSnapshots(f"{len(snaps)} snapshots in [{t1}, {t2}], need at least 3")
    first, last = snaps[0], snaps[-1]
    ex2 = tilt_excess(last, delta * r, smoothed_averages(last, r, center), center).value
    ex1 = tilt_excess(first, 2.0 * r, smoothed_averages(first, r, center), center).value
    ball = Ball(center, 2.0 * r)
    times, labels = [], []
    gd, gt, bd, bg = [], [], [], []
    for s in snaps:
        tc = classify_time(s, ball)
        mob = _mobility(s.values, n, eps_floor)
        diss = _sum_over(mob * grad_laplacian(s).norm_sq(), ball, s.grid)
        if tc.good:
            gd.append(diss)
            gt.append(_sum_over(mob * third_derivatives(s).norm_sq(), ball, s.grid))
            bd.append(0.0)
            bg.append(0.0)
        else:
            gd.append(0.0)
            gt.append(0.0)
            bd.append(diss)
            bg.append(_sum_over(_grad6_integrand(s, n, eps_floor), ball, s.grid))
        times.append(s.time)
        labels.append(tc.label)
    return HoleFillingReport(
        t1, t2, r, delta, ex2, ex1,
        _trapezoid(times, gd), _trapezoid(times, gt), _trapezoid(times, bd), _trapezoid(times, bg),
        np.array(times), labels,
    )
