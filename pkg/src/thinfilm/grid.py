"""Periodic uniform grids, scalar fields, regions and centered-difference operators.

Cell centers sit at ``x_i = i*h`` (``i = 0..nx-1``) and likewise in y.  Arrays are
stored with shape ``(ny, nx)`` so that the row-major flattening runs fastest in x;
``ny == 1`` flags one-dimensional mode, in which every y-derivative is zero.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import EmptyRegion, RegionTooLarge, RegionError


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    h: float

    def __post_init__(self):
        if self.nx < 8:
            raise ValueError(f"nx must be >= 8, got {self.nx}")
        if self.ny != 1 and self.ny != self.nx:
            raise ValueError("2D grids must be square (nx == ny); use ny=1 for 1D")
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ValueError(f"cell width must be positive, got {self.h}")

    @classmethod
    def square(cls, nx: int, length: float = 1.0) -> "Grid":
        return cls(nx, nx, length / nx)

    @classmethod
    def line(cls, nx: int, length: float = 1.0) -> "Grid":
        return cls(nx, 1, length / nx)

    @property
    def length(self) -> float:
        return self.nx * self.h

    @property
    def is_1d(self) -> bool:
        return self.ny == 1

    @property
    def shape(self):
        return (self.ny, self.nx)

    @property
    def cell_area(self) -> float:
        return self.h if self.is_1d else self.h * self.h

    def coords(self):
        """Cell-center coordinate arrays ``X, Y`` of shape ``(ny, nx)``."""
        x = np.arange(self.nx) * self.h
        y = np.arange(self.ny) * self.h
        return np.meshgrid(x, y)

    @property
    def center(self):
        return (0.5 * self.length, 0.0 if self.is_1d else 0.5 * self.length)


@dataclass(frozen=True, eq=False)
class Field:
    """Scalar grid function at time ``time``.  ``values`` is read-only."""

    grid: Grid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True).reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        if not self.time >= 0:
            raise ValueError("time must be nonnegative")

    @classmethod
    def from_function(cls, grid: Grid, func, time: float = 0.0) -> "Field":
        X, Y = grid.coords()
        return cls(grid, np.broadcast_to(func(X, Y), grid.shape), time)

    def with_values(self, values, time=None) -> "Field":
        return Field(self.grid, values, self.time if time is None else time)

    def shifted(self, kx: int, ky: int = 0) -> "Field":
        """Translate by whole cells: new[j, i] = old[j - ky, i - kx]."""
        return self.with_values(np.roll(self.values, (ky, kx), axis=(0, 1)))

    def mass(self) -> float:
        return float(self.values.sum() * self.grid.cell_area)


# -- derived tensor fields ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class VectorField:
    grid: Grid
    data: np.ndarray  # (2, ny, nx): x, y

    @property
    def x(self):
        return self.data[0]

    @property
    def y(self):
        return self.data[1]

    def norm_sq(self):
        return self.data[0] ** 2 + self.data[1] ** 2


@dataclass(frozen=True, eq=False)
class MatrixField:
    """Symmetric 2x2 field in unique layout (xx, xy, yy)."""

    grid: Grid
    data: np.ndarray

    @property
    def xx(self):
        return self.data[0]

    @property
    def xy(self):
        return self.data[1]

    @property
    def yy(self):
        return self.data[2]

    def trace(self):
        return self.data[0] + self.data[2]

    def norm_sq(self):
        return self.data[0] ** 2 + 2.0 * self.data[1] ** 2 + self.data[2] ** 2


@dataclass(frozen=True, eq=False)
class Tensor3Field:
    """Fully symmetric 2x2x2 field in unique layout (xxx, xxy, xyy, yyy)."""

    grid: Grid
    data: np.ndarray

    def norm_sq(self):
        d = self.data
        return d[0] ** 2 + 3.0 * d[1] ** 2 + 3.0 * d[2] ** 2 + d[3] ** 2

    def abs(self):
        return np.sqrt(self.norm_sq())


# -- stencils ------------------------------------------------------------------------

def _dx(a, h):
    return (np.roll(a, -1, axis=-1) - np.roll(a, 1, axis=-1)) / (2.0 * h)


def _dy(a, h):
    if a.shape[-2] == 1:
        return np.zeros_like(a)
    return (np.roll(a, -1, axis=-2) - np.roll(a, 1, axis=-2)) / (2.0 * h)


def _dxx(a, h):
    return (np.roll(a, -1, axis=-1) - 2.0 * a + np.roll(a, 1, axis=-1)) / (h * h)


def _dyy(a, h):
    if a.shape[-2] == 1:
        return np.zeros_like(a)
    return (np.roll(a, -1, axis=-2) - 2.0 * a + np.roll(a, 1, axis=-2)) / (h * h)


def _values(f):
    return f.values if isinstance(f, Field) else np.asarray(f, dtype=np.float64)


def gradient(f: Field) -> VectorField:
    v, h = f.values, f.grid.h
    return VectorField(f.grid, np.stack([_dx(v, h), _dy(v, h)]))


def laplacian(f: Field) -> Field:
    return f.with_values(laplacian_array(f.values, f.grid.h))


def laplacian_array(v: np.ndarray, h: float) -> np.ndarray:
    return _dxx(v, h) + _dyy(v, h)


def hessian(f: Field) -> MatrixField:
    v, h = f.values, f.grid.h
    return MatrixField(f.grid, np.stack([_dxx(v, h), _dx(_dy(v, h), h), _dyy(v, h)]))


def grad_laplacian(f: Field) -> VectorField:
    return gradient(laplacian(f))


def third_derivatives(f: Field) -> Tensor3Field:
    H = hessian(f).data
    h = f.grid.h
    return Tensor3Field(f.grid, np.stack([_dx(H[0], h), _dy(H[0], h), _dx(H[2], h), _dy(H[2], h)]))


# -- regions -------------------------------------------------------------------------

Point = tuple


def _as_center(c):
    c = tuple(float(v) for v in c)
    if len(c) == 1:
        c = (c[0], 0.0)
    if len(c) != 2:
        raise ValueError("center must have one or two coordinates")
    return c


@dataclass(frozen=True)
class Whole:
    pass


@dataclass(frozen=True)
class Ball:
    center: Point
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _as_center(self.center))
        if not self.radius > 0:
            raise RegionError(f"ball radius must be positive, got {self.radius}")

    @property
    def r_out(self):
        return self.radius


@dataclass(frozen=True)
class Annulus:
    """Cells with ``r_in < |x - center| <= r_out``."""

    center: Point
    r_in: float
    r_out: float

    def __post_init__(self):
        object.__setattr__(self, "center", _as_center(self.center))
        if not (0 < self.r_in < self.r_out):
            raise RegionError(f"annulus needs 0 < r_in < r_out, got {self.r_in}, {self.r_out}")


Region = Union[Whole, Ball, Annulus]


@dataclass(frozen=True, eq=False)
class Cells:
    """Member cells of a region: flat indices plus displacement from the center.

    Ordering is canonical relative to the center, so a whole-cell translation of the
    field together with the center visits the same values in the same order.
    """

    index: np.ndarray
    dx: np.ndarray
    dy: np.ndarray

    def __len__(self):
        return self.index.size


def check_region(region, grid: Grid):
    if isinstance(region, Whole):
        return
    if 2.0 * region.r_out > 0.5 * grid.length * (1 + 1e-12):
        raise RegionTooLarge(
            f"outer radius {region.r_out:g} exceeds L/4 = {grid.length / 4:g}; "
            "region would overlap itself through periodicity"
        )


@functools.lru_cache(maxsize=512)
def region_cells(region, grid: Grid) -> Cells:
    check_region(region, grid)
    if isinstance(region, Whole):
        idx = np.arange(grid.nx * grid.ny)
        X, Y = grid.coords()
        c = grid.center
        cells = Cells(idx, (X - c[0]).ravel(), (Y - c[1]).ravel())
    else:
        h, L = grid.h, grid.length
        cx, cy = region.center[0] % L, region.center[1] % L
        m = int(math.ceil(region.r_out / h)) + 1
        k = np.arange(-m, m + 1)
        ix0 = int(round(cx / h))
        ox = (ix0 * h - cx) + k * h
        if grid.is_1d:
            ky = np.zeros(1, dtype=int)
            oy = np.zeros(1)
            iy0 = 0
        else:
            iy0 = int(round(cy / h))
            ky = k
            oy = (iy0 * h - cy) + k * h
        DX, DY = np.meshgrid(ox, oy)
        KX, KY = np.meshgrid(k, ky)
        d2 = DX * DX + DY * DY
        if isinstance(region, Ball):
            sel = d2 <= region.radius ** 2
        else:
            sel = (d2 > region.r_in ** 2) & (d2 <= region.r_out ** 2)
        ii = (ix0 + KX[sel]) % grid.nx
        jj = (iy0 + KY[sel]) % grid.ny
        cells = Cells(jj * grid.nx + ii, DX[sel], DY[sel])
    for a in (cells.index, cells.dx, cells.dy):
        a.flags.writeable = False
    return cells


def member_cells(region, grid: Grid) -> Cells:
    cells = region_cells(region, grid)
    if len(cells) == 0:
        raise EmptyRegion(f"no cell center lies in {region} (h = {grid.h:g})")
    return cells


def mask(region, grid: Grid) -> np.ndarray:
    out = np.zeros(grid.nx * grid.ny, dtype=bool)
    out[region_cells(region, grid).index] = True
    return out.reshape(grid.shape)


def gather(values, region, grid: Grid) -> np.ndarray:
    cells = member_cells(region, grid)
    return np.asarray(values).reshape(-1)[cells.index]


def integrate(f, region=Whole(), grid: Grid = None) -> float:
    """Midpoint quadrature over the member cells of ``region``.

    ``f`` is a Field or an array shaped like the grid (``grid`` then required).
    """
    if isinstance(f, Field):
        grid = f.grid
    if grid is None:
        raise TypeError("grid is required when integrating a raw array")
    return float(gather(_values(f), region, grid).sum() * grid.cell_area)


def sup_inf(f, region=Whole(), grid: Grid = None):
    if isinstance(f, Field):
        grid = f.grid
    vals = gather(_values(f), region, grid)
    return float(vals.max()), float(vals.min())
