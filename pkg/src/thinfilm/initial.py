"""Initial-condition library: constant, Fourier mode, droplet, random, traveling wave."""
from __future__ import annotations

import numpy as np

from .cutoff import smoothstep
from .grid import Field, Grid


def _periodic_offsets(grid: Grid, center):
    X, Y = grid.coords()
    L = grid.length
    dx = (X - center[0] + 0.5 * L) % L - 0.5 * L
    dy = np.zeros_like(dx) if grid.is_1d else (Y - center[1] + 0.5 * L) % L - 0.5 * L
    return dx, dy


def constant(grid: Grid, value: float = 1.0) -> Field:
    return Field(grid, np.full(grid.shape, float(value)))


def mode(grid: Grid, amplitude: float = 0.1, base: float = 1.0, kx: int = 1, ky: int = 0) -> Field:
    """``base + amplitude * sin(2 pi (kx x + ky y) / L)``."""
    L = grid.length
    return Field.from_function(
        grid, lambda X, Y: base + amplitude * np.sin(2 * np.pi * (kx * X + ky * Y) / L)
    )


def droplet(grid: Grid, amplitude: float = 1.0, center=None, width: float = None, base: float = 0.0) -> Field:
    """Compactly supported bump ``amplitude * eta(|x - c| / (width/2))**2`` on ``base``.

    ``eta`` is the C^3 ball cutoff (1 inside radius width/2, 0 beyond width).
    """
    center = grid.center if center is None else tuple(center)
    width = grid.length / 4 if width is None else width
    dx, dy = _periodic_offsets(grid, center)
    rho = np.hypot(dx, dy) / (0.5 * width)
    eta = np.where(rho <= 1.0, 1.0, smoothstep(2.0 - rho))
    return Field(grid, base + amplitude * eta ** 2)


def random_positive(grid: Grid, seed: int, base: float = 1.0, amplitude: float = 0.3, modes: int = 4) -> Field:
    """Smooth random field from low Fourier modes, kept strictly above ``base - amplitude``."""
    rng = np.random.default_rng(seed)
    X, Y = grid.coords()
    L = grid.length
    acc = np.zeros(grid.shape)
    ks = range(-modes, modes + 1)
    for kx in ks:
        for ky in (ks if not grid.is_1d else [0]):
            if kx == 0 and ky == 0:
                continue
            a, phase = rng.normal(), rng.uniform(0, 2 * np.pi)
            decay = 1.0 / (1.0 + kx * kx + ky * ky)
            acc += a * decay * np.cos(2 * np.pi * (kx * X + ky * Y) / L + phase)
    acc /= np.abs(acc).max()
    return Field(grid, base + amplitude * acc)


def travelwave_speed(n: float, amplitude: float = 1.0) -> float:
    """Front velocity of ``A (x - x_f(t))_+^(3/n)``: ``A^n p (p-1)(p-2)`` with ``p = 3/n``.

    With ``A = 1`` this is ``-c_n`` for the family ``(x + c_n t)_+^(3/n)``.
    """
    p = 3.0 / n
    return amplitude ** n * p * (p - 1.0) * (p - 2.0)


def travelwave1d(grid: Grid, n: float = 1.0, x0: float = None, amplitude: float = 1.0,
                 taper_start: float = None, taper_end: float = None) -> Field:
    """1D profile ``A (x - x0)_+^(3/n)`` tapered smoothly to zero before the seam.

    The taper keeps the periodic extension continuous; the front at ``x0`` sees the
    exact traveling-wave shape until disturbances from the taper reach it.
    """
    if not grid.is_1d:
        raise ValueError("travelwave1d needs a 1D grid (ny = 1)")
    L = grid.length
    x0 = 0.2 * L if x0 is None else x0
    taper_start = 0.7 * L if taper_start is None else taper_start
    taper_end = 0.95 * L if taper_end is None else taper_end
    X, _ = grid.coords()
    s = np.maximum(X - x0, 0.0)
    taper = 1.0 - smoothstep((X - taper_start) / (taper_end - taper_start))
    return Field(grid, amplitude * s ** (3.0 / n) * taper)


def front_position(u: Field, n: float = 1.0, lo: float = 4.0, hi: float = 20.0) -> float:
    """Locate the left contact line by a linear fit of ``u^(n/3)`` near the front.

    The front is found by walking left from the maximum until the profile drops
    below ``1e-3`` of its peak; the fit uses cells between ``lo`` and ``hi`` grid
    widths to the right of that point.
    """
    v = np.maximum(u.values[0], 0.0) ** (n / 3.0)
    h = u.grid.h
    nx = v.size
    k = int(np.argmax(v))
    thresh = 1e-3 * v[k]
    steps = 0
    while v[(k - 1) % nx] > thresh and steps < nx:
        k -= 1
        steps += 1
    # unwrap coordinates so the fit window is contiguous
    x = (np.arange(k, k + nx) * h)
    vv = np.roll(v, -(k % nx))
    sel = (x > k * h + lo * h) & (x < k * h + hi * h)
    slope, intercept = np.polyfit(x[sel], vv[sel], 1)
    return -intercept / slope
