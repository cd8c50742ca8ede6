"""Numerical laboratory for the thin-film equation ``u_t = -div(u^n grad lap u)``.

Submodules: ``grid`` (periodic grids, stencils, regions), ``cutoff`` (C^3 cutoffs),
``solver`` (explicit and semi-implicit time stepping), ``diagnostics`` (functionals
and inequality sides), ``regularity`` (excess sweeps, decay fits, Holder estimates),
``io_store`` (snapshots, CSV tables, configs) and ``cli``.
"""
from ._kernels import BACKEND
from .grid import Annulus, Ball, Field, Grid, Whole
from .solver import MobilityModel, SolverConfig, Trajectory, run, step

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "Annulus", "Ball", "Field", "Grid", "Whole",
    "MobilityModel", "SolverConfig", "Trajectory", "run", "step", "__version__",
]
