"""Simulation and analysis of arrays of nonlinearly coupled harmonic oscillators."""

__version__ = "0.1.0"

from .coupling import ClassKMinorant, CouplingFunction, Interconnection  # noqa: E402
from .topology import build_graph, is_connected  # noqa: E402
from .averaging import QuadratureSpec, rho, build_averaged_field  # noqa: E402
from .dynamics import IntegratorSpec, SystemSpec, Trajectory, integrate, simulate  # noqa: E402

__all__ = [
    "ClassKMinorant",
    "CouplingFunction",
    "Interconnection",
    "build_graph",
    "is_connected",
    "QuadratureSpec",
    "rho",
    "build_averaged_field",
    "IntegratorSpec",
    "SystemSpec",
    "Trajectory",
    "integrate",
    "simulate",
]
