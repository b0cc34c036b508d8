"""Indirect descent methods for control-affine ODEs.

``pmp_descend`` iterates the adjoint-based PMP update with backtracking;
``monotone_descend`` synthesizes sample-and-hold feedback from finite-difference
probes of the cost-to-go. ``AmariSystem`` and ``LqToySystem`` are the bundled
instances.
"""
from .dynamics import ControlTrajectory, TimeGrid
from .monotone import MonotoneConfig, monotone_descend
from .pmp import PmpConfig, pmp_descend, pmp_residual
from .systems import AmariParams, AmariSystem, LqToyParams, LqToySystem, lq_optimum

__all__ = [
    "AmariParams",
    "AmariSystem",
    "ControlTrajectory",
    "LqToyParams",
    "LqToySystem",
    "MonotoneConfig",
    "PmpConfig",
    "TimeGrid",
    "lq_optimum",
    "monotone_descend",
    "pmp_descend",
    "pmp_residual",
]
