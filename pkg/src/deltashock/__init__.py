"""Riemann problems for a damped triangular system with delta shocks.

Three independent solution layers are provided and cross-checked:

* :mod:`deltashock.core` -- closed-form classical and delta-shock solutions,
* :mod:`deltashock.viscous` -- the self-similar viscous regularization,
* :mod:`deltashock.fv` -- a direct finite-volume simulation.

:mod:`deltashock.harness` runs experiments over all three and writes reports.
"""

from deltashock.core import (
    ExactSolution,
    RiemannProblem,
    StateSample,
    WaveClassification,
    classify,
    delta_weight_at,
    delta_weight_w0,
    entropy_check,
    evaluate_exact,
    exact_solution,
    shock_position,
    shock_speed_sigma,
    similarity_xi,
    undo_damping_transform,
)

__all__ = [
    "ExactSolution",
    "RiemannProblem",
    "StateSample",
    "WaveClassification",
    "classify",
    "delta_weight_at",
    "delta_weight_w0",
    "entropy_check",
    "evaluate_exact",
    "exact_solution",
    "shock_position",
    "shock_speed_sigma",
    "similarity_xi",
    "undo_damping_transform",
]

__version__ = "0.1.0"
