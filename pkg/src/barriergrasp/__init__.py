"""Robust zeroing control barrier functions for sampled-data mechanical
systems, applied to grasp-constraint-satisfying control of a multi-fingered
hand manipulating an object."""

from barriergrasp.barrier import (
    ExtendedClassK,
    PositionConstraint,
    SecondOrderPlant,
    BarrierEvaluation,
    MarginEstimate,
    eval_h_robust,
    eval_barrier,
    barrier_halfspace,
    velocity_envelope,
    estimate_nu,
)
from barriergrasp.qp import QuadraticProgram, QPSolution, solve, filter_control

__version__ = "0.1.0"

__all__ = [
    "ExtendedClassK",
    "PositionConstraint",
    "SecondOrderPlant",
    "BarrierEvaluation",
    "MarginEstimate",
    "eval_h_robust",
    "eval_barrier",
    "barrier_halfspace",
    "velocity_envelope",
    "estimate_nu",
    "QuadraticProgram",
    "QPSolution",
    "solve",
    "filter_control",
]
