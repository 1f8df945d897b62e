"""Robust zeroing barrier machinery for relative-degree-two plants.

A position constraint h(q) >= 0 on a second-order plant
``qdd = F(x) + G_in(x) u`` is enforced through the barrier
``B = hdot + alpha1(h - delta) - beta``; keeping B >= 0 keeps the
(margin-tightened) constraint set forward invariant.  For sampled-data
implementation the admissible-control condition is tightened by a margin
nu(T) that absorbs inter-sample drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

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
]

_FD_STEP = 1e-6  # central-difference step for gradient/Hessian fallbacks


@dataclass(frozen=True)
class ExtendedClassK:
    """Strictly increasing scalar function with alpha(0) = 0.

    Three built-in kinds are supported: ``linear`` (gain * s),
    ``cubic`` (gain * s^3) and ``arctan`` (gain * atan(s)).  All three are
    smooth everywhere, so they qualify wherever continuous differentiability
    of the barrier condition is required.
    """

    kind: str
    gain: float

    def __post_init__(self):
        if self.kind not in ("linear", "cubic", "arctan"):
            raise ValueError(f"unknown class-K kind {self.kind!r}")
        if not self.gain > 0:
            raise ValueError("class-K gain must be positive")

    def __call__(self, s):
        if self.kind == "linear":
            return self.gain * s
        if self.kind == "cubic":
            return self.gain * s**3
        return self.gain * np.arctan(s)

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "linear":
            out = np.full_like(s, self.gain)
        elif self.kind == "cubic":
            out = 3.0 * self.gain * s**2
        else:
            out = self.gain / (1.0 + s**2)
        return out[()]


def _fd_grad(h: Callable, q: np.ndarray) -> np.ndarray:
    g = np.empty_like(q, dtype=float)
    for j in range(q.size):
        e = np.zeros_like(q, dtype=float)
        e[j] = _FD_STEP
        g[j] = (h(q + e) - h(q - e)) / (2.0 * _FD_STEP)
    return g


def _fd_hess(h: Callable, q: np.ndarray) -> np.ndarray:
    n = q.size
    H = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = _FD_STEP
        H[:, j] = (_fd_grad(h, q + e) - _fd_grad(h, q - e)) / (2.0 * _FD_STEP)
    return 0.5 * (H + H.T)


@dataclass(frozen=True)
class PositionConstraint:
    """Scalar constraint h(q) >= 0 with robustness margins.

    ``h`` depends on configuration only (relative degree two w.r.t. a
    second-order plant).  ``grad_h``/``hess_h`` may be omitted for user
    constraints, in which case central differences are used.
    """

    h: Callable[[np.ndarray], float]
    grad_h: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hess_h: Optional[Callable[[np.ndarray], np.ndarray]] = None
    delta: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        if self.delta < 0 or self.beta < 0:
            raise ValueError("robustness margins must be nonnegative")

    def gradient(self, q: np.ndarray) -> np.ndarray:
        q = np.atleast_1d(np.asarray(q, dtype=float))
        if self.grad_h is not None:
            return np.atleast_1d(np.asarray(self.grad_h(q), dtype=float))
        return _fd_grad(self.h, q)

    def hessian(self, q: np.ndarray) -> np.ndarray:
        q = np.atleast_1d(np.asarray(q, dtype=float))
        if self.hess_h is not None:
            return np.atleast_2d(np.asarray(self.hess_h(q), dtype=float))
        return _fd_hess(self.h, q)

    @staticmethod
    def affine(w: Sequence[float], c: float, delta: float = 0.0, beta: float = 0.0) -> "PositionConstraint":
        """Constraint h(q) = w . q + c (zero Hessian)."""
        w = np.atleast_1d(np.asarray(w, dtype=float))
        return PositionConstraint(
            h=lambda q: float(w @ np.atleast_1d(q) + c),
            grad_h=lambda q: w,
            hess_h=lambda q: np.zeros((w.size, w.size)),
            delta=delta,
            beta=beta,
        )


@dataclass(frozen=True)
class SecondOrderPlant:
    """Acceleration-level affine plant qdd = F(x) + G_in(x) u (+ d)."""

    dim_q: int
    dim_u: int
    drift_accel: Callable[[np.ndarray], np.ndarray]
    input_matrix: Callable[[np.ndarray], np.ndarray]
    disturbance_accel: Optional[Callable[[float, np.ndarray], np.ndarray]] = None

    def split(self, x: np.ndarray):
        x = np.asarray(x, dtype=float)
        return x[: self.dim_q], x[self.dim_q :]


@dataclass(frozen=True)
class BarrierEvaluation:
    h_rob: float
    hdot: float
    B_rob: float
    row: Optional[np.ndarray] = None
    rhs: Optional[float] = None


def eval_h_robust(c: PositionConstraint, q) -> float:
    """h(q) - delta."""
    q = np.atleast_1d(np.asarray(q, dtype=float))
    return float(c.h(q)) - c.delta


def eval_barrier(c: PositionConstraint, alpha1: ExtendedClassK, x) -> BarrierEvaluation:
    """Evaluate h~, hdot, and B~ = hdot + alpha1(h~) - beta at state x = (q, qdot)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size % 2 != 0:
        raise ValueError("state must stack (q, qdot) with equal lengths")
    p = x.size // 2
    q, qd = x[:p], x[p:]
    h_rob = eval_h_robust(c, q)
    hdot = float(c.gradient(q) @ qd)
    B_rob = hdot + float(alpha1(h_rob)) - c.beta
    return BarrierEvaluation(h_rob=h_rob, hdot=hdot, B_rob=B_rob)


def barrier_halfspace(
    plant: SecondOrderPlant,
    c: PositionConstraint,
    alpha1: ExtendedClassK,
    alpha2: ExtendedClassK,
    nu_hat: float,
    x,
) -> tuple[np.ndarray, float]:
    """Half-space (a, b) with a.u >= b encoding the sampled-data barrier condition.

    The condition is L_f B~ + L_g B~ u + alpha2(B~) >= nu_hat with the
    relative-degree-two chain rule
    L_f B~ = qd' Hess(h) qd + grad(h).F + alpha1'(h~) grad(h).qd
    and L_g B~ = grad(h)' G_in.
    """
    if nu_hat < 0:
        raise ValueError("nu_hat must be nonnegative")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    q, qd = plant.split(x)
    if q.size != plant.dim_q:
        raise ValueError("state dimension does not match plant")
    ev = eval_barrier(c, alpha1, x)
    grad = c.gradient(q)
    hess = c.hessian(q)
    F = np.atleast_1d(np.asarray(plant.drift_accel(x), dtype=float))
    G = np.atleast_2d(np.asarray(plant.input_matrix(x), dtype=float))
    if G.shape != (plant.dim_q, plant.dim_u):
        G = G.reshape(plant.dim_q, plant.dim_u)
    if not (np.all(np.isfinite(F)) and np.all(np.isfinite(G))):
        raise FloatingPointError("non-finite plant drift or input matrix")
    lf_B = float(qd @ hess @ qd + grad @ F + alpha1.derivative(ev.h_rob) * (grad @ qd))
    row = grad @ G
    rhs = nu_hat - lf_B - float(alpha2(ev.B_rob))
    return np.atleast_1d(row), float(rhs)


def velocity_envelope(
    c_min: PositionConstraint,
    c_max: PositionConstraint,
    alpha1: ExtendedClassK,
    q_grid: Sequence[float],
) -> list[tuple[float, float, float]]:
    """Velocity bounds induced by B~ >= 0 for a scalar configuration.

    At each q the admissible velocities are
    -alpha1(h_min(q) - delta) <= v <= alpha1(h_max(q) - delta).
    """
    out = []
    for q in q_grid:
        qa = np.atleast_1d(float(q))
        lo = -float(alpha1(eval_h_robust(c_min, qa)))
        hi = float(alpha1(eval_h_robust(c_max, qa)))
        out.append((float(q), lo, hi))
    if out and all(lo > hi for _, lo, hi in out):
        raise ValueError("empty admissible interval on the whole grid")
    return out


@dataclass(frozen=True)
class MarginEstimate:
    """Sampling-margin constants and the induced nu(T).

    nu(T) = (a/b) (exp(bT) - 1) with a = (c1 + c2 + c3 c4) c5 and
    b = c1 + c2 c4.  The constants are randomized finite-difference
    estimates, not certified bounds.
    """

    c1: float
    c2: float
    c3: float
    c4: float
    c5: float

    @property
    def a_coef(self) -> float:
        return (self.c1 + self.c2 + self.c3 * self.c4) * self.c5

    @property
    def b_coef(self) -> float:
        return self.c1 + self.c2 * self.c4

    def nu_of_T(self, T: float) -> float:
        a, b = self.a_coef, self.b_coef
        if b <= 0.0:
            return a * T  # limit of (a/b)(e^{bT}-1) as b -> 0
        return (a / b) * math.expm1(b * T)


def estimate_nu(
    plant: SecondOrderPlant,
    constraints: Sequence[PositionConstraint],
    alpha1: ExtendedClassK,
    alpha2: ExtendedClassK,
    region: Callable[[np.random.Generator], np.ndarray],
    u_bound: float,
    T: float,
    n_samples: int = 2000,
    rel_step: float = 1e-5,
    seed: int = 0,
) -> MarginEstimate:
    """Estimate the sampled-data margin constants by randomized sampling.

    c1, c2, c3 are max finite-difference Lipschitz quotients of L_f B~,
    alpha2(B~), and L_g B~ over perturbed state pairs drawn from ``region``;
    c5 bounds the closed-loop state speed for ||u|| <= c4 = ``u_bound``.
    """
    if T < 0:
        raise ValueError("T must be nonnegative")
    rng = np.random.default_rng(seed)
    xs = np.asarray([region(rng) for _ in range(n_samples)], dtype=float)
    if xs.ndim != 2:
        raise ValueError("region sampler must return flat state vectors")
    span = xs.max(axis=0) - xs.min(axis=0)
    if float(np.max(span)) == 0.0:
        raise ValueError("degenerate sampling region (all samples identical)")
    step = rel_step * np.maximum(span, 1.0)

    def lf_lg(c, x):
        q, qd = plant.split(x)
        ev = eval_barrier(c, alpha1, x)
        grad = c.gradient(q)
        hess = c.hessian(q)
        F = np.atleast_1d(np.asarray(plant.drift_accel(x), dtype=float))
        G = np.atleast_2d(np.asarray(plant.input_matrix(x), dtype=float)).reshape(plant.dim_q, plant.dim_u)
        lf = float(qd @ hess @ qd + grad @ F + alpha1.derivative(ev.h_rob) * (grad @ qd))
        return lf, grad @ G, ev.B_rob

    c1 = c2 = c3 = 0.0
    for x in xs:
        dx = rng.standard_normal(x.size)
        dx *= step / max(np.linalg.norm(dx), 1e-300)
        y = x + dx
        dist = float(np.linalg.norm(dx))
        for c in constraints:
            lfx, lgx, Bx = lf_lg(c, x)
            lfy, lgy, By = lf_lg(c, y)
            c1 = max(c1, abs(lfx - lfy) / dist)
            c2 = max(c2, abs(float(alpha2(Bx)) - float(alpha2(By))) / dist)
            c3 = max(c3, float(np.linalg.norm(lgx - lgy)) / dist)

    c5 = 0.0
    for x in xs:
        q, qd = plant.split(x)
        F = np.atleast_1d(np.asarray(plant.drift_accel(x), dtype=float))
        G = np.atleast_2d(np.asarray(plant.input_matrix(x), dtype=float)).reshape(plant.dim_q, plant.dim_u)
        u = rng.standard_normal(plant.dim_u)
        u *= u_bound / max(np.linalg.norm(u), 1e-300)
        xdot = np.concatenate([qd, F + G @ u])
        c5 = max(c5, float(np.linalg.norm(xdot)))

    return MarginEstimate(c1=c1, c2=c2, c3=c3, c4=float(u_bound), c5=c5)
