"""Rolling-contact differential geometry.

Surface patches are orthogonal charts c(a, b) -> R^3 with analytic first
and second partials.  From them we build the Gauss frame, the metric /
curvature / torsion tensors, and the rolling-contact evolution of the
contact coordinates (xi_cf, xi_co) and contact angle psi driven by the
relative angular velocity of the two bodies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "SurfacePatch",
    "HemispherePatch",
    "PlanePatch",
    "GeometricTensors",
    "ChartSingularity",
    "RollingDegenerate",
    "SELECTOR",
    "gauss_frame",
    "tensors",
    "flat_tensors",
    "rotation_psi",
    "rolling_rates",
    "H_matrix",
    "H_matrix_rate",
]

# 2x3 selector picking the tangential rolling components of the relative
# angular velocity expressed in the contact frame
SELECTOR = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0]])


def cross3(u, v) -> np.ndarray:
    """Cross product of two 3-vectors without the generic ufunc overhead."""
    return np.array([
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ])

_COND_MAX = 1e12


class ChartSingularity(RuntimeError):
    """Chart partials degenerate at the queried coordinates."""


class RollingDegenerate(RuntimeError):
    """Relative-curvature matrix is singular (flat-on-flat contact)."""


@dataclass(frozen=True)
class SurfacePatch:
    """Orthogonal chart with rectangular domain [a_min,a_max] x [b_min,b_max]."""

    a_min: float
    a_max: float
    b_min: float
    b_max: float

    def chart(self, xi: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def d_chart(self, xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """First partials (c_a, c_b)."""
        raise NotImplementedError

    def dd_chart(self, xi: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Second partials (c_aa, c_ab, c_bb)."""
        raise NotImplementedError

    def in_domain(self, xi, margin: float = 0.0) -> bool:
        a, b = float(xi[0]), float(xi[1])
        return (
            self.a_min + margin <= a <= self.a_max - margin
            and self.b_min + margin <= b <= self.b_max - margin
        )

    def domain_grid(self, n: int = 50) -> np.ndarray:
        pad_a = 1e-3 * (self.a_max - self.a_min)
        pad_b = 1e-3 * (self.b_max - self.b_min)
        aa = np.linspace(self.a_min + pad_a, self.a_max - pad_a, n)
        bb = np.linspace(self.b_min + pad_b, self.b_max - pad_b, n)
        A, B = np.meshgrid(aa, bb)
        return np.stack([A.ravel(), B.ravel()], axis=1)


@dataclass(frozen=True)
class HemispherePatch(SurfacePatch):
    """Hemispherical fingertip chart of radius R.

    c(a, b) = [-R cos a cos b, R sin a, -R cos a sin b]; the bulge faces
    the +z axis of the fingertip frame for b in (-pi, 0).  The chart poles
    a = +-pi/2 are excluded by a small domain margin.
    """

    radius: float = 0.06

    @staticmethod
    def default(radius: float) -> "HemispherePatch":
        m = 1e-3
        return HemispherePatch(
            a_min=-math.pi / 2 + m, a_max=math.pi / 2 - m, b_min=-math.pi + m, b_max=0.0 - m, radius=radius
        )

    def chart(self, xi):
        R = self.radius
        a, b = float(xi[0]), float(xi[1])
        return np.array([-R * math.cos(a) * math.cos(b), R * math.sin(a), -R * math.cos(a) * math.sin(b)])

    def d_chart(self, xi):
        R = self.radius
        a, b = float(xi[0]), float(xi[1])
        sa, ca, sb, cb = math.sin(a), math.cos(a), math.sin(b), math.cos(b)
        c_a = np.array([R * sa * cb, R * ca, R * sa * sb])
        c_b = np.array([R * ca * sb, 0.0, -R * ca * cb])
        return c_a, c_b

    def dd_chart(self, xi):
        R = self.radius
        a, b = float(xi[0]), float(xi[1])
        sa, ca, sb, cb = math.sin(a), math.cos(a), math.sin(b), math.cos(b)
        c_aa = np.array([R * ca * cb, -R * sa, R * ca * sb])
        c_ab = np.array([-R * sa * sb, 0.0, R * sa * cb])
        c_bb = np.array([R * ca * cb, 0.0, R * ca * sb])
        return c_aa, c_ab, c_bb


@dataclass(frozen=True)
class PlanePatch(SurfacePatch):
    """Flat chart c(a, b) = (a, b, 0) with outward normal +z."""

    def chart(self, xi):
        return np.array([float(xi[0]), float(xi[1]), 0.0])

    def d_chart(self, xi):
        return np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])

    def dd_chart(self, xi):
        z = np.zeros(3)
        return z, z, z


@dataclass(frozen=True)
class GeometricTensors:
    M: np.ndarray  # 2x2 diagonal metric
    K: np.ndarray  # 2x2 curvature
    T: np.ndarray  # 1x2 torsion


def _frame_parts(patch: SurfacePatch, xi):
    c_a, c_b = patch.d_chart(xi)
    na, nb = float(np.linalg.norm(c_a)), float(np.linalg.norm(c_b))
    if na < 1e-12 or nb < 1e-12:
        raise ChartSingularity(f"degenerate chart partials at xi={np.asarray(xi)}")
    n = cross3(c_a, c_b)
    nn = float(np.linalg.norm(n))
    if nn < 1e-15:
        raise ChartSingularity(f"degenerate normal at xi={np.asarray(xi)}")
    return c_a, c_b, na, nb, n, nn


def gauss_frame(patch: SurfacePatch, xi) -> np.ndarray:
    """Orthonormal surface frame [c_a/|c_a|, c_b/|c_b|, (c_a x c_b)/|c_a x c_b|]."""
    c_a, c_b, na, nb, n, nn = _frame_parts(patch, xi)
    return np.column_stack([c_a / na, c_b / nb, n / nn])


def tensors(patch: SurfacePatch, xi) -> GeometricTensors:
    """Metric, curvature, and torsion tensors of the chart at xi."""
    c_a, c_b, na, nb, n, nn = _frame_parts(patch, xi)
    rho1, rho2, rho3 = c_a / na, c_b / nb, n / nn
    c_aa, c_ab, c_bb = patch.dd_chart(xi)

    # d(rho3)/da, d(rho3)/db via the unnormalized normal
    dn_da = cross3(c_aa, c_b) + cross3(c_a, c_ab)
    dn_db = cross3(c_ab, c_b) + cross3(c_a, c_bb)
    proj3 = np.eye(3) - np.outer(rho3, rho3)
    drho3_da = proj3 @ dn_da / nn
    drho3_db = proj3 @ dn_db / nn

    # d(rho1)/da, d(rho1)/db via the tangent partial
    proj1 = np.eye(3) - np.outer(rho1, rho1)
    drho1_da = proj1 @ c_aa / na
    drho1_db = proj1 @ c_ab / na

    tang = np.vstack([rho1, rho2])
    K = tang @ np.column_stack([drho3_da / na, drho3_db / nb])
    T = rho2 @ np.column_stack([drho1_da / na, drho1_db / nb])
    M = np.diag([na, nb])
    return GeometricTensors(M=M, K=K, T=T.reshape(1, 2))


def flat_tensors() -> GeometricTensors:
    """Flat-surface tensor simplification: M = I, K = 0, T = 0."""
    return GeometricTensors(M=np.eye(2), K=np.zeros((2, 2)), T=np.zeros((1, 2)))


def rotation_psi(psi: float) -> np.ndarray:
    """Reflection-type contact-angle matrix (an involution, det = -1)."""
    c, s = math.cos(psi), math.sin(psi)
    return np.array([[c, -s], [-s, -c]])


def _relative_curvature(tf: GeometricTensors, to: GeometricTensors, psi: float) -> np.ndarray:
    Rpsi = rotation_psi(psi)
    return tf.K + Rpsi @ to.K @ Rpsi


def rolling_rates(
    xi_cf,
    xi_co,
    psi: float,
    patch_f: SurfacePatch,
    patch_o: SurfacePatch,
    omega_f,
    omega_o,
    R_pf,
    R_po,
    tensors_o: Optional[GeometricTensors] = None,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Contact-coordinate and contact-angle rates under pure rolling.

    ``omega_f``/``omega_o`` are the body angular velocities in the inertial
    frame; R_pf (fingertip) and R_po (object surface frame) map body frames
    to the inertial frame.  ``tensors_o`` may override the object-side
    tensors (flat-object approximation).
    """
    tf = tensors(patch_f, xi_cf)
    to = tensors_o if tensors_o is not None else tensors(patch_o, xi_co)
    Krel = _relative_curvature(tf, to, psi)
    if np.linalg.cond(Krel) > _COND_MAX:
        raise RollingDegenerate("relative curvature matrix is singular")
    R_fc = gauss_frame(patch_f, xi_cf)
    R_cp = R_fc.T @ np.asarray(R_pf, dtype=float).T
    w_rel = R_cp @ (np.asarray(omega_f, dtype=float) - np.asarray(omega_o, dtype=float))
    Krel_inv_term = np.linalg.solve(Krel, SELECTOR @ w_rel)
    xi_cf_dot = np.linalg.solve(tf.M, Krel_inv_term)
    Rpsi = rotation_psi(psi)
    xi_co_dot = np.linalg.solve(to.M, Rpsi @ Krel_inv_term)
    psi_dot = float((tf.T @ tf.M @ xi_cf_dot + to.T @ to.M @ xi_co_dot)[0])
    return xi_cf_dot, xi_co_dot, psi_dot


def H_matrix(
    xi_cf,
    psi: float,
    patch_f: SurfacePatch,
    tensors_o: GeometricTensors,
) -> np.ndarray:
    """H = M_cf^-1 (K_cf + R_psi K_co R_psi)^-1 SELECTOR (2x3).

    xi_cf_dot = H . R_cp (omega_f - omega_o).
    """
    tf = tensors(patch_f, xi_cf)
    Krel = _relative_curvature(tf, tensors_o, psi)
    if np.linalg.cond(Krel) > _COND_MAX:
        raise RollingDegenerate("relative curvature matrix is singular")
    return np.linalg.solve(tf.M, np.linalg.solve(Krel, SELECTOR))


def H_matrix_rate(
    xi_cf,
    psi: float,
    patch_f: SurfacePatch,
    tensors_o: GeometricTensors,
    xi_cf_dot,
    psi_dot: float,
    step: float = 1e-6,
) -> np.ndarray:
    """Central finite difference of H along (xi_cf_dot, psi_dot)."""
    xi_cf = np.asarray(xi_cf, dtype=float)
    d_xi = np.asarray(xi_cf_dot, dtype=float)
    hp = H_matrix(xi_cf + step * d_xi, psi + step * psi_dot, patch_f, tensors_o)
    hm = H_matrix(xi_cf - step * d_xi, psi - step * psi_dot, patch_f, tensors_o)
    return (hp - hm) / (2.0 * step)
