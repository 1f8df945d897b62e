"""Grasp constraint rows for the safety-filter QP.

Every grasp constraint is reduced to a half-space on the joint torque
``u``.  The reduction exploits that contact force, joint acceleration,
object acceleration, and contact-coordinate acceleration are all affine
in ``u`` once the coupled hand-object dynamics are resolved:

    f_c    = F0 + F1 u
    qdd    = Q0 + Q1 u
    xdd_o  = X0 + X1 u
    xidd_i = C0_i + C1_i u

Friction rows keep the contact forces inside an inscribed polyhedral
cone; joint and contact-location rows enforce the sampled-data barrier
condition  hdd + alpha1'(h_rob) hdot + alpha2(B_rob) >= nu_hat.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from barriergrasp.barrier import ExtendedClassK

__all__ = [
    "GraspMatrices",
    "ConstraintBlocks",
    "pyramid_matrix",
    "affine_decomposition",
    "friction_rows",
    "joint_rows",
    "rolling_rows",
    "assemble_rows",
]


@dataclass
class GraspMatrices:
    """Dynamic and kinematic matrices of one hand-object evaluation.

    All quantities may be exact or estimated; the row builders are
    agnostic.  Per-contact lists are indexed like the contacts.
    ``Js_w`` holds the angular rows of each finger's spatial Jacobian
    embedded in full joint coordinates (3 x dof), ``Jsdot_w_dq`` the
    matching drift term ``[0 I] Jdot_s qdot``.  ``H_drift_i`` is
    ``(Hdot R_cp + H Rdot_cp)(w_f - w_o)`` per contact.
    """

    M_h: np.ndarray
    C_h: np.ndarray
    dq: np.ndarray
    tau_e: np.ndarray
    J_h: np.ndarray
    Jdot_h_dq: np.ndarray
    grasp_map: np.ndarray
    Gdot_T_xdot: np.ndarray
    M_o: np.ndarray
    C_o: np.ndarray
    x_o_dot: np.ndarray
    w_e: np.ndarray
    R_cp: list
    H: list
    H_drift: list
    Js_w: list
    Jsdot_w_dq: list

    @property
    def dof(self) -> int:
        return self.M_h.shape[0]

    @property
    def n_contacts(self) -> int:
        return len(self.R_cp)


def pyramid_matrix(mu_hat: float, sides: int) -> np.ndarray:
    """Rows of the inscribed friction pyramid in the contact frame.

    Each row n_k satisfies ||n_k|| = 1 and n_k . f >= 0 for every force
    inside the pyramid; the pyramid is inscribed in the cone of friction
    coefficient mu_hat, so the rows are conservative.
    """
    if sides < 3:
        raise ValueError("pyramid needs at least 3 sides")
    if mu_hat <= 0:
        raise ValueError("friction coefficient must be positive")
    shrink = mu_hat * math.cos(math.pi / sides)
    scale = 1.0 / math.sqrt(1.0 + shrink * shrink)
    rows = np.zeros((sides, 3))
    for k in range(sides):
        theta = 2.0 * math.pi * k / sides + math.pi / sides
        rows[k] = scale * np.array([-math.cos(theta), -math.sin(theta), shrink])
    return rows


def affine_decomposition(mat: GraspMatrices):
    """(F0, F1), (Q0, Q1), (X0, X1), and per-contact (C0_i, C1_i)."""
    M_h, J_h, Gm = mat.M_h, mat.J_h, mat.grasp_map
    Mh_inv_Jt = np.linalg.solve(M_h, J_h.T)
    Mo_inv_G = np.linalg.solve(mat.M_o, Gm)
    B_ho = J_h @ Mh_inv_Jt + Gm.T @ Mo_inv_G

    bias = -mat.C_h @ mat.dq + mat.tau_e
    rhs0 = (J_h @ np.linalg.solve(M_h, bias) + mat.Jdot_h_dq
            - mat.Gdot_T_xdot + Mo_inv_G.T @ (mat.C_o @ mat.x_o_dot - mat.w_e))
    F0 = np.linalg.solve(B_ho, rhs0)
    F1 = np.linalg.solve(B_ho, Mh_inv_Jt.T)

    Q0 = np.linalg.solve(M_h, bias - J_h.T @ F0)
    Q1 = np.linalg.solve(M_h, np.eye(mat.dof) - J_h.T @ F1)
    X0 = np.linalg.solve(mat.M_o, Gm @ F0 + mat.w_e - mat.C_o @ mat.x_o_dot)
    X1 = Mo_inv_G @ F1

    contact_affine = []
    for i in range(mat.n_contacts):
        HR = mat.H[i] @ mat.R_cp[i]
        C1 = HR @ (mat.Js_w[i] @ Q1 - X1[3:])
        C0 = mat.H_drift[i] + HR @ (mat.Jsdot_w_dq[i] + mat.Js_w[i] @ Q0 - X0[3:])
        contact_affine.append((C0, C1))
    return (F0, F1), (Q0, Q1), (X0, X1), contact_affine


@dataclass
class ConstraintBlocks:
    """Stacked half-space rows A u >= b, grouped by constraint family."""

    A_friction: np.ndarray
    b_friction: np.ndarray
    A_joint: np.ndarray
    b_joint: np.ndarray
    A_rolling: np.ndarray
    b_rolling: np.ndarray

    @property
    def A(self) -> np.ndarray:
        return np.vstack([self.A_friction, self.A_joint, self.A_rolling])

    @property
    def b(self) -> np.ndarray:
        return np.concatenate([self.b_friction, self.b_joint, self.b_rolling])

    def rows(self):
        A, b = self.A, self.b
        return [(A[k], b[k]) for k in range(A.shape[0])]


def friction_rows(mat: GraspMatrices, F0, F1, mu_hat: float, sides: int,
                  epsilon: float):
    """No-slip rows: Lambda R_cp f_c >= epsilon per contact."""
    Lam = pyramid_matrix(mu_hat, sides)
    n = mat.n_contacts
    A = np.zeros((sides * n, mat.dof))
    b = np.zeros(sides * n)
    for i in range(n):
        rows = Lam @ mat.R_cp[i]
        sl = slice(3 * i, 3 * i + 3)
        A[sides * i:sides * (i + 1)] = rows @ F1[sl]
        b[sides * i:sides * (i + 1)] = epsilon - rows @ F0[sl]
    return A, b


def joint_rows(mat: GraspMatrices, Q0, Q1, q, dq, q_min, q_max,
               delta: float, beta: float,
               alpha1: ExtendedClassK, alpha2: ExtendedClassK, nu_hat: float):
    """Barrier rows keeping every joint inside its limit band."""
    m = mat.dof
    A = np.zeros((2 * m, m))
    b = np.zeros(2 * m)
    for j in range(m):
        # lower limit: h = q_j - q_min_j, hdot = dq_j
        h_rob = q[j] - q_min[j] - delta
        hdot = dq[j]
        B_rob = hdot + alpha1(h_rob) - beta
        A[j] = Q1[j]
        b[j] = -Q0[j] - alpha1.derivative(h_rob) * hdot - alpha2(B_rob) + nu_hat
        # upper limit: h = q_max_j - q_j, hdot = -dq_j
        h_rob = q_max[j] - q[j] - delta
        hdot = -dq[j]
        B_rob = hdot + alpha1(h_rob) - beta
        A[m + j] = -Q1[j]
        b[m + j] = Q0[j] - alpha1.derivative(h_rob) * hdot - alpha2(B_rob) + nu_hat
    return A, b


_SIGNS = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])


def rolling_rows(mat: GraspMatrices, contact_affine, xi_cf, xi_cf_dot,
                 contact_box, delta: float, beta: float,
                 alpha1: ExtendedClassK, alpha2: ExtendedClassK, nu_hat: float):
    """Barrier rows keeping each contact inside the fingertip workspace box."""
    a_min, a_max, b_min, b_max = [float(v) for v in contact_box]
    bounds = np.array([a_min, -a_max, b_min, -b_max])
    n = mat.n_contacts
    A = np.zeros((4 * n, mat.dof))
    b = np.zeros(4 * n)
    for i in range(n):
        C0, C1 = contact_affine[i]
        for l in range(4):
            s = _SIGNS[l]
            # h = s . xi - bound (bounds already sign-folded)
            h_rob = float(s @ xi_cf[i]) - bounds[l] - delta
            hdot = float(s @ xi_cf_dot[i])
            B_rob = hdot + alpha1(h_rob) - beta
            A[4 * i + l] = s @ C1
            b[4 * i + l] = (-float(s @ C0) - alpha1.derivative(h_rob) * hdot
                            - alpha2(B_rob) + nu_hat)
    return A, b


def assemble_rows(mat: GraspMatrices, q, dq, xi_cf, xi_cf_dot, *,
                  mu_hat: float, sides: int, epsilon: float,
                  q_min, q_max, delta_q: float, beta_q: float,
                  contact_box, delta_r: float, beta_r: float,
                  alpha1: ExtendedClassK, alpha2: ExtendedClassK,
                  nu_hat: float) -> ConstraintBlocks:
    """All grasp constraint half-spaces for one control sample."""
    (F0, F1), (Q0, Q1), (X0, X1), contact_affine = affine_decomposition(mat)
    A_f, b_f = friction_rows(mat, F0, F1, mu_hat, sides, epsilon)
    A_q, b_q = joint_rows(mat, Q0, Q1, q, dq, q_min, q_max,
                          delta_q, beta_q, alpha1, alpha2, nu_hat)
    A_r, b_r = rolling_rows(mat, contact_affine, xi_cf, xi_cf_dot,
                            contact_box, delta_r, beta_r, alpha1, alpha2, nu_hat)
    return ConstraintBlocks(A_friction=A_f, b_friction=b_f,
                            A_joint=A_q, b_joint=b_q,
                            A_rolling=A_r, b_rolling=b_r)
