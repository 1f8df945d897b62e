"""Rigid-body models of a multi-fingered hand and a grasped object.

The hand is a set of serial fingers with revolute joints; each finger
carries a hemispherical fingertip.  The object is a free rigid body whose
surface is a collection of flat faces.  This module provides forward
kinematics, contact-point Jacobians, joint-space inertia and Coriolis
matrices, the grasp map, and the coupled contact-force solve that ties
hand and object accelerations together under a rolling grasp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from barriergrasp import geometry as G

__all__ = [
    "FingerModel",
    "HandModel",
    "BoxFace",
    "ObjectModel",
    "GraspState",
    "FingerKinematics",
    "GraspKinematics",
    "IllConditionedContact",
    "skew",
    "finger_kinematics",
    "grasp_kinematics",
    "finger_mass_matrix",
    "hand_mass_matrix",
    "hand_coriolis",
    "hand_gravity",
    "object_mass_matrix",
    "object_coriolis",
    "contact_forces",
    "coupled_accelerations",
]

_AXES = {
    "x": np.array([1.0, 0.0, 0.0]),
    "y": np.array([0.0, 1.0, 0.0]),
    "z": np.array([0.0, 0.0, 1.0]),
}

_COND_MAX = 1e12


class IllConditionedContact(RuntimeError):
    """Contact-force system condition number exceeds the trust threshold."""


def skew(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def _axis_rotation(axis: str, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    if axis == "x":
        return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    if axis == "y":
        return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    if axis == "z":
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    raise ValueError(f"unknown axis {axis!r}")


@dataclass(frozen=True)
class FingerModel:
    """Serial revolute finger with a hemispherical tip.

    Each joint rotates about ``joint_axes[k]`` expressed in the current
    local frame; link k extends ``(0, link_lengths[k], 0)`` in its local
    frame with its center of mass at the midpoint.  ``tip_rotation`` maps
    the fingertip chart frame into the last link frame.
    """

    base_position: np.ndarray
    base_rotation: np.ndarray
    joint_axes: tuple[str, ...] = ("x", "y", "x")
    link_lengths: tuple[float, ...] = (0.3, 0.3, 0.3)
    link_masses: tuple[float, ...] = (0.25, 0.25, 0.25)
    link_inertias: tuple = (
        np.diag([0.0019, 0.0001, 0.0019]),
    ) * 3
    tip_rotation: np.ndarray = field(
        default_factory=lambda: _axis_rotation("x", -math.pi / 2)
    )
    tip_radius: float = 0.06

    def __post_init__(self):
        object.__setattr__(self, "base_position", np.asarray(self.base_position, dtype=float))
        object.__setattr__(self, "base_rotation", np.asarray(self.base_rotation, dtype=float))
        object.__setattr__(self, "link_lengths", tuple(float(v) for v in self.link_lengths))
        object.__setattr__(self, "link_masses", tuple(float(v) for v in self.link_masses))
        object.__setattr__(
            self, "link_inertias",
            tuple(np.asarray(I, dtype=float) for I in self.link_inertias),
        )
        object.__setattr__(self, "tip_rotation", np.asarray(self.tip_rotation, dtype=float))
        if not (len(self.joint_axes) == len(self.link_lengths)
                == len(self.link_masses) == len(self.link_inertias)):
            raise ValueError("per-link parameter lengths disagree")

    @property
    def dof(self) -> int:
        return len(self.joint_axes)

    @property
    def tip_patch(self) -> G.HemispherePatch:
        return G.HemispherePatch.default(self.tip_radius)


@dataclass(frozen=True)
class HandModel:
    fingers: tuple[FingerModel, ...]

    @property
    def n_fingers(self) -> int:
        return len(self.fingers)

    @property
    def dof(self) -> int:
        return sum(f.dof for f in self.fingers)

    def joint_slice(self, i: int) -> slice:
        start = sum(f.dof for f in self.fingers[:i])
        return slice(start, start + self.fingers[i].dof)


@dataclass(frozen=True)
class BoxFace:
    """Flat face chart anchored in the object body frame."""

    origin: np.ndarray
    rotation: np.ndarray  # maps face chart frame -> object body frame
    half_a: float
    half_b: float

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float))
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float))

    @property
    def patch(self) -> G.PlanePatch:
        return G.PlanePatch(a_min=-self.half_a, a_max=self.half_a,
                            b_min=-self.half_b, b_max=self.half_b)


@dataclass(frozen=True)
class ObjectModel:
    mass: float
    inertia: np.ndarray  # 3x3 in the body frame
    faces: tuple[BoxFace, ...]

    def __post_init__(self):
        object.__setattr__(self, "inertia", np.asarray(self.inertia, dtype=float))


@dataclass
class GraspState:
    """Full simulation state of the hand-object system.

    ``quat_o`` is the object orientation as an (x, y, z, w) unit quaternion.
    Per contact i, ``xi_cf[i]`` are fingertip chart coordinates,
    ``xi_co[i]`` object face chart coordinates, ``psi[i]`` the contact
    angle, and ``face_index[i]`` the object face in contact.
    """

    q: np.ndarray
    dq: np.ndarray
    p_o: np.ndarray
    quat_o: np.ndarray
    v_o: np.ndarray
    w_o: np.ndarray
    xi_cf: np.ndarray
    xi_co: np.ndarray
    psi: np.ndarray
    face_index: tuple[int, ...]

    def copy(self) -> "GraspState":
        return GraspState(
            q=self.q.copy(), dq=self.dq.copy(), p_o=self.p_o.copy(),
            quat_o=self.quat_o.copy(), v_o=self.v_o.copy(), w_o=self.w_o.copy(),
            xi_cf=self.xi_cf.copy(), xi_co=self.xi_co.copy(), psi=self.psi.copy(),
            face_index=self.face_index,
        )

    @property
    def R_o(self) -> np.ndarray:
        return Rotation.from_quat(self.quat_o).as_matrix()

    @property
    def x_o_dot(self) -> np.ndarray:
        return np.concatenate([self.v_o, self.w_o])


@dataclass
class FingerKinematics:
    """Per-finger forward kinematics and fingertip Jacobians."""

    joint_positions: list      # world origin of each joint frame
    joint_rotations: list      # world rotation of each link frame
    axes_world: list           # world joint axes
    com_positions: list        # world link centers of mass
    tip_position: np.ndarray
    tip_rotation: np.ndarray   # world rotation of the fingertip chart frame
    J_v: np.ndarray            # translational Jacobian of the tip point
    J_w: np.ndarray            # rotational Jacobian of the tip body


def finger_kinematics(finger: FingerModel, q_f: np.ndarray) -> FingerKinematics:
    R = finger.base_rotation.copy()
    p = finger.base_position.copy()
    joint_positions, joint_rotations, axes_world, com_positions = [], [], [], []
    for k, (axis, angle) in enumerate(zip(finger.joint_axes, q_f)):
        link = np.array([0.0, finger.link_lengths[k], 0.0])
        axes_world.append(R @ _AXES[axis])
        joint_positions.append(p.copy())
        R = R @ _axis_rotation(axis, float(angle))
        joint_rotations.append(R.copy())
        com_positions.append(p + R @ (0.5 * link))
        p = p + R @ link
    tip_rotation = R @ finger.tip_rotation
    n = finger.dof
    J_v = np.zeros((3, n))
    J_w = np.zeros((3, n))
    for k in range(n):
        J_w[:, k] = axes_world[k]
        J_v[:, k] = G.cross3(axes_world[k], p - joint_positions[k])
    return FingerKinematics(
        joint_positions=joint_positions, joint_rotations=joint_rotations,
        axes_world=axes_world, com_positions=com_positions,
        tip_position=p, tip_rotation=tip_rotation, J_v=J_v, J_w=J_w,
    )


@dataclass
class GraspKinematics:
    """Kinematic quantities shared by one dynamics evaluation."""

    fingers: list               # FingerKinematics per finger
    contact_points: np.ndarray  # (n, 3) world contact positions (fingertip side)
    R_fc: list                  # world rotation of each fingertip contact frame
    R_oc: list                  # world rotation of each object contact frame
    J_h: np.ndarray             # (3n, dof) hand Jacobian at the contact points
    grasp_map: np.ndarray       # (6, 3n)


def grasp_kinematics(hand: HandModel, obj: ObjectModel, state: GraspState) -> GraspKinematics:
    n = hand.n_fingers
    fks = [finger_kinematics(hand.fingers[i], state.q[hand.joint_slice(i)]) for i in range(n)]
    R_o = state.R_o
    contact_points = np.zeros((n, 3))
    R_fc, R_oc = [], []
    J_h = np.zeros((3 * n, hand.dof))
    Gmap = np.zeros((6, 3 * n))
    for i in range(n):
        finger = hand.fingers[i]
        fk = fks[i]
        r_tip = finger.tip_patch.chart(state.xi_cf[i])
        p_c = fk.tip_position + fk.tip_rotation @ r_tip
        contact_points[i] = p_c
        R_fc.append(fk.tip_rotation @ G.gauss_frame(finger.tip_patch, state.xi_cf[i]))
        face = obj.faces[state.face_index[i]]
        R_oc.append(R_o @ face.rotation @ G.gauss_frame(face.patch, state.xi_co[i]))
        J_ci = fk.J_v - skew(fk.tip_rotation @ r_tip) @ fk.J_w
        J_h[3 * i:3 * i + 3, hand.joint_slice(i)] = J_ci
        Gmap[:3, 3 * i:3 * i + 3] = np.eye(3)
        Gmap[3:, 3 * i:3 * i + 3] = skew(p_c - state.p_o)
    return GraspKinematics(fingers=fks, contact_points=contact_points,
                           R_fc=R_fc, R_oc=R_oc, J_h=J_h, grasp_map=Gmap)


def finger_mass_matrix(finger: FingerModel, q_f: np.ndarray) -> np.ndarray:
    """Joint-space inertia of one finger from its link Jacobians."""
    fk = finger_kinematics(finger, q_f)
    n = finger.dof
    M = np.zeros((n, n))
    for k in range(n):
        J_vc = np.zeros((3, n))
        J_w = np.zeros((3, n))
        for j in range(k + 1):
            J_w[:, j] = fk.axes_world[j]
            J_vc[:, j] = G.cross3(fk.axes_world[j], fk.com_positions[k] - fk.joint_positions[j])
        Rk = fk.joint_rotations[k]
        I_world = Rk @ finger.link_inertias[k] @ Rk.T
        M += finger.link_masses[k] * J_vc.T @ J_vc + J_w.T @ I_world @ J_w
    return M


def hand_mass_matrix(hand: HandModel, q: np.ndarray) -> np.ndarray:
    M = np.zeros((hand.dof, hand.dof))
    for i, finger in enumerate(hand.fingers):
        sl = hand.joint_slice(i)
        M[sl, sl] = finger_mass_matrix(finger, q[sl])
    return M


def hand_coriolis(hand: HandModel, q: np.ndarray, dq: np.ndarray,
                  step: float = 1e-6) -> np.ndarray:
    """Coriolis matrix from Christoffel symbols of the inertia matrix.

    The partials dM/dq come from central differences, which keeps
    Mdot - 2C exactly skew-symmetric up to the differencing error.
    """
    C = np.zeros((hand.dof, hand.dof))
    for i, finger in enumerate(hand.fingers):
        sl = hand.joint_slice(i)
        q_f, dq_f = q[sl], dq[sl]
        n = finger.dof
        dM = np.zeros((n, n, n))  # dM[:, :, k] = dM/dq_k
        for k in range(n):
            d = np.zeros(n)
            d[k] = step
            dM[:, :, k] = (finger_mass_matrix(finger, q_f + d)
                           - finger_mass_matrix(finger, q_f - d)) / (2.0 * step)
        C_f = np.zeros((n, n))
        for a in range(n):
            for b in range(n):
                C_f[a, b] = 0.5 * float(
                    np.dot(dM[a, b, :] + dM[a, :, b] - dM[:, a, b], dq_f)
                )
        C[sl, sl] = C_f
    return C


def hand_gravity(hand: HandModel, q: np.ndarray, g_vec) -> np.ndarray:
    """Generalized gravity torque g(q) with M qdd + C qd + g(q) = torques."""
    g_vec = np.asarray(g_vec, dtype=float)
    tau = np.zeros(hand.dof)
    if not np.any(g_vec):
        return tau
    for i, finger in enumerate(hand.fingers):
        sl = hand.joint_slice(i)
        fk = finger_kinematics(finger, q[sl])
        n = finger.dof
        g_f = np.zeros(n)
        for k in range(n):
            J_vc = np.zeros((3, n))
            for j in range(k + 1):
                J_vc[:, j] = G.cross3(fk.axes_world[j], fk.com_positions[k] - fk.joint_positions[j])
            g_f -= finger.link_masses[k] * J_vc.T @ g_vec
        tau[sl] = g_f
    return tau


def object_mass_matrix(obj: ObjectModel, R_o: np.ndarray) -> np.ndarray:
    M = np.zeros((6, 6))
    M[:3, :3] = obj.mass * np.eye(3)
    M[3:, 3:] = R_o @ obj.inertia @ R_o.T
    return M


def object_coriolis(obj: ObjectModel, R_o: np.ndarray, w_o) -> np.ndarray:
    C = np.zeros((6, 6))
    I_w = R_o @ obj.inertia @ R_o.T
    C[3:, 3:] = skew(w_o) @ I_w
    return C


def contact_forces(
    J_h: np.ndarray,
    Jdot_h_dq: np.ndarray,
    grasp_map: np.ndarray,
    Gdot_T_xdot: np.ndarray,
    M_h: np.ndarray,
    h_bias: np.ndarray,
    M_o: np.ndarray,
    C_o: np.ndarray,
    x_o_dot: np.ndarray,
    w_ext: np.ndarray,
    u: np.ndarray,
) -> np.ndarray:
    """Rolling-contact interaction forces from the acceleration constraint.

    ``h_bias`` collects the non-input joint-space torques C_h dq + g(q)
    - tau_e so that qdd = M_h^{-1} (u - h_bias - J_h' f_c); ``w_ext``
    collects the external object wrench including gravity.  The contact
    acceleration constraint J_h qdd + Jdot_h dq = G' xdd + Gdot' xdot
    then yields a symmetric positive definite system for f_c.
    """
    Mh_inv_Jt = np.linalg.solve(M_h, J_h.T)
    Mo_inv_G = np.linalg.solve(M_o, grasp_map)
    B = J_h @ Mh_inv_Jt + grasp_map.T @ Mo_inv_G
    if np.linalg.cond(B) > _COND_MAX:
        raise IllConditionedContact("contact force system is ill conditioned")
    rhs = (J_h @ np.linalg.solve(M_h, u - h_bias) + Jdot_h_dq
           - Gdot_T_xdot - Mo_inv_G.T @ (w_ext - C_o @ x_o_dot))
    return np.linalg.solve(B, rhs)


def coupled_accelerations(
    J_h, Jdot_h_dq, grasp_map, Gdot_T_xdot,
    M_h, h_bias, M_o, C_o, x_o_dot, w_ext, u,
):
    """Contact forces plus the resulting joint and object accelerations."""
    f_c = contact_forces(J_h, Jdot_h_dq, grasp_map, Gdot_T_xdot,
                         M_h, h_bias, M_o, C_o, x_o_dot, w_ext, u)
    qdd = np.linalg.solve(M_h, u - h_bias - J_h.T @ f_c)
    xdd = np.linalg.solve(M_o, grasp_map @ f_c + w_ext - C_o @ x_o_dot)
    return f_c, qdd, xdd
