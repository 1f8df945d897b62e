"""Sampled-data closed-loop grasp simulation.

The engine runs a zero-order-hold loop: at every sampling instant the
controller senses joint angles, joint velocities, and fingertip contact
coordinates, builds blind-grasping estimates from a virtual object frame,
computes the nominal manipulation torque, optionally filters it through
the grasp-constraint QP, then integrates the coupled hand-object rigid
body dynamics with a fixed-step fourth-order Runge-Kutta method until
the next sample.

Trace CSV column order: t first, then truth state blocks (q, dq, object
pose/twist), virtual-frame estimate, contact coordinate blocks, contact
forces, then constraint-margin blocks (h and B families plus friction
residuals), then controls and filter diagnostics.  All floats use 17
significant digits.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from scipy.spatial.transform import Rotation

from barriergrasp import constraints as CN
from barriergrasp import dynamics as D
from barriergrasp import geometry as G
from barriergrasp.models import ScenarioConfig
from barriergrasp.qp import FilterInfo, filter_control

__all__ = [
    "SimulationError",
    "DegenerateFrame",
    "Trace",
    "Summary",
    "virtual_frame",
    "grasp_initializer",
    "true_matrices",
    "estimated_matrices",
    "nominal_control",
    "NominalControllerState",
    "zoh_step",
    "run",
]

_FD_STEP = 1e-6


class SimulationError(RuntimeError):
    pass


class DegenerateFrame(SimulationError):
    """Contact points are collinear; no virtual frame exists."""


# ---------------------------------------------------------------------------
# virtual frame and hand-side kinematics


def virtual_frame(contact_points: np.ndarray):
    """Object pose estimate from contact positions alone.

    Returns (p_hat, R_hat): the centroid and an orthonormal frame with
    x toward the first contact and z along the contact-triangle normal.
    """
    pts = np.asarray(contact_points, dtype=float)
    p_hat = pts.mean(axis=0)
    normal = G.cross3(pts[1] - pts[0], pts[2] - pts[0])
    nn = np.linalg.norm(normal)
    if nn < 1e-12:
        raise DegenerateFrame("contact points are collinear")
    z = normal / nn
    x_raw = pts[0] - p_hat
    x_raw = x_raw - (x_raw @ z) * z
    nx = np.linalg.norm(x_raw)
    if nx < 1e-12:
        raise DegenerateFrame("first contact coincides with the centroid axis")
    x = x_raw / nx
    y = G.cross3(z, x)
    return p_hat, np.column_stack([x, y, z])


@dataclass
class _HandContacts:
    """Fingertip-side kinematics at given (q, xi_cf): all a blind
    controller can reconstruct without an object model."""

    fks: list
    contact_points: np.ndarray
    R_fc: list
    J_h: np.ndarray
    Js_w: list


def _hand_contacts(hand: D.HandModel, q, xi_cf) -> _HandContacts:
    n = hand.n_fingers
    fks = [D.finger_kinematics(hand.fingers[i], q[hand.joint_slice(i)]) for i in range(n)]
    pts = np.zeros((n, 3))
    R_fc = []
    J_h = np.zeros((3 * n, hand.dof))
    Js_w = []
    for i in range(n):
        finger = hand.fingers[i]
        fk = fks[i]
        r_tip = fk.tip_rotation @ finger.tip_patch.chart(xi_cf[i])
        pts[i] = fk.tip_position + r_tip
        R_fc.append(fk.tip_rotation @ G.gauss_frame(finger.tip_patch, xi_cf[i]))
        J_h[3 * i:3 * i + 3, hand.joint_slice(i)] = fk.J_v - D.skew(r_tip) @ fk.J_w
        Jw_full = np.zeros((3, hand.dof))
        Jw_full[:, hand.joint_slice(i)] = fk.J_w
        Js_w.append(Jw_full)
    return _HandContacts(fks=fks, contact_points=pts, R_fc=R_fc, J_h=J_h, Js_w=Js_w)


def _grasp_map(contact_points: np.ndarray, p_o: np.ndarray) -> np.ndarray:
    n = contact_points.shape[0]
    Gm = np.zeros((6, 3 * n))
    for i in range(n):
        Gm[:3, 3 * i:3 * i + 3] = np.eye(3)
        Gm[3:, 3 * i:3 * i + 3] = D.skew(contact_points[i] - p_o)
    return Gm


# ---------------------------------------------------------------------------
# truth-side matrices


def _finger_omegas(hand, hc: _HandContacts, dq) -> list:
    return [hc.Js_w[i] @ dq for i in range(hand.n_fingers)]


def _rolling_rates_true(cfg: ScenarioConfig, state: D.GraspState, hc: _HandContacts):
    """Per-contact (xi_cf_dot, xi_co_dot, psi_dot) under the true motion."""
    hand, obj = cfg.hand, cfg.obj
    R_o = state.R_o
    out = []
    omegas = _finger_omegas(hand, hc, state.dq)
    for i, spec in enumerate(cfg.contacts):
        finger = hand.fingers[spec.finger]
        face = obj.faces[state.face_index[i]]
        rates = G.rolling_rates(
            state.xi_cf[i], state.xi_co[i], float(state.psi[i]),
            finger.tip_patch, face.patch,
            omegas[i], state.w_o,
            hc.fks[i].tip_rotation, R_o @ face.rotation,
        )
        out.append(rates)
    return out


def _advanced_state(cfg, state: D.GraspState, rates, h: float) -> D.GraspState:
    """Drift the kinematic state h seconds along its current velocities."""
    new = state.copy()
    new.q = state.q + h * state.dq
    new.p_o = state.p_o + h * state.v_o
    rot = Rotation.from_rotvec(h * state.w_o) * Rotation.from_quat(state.quat_o)
    new.quat_o = rot.as_quat()
    for i, (d_cf, d_co, d_psi) in enumerate(rates):
        new.xi_cf[i] = state.xi_cf[i] + h * d_cf
        new.xi_co[i] = state.xi_co[i] + h * d_co
        new.psi[i] = state.psi[i] + h * d_psi
    return new


def true_matrices(cfg: ScenarioConfig, state: D.GraspState,
                  tau_e: np.ndarray, w_e: np.ndarray,
                  contact_rows: bool = True) -> CN.GraspMatrices:
    """Exact-model matrices for the coupled dynamics and constraint rows.

    Hand gravity is folded into the external joint torque and object
    gravity into the external wrench, so downstream formulas carry no
    separate gravity term.  When ``contact_rows`` is false the rolling
    drift quantities (needed only by the constraint assembler) are
    skipped to keep the inner integration loop cheap.
    """
    hand, obj = cfg.hand, cfg.obj
    hc = _hand_contacts(hand, state.q, state.xi_cf)
    rates = _rolling_rates_true(cfg, state, hc)
    R_o = state.R_o

    M_h = D.hand_mass_matrix(hand, state.q)
    C_h = D.hand_coriolis(hand, state.q, state.dq)
    g_q = D.hand_gravity(hand, state.q, cfg.gravity)
    M_o = D.object_mass_matrix(obj, R_o)
    C_o = D.object_coriolis(obj, R_o, state.w_o)
    w_grav = np.concatenate([obj.mass * cfg.gravity, np.zeros(3)])

    h_fd = _FD_STEP
    plus = _advanced_state(cfg, state, rates, h_fd)
    minus = _advanced_state(cfg, state, rates, -h_fd)
    hc_p = _hand_contacts(hand, plus.q, plus.xi_cf)
    hc_m = _hand_contacts(hand, minus.q, minus.xi_cf)
    Jdot = (hc_p.J_h - hc_m.J_h) / (2 * h_fd)
    G_now = _grasp_map(hc.contact_points, state.p_o)
    G_p = _grasp_map(hc_p.contact_points, plus.p_o)
    G_m = _grasp_map(hc_m.contact_points, minus.p_o)
    Gdot = (G_p - G_m) / (2 * h_fd)

    R_cp = [hc.R_fc[i].T for i in range(hand.n_fingers)]
    H = []
    H_drift = []
    Jsdot_w_dq = []
    if contact_rows:
        omegas = _finger_omegas(hand, hc, state.dq)
        flat = G.flat_tensors()
        for i, spec in enumerate(cfg.contacts):
            finger = hand.fingers[spec.finger]
            Hi = G.H_matrix(state.xi_cf[i], float(state.psi[i]), finger.tip_patch, flat)
            d_cf, _, d_psi = rates[i]
            Hdot = G.H_matrix_rate(state.xi_cf[i], float(state.psi[i]),
                                   finger.tip_patch, flat, d_cf, d_psi)
            Rdot_cp = (hc_p.R_fc[i].T - hc_m.R_fc[i].T) / (2 * h_fd)
            H.append(Hi)
            H_drift.append((Hdot @ R_cp[i] + Hi @ Rdot_cp) @ (omegas[i] - state.w_o))
            Jsdot_w_dq.append((hc_p.Js_w[i] - hc_m.Js_w[i]) / (2 * h_fd) @ state.dq)

    return CN.GraspMatrices(
        M_h=M_h, C_h=C_h, dq=state.dq, tau_e=tau_e - g_q,
        J_h=hc.J_h, Jdot_h_dq=Jdot @ state.dq,
        grasp_map=G_now, Gdot_T_xdot=Gdot.T @ state.x_o_dot,
        M_o=M_o, C_o=C_o, x_o_dot=state.x_o_dot, w_e=w_e + w_grav,
        R_cp=R_cp, H=H, H_drift=H_drift, Js_w=hc.Js_w, Jsdot_w_dq=Jsdot_w_dq,
    )


# ---------------------------------------------------------------------------
# blind-grasping estimates


def _estimate_once(cfg: ScenarioConfig, q, dq, xi_cf):
    """Single-configuration estimated kinematics from (q, xi_cf) only."""
    hand = cfg.hand
    hc = _hand_contacts(hand, q, xi_cf)
    p_hat, R_hat = virtual_frame(hc.contact_points)
    G_hat = _grasp_map(hc.contact_points, p_hat)
    return hc, p_hat, R_hat, G_hat


def estimated_matrices(cfg: ScenarioConfig, state: D.GraspState) -> CN.GraspMatrices:
    """Blind-grasping matrices: virtual object frame, offset mass model,
    flat object surface, no disturbance estimate."""
    hand, obj = cfg.hand, cfg.obj
    q, dq, xi_cf = state.q, state.dq, state.xi_cf
    hc, p_hat, R_hat, G_hat = _estimate_once(cfg, q, dq, xi_cf)

    M_h = D.hand_mass_matrix(hand, q)
    C_h = D.hand_coriolis(hand, q, dq)
    g_q = D.hand_gravity(hand, q, cfg.gravity)

    m_hat = obj.mass + cfg.mass_error
    I_hat = obj.inertia + cfg.inertia_error * np.eye(3)
    I_w = R_hat @ I_hat @ R_hat.T
    x_hat_dot = np.linalg.pinv(G_hat.T, rcond=1e-8) @ (hc.J_h @ dq)
    w_hat = x_hat_dot[3:]
    M_o_hat = np.zeros((6, 6))
    M_o_hat[:3, :3] = m_hat * np.eye(3)
    M_o_hat[3:, 3:] = I_w
    C_o_hat = np.zeros((6, 6))
    C_o_hat[3:, 3:] = D.skew(w_hat) @ I_w

    flat = G.flat_tensors()
    R_cp = [hc.R_fc[i].T for i in range(hand.n_fingers)]
    omegas = _finger_omegas(hand, hc, dq)
    H = []
    xi_cf_dot_hat = []
    for i, spec in enumerate(cfg.contacts):
        finger = hand.fingers[spec.finger]
        Hi = G.H_matrix(xi_cf[i], float(state.psi[i]), finger.tip_patch, flat)
        H.append(Hi)
        xi_cf_dot_hat.append(Hi @ R_cp[i] @ (omegas[i] - w_hat))

    # finite differences of the estimated maps along the estimated flow
    h_fd = _FD_STEP
    q_p, q_m = q + h_fd * dq, q - h_fd * dq
    xi_p = xi_cf + h_fd * np.array(xi_cf_dot_hat)
    xi_m = xi_cf - h_fd * np.array(xi_cf_dot_hat)
    hc_p, php, _, Gp = _estimate_once(cfg, q_p, dq, xi_p)
    hc_m, phm, _, Gm = _estimate_once(cfg, q_m, dq, xi_m)
    Jdot = (hc_p.J_h - hc_m.J_h) / (2 * h_fd)
    Gdot = (Gp - Gm) / (2 * h_fd)

    H_drift = []
    Jsdot_w_dq = []
    for i, spec in enumerate(cfg.contacts):
        finger = hand.fingers[spec.finger]
        Hp = G.H_matrix(xi_p[i], float(state.psi[i]), finger.tip_patch, flat)
        Hm = G.H_matrix(xi_m[i], float(state.psi[i]), finger.tip_patch, flat)
        Hdot = (Hp - Hm) / (2 * h_fd)
        Rdot_cp = (hc_p.R_fc[i].T - hc_m.R_fc[i].T) / (2 * h_fd)
        H_drift.append((Hdot @ R_cp[i] + H[i] @ Rdot_cp) @ (omegas[i] - w_hat))
        Jsdot_w_dq.append((hc_p.Js_w[i] - hc_m.Js_w[i]) / (2 * h_fd) @ dq)

    mats = CN.GraspMatrices(
        M_h=M_h, C_h=C_h, dq=dq, tau_e=-g_q,
        J_h=hc.J_h, Jdot_h_dq=Jdot @ dq,
        grasp_map=G_hat, Gdot_T_xdot=Gdot.T @ x_hat_dot,
        M_o=M_o_hat, C_o=C_o_hat, x_o_dot=x_hat_dot, w_e=np.zeros(6),
        R_cp=R_cp, H=H, H_drift=H_drift, Js_w=hc.Js_w, Jsdot_w_dq=Jsdot_w_dq,
    )
    # stash the estimate extras used by the controller
    mats.p_hat = p_hat
    mats.R_hat = R_hat
    mats.x_hat_dot = x_hat_dot
    mats.contact_points = hc.contact_points
    mats.xi_cf_dot_hat = xi_cf_dot_hat
    return mats


# ---------------------------------------------------------------------------
# nominal manipulation controller


@dataclass
class NominalControllerState:
    integral: np.ndarray = field(default_factory=lambda: np.zeros(6))
    prev_gamma: np.ndarray | None = None
    rank_deficient: bool = False


def _task_orientation(R_hat: np.ndarray, prev: np.ndarray | None) -> np.ndarray:
    """Euler angles (x, y, z) of the virtual frame, unwrapped for
    continuity against the previous sample."""
    zyx = Rotation.from_matrix(R_hat).as_euler("ZYX")
    gamma = zyx[::-1].copy()
    if prev is not None:
        gamma += 2.0 * math.pi * np.round((prev - gamma) / (2.0 * math.pi))
    return gamma


def nominal_control(cfg: ScenarioConfig, ctrl: NominalControllerState,
                    est, reference: np.ndarray) -> np.ndarray:
    """PID manipulation wrench mapped through the grasp plus an internal
    squeeze force, expressed as joint torques."""
    gamma = _task_orientation(est.R_hat, ctrl.prev_gamma)
    ctrl.prev_gamma = gamma
    x_task = np.concatenate([est.p_hat, gamma])
    e = x_task - reference
    e_dot = est.x_hat_dot

    ctrl.integral = ctrl.integral + e * cfg.sample_time
    sat = np.clip(ctrl.integral, -cfg.integral_clamp, cfg.integral_clamp)
    ctrl.integral = sat.copy()

    wrench = -cfg.kp * e - cfg.ki * sat - cfg.kd * e_dot
    G_hat = est.grasp_map
    G_pinv = np.linalg.pinv(G_hat, rcond=1e-8)
    if np.linalg.matrix_rank(G_hat, tol=1e-8) < 6:
        ctrl.rank_deficient = True
    centroid = est.contact_points.mean(axis=0)
    u_f = np.concatenate([cfg.kf * (centroid - p) for p in est.contact_points])
    return est.J_h.T @ (G_pinv @ wrench + u_f)


# ---------------------------------------------------------------------------
# integration


def _disturbance_at(spec: dict, t: float, dim: int) -> np.ndarray:
    if spec["kind"] == "constant":
        return np.asarray(spec["value"], dtype=float)
    amp = np.asarray(spec["amplitude"], dtype=float)
    return amp * math.sin(2.0 * math.pi * spec["frequency"] * t + spec["phase"])


def _pack(state: D.GraspState) -> np.ndarray:
    return np.concatenate([
        state.q, state.dq, state.p_o, state.quat_o, state.v_o, state.w_o,
        state.xi_cf.ravel(), state.xi_co.ravel(), state.psi,
    ])


def _unpack(y: np.ndarray, template: D.GraspState) -> D.GraspState:
    n = template.xi_cf.shape[0]
    m = template.q.size
    s = template.copy()
    o = 0
    s.q = y[o:o + m]; o += m
    s.dq = y[o:o + m]; o += m
    s.p_o = y[o:o + 3]; o += 3
    s.quat_o = y[o:o + 4]; o += 4
    s.v_o = y[o:o + 3]; o += 3
    s.w_o = y[o:o + 3]; o += 3
    s.xi_cf = y[o:o + 2 * n].reshape(n, 2); o += 2 * n
    s.xi_co = y[o:o + 2 * n].reshape(n, 2); o += 2 * n
    s.psi = y[o:o + n]; o += n
    return s


def _quat_rate(quat_xyzw: np.ndarray, w: np.ndarray) -> np.ndarray:
    x, y, z, s = quat_xyzw
    wx, wy, wz = w
    return 0.5 * np.array([
        s * wx + y * wz - z * wy,
        s * wy + z * wx - x * wz,
        s * wz + x * wy - y * wx,
        -x * wx - y * wy - z * wz,
    ])


def _derivative(cfg: ScenarioConfig, state: D.GraspState, u, t: float):
    tau_e = _disturbance_at(cfg.tau_e, t, cfg.hand.dof)
    w_e = _disturbance_at(cfg.w_e, t, 6)
    mats = true_matrices(cfg, state, tau_e, w_e, contact_rows=False)
    f_c, qdd, xdd = D.coupled_accelerations(
        mats.J_h, mats.Jdot_h_dq, mats.grasp_map, mats.Gdot_T_xdot,
        mats.M_h, mats.C_h @ state.dq - mats.tau_e,
        mats.M_o, mats.C_o, state.x_o_dot, mats.w_e, u,
    )
    hc = _hand_contacts(cfg.hand, state.q, state.xi_cf)
    rates = _rolling_rates_true(cfg, state, hc)
    dy = np.concatenate([
        state.dq, qdd, state.v_o, _quat_rate(state.quat_o, state.w_o),
        xdd[:3], xdd[3:],
        np.concatenate([r[0] for r in rates]),
        np.concatenate([r[1] for r in rates]),
        np.array([r[2] for r in rates]),
    ])
    return dy, f_c


def zoh_step(cfg: ScenarioConfig, state: D.GraspState, u: np.ndarray,
             t0: float, dt_total: float | None = None,
             substeps: int | None = None) -> D.GraspState:
    """Hold u constant and integrate the coupled dynamics with classic
    fourth-order Runge-Kutta over fixed substeps."""
    dt_total = cfg.sample_time if dt_total is None else dt_total
    substeps = cfg.substeps if substeps is None else substeps
    h = dt_total / substeps
    y = _pack(state)
    t = t0
    for _ in range(substeps):
        s1 = _unpack(y, state)
        k1, _ = _derivative(cfg, s1, u, t)
        k2, _ = _derivative(cfg, _unpack(y + 0.5 * h * k1, state), u, t + 0.5 * h)
        k3, _ = _derivative(cfg, _unpack(y + 0.5 * h * k2, state), u, t + 0.5 * h)
        k4, _ = _derivative(cfg, _unpack(y + h * k3, state), u, t + h)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        m = state.q.size
        qsl = slice(2 * m + 3, 2 * m + 7)
        y[qsl] = y[qsl] / np.linalg.norm(y[qsl])
        t += h
    return _unpack(y, state)


# ---------------------------------------------------------------------------
# initial grasp


def grasp_initializer(cfg: ScenarioConfig) -> D.GraspState:
    """Initial state with every fingertip tangent to its target face.

    Solves, per contact, for joint angles and fingertip chart coordinates
    such that the surface points coincide and the outward normals oppose;
    the contact angle follows from the relative tangent frames.  All
    velocities start at zero.
    """
    hand, obj = cfg.hand, cfg.obj
    if [spec.finger for spec in cfg.contacts] != list(range(hand.n_fingers)):
        raise SimulationError("contacts must list every finger once, in finger order")
    R_o = Rotation.from_euler("xyz", cfg.euler_o0).as_matrix()
    p_o = cfg.p_o0
    q = np.zeros(hand.dof)
    n = len(cfg.contacts)
    xi_cf = np.zeros((n, 2))
    xi_co = np.zeros((n, 2))
    psi = np.zeros(n)
    faces = []
    for i, spec in enumerate(cfg.contacts):
        finger = hand.fingers[spec.finger]
        face = obj.faces[spec.face]
        patch = finger.tip_patch
        target = p_o + R_o @ (face.origin
                              + face.rotation @ np.array([spec.xi_co[0], spec.xi_co[1], 0.0]))
        n_face = R_o @ face.rotation[:, 2]

        def resid(z):
            fk = D.finger_kinematics(finger, z[:3])
            p_c = fk.tip_position + fk.tip_rotation @ patch.chart(z[3:5])
            n_f = fk.tip_rotation @ G.gauss_frame(patch, z[3:5])[:, 2]
            return np.concatenate([p_c - target, n_f + n_face])

        guess = np.concatenate([
            0.5 * (cfg.q_min[hand.joint_slice(spec.finger)]
                   + cfg.q_max[hand.joint_slice(spec.finger)]),
            [0.5 * (patch.a_min + patch.a_max), 0.5 * (patch.b_min + patch.b_max)],
        ])
        sol = least_squares(resid, guess, xtol=1e-15, ftol=1e-15, gtol=1e-15,
                            max_nfev=200 * guess.size)
        if np.linalg.norm(resid(sol.x), np.inf) > 1e-8:
            raise SimulationError(
                f"grasp initialization failed for finger {spec.finger}: "
                f"residual {np.linalg.norm(resid(sol.x), np.inf):.2e}")
        q[hand.joint_slice(spec.finger)] = sol.x[:3]
        xi_cf[i] = sol.x[3:5]
        xi_co[i] = spec.xi_co
        fk = D.finger_kinematics(finger, sol.x[:3])
        R_fc = fk.tip_rotation @ G.gauss_frame(patch, xi_cf[i])
        R_oc = R_o @ face.rotation @ G.gauss_frame(face.patch, xi_co[i])
        Dm = R_fc.T @ R_oc
        psi[i] = math.atan2(-Dm[0, 1], Dm[0, 0])
        faces.append(spec.face)
    return D.GraspState(
        q=q, dq=np.zeros(hand.dof), p_o=p_o.copy(),
        quat_o=Rotation.from_matrix(R_o).as_quat(), v_o=np.zeros(3), w_o=np.zeros(3),
        xi_cf=xi_cf, xi_co=xi_co, psi=psi, face_index=tuple(faces),
    )


# ---------------------------------------------------------------------------
# monitoring, trace, summary


@dataclass
class Trace:
    columns: list
    rows: list  # list of float lists

    def as_array(self) -> np.ndarray:
        return np.asarray(self.rows, dtype=float)

    def column(self, name: str) -> np.ndarray:
        return self.as_array()[:, self.columns.index(name)]

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write(",".join(self.columns) + "\n")
            for row in self.rows:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


@dataclass
class Summary:
    data: dict

    def write_json(self, path):
        import json
        with open(path, "w") as fh:
            json.dump(self.data, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _trace_columns(cfg: ScenarioConfig) -> list:
    m = cfg.hand.dof
    n = len(cfg.contacts)
    ls = cfg.pyramid_sides
    cols = ["t"]
    cols += [f"q{j}" for j in range(m)]
    cols += [f"dq{j}" for j in range(m)]
    cols += ["po_x", "po_y", "po_z", "quat_x", "quat_y", "quat_z", "quat_w"]
    cols += ["vo_x", "vo_y", "vo_z", "wo_x", "wo_y", "wo_z"]
    cols += ["phat_x", "phat_y", "phat_z", "gammahat_x", "gammahat_y", "gammahat_z"]
    for i in range(n):
        cols += [f"a_cf{i}", f"b_cf{i}"]
    for i in range(n):
        cols += [f"a_co{i}", f"b_co{i}"]
    cols += [f"psi{i}" for i in range(n)]
    for i in range(n):
        cols += [f"fc{i}_x", f"fc{i}_y", f"fc{i}_z"]
    cols += [f"h_qmin{j}" for j in range(m)] + [f"h_qmax{j}" for j in range(m)]
    for i in range(n):
        cols += [f"h_r{i}_amin", f"h_r{i}_amax", f"h_r{i}_bmin", f"h_r{i}_bmax"]
    for i in range(n):
        cols += [f"fric{i}_{k}" for k in range(ls)]
    cols += [f"B_qmin{j}" for j in range(m)] + [f"B_qmax{j}" for j in range(m)]
    for i in range(n):
        cols += [f"B_r{i}_amin", f"B_r{i}_amax", f"B_r{i}_bmin", f"B_r{i}_bmax"]
    cols += [f"unom{j}" for j in range(m)]
    cols += [f"u{j}" for j in range(m)]
    cols += ["qp_relaxed", "qp_slack", "rolling_residual"]
    return cols


def _monitor(cfg: ScenarioConfig, state: D.GraspState, f_c: np.ndarray,
             rates) -> dict:
    """True constraint margins: robust h values, barrier values,
    friction residuals with the true coefficient, rolling residual."""
    m = cfg.hand.dof
    n = len(cfg.contacts)
    a1 = cfg.alpha1
    h_qmin = state.q - cfg.q_min - cfg.delta_q
    h_qmax = cfg.q_max - state.q - cfg.delta_q
    B_qmin = state.dq + a1(h_qmin) - cfg.beta_q
    B_qmax = -state.dq + a1(h_qmax) - cfg.beta_q

    a_min, a_max, b_min, b_max = cfg.contact_box
    h_r = np.zeros((n, 4))
    B_r = np.zeros((n, 4))
    for i in range(n):
        a, b = state.xi_cf[i]
        da, db = rates[i][0]
        h_r[i] = [a - a_min - cfg.delta_r, a_max - a - cfg.delta_r,
                  b - b_min - cfg.delta_r, b_max - b - cfg.delta_r]
        hdots = [da, -da, db, -db]
        B_r[i] = [hd + a1(h) - cfg.beta_r for h, hd in zip(h_r[i], hdots)]

    Lam = CN.pyramid_matrix(cfg.mu, cfg.pyramid_sides)
    hc = _hand_contacts(cfg.hand, state.q, state.xi_cf)
    fric = np.zeros((n, cfg.pyramid_sides))
    for i in range(n):
        fric[i] = Lam @ (hc.R_fc[i].T @ f_c[3 * i:3 * i + 3])

    Gm = _grasp_map(hc.contact_points, state.p_o)
    roll_res = float(np.max(np.abs(hc.J_h @ state.dq - Gm.T @ state.x_o_dot)))
    return {
        "h_qmin": h_qmin, "h_qmax": h_qmax, "B_qmin": B_qmin, "B_qmax": B_qmax,
        "h_r": h_r, "B_r": B_r, "fric": fric, "rolling_residual": roll_res,
    }


def run(cfg: ScenarioConfig):
    """Closed-loop sampled-data run; returns (Trace, Summary)."""
    t_wall = time.perf_counter()
    columns = _trace_columns(cfg)
    rows = []
    n_samples = int(math.floor(cfg.duration / cfg.sample_time + 1e-9))

    status = "completed"
    qp_infeasible = 0
    max_slack = 0.0
    min_h = {"friction": math.inf, "joint": math.inf, "rolling": math.inf}
    first_violation = {"friction": None, "joint": None, "rolling": None}
    final_error = None

    if n_samples == 0:
        summary = Summary({
            "scenario": cfg.name, "status": status, "samples": 0, "t_final": 0.0,
            "filter_enabled": cfg.filter_enabled,
            "min_h": {k: None for k in min_h},
            "first_violation": first_violation,
            "violation": {k: False for k in min_h},
            "reference_error_final": None,
            "qp_infeasible_count": 0, "max_slack": 0.0,
            "wall_time_s": time.perf_counter() - t_wall,
        })
        return Trace(columns=columns, rows=rows), summary

    state = grasp_initializer(cfg)
    ctrl = NominalControllerState()
    est0 = estimated_matrices(cfg, state)
    gamma0 = _task_orientation(est0.R_hat, None)
    reference = np.concatenate([est0.p_hat, gamma0]) + cfg.reference_offset

    for k in range(n_samples):
        t = k * cfg.sample_time
        try:
            est = estimated_matrices(cfg, state)
            u_nom = nominal_control(cfg, ctrl, est, reference)
            lb = -cfg.torque_limit * np.ones(cfg.hand.dof)
            ub = cfg.torque_limit * np.ones(cfg.hand.dof)
            info = {}
            if cfg.filter_enabled:
                blocks = CN.assemble_rows(
                    est, state.q, state.dq, state.xi_cf, est.xi_cf_dot_hat,
                    mu_hat=cfg.mu_hat, sides=cfg.pyramid_sides, epsilon=cfg.epsilon,
                    q_min=cfg.q_min, q_max=cfg.q_max,
                    delta_q=cfg.delta_q, beta_q=cfg.beta_q,
                    contact_box=cfg.contact_box, delta_r=cfg.delta_r, beta_r=cfg.beta_r,
                    alpha1=cfg.alpha1, alpha2=cfg.alpha2, nu_hat=cfg.nu_hat,
                )
                u = filter_control(u_nom, blocks.rows(), lb, ub, info_out=info)
            else:
                u = np.clip(u_nom, lb, ub)

            tau_e = _disturbance_at(cfg.tau_e, t, cfg.hand.dof)
            w_e = _disturbance_at(cfg.w_e, t, 6)
            mats = true_matrices(cfg, state, tau_e, w_e, contact_rows=False)
            f_c, _, _ = D.coupled_accelerations(
                mats.J_h, mats.Jdot_h_dq, mats.grasp_map, mats.Gdot_T_xdot,
                mats.M_h, mats.C_h @ state.dq - mats.tau_e,
                mats.M_o, mats.C_o, state.x_o_dot, mats.w_e, u,
            )
            hc = _hand_contacts(cfg.hand, state.q, state.xi_cf)
            rates = _rolling_rates_true(cfg, state, hc)
            mon = _monitor(cfg, state, f_c, rates)
        except (D.IllConditionedContact, G.ChartSingularity, G.RollingDegenerate,
                DegenerateFrame, RuntimeError) as exc:
            status = f"engine_error:{type(exc).__name__}"
            break

        fi: FilterInfo | None = info.get("info") if cfg.filter_enabled else None
        relaxed = 1.0 if (fi is not None and fi.status == "relaxed") else 0.0
        slack = fi.slack if fi is not None else 0.0
        if relaxed:
            qp_infeasible += 1
            max_slack = max(max_slack, slack)

        gamma = ctrl.prev_gamma
        row = [t]
        row += list(state.q) + list(state.dq)
        row += list(state.p_o) + list(state.quat_o)
        row += list(state.v_o) + list(state.w_o)
        row += list(est.p_hat) + list(gamma)
        row += list(state.xi_cf.ravel()) + list(state.xi_co.ravel()) + list(state.psi)
        row += list(f_c)
        row += list(mon["h_qmin"]) + list(mon["h_qmax"])
        row += list(mon["h_r"].ravel())
        row += list(mon["fric"].ravel())
        row += list(mon["B_qmin"]) + list(mon["B_qmax"])
        row += list(mon["B_r"].ravel())
        row += list(u_nom) + list(u)
        row += [relaxed, slack, mon["rolling_residual"]]
        rows.append(row)

        fam_min = {
            "joint": float(min(mon["h_qmin"].min(), mon["h_qmax"].min())),
            "rolling": float(mon["h_r"].min()),
            "friction": float(mon["fric"].min()),
        }
        for fam, val in fam_min.items():
            min_h[fam] = min(min_h[fam], val)
            if val < 0 and first_violation[fam] is None:
                first_violation[fam] = t
        final_error = np.concatenate([est.p_hat, gamma]) - reference

        try:
            state = zoh_step(cfg, state, u, t)
        except (D.IllConditionedContact, G.ChartSingularity, G.RollingDegenerate) as exc:
            status = f"engine_error:{type(exc).__name__}"
            break
        out = [i for i in range(len(cfg.contacts))
               if not cfg.hand.fingers[cfg.contacts[i].finger].tip_patch.in_domain(state.xi_cf[i])]
        if out:
            status = f"constraint_exit:contact_{out[0]}_left_fingertip"
            break

    t_final = rows[-1][0] if rows else 0.0
    summary = Summary({
        "scenario": cfg.name,
        "status": status,
        "samples": len(rows),
        "t_final": t_final,
        "filter_enabled": cfg.filter_enabled,
        "min_h": {k: (None if math.isinf(v) else v) for k, v in min_h.items()},
        "first_violation": first_violation,
        "violation": {k: (first_violation[k] is not None) for k in first_violation},
        "reference_error_final": None if final_error is None else list(final_error),
        "qp_infeasible_count": qp_infeasible,
        "max_slack": max_slack,
        "wall_time_s": time.perf_counter() - t_wall,
    })
    return Trace(columns=columns, rows=rows), summary
