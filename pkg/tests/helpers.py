"""Shared oracles for the constraint-row and acceptance tests.

Two independent checks live here:

* a finite-difference oracle that differentiates the barrier values along
  the exactly integrated closed-loop flow and compares the result with
  the assembled half-space rows, and
* a fixed-step rolling integration of a sphere on a plane with a known
  rigid-body solution.
"""

import math

import numpy as np
from scipy.spatial.transform import Rotation

from barriergrasp import dynamics as D
from barriergrasp import geometry as G
from barriergrasp.constraints import assemble_rows
from barriergrasp.simulator import (
    _hand_contacts,
    _rolling_rates_true,
    true_matrices,
    zoh_step,
)


def random_feasible_state(cfg, base, rng, twist_scale=0.25):
    """Random state on the rolling-constraint manifold near the grasp.

    The object twist is drawn at random and the joint rates are solved
    from the velocity-level rolling constraint J_h dq = G' x_dot, which
    is square and invertible for this grasp.
    """
    state = base.copy()
    kin = D.grasp_kinematics(cfg.hand, cfg.obj, state)
    x_dot = rng.uniform(-twist_scale, twist_scale, 6)
    state.dq = np.linalg.solve(kin.J_h, kin.grasp_map.T @ x_dot)
    state.v_o = x_dot[:3].copy()
    state.w_o = x_dot[3:].copy()
    return state


def joint_barrier_values(cfg, state):
    """Robust barrier values B_rob in the row order of the joint family."""
    m = cfg.hand.dof
    out = np.zeros(2 * m)
    for j in range(m):
        h_lo = state.q[j] - cfg.q_min[j] - cfg.delta_q
        h_hi = cfg.q_max[j] - state.q[j] - cfg.delta_q
        out[j] = state.dq[j] + cfg.alpha1(h_lo) - cfg.beta_q
        out[m + j] = -state.dq[j] + cfg.alpha1(h_hi) - cfg.beta_q
    return out


_SIGNS = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])


def rolling_barrier_values(cfg, state):
    """Robust barrier values in the row order of the contact-location family."""
    hc = _hand_contacts(cfg.hand, state.q, state.xi_cf)
    rates = _rolling_rates_true(cfg, state, hc)
    a_min, a_max, b_min, b_max = [float(v) for v in cfg.contact_box]
    bounds = np.array([a_min, -a_max, b_min, -b_max])
    n = len(cfg.contacts)
    out = np.zeros(4 * n)
    for i in range(n):
        for l in range(4):
            s = _SIGNS[l]
            h = float(s @ state.xi_cf[i]) - bounds[l] - cfg.delta_r
            hdot = float(s @ rates[i][0])
            out[4 * i + l] = hdot + cfg.alpha1(h) - cfg.beta_r
    return out


def exact_blocks(cfg, state):
    """Constraint rows assembled from the exact model at the given state."""
    mat = true_matrices(cfg, state, np.zeros(cfg.hand.dof), np.zeros(6))
    hc = _hand_contacts(cfg.hand, state.q, state.xi_cf)
    rates = _rolling_rates_true(cfg, state, hc)
    xi_cf_dot = np.array([r[0] for r in rates])
    return assemble_rows(
        mat, state.q, state.dq, state.xi_cf, xi_cf_dot,
        mu_hat=cfg.mu_hat, sides=cfg.pyramid_sides, epsilon=cfg.epsilon,
        q_min=cfg.q_min, q_max=cfg.q_max, delta_q=cfg.delta_q, beta_q=cfg.beta_q,
        contact_box=cfg.contact_box, delta_r=cfg.delta_r, beta_r=cfg.beta_r,
        alpha1=cfg.alpha1, alpha2=cfg.alpha2, nu_hat=cfg.nu_hat,
    )


def barrier_row_fd_residuals(cfg, state, u, eps=1e-5):
    """Row residuals against a flow finite difference of the barriers.

    Each barrier row encodes  a . u - b = Bdot + alpha2(B_rob) - nu_hat.
    The right side is rebuilt by differentiating B_rob along the exactly
    integrated flow under the held control u; the returned arrays are
    (joint residuals, contact-location residuals).
    """
    blocks = exact_blocks(cfg, state)
    plus = zoh_step(cfg, state, u, 0.0, dt_total=eps, substeps=1)
    minus = zoh_step(cfg, state, u, 0.0, dt_total=-eps, substeps=1)

    Bq = joint_barrier_values(cfg, state)
    Bq_dot = (joint_barrier_values(cfg, plus)
              - joint_barrier_values(cfg, minus)) / (2 * eps)
    lhs_q = blocks.A_joint @ u - blocks.b_joint
    res_q = lhs_q - (Bq_dot + cfg.alpha2(Bq) - cfg.nu_hat)

    Br = rolling_barrier_values(cfg, state)
    Br_dot = (rolling_barrier_values(cfg, plus)
              - rolling_barrier_values(cfg, minus)) / (2 * eps)
    lhs_r = blocks.A_rolling @ u - blocks.b_rolling
    res_r = lhs_r - (Br_dot + cfg.alpha2(Br) - cfg.nu_hat)
    return res_q, res_r


# ---------------------------------------------------------------------------
# sphere rolling on a plane with a closed-form rigid-body solution

_RADIUS = 0.25
_OMEGA = np.array([0.3, -0.2, 0.0])
_R_PF0 = Rotation.from_rotvec([math.pi, 0.0, 0.0]).as_matrix()


def _sphere_plane():
    sphere = G.HemispherePatch.default(_RADIUS)
    plane = G.PlanePatch(a_min=-10.0, a_max=10.0, b_min=-10.0, b_max=10.0)
    return sphere, plane


def _R_pf(t):
    return Rotation.from_rotvec(_OMEGA * t).as_matrix() @ _R_PF0


def _rolling_truth(t, sphere, plane):
    center = np.array([0.0, 0.0, _RADIUS]) + np.cross(_OMEGA, [0.0, 0.0, _RADIUS]) * t
    pb = _R_pf(t).T @ np.array([0.0, 0.0, -_RADIUS])
    a = math.asin(np.clip(pb[1] / _RADIUS, -1.0, 1.0))
    b = math.atan2(-pb[2], -pb[0])
    xi_cf = np.array([a, b])
    xi_co = center[:2].copy()
    D_rel = (_R_pf(t) @ G.gauss_frame(sphere, xi_cf)).T @ G.gauss_frame(plane, xi_co)
    psi = math.atan2(-D_rel[0, 1], D_rel[0, 0])
    return xi_cf, xi_co, psi, center


def roll_sphere_fixed_step(dt=1e-4, duration=1.0):
    """Integrate the rolling equations with fixed-step RK4.

    Returns (max contact-point mismatch between the two surface charts,
    terminal chart-coordinate error against the closed form).  The
    mismatch is the geometric rolling residual: the contact point
    reconstructed through the sphere chart must coincide with the one
    reconstructed through the plane chart at every step.
    """
    sphere, plane = _sphere_plane()
    xi_cf, xi_co, psi, _ = _rolling_truth(0.0, sphere, plane)
    y = np.concatenate([xi_cf, xi_co, [psi]])
    R_po = np.eye(3)

    def rhs(t, yv):
        d_cf, d_co, d_psi = G.rolling_rates(
            yv[:2], yv[2:4], yv[4], sphere, plane,
            _OMEGA, np.zeros(3), _R_pf(t), R_po,
        )
        return np.concatenate([d_cf, d_co, [d_psi]])

    n_steps = int(round(duration / dt))
    max_mismatch = 0.0
    t = 0.0
    for _ in range(n_steps):
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1)
        k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2)
        k4 = rhs(t + dt, y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += dt
        *_, center = _rolling_truth(t, sphere, plane)
        p_sphere_side = center + _R_pf(t) @ sphere.chart(y[:2])
        p_plane_side = plane.chart(y[2:4])
        max_mismatch = max(max_mismatch,
                           float(np.max(np.abs(p_sphere_side - p_plane_side))))
    xt_cf, xt_co, pt, _ = _rolling_truth(duration, sphere, plane)
    wrapped = ((y[4] - pt + math.pi) % (2 * math.pi)) - math.pi
    terminal_err = max(float(np.max(np.abs(y[:2] - xt_cf))),
                       float(np.max(np.abs(y[2:4] - xt_co))),
                       abs(wrapped))
    return max_mismatch, terminal_err
