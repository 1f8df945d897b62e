"""Contact geometry tests.

The rolling test is an end-to-end oracle: a sphere rolls without slipping
or spinning on a fixed plane, where the contact coordinates on both
surfaces and the contact angle have closed-form rigid-body expressions.
Integrating the kinematic contact equations must reproduce them, which
pins every frame and sign convention in the module at once.
"""

import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.spatial.transform import Rotation

from barriergrasp import geometry as G

RADIUS = 0.25


@pytest.fixture
def sphere():
    return G.HemispherePatch.default(RADIUS)


@pytest.fixture
def plane():
    return G.PlanePatch(a_min=-10.0, a_max=10.0, b_min=-10.0, b_max=10.0)


class TestGaussFrame:
    def test_orthonormal_right_handed_on_grid(self, sphere):
        for xi in sphere.domain_grid(n=9):
            R = G.gauss_frame(sphere, xi)
            assert np.allclose(R.T @ R, np.eye(3), atol=1e-12)
            assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)

    def test_normal_points_outward(self, sphere):
        # outward normal of a sphere chart is radially aligned with the point
        for xi in sphere.domain_grid(n=7):
            R = G.gauss_frame(sphere, xi)
            c = sphere.chart(xi)
            assert float(R[:, 2] @ c) == pytest.approx(RADIUS, abs=1e-12)

    def test_plane_frame_is_identity(self, plane):
        assert np.allclose(G.gauss_frame(plane, [0.3, -0.7]), np.eye(3))

    def test_pole_raises(self):
        patch = G.HemispherePatch(
            a_min=-math.pi / 2, a_max=math.pi / 2, b_min=-math.pi, b_max=0.0, radius=RADIUS
        )
        with pytest.raises(G.ChartSingularity):
            G.gauss_frame(patch, [math.pi / 2, -1.0])


class TestTensors:
    def test_sphere_closed_form(self, sphere):
        # M = diag(R, R cos a), K = (1/R) I, T depends only on a
        for xi in sphere.domain_grid(n=7):
            t = G.tensors(sphere, xi)
            assert np.allclose(t.M, np.diag([RADIUS, RADIUS * abs(math.cos(xi[0]))]), atol=1e-12)
            assert np.allclose(t.K, np.eye(2) / RADIUS, atol=1e-10)
            expect_T = np.array([[0.0, -math.tan(xi[0]) / RADIUS]])
            assert np.allclose(t.T, expect_T, atol=1e-10)

    def test_plane_closed_form(self, plane):
        t = G.tensors(plane, [1.2, -0.4])
        assert np.allclose(t.M, np.eye(2))
        assert np.allclose(t.K, 0.0)
        assert np.allclose(t.T, 0.0)

    def test_flat_tensors_helper(self):
        t = G.flat_tensors()
        assert np.allclose(t.M, np.eye(2))
        assert np.allclose(t.K, 0.0)
        assert np.allclose(t.T, 0.0)

    def test_fd_cross_check(self, sphere):
        # curvature columns from finite differences of the normal
        xi = np.array([0.37, -1.1])
        t = G.tensors(sphere, xi)
        eps = 1e-6
        K_fd = np.zeros((2, 2))
        frame0 = G.gauss_frame(sphere, xi)
        for j in range(2):
            d = np.zeros(2)
            d[j] = eps
            np_ = G.gauss_frame(sphere, xi + d)[:, 2]
            nm = G.gauss_frame(sphere, xi - d)[:, 2]
            K_fd[:, j] = (frame0[:, :2].T @ (np_ - nm)) / (2 * eps * t.M[j, j])
        assert np.allclose(t.K, K_fd, atol=1e-6)


class TestRotationPsi:
    def test_involution_and_reflection(self):
        for psi in [-2.1, 0.0, 0.4, 1.9]:
            R = G.rotation_psi(psi)
            assert np.allclose(R @ R, np.eye(2), atol=1e-14)
            assert np.linalg.det(R) == pytest.approx(-1.0, abs=1e-14)


class TestRollingOracle:
    """Sphere rolling on a fixed plane without slip or spin."""

    omega_f = np.array([0.3, -0.2, 0.0])
    R_po = np.eye(3)

    def R_pf(self, t):
        R_pf0 = Rotation.from_rotvec([math.pi, 0.0, 0.0]).as_matrix()
        return Rotation.from_rotvec(self.omega_f * t).as_matrix() @ R_pf0

    def truth(self, t, sphere, plane):
        # ball center translates at omega x (R e_z); geometric contact on the
        # sphere is the body-frame antipode of the plane normal
        center = np.array([0.0, 0.0, RADIUS]) + np.cross(self.omega_f, [0.0, 0.0, RADIUS]) * t
        pb = self.R_pf(t).T @ np.array([0.0, 0.0, -RADIUS])
        a = math.asin(np.clip(pb[1] / RADIUS, -1.0, 1.0))
        b = math.atan2(-pb[2], -pb[0])
        xi_cf = np.array([a, b])
        xi_co = center[:2].copy()
        D = (self.R_pf(t) @ G.gauss_frame(sphere, xi_cf)).T @ (self.R_po @ G.gauss_frame(plane, xi_co))
        psi = math.atan2(-D[0, 1], D[0, 0])
        return xi_cf, xi_co, psi, D

    def test_relative_frame_is_contact_aligned(self, sphere, plane):
        # both frames share the contact point with opposed normals: D[2,2] = -1
        *_, D = self.truth(0.0, sphere, plane)
        assert D[2, 2] == pytest.approx(-1.0, abs=1e-12)

    def test_integrated_rates_match_rigid_body(self, sphere, plane):
        xi_cf0, xi_co0, psi0, _ = self.truth(0.0, sphere, plane)

        def rhs(t, y):
            d_cf, d_co, d_psi = G.rolling_rates(
                y[:2], y[2:4], y[4], sphere, plane,
                self.omega_f, np.zeros(3), self.R_pf(t), self.R_po,
            )
            return np.concatenate([d_cf, d_co, [d_psi]])

        sol = solve_ivp(rhs, (0.0, 0.6), np.concatenate([xi_cf0, xi_co0, [psi0]]),
                        rtol=1e-10, atol=1e-12, dense_output=True)
        assert sol.success
        for t in [0.2, 0.45, 0.6]:
            y = sol.sol(t)
            xt_cf, xt_co, pt, _ = self.truth(t, sphere, plane)
            assert np.allclose(y[:2], xt_cf, atol=1e-8)
            assert np.allclose(y[2:4], xt_co, atol=1e-8)
            wrapped = ((y[4] - pt + math.pi) % (2 * math.pi)) - math.pi
            assert abs(wrapped) < 1e-8

    def test_h_matrix_consistent_with_rates(self, sphere, plane):
        xi_cf0, xi_co0, psi0, _ = self.truth(0.0, sphere, plane)
        to = G.tensors(plane, xi_co0)
        H = G.H_matrix(xi_cf0, psi0, sphere, to)
        R_fc = G.gauss_frame(sphere, xi_cf0)
        R_cp = R_fc.T @ self.R_pf(0.0).T
        d_cf, *_ = G.rolling_rates(
            xi_cf0, xi_co0, psi0, sphere, plane,
            self.omega_f, np.zeros(3), self.R_pf(0.0), self.R_po,
        )
        assert np.allclose(H @ R_cp @ self.omega_f, d_cf, atol=1e-12)

    def test_h_matrix_rate_fd_consistency(self, sphere):
        to = G.flat_tensors()
        xi = np.array([0.3, -1.2])
        d_xi = np.array([0.7, -0.4])
        psi, d_psi = 0.9, 0.25
        Hdot = G.H_matrix_rate(xi, psi, sphere, to, d_xi, d_psi)
        eps = 1e-7
        ref = (G.H_matrix(xi + eps * d_xi, psi + eps * d_psi, sphere, to)
               - G.H_matrix(xi - eps * d_xi, psi - eps * d_psi, sphere, to)) / (2 * eps)
        assert np.allclose(Hdot, ref, atol=1e-5)

    def test_flat_on_flat_degenerate(self, plane):
        with pytest.raises(G.RollingDegenerate):
            G.H_matrix([0.0, 0.0], 0.0, plane, G.flat_tensors())
