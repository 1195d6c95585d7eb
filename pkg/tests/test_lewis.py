import numpy as np
import pytest

from lewislp import (
    compute_apx_weight,
    compute_exact_weight,
    compute_initial_weight,
    leverage_scores,
    lewis_jacobian_apply,
    lewis_residual,
    lewis_sigma,
    volumetric_gradient,
    volumetric_potential,
)
from lewislp.errors import InvalidP, InvalidTolerance, NotConverged
from lewislp.lewis import LewisParams, apx_eps_cap

from conftest import gauss
from oracles import gradient_fd


def converged_weight(A, p, eps=1e-11):
    return compute_initial_weight(A, p, eps)


class TestVolumetricPotential:
    def test_identity_all_ones(self):
        for p in (0.5, 1.0, 3.0):
            assert volumetric_potential(np.eye(3), np.ones(3), p) == pytest.approx(0.0, abs=1e-12)

    def test_scalar_hand_case(self):
        # A = [1; 1], w = (1/2, 1/2), p = 1: A.T W^-1 A = 4, value = log 4
        A = np.ones((2, 1))
        val = volumetric_potential(A, np.full(2, 0.5), 1.0)
        assert val == pytest.approx(np.log(4.0))

    def test_rejects_p_two(self):
        with pytest.raises(InvalidP):
            volumetric_potential(np.eye(2), np.ones(2), 2.0)

    @pytest.mark.parametrize("p", [0.7, 1.0, 3.0])
    def test_gradient_matches_finite_differences(self, p):
        A = gauss(8, 3, 21)
        w = np.random.default_rng(22).uniform(0.3, 1.0, 8)
        g = volumetric_gradient(A, w, p)
        fd = gradient_fd(lambda v: volumetric_potential(A, v, p), w, h=1e-5)
        np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-7)


class TestVolumetricGradient:
    def test_square_invertible_gives_minus_one(self):
        A = np.array([[2.0, 1.0], [0.5, 3.0]])
        np.testing.assert_allclose(
            volumetric_gradient(A, np.ones(2), 1.0), -np.ones(2), atol=1e-12
        )

    def test_stationary_at_fixed_point(self):
        A = gauss(12, 3, 4)
        eps = 1e-9
        w = converged_weight(A, 1.0, eps)
        assert np.max(np.abs(1.0 + volumetric_gradient(A, w, 1.0))) <= 2 * eps


class TestLewisResidual:
    def test_zero_at_fixed_point(self):
        A = gauss(10, 2, 8)
        w = converged_weight(A, 1.0)
        assert lewis_residual(A, w, 1.0) <= 1e-9

    def test_symmetric_column(self):
        A = np.ones((3, 1))
        for p in (0.5, 1.0, 3.0):
            assert lewis_residual(A, np.full(3, 1.0 / 3.0), p) <= 1e-12

    def test_scaled_weight_positive_residual(self):
        A = gauss(9, 3, 5)
        w = converged_weight(A, 1.0)
        res = lewis_residual(A, 2.0 * w, 1.0)
        assert res > 0.01
        sigma = lewis_sigma(A, 2.0 * w, 1.0)
        assert res == pytest.approx(np.max(np.abs(sigma - 2 * w) / (2 * w)))


class TestComputeExactWeight:
    @pytest.mark.parametrize("p", [0.5, 1.0, 3.0])
    def test_fixed_point_is_stationary(self, p):
        A = gauss(14, 3, 31)
        w = converged_weight(A, p)
        out = compute_exact_weight(A, p, w, 1e-9)
        assert lewis_residual(A, out, p) <= 1e-9

    def test_symmetry_oracle_n1(self):
        # w0 strays slightly past the clamp radius, so only moderate accuracy
        # is reachable in one call; the symmetric answer is still recovered
        A = np.ones((4, 1))
        w0 = np.array([0.26, 0.24, 0.25, 0.25])
        eps = 1e-2
        out = compute_exact_weight(A, 1.0, w0, eps)
        np.testing.assert_allclose(out, np.full(4, 0.25), atol=0.25 * eps)

    def test_symmetry_oracle_n1_inside_basin(self):
        A = np.ones((4, 1))
        w0 = np.array([0.252, 0.248, 0.25, 0.25])
        out = compute_exact_weight(A, 1.0, w0, 1e-10)
        np.testing.assert_allclose(out, np.full(4, 0.25), atol=1e-9)

    def test_random_20x4_with_homotopy_start(self):
        A = gauss(20, 4, 17)
        w = compute_initial_weight(A, 1.0, 1e-8)
        assert lewis_residual(A, w, 1.0) <= 1e-7

    def test_far_start_not_converged(self):
        A = gauss(10, 2, 13)
        w0 = np.full(10, 1e-3)
        with pytest.raises(NotConverged):
            compute_exact_weight(A, 0.5, w0, 1e-10)

    def test_contraction_rate(self):
        # squared distance to the fixed point in the W_p^-1 norm contracts at
        # least as fast as the guaranteed linear rate, every iteration
        p = 1.0
        A = gauss(15, 3, 44)
        wp = converged_weight(A, p, 1e-12)
        r = p / (20.0 * (p + 2.0))
        rng = np.random.default_rng(9)
        w0 = wp * (1.0 + r / 2.0 * rng.uniform(-1.0, 1.0, 15))
        history = []
        compute_exact_weight(A, p, w0, 1e-10, history=history)
        rate = (1.0 - 1.0 / (16.0 * (p / 2.0 + 2.0 / p))) * (1.0 + 1e-6)
        d2 = [float(np.sum((w - wp) ** 2 / wp)) for w in history]
        for a, b in zip(d2, d2[1:]):
            if a < 1e-20:
                break
            assert b <= a * rate


class TestComputeApxWeight:
    def test_exact_backend_agrees_with_exact_solver(self):
        A = gauss(16, 4, 3)
        w0 = converged_weight(A, 1.0) * 1.001
        eps = 1e-6
        a = compute_apx_weight(A, 1.0, w0, eps, seed=0, score_mode="exact", clamp_radius=0.01)
        b = compute_exact_weight(A, 1.0, w0, eps)
        assert np.max(np.abs(a / b - 1.0)) <= 2 * eps

    def test_randomized_close_to_truth_over_seeds(self):
        A = gauss(50, 5, 77)
        wp = converged_weight(A, 1.0)
        rng = np.random.default_rng(5)
        ok = 0
        for seed in range(100):
            w0 = wp * (1.0 + 1e-4 * rng.uniform(-1.0, 1.0, 50))
            try:
                w = compute_apx_weight(A, 1.0, w0, 1e-3, seed=seed)
            except NotConverged:
                continue
            if np.max(np.abs(w / wp - 1.0)) <= 1e-3:
                ok += 1
        assert ok >= 95

    def test_sketch_route_runs(self):
        A = gauss(12, 2, 15)
        wp = converged_weight(A, 1.0)
        w = compute_apx_weight(A, 1.0, wp, 0.9, seed=1, score_mode="sketch", clamp_radius=0.01)
        assert lewis_residual(A, w, 1.0) <= 3 * 0.9

    def test_p_out_of_range(self):
        with pytest.raises(InvalidP):
            compute_apx_weight(np.eye(3), 5.0, np.ones(3), 0.1)

    def test_eps_above_cap(self):
        assert apx_eps_cap(3.0) == pytest.approx(1.0 / 3.0)
        with pytest.raises(InvalidTolerance):
            compute_apx_weight(np.eye(3), 3.0, np.ones(3), 0.5)


class TestComputeInitialWeight:
    def test_p2_is_exact_leverage(self):
        A = gauss(25, 4, 6)
        w = compute_initial_weight(A, 2.0, 1e-6)
        np.testing.assert_allclose(w, leverage_scores(A), atol=1e-10)

    def test_uniform_column(self):
        m = 6
        A = np.ones((m, 1))
        p = 1.0 - 1.0 / np.log(4.0 * m)
        w = compute_initial_weight(A, p, 1e-9)
        np.testing.assert_allclose(w, np.full(m, 1.0 / m), atol=1e-8)

    @pytest.mark.parametrize("p", [0.5, 1.0, 3.0])
    def test_mass_and_residual(self, p):
        A = gauss(18, 4, 51)
        eps = 1e-8
        w = compute_initial_weight(A, p, eps)
        assert lewis_residual(A, w, p) <= 3 * eps
        assert abs(w.sum() - 4.0) <= 4.0 * eps

    def test_approximate_mode(self):
        A = gauss(20, 3, 52)
        w = compute_initial_weight(A, 1.0, 1e-5, mode="approximate", seed=7)
        assert lewis_residual(A, w, 1.0) <= 3e-5

    def test_params_validation(self):
        with pytest.raises(InvalidP):
            LewisParams(p=5.0, eps=0.1, mode="approximate")
        with pytest.raises(InvalidP):
            compute_initial_weight(np.eye(3), -1.0, 1e-6)


class TestRoundingProperties:
    @pytest.mark.parametrize("p,r", [(0.5, 1.0), (1.0, 2.0), (1.0, 4.0)])
    def test_exponent_change_bound(self, p, r):
        # sigma(W^(1/2-1/r) A) / w stays below 2 m^(alpha/(1+alpha)) for w = w_p
        A = gauss(14, 3, 61)
        w = converged_weight(A, p)
        alpha = 2.0 / p - 2.0 / r
        bound = 2.0 * 14 ** (alpha / (1.0 + alpha)) + 1e-6
        ratios = lewis_sigma(A, w, r) / w
        assert np.max(ratios) <= bound

    def test_ellipsoid_rounding(self):
        # any x with ||A x||_inf <= 1 satisfies x^T A^T W A x <= n
        A = gauss(16, 4, 62)
        w = converged_weight(A, 1.0)
        M = A.T @ (w[:, None] * A)
        rng = np.random.default_rng(8)
        for _ in range(50):
            y = rng.standard_normal(4)
            x = y / np.max(np.abs(A @ y))
            assert x @ M @ x <= 4.0 + 1e-8


class TestJacobian:
    def test_zero_direction(self):
        A = gauss(10, 3, 71)
        out = lewis_jacobian_apply(A, np.ones(10), np.zeros(10), 1.0)
        np.testing.assert_allclose(out, np.zeros(10), atol=1e-12)

    def test_matches_finite_differences(self):
        p = 1.0
        A = gauss(10, 3, 72)
        rng = np.random.default_rng(73)
        v = rng.uniform(0.5, 1.5, 10)
        w = compute_initial_weight(v[:, None] * A, p, 1e-12)
        for k in range(3):
            h = rng.standard_normal(10)
            jh = lewis_jacobian_apply(A, v, h, p, w=w)
            t = 1e-6
            wp = compute_exact_weight((v + t * h)[:, None] * A, p, w, 1e-12)
            wm = compute_exact_weight((v - t * h)[:, None] * A, p, w, 1e-12)
            fd = (wp - wm) / (2.0 * t)
            assert np.max(np.abs(jh - fd)) <= 1e-4 * max(np.max(np.abs(jh)), 1e-12)

    def test_stability_bound(self):
        # ||W^-1 J h||_w <= p ||V^-1 h||_w
        p = 1.0
        A = gauss(12, 3, 74)
        rng = np.random.default_rng(75)
        v = rng.uniform(0.5, 2.0, 12)
        w = compute_initial_weight(v[:, None] * A, p, 1e-12)
        for _ in range(100):
            h = rng.standard_normal(12)
            jh = lewis_jacobian_apply(A, v, h, p, w=w)
            lhs = np.sqrt(np.sum(w * (jh / w) ** 2))
            rhs = p * np.sqrt(np.sum(w * (h / v) ** 2))
            assert lhs <= rhs + 1e-8
