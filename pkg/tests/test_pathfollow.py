import math

import numpy as np
import pytest

from lewislp.errors import ValidationError
from lewislp.pathfollow import (
    ChasingConfig,
    LpProblem,
    PathConfig,
    PathState,
    SolveStats,
    centering_inexact,
    chasing_step,
    delta_from_eta,
    log_phi_potential,
    mixed_norm,
    newton_step,
    path_following,
    phi_potential,
    project_mixed_ball,
    weight_function,
)

from oracles import mixed_ball_value_grid


def box_problem(m, n, seed, half_width=1.0):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    x0 = rng.uniform(-0.4, 0.4, m) * half_width
    b = A.T @ x0
    c = rng.standard_normal(m)
    prob = LpProblem(A=A, b=b, c=c,
                     lower=-half_width * np.ones(m), upper=half_width * np.ones(m))
    return prob, x0


def centered_state(prob, x0, cfg, t=1.0, seed=0):
    """State that is exactly centered: the cost is reverse-engineered so the
    penalized gradient lies in the image of A."""
    w = weight_function(prob, x0, cfg, eps=1e-11, seed=seed)
    _, d1, _, _ = prob.stack.eval(x0)
    rng = np.random.default_rng(seed + 1)
    eta0 = rng.standard_normal(prob.shape[1])
    cost = (prob.A @ eta0 - w * d1) / t
    return PathState(x=x0, w=w, t=t), cost


def bump_to_delta(prob, state, cost, cfg, target):
    """Scale t up so the measured centrality lands near the target."""
    _, d1, d2, _ = prob.stack.eval(state.x)
    growth = mixed_norm(d1 / np.sqrt(d2), state.w, cfg.cnorm)
    s = target / growth
    st = PathState(x=state.x, w=state.w, t=(1.0 + s) * state.t)
    _, rep = newton_step(prob, st, cfg, cost)
    return st, rep


class TestMixedNorm:
    def test_zero(self):
        assert mixed_norm(np.zeros(4), np.ones(4), 5.0) == 0.0

    def test_unit_vector(self):
        v = np.zeros(3)
        v[0] = 1.0
        assert mixed_norm(v, np.ones(3), 2.0) == pytest.approx(3.0)

    def test_triangle_inequality(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            w = rng.uniform(0.1, 2.0, 6)
            a, b = rng.standard_normal(6), rng.standard_normal(6)
            assert mixed_norm(a + b, w, 3.0) <= mixed_norm(a, w, 3.0) + mixed_norm(b, w, 3.0) + 1e-12


class TestProjectMixedBall:
    def test_zero_vector(self):
        np.testing.assert_array_equal(project_mixed_ball(np.zeros(5), np.ones(5)), np.zeros(5))

    def test_scalar_closed_form(self):
        x = project_mixed_ball(np.array([1.0]), np.array([1.0]))
        assert x[0] == pytest.approx(0.5)

    def test_l2_ball_limit(self):
        x = project_mixed_ball(np.eye(5)[0], 1e6 * np.ones(5))
        assert 1.0 - 1e-5 <= x[0] <= 1.0

    @pytest.mark.parametrize("seed", range(10))
    def test_against_grid_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 30))
        a = rng.standard_normal(n) * 10 ** rng.uniform(-1, 1)
        l = rng.uniform(0.1, 10.0, n)
        x = project_mixed_ball(a, l)
        assert np.linalg.norm(x) + np.max(np.abs(x / l)) <= 1.0 + 1e-9
        ref = mixed_ball_value_grid(a, l, grid=4000)
        assert a @ x == pytest.approx(ref, rel=1e-6)

    def test_rejects_bad_caps(self):
        with pytest.raises(ValidationError):
            project_mixed_ball(np.ones(2), np.array([1.0, 0.0]))


class TestChasingStep:
    CFG = ChasingConfig(r_noise=0.05, eps=0.15)

    def test_zero_gap_zero_move(self):
        x = np.log(np.full(6, 0.3))
        out = chasing_step(x, x, 0.1, np.full(6, 0.3), self.CFG, 3.0)
        np.testing.assert_array_equal(out, np.zeros(6))

    def test_single_coordinate_gap(self):
        w = np.full(6, 0.2)
        x = np.zeros(6)
        z = np.zeros(6)
        z[2] = -0.5  # x is above the target at coordinate 2
        out = chasing_step(x, z, 0.05, w, self.CFG, 3.0)
        assert out[2] < 0  # move opposes the gap
        assert np.abs(out[2]) == np.max(np.abs(out))

    def test_move_stays_in_scaled_ball(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            w = rng.uniform(0.05, 1.0, 8)
            x = rng.standard_normal(8)
            z = x + rng.standard_normal(8) * 0.1
            r = rng.uniform(0.01, 0.2)
            out = chasing_step(x, z, r, w, self.CFG, 4.0)
            assert mixed_norm(out, w, 4.0) <= (1.0 + self.CFG.eps) * r * (1 + 1e-9)


class TestPotential:
    def test_sandwich(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            m = int(rng.integers(2, 40))
            v = rng.standard_normal(m) * 10 ** rng.uniform(-1, 2)
            mu = 10 ** rng.uniform(-2, 1)
            lp = log_phi_potential(v, mu)
            top = mu * np.max(np.abs(v))
            assert top <= lp + 1e-12
            assert lp <= top + math.log(2 * m) + 1e-12

    def test_small_values_match_direct(self):
        v = np.array([0.3, -0.2, 0.1])
        direct = float(np.sum(np.exp(2 * v) + np.exp(-2 * v)))
        assert phi_potential(v, 2.0) == pytest.approx(direct)

    def test_chasing_config_invariant(self):
        cfg = ChasingConfig(r_noise=0.25, eps=0.12)
        assert cfg.mu * cfg.r_noise == pytest.approx(cfg.eps / 12.0)
        with pytest.raises(ValidationError):
            ChasingConfig(r_noise=0.1, eps=0.3)


class TestNewtonStep:
    def test_centered_point_zero_delta(self):
        prob, x0 = box_problem(12, 4, 21)
        cfg = PathConfig.for_problem(prob, "strict")
        state, cost = centered_state(prob, x0, cfg)
        _, rep = newton_step(prob, state, cfg, cost)
        assert rep.delta_hat <= 1e-8

    def test_null_space(self):
        prob, x0 = box_problem(14, 4, 22)
        cfg = PathConfig.for_problem(prob, "practical")
        w = weight_function(prob, x0, cfg, eps=1e-9)
        state = PathState(x=x0, w=w, t=0.7)
        h, _ = newton_step(prob, state, cfg)
        lhs = np.max(np.abs(prob.A.T @ h))
        assert lhs <= 1e-8 * (1.0 + np.max(np.abs(prob.A)) * np.max(np.abs(h)))

    def test_surrogate_two_routes_agree(self):
        prob, x0 = box_problem(10, 3, 23)
        cfg = PathConfig.for_problem(prob, "strict")
        w = weight_function(prob, x0, cfg, eps=1e-10)
        state = PathState(x=x0, w=w, t=0.3)
        _, rep = newton_step(prob, state, cfg)
        other = delta_from_eta(prob, state, rep.eta, cfg)
        cg = cfg.c_gamma
        assert other / rep.delta_hat <= cg + 1e-9
        assert rep.delta_hat / other <= cg + 1e-9

    @pytest.mark.parametrize("d", [0.1, 0.05, 0.01])
    def test_quadratic_convergence(self, d):
        prob, x0 = box_problem(16, 4, 24)
        cfg = PathConfig.for_problem(prob, "strict")
        state, cost = centered_state(prob, x0, cfg)
        st, rep = bump_to_delta(prob, state, cost, cfg, d)
        d0 = rep.delta_hat
        assert 0.2 * d <= d0 <= 2.0 * d
        h, _ = newton_step(prob, st, cfg, cost)
        st2 = PathState(x=st.x + h, w=st.w, t=st.t)
        _, rep2 = newton_step(prob, st2, cfg, cost)
        assert rep2.delta_hat <= 8.0 * d0**2 + 1e-8

    def test_t_scaling_bound(self):
        prob, x0 = box_problem(12, 3, 25)
        cfg = PathConfig.for_problem(prob, "strict")
        state, cost = centered_state(prob, x0, cfg)
        st, rep = bump_to_delta(prob, state, cost, cfg, 1e-3)
        alpha = 0.5
        st2 = PathState(x=st.x, w=st.w, t=(1 + alpha) * st.t)
        _, rep2 = newton_step(prob, st2, cfg, cost)
        bound = (1 + alpha) * rep.delta_hat + alpha * (
            1.0 + cfg.cnorm * math.sqrt(float(np.sum(st.w)))
        )
        assert rep2.delta_hat <= bound + 1e-8


class TestWeightFunction:
    def test_symmetric_box_equal_weights(self):
        # identity-padded constraint matrix, symmetric box, centered point
        m, n = 8, 4
        A = np.vstack([np.eye(n), np.eye(n)])
        prob = LpProblem(A=A, b=np.zeros(n), c=np.zeros(m),
                         lower=-np.ones(m), upper=np.ones(m))
        cfg = PathConfig.for_problem(prob, "strict")
        w = weight_function(prob, np.zeros(m), cfg, eps=1e-10)
        assert np.max(np.abs(w - w[0])) <= 1e-8

    def test_mass(self):
        prob, x0 = box_problem(15, 4, 31)
        cfg = PathConfig.for_problem(prob, "strict")
        w = weight_function(prob, x0, cfg, eps=1e-9)
        assert abs(float(np.sum(w - cfg.c0)) - 4.0) <= 1e-6
        assert np.all(w > cfg.c0) and np.all(w <= 1.0 + cfg.c0 + 1e-9)

    def test_log_move_bound(self):
        # a small x move changes log g by at most its own mixed-norm size
        prob, x0 = box_problem(12, 3, 32)
        cfg = PathConfig.for_problem(prob, "strict")
        g0 = weight_function(prob, x0, cfg, eps=1e-11)
        _, _, d2, _ = prob.stack.eval(x0)
        rng = np.random.default_rng(33)
        h = rng.standard_normal(12)
        size = 1e-3
        h *= size / mixed_norm(np.sqrt(d2) * h, g0, cfg.cnorm)
        g1 = weight_function(prob, x0 + h, cfg, eps=1e-11)
        move = mixed_norm(np.log(g1) - np.log(g0), g0, cfg.cnorm)
        assert move <= (1.0 - 1.0 / cfg.ck + 4.0 * size) * size + 1e-6


class TestCenteringInexact:
    def test_already_centered_fixed_point(self):
        prob, x0 = box_problem(12, 4, 41)
        cfg = PathConfig.for_problem(prob, "strict")
        state, cost = centered_state(prob, x0, cfg)
        out = centering_inexact(prob, state, cfg.kbound, cfg, seed=0, cost=cost)
        assert np.max(np.abs(out.x - state.x)) <= 1e-8
        assert np.max(np.abs(np.log(out.w) - np.log(state.w))) <= 1e-6

    def test_single_step_contraction_strict(self):
        prob, x0 = box_problem(20, 4, 42)
        cfg = PathConfig.for_problem(prob, "strict")
        state, cost = centered_state(prob, x0, cfg)
        st, rep = bump_to_delta(prob, state, cost, cfg, cfg.rcent / 2.0)
        st.last_report = rep
        out = centering_inexact(prob, st, cfg.kbound, cfg, seed=0, cost=cost)
        factor = out.last_report.delta_hat / rep.delta_hat
        assert factor <= 1.0 - 1.0 / (8.0 * cfg.ck)

    def test_weight_gap_invariant_strict(self):
        prob, x0 = box_problem(14, 3, 43)
        cfg = PathConfig.for_problem(prob, "strict")
        state, cost = centered_state(prob, x0, cfg)
        st, rep = bump_to_delta(prob, state, cost, cfg, cfg.rcent / 2.0)
        out = centering_inexact(prob, st, cfg.kbound, cfg, seed=1, cost=cost)
        g_new = weight_function(prob, out.x, cfg, eps=1e-11)
        gap = np.max(np.abs(np.log(g_new) - np.log(out.w)))
        assert gap <= cfg.kbound


class TestPathFollowing:
    def test_t_start_equals_t_end_polish_only(self):
        prob, x0 = box_problem(10, 3, 51)
        cfg = PathConfig.for_problem(prob, "practical")
        state, cost = centered_state(prob, x0, cfg)
        st, rep = bump_to_delta(prob, state, cost, cfg, 0.02)
        st.last_report = rep
        stats = SolveStats()
        out = path_following(prob, st, st.t, 1e-9, cfg, seed=0, cost=cost, stats=stats)
        assert out.t == st.t
        assert out.last_report.delta_hat <= max(1e-9, 8 * out.last_report.delta_floor)

    def test_doubling_t_keeps_invariants(self):
        prob, x0 = box_problem(10, 2, 52)
        cfg = PathConfig.for_problem(prob, "practical")
        state, cost = centered_state(prob, x0, cfg)
        stats = SolveStats()
        out = path_following(prob, state, 2.0 * state.t, 1e-6, cfg, seed=0,
                             cost=cost, stats=stats)
        assert out.t == 2.0 * state.t
        assert stats.violations == []
        assert stats.drift_max <= 0.1 + 1e-9

    def test_distance_to_polished_center(self):
        # after polishing, a reference center confirms the distance bound
        prob, x0 = box_problem(12, 3, 53)
        cfg = PathConfig.for_problem(prob, "practical")
        state, cost = centered_state(prob, x0, cfg)
        st, rep = bump_to_delta(prob, state, cost, cfg, 1e-3)
        st.last_report = rep
        d0 = rep.delta_hat
        ref = path_following(prob, st, st.t, 1e-13, cfg, seed=0, cost=cost)
        _, _, d2_ref, _ = prob.stack.eval(ref.x)
        dist = np.max(np.abs(np.sqrt(d2_ref) * (st.x - ref.x)))
        assert dist <= 8.0 * d0
