"""Controller tests: step-size game, worst case, gating, gain tuning."""

import numpy as np
import pytest
from scipy.optimize import NonlinearConstraint, minimize

from esclab.controller import (
    ControllerConfig,
    ControllerState,
    GainSynthesisProblem,
    compute_step_size,
    controller_step,
    synthesize_linear_gain,
    verify_gain,
    worst_case_error,
)
from esclab.estimator import GradientEstimate
from esclab.numerics import sym_inverse, sym_sqrt
from esclab.properties import random_spd


def make_estimate(theta, cov):
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    info, _ = sym_inverse(cov)
    return GradientEstimate(
        valid=True, info=info, theta=theta, cov=cov, cov_sqrt=sym_sqrt(cov)
    )


def invalid_estimate(n=1):
    return GradientEstimate.invalid(np.zeros((n, n)))


class TestComputeStepSize:
    def test_zero_gradient(self):
        est = make_estimate([0.0], [[1.0]])
        assert compute_step_size(est, np.eye(1)) == 0.0

    def test_perfect_information(self):
        est = make_estimate([1.0, -2.0], 1e-18 * np.eye(2))
        assert compute_step_size(est, np.eye(2)) == pytest.approx(1.0, abs=1e-8)

    def test_scalar_sqrt_form(self):
        est = make_estimate([1.0], [[0.25]])
        assert compute_step_size(est, np.eye(1), "sqrt_form") == pytest.approx(0.5)

    def test_scalar_full_form(self):
        est = make_estimate([1.0], [[0.25]])
        assert compute_step_size(est, np.eye(1), "full_form") == pytest.approx(0.75)

    def test_invalid_estimate(self):
        assert compute_step_size(invalid_estimate(), np.eye(1)) == 0.0

    def test_always_in_unit_interval(self):
        rng = np.random.default_rng(1)
        for _ in range(500):
            n = int(rng.integers(1, 5))
            est = make_estimate(rng.normal(size=n), random_spd(rng, n, rng.uniform(0.01, 10.0)))
            K = random_spd(rng, n)
            for rule in ("sqrt_form", "full_form"):
                alpha = compute_step_size(est, K, rule)
                assert 0.0 <= alpha <= 1.0

    def test_matches_numeric_game_maximization(self):
        # the closed form must agree with direct numeric maximization of
        # err' K theta over the matching ellipsoid (no change of variables)
        rng = np.random.default_rng(2)
        for trial in range(1000):
            n = int(rng.integers(1, 4))
            cov = random_spd(rng, n, float(rng.uniform(0.1, 2.0)))
            est = make_estimate(rng.normal(size=n) * rng.uniform(0.2, 3.0), cov)
            K = random_spd(rng, n)
            descent = est.theta @ K @ est.theta
            c = K @ est.theta
            for rule, shape in (("sqrt_form", est.cov), ("full_form", est.cov @ est.cov)):
                # ellipsoid: err' shape^{-1} err <= 1
                shape_inv, _ = sym_inverse(shape)
                con = NonlinearConstraint(lambda z: z @ shape_inv @ z, -np.inf, 1.0)
                x0 = np.zeros(n)
                res = minimize(
                    lambda z: -(z @ c), x0, constraints=[con], method="SLSQP",
                    options={"maxiter": 200, "ftol": 1e-14},
                )
                alpha_numeric = max(0.0, 1.0 - (-res.fun) / descent)
                alpha_closed = compute_step_size(est, K, rule)
                assert alpha_closed == pytest.approx(alpha_numeric, abs=1e-6)


class TestWorstCaseError:
    def test_unit_ball_aligned(self):
        est = make_estimate([3.0, 4.0], np.eye(2))
        star = worst_case_error(est, np.eye(2))
        np.testing.assert_allclose(star, est.theta / 5.0, atol=1e-12)

    def test_scalar_sqrt_form(self):
        est = make_estimate([3.0], [[4.0]])
        np.testing.assert_allclose(worst_case_error(est, np.eye(1), "sqrt_form"), [2.0])

    def test_scalar_full_form(self):
        est = make_estimate([3.0], [[4.0]])
        np.testing.assert_allclose(worst_case_error(est, np.eye(1), "full_form"), [4.0])

    def test_dominates_sampled_feasible_errors(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            n = int(rng.integers(1, 5))
            est = make_estimate(rng.normal(size=n), random_spd(rng, n))
            K = random_spd(rng, n)
            c = K @ est.theta
            for rule in ("sqrt_form", "full_form"):
                scale = est.cov_sqrt if rule == "sqrt_form" else est.cov
                star = worst_case_error(est, K, rule)
                best = star @ c
                assert best >= -1e-12  # never flips the descent direction
                Z = rng.normal(size=(10_000, n))
                Z /= np.linalg.norm(Z, axis=1, keepdims=True)
                sampled = (Z @ scale) @ c
                assert best >= sampled.max() - 1e-9

    def test_invalid_estimate_rejected(self):
        with pytest.raises(ValueError, match="valid estimate"):
            worst_case_error(invalid_estimate(), np.eye(1))


class TestControllerStep:
    def config(self, alpha_min=0.01, rule="sqrt_form"):
        return ControllerConfig(gain=np.eye(1), alpha_min=alpha_min, step_rule=rule)

    def test_invalid_estimate_freezes_reference(self):
        state = ControllerState(reference=np.array([1.5]))
        out = controller_step(state, invalid_estimate(), self.config())
        assert out.mode == "exploration"
        np.testing.assert_array_equal(out.reference, state.reference)
        assert out.last_alpha == 0.0

    def test_scalar_descent_step(self):
        # cov 1, theta 2: alpha = 1 - (1*2)/(2*2) = 0.5, step = -1
        est = make_estimate([2.0], [[1.0]])
        state = ControllerState(reference=np.zeros(1))
        out = controller_step(state, est, self.config())
        assert out.mode == "exploitation"
        assert out.last_alpha == pytest.approx(0.5)
        np.testing.assert_allclose(out.reference, [-1.0])

    def test_below_threshold_is_identity_on_reference(self):
        est = make_estimate([2.0], [[3.9601]])  # alpha = 1 - 1.99/2 = 0.005
        state = ControllerState(reference=np.array([0.7]))
        out = controller_step(state, est, self.config(alpha_min=0.01))
        assert out.mode == "exploration"
        assert out.last_alpha == pytest.approx(0.005)
        np.testing.assert_array_equal(out.reference, state.reference)

    def test_tie_at_threshold_exploits(self):
        est = make_estimate([2.0], [[1.0]])  # alpha = 0.5 exactly
        state = ControllerState(reference=np.zeros(1))
        out = controller_step(state, est, self.config(alpha_min=0.5))
        assert out.mode == "exploitation"

    def test_monotone_descent_quadratic_static(self):
        # static plant (y = r), quadratic cost with exact bounds, gain
        # passing the stability condition with gamma = 0: the set-point
        # cost never increases along exploitation steps
        rng = np.random.default_rng(5)
        for _ in range(20):
            n = int(rng.integers(1, 4))
            H = random_spd(rng, n)
            lam_max = np.linalg.eigvalsh(H)[-1]
            K = (0.5 / lam_max) * np.eye(n)
            assert verify_gain(K, H, gamma=0.0)
            y_star = rng.normal(size=n)
            r = y_star + rng.normal(size=n) * 5.0
            cost = lambda v: 0.5 * (v - y_star) @ H @ (v - y_star)
            cfg = ControllerConfig(gain=K, alpha_min=0.01)
            state = ControllerState(reference=r)
            prev = cost(r)
            for _ in range(50):
                est = make_estimate(H @ (state.reference - y_star), 1e-16 * np.eye(n))
                state = controller_step(state, est, cfg)
                now = cost(state.reference)
                if state.mode == "exploitation":
                    assert now <= prev + 1e-9
                prev = now


class TestVerifyGain:
    def test_half_inverse_bound_passes(self):
        rng = np.random.default_rng(7)
        H = random_spd(rng, 3)
        gamma = 0.7
        k = 0.5 / (np.linalg.eigvalsh(H)[-1] + gamma)
        assert verify_gain(k * np.eye(3), H, gamma)

    def test_double_inverse_bound_fails(self):
        rng = np.random.default_rng(8)
        H = random_spd(rng, 3)
        gamma = 0.7
        k = 2.0 / (np.linalg.eigvalsh(H)[-1] + gamma)
        assert not verify_gain(k * np.eye(3), H, gamma)

    def test_zero_curvature_small_gain(self):
        assert verify_gain(0.5 * np.eye(2), np.zeros((2, 2)), gamma=0.0)

    def test_boundary_case_passes_at_tolerance(self):
        # 1/K = 2 equals H_upper + gamma = 2: equality holds at tol
        assert verify_gain(np.array([[0.5]]), np.array([[2.0]]), gamma=0.0, tol=1e-9)

    def test_non_pd_gain_rejected(self):
        with pytest.raises(ValueError, match="positive definite"):
            verify_gain(np.zeros((2, 2)), np.eye(2), 0.0)


class TestSynthesizeLinearGain:
    def test_memoryless_identity_plant(self):
        prob = GainSynthesisProblem(
            A=np.zeros((2, 2)), B=np.eye(2), Q=np.eye(2), H_upper=np.zeros((2, 2))
        )
        K = synthesize_linear_gain(prob)
        np.testing.assert_allclose(K, 0.5 * np.eye(2), rtol=1e-12)

    def test_scalar_hand_computation(self):
        # a=0.5, b=1, Q=1, H_upper=1: P = 4/3,
        # M = 1 + 4 * (4/3 + 16/9) = 121/9, K = 9/121
        prob = GainSynthesisProblem(
            A=np.array([[0.5]]), B=np.array([[1.0]]), Q=np.array([[1.0]]),
            H_upper=np.array([[1.0]]),
        )
        K = synthesize_linear_gain(prob)
        np.testing.assert_allclose(K, [[9.0 / 121.0]], rtol=1e-12)

    def test_output_always_verifies(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            n = int(rng.integers(1, 4))
            A = rng.normal(size=(n, n))
            A *= rng.uniform(0.1, 0.9) / max(np.max(np.abs(np.linalg.eigvals(A))), 1e-9)
            prob = GainSynthesisProblem(
                A=A, B=rng.normal(size=(n, n)), Q=random_spd(rng, n),
                H_upper=random_spd(rng, n),
            )
            K = synthesize_linear_gain(prob)
            # the matrix the synthesis bounded against
            W = np.linalg.solve(np.eye(n) - prob.A, prob.B)
            Plyap = _dlyap(prob.A, prob.Q)
            M = prob.H_upper + W.T @ (Plyap + Plyap @ np.linalg.inv(prob.Q) @ Plyap) @ W
            M = 0.5 * (M + M.T)
            assert verify_gain(K, M, gamma=0.0, tol=1e-9)

    def test_unstable_plant_rejected(self):
        with pytest.raises(ValueError, match="Schur"):
            GainSynthesisProblem(
                A=np.array([[1.1]]), B=np.array([[1.0]]), Q=np.array([[1.0]]),
                H_upper=np.array([[0.0]]),
            )


def _dlyap(A, Q):
    import scipy.linalg

    return scipy.linalg.solve_discrete_lyapunov(A.T, Q)


class TestControllerConfig:
    def test_rejects_indefinite_gain(self):
        with pytest.raises(ValueError, match="positive definite"):
            ControllerConfig(gain=np.diag([1.0, -0.1]))

    def test_rejects_bad_alpha_min(self):
        with pytest.raises(ValueError, match="alpha_min"):
            ControllerConfig(gain=np.eye(1), alpha_min=1.5)

    def test_rejects_unknown_rule(self):
        with pytest.raises(ValueError, match="step_rule"):
            ControllerConfig(gain=np.eye(1), step_rule="other")
