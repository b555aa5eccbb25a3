"""Gradient-estimator tests: weighting, information, exactness, intervals.

The quadratic-exactness tests double as the anchor for the sign
conventions (dy_k = y_k - y_t, dJ_k = J_k - J_t, e_t = r_t - y_t): with
any other combination the correction term fails to cancel the curvature
contribution and these tests break at machine precision.
"""

import numpy as np
import pytest

from esclab.estimator import (
    DEFAULT_W_MAX,
    CurvatureBounds,
    SampleBatch,
    build_information,
    compute_weight,
    error_ellipsoid_residual,
    estimate_gradient,
    omega_interval,
)
from esclab.numerics import sym_sqrt
from esclab.properties import random_quadratic_instance, random_rippled_instance


class TestCurvatureBounds:
    def test_median_and_spread(self):
        b = CurvatureBounds.isotropic(0.0, 10.0, 2)
        np.testing.assert_allclose(b.med, 5.0 * np.eye(2))
        np.testing.assert_allclose(b.spread, 10.0 * np.eye(2))

    def test_spread_must_be_psd(self):
        with pytest.raises(ValueError, match="positive semi-definite"):
            CurvatureBounds(np.eye(2), np.zeros((2, 2)))

    def test_lipschitz_has_zero_median(self):
        b = CurvatureBounds.lipschitz(2.0, 3)
        np.testing.assert_allclose(b.med, np.zeros((3, 3)))
        np.testing.assert_allclose(b.spread, 4.0 * np.eye(3))

    def test_exact_has_zero_spread(self):
        H = np.array([[2.0, 0.5], [0.5, 1.0]])
        b = CurvatureBounds.exact(H)
        np.testing.assert_allclose(b.spread, np.zeros((2, 2)))


class TestComputeWeight:
    def test_scalar_example(self):
        # spread 2, |dy| = 1, e = 0: denominator = sqrt(2)/2 * sqrt(2)/2 = 1/2
        b = CurvatureBounds.isotropic(0.0, 2.0, 1)
        assert compute_weight([1.0], [0.0], b) == pytest.approx(2.0)

    def test_zero_spread_saturates(self):
        b = CurvatureBounds.exact(np.array([[4.0]]))
        assert compute_weight([1.0], [0.5], b) == DEFAULT_W_MAX

    def test_vanishing_increment_saturates(self):
        b = CurvatureBounds.isotropic(0.0, 2.0, 1)
        assert compute_weight([0.0], [1.0], b) == DEFAULT_W_MAX

    def test_lipschitz_only_form(self):
        # with bounds +-h I the weight evaluates to
        # 2 / (h ||dy||^2 (2 ||e|| + ||dy||)); at h = 1/2 this coincides
        # with the h^2-normalized shorthand 1/(h^2 ||dy||^2 (2||e|| + ||dy||))
        rng = np.random.default_rng(2)
        for _ in range(50):
            n = int(rng.integers(1, 4))
            dy = rng.normal(size=n)
            e = rng.normal(size=n)
            for h in (0.5, 1.0, 2.0, 3.7):
                b = CurvatureBounds.lipschitz(h, n)
                ndy, ne = np.linalg.norm(dy), np.linalg.norm(e)
                expected = 2.0 / (h * ndy**2 * (2.0 * ne + ndy))
                assert compute_weight(dy, e, b) == pytest.approx(expected, rel=1e-12)
        b = CurvatureBounds.lipschitz(0.5, 1)
        assert compute_weight([2.0], [1.0], b) == pytest.approx(
            1.0 / (0.5**2 * 4.0 * (2.0 + 2.0)), rel=1e-12
        )

    def test_weight_decreases_with_error_and_transient(self):
        b = CurvatureBounds.isotropic(-1.0, 1.0, 2)
        w_small = compute_weight([0.1, 0.0], [0.1, 0.0], b)
        w_large_e = compute_weight([0.1, 0.0], [1.0, 0.0], b)
        w_large_dy = compute_weight([1.0, 0.0], [0.1, 0.0], b)
        assert w_large_e < w_small and w_large_dy < w_small


def _batch_around(y_t, offsets, cost_fn, reference):
    ys = np.vstack([y_t + np.atleast_2d(offsets), y_t])
    costs = np.array([cost_fn(y) for y in ys])
    return SampleBatch(outputs=ys, costs=costs, reference=reference)


class TestBuildInformation:
    def test_no_excitation_gives_zero(self):
        b = CurvatureBounds.isotropic(0.0, 2.0, 1)
        batch = _batch_around(np.zeros(1), np.zeros((3, 1)), lambda y: 0.0, np.zeros(1))
        np.testing.assert_allclose(build_information(batch, b), np.zeros((1, 1)))

    def test_scalar_hand_sum(self):
        # bounds [-2, 2] and e = 0 make each unit increment carry weight
        # 1 / (0.5 * 1 * 2 * (0 + 1)) = 1, so info = (1 + 1) / 2 = 1
        b = CurvatureBounds.isotropic(-2.0, 2.0, 1)
        batch = _batch_around(
            np.zeros(1), np.array([[1.0], [-1.0]]), lambda y: 0.0, np.zeros(1)
        )
        np.testing.assert_allclose(build_information(batch, b), [[1.0]], rtol=1e-12)

    def test_excited_batch_is_positive_definite(self):
        rng = np.random.default_rng(4)
        b = CurvatureBounds.isotropic(0.0, 3.0, 2)
        batch = _batch_around(
            rng.normal(size=2), rng.normal(size=(6, 2)), lambda y: float(y @ y), rng.normal(size=2)
        )
        info = build_information(batch, b)
        assert np.linalg.eigvalsh(info)[0] > 0

    def test_reorder_invariance(self):
        rng = np.random.default_rng(9)
        b = CurvatureBounds.isotropic(-1.0, 4.0, 2)
        offsets = rng.normal(size=(5, 2))
        r = rng.normal(size=2)
        batch = _batch_around(np.zeros(2), offsets, lambda y: float(y @ y), r)
        shuffled = _batch_around(np.zeros(2), offsets[::-1], lambda y: float(y @ y), r)
        np.testing.assert_allclose(
            build_information(batch, b), build_information(shuffled, b), atol=1e-12
        )


class TestSampleBatch:
    def test_horizon_below_dimension_rejected(self):
        with pytest.raises(ValueError, match="below the output dimension"):
            SampleBatch(outputs=np.zeros((2, 2)), costs=np.zeros(2), reference=np.zeros(2))

    def test_tracking_error(self):
        batch = SampleBatch(
            outputs=np.array([[1.0], [2.0]]), costs=np.zeros(2), reference=np.array([5.0])
        )
        np.testing.assert_allclose(batch.tracking_error, [3.0])


class TestEstimateGradient:
    def test_quadratic_exactness_pins_sign_convention(self):
        rng = np.random.default_rng(21)
        for _ in range(200):
            batch, bounds, theta_true = random_quadratic_instance(rng)
            est = estimate_gradient(batch, bounds)
            if not est.valid:
                continue
            err = np.linalg.norm(est.theta - theta_true)
            assert err <= 1e-9 * (1.0 + np.linalg.norm(theta_true))

    def test_all_equal_outputs_invalid(self):
        b = CurvatureBounds.isotropic(0.0, 2.0, 1)
        batch = _batch_around(np.ones(1), np.zeros((4, 1)), lambda y: 1.0, np.ones(1))
        est = estimate_gradient(batch, b)
        assert not est.valid
        assert est.theta is None and est.cov is None

    def test_cov_times_info_is_identity(self):
        rng = np.random.default_rng(23)
        for _ in range(50):
            batch, bounds, _ = random_rippled_instance(rng)
            est = estimate_gradient(batch, bounds)
            if not est.valid:
                continue
            n = est.info.shape[0]
            np.testing.assert_allclose(est.cov @ est.info, np.eye(n), atol=1e-6)
            np.testing.assert_allclose(est.cov_sqrt @ est.cov_sqrt, est.cov, atol=1e-6)

    def test_residual_bounded_for_confined_curvature(self):
        rng = np.random.default_rng(29)
        checked = 0
        while checked < 300:
            batch, bounds, theta_true = random_rippled_instance(rng)
            est = estimate_gradient(batch, bounds)
            if not est.valid:
                continue
            checked += 1
            assert error_ellipsoid_residual(est, theta_true) <= 1.0 + 1e-9


class TestOmegaInterval:
    def test_exact_bounds_no_tracking_error(self):
        H = np.array([[3.0, 1.0], [1.0, 2.0]])
        b = CurvatureBounds.exact(H)
        dy = np.array([1.0, -2.0])
        iv = omega_interval(dy, np.zeros(2), b)
        assert iv.halfwidth == 0.0
        assert iv.center == pytest.approx(0.5 * dy @ H @ dy)

    def test_scalar_interval(self):
        b = CurvatureBounds.isotropic(0.0, 2.0, 1)
        iv = omega_interval([1.0], [0.0], b)
        assert iv.lo == pytest.approx(0.0)
        assert iv.hi == pytest.approx(1.0)

    def test_zero_increment_rejected(self):
        b = CurvatureBounds.isotropic(0.0, 2.0, 1)
        with pytest.raises(ValueError, match="vanishing"):
            omega_interval([0.0], [1.0], b)

    def test_monte_carlo_soundness(self):
        rng = np.random.default_rng(31)
        for _ in range(50):
            n = int(rng.integers(1, 4))
            lo = rng.normal(size=(n, n))
            lo = 0.5 * (lo + lo.T)
            spread = rng.normal(size=(n, n))
            spread = spread @ spread.T
            b = CurvatureBounds(lo, lo + spread)
            dy = rng.normal(size=n)
            if np.linalg.norm(dy) < 1e-6:
                continue
            e = rng.normal(size=n)
            iv = omega_interval(dy, e, b)
            root = sym_sqrt(b.spread)
            for _ in range(200):
                S1, S2 = rng.normal(size=(2, n, n))
                S1, S2 = 0.5 * (S1 + S1.T), 0.5 * (S2 + S2.T)
                for S in (S1, S2):
                    nm = np.max(np.abs(np.linalg.eigvalsh(S)))
                    if nm > 1.0:
                        S /= nm
                H1 = b.med + 0.5 * root @ S1 @ root
                H2 = b.med + 0.5 * root @ S2 @ root
                omega = 0.5 * dy @ H1 @ dy - e @ H2 @ dy
                assert iv.contains(omega, slack=1e-9 * (1.0 + iv.halfwidth))

    def test_halfwidth_matches_weight(self):
        # interval halfwidth must equal 1 / (w ||dy||): the estimator's
        # ellipsoid bound depends on this identity
        rng = np.random.default_rng(37)
        for _ in range(100):
            n = int(rng.integers(1, 4))
            b = CurvatureBounds.lipschitz(float(rng.uniform(0.1, 3.0)), n)
            dy = rng.normal(size=n)
            e = rng.normal(size=n)
            if np.linalg.norm(dy) < 1e-6:
                continue
            iv = omega_interval(dy, e, b)
            w = compute_weight(dy, e, b)
            np.testing.assert_allclose(
                iv.halfwidth, 1.0 / (w * np.linalg.norm(dy)), rtol=1e-9
            )


class TestErrorEllipsoidResidual:
    def test_zero_at_estimate(self):
        rng = np.random.default_rng(41)
        batch, bounds, _ = random_quadratic_instance(rng)
        est = estimate_gradient(batch, bounds)
        assert est.valid
        assert error_ellipsoid_residual(est, est.theta) == 0.0

    def test_invalid_estimate_rejected(self):
        b = CurvatureBounds.isotropic(0.0, 2.0, 1)
        batch = _batch_around(np.ones(1), np.zeros((4, 1)), lambda y: 1.0, np.ones(1))
        est = estimate_gradient(batch, b)
        with pytest.raises(ValueError, match="valid estimate"):
            error_ellipsoid_residual(est, np.zeros(1))
