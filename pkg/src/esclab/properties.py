"""Randomized verification suites for the estimator and step-size.

Each suite pits a closed-form quantity against an independent oracle:

    exactness    analytic gradients of random quadratic costs,
    containment  random curvature-bounded costs (quadratic plus a
                 sine ripple whose Hessian provably stays inside the
                 declared bounds) versus the error ellipsoid,
    step-size    Monte-Carlo maximization over sampled feasible
                 estimation errors versus the closed-form step-size,
    omega        Monte-Carlo curvature sampling (plus the explicit
                 extremal curvature construction) versus the noise
                 interval.

The suites are deterministic given their seed and report violation
counts plus the worst observed statistic, so they can serve both as
pytest assertions and as a command-line verification mode.
"""

import time
from dataclasses import dataclass

import numpy as np

from .controller import compute_step_size, worst_case_error
from .estimator import (
    CurvatureBounds,
    GradientEstimate,
    SampleBatch,
    error_ellipsoid_residual,
    estimate_gradient,
    omega_interval,
)
from .numerics import sym_sqrt, weighted_norm

__all__ = [
    "SuiteResult",
    "random_spd",
    "random_bounds",
    "random_quadratic_instance",
    "random_rippled_instance",
    "run_exactness_suite",
    "run_containment_suite",
    "run_step_size_suite",
    "run_omega_suite",
    "ALL_SUITES",
]


@dataclass
class SuiteResult:
    name: str
    trials: int
    violations: int
    worst: float
    detail: str
    elapsed: float

    @property
    def passed(self):
        return self.violations == 0

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status} {self.name}: {self.trials} trials, "
            f"{self.violations} violations, {self.detail} ({self.elapsed:.2f} s)"
        )


def random_spd(rng, n, scale=1.0):
    """Random symmetric positive definite matrix with eigenvalues O(scale)."""
    A = rng.normal(size=(n, n))
    return scale * (A @ A.T / n + 0.1 * np.eye(n))


def random_bounds(rng, n, spread_scale=1.0):
    """Random curvature bounds with a full-rank range."""
    H_med = rng.normal(size=(n, n))
    H_med = 0.5 * (H_med + H_med.T)
    half_spread = 0.5 * random_spd(rng, n, spread_scale)
    return CurvatureBounds(H_med - half_spread, H_med + half_spread)


def _random_batch(rng, n, horizon, center, spread):
    """Outputs scattered around ``center`` with full-rank increments."""
    ys = center + spread * rng.normal(size=(horizon + 1, n))
    return ys


def random_quadratic_instance(rng, max_dim=4):
    """Quadratic cost with exact bounds plus a random excited batch.

    Returns (batch, bounds, true_gradient_at_reference).
    """
    n = int(rng.integers(1, max_dim + 1))
    H = rng.normal(size=(n, n))
    H = 0.5 * (H + H.T) * rng.uniform(0.5, 5.0)
    y_star = rng.normal(size=n) * 5.0
    r = y_star + rng.normal(size=n) * 3.0
    horizon = int(rng.integers(max(n, 2), n + 6))
    ys = _random_batch(rng, n, horizon, r + rng.normal(size=n), rng.uniform(0.2, 2.0))
    costs = np.array([0.5 * (y - y_star) @ H @ (y - y_star) for y in ys])
    batch = SampleBatch(outputs=ys, costs=costs, reference=r)
    theta_true = H @ (r - y_star)
    return batch, CurvatureBounds.exact(H), theta_true


def random_rippled_instance(rng, max_dim=3):
    """Cost with curvature confined to random bounds, plus a batch.

    The cost is J(y) = 0.5 (y-c)' H_med (y-c) + b sin(q'y + phase) with
    q = spread^(1/2) v, ||v|| = 1 and |b| <= 1/2, whose Hessian
    H_med - b sin(.) q q' stays between the bounds for every y.
    Returns (batch, bounds, true_gradient_at_reference).
    """
    n = int(rng.integers(1, max_dim + 1))
    bounds = random_bounds(rng, n, spread_scale=rng.uniform(0.5, 3.0))
    H_med = bounds.med
    spread_sqrt = sym_sqrt(bounds.spread)
    v = rng.normal(size=n)
    v /= np.linalg.norm(v)
    q = spread_sqrt @ v
    b = rng.uniform(-0.5, 0.5)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    c = rng.normal(size=n) * 2.0

    def cost(y):
        d = y - c
        return 0.5 * d @ H_med @ d + b * np.sin(q @ y + phase)

    r = rng.normal(size=n) * 2.0
    horizon = int(rng.integers(max(n, 2), n + 6))
    y_t = r + rng.normal(size=n) * rng.uniform(0.01, 1.0)
    ys = np.vstack([y_t + rng.normal(size=(horizon, n)) * rng.uniform(0.05, 1.5), y_t])
    costs = np.array([cost(y) for y in ys])
    batch = SampleBatch(outputs=ys, costs=costs, reference=r)
    theta_true = H_med @ (r - c) + b * np.cos(q @ r + phase) * q
    return batch, bounds, theta_true


def run_exactness_suite(trials=100, tol=1e-9, seed=20260810, max_dim=4):
    """Quadratic cost + exact bounds must reproduce the gradient exactly."""
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    worst = 0.0
    violations = 0
    done = 0
    while done < trials:
        batch, bounds, theta_true = random_quadratic_instance(rng, max_dim)
        est = estimate_gradient(batch, bounds)
        if not est.valid:
            continue
        done += 1
        err = np.linalg.norm(est.theta - theta_true)
        scaled = err / (1.0 + np.linalg.norm(theta_true))
        worst = max(worst, scaled)
        if scaled > tol:
            violations += 1
    return SuiteResult(
        name="estimator-exactness",
        trials=done,
        violations=violations,
        worst=worst,
        detail=f"max scaled error {worst:.3e} (tol {tol:.0e})",
        elapsed=time.perf_counter() - start,
    )


def run_containment_suite(trials=1000, slack=1e-9, seed=20260810, max_dim=3):
    """Error-ellipsoid residual must never exceed 1 for in-bounds costs."""
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    worst = 0.0
    violations = 0
    done = 0
    while done < trials:
        batch, bounds, theta_true = random_rippled_instance(rng, max_dim)
        est = estimate_gradient(batch, bounds)
        if not est.valid:
            continue
        done += 1
        resid = error_ellipsoid_residual(est, theta_true)
        worst = max(worst, resid)
        if resid > 1.0 + slack:
            violations += 1
    return SuiteResult(
        name="containment",
        trials=done,
        violations=violations,
        worst=worst,
        detail=f"max residual {worst:.6f} (bound 1 + {slack:.0e})",
        elapsed=time.perf_counter() - start,
    )


def _random_estimate(rng, n):
    """Random valid estimate with a random SPD covariance."""
    cov = random_spd(rng, n, scale=float(rng.uniform(0.05, 4.0)) ** 2)
    w, V = np.linalg.eigh(cov)
    cov_sqrt = (V * np.sqrt(w)) @ V.T
    info = (V / w) @ V.T
    theta = rng.normal(size=n) * rng.uniform(0.1, 5.0)
    return GradientEstimate(valid=True, info=info, theta=theta, cov=cov, cov_sqrt=cov_sqrt)


def run_step_size_suite(
    trials=1000,
    samples=100_000,
    gap_tol=1e-3,
    sound_tol=1e-9,
    seed=20260810,
    rules=("sqrt_form", "full_form"),
    max_dim=3,
):
    """Closed-form step-size versus Monte-Carlo game maximization.

    For each random (theta, cov, K) and each rule, feasible errors are
    sampled on the boundary of the matching ellipsoid. Soundness: the
    closed form's worst-case value must dominate every sample. Gap: the
    clipped step-sizes must agree within the sampling tolerance; with
    1e5 uniform directions that resolution is only attainable up to
    dimension 3, which caps ``max_dim``.
    """
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    worst_gap = 0.0
    violations = 0
    for _ in range(trials):
        n = int(rng.integers(1, max_dim + 1))
        est = _random_estimate(rng, n)
        K = random_spd(rng, n, scale=float(rng.uniform(0.2, 2.0)))
        Z = rng.normal(size=(samples, n))
        Z /= np.linalg.norm(Z, axis=1, keepdims=True)
        descent = float(est.theta @ K @ est.theta)
        for rule in rules:
            scale = est.cov_sqrt if rule == "sqrt_form" else est.cov
            c = scale @ K @ est.theta
            sampled_max = float(np.max(Z @ c)) / descent
            closed_max = float(np.linalg.norm(c)) / descent
            alpha_closed = compute_step_size(est, K, rule)
            alpha_sampled = max(0.0, 1.0 - sampled_max)
            gap = abs(alpha_closed - alpha_sampled)
            worst_gap = max(worst_gap, gap)
            sound = closed_max >= sampled_max - sound_tol
            theta_star = worst_case_error(est, K, rule)
            star_val = float(theta_star @ K @ est.theta) / descent
            star_sound = star_val >= sampled_max - sound_tol
            if gap > gap_tol or not sound or not star_sound:
                violations += 1
    return SuiteResult(
        name="step-size-game",
        trials=trials * len(rules),
        violations=violations,
        worst=worst_gap,
        detail=f"max alpha gap {worst_gap:.2e} (tol {gap_tol:.0e})",
        elapsed=time.perf_counter() - start,
    )


def _random_bounded_curvatures(rng, spread_sqrt, n, count):
    """Curvature samples H_med + spread^(1/2) S spread^(1/2) / 2, ||S|| <= 1."""
    A = rng.normal(size=(count, n, n))
    S = 0.5 * (A + np.transpose(A, (0, 2, 1)))
    norms = np.abs(np.linalg.eigvalsh(S)).max(axis=1)
    S /= np.maximum(norms, 1e-12)[:, None, None]
    S *= rng.uniform(0.0, 1.0, size=count)[:, None, None]
    return 0.5 * np.einsum("ij,kjl,lm->kim", spread_sqrt, S, spread_sqrt)


def run_omega_suite(instances=500, samples=2000, tightness=0.95, seed=20260810, max_dim=3):
    """Noise-interval soundness and tightness under curvature sampling.

    Soundness: no sampled (H1, H2) pair within the bounds produces a
    noise value outside the interval. Tightness: the extremal
    construction (extreme quadratic-form bound plus the rank-two trace
    projector for the cross term) must reach at least ``tightness`` of
    the halfwidth on each side.
    """
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    violations = 0
    worst_ratio = np.inf
    for _ in range(instances):
        n = int(rng.integers(1, max_dim + 1))
        bounds = random_bounds(rng, n, spread_scale=rng.uniform(0.3, 3.0))
        dy = rng.normal(size=n) * rng.uniform(0.1, 2.0)
        e = rng.normal(size=n) * rng.uniform(0.0, 2.0)
        interval = omega_interval(dy, e, bounds)
        H_med = bounds.med
        spread_sqrt = sym_sqrt(bounds.spread)

        dH1 = _random_bounded_curvatures(rng, spread_sqrt, n, samples)
        dH2 = _random_bounded_curvatures(rng, spread_sqrt, n, samples)
        omega1 = 0.5 * (dy @ H_med @ dy + np.einsum("i,kij,j->k", dy, dH1, dy))
        omega2 = e @ H_med @ dy + np.einsum("i,kij,j->k", e, dH2, dy)
        omegas = omega1 - omega2

        # extremal construction: quadratic form at the bound extremes,
        # cross term at the rank-two trace projectors
        a = spread_sqrt @ dy
        b = spread_sqrt @ e
        extremal = []
        for sign in (+1.0, -1.0):
            H1 = bounds.upper if sign > 0 else bounds.lower
            if np.linalg.norm(a) > 1e-12 and np.linalg.norm(b) > 1e-12:
                v = a / np.linalg.norm(a) - sign * b / np.linalg.norm(b)
                if np.linalg.norm(v) > 1e-12:
                    v /= np.linalg.norm(v)
                    H2 = bounds.lower + spread_sqrt @ np.outer(v, v) @ spread_sqrt
                else:
                    H2 = bounds.lower
            else:
                H2 = bounds.lower
            extremal.append(0.5 * dy @ H1 @ dy - e @ H2 @ dy)
        omegas = np.concatenate([omegas, extremal])

        lo_ok = np.all(omegas >= interval.lo - 1e-9 * (1.0 + interval.halfwidth))
        hi_ok = np.all(omegas <= interval.hi + 1e-9 * (1.0 + interval.halfwidth))
        if interval.halfwidth > 1e-9:
            reach = np.max(np.abs(omegas - interval.center)) / interval.halfwidth
            worst_ratio = min(worst_ratio, reach)
            tight_ok = reach >= tightness
        else:
            tight_ok = True
        if not (lo_ok and hi_ok and tight_ok):
            violations += 1
    return SuiteResult(
        name="omega-interval",
        trials=instances,
        violations=violations,
        worst=worst_ratio,
        detail=f"min extremal reach {worst_ratio:.4f} of halfwidth (need {tightness})",
        elapsed=time.perf_counter() - start,
    )


ALL_SUITES = {
    "exactness": run_exactness_suite,
    "containment": run_containment_suite,
    "step-size": run_step_size_suite,
    "omega": run_omega_suite,
}
