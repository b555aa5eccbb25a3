"""Adaptive-step-size extremum-seeking update law and gain tuning.

The controller is a gated discrete-time integrator on the reference:

    r_next = r - alpha * K @ theta_hat     if alpha >= alpha_min
    r_next = r                             otherwise (exploration)

where the step-size alpha is the closed-form solution of a two-player
game: the controller picks the largest step that still decreases the
joint Lyapunov function for the *worst-case* gradient estimation error
inside the estimator's error ellipsoid.

Two ellipsoid parameterizations are supported, because the estimator's
containment guarantee (|| info @ err || <= 1, i.e. err = cov @ z with
||z|| <= 1) and the step-size formula as usually written
(1 - ||cov^(1/2) K theta|| / ||theta||_K^2, i.e. err = cov^(1/2) @ z)
are not the same set:

    sqrt_form:  alpha = max(0, 1 - ||cov^(1/2) @ K @ theta|| / ||theta||_K^2)
    full_form:  alpha = max(0, 1 - ||cov @ K @ theta||       / ||theta||_K^2)

Both rules are exact maximizers for their own ellipsoid; the choice is
a config knob (sqrt_form is the default). Whenever cov <= I, which is
the regime where the controller actually steps, sqrt_form is the more
conservative of the two.
"""

from dataclasses import dataclass, replace

import numpy as np

from .numerics import (
    as_symmetric,
    as_vector,
    is_psd,
    solve_discrete_lyapunov,
    spectral_radius,
    sym_inverse,
)

__all__ = [
    "STEP_RULES",
    "ControllerConfig",
    "ControllerState",
    "GainSynthesisProblem",
    "compute_step_size",
    "worst_case_error",
    "controller_step",
    "verify_gain",
    "synthesize_linear_gain",
]

STEP_RULES = ("sqrt_form", "full_form")

#: ||theta||_K^2 below this means a confidently-zero gradient: do not step
MIN_DESCENT_NORM = 1e-15


@dataclass(frozen=True)
class ControllerConfig:
    """Gain, exploration threshold, batch horizon, and step-size rule."""

    gain: np.ndarray
    alpha_min: float = 0.01
    horizon: int = 5
    step_rule: str = "sqrt_form"

    def __post_init__(self):
        K = as_symmetric(self.gain)
        w = np.linalg.eigvalsh(K)
        if w[0] <= 0:
            raise ValueError("controller gain K must be symmetric positive definite")
        if not 0.0 < self.alpha_min < 1.0:
            raise ValueError("alpha_min must lie in (0, 1)")
        if self.step_rule not in STEP_RULES:
            raise ValueError(f"step_rule must be one of {STEP_RULES}")
        if self.horizon < 1:
            raise ValueError("batch horizon must be at least 1")
        object.__setattr__(self, "gain", K)


@dataclass(frozen=True)
class ControllerState:
    """Reference estimate, current mode, and the last step-size used."""

    reference: np.ndarray
    mode: str = "exploration"
    last_alpha: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "reference", as_vector(self.reference))
        if self.mode not in ("exploration", "exploitation"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not 0.0 <= self.last_alpha <= 1.0:
            raise ValueError("last_alpha must lie in [0, 1]")


@dataclass(frozen=True)
class GainSynthesisProblem:
    """Linear-plant data for structural gain tuning.

    A, B describe the discrete-time plant, Q > 0 weights its Lyapunov
    function, and H_upper is the curvature upper bound of the cost.
    """

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    H_upper: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        if B.shape[0] != A.shape[0]:
            B = B.reshape(A.shape[0], -1)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "Q", as_symmetric(self.Q))
        object.__setattr__(self, "H_upper", as_symmetric(self.H_upper))
        if spectral_radius(A) >= 1.0:
            raise ValueError("plant matrix A must be Schur stable (rho < 1)")
        if np.linalg.eigvalsh(self.Q)[0] <= 0:
            raise ValueError("Q must be positive definite")


def compute_step_size(estimate, K, rule="sqrt_form"):
    """Worst-case-optimal step-size in [0, 1].

    Zero when the estimate is invalid or the descent direction is
    confidently zero; otherwise 1 minus the worst-case ratio between the
    adversarial error component along the descent direction and the
    descent magnitude ||theta||_K^2.
    """
    if rule not in STEP_RULES:
        raise ValueError(f"step rule must be one of {STEP_RULES}")
    if not estimate.valid:
        return 0.0
    K = as_symmetric(K)
    theta = estimate.theta
    descent = float(theta @ K @ theta)
    if descent <= MIN_DESCENT_NORM:
        return 0.0
    scale = estimate.cov_sqrt if rule == "sqrt_form" else estimate.cov
    worst = float(np.linalg.norm(scale @ K @ theta))
    return float(np.clip(1.0 - worst / descent, 0.0, 1.0))


def worst_case_error(estimate, K, rule="sqrt_form"):
    """Maximizer of err' K theta_hat over the error ellipsoid.

    The adversarial error does not rotate the descent direction; it
    amplifies it. Under sqrt_form the ellipsoid is {cov^(1/2) z : ||z||<=1}
    and the maximizer is cov^(1/2) c / ||c|| with c = cov^(1/2) K theta;
    full_form replaces cov^(1/2) by cov.
    """
    if rule not in STEP_RULES:
        raise ValueError(f"step rule must be one of {STEP_RULES}")
    if not estimate.valid:
        raise ValueError("worst-case error requires a valid estimate")
    K = as_symmetric(K)
    scale = estimate.cov_sqrt if rule == "sqrt_form" else estimate.cov
    c = scale @ K @ estimate.theta
    norm = np.linalg.norm(c)
    if norm < 1e-300:
        raise ValueError("descent direction is degenerate; worst case undefined")
    return scale @ (c / norm)


def controller_step(state, estimate, config):
    """One update of the gated integrator.

    Computes alpha for the current estimate; at or above the threshold
    the reference descends the estimated gradient (exploitation), below
    it the reference is frozen while the dither keeps probing the plant
    (exploration).
    """
    alpha = compute_step_size(estimate, config.gain, config.step_rule)
    if alpha >= config.alpha_min:
        r_next = state.reference - alpha * (config.gain @ estimate.theta)
        return ControllerState(reference=r_next, mode="exploitation", last_alpha=alpha)
    return replace(state, mode="exploration", last_alpha=alpha)


def verify_gain(K, H_upper, gamma, tol=1e-9):
    """Check the stability condition K - K (H_upper + gamma I) K >= 0.

    Equivalent to K^{-1} >= H_upper + gamma I for K > 0. ``gamma``
    captures the plant's Lyapunov constants (zero for a static plant).
    ``tol`` is the absolute eigenvalue slack for the PSD test, so
    boundary gains pass.
    """
    K = as_symmetric(K)
    if np.linalg.eigvalsh(K)[0] <= 0:
        raise ValueError("gain K must be positive definite")
    H_upper = as_symmetric(H_upper)
    n = K.shape[0]
    M = K - K @ (H_upper + gamma * np.eye(n)) @ K
    return is_psd(as_symmetric(M, rtol=1e-9), tol=tol)


def synthesize_linear_gain(prob):
    """Largest scalar gain K = k I passing the linear-plant condition.

    Solves the discrete Lyapunov equation A' P A - P = -Q, bounds the
    equilibrium-shift sensitivity through W = (I - A)^{-1} B, forms

        M = H_upper + W' (P + P Q^{-1} P) W,

    and returns K = (1 / lambda_max(M)) I, the largest scalar gain with
    K^{-1} >= M. The output always satisfies the corresponding PSD check
    at tolerance 1e-9 (boundary equality by construction).
    """
    P = solve_discrete_lyapunov(prob.A, prob.Q)
    n = prob.A.shape[0]
    W = np.linalg.solve(np.eye(n) - prob.A, prob.B)
    Qinv, _ = sym_inverse(prob.Q)
    M = as_symmetric(prob.H_upper + W.T @ (P + P @ Qinv @ P) @ W, rtol=1e-6)
    lam_max = np.linalg.eigvalsh(M)[-1]
    if lam_max <= 0:
        raise ValueError("synthesis matrix M is not positive definite; no scalar gain exists")
    K = (1.0 / lam_max) * np.eye(M.shape[0])
    if not verify_gain(K, M, gamma=0.0, tol=1e-9):
        raise ValueError("synthesized gain failed its own PSD verification")
    return K
