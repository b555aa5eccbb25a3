"""Weighted batch least-squares gradient estimation with set-bounded errors.

The estimator treats the unknown cost J as an exact linear regression in
the output increments,

    dJ_k = dy_k' theta + omega_k,      dy_k = y_k - y_t,
                                       dJ_k = J(y_k) - J(y_t),

where theta = grad J(r_t) is the steady-state cost gradient at the
current reference and the "noise" omega_k collects the curvature terms.
Because the cost curvature is known to lie between the bounds H_lower
and H_upper, omega_k is confined to a computable interval rather than a
stochastic model. Centering the regression on that interval yields the
correction term dy_k' H_med (e_t - dy_k/2) with e_t = r_t - y_t, and
the interval halfwidth defines the weighting

    w_k = 1 / ( 0.5 ||dy_k|| ||dy_k||_Ht ( ||e_t||_Ht + 0.5 ||dy_k||_Ht ) )

with Ht = H_upper - H_lower. The resulting estimate comes with a hard
error ellipsoid: || info @ (theta_hat - theta) || <= 1.

Sign conventions matter here: dy_k = y_k - y_t, dJ_k = J(y_k) - J(y_t),
e_t = r_t - y_t. Under these, the estimate is *exact* for a quadratic
cost with exact curvature bounds, which is the property the unit tests
pin down.
"""

from dataclasses import dataclass

import numpy as np

from .numerics import as_symmetric, as_vector, is_psd, sym_inverse, weighted_norm

__all__ = [
    "CurvatureBounds",
    "SampleBatch",
    "GradientEstimate",
    "ErrorInterval",
    "compute_weight",
    "build_information",
    "estimate_gradient",
    "omega_interval",
    "error_ellipsoid_residual",
    "DEFAULT_W_MAX",
    "DEFAULT_COND_THRESH",
    "MIN_REGRESSOR_NORM",
    "MIN_INFO_EIG",
]

#: weight saturation replacing the unbounded weight of perfect data
DEFAULT_W_MAX = 1e12

#: information-matrix condition number above which estimates are invalid
DEFAULT_COND_THRESH = 1e10

#: output increments below this norm carry no regressor information
MIN_REGRESSOR_NORM = 1e-12

#: information-matrix eigenvalues below this are treated as singular
MIN_INFO_EIG = 1e-12


@dataclass(frozen=True)
class CurvatureBounds:
    """Matrix bounds H_lower <= hessian(J) <= H_upper on the cost curvature.

    The median curvature ``med`` = (H_upper + H_lower)/2 centers the
    estimator's correction term; the curvature range
    ``spread`` = H_upper - H_lower (required PSD) scales the weighting.
    Both are derived, never stored, so they cannot drift out of sync.
    """

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = as_symmetric(self.lower)
        hi = as_symmetric(self.upper)
        if lo.shape != hi.shape:
            raise ValueError(f"bound shapes differ: {lo.shape} vs {hi.shape}")
        if not is_psd(hi - lo):
            raise ValueError("H_upper - H_lower must be positive semi-definite")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self):
        return self.lower.shape[0]

    @property
    def med(self):
        """Median curvature (H_upper + H_lower) / 2."""
        return 0.5 * (self.upper + self.lower)

    @property
    def spread(self):
        """Curvature range H_upper - H_lower (PSD)."""
        return self.upper - self.lower

    @classmethod
    def exact(cls, H):
        """Zero-uncertainty bounds for a cost with known Hessian H."""
        H = as_symmetric(H)
        return cls(H, H)

    @classmethod
    def lipschitz(cls, h, n):
        """Bounds [-h I, h I] encoding only a Lipschitz constant on the gradient."""
        if h < 0:
            raise ValueError("Lipschitz constant must be non-negative")
        return cls(-h * np.eye(n), h * np.eye(n))

    @classmethod
    def isotropic(cls, lo, hi, n):
        """Scalar bounds [lo I, hi I] in dimension n."""
        return cls(lo * np.eye(n), hi * np.eye(n))


@dataclass(frozen=True)
class SampleBatch:
    """Window of the last N+1 output/cost measurements plus the reference.

    ``outputs[k]`` and ``costs[k]`` hold (y_k, J_k) for k = t-N .. t in
    chronological order, so ``outputs[-1]`` is the current measurement
    that all regressors difference against. The horizon N must be at
    least the output dimension for the information matrix to be
    invertible at all.
    """

    outputs: np.ndarray
    costs: np.ndarray
    reference: np.ndarray

    def __post_init__(self):
        y = np.atleast_2d(np.asarray(self.outputs, dtype=float))
        if y.shape[0] == 1 and np.asarray(self.outputs).ndim == 1:
            # a 1-D array of scalar outputs, not one multivariate sample
            y = y.T
        J = as_vector(self.costs)
        r = as_vector(self.reference)
        if y.shape[0] != J.shape[0]:
            raise ValueError("outputs and costs must have the same length")
        if y.shape[0] < 2:
            raise ValueError("a batch needs at least two samples")
        if y.shape[1] != r.shape[0]:
            raise ValueError("reference dimension must match output dimension")
        if y.shape[0] - 1 < y.shape[1]:
            raise ValueError(
                f"batch horizon N={y.shape[0] - 1} is below the output dimension {y.shape[1]}"
            )
        if not np.all(np.isfinite(y)):
            raise ValueError("outputs contain non-finite entries")
        object.__setattr__(self, "outputs", y)
        object.__setattr__(self, "costs", J)
        object.__setattr__(self, "reference", r)

    @property
    def horizon(self):
        """Batch horizon N; the batch stores N+1 samples."""
        return self.outputs.shape[0] - 1

    @property
    def dim(self):
        return self.outputs.shape[1]

    @property
    def current_output(self):
        return self.outputs[-1]

    @property
    def current_cost(self):
        return float(self.costs[-1])

    @property
    def tracking_error(self):
        """e_t = r_t - y_t."""
        return self.reference - self.outputs[-1]


@dataclass(frozen=True)
class GradientEstimate:
    """Gradient estimate with its information matrix and error ellipsoid.

    When ``valid``, the estimation error theta_hat - grad J(r_t) is
    guaranteed to satisfy || info @ error || <= 1 for any cost whose
    curvature stays within the declared bounds, and ``cov`` and
    ``cov_sqrt`` are the inverse and inverse square root of ``info``.
    When invalid (insufficient excitation), only ``info`` is populated.
    """

    valid: bool
    info: np.ndarray
    theta: np.ndarray = None
    cov: np.ndarray = None
    cov_sqrt: np.ndarray = None

    @classmethod
    def invalid(cls, info):
        return cls(valid=False, info=info)


@dataclass(frozen=True)
class ErrorInterval:
    """Line interval center + halfwidth * [-1, 1]."""

    center: float
    halfwidth: float

    def __post_init__(self):
        if self.halfwidth < 0:
            raise ValueError("halfwidth must be non-negative")

    def contains(self, value, slack=0.0):
        return abs(value - self.center) <= self.halfwidth + slack

    @property
    def lo(self):
        return self.center - self.halfwidth

    @property
    def hi(self):
        return self.center + self.halfwidth


def _regressors(batch, bounds, w_max):
    """Increment matrix, keep-mask, and weights for the batch window.

    Rows are dy_k = y_k - y_t for the N window points; the mask drops
    increments below MIN_REGRESSOR_NORM (no regressor information).
    """
    dy = batch.outputs[:-1] - batch.outputs[-1]
    norms = np.linalg.norm(dy, axis=1)
    keep = norms >= MIN_REGRESSOR_NORM
    Ht = bounds.spread
    dy_ht = np.sqrt(np.clip(np.einsum("ki,ij,kj->k", dy, Ht, dy), 0.0, None))
    e_ht = weighted_norm(batch.tracking_error, Ht)
    denom = 0.5 * norms * dy_ht * (e_ht + 0.5 * dy_ht)
    weights = np.where(denom <= 1.0 / w_max, w_max, 1.0 / np.where(denom > 0, denom, 1.0))
    return dy, keep, weights


def compute_weight(delta_y, e_t, bounds, w_max=DEFAULT_W_MAX):
    """Data-point weight from the curvature-range interval halfwidth.

    Returns min(w_max, 1 / (0.5 ||dy|| ||dy||_Ht (||e||_Ht + 0.5 ||dy||_Ht))).
    Degenerate denominators (vanishing increment, zero curvature range)
    saturate at w_max instead of dividing by zero, matching the limit of
    perfect data giving an arbitrarily tight ellipsoid.
    """
    dy = as_vector(delta_y)
    e = as_vector(e_t, dy.shape[0])
    Ht = bounds.spread
    dy_ht = weighted_norm(dy, Ht)
    denom = 0.5 * np.linalg.norm(dy) * dy_ht * (weighted_norm(e, Ht) + 0.5 * dy_ht)
    if denom <= 1.0 / w_max:
        return float(w_max)
    return 1.0 / denom


def build_information(batch, bounds, w_max=DEFAULT_W_MAX):
    """Information matrix (1/N) sum_k w_k dy_k dy_k' over the batch window.

    Increments with ||dy_k|| below MIN_REGRESSOR_NORM are skipped: their
    regressor carries no information and their weight would only inject
    the saturation value. The 1/N normalization always uses the full
    horizon, not the number of surviving points, because the error
    ellipsoid bound is derived against the full horizon.
    """
    if bounds.dim != batch.dim:
        raise ValueError("curvature bounds dimension must match the batch")
    dy, keep, weights = _regressors(batch, bounds, w_max)
    info = (weights[keep, None] * dy[keep]).T @ dy[keep] / batch.horizon
    if not keep.any():
        info = np.zeros((batch.dim, batch.dim))
    return as_symmetric(info, rtol=1e-9)


def estimate_gradient(
    batch,
    bounds,
    w_max=DEFAULT_W_MAX,
    cond_thresh=DEFAULT_COND_THRESH,
):
    """Weighted BLS gradient estimate with tracking-error compensation.

    theta_hat = (cov/N) sum_k w_k dy_k (dJ_k + dy_k' H_med (e_t - dy_k/2))

    with dy_k = y_k - y_t, dJ_k = J_k - J_t and e_t = r_t - y_t. The
    correction term re-centers the curvature noise interval so that the
    regression residual is symmetric, which also makes the estimate
    exact for quadratic costs with exact bounds.

    Returns an invalid estimate (not an error) when the information
    matrix is singular or ill-conditioned beyond ``cond_thresh``; the
    caller is expected to fall back to exploration.
    """
    if bounds.dim != batch.dim:
        raise ValueError("curvature bounds dimension must match the batch")
    dy, keep, weights = _regressors(batch, bounds, w_max)
    info = (weights[keep, None] * dy[keep]).T @ dy[keep] / batch.horizon
    if not keep.any():
        info = np.zeros((batch.dim, batch.dim))
    info = as_symmetric(info, rtol=1e-9)
    w = np.linalg.eigvalsh(info)
    if w[0] < MIN_INFO_EIG or w[-1] > cond_thresh * w[0]:
        return GradientEstimate.invalid(info)

    e_t = batch.tracking_error
    dJ = batch.costs[:-1] - batch.costs[-1]
    correction = np.einsum("ki,ij,kj->k", dy, bounds.med, e_t[None, :] - 0.5 * dy)
    rhs = (weights[keep] * (dJ[keep] + correction[keep])) @ dy[keep] / batch.horizon

    # info^{-1/2} from the same eigendecomposition is cov^{1/2}
    cov, cov_sqrt = sym_inverse(info)
    theta = cov @ rhs
    return GradientEstimate(
        valid=True, info=info, theta=theta, cov=cov, cov_sqrt=cov_sqrt
    )


def omega_interval(delta_y, e_t, bounds):
    """Guaranteed interval for the curvature noise of one data point.

    Bounds omega = 0.5 dy' H1 dy - e' H2 dy over all curvature matrices
    H1, H2 between the declared bounds. The interval is

        -dy' H_med (e - dy/2)  +-  0.5 ||dy||_Ht (||e||_Ht + 0.5 ||dy||_Ht)

    and is tight: both endpoints are attained by explicit curvature
    choices (the quadratic form at an extreme bound, and the rank-two
    trace minimizer for the cross term). The halfwidth equals
    1 / (w_k ||dy||) with w_k the data-point weight.
    """
    dy = as_vector(delta_y)
    e = as_vector(e_t, dy.shape[0])
    if np.linalg.norm(dy) < MIN_REGRESSOR_NORM:
        raise ValueError("omega interval undefined for a vanishing output increment")
    Ht = bounds.spread
    dy_ht = weighted_norm(dy, Ht)
    center = -float(dy @ bounds.med @ (e - 0.5 * dy))
    halfwidth = 0.5 * dy_ht * (weighted_norm(e, Ht) + 0.5 * dy_ht)
    return ErrorInterval(center=center, halfwidth=halfwidth)


def error_ellipsoid_residual(estimate, theta_true):
    """Ellipsoid residual || info @ (theta_hat - theta_true) ||.

    At most 1 whenever the cost curvature stayed within the declared
    bounds over the sampled region (the containment guarantee).
    """
    if not estimate.valid:
        raise ValueError("ellipsoid residual requires a valid estimate")
    err = estimate.theta - as_vector(theta_true, estimate.theta.shape[0])
    return float(np.linalg.norm(estimate.info @ err))
