"""Small dense symmetric-matrix utilities.

Everything in this package runs on matrices of dimension ~1-6 (gains,
curvature bounds, information matrices), so robustness beats speed:
all decompositions go through the symmetric eigensolver, and positive
semi-definiteness is always judged against an explicit tolerance.

Conventions:
    - matrices are plain float64 numpy arrays with value semantics,
    - the weighted 2-norm is ||v||_M = sqrt(v' M v),
    - the default PSD tolerance is 1e-9 * ||M||.
"""

import numpy as np
import scipy.linalg

__all__ = [
    "as_symmetric",
    "as_vector",
    "weighted_norm",
    "is_psd",
    "sym_eig",
    "sym_sqrt",
    "sym_inverse",
    "solve_discrete_lyapunov",
    "tr_minus",
    "tr_plus",
    "spectral_radius",
]

#: relative asymmetry allowed when validating a symmetric matrix
SYMMETRY_RTOL = 1e-12

#: default relative PSD tolerance (scaled by ||M||)
PSD_RTOL = 1e-9


def as_symmetric(M, rtol=SYMMETRY_RTOL):
    """Validate and return a square symmetric float64 matrix.

    Scalars become 1x1 matrices. Raises ValueError if the input is
    non-square, non-finite, or asymmetric beyond ``rtol`` relative to
    its norm. The returned matrix is exactly symmetrized, 0.5*(M+M').
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    scale = max(np.linalg.norm(M, ord=np.inf), 1.0)
    asym = np.max(np.abs(M - M.T))
    if asym > rtol * scale:
        raise ValueError(f"matrix is asymmetric: max |M - M'| = {asym:.3e}")
    return 0.5 * (M + M.T)


def as_vector(v, n=None):
    """Validate and return a finite 1-D float64 vector (scalars allowed)."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.ndim != 1:
        raise ValueError(f"expected a vector, got shape {v.shape}")
    if n is not None and v.shape[0] != n:
        raise ValueError(f"expected a vector of length {n}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return v


def weighted_norm(v, M):
    """Weighted 2-norm ||v||_M = sqrt(v' M v), clamping round-off negatives."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    q = float(v @ np.atleast_2d(M) @ v)
    return np.sqrt(max(q, 0.0))


def sym_eig(M):
    """Eigendecomposition of a symmetric matrix: (eigenvalues, eigenvectors).

    Thin wrapper over the LAPACK symmetric solver; callers rely on the
    eigenvalues being real and ascending.
    """
    return np.linalg.eigh(as_symmetric(M))


def is_psd(M, tol=None):
    """True iff the minimum eigenvalue of symmetric M is >= -tol.

    ``tol=None`` uses the default relative tolerance 1e-9 * ||M||.
    """
    M = as_symmetric(M)
    if tol is None:
        tol = PSD_RTOL * max(np.linalg.norm(M, 2), 1.0)
    w = np.linalg.eigvalsh(M)
    return bool(w[0] >= -tol)


def sym_sqrt(M, tol=None):
    """Symmetric PSD square root S of a PSD matrix M, with S @ S = M.

    Eigenvalues within ``tol`` below zero are treated as round-off and
    clamped; anything more negative raises ValueError.
    """
    M = as_symmetric(M)
    if tol is None:
        tol = PSD_RTOL * max(np.linalg.norm(M, 2), 1.0)
    w, V = np.linalg.eigh(M)
    if w[0] < -tol:
        raise ValueError(f"matrix is not PSD: min eigenvalue {w[0]:.3e}")
    S = (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T
    return 0.5 * (S + S.T)


def sym_inverse(M, min_eig=0.0):
    """Inverse of a symmetric PD matrix via eigendecomposition.

    Returns (Minv, Minv_sqrt_free) where the second element is the
    symmetric square root of Minv (it falls out of the same
    decomposition). Raises ValueError if any eigenvalue is <= min_eig.
    """
    M = as_symmetric(M)
    w, V = np.linalg.eigh(M)
    if w[0] <= min_eig:
        raise ValueError(f"matrix is not positive definite: min eigenvalue {w[0]:.3e}")
    Minv = (V / w) @ V.T
    Minv_sqrt = (V / np.sqrt(w)) @ V.T
    return 0.5 * (Minv + Minv.T), 0.5 * (Minv_sqrt + Minv_sqrt.T)


def solve_discrete_lyapunov(A, Q, residual_rtol=1e-9):
    """Solve A' P A - P = -Q for symmetric P > 0, given rho(A) < 1, Q > 0.

    Delegates to the SciPy Stein-equation solver and enforces the
    residual contract ||A'PA - P + Q|| <= residual_rtol * ||Q||.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    Q = as_symmetric(Q)
    if A.shape != Q.shape:
        raise ValueError(f"A and Q must share shape, got {A.shape} vs {Q.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("A has non-finite entries")
    rho = spectral_radius(A)
    if rho >= 1.0:
        raise ValueError(f"spectral radius of A is {rho:.6f} >= 1; no stable solution")
    # scipy solves A X A' - X = -Q; transpose A for the controller-form equation
    P = scipy.linalg.solve_discrete_lyapunov(A.T, Q)
    P = 0.5 * (P + P.T)
    residual = np.linalg.norm(A.T @ P @ A - P + Q, 2)
    if residual > residual_rtol * max(np.linalg.norm(Q, 2), 1e-300):
        raise ValueError(f"Lyapunov residual {residual:.3e} exceeds tolerance")
    return P


def tr_minus(M):
    """Sum of the negative eigenvalues of symmetric M."""
    w = np.linalg.eigvalsh(as_symmetric(M))
    return float(np.sum(w[w < 0.0]))


def tr_plus(M):
    """Sum of the positive eigenvalues of symmetric M."""
    w = np.linalg.eigvalsh(as_symmetric(M))
    return float(np.sum(w[w > 0.0]))


def spectral_radius(A):
    """Largest eigenvalue magnitude of a (not necessarily symmetric) matrix."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return float(np.max(np.abs(np.linalg.eigvals(A))))
