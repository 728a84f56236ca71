"""Numerical kernels used across the library.

Self-contained implementations (no scipy dependency) of the special
functions and matrix-equation solvers the detection and attack analysis
code relies on:

* regularized lower incomplete gamma function and its inverse, which give
  chi-squared tail thresholds for alarm tuning,
* a Jacobi eigensolver for symmetric matrices, powering the dominant
  eigenpair extraction and the symmetric PSD square root,
* fixed-point solver for the discrete algebraic Riccati equation in
  one-step-predictor form,
* a direct (Kronecker) solver for the discrete Lyapunov equation.

All routines operate on plain numpy arrays and raise ValueError on domain
violations rather than returning NaNs.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "regularized_lower_gamma",
    "inverse_regularized_lower_gamma",
    "max_eigenpair",
    "symmetric_eigenpairs",
    "psd_sqrt",
    "psd_factor",
    "spectral_radius",
    "solve_dare",
    "solve_discrete_lyapunov",
]

# Convergence controls for the gamma series / continued fraction.  The
# iteration counts scale with sqrt(a) near x = a, so the cap is generous:
# window statistics push a = p*ell/2 into the thousands.
_GAMMA_EPS = 1e-15
_GAMMA_ITMAX = 200_000
_TINY = 1e-300


def _gamma_series(a: float, x: float) -> float:
    """Lower regularized gamma by power series, valid for x < a + 1."""
    if x <= 0.0:
        return 0.0
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(_GAMMA_ITMAX):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _GAMMA_EPS:
            return total * math.exp(-x + a * math.log(x) - math.lgamma(a))
    raise RuntimeError(f"gamma series failed to converge for a={a}, x={x}")


def _gamma_cont_fraction(a: float, x: float) -> float:
    """Upper regularized gamma by Lentz continued fraction, for x >= a + 1."""
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _GAMMA_ITMAX + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _GAMMA_EPS:
            return h * math.exp(-x + a * math.log(x) - math.lgamma(a))
    raise RuntimeError(f"gamma continued fraction failed to converge for a={a}, x={x}")


def regularized_lower_gamma(a: float, x: float) -> float:
    """Regularized lower incomplete gamma function P(a, x).

    P(a, x) = gamma(a, x) / Gamma(a), the CDF of a Gamma(a, 1) variable.
    The chi-squared CDF with ``p`` degrees of freedom evaluated at ``t``
    is ``lower_gamma_regularized(p / 2, t / 2)``.

    Args:
        a: shape parameter, must be > 0.
        x: evaluation point, must be >= 0.

    Returns:
        P(a, x) in [0, 1].
    """
    if not (a > 0.0) or math.isnan(a):
        raise ValueError(f"shape parameter must be positive, got a={a}")
    if math.isnan(x) or x < 0.0:
        raise ValueError(f"evaluation point must be nonnegative, got x={x}")
    if x == 0.0:
        return 0.0
    if x < a + 1.0:
        return _gamma_series(a, x)
    return 1.0 - _gamma_cont_fraction(a, x)


def _gamma_pdf(a: float, x: float) -> float:
    """Density of Gamma(a, 1), the derivative of P(a, .)."""
    if x <= 0.0:
        return 0.0
    return math.exp(-x + (a - 1.0) * math.log(x) - math.lgamma(a))


def inverse_regularized_lower_gamma(a: float, q: float, tol: float = 1e-13) -> float:
    """Inverse of the regularized lower incomplete gamma in its second argument.

    Finds x >= 0 with P(a, x) = q using Newton iterations safeguarded by
    bisection on the bracket [0, a + 20*sqrt(a) + 100], which contains the
    quantile for any q < 1 - 1e-12.

    Args:
        a: shape parameter, must be > 0.
        q: target probability in [0, 1).
        tol: absolute tolerance on P(a, x) - q.

    Returns:
        The quantile x.
    """
    if not (a > 0.0) or math.isnan(a):
        raise ValueError(f"shape parameter must be positive, got a={a}")
    if math.isnan(q) or not (0.0 <= q < 1.0):
        raise ValueError(f"probability must lie in [0, 1), got q={q}")
    if q == 0.0:
        return 0.0

    lo, hi = 0.0, a + 20.0 * math.sqrt(a) + 100.0
    while regularized_lower_gamma(a, hi) < q:
        lo = hi
        hi *= 2.0
        if hi > 1e300:
            raise RuntimeError(f"failed to bracket gamma quantile for a={a}, q={q}")

    # Crude starting point: the mean, pulled toward the bracket interior.
    x = min(max(a, lo + 0.25 * (hi - lo)), hi)
    for _ in range(200):
        err = regularized_lower_gamma(a, x) - q
        if err > 0.0:
            hi = x
        else:
            lo = x
        if abs(err) <= tol:
            return x
        dpdx = _gamma_pdf(a, x)
        if dpdx > 0.0:
            step = err / dpdx
            x_new = x - step
        else:
            x_new = math.nan
        if not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi)  # Newton left the bracket: bisect
        if x_new == x:
            return x
        x = x_new
    return x


def _check_square(mat: np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(mat, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def _check_symmetric(mat: np.ndarray, name: str, rtol: float = 1e-8) -> np.ndarray:
    arr = _check_square(mat, name)
    scale = max(1.0, float(np.abs(arr).max()))
    if np.abs(arr - arr.T).max() > rtol * scale:
        raise ValueError(f"{name} must be symmetric")
    return 0.5 * (arr + arr.T)


def symmetric_eigenpairs(mat: np.ndarray, tol: float = 1e-14, max_sweeps: int = 100):
    """Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Args:
        mat: symmetric (n, n) matrix.
        tol: relative off-diagonal magnitude at which to stop sweeping.
        max_sweeps: cap on full Jacobi sweeps.

    Returns:
        (w, V): eigenvalues in descending order and the matrix whose columns
        are the matching orthonormal eigenvectors.
    """
    a = _check_symmetric(mat, "matrix").copy()
    n = a.shape[0]
    v = np.eye(n)
    if n == 1:
        return a.diagonal().copy(), v
    scale = max(float(np.abs(a).max()), _TINY)

    for _ in range(max_sweeps):
        off = math.sqrt(max(0.0, (a * a).sum() - (a.diagonal() ** 2).sum()))
        if off <= tol * scale * n:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= tol * scale * 1e-2:
                    continue
                theta = 0.5 * (a[q, q] - a[p, p]) / apq
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rot_p, rot_q = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * rot_p - s * rot_q
                a[:, q] = s * rot_p + c * rot_q
                rot_p, rot_q = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * rot_p - s * rot_q
                a[q, :] = s * rot_p + c * rot_q
                rot_p, rot_q = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * rot_p - s * rot_q
                v[:, q] = s * rot_p + c * rot_q
    else:
        raise RuntimeError("Jacobi eigensolver did not converge")

    w = a.diagonal().copy()
    order = np.argsort(w)[::-1]
    return w[order], v[:, order]


def max_eigenpair(mat: np.ndarray):
    """Dominant eigenpair (largest eigenvalue) of a symmetric matrix.

    The eigenvector is unit norm with a canonical sign: its first component
    of magnitude above 1e-12 is made positive.

    Returns:
        (lambda_max, v) with ``mat @ v == lambda_max * v``.
    """
    w, v_mat = symmetric_eigenpairs(mat)
    vec = v_mat[:, 0]
    for comp in vec:
        if abs(comp) > 1e-12:
            if comp < 0.0:
                vec = -vec
            break
    return float(w[0]), vec


def psd_sqrt(mat: np.ndarray) -> np.ndarray:
    """Symmetric square root of a symmetric positive semidefinite matrix.

    Eigenvalues in [-1e-9 * lambda_max, 0) are treated as rounding debris
    and clamped to zero; anything more negative raises ValueError.
    """
    w, v = symmetric_eigenpairs(mat)
    lam_max = max(float(w[0]), 0.0)
    floor = -1e-9 * max(lam_max, 1.0)
    if float(w[-1]) < floor:
        raise ValueError(f"matrix is not positive semidefinite (min eigenvalue {w[-1]:.3e})")
    root = v * np.sqrt(np.clip(w, 0.0, None))
    out = root @ v.T
    return 0.5 * (out + out.T)


def psd_factor(mat: np.ndarray) -> np.ndarray:
    """A factor A with A @ A.T equal to the given symmetric PSD matrix.

    Uses Cholesky when the matrix is positive definite and falls back to the
    symmetric square root for the semidefinite case.
    """
    sym = _check_symmetric(mat, "covariance")
    try:
        return np.linalg.cholesky(sym)
    except np.linalg.LinAlgError:
        return psd_sqrt(sym)


def spectral_radius(mat: np.ndarray) -> float:
    """Largest eigenvalue magnitude of a (generally non-symmetric) square matrix."""
    arr = _check_square(mat, "matrix")
    return float(np.abs(np.linalg.eigvals(arr)).max())


def solve_dare(
    f: np.ndarray,
    c: np.ndarray,
    q_cov: np.ndarray,
    r_cov: np.ndarray,
    tol: float = 1e-12,
    max_iter: int = 100_000,
):
    """Stabilizing solution of the discrete algebraic Riccati equation.

    Solves P = F P F' - F P C' (C P C' + R)^-1 C P F' + Q, the
    one-step-predictor form, by fixed-point iteration from P_0 = Q.
    P is the steady-state covariance of the one-step prediction error;
    the matching predictor gain is L = F P C' (C P C' + R)^-1.

    Args:
        f: (n, n) state transition matrix.
        c: (p, n) output matrix.
        q_cov: (n, n) process noise covariance (symmetrized internally).
        r_cov: (p, p) measurement noise covariance, positive definite.

    Returns:
        (P, L): covariance and predictor gain, with spectral radius of
        F - L C strictly inside the unit circle.

    Raises:
        RuntimeError: "non-detectable or ill-conditioned model" if the
            iteration diverges or fails to converge within max_iter.
    """
    f = _check_square(f, "F")
    c = np.asarray(c, dtype=float)
    n = f.shape[0]
    if c.ndim != 2 or c.shape[1] != n:
        raise ValueError(f"C must have {n} columns, got shape {c.shape}")
    q_sym = _check_symmetric(q_cov, "process covariance")
    r_sym = _check_symmetric(r_cov, "measurement covariance")

    p_cov = q_sym.copy()
    for _ in range(max_iter):
        innov = c @ p_cov @ c.T + r_sym
        gain = np.linalg.solve(innov.T, (f @ p_cov @ c.T).T).T
        p_next = f @ p_cov @ f.T - gain @ innov @ gain.T + q_sym
        p_next = 0.5 * (p_next + p_next.T)
        diff = float(np.abs(p_next - p_cov).max())
        p_cov = p_next
        if not np.isfinite(diff) or diff > 1e200:
            raise RuntimeError("non-detectable or ill-conditioned model (Riccati iteration diverged)")
        if diff <= tol * max(1.0, float(np.abs(p_cov).max())):
            innov = c @ p_cov @ c.T + r_sym
            gain = np.linalg.solve(innov.T, (f @ p_cov @ c.T).T).T
            return p_cov, gain
    raise RuntimeError(
        f"non-detectable or ill-conditioned model (no convergence in {max_iter} iterations)"
    )


def solve_discrete_lyapunov(a: np.ndarray, q_cov: np.ndarray) -> np.ndarray:
    """Solve P = A P A' + Q directly via the Kronecker linear system.

    Requires the spectrum of A inside the unit circle so the (n^2, n^2)
    system I - kron(A, A) is nonsingular.
    """
    a = _check_square(a, "A")
    q_sym = _check_symmetric(q_cov, "Q")
    n = a.shape[0]
    system = np.eye(n * n) - np.kron(a, a)
    p_vec = np.linalg.solve(system, q_sym.reshape(-1))
    p_cov = p_vec.reshape(n, n)
    return 0.5 * (p_cov + p_cov.T)
