"""Small dense linear algebra kernel.

Everything here works on float64 numpy arrays of modest size (d <= ~32); the
loops are written out so the pivot checks are explicit.
"""

import numpy as np

from .exceptions import NotSPD, TooFewSamples, DimensionMismatch

PIVOT_FLOOR = 1e-12
SYMMETRY_TOL = 1e-10


def _as_matrix(A):
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix contains NaN or Inf")
    return A


def cholesky_factor(A):
    """Lower-triangular ``L`` with ``L @ L.T == A``.

    Raises
    ------
    NotSPD
        If ``A`` is not square, not symmetric within ``1e-10`` (relative to its
        largest entry), or a pivot falls to ``1e-12`` or below.
    """
    A = _as_matrix(A)
    d, m = A.shape
    if d != m:
        raise NotSPD(f"matrix is not square: {A.shape}")
    scale = max(np.max(np.abs(A)), 1.0) if A.size else 1.0
    if np.max(np.abs(A - A.T), initial=0.0) > SYMMETRY_TOL * scale:
        raise NotSPD("matrix is not symmetric")

    L = np.zeros_like(A)
    for j in range(d):
        pivot = A[j, j] - L[j, :j] @ L[j, :j]
        if pivot <= PIVOT_FLOOR:
            raise NotSPD(f"pivot {j} is {pivot:.3g} (<= {PIVOT_FLOOR:g})")
        L[j, j] = np.sqrt(pivot)
        L[j + 1:, j] = (A[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def _forward_substitute(L, b):
    y = np.empty_like(b)
    for i in range(len(b)):
        y[i] = (b[i] - L[i, :i] @ y[:i]) / L[i, i]
    return y


def _back_substitute(U, y):
    x = np.empty_like(y)
    for i in range(len(y) - 1, -1, -1):
        x[i] = (y[i] - U[i, i + 1:] @ x[i + 1:]) / U[i, i]
    return x


def spd_solve(A, b):
    """Solve ``A x = b`` for symmetric positive definite ``A``."""
    A = _as_matrix(A)
    b = np.asarray(b, dtype=np.float64)
    if b.ndim != 1 or b.shape[0] != A.shape[0]:
        raise DimensionMismatch(f"rhs of length {b.shape} for a {A.shape} matrix")
    L = cholesky_factor(A)
    return _back_substitute(L.T, _forward_substitute(L, b))


def norm(v, kind="L2"):
    v = np.asarray(v, dtype=np.float64)
    kind = kind.upper()
    if kind == "L1":
        return float(np.sum(np.abs(v)))
    if kind == "L2":
        # scale first so huge or tiny entries do not overflow/underflow
        peak = np.max(np.abs(v), initial=0.0)
        if peak == 0.0:
            return 0.0
        return float(peak * np.sqrt(np.sum((v / peak) ** 2)))
    raise ValueError(f"unknown norm kind {kind!r}; expected 'L1' or 'L2'")


def sample_covariance_with_scalar(samples, labels):
    """Per-feature covariance between the rows of ``samples`` and ``labels``.

    Uses the ``1/n`` divisor: entry ``i`` is
    ``mean((samples[:, i] - mean_i) * (labels - mean_labels))``.
    """
    samples = np.asarray(samples, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if samples.ndim == 1:
        samples = samples[:, None]
    n = samples.shape[0]
    if labels.shape != (n,):
        raise DimensionMismatch(f"{n} samples but labels of shape {labels.shape}")
    if n < 2:
        raise TooFewSamples(f"covariance needs at least 2 samples, got {n}")
    centered = samples - samples.mean(axis=0)
    return centered.T @ (labels - labels.mean()) / n


def centered_scatter(samples):
    """``(1/n) * Ac.T @ Ac`` for the mean-centered sample matrix ``Ac``."""
    samples = np.asarray(samples, dtype=np.float64)
    centered = samples - samples.mean(axis=0)
    return centered.T @ centered / samples.shape[0]
