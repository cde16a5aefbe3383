"""Dense vector/matrix kernels used throughout the package.

All arithmetic is float64. Functions are pure and accept anything
numpy can coerce to an array.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError

ZERO_NORM_EPS = 1e-12


def softmax(logits, temperature: float = 1.0) -> np.ndarray:
    """Temperature-scaled softmax, computed with max-subtraction for stability."""
    if temperature <= 0:
        raise InvalidArgumentError(f"temperature must be positive, got {temperature}")
    z = np.asarray(logits, dtype=np.float64)
    if z.size == 0:
        raise InvalidArgumentError("softmax of empty logits")
    if not np.all(np.isfinite(z)):
        raise InvalidArgumentError("softmax input contains non-finite values")
    z = z / temperature
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cosine_sim(u, v) -> float:
    """Cosine similarity; 0 by convention when either vector is (near) zero."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise InvalidArgumentError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu < ZERO_NORM_EPS or nv < ZERO_NORM_EPS:
        return 0.0
    s = float(np.dot(u, v) / (nu * nv))
    return max(-1.0, min(1.0, s))


def mean_rows(m) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] == 0:
        raise InvalidArgumentError("mean_rows requires a non-empty (N, D) matrix")
    return m.mean(axis=0)


def covariance(m) -> np.ndarray:
    """Unbiased sample covariance (divisor N-1); zero matrix when N < 2."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] == 0:
        raise InvalidArgumentError("covariance requires a non-empty (N, D) matrix")
    n, d = m.shape
    if n < 2:
        return np.zeros((d, d))
    centered = m - m.mean(axis=0)
    c = centered.T @ centered / (n - 1)
    # exact symmetry matters downstream (quadratic-form gradients)
    return (c + c.T) / 2.0


def quad_form(v, mat) -> float:
    """v' M v."""
    v = np.asarray(v, dtype=np.float64)
    mat = np.asarray(mat, dtype=np.float64)
    if mat.shape != (v.shape[0], v.shape[0]):
        raise InvalidArgumentError(f"shape mismatch: vector {v.shape}, matrix {mat.shape}")
    return float(v @ mat @ v)
