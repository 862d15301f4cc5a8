"""Deterministic RNG, small dense linear algebra, and a finite-difference oracle.

Model state is float32 throughout the package; the finite-difference oracle
works in float64 so its 1e-4 agreement checks stay meaningful. All functions
follow the dtype of their inputs, so the same code paths can be exercised in
either precision.

The project RNG is numpy's PCG64 wrapped in a Generator. The algorithm is
pinned for the lifetime of the project: the same 64-bit seed yields the same
stream on every platform.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import NumericError

DTYPE = np.float32


def make_rng(seed: int) -> np.random.Generator:
    """Return the project's deterministic generator (PCG64) for ``seed``."""
    return np.random.Generator(np.random.PCG64(seed))


def affine(w: np.ndarray, x: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Compute w @ x + b for a matrix w (m, k), vector x (k,) and bias b (m,)."""
    w = np.asarray(w)
    x = np.asarray(x)
    b = np.asarray(b)
    if w.ndim != 2 or x.ndim != 1 or b.ndim != 1:
        raise ValueError(f"affine expects (m,k), (k,), (m,); got {w.shape}, {x.shape}, {b.shape}")
    if w.shape[1] != x.shape[0] or w.shape[0] != b.shape[0]:
        raise ValueError(f"shape mismatch: w {w.shape}, x {x.shape}, b {b.shape}")
    return w @ x + b


def softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    """Numerically stable softmax along ``axis`` (max-subtraction form).

    Raises NumericError on non-finite input. Output sums to 1 along ``axis``
    and every entry is strictly positive in exact arithmetic (entries may
    underflow to 0.0 in float32 for extreme logit gaps).
    """
    z = np.asarray(z)
    if not np.all(np.isfinite(z)):
        raise NumericError("softmax: non-finite input")
    shifted = z - z.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Elementwise logistic function, overflow-safe for large |x|."""
    x = np.asarray(x)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def tanh_vec(x: np.ndarray) -> np.ndarray:
    """Elementwise tanh; output lies in (-1, 1)."""
    return np.tanh(np.asarray(x))


def init_uniform_embedding(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """n x d matrix with entries i.i.d. uniform in [-0.5/d, +0.5/d], float32."""
    if n <= 0 or d <= 0:
        raise ValueError(f"n and d must be positive, got {n}, {d}")
    bound = 0.5 / d
    return rng.uniform(-bound, bound, size=(n, d)).astype(DTYPE)


def init_glorot(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """rows x cols matrix, uniform in +-sqrt(6/(rows+cols)), float32."""
    if rows <= 0 or cols <= 0:
        raise ValueError(f"rows and cols must be positive, got {rows}, {cols}")
    bound = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-bound, bound, size=(rows, cols)).astype(DTYPE)


def finite_diff_gradient(
    f: Callable[[np.ndarray], float], theta: np.ndarray, h: float = 1e-4
) -> np.ndarray:
    """Central-difference gradient of a scalar function, in float64.

    Perturbs one coordinate at a time: (f(theta + h e_i) - f(theta - h e_i)) / 2h.
    ``f`` must be evaluable at every perturbed point and return a finite scalar.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    theta = np.asarray(theta, dtype=np.float64).copy()
    grad = np.empty_like(theta)
    flat = theta.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        f_plus = float(f(theta))
        flat[i] = orig - h
        f_minus = float(f(theta))
        flat[i] = orig
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NumericError(f"finite_diff_gradient: non-finite f at coordinate {i}")
        gflat[i] = (f_plus - f_minus) / (2.0 * h)
    return grad
