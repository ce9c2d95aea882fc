"""Modified Bessel function I_1 and U(-k, 2, m) for integer k >= 0."""
from __future__ import annotations

import math

import numpy as np

from .core import DomainError

_SERIES_LIMIT = 15.0


def _i1_series(x: np.ndarray) -> np.ndarray:
    half = 0.5 * x
    q = half * half
    term = half.copy()
    total = term.copy()
    for j in range(1, 200):
        term = term * q / (j * (j + 1))
        total = total + term
        if np.all(term <= 1e-17 * total):
            break
    return total


def _i1e_asymptotic(x: np.ndarray) -> np.ndarray:
    # e^{-x} I_1(x) ~ (2 pi x)^{-1/2} sum_k (-1)^k a_k / x^k, a_k = prod (4 - (2j-1)^2) / (k! 8^k)
    total = np.ones_like(x)
    term = np.ones_like(x)
    for k in range(1, 30):
        nxt = term * -(4.0 - (2 * k - 1) ** 2) / (k * 8.0 * x)
        if np.all(np.abs(nxt) >= np.abs(term)):
            break
        term = nxt
        total = total + term
        if np.all(np.abs(term) < 1e-17 * np.abs(total)):
            break
    return total / np.sqrt(2.0 * math.pi * x)


def _check(x):
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError("bessel_i1 is only defined here for x >= 0")
    return arr


def bessel_i1e(x):
    """Scaled Bessel function ``exp(-x) * I_1(x)`` for ``x >= 0``."""
    arr = _check(x)
    flat = np.atleast_1d(arr).astype(float)
    out = np.empty_like(flat)
    small = flat <= _SERIES_LIMIT
    out[small] = _i1_series(flat[small]) * np.exp(-flat[small])
    out[~small] = _i1e_asymptotic(flat[~small])
    return out.reshape(arr.shape) if arr.ndim else float(out[0])


def bessel_i1(x):
    """Modified Bessel function of the first kind, order 1, for ``x >= 0``.

    Power series up to x = 15, scaled asymptotic expansion above.
    """
    arr = _check(x)
    flat = np.atleast_1d(arr).astype(float)
    out = np.empty_like(flat)
    small = flat <= _SERIES_LIMIT
    out[small] = _i1_series(flat[small])
    out[~small] = _i1e_asymptotic(flat[~small]) * np.exp(flat[~small])
    return out.reshape(arr.shape) if arr.ndim else float(out[0])


def hyp_u_neg(k: int, m):
    """Tricomi ``U(-k, 2, m) = (-1)^k k! L_k^{(1)}(m)``, by the Laguerre recurrence."""
    k = int(k)
    if k < 0:
        raise ValueError("k must be non-negative")
    m = np.asarray(m, dtype=float)
    prev = np.ones_like(m)
    if k == 0:
        return prev if m.ndim else float(prev)
    cur = 2.0 - m
    for n in range(1, k):
        prev, cur = cur, ((2 * n + 2 - m) * cur - (n + 1) * prev) / (n + 1)
    out = (-1) ** k * math.factorial(k) * cur
    return out if m.ndim else float(out)
