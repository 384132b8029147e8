"""Independent reference implementations used only to check the package.

Nothing in here touches the library's own code paths: the edit-distance
oracle is top-down recursion over the three-way recurrence, and the
gradient oracle is central finite differences.
"""

from __future__ import annotations

import numpy as np


def recursive_edit_distance(a: str, b: str, memo=None) -> int:
    """Top-down recursion over the insert/delete/substitute recurrence."""
    if memo is None:
        memo = {}
    key = (a, b)
    if key in memo:
        return memo[key]
    if not a:
        result = len(b)
    elif not b:
        result = len(a)
    else:
        result = min(
            recursive_edit_distance(a[:-1], b, memo) + 1,
            recursive_edit_distance(a, b[:-1], memo) + 1,
            recursive_edit_distance(a[:-1], b[:-1], memo) + (a[-1] != b[-1]),
        )
    memo[key] = result
    return result


def unmemoized_edit_distance(a: str, b: str) -> int:
    """Same recurrence with no caching at all; only for short strings."""
    if not a:
        return len(b)
    if not b:
        return len(a)
    return min(
        unmemoized_edit_distance(a[:-1], b) + 1,
        unmemoized_edit_distance(a, b[:-1]) + 1,
        unmemoized_edit_distance(a[:-1], b[:-1]) + (a[-1] != b[-1]),
    )


def finite_difference_gradient(func, x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function of an array."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = grad.reshape(-1)
    base = x.copy()
    for i in range(x.size):
        plus = base.copy().reshape(-1)
        minus = base.copy().reshape(-1)
        plus[i] += step
        minus[i] -= step
        f_plus = func(plus.reshape(x.shape))
        f_minus = func(minus.reshape(x.shape))
        flat[i] = (f_plus - f_minus) / (2.0 * step)
    return grad


def assert_gradients_close(analytic, numeric, abs_tol=1e-7, rel_tol=1e-4):
    """Check |analytic - numeric| <= max(abs_tol, rel_tol * |numeric|) per entry."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    assert analytic.shape == numeric.shape
    diff = np.abs(analytic - numeric)
    bound = np.maximum(abs_tol, rel_tol * np.abs(numeric))
    worst = np.max(diff - bound)
    assert worst <= 0.0, (
        f"gradient mismatch: max violation {worst:.3e}, "
        f"max abs diff {diff.max():.3e}"
    )
