"""Scalar entropy functions, tail bounds and the bounded scalar optimizer.

All entropies are in bits. Tail probabilities use the natural exponential.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class Probability:
    """A real number in [0, 1]."""

    value: float

    def __post_init__(self):
        v = float(self.value)
        if not (0.0 <= v <= 1.0) or math.isnan(v):
            raise ValueError(f"probability must lie in [0, 1], got {self.value!r}")
        object.__setattr__(self, "value", v)

    def __float__(self) -> float:
        return self.value


def _as_prob(p) -> float:
    if isinstance(p, Probability):
        return p.value
    return Probability(p).value


def binary_entropy(p) -> float:
    """Binary entropy ``h(p)`` in bits, with ``h(0) = h(1) = 0``.

    >>> binary_entropy(0.5)
    1.0
    """
    p = _as_prob(p)
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def binary_entropy_array(p):
    """Vectorized ``h`` for arrays already known to lie in [0, 1]."""
    p = np.asarray(p, dtype=float)
    inside = (p > 0.0) & (p < 1.0)
    q = np.where(inside, p, 0.5)
    return np.where(inside, -q * np.log2(q) - (1.0 - q) * np.log2(1.0 - q), 0.0)


def hoeffding_completeness(n: int, delta_est: float) -> float:
    """Hoeffding bound ``exp(-2 n delta_est^2)`` on the honest abort probability."""
    if n < 1 or int(n) != n:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    if not 0.0 < delta_est < 1.0:
        raise ValueError(f"delta_est must lie in (0, 1), got {delta_est!r}")
    return math.exp(-2.0 * n * delta_est * delta_est)


def golden_section_max(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-10):
    """Golden-section search for a maximum of a unimodal ``f`` on [lo, hi].

    Returns ``(x, f(x))``.
    """
    a, b = float(lo), float(hi)
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    fx = f(x)
    # the midpoint can lose to an interior probe on a plateau
    for xx, ff in ((c, fc), (d, fd)):
        if ff > fx:
            x, fx = xx, ff
    return x, fx


def maximize_scalar(
    f: Callable,
    lo: float,
    hi: float,
    tol: float = 1e-10,
    grid: int = 200,
    vectorized: bool = False,
):
    """Maximize ``f`` on [lo, hi] by a grid scan followed by golden-section refinement.

    The grid (``grid`` points including both ends, at least 200) picks the best
    bracket; golden-section search then narrows it to ``tol``. Non-finite values
    on the grid are ignored.

    Parameters
    ----------
    f : callable
        Objective. With ``vectorized=True`` it must accept a 1-d array.
    lo, hi : float
        Search interval, ``lo < hi``.
    tol : float
        Width of the final bracket.
    grid : int
        Number of coarse grid points.

    Returns
    -------
    tuple of float
        ``(argmax, max)``. The max is never below the best finite grid value.
    """
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    if tol <= 0:
        raise ValueError("tol must be positive")
    grid = max(int(grid), 200)
    xs = np.linspace(lo, hi, grid)
    if vectorized:
        ys = np.asarray(f(xs), dtype=float)
    else:
        ys = np.array([f(float(x)) for x in xs], dtype=float)
    finite = np.isfinite(ys)
    if not finite.any():
        raise ValueError("objective is non-finite on the whole grid")
    ys = np.where(finite, ys, -np.inf)
    k = int(np.argmax(ys))
    best_x, best_y = float(xs[k]), float(ys[k])

    a = float(xs[max(k - 1, 0)])
    b = float(xs[min(k + 1, grid - 1)])

    def scalar(x):
        y = f(np.array([x]))[0] if vectorized else f(x)
        y = float(y)
        return y if math.isfinite(y) else -math.inf

    x, y = golden_section_max(scalar, a, b, tol)
    if y >= best_y:
        return x, y
    return best_x, best_y
