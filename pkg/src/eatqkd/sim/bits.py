"""Metered uniform bits and the interval-algorithm Bernoulli sampler."""
from __future__ import annotations

from fractions import Fraction

import numpy as np

_CHUNK = 4096


class MeteredBitStream:
    """Uniform bits drawn from a numpy generator, with an exact consumption count.

    Bits are produced in buffered chunks so that the count reflects bits handed
    out, not bits generated.
    """

    def __init__(self, rng: np.random.Generator):
        self._rng = rng
        self._buf = np.empty(0, dtype=np.int8)
        self._pos = 0
        self.consumed = 0

    def _refill(self, need: int):
        size = max(_CHUNK, need)
        fresh = self._rng.integers(0, 2, size=size, dtype=np.int8)
        self._buf = np.concatenate([self._buf[self._pos:], fresh])
        self._pos = 0

    def bit(self) -> int:
        if self._pos >= self._buf.size:
            self._refill(1)
        b = int(self._buf[self._pos])
        self._pos += 1
        self.consumed += 1
        return b

    def bits(self, k: int) -> np.ndarray:
        if k < 0:
            raise ValueError("k must be nonnegative")
        if self._buf.size - self._pos < k:
            self._refill(k)
        out = self._buf[self._pos:self._pos + k].copy()
        self._pos += k
        self.consumed += k
        return out


# float endpoints within this fraction of the interval width of the split are
# treated as lying on it; exact arithmetic hits the split exactly at dyadic gamma
_SNAP = 1e-9


def _emit(lo, hi, split, gamma):
    """One output step if the source interval lies inside a target cell.

    Returns ``(bit, lo, hi)`` or ``None`` when the interval straddles the split.
    """
    if hi <= split:
        return 0, lo / split, hi / split
    if lo >= split:
        return 1, (lo - split) / gamma, (hi - split) / gamma
    return None


def _emit_float(lo, hi, split, gamma):
    tol = _SNAP * (hi - lo)
    if hi - split <= tol:
        return 0, lo / split, min(hi, split) / split
    if split - lo <= tol:
        return 1, (max(lo, split) - split) / gamma, (hi - split) / gamma
    return None


def interval_sampler(gamma: float, count: int, rng) -> tuple[np.ndarray, int]:
    """Draw ``count`` i.i.d. Bernoulli(gamma) bits from uniform coin flips.

    The source interval [lo, hi) is refined by one coin per step and kept in
    coordinates relative to the target cell of the next output, so the state
    never underflows. ``rng`` is a :class:`MeteredBitStream` or a numpy
    generator (wrapped on the fly).

    Returns
    -------
    bits : ndarray of int8
    consumed : int
        Number of coin flips used.
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma!r}")
    if count < 1:
        raise ValueError("count must be at least 1")
    stream = rng if isinstance(rng, MeteredBitStream) else MeteredBitStream(rng)
    start = stream.consumed
    split = 1.0 - gamma
    out = np.empty(count, dtype=np.int8)
    lo, hi, k = 0.0, 1.0, 0
    while k < count:
        step = _emit_float(lo, hi, split, gamma)
        if step is None:
            mid = 0.5 * (lo + hi)
            if stream.bit():
                lo = mid
            else:
                hi = mid
            continue
        out[k], lo, hi = step
        k += 1
    return out, stream.consumed - start


def interval_sampler_batch(gamma: float, count: int, runs: int, rng: np.random.Generator):
    """Run ``runs`` independent copies of :func:`interval_sampler` in lockstep.

    Returns the number of ones and the number of coins consumed per run (the
    sampled bits themselves are not kept).
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma!r}")
    split = 1.0 - gamma
    lo = np.zeros(runs)
    hi = np.ones(runs)
    done = np.zeros(runs, dtype=np.int64)
    ones = np.zeros(runs, dtype=np.int64)
    used = np.zeros(runs, dtype=np.int64)
    active = np.arange(runs)
    while active.size:
        l, h = lo[active], hi[active]
        tol = _SNAP * (h - l)
        zero = h - split <= tol
        one = ~zero & (split - l <= tol)
        read = ~(zero | one)
        l = np.where(zero, l / split, np.where(one, (np.maximum(l, split) - split) / gamma, l))
        h = np.where(zero, np.minimum(h, split) / split, np.where(one, (h - split) / gamma, h))
        coin = rng.integers(0, 2, size=active.size).astype(bool)
        mid = 0.5 * (l + h)
        l = np.where(read & coin, mid, l)
        h = np.where(read & ~coin, mid, h)
        lo[active], hi[active] = l, h
        used[active] += read
        ones[active] += one
        done[active] += zero | one
        active = active[done[active] < count]
    return ones, used


def interval_distribution(gamma: Fraction, count: int, depth: int):
    """Exact output law of the interval sampler over all coin sequences up to ``depth``.

    Walks the binary tree of coin flips with rational arithmetic. Returns
    ``(mass, unresolved)``: ``mass[seq]`` is the probability of coin prefixes
    that finish with output ``seq`` within ``depth`` coins, ``unresolved`` the
    probability of prefixes still undecided at ``depth``.
    """
    gamma = Fraction(gamma)
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    split = 1 - gamma
    mass: dict[tuple, Fraction] = {}
    unresolved = Fraction(0)
    stack = [(Fraction(0), Fraction(1), (), 0)]
    while stack:
        lo, hi, outs, d = stack.pop()
        while len(outs) < count:
            step = _emit(lo, hi, split, gamma)
            if step is None:
                break
            b, lo, hi = step
            outs = outs + (b,)
        if len(outs) == count:
            mass[outs] = mass.get(outs, Fraction(0)) + Fraction(1, 2**d)
        elif d == depth:
            unresolved += Fraction(1, 2**d)
        else:
            mid = (lo + hi) / 2
            stack.append((lo, mid, outs, d + 1))
            stack.append((mid, hi, outs, d + 1))
    return mass, unresolved
