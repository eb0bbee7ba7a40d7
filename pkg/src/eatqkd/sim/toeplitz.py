"""Toeplitz hashing over GF(2)."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.signal import fftconvolve

_DIRECT_LIMIT = 2_000_000


@dataclass(frozen=True)
class ToeplitzSeed:
    """Seed ``s`` of a Toeplitz matrix ``T[j, k] = s[j - k + in_len - 1]``."""

    bits: np.ndarray
    in_len: int
    out_len: int

    def __post_init__(self):
        b = np.asarray(self.bits, dtype=np.int8).ravel()
        if self.in_len < 1 or self.out_len < 1:
            raise ValueError("in_len and out_len must be positive")
        if b.size != self.in_len + self.out_len - 1:
            raise ValueError(
                f"seed length {b.size} != in_len + out_len - 1 = {self.in_len + self.out_len - 1}"
            )
        if b.size and (b.min() < 0 or b.max() > 1):
            raise ValueError("seed must be a bit vector")
        object.__setattr__(self, "bits", b)

    @classmethod
    def random(cls, in_len: int, out_len: int, stream) -> "ToeplitzSeed":
        """Uniform seed drawn from a :class:`MeteredBitStream` (or anything with ``bits``)."""
        return cls(stream.bits(in_len + out_len - 1), in_len, out_len)

    @classmethod
    def identity(cls, n: int) -> "ToeplitzSeed":
        bits = np.zeros(2 * n - 1, dtype=np.int8)
        bits[n - 1] = 1
        return cls(bits, n, n)

    def matrix(self) -> np.ndarray:
        j = np.arange(self.out_len)[:, None]
        k = np.arange(self.in_len)[None, :]
        return self.bits[j - k + self.in_len - 1]


def toeplitz_hash(x, seed: ToeplitzSeed, out_len: int | None = None) -> np.ndarray:
    """``T x`` over GF(2), computed as a slice of the convolution ``s * x``."""
    x = np.asarray(x, dtype=np.int8).ravel()
    out_len = seed.out_len if out_len is None else out_len
    if x.size != seed.in_len or out_len != seed.out_len:
        raise ValueError(
            f"seed is for {seed.in_len} -> {seed.out_len} bits, got {x.size} -> {out_len}"
        )
    n = x.size
    if n * out_len <= _DIRECT_LIMIT:
        full = np.convolve(seed.bits.astype(np.int64), x.astype(np.int64))
    else:
        # sums are at most n, far inside float64's exact integer range after rounding
        full = np.rint(fftconvolve(seed.bits.astype(float), x.astype(float))).astype(np.int64)
    return (full[n - 1:n - 1 + out_len] & 1).astype(np.int8)


def collision_fractions(in_len: int, out_len: int) -> dict[int, Fraction]:
    """Exact collision probability over uniform seeds for every nonzero difference.

    By linearity ``T x = T x'`` iff ``T (x xor x') = 0``, so checking each
    nonzero ``d`` covers all pairs. Returns ``{d: Pr_s[T_s d = 0]}``.
    """
    if in_len > 12 or out_len > 6:
        raise ValueError("exhaustive check is limited to in_len <= 12, out_len <= 6")
    slen = in_len + out_len - 1
    seeds = ((np.arange(2**slen)[:, None] >> np.arange(slen)[None, :]) & 1).astype(np.int64)
    total = 2**slen
    result = {}
    for d in range(1, 2**in_len):
        dv = (d >> np.arange(in_len)) & 1
        # column j of M picks s[j + in_len - 1 - k] for the set bits k of d
        m = np.zeros((slen, out_len), dtype=np.int64)
        for j in range(out_len):
            for k in np.flatnonzero(dv):
                m[j + in_len - 1 - k, j] = 1
        zero = np.all((seeds @ m) & 1 == 0, axis=1)
        result[d] = Fraction(int(zero.sum()), total)
    return result
