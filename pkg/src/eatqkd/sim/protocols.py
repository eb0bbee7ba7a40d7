"""Round-by-round protocol runs against simulated devices.

Generation rounds of key distribution use inputs (0, 2); generation rounds of
randomness expansion use (0, 0). Test rounds draw both inputs uniformly from
{0, 1}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..chsh import _win
from ..keyrate import EpsilonBudget, ec_leakage, expansion_lengths, key_length
from ..tradeoff import LOG2_9, tested_fraction
from .bits import MeteredBitStream, interval_sampler
from .devices import Device
from .toeplitz import ToeplitzSeed, toeplitz_hash
from .transcript import BOT, Transcript


class RandomnessBudgetExceeded(RuntimeError):
    """The run needed more uniform bits than the caller allowed."""


@dataclass(frozen=True)
class ProtocolParams:
    """Parameters shared by all protocol runners.

    ``n`` is the number of rounds, or the number of blocks for the block
    protocol. Fields after ``symmetrize`` are only read by the runners that
    need them.
    """

    n: int
    gamma: float
    omega_exp: float
    delta_est: float
    s_max: int = 1
    symmetrize: bool = False
    Q: float = 0.0
    budget: EpsilonBudget | None = None
    key_length: int | None = None
    eps_s: float = 1e-6
    eps_EA: float = 1e-6
    delta: float = 0.0
    c_extractor: float = 1.0
    output_length: int | None = None
    randomness_budget: int | None = None
    extras: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma!r}")
        if not 0.0 <= self.omega_exp <= 1.0:
            raise ValueError(f"omega_exp must lie in [0, 1], got {self.omega_exp!r}")
        if not 0.0 <= self.delta_est < 1.0:
            raise ValueError(f"delta_est must lie in [0, 1), got {self.delta_est!r}")
        if int(self.s_max) != self.s_max or self.s_max < 1:
            raise ValueError("s_max must be a positive integer")
        if not 0.0 <= self.Q < 0.5:
            raise ValueError("Q must lie in [0, 1/2)")
        if self.key_length is not None and self.key_length < 0:
            raise ValueError("key_length must be nonnegative")
        if self.output_length is not None and self.output_length < 0:
            raise ValueError("output_length must be nonnegative")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "s_max", int(self.s_max))

    @property
    def threshold(self) -> float:
        return (self.omega_exp * self.gamma - self.delta_est) * self.n


def _test_inputs(T, gen_y, draw):
    """Inputs for every round; ``draw(k)`` returns ``k`` uniform bits."""
    n = T.size
    X = np.zeros(n, dtype=np.int8)
    Y = np.full(n, gen_y, dtype=np.int8)
    idx = np.flatnonzero(T)
    if idx.size:
        coins = draw(2 * idx.size)
        X[idx] = coins[0::2]
        Y[idx] = coins[1::2]
    return X, Y


def _play(device: Device, X, Y, rng, n_rounds):
    device.reset(n_rounds)
    a, b = device.play(X, Y, rng)
    return np.asarray(a, dtype=np.int8), np.asarray(b, dtype=np.int8)


def _score(T, X, Y, A, B):
    win = _win(X, Y, A, B).astype(np.int8)
    return np.where(T == 1, win, BOT).astype(np.int8)


def _abort_check(tr: Transcript, threshold: float, scores):
    tr.score = int(np.sum(scores == 1))
    tr.threshold = threshold
    if tr.score < threshold:
        tr.aborted = True
        tr.abort_reason = f"score {tr.score} below threshold {threshold:.6g}"


def run_entropy_accumulation(device: Device, params: ProtocolParams, rng: np.random.Generator,
                             symmetrize: bool | None = None) -> Transcript:
    """Entropy accumulation rounds followed by the score test.

    With symmetrization both outputs are flipped on rounds where a shared
    uniform bit is 1.
    """
    n = params.n
    sym = params.symmetrize if symmetrize is None else symmetrize
    T = (rng.random(n) < params.gamma).astype(np.int8)
    X, Y = _test_inputs(T, 2, lambda k: rng.integers(0, 2, size=k, dtype=np.int8))
    A, B_raw = _play(device, X, Y, rng, n)
    F = None
    if sym:
        F = rng.integers(0, 2, size=n, dtype=np.int8)
        A ^= F
        B_raw ^= F
    C = _score(T, X, Y, A, B_raw)
    B = np.where(T == 1, B_raw, BOT).astype(np.int8)
    tr = Transcript(T, X, Y, A, B, C, B_raw=B_raw, F=F)
    _abort_check(tr, params.threshold, C)
    return tr


@dataclass
class DIQKDResult:
    key_a: np.ndarray | None
    key_b: np.ndarray | None
    transcript: Transcript
    leakage_bits: float
    ec_failed: bool
    ell: int

    @property
    def aborted(self) -> bool:
        return self.transcript.aborted


def run_diqkd(device: Device, params: ProtocolParams, rng: np.random.Generator) -> DIQKDResult:
    """Key distribution run with an error-correction oracle.

    Bob learns Alice's raw string unless an independent ``eps_EC`` coin fires,
    in which case he keeps his own outputs (an undetected mismatch). Bob then
    scores the test rounds against his corrected string and both parties hash
    to ``params.key_length`` bits, or to the analytic key length if unset.
    """
    budget = params.budget
    if budget is None:
        raise ValueError("run_diqkd needs an EpsilonBudget")
    n = params.n
    T = (rng.random(n) < params.gamma).astype(np.int8)
    X, Y = _test_inputs(T, 2, lambda k: rng.integers(0, 2, size=k, dtype=np.int8))
    A, B_raw = _play(device, X, Y, rng, n)
    omega_leak = min(max(params.omega_exp, 0.75), 1.0)
    leak = ec_leakage(n, params.gamma, params.Q, omega_leak, budget.eps_EC_prime, budget.eps_EC)
    ec_failed = bool(rng.random() < budget.eps_EC)
    K_B = B_raw.copy() if ec_failed else A.copy()
    C = _score(T, X, Y, K_B, B_raw)
    B = np.where(T == 1, B_raw, BOT).astype(np.int8)
    tr = Transcript(T, X, Y, A, B, C, B_raw=B_raw)
    tr.extras["K_B"] = K_B
    _abort_check(tr, params.threshold, C)
    if params.key_length is not None:
        ell = params.key_length
    else:
        report = key_length(n, params.gamma, params.omega_exp, params.delta_est, params.Q, budget)
        ell = int(math.floor(report.ell))
    if tr.aborted:
        return DIQKDResult(None, None, tr, leak, ec_failed, ell)
    if ell == 0:
        empty = np.zeros(0, dtype=np.int8)
        return DIQKDResult(empty, empty.copy(), tr, leak, ec_failed, 0)
    seed = ToeplitzSeed(rng.integers(0, 2, size=n + ell - 1, dtype=np.int8), n, ell)
    return DIQKDResult(toeplitz_hash(A, seed), toeplitz_hash(K_B, seed), tr, leak, ec_failed, ell)


@dataclass
class ExpansionResult:
    output: np.ndarray | None
    bits_consumed: int
    transcript: Transcript
    consumed_sampling: int
    consumed_inputs: int
    consumed_seed: int

    @property
    def aborted(self) -> bool:
        return self.transcript.aborted


def run_expansion(device: Device, params: ProtocolParams,
                  rng: np.random.Generator) -> ExpansionResult:
    """Randomness expansion run with exact accounting of the uniform bits used.

    Test flags come from the interval sampler, test inputs cost two bits per
    test round, and a Toeplitz hash of ``A || B`` stands in for the seeded
    extractor. Device-internal randomness is not charged.
    """
    if not params.gamma < 1.0:
        raise ValueError("expansion needs gamma < 1")
    n = params.n
    stream = MeteredBitStream(rng)
    cap = params.randomness_budget

    def charge():
        if cap is not None and stream.consumed > cap:
            raise RandomnessBudgetExceeded(
                f"consumed {stream.consumed} uniform bits, budget is {cap}")

    T, sampling = interval_sampler(params.gamma, n, stream)
    charge()
    X, Y = _test_inputs(T, 0, stream.bits)
    inputs = stream.consumed - sampling
    charge()
    A, B_raw = _play(device, X, Y, rng, n)
    C = _score(T, X, Y, A, B_raw)
    B = np.where(T == 1, B_raw, BOT).astype(np.int8)
    tr = Transcript(T, X, Y, A, B, C, B_raw=B_raw)
    _abort_check(tr, params.threshold, C)
    if tr.aborted:
        return ExpansionResult(None, stream.consumed, tr, sampling, inputs, 0)
    if params.output_length is not None:
        out_len = params.output_length
    else:
        rep = expansion_lengths(n, params.gamma, params.delta, params.eps_s, params.eps_EA,
                                min(max(params.omega_exp, 0.75), 1.0), params.delta_est,
                                params.c_extractor, LOG2_9)
        out_len = int(math.floor(rep.output))
    if out_len == 0:
        return ExpansionResult(np.zeros(0, dtype=np.int8), stream.consumed, tr, sampling, inputs, 0)
    raw = np.concatenate([A, B_raw])
    before = stream.consumed
    seed = ToeplitzSeed.random(raw.size, out_len, stream)
    charge()
    return ExpansionResult(toeplitz_hash(raw, seed), stream.consumed, tr, sampling, inputs,
                           stream.consumed - before)


def run_block_protocol(device: Device, params: ProtocolParams,
                       rng: np.random.Generator) -> Transcript:
    """Block protocol with ``params.n`` blocks.

    Each block runs rounds until one is tested or ``s_max`` untested rounds
    have elapsed. The block score is the test round's win bit, or undefined.
    The realized round count is stored in ``extras['N']``.
    """
    m, s_max, gamma = params.n, params.s_max, params.gamma
    G = rng.geometric(gamma, size=m)
    tested = G <= s_max
    lengths = np.minimum(G, s_max).astype(np.int64)
    N = int(lengths.sum())
    T = np.zeros(N, dtype=np.int8)
    ends = np.cumsum(lengths) - 1
    T[ends[tested]] = 1
    X, Y = _test_inputs(T, 2, lambda k: rng.integers(0, 2, size=k, dtype=np.int8))
    A, B_raw = _play(device, X, Y, rng, N)
    C = _score(T, X, Y, A, B_raw)
    B = np.where(T == 1, B_raw, BOT).astype(np.int8)
    block_scores = np.where(tested, C[ends], BOT).astype(np.int8)
    tr = Transcript(T, X, Y, A, B, C, B_raw=B_raw, block_lengths=lengths,
                    block_scores=block_scores)
    tr.extras["N"] = N
    threshold = (params.omega_exp * tested_fraction(gamma, s_max) - params.delta_est) * m
    _abort_check(tr, threshold, block_scores)
    return tr
