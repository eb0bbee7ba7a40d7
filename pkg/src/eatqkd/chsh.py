"""The CHSH game and exact evaluation of two-qubit strategies.

Alice has inputs {0, 1}, Bob has {0, 1, 2}; input 2 on Bob's side is the key
generation setting. A strategy is a two-qubit density matrix plus one binary
projective measurement per input on each side, given as a Bloch vector.
Outcome 0 is the +1 eigenvector of ``n . sigma``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

SQRT2 = math.sqrt(2.0)
CLASSICAL_WIN = 0.75
QUANTUM_WIN = (2.0 + SQRT2) / 4.0

ALICE_INPUTS = (0, 1)
BOB_INPUTS = (0, 1, 2)

_I2 = np.eye(2, dtype=complex)
_PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)
_TOL = 1e-10


@dataclass(frozen=True)
class GameRoundIO:
    x: int
    y: int
    a: int
    b: int

    def __post_init__(self):
        if self.x not in ALICE_INPUTS:
            raise ValueError(f"x must be 0 or 1, got {self.x!r}")
        if self.y not in BOB_INPUTS:
            raise ValueError(f"y must be 0, 1 or 2, got {self.y!r}")
        if self.a not in (0, 1) or self.b not in (0, 1):
            raise ValueError("outputs must be bits")


def chsh_win(io: GameRoundIO) -> int:
    """Winning predicate of the CHSH variant.

    On the standard inputs the parties win iff ``a xor b == x*y``; on (0, 2)
    they win iff ``a == b``; (1, 2) is always counted as a win.
    """
    return int(_win(io.x, io.y, io.a, io.b))


def _win(x, y, a, b):
    """Array form of :func:`chsh_win` (no validation)."""
    x, y, a, b = (np.asarray(v) for v in (x, y, a, b))
    std = (y < 2) & ((a ^ b) == (x & y))
    key = (y == 2) & (x == 0) & (a == b)
    free = (y == 2) & (x == 1)
    return (std | key | free).astype(np.int8)


def omega_from_beta(beta: float) -> float:
    """Winning probability ``1/2 + beta/8`` for a CHSH value in [2, 2*sqrt(2)]."""
    if not 2.0 - 1e-12 <= beta <= 2.0 * SQRT2 + 1e-12:
        raise ValueError(f"beta must lie in [2, 2*sqrt(2)], got {beta!r}")
    return 0.5 + beta / 8.0


def beta_from_omega(omega: float) -> float:
    return 8.0 * (omega - 0.5)


def projector(bloch, outcome: int) -> np.ndarray:
    """Projector onto outcome ``0`` (+1) or ``1`` (-1) of ``bloch . sigma``."""
    n = np.asarray(bloch, dtype=float)
    obs = n[0] * _PAULI[0] + n[1] * _PAULI[1] + n[2] * _PAULI[2]
    sign = 1.0 if outcome == 0 else -1.0
    return 0.5 * (_I2 + sign * obs)


@dataclass(frozen=True)
class TwoQubitStrategy:
    """Density matrix on A (x) B and per-input Bloch vectors for each party."""

    state: np.ndarray
    alice_meas: Mapping[int, tuple]
    bob_meas: Mapping[int, tuple]
    _joint: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        rho = np.asarray(self.state, dtype=complex)
        if rho.shape != (4, 4):
            raise ValueError("state must be 4x4")
        if np.max(np.abs(rho - rho.conj().T)) > _TOL:
            raise ValueError("state is not Hermitian")
        if abs(np.trace(rho).real - 1.0) > _TOL or abs(np.trace(rho).imag) > _TOL:
            raise ValueError("state does not have unit trace")
        if np.linalg.eigvalsh(rho).min() < -_TOL:
            raise ValueError("state is not positive semidefinite")
        for name, meas, inputs in (
            ("alice", self.alice_meas, ALICE_INPUTS),
            ("bob", self.bob_meas, BOB_INPUTS),
        ):
            for i in inputs:
                if i not in meas:
                    raise ValueError(f"{name} measurement for input {i} missing")
                v = np.asarray(meas[i], dtype=float)
                if v.shape != (3,) or abs(np.linalg.norm(v) - 1.0) > _TOL:
                    raise ValueError(f"{name} input {i}: Bloch vector must be a unit 3-vector")
        object.__setattr__(self, "state", rho)
        object.__setattr__(self, "_joint", _joint_table(rho, self.alice_meas, self.bob_meas))

    def joint(self) -> np.ndarray:
        """``P[x, y, a, b]`` as a (2, 3, 2, 2) array."""
        return self._joint.copy()


def _joint_table(rho, alice_meas, bob_meas) -> np.ndarray:
    table = np.zeros((2, 3, 2, 2))
    for x in ALICE_INPUTS:
        for y in BOB_INPUTS:
            for a in (0, 1):
                pa = projector(alice_meas[x], a)
                for b in (0, 1):
                    op = np.kron(pa, projector(bob_meas[y], b))
                    table[x, y, a, b] = np.trace(op @ rho).real
    # rounding can leave entries at -1e-17
    return np.clip(table, 0.0, 1.0)


@dataclass(frozen=True)
class WernerParams:
    nu: float

    def __post_init__(self):
        if not 0.0 <= self.nu <= 1.0:
            raise ValueError(f"nu must lie in [0, 1], got {self.nu!r}")


def phi_plus() -> np.ndarray:
    v = np.array([1.0, 0.0, 0.0, 1.0]) / SQRT2
    return np.outer(v, v).astype(complex)


def werner_state(nu: float) -> np.ndarray:
    return (1.0 - nu) * phi_plus() + nu * np.eye(4, dtype=complex) / 4.0


HONEST_ALICE = {0: (0.0, 0.0, 1.0), 1: (1.0, 0.0, 0.0)}
HONEST_BOB = {
    0: (1.0 / SQRT2, 0.0, 1.0 / SQRT2),
    1: (-1.0 / SQRT2, 0.0, 1.0 / SQRT2),
    2: (0.0, 0.0, 1.0),
}


def werner_strategy(params: WernerParams | float) -> TwoQubitStrategy:
    """Honest noisy implementation: Werner state with sigma_z/sigma_x for Alice
    and (z+x)/sqrt2, (z-x)/sqrt2, z for Bob."""
    if not isinstance(params, WernerParams):
        params = WernerParams(float(params))
    return TwoQubitStrategy(werner_state(params.nu), HONEST_ALICE, HONEST_BOB)


def werner_omega(nu: float) -> float:
    return (2.0 + SQRT2 * (1.0 - nu)) / 4.0


def omega_from_qber(q: float) -> float:
    """Expected winning probability of the Werner implementation with QBER ``q``."""
    return (2.0 + SQRT2 * (1.0 - 2.0 * q)) / 4.0


def _input_table(input_dist) -> np.ndarray:
    if input_dist is None:
        table = np.zeros((2, 3))
        table[:2, :2] = 0.25
        return table
    if isinstance(input_dist, Mapping):
        table = np.zeros((2, 3))
        for (x, y), p in input_dist.items():
            if x not in ALICE_INPUTS or y not in BOB_INPUTS:
                raise ValueError(f"invalid input pair {(x, y)}")
            table[x, y] = p
    else:
        table = np.asarray(input_dist, dtype=float)
        if table.shape != (2, 3):
            raise ValueError("input distribution array must have shape (2, 3)")
    if table.min() < 0 or abs(table.sum() - 1.0) > _TOL:
        raise ValueError("input distribution is not normalized")
    return table


def winning_probability(strategy: TwoQubitStrategy, input_dist=None) -> float:
    """Exact winning probability under ``input_dist``.

    ``input_dist`` is a mapping ``{(x, y): prob}`` or a (2, 3) array; the default
    is uniform on {0,1} x {0,1}.
    """
    table = _input_table(input_dist)
    joint = strategy._joint
    x, y, a, b = np.meshgrid([0, 1], [0, 1, 2], [0, 1], [0, 1], indexing="ij")
    wins = _win(x, y, a, b)
    per_input = (joint * wins).sum(axis=(2, 3))
    return float((table * per_input).sum())


def qber(strategy: TwoQubitStrategy) -> float:
    """``Pr[a != b]`` on the key generation inputs (x, y) = (0, 2)."""
    p = strategy._joint[0, 2]
    return float(p[0, 1] + p[1, 0])


def sample_round(strategy: TwoQubitStrategy, x: int, y: int, rng: np.random.Generator):
    """Draw ``(a, b)`` from the exact outcome distribution for inputs ``(x, y)``."""
    p = strategy._joint[x, y].ravel()
    k = int(np.searchsorted(np.cumsum(p), rng.random() * p.sum(), side="right"))
    k = min(k, 3)
    return k >> 1, k & 1


def sample_rounds(strategy: TwoQubitStrategy, x, y, rng: np.random.Generator):
    """Vectorized :func:`sample_round` over arrays of inputs."""
    x = np.asarray(x, dtype=np.intp)
    y = np.asarray(y, dtype=np.intp)
    cdf = np.cumsum(strategy._joint.reshape(2, 3, 4), axis=-1)
    cdf[..., -1] = 1.0
    u = rng.random(x.shape)
    c = cdf[x, y]
    k = (u[..., None] >= c[..., :3]).sum(axis=-1)
    return (k >> 1).astype(np.int8), (k & 1).astype(np.int8)
