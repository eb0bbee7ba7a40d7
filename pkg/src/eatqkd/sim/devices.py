"""Simulated Bell devices.

A device answers a whole vector of rounds at once through ``play(x, y, rng)``.
Rounds are presented in protocol order; stateful devices use their round
counter to decide how to answer. ``reset(n_rounds)`` is called at the start of
every protocol run.
"""
from __future__ import annotations

import copy

import numpy as np

from ..chsh import TwoQubitStrategy, WernerParams, sample_rounds, werner_strategy


class Device:
    memoryless = True

    def reset(self, n_rounds: int) -> None:
        """Forget any state; ``n_rounds`` is the planned run length."""

    def play(self, x, y, rng: np.random.Generator):
        raise NotImplementedError

    def fresh(self) -> "Device":
        """Independent copy for a new trial."""
        return copy.deepcopy(self)


class QuantumDevice(Device):
    """I.i.d. device implementing a fixed two-qubit strategy."""

    def __init__(self, strategy: TwoQubitStrategy):
        self.strategy = strategy

    def play(self, x, y, rng):
        return sample_rounds(self.strategy, x, y, rng)


class WernerDevice(QuantumDevice):
    def __init__(self, nu: float):
        self.params = WernerParams(nu)
        super().__init__(werner_strategy(self.params))

    def __repr__(self):
        return f"WernerDevice(nu={self.params.nu})"


class ClassicalDevice(Device):
    """One of the 16 deterministic strategies.

    ``strategy_id`` packs Alice's answers ``(a0, a1)`` in bits 3..2 and Bob's
    ``(b0, b1)`` in bits 1..0 (first listed bit is the higher one). On the key
    input ``y = 2`` Bob repeats ``b0``.
    """

    def __init__(self, strategy_id: int):
        if not 0 <= strategy_id < 16:
            raise ValueError(f"classical strategy id must be in 0..15, got {strategy_id!r}")
        self.strategy_id = strategy_id
        alice, bob = strategy_id >> 2, strategy_id & 3
        self.alice = np.array([(alice >> 1) & 1, alice & 1], dtype=np.int8)
        b0, b1 = (bob >> 1) & 1, bob & 1
        self.bob = np.array([b0, b1, b0], dtype=np.int8)

    def play(self, x, y, rng):
        return self.alice[np.asarray(x)], self.bob[np.asarray(y)]

    def __repr__(self):
        return f"ClassicalDevice({self.strategy_id})"


class MemoryDevice(Device):
    """Plays a Werner strategy for the first ``switch_fraction`` of the run,
    then a deterministic classical strategy."""

    memoryless = False

    def __init__(self, nu: float, classical_id: int, switch_fraction: float = 0.5):
        if not 0.0 <= switch_fraction <= 1.0:
            raise ValueError("switch_fraction must lie in [0, 1]")
        self.quantum = WernerDevice(nu)
        self.classical = ClassicalDevice(classical_id)
        self.switch_fraction = switch_fraction
        self.switch = 0
        self.played = 0

    def reset(self, n_rounds):
        self.switch = int(self.switch_fraction * n_rounds)
        self.played = 0

    def play(self, x, y, rng):
        x = np.asarray(x)
        y = np.asarray(y)
        idx = self.played + np.arange(x.size)
        a = np.empty(x.size, dtype=np.int8)
        b = np.empty(x.size, dtype=np.int8)
        early = idx < self.switch
        if early.any():
            a[early], b[early] = self.quantum.play(x[early], y[early], rng)
        if (~early).any():
            a[~early], b[~early] = self.classical.play(x[~early], y[~early], rng)
        self.played += x.size
        return a, b

    def __repr__(self):
        return (f"MemoryDevice(nu={self.quantum.params.nu}, id={self.classical.strategy_id}, "
                f"switch={self.switch_fraction})")


def parse_device(spec: str) -> Device:
    """Build a device from ``werner:NU``, ``classical:ID`` or ``memory:NU:ID[:FRACTION]``."""
    parts = spec.strip().split(":")
    kind = parts[0].lower()
    try:
        if kind == "werner" and len(parts) == 2:
            return WernerDevice(float(parts[1]))
        if kind == "classical" and len(parts) == 2:
            return ClassicalDevice(int(parts[1]))
        if kind == "memory" and len(parts) in (3, 4):
            frac = float(parts[3]) if len(parts) == 4 else 0.5
            return MemoryDevice(float(parts[1]), int(parts[2]), frac)
    except ValueError as exc:
        raise ValueError(f"bad device spec {spec!r}: {exc}") from None
    raise ValueError(
        f"unknown device spec {spec!r}; expected werner:NU, classical:ID or memory:NU:ID[:FRACTION]"
    )
