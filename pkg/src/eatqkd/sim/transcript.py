"""Per-round protocol records."""
from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

BOT = -1  # stands for the "no value" symbol in B and C


@dataclass
class Transcript:
    """Per-round vectors of one protocol run.

    ``B`` and ``C`` hold :data:`BOT` where the protocol assigns no value.
    ``B_raw`` keeps Bob's device output on every round. Block runs also fill
    ``block_lengths`` and ``block_scores``.
    """

    T: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    B_raw: np.ndarray | None = None
    F: np.ndarray | None = None
    aborted: bool = False
    abort_reason: str = ""
    score: int = 0
    threshold: float = 0.0
    block_lengths: np.ndarray | None = None
    block_scores: np.ndarray | None = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.T)
        for name in ("X", "Y", "A", "B", "C"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} has length {len(getattr(self, name))}, expected {n}")
        for name in ("B_raw", "F"):
            v = getattr(self, name)
            if v is not None and len(v) != n:
                raise ValueError(f"{name} has length {len(v)}, expected {n}")
        if self.block_lengths is not None and int(np.sum(self.block_lengths)) != n:
            raise ValueError("block lengths do not add up to the round count")

    @property
    def rounds(self) -> int:
        return len(self.T)

    def check(self) -> None:
        """Raise if ``C`` is undefined anywhere other than the generation rounds."""
        if not np.array_equal(self.C == BOT, self.T == 0):
            raise AssertionError("C must be undefined exactly on generation rounds")

    def to_csv(self) -> str:
        """One row per round: index, T, X, Y, A, B, C (undefined values left empty)."""
        buf = io.StringIO()
        buf.write("index,T,X,Y,A,B,C\n")
        cols = [self.T, self.X, self.Y, self.A, self.B, self.C]
        for i in range(self.rounds):
            cells = [str(i)] + ["" if int(c[i]) == BOT else str(int(c[i])) for c in cols]
            buf.write(",".join(cells) + "\n")
        return buf.getvalue()
