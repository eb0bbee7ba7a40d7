"""Monte Carlo harness for abort statistics.

Trial ``i`` always uses the generator built from child ``i`` of
``SeedSequence(master_seed).spawn(trials)``, so results do not depend on how
many worker threads run the trials.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .devices import Device
from .protocols import (
    ProtocolParams,
    run_block_protocol,
    run_diqkd,
    run_entropy_accumulation,
    run_expansion,
)

THREADS_ENV = "EATQKD_THREADS"
PROTOCOLS = ("ea", "diqkd", "expansion", "block")


def trial_generators(master_seed: int, trials: int) -> list[np.random.Generator]:
    """Independent per-trial generators split from one master seed."""
    children = np.random.SeedSequence(int(master_seed)).spawn(trials)
    return [np.random.default_rng(c) for c in children]


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            k = int(raw)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
        if k < 1:
            raise ValueError(f"{THREADS_ENV} must be at least 1")
        return k
    return min(4, os.cpu_count() or 1)


@dataclass(frozen=True)
class TrialOutcome:
    aborted: bool
    score: int
    rounds: int
    bits_consumed: int


@dataclass(frozen=True)
class AbortEstimate:
    estimate: float
    stderr: float
    trials: int
    aborts: int
    mean_score: float
    mean_rounds: float
    mean_bits_consumed: float


def _one_trial(device: Device, protocol: str, params: ProtocolParams, rng) -> TrialOutcome:
    dev = device.fresh()
    if protocol == "ea":
        tr = run_entropy_accumulation(dev, params, rng)
        return TrialOutcome(tr.aborted, tr.score, tr.rounds, 0)
    if protocol == "diqkd":
        res = run_diqkd(dev, params, rng)
        tr = res.transcript
        return TrialOutcome(tr.aborted, tr.score, tr.rounds, 0)
    if protocol == "expansion":
        res = run_expansion(dev, params, rng)
        tr = res.transcript
        return TrialOutcome(tr.aborted, tr.score, tr.rounds, res.bits_consumed)
    if protocol == "block":
        tr = run_block_protocol(dev, params, rng)
        return TrialOutcome(tr.aborted, tr.score, tr.rounds, 0)
    raise ValueError(f"unknown protocol {protocol!r}; choose from {', '.join(PROTOCOLS)}")


def run_trials(device: Device, protocol: str, params: ProtocolParams, trials: int,
               master_seed: int, threads: int | None = None) -> list[TrialOutcome]:
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if protocol not in PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol!r}; choose from {', '.join(PROTOCOLS)}")
    gens = trial_generators(master_seed, trials)
    threads = default_threads() if threads is None else threads
    if threads <= 1:
        return [_one_trial(device, protocol, params, g) for g in gens]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda g: _one_trial(device, protocol, params, g), gens))


def estimate_abort_probability(device: Device, protocol: str, params: ProtocolParams,
                               trials: int, master_seed: int = 0,
                               threads: int | None = None) -> AbortEstimate:
    """Empirical abort frequency with its binomial standard error."""
    outs = run_trials(device, protocol, params, trials, master_seed, threads)
    aborts = sum(o.aborted for o in outs)
    p = aborts / trials
    return AbortEstimate(
        estimate=p,
        stderr=math.sqrt(p * (1.0 - p) / trials),
        trials=trials,
        aborts=aborts,
        mean_score=float(np.mean([o.score for o in outs])),
        mean_rounds=float(np.mean([o.rounds for o in outs])),
        mean_bits_consumed=float(np.mean([o.bits_consumed for o in outs])),
    )
