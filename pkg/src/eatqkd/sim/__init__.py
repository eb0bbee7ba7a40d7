"""Protocol simulation: devices, post-processing primitives and Monte Carlo runs."""
from .bits import MeteredBitStream, interval_distribution, interval_sampler, interval_sampler_batch
from .devices import ClassicalDevice, Device, MemoryDevice, QuantumDevice, WernerDevice, parse_device
from .harness import AbortEstimate, estimate_abort_probability, run_trials, trial_generators
from .protocols import (
    DIQKDResult,
    ExpansionResult,
    ProtocolParams,
    RandomnessBudgetExceeded,
    run_block_protocol,
    run_diqkd,
    run_entropy_accumulation,
    run_expansion,
)
from .toeplitz import ToeplitzSeed, collision_fractions, toeplitz_hash
from .transcript import BOT, Transcript
