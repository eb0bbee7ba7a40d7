"""Self-check suites comparing the implementation with independent oracles.

Every suite uses a pinned seed and returns a :class:`SuiteResult`.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .chsh import QUANTUM_WIN, qber, werner_omega, werner_strategy, winning_probability
from .tradeoff import (
    LOG2_13,
    TradeoffContext,
    entropy_bound,
    eta_opt,
    eta_opt_block,
    f_min,
    g_single,
    tangent_coeffs,
    tested_fraction,
)
from .sim.bits import interval_distribution
from .sim.toeplitz import ToeplitzSeed, collision_fractions, toeplitz_hash

SEED = 20240601


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def lagrange_instance(gamma: float, s_max: int, omega_star: float, rng, starts: int = 4):
    """Minimize ``sum_i (1-gamma)^(i-1) g(w_i)`` under ``sum_i gamma (1-gamma)^(i-1) w_i = target``.

    ``target = omega_star * (1 - (1-gamma)^s_max)``. Returns
    ``(numerical_min, equal_value, grid_min)``; ``grid_min`` is None for s_max > 3.
    """
    lo, hi = 0.75, QUANTUM_WIN
    i = np.arange(s_max)
    weights = (1.0 - gamma) ** i
    cons_w = gamma * weights
    target = omega_star * tested_fraction(gamma, s_max)
    equal = float(weights.sum() * entropy_bound(omega_star))

    def obj(w):
        return float(weights @ entropy_bound(w))

    best = math.inf
    for _ in range(starts):
        # random feasible start: mix a random box point toward the equal point
        w0 = rng.uniform(lo, hi, size=s_max)
        w0 = w0 + (target - cons_w @ w0) / cons_w.sum()
        w0 = np.clip(w0, lo, hi)
        res = minimize(
            obj, w0, method="SLSQP", bounds=[(lo, hi)] * s_max,
            constraints=[{"type": "eq", "fun": lambda w: (cons_w @ w - target) / cons_w.sum()}],
            options={"ftol": 1e-15, "maxiter": 500},
        )
        if abs(cons_w @ res.x - target) / cons_w.sum() < 1e-9:
            best = min(best, obj(res.x))
    grid_min = None
    if s_max <= 3:
        grid_min = _lagrange_grid(weights, cons_w, target, lo, hi)
    return best, equal, grid_min


def _lagrange_grid(weights, cons_w, target, lo, hi, points=401):
    s = weights.size
    if s == 1:
        return float(weights[0] * entropy_bound(target / cons_w[0]))
    axes = np.meshgrid(*[np.linspace(lo, hi, points)] * (s - 1), indexing="ij")
    free = np.stack([a.ravel() for a in axes], axis=1)
    last = (target - free @ cons_w[:-1]) / cons_w[-1]
    ok = (last >= lo) & (last <= hi)
    w = np.column_stack([free[ok], last[ok]])
    return float((entropy_bound(w) @ weights).min())


def suite_lagrange(instances: int = 200) -> tuple[bool, str]:
    rng = np.random.default_rng(SEED)
    worst = 0.0
    below = 0.0
    for _ in range(instances):
        gamma = float(10.0 ** rng.uniform(-2.0, -0.05))
        s_max = int(rng.integers(1, 9))
        omega_star = float(rng.uniform(0.76, QUANTUM_WIN - 0.005))
        num, eq, grid = lagrange_instance(gamma, s_max, omega_star, rng)
        worst = max(worst, abs(num - eq))
        if grid is not None:
            below = max(below, eq - grid)
    ok = worst <= 1e-6 and below <= 1e-9
    return ok, f"max |min - equal| = {worst:.3g}, max grid undershoot = {below:.3g}"


def suite_tangent() -> tuple[bool, str]:
    rng = np.random.default_rng(SEED + 1)
    problems = []
    for gamma in (1.0, 0.3, 0.01):
        p = np.linspace(gamma * 0.7501, gamma * (QUANTUM_WIN - 1e-4), 4001)
        g = entropy_bound(p / gamma)
        d2 = g[:-2] - 2 * g[1:-1] + g[2:]
        if d2.min() < -1e-9:
            problems.append(f"convexity gamma={gamma}: {d2.min():.3g}")
    worst_gap = 0.0
    worst_glue = 0.0
    for _ in range(2000):
        gamma = float(rng.uniform(0.01, 1.0))
        pt = gamma * float(rng.uniform(0.7505, QUANTUM_WIN - 1e-3))
        p = gamma * float(rng.uniform(0.75, QUANTUM_WIN))
        fm, gv = f_min(p, pt, gamma), g_single(p, gamma)
        if p <= pt:
            worst_gap = max(worst_gap, abs(fm - gv))
        elif fm > gv + 1e-12:
            worst_gap = max(worst_gap, fm - gv)
        a, _ = tangent_coeffs(pt, gamma)
        h = 1e-7 * gamma
        fd = (g_single(pt, gamma) - g_single(pt - h, gamma)) / h
        worst_glue = max(worst_glue, abs(fd - a) / max(1.0, abs(a)))
    if worst_gap > 1e-12:
        problems.append(f"f_min vs g gap {worst_gap:.3g}")
    if worst_glue > 1e-4:
        problems.append(f"slope mismatch {worst_glue:.3g}")
    return not problems, "; ".join(problems) or (
        f"convex on grid, f_min <= g, slope gluing rel err {worst_glue:.2g}")


def suite_toeplitz() -> tuple[bool, str]:
    problems = []
    for in_len, out_len in ((4, 2), (6, 3), (8, 4), (10, 4)):
        fr = collision_fractions(in_len, out_len)
        bound = Fraction(1, 2**out_len)
        bad = [d for d, v in fr.items() if v > bound]
        if bad:
            problems.append(f"{in_len}->{out_len}: {len(bad)} differences exceed 2^-{out_len}")
    rng = np.random.default_rng(SEED + 2)
    x = rng.integers(0, 2, 37)
    if not np.array_equal(toeplitz_hash(x, ToeplitzSeed.identity(37)), x):
        problems.append("identity seed does not reproduce the input")
    seed = ToeplitzSeed(rng.integers(0, 2, 37 + 11 - 1), 37, 11)
    for _ in range(50):
        u, v = rng.integers(0, 2, 37), rng.integers(0, 2, 37)
        if not np.array_equal(toeplitz_hash(u ^ v, seed), toeplitz_hash(u, seed) ^ toeplitz_hash(v, seed)):
            problems.append("linearity")
            break
    return not problems, "; ".join(problems) or "exhaustive universality exact up to 10 -> 4"


def suite_interval() -> tuple[bool, str]:
    problems = []
    for gamma in (Fraction(1, 4), Fraction(1, 2), Fraction(3, 8)):
        for count in range(1, 5):
            mass, unresolved = interval_distribution(gamma, count, 40)
            for seq, m in mass.items():
                k = sum(seq)
                if m != gamma**k * (1 - gamma) ** (count - k):
                    problems.append(f"gamma={gamma} seq={seq}")
            if unresolved != 0 or len(mass) != 2**count:
                problems.append(f"gamma={gamma} count={count} incomplete")
    gamma = Fraction(1, 3)
    mass, unresolved = interval_distribution(gamma, 3, 20)
    for seq in mass:
        k = sum(seq)
        p = gamma**k * (1 - gamma) ** (3 - k)
        if not mass[seq] <= p <= mass[seq] + unresolved:
            problems.append(f"gamma=1/3 bracket fails for {seq}")
    return not problems, "; ".join(problems) or "exact product law at dyadic gamma"


def suite_reduction(log13_offset: float = 0.0) -> tuple[bool, str]:
    rng = np.random.default_rng(SEED + 3)
    worst = 0.0
    for _ in range(50):
        gamma = float(rng.uniform(0.05, 1.0))
        omega = float(rng.uniform(0.78, QUANTUM_WIN))
        n = float(10.0 ** rng.uniform(5, 12))
        eps_s, eps_e = (float(10.0 ** rng.uniform(-10, -3)) for _ in range(2))
        single = eta_opt(omega, 1e-3, gamma, n, eps_s, eps_e,
                         TradeoffContext(gamma, 1, LOG2_13 + log13_offset))
        block = eta_opt_block(omega, 1e-3, gamma, 1, n, eps_s, eps_e, dim_log_term=LOG2_13)
        worst = max(worst, abs(single.value - block.value))
    return worst <= 1e-12, f"max |single - block| = {worst:.3g}"


def suite_werner() -> tuple[bool, str]:
    worst = 0.0
    for nu in np.linspace(0.0, 1.0, 100):
        s = werner_strategy(float(nu))
        worst = max(worst, abs(winning_probability(s) - werner_omega(nu)), abs(qber(s) - nu / 2.0))
    return worst <= 1e-10, f"max deviation {worst:.3g}"


SUITES: dict[str, Callable[..., tuple[bool, str]]] = {
    "lagrange": suite_lagrange,
    "tangent": suite_tangent,
    "toeplitz": suite_toeplitz,
    "interval": suite_interval,
    "reduction": suite_reduction,
    "werner": suite_werner,
}


def run_all(log13_offset: float = 0.0, only=None) -> list[SuiteResult]:
    """Run the suites in order. ``log13_offset`` perturbs the single-round
    dimension constant in the reduction suite (a sensitivity canary)."""
    results = []
    for name, fn in SUITES.items():
        if only and name not in only:
            continue
        t0 = time.perf_counter()
        try:
            ok, detail = fn(log13_offset) if name == "reduction" else fn()
        except Exception as exc:  # a crashing suite is a failing suite
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(SuiteResult(name, bool(ok), detail, time.perf_counter() - t0))
    return results
