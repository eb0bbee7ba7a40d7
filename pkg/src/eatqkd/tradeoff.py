"""Min-tradeoff functions for the CHSH game and the finite-size entropy rates.

Frequencies are distributions over the test-round score C in {bot, 0, 1}. In the
single-round regime ``p0 + p1 = gamma`` and the relevant winning probability is
``p1 / gamma``; in the block regime ``p0 + p1 = 1 - (1 - gamma)**s_max``.

The rate is ``eta = f_min(p, p_t) - (2/sqrt(n)) (dim + a(p_t)) sqrt(1 - 2 log(eps_s eps_e))``
where ``f_min`` is ``g`` cut at ``p_t`` and continued along its tangent line.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chsh import QUANTUM_WIN
from .entropy_core import binary_entropy_array, maximize_scalar

LOG2_13 = math.log2(13.0)
LOG2_9 = math.log2(9.0)

# keeps the optimizer strictly inside the open interval of tangent points
_EDGE = 1e-9
_OMEGA_SLACK = 1e-9


@dataclass(frozen=True)
class OutcomeFrequency:
    """Distribution of the score ``C`` over ``(bot, 0, 1)``."""

    p_bot: float
    p0: float
    p1: float

    def __post_init__(self):
        for name in ("p_bot", "p0", "p1"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v!r}")
        if abs(self.p_bot + self.p0 + self.p1 - 1.0) > 1e-10:
            raise ValueError("frequencies must sum to 1")

    @classmethod
    def from_test_rate(cls, p1: float, tested: float) -> "OutcomeFrequency":
        """Frequency with ``p0 + p1 = tested`` (``gamma`` or the block analogue)."""
        return cls(1.0 - tested, tested - p1, p1)

    def check_single(self, gamma: float) -> None:
        if abs(self.p0 + self.p1 - gamma) > 1e-10:
            raise ValueError(f"p0 + p1 must equal gamma={gamma}, got {self.p0 + self.p1}")

    def check_block(self, gamma: float, s_max: int) -> None:
        tested = tested_fraction(gamma, s_max)
        if abs(self.p0 + self.p1 - tested) > 1e-10:
            raise ValueError(f"p0 + p1 must equal 1-(1-gamma)^s_max={tested}")


@dataclass(frozen=True)
class TradeoffContext:
    gamma: float
    s_max: int = 1
    dim_log_term: float = LOG2_13

    def __post_init__(self):
        _check_gamma(self.gamma)
        if self.s_max < 1 or int(self.s_max) != self.s_max:
            raise ValueError("s_max must be a positive integer")
        if not self.dim_log_term > 0:
            raise ValueError("dim_log_term must be positive")


@dataclass(frozen=True)
class RatePenaltyBreakdown:
    """First- and second-order parts of an entropy rate (bits per round or per block)."""

    first_order: float
    second_order: float
    argmax_pt: float

    def __post_init__(self):
        if self.second_order < 0:
            raise ValueError("second-order penalty must be nonnegative")

    @property
    def value(self) -> float:
        return self.first_order - self.second_order


def _check_gamma(gamma):
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma!r}")


def _check_eps(name, eps):
    if not 0.0 < eps < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {eps!r}")


# ---------------------------------------------------------------------------
# single-round bound as a function of the winning probability


def _clamp_omega(omega):
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < -_OMEGA_SLACK) or np.any(omega > 1.0 + _OMEGA_SLACK):
        raise ValueError("winning probability outside [0, 1]")
    return np.clip(omega, 0.0, 1.0)


def entropy_bound(omega):
    """``1 - h(1/2 + 1/2 sqrt(16 w (w - 1) + 3))``, capped at 1 above the Tsirelson point.

    Below the classical value 3/4 the bound is trivial and 0 is returned.
    """
    omega = _clamp_omega(omega)
    disc = np.clip(16.0 * omega * (omega - 1.0) + 3.0, 0.0, None)
    val = 1.0 - binary_entropy_array(0.5 + 0.5 * np.sqrt(disc))
    val = np.where(omega >= QUANTUM_WIN, 1.0, val)
    val = np.where(omega <= 0.75, 0.0, val)
    return val if val.ndim else float(val)


def entropy_bound_slope(omega):
    """Derivative of :func:`entropy_bound` in ``omega`` on (3/4, (2+sqrt2)/4).

    Written as ``8 (2w - 1) artanh(u) / (u ln 2)`` with ``u = sqrt(16 w (w-1) + 3)``,
    which is finite at the classical end and diverges at the Tsirelson end.
    """
    omega = np.asarray(omega, dtype=float)
    u = np.sqrt(np.clip(16.0 * omega * (omega - 1.0) + 3.0, 0.0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(u < 1e-8, 1.0, np.arctanh(np.minimum(u, 1.0)) / np.where(u > 0, u, 1.0))
    slope = 8.0 * (2.0 * omega - 1.0) / math.log(2.0) * ratio
    return slope if slope.ndim else float(slope)


def _p1_of(p, tested=None):
    if isinstance(p, OutcomeFrequency):
        return p.p1
    return float(p)


def g_single(p, gamma: float) -> float:
    """Single-round base function ``g(p)`` in bits per round.

    ``p`` is an :class:`OutcomeFrequency` with ``p0 + p1 = gamma`` or a bare ``p(1)``.
    """
    _check_gamma(gamma)
    if isinstance(p, OutcomeFrequency):
        p.check_single(gamma)
    return float(entropy_bound(_p1_of(p) / gamma))


def tangent_coeffs(p_t1: float, gamma: float):
    """Slope ``a`` and intercept ``b`` of the tangent to ``g`` at ``p(1) = p_t1``."""
    _check_gamma(gamma)
    w = p_t1 / gamma
    if not 0.75 < w < QUANTUM_WIN:
        raise ValueError(
            f"tangent point p_t1/gamma={w!r} must lie strictly inside (3/4, (2+sqrt2)/4)"
        )
    a = entropy_bound_slope(w) / gamma
    b = float(entropy_bound(w)) - a * p_t1
    return a, b


def f_min(p, p_t1: float, gamma: float) -> float:
    """``g`` up to ``p_t1``, its tangent line above."""
    a, b = tangent_coeffs(p_t1, gamma)
    p1 = _p1_of(p)
    if p1 <= p_t1:
        return g_single(p, gamma)
    if isinstance(p, OutcomeFrequency):
        p.check_single(gamma)
    return a * p1 + b


def second_order_factor(n: float, eps_s: float, eps_e: float) -> float:
    """``2 sqrt(1 - 2 log2(eps_s eps_e)) / sqrt(n)``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    _check_eps("eps_s", eps_s)
    _check_eps("eps_e", eps_e)
    return 2.0 * math.sqrt(1.0 - 2.0 * math.log2(eps_s * eps_e)) / math.sqrt(n)


def eta(p, p_t1, gamma, n, eps_s, eps_e, ctx: TradeoffContext | None = None, ceil_gradient=False):
    """Finite-size entropy rate for a fixed tangent point.

    The gradient term uses the raw slope ``a(p_t)``; ``ceil_gradient=True``
    rounds it up as in the generic statement of entropy accumulation.
    """
    ctx = ctx or TradeoffContext(gamma)
    a, _ = tangent_coeffs(p_t1, gamma)
    grad = math.ceil(abs(a)) if ceil_gradient else abs(a)
    first = f_min(p, p_t1, gamma)
    second = (ctx.dim_log_term + grad) * second_order_factor(n, eps_s, eps_e)
    return RatePenaltyBreakdown(first, second, p_t1)


# ---------------------------------------------------------------------------
# optimized rates; single round and blocks share one kernel with
# value(p1) = scale * entropy_bound(p1 / tested)


def _optimize(p_eval, scale, tested, dim, factor, ceil_gradient, grid, tol):
    lo = tested * (0.75 + _EDGE)
    hi = tested * (QUANTUM_WIN - _EDGE)

    def objective(pt):
        pt = np.asarray(pt, dtype=float)
        wt = pt / tested
        slope = scale * entropy_bound_slope(wt) / tested
        gt = scale * entropy_bound(wt)
        tangent = gt + slope * (p_eval - pt)
        below = scale * entropy_bound(min(max(p_eval / tested, 0.0), 1.0))
        first = np.where(p_eval <= pt, below, tangent)
        grad = np.ceil(np.abs(slope)) if ceil_gradient else np.abs(slope)
        return first - (dim + grad) * factor

    x, _ = maximize_scalar(objective, lo, hi, tol=tol * tested, grid=grid, vectorized=True)
    wt = x / tested
    slope = scale * float(entropy_bound_slope(wt)) / tested
    gt = scale * float(entropy_bound(wt))
    if p_eval <= x:
        first = scale * float(entropy_bound(min(max(p_eval / tested, 0.0), 1.0)))
    else:
        first = gt + slope * (p_eval - x)
    grad = math.ceil(abs(slope)) if ceil_gradient else abs(slope)
    return RatePenaltyBreakdown(first, (dim + grad) * factor, x)


def eta_opt(
    omega_exp,
    delta_est,
    gamma,
    n,
    eps_s,
    eps_e,
    ctx: TradeoffContext | None = None,
    ceil_gradient=False,
    grid=200,
    tol=1e-12,
):
    """Maximize :func:`eta` over the tangent point, evaluated at ``p(1) = omega_exp*gamma - delta_est``.

    Returns a :class:`RatePenaltyBreakdown`; ``value`` may be negative, which
    means no positive rate.
    """
    _check_gamma(gamma)
    if not 0.75 - 1e-12 <= omega_exp <= QUANTUM_WIN + 1e-12:
        raise ValueError(f"omega_exp must lie in [3/4, (2+sqrt2)/4], got {omega_exp!r}")
    if not 0.0 < delta_est < 1.0:
        raise ValueError("delta_est must lie in (0, 1)")
    ctx = ctx or TradeoffContext(gamma)
    factor = second_order_factor(n, eps_s, eps_e)
    p_eval = omega_exp * gamma - delta_est
    return _optimize(p_eval, 1.0, gamma, ctx.dim_log_term, factor, ceil_gradient, grid, tol)


def tested_fraction(gamma: float, s_max: int) -> float:
    """Probability ``1 - (1 - gamma)**s_max`` that a block contains a test."""
    return -math.expm1(s_max * math.log1p(-gamma)) if gamma < 1.0 else 1.0


def expected_block_length(gamma: float, s_max: int) -> float:
    """Expected number of rounds per block, ``(1 - (1-gamma)**s_max) / gamma``."""
    _check_gamma(gamma)
    if s_max < 1:
        raise ValueError("s_max must be at least 1")
    return tested_fraction(gamma, s_max) / gamma


def block_dim_log_term(s_max: int) -> float:
    """``log2(1 + 2 * 6**s_max)`` without overflow."""
    return s_max * math.log2(6.0) + 1.0 + math.log2(1.0 + 0.5 * 6.0 ** (-s_max))


def g_block(p, gamma: float, s_max: int) -> float:
    """Block base function: expected block length times the single-round bound."""
    _check_gamma(gamma)
    tested = tested_fraction(gamma, s_max)
    if isinstance(p, OutcomeFrequency):
        p.check_block(gamma, s_max)
    sbar = tested / gamma
    return sbar * float(entropy_bound(_p1_of(p) / tested))


def eta_opt_block(
    omega_exp,
    delta_est,
    gamma,
    s_max,
    m,
    eps_s,
    eps_e,
    dim_log_term=None,
    ceil_gradient=False,
    grid=200,
    tol=1e-12,
):
    """Entropy per block for the block protocol, optimized over the tangent point.

    The evaluation point is ``p(1) = omega_exp * (1 - (1-gamma)**s_max) - delta_est``,
    the block protocol's abort threshold. With ``gamma == 1`` every block has
    exactly one round and ``s_max`` is treated as 1.
    """
    _check_gamma(gamma)
    if s_max < 1 or int(s_max) != s_max:
        raise ValueError("s_max must be a positive integer")
    if not 0.0 < delta_est < 1.0:
        raise ValueError("delta_est must lie in (0, 1)")
    if gamma == 1.0:
        s_max = 1
    tested = gamma if s_max == 1 else tested_fraction(gamma, s_max)
    scale = tested / gamma
    dim = block_dim_log_term(s_max) if dim_log_term is None else dim_log_term
    factor = second_order_factor(m, eps_s, eps_e)
    p_eval = omega_exp * tested - delta_est
    return _optimize(p_eval, scale, tested, dim, factor, ceil_gradient, grid, tol)
