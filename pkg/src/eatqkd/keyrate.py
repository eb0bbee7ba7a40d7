"""DIQKD key length accounting, the block-protocol key rate and randomness
expansion bookkeeping.

All lengths are in bits and all logs are base 2, except the Hoeffding tail for
the realized number of rounds which inverts a natural exponential.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .chsh import QUANTUM_WIN, omega_from_qber
from .entropy_core import binary_entropy, hoeffding_completeness, maximize_scalar
from .tradeoff import (
    LOG2_9,
    LOG2_13,
    TradeoffContext,
    eta_opt,
    eta_opt_block,
    expected_block_length,
)

TAU_LOG = math.log2(2.0 * math.sqrt(2.0) + 1.0)
LOG2_7 = math.log2(7.0)

PENALTY_TERMS = ("leak_ec", "smoothing", "gamma_term", "max_entropy", "privacy_amplification")


def _open_unit(name, v):
    if not 0.0 < v < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {v!r}")


@dataclass(frozen=True)
class EpsilonBudget:
    """Error parameters of the DIQKD protocol.

    ``eps_t`` is only used by the block variant; it bounds the probability that
    the realized number of rounds exceeds its expectation by more than ``t``.
    """

    eps_s: float
    eps_EA: float
    eps_EC: float
    eps_EC_prime: float
    eps_PA: float
    eps_t: float | None = None

    def __post_init__(self):
        for name in ("eps_s", "eps_EA", "eps_EC", "eps_EC_prime", "eps_PA"):
            _open_unit(name, getattr(self, name))
        if self.eps_t is not None:
            _open_unit("eps_t", self.eps_t)
            r = math.sqrt(self.eps_t)
            if not self.eps_s / 4.0 - r > 0.0:
                raise ValueError("block variant needs eps_s/4 > sqrt(eps_t)")
            if not self.eps_EC_prime - 2.0 * r > 0.0:
                raise ValueError("block variant needs eps_EC_prime > 2 sqrt(eps_t)")

    @property
    def soundness(self) -> float:
        return self.eps_EC + self.eps_PA + self.eps_s + self.eps_EA

    def completeness(self, eps_EA_c: float) -> float:
        """``eps_EC^c + eps_EA^c + eps_EC`` with ``eps_EC^c = eps_EC' + eps_EC``."""
        return (self.eps_EC_prime + self.eps_EC) + eps_EA_c + self.eps_EC


@dataclass
class KeyRateReport:
    """Key length with every term of the bound.

    ``terms['entropy']`` is the accumulated entropy; the entries named in
    :data:`PENALTY_TERMS` are subtracted from it.
    """

    ell: float
    ell_raw: float
    rate: float
    rate_raw: float
    rounds: float
    soundness: float
    completeness: float
    terms: dict
    params: dict = field(default_factory=dict)

    def recompute_ell(self) -> float:
        raw = self.terms["entropy"] - sum(self.terms[k] for k in PENALTY_TERMS)
        return max(0.0, raw)


def honest_cond_entropy(gamma: float, Q: float, omega_exp: float) -> float:
    """``(1 - gamma) h(Q) + gamma h(omega_exp)``: Alice's per-round uncertainty given Bob's data."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    return (1.0 - gamma) * binary_entropy(Q) + gamma * binary_entropy(omega_exp)


def ec_leakage(n, gamma, Q, omega_exp, eps_EC_prime, eps_EC, eps_t: float = 0.0) -> float:
    """Upper bound on the error-correction leakage for ``n`` rounds of the honest device.

    With ``eps_t > 0`` the square-root term uses the shifted ``eps_EC' - 2 sqrt(eps_t)``,
    as needed when ``n`` is the high-probability bound on a random round count.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    _open_unit("eps_EC_prime", eps_EC_prime)
    _open_unit("eps_EC", eps_EC)
    shifted = eps_EC_prime - 2.0 * math.sqrt(eps_t)
    if not shifted > 0.0:
        raise ValueError("eps_EC_prime must exceed 2 sqrt(eps_t)")
    first = n * honest_cond_entropy(gamma, Q, omega_exp)
    second = math.sqrt(n) * 4.0 * TAU_LOG * math.sqrt(2.0 * math.log2(8.0 / shifted**2))
    third = math.log2(8.0 / eps_EC_prime**2 + 2.0 / (2.0 - eps_EC_prime))
    return first + second + third + math.log2(1.0 / eps_EC)


def smoothing_penalty(eps_s: float) -> float:
    """``-3 log2(1 - sqrt(1 - (eps_s/4)^2))``, evaluated without cancellation."""
    _open_unit("eps_s", eps_s)
    x2 = (eps_s / 4.0) ** 2
    return -3.0 * math.log2(x2 / (1.0 + math.sqrt(1.0 - x2)))


def max_entropy_penalty(n, eps_smooth, eps_e) -> float:
    """``sqrt(n) 2 log2(7) sqrt(1 - 2 log2(eps_smooth * eps_e))``."""
    return math.sqrt(n) * 2.0 * LOG2_7 * math.sqrt(1.0 - 2.0 * math.log2(eps_smooth * eps_e))


def _check_omega(omega_exp):
    if not 0.75 <= omega_exp <= QUANTUM_WIN + 1e-12:
        raise ValueError(f"omega_exp must lie in [3/4, (2+sqrt2)/4], got {omega_exp!r}")


def _assemble(entropy, penalties, rounds, soundness, completeness, params):
    terms = {"entropy": entropy, **penalties}
    raw = entropy - sum(penalties[k] for k in PENALTY_TERMS)
    return KeyRateReport(
        ell=max(0.0, raw),
        ell_raw=raw,
        rate=max(0.0, raw) / rounds,
        rate_raw=raw / rounds,
        rounds=rounds,
        soundness=soundness,
        completeness=completeness,
        terms=terms,
        params=params,
    )


def key_length(n, gamma, omega_exp, delta_est, Q, budget: EpsilonBudget, ceil_gradient=False,
               leak_ec: float | None = None) -> KeyRateReport:
    """Key length of the fixed-length DIQKD protocol.

    ``leak_ec`` overrides the analytic leakage bound (useful for what-if checks).
    """
    _check_omega(omega_exp)
    eps_e = budget.eps_EA + budget.eps_EC
    rate = eta_opt(omega_exp, delta_est, gamma, n, budget.eps_s / 4.0, eps_e,
                   TradeoffContext(gamma, 1, LOG2_13), ceil_gradient=ceil_gradient)
    if leak_ec is None:
        leak_ec = ec_leakage(n, gamma, Q, omega_exp, budget.eps_EC_prime, budget.eps_EC)
    penalties = {
        "leak_ec": leak_ec,
        "smoothing": smoothing_penalty(budget.eps_s),
        "gamma_term": gamma * n,
        "max_entropy": max_entropy_penalty(n, budget.eps_s / 4.0, eps_e),
        "privacy_amplification": 2.0 * math.log2(1.0 / budget.eps_PA),
    }
    eps_c_ea = hoeffding_completeness(int(math.ceil(n)), delta_est)
    params = dict(n=n, gamma=gamma, s_max=1, delta_est=delta_est, Q=Q, omega_exp=omega_exp,
                  eta_opt=rate.value, argmax_pt=rate.argmax_pt, eps_s=budget.eps_s,
                  eps_EA=budget.eps_EA, eps_EC=budget.eps_EC, eps_EC_prime=budget.eps_EC_prime,
                  eps_PA=budget.eps_PA, eps_EA_c=eps_c_ea)
    return _assemble(n * rate.value, penalties, n, budget.soundness,
                     budget.completeness(eps_c_ea), params)


def tail_bound_t(m, gamma, eps_t) -> float:
    """Deviation ``t`` with ``Pr[N >= nbar + t] <= eps_t`` for ``m`` blocks.

    Inverts ``exp(-2 t^2 gamma^2 / (m (1-gamma)^2)) = eps_t`` with the natural log.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must lie in (0, 1]")
    _open_unit("eps_t", eps_t)
    return math.sqrt(-m * (1.0 - gamma) ** 2 * math.log(eps_t) / (2.0 * gamma**2))


def _block_report(m, s_max, gamma, omega_exp, delta_est, Q, budget, ceil_gradient):
    sbar = expected_block_length(gamma, s_max)
    nbar = m * sbar
    t = tail_bound_t(m, gamma, budget.eps_t)
    n_hi = nbar + t
    eps_e = budget.eps_EA + budget.eps_EC
    root_t = math.sqrt(budget.eps_t)
    rate = eta_opt_block(omega_exp, delta_est, gamma, s_max, m, budget.eps_s / 4.0, eps_e,
                         ceil_gradient=ceil_gradient)
    penalties = {
        "leak_ec": ec_leakage(n_hi, gamma, Q, omega_exp, budget.eps_EC_prime, budget.eps_EC,
                              eps_t=budget.eps_t),
        "smoothing": smoothing_penalty(budget.eps_s),
        "gamma_term": gamma * n_hi,
        "max_entropy": max_entropy_penalty(n_hi, budget.eps_s / 4.0 - root_t, eps_e),
        "privacy_amplification": 2.0 * math.log2(1.0 / budget.eps_PA),
    }
    eps_c_ea = math.exp(-2.0 * m * delta_est**2)
    params = dict(m=m, nbar=nbar, t=t, gamma=gamma, s_max=s_max, delta_est=delta_est, Q=Q,
                  omega_exp=omega_exp, eta_opt=rate.value, argmax_pt=rate.argmax_pt,
                  eps_s=budget.eps_s, eps_EA=budget.eps_EA, eps_EC=budget.eps_EC,
                  eps_EC_prime=budget.eps_EC_prime, eps_PA=budget.eps_PA, eps_t=budget.eps_t,
                  eps_EA_c=eps_c_ea)
    return _assemble(m * rate.value, penalties, nbar, budget.soundness,
                     budget.completeness(eps_c_ea), params)


def key_length_block(m, s_max, gamma, omega_exp, delta_est, Q, budget: EpsilonBudget,
                     ceil_gradient=False) -> KeyRateReport:
    """Key length of the block protocol with ``m`` blocks of at most ``s_max`` rounds.

    The reported rate is per expected round, ``ell / nbar``. If ``budget.eps_t``
    is None it is chosen by a scalar search maximizing the key length.
    """
    _check_omega(omega_exp)
    if m < 1:
        raise ValueError("m must be at least 1")
    if budget.eps_t is not None:
        return _block_report(m, s_max, gamma, omega_exp, delta_est, Q, budget, ceil_gradient)

    # sqrt(eps_t) ranges over (0, min(eps_s/4, eps_EC'/2)); search its log
    cap = math.log(min(budget.eps_s / 4.0, budget.eps_EC_prime / 2.0))

    def trial(log_root):
        b = replace(budget, eps_t=math.exp(2.0 * log_root))
        return _block_report(m, s_max, gamma, omega_exp, delta_est, Q, b, ceil_gradient)

    x, _ = maximize_scalar(lambda z: trial(z).ell_raw, cap - 60.0, cap - 1e-6, tol=1e-6)
    return trial(x)


# ---------------------------------------------------------------------------
# parameter policy for rate curves


@dataclass(frozen=True)
class BudgetPolicy:
    """Targets the curve generator must meet: total soundness and completeness
    errors and a fixed ``eps_EC``."""

    eps_EC: float = 1e-10
    soundness: float = 1e-5
    completeness: float = 1e-2

    def __post_init__(self):
        _open_unit("eps_EC", self.eps_EC)
        if not self.soundness > self.eps_EC:
            raise ValueError("soundness target must exceed eps_EC")
        if not self.completeness > 2.0 * self.eps_EC:
            raise ValueError("completeness target must exceed 2 eps_EC")


def _sigmoid(z):
    return 1.0 / (1.0 + math.exp(-z)) if z > -700 else 0.0


def _softmax(zs):
    zs = np.asarray(zs, dtype=float)
    w = np.exp(zs - zs.max())
    return w / w.sum()


def _decode(theta, nbar, Q, policy: BudgetPolicy, variant):
    """Map unconstrained search coordinates to a complete parameter set."""
    log_gamma, zs, zea, zpa, zt, zc = theta
    gamma = min(10.0**log_gamma, 1.0)
    s_max = 1 if variant == "single" or gamma >= 1.0 else int(math.ceil(1.0 / gamma))
    eps_s, eps_EA, eps_PA = (float(v) for v in _softmax([zs, zea, zpa]) * (policy.soundness - policy.eps_EC))
    spare = policy.completeness - 2.0 * policy.eps_EC
    frac_c = min(max(_sigmoid(zc), 1e-6), 1.0 - 1e-6)
    eps_ecp = frac_c * spare
    eps_ea_c = spare - eps_ecp
    eps_t = None
    if variant == "block":
        root = _sigmoid(zt) * min(eps_s / 4.0, eps_ecp / 2.0)
        eps_t = max(root * root, 1e-300)
    budget = EpsilonBudget(eps_s, eps_EA, policy.eps_EC, eps_ecp, eps_PA, eps_t)
    if variant == "block":
        m = nbar / expected_block_length(gamma, s_max)
    else:
        m = nbar
    delta_est = math.sqrt(math.log(1.0 / eps_ea_c) / (2.0 * m))
    return gamma, s_max, m, delta_est, budget


def evaluate_policy(theta, nbar, Q, policy: BudgetPolicy | None = None, variant="block"):
    """Key-rate report for the parameter point ``theta`` (see :func:`optimize_key_rate`)."""
    policy = policy or BudgetPolicy()
    omega_exp = omega_from_qber(Q)
    gamma, s_max, m, delta_est, budget = _decode(theta, nbar, Q, policy, variant)
    if m < 1 or not 0.0 < delta_est < 1.0:
        raise ValueError("infeasible parameter point")
    if variant == "block":
        return key_length_block(m, s_max, gamma, omega_exp, delta_est, Q, budget)
    return key_length(nbar, gamma, omega_exp, delta_est, Q, budget)


def optimize_key_rate(Q, nbar, policy: BudgetPolicy | None = None, variant="block",
                      x0=None, starts=2, maxiter=800) -> KeyRateReport:
    """Choose gamma (with ``s_max = ceil(1/gamma)``), the soundness split, ``eps_t``
    and the completeness split to maximize the expected key rate.

    ``delta_est`` is fixed by spending the remaining completeness budget on the
    Hoeffding bound. Search: coarse scan over log10(gamma), then Nelder-Mead on
    all coordinates from the best few scan points.
    """
    if variant not in ("block", "single"):
        raise ValueError(f"unknown variant {variant!r}")
    if not 0.0 <= Q < 0.5:
        raise ValueError("Q must lie in [0, 1/2)")
    if nbar < 1:
        raise ValueError("nbar must be at least 1")
    if omega_from_qber(Q) < 0.75:
        raise ValueError("Q too large: the honest winning probability is below 3/4")
    policy = policy or BudgetPolicy()

    def score(theta):
        try:
            return evaluate_policy(theta, nbar, Q, policy, variant).rate_raw
        except (ValueError, OverflowError, ZeroDivisionError):
            return -1e9

    lo = max(-8.0, -0.5 * math.log10(nbar) - 1.0)
    scan = [np.array([lg, 0.0, 0.0, 0.0, 0.0, 0.0]) for lg in np.linspace(lo, 0.0, 25)]
    if x0 is not None:
        scan.append(np.asarray(x0, dtype=float))
    scored = sorted(((score(th), i) for i, th in enumerate(scan)), reverse=True)
    best_theta, best_val = scan[scored[0][1]], scored[0][0]
    for _, i in scored[:starts]:
        res = minimize(lambda th: -score(th), scan[i], method="Nelder-Mead",
                       options={"xatol": 1e-5, "fatol": 1e-10, "maxiter": maxiter,
                                "initial_simplex": _simplex(scan[i])})
        if -res.fun > best_val:
            best_theta, best_val = res.x, -res.fun
    try:
        report = evaluate_policy(best_theta, nbar, Q, policy, variant)
    except ValueError:
        # nothing feasible; report the scan optimum's raw value
        report = evaluate_policy(scan[scored[0][1]], nbar, Q, policy, variant)
    report.params["theta"] = [float(v) for v in best_theta]
    report.params["variant"] = variant
    return report


def _simplex(x):
    steps = np.array([0.25, 1.0, 1.0, 1.0, 1.5, 1.5])
    pts = [np.asarray(x, dtype=float)]
    for k in range(len(x)):
        p = pts[0].copy()
        p[k] += steps[k]
        pts.append(p)
    return np.array(pts)


def noise_tolerance(nbar, policy: BudgetPolicy | None = None, variant="block", q_hi=0.14,
                    tol=1e-4) -> float:
    """Largest QBER with a positive optimized rate, by bisection to ``tol``.

    Returns 0 when the rate is not positive even at Q = 0.
    """
    policy = policy or BudgetPolicy()
    lo = optimize_key_rate(0.0, nbar, policy, variant)
    if lo.rate_raw <= 0.0:
        return 0.0
    hi = optimize_key_rate(q_hi, nbar, policy, variant)
    if hi.rate_raw > 0.0:
        return q_hi
    a, b = 0.0, q_hi
    warm = lo.params["theta"]
    while b - a > tol:
        mid = 0.5 * (a + b)
        r = optimize_key_rate(mid, nbar, policy, variant, x0=warm, starts=1)
        if r.rate_raw > 0.0:
            a, warm = mid, r.params["theta"]
        else:
            b = mid
    return 0.5 * (a + b)


# ---------------------------------------------------------------------------
# randomness expansion


@dataclass(frozen=True)
class ExtractorParams:
    seed_length: int
    output_length: int
    eps_ex: float


def extractor_params(n: int, delta: float, k: float, c: float = 1.0) -> ExtractorParams:
    """Seed length ``ceil(delta n)``, output ``ceil(k - 9 log2 k)`` and error
    ``exp(-c sqrt(n / log2 n))`` of the seeded extractor."""
    if n < 2:
        raise ValueError("n must be at least 2")
    if not delta > 0:
        raise ValueError("delta must be positive")
    if not c > 0:
        raise ValueError("c must be positive")
    if k < delta * n:
        raise ValueError(f"min-entropy k={k} is below delta*n={delta * n}")
    out = math.ceil(k - 9.0 * math.log2(k))
    if out < 1:
        raise ValueError("n too small: extractor output would be empty")
    return ExtractorParams(math.ceil(delta * n), out, math.exp(-c * math.sqrt(n / math.log2(n))))


@dataclass(frozen=True)
class ExpansionReport:
    input_expected: float
    input_whp: float
    output: float
    eta_opt: float
    extractor: ExtractorParams | None

    @property
    def expansion_ratio(self) -> float:
        return self.output / self.input_expected


def expansion_lengths(n, gamma, delta, eps_s, eps_EA, omega_exp, delta_est, c_extractor=1.0,
                      dim_log_term=LOG2_9) -> ExpansionReport:
    """Input randomness (expected and with high probability) and output length.

    The output is ``n * eta_opt - 9 log2 n`` floored at 0; ``eta_opt`` uses
    ``log2 9`` as the dimension constant because Bob has two inputs here.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if not c_extractor > 0:
        raise ValueError("c_extractor must be positive")
    rate = eta_opt(omega_exp, delta_est, gamma, n, eps_s, eps_EA,
                   TradeoffContext(gamma, 1, dim_log_term)).value
    input_expected = (binary_entropy(gamma) + gamma + delta) * n + 2.0
    input_whp = (10.0 * gamma + delta) * n
    output = max(0.0, n * rate - 9.0 * math.log2(n))
    ext = None
    k = n * rate
    if delta > 0 and k >= delta * n and k > 1:
        try:
            ext = extractor_params(int(n), delta, k, c_extractor)
        except ValueError:
            ext = None
    return ExpansionReport(input_expected, input_whp, output, rate, ext)
