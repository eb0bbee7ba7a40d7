"""Command-line front end.

Every command reads parameters from built-in defaults, then an optional
``--config`` file of ``key=value`` lines, then command-line flags (highest
precedence). Tables are written as CSV with ``#`` comment lines recording the
version and the full configuration. Exit status: 0 success, 2 configuration
error, 3 verification failure.
"""
from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from . import __version__
from .chsh import QUANTUM_WIN, omega_from_qber
from .entropy_core import hoeffding_completeness
from .keyrate import (
    PENALTY_TERMS,
    BudgetPolicy,
    EpsilonBudget,
    expansion_lengths,
    noise_tolerance,
    optimize_key_rate,
)
from .tradeoff import LOG2_9, LOG2_13, TradeoffContext, entropy_bound, eta_opt

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY = 0, 2, 3


class ConfigError(ValueError):
    pass


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return "" if v is None else str(v)


def _bool(s) -> bool:
    if isinstance(s, bool):
        return s
    t = str(s).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _int(s) -> int:
    v = float(s)
    if v != int(v):
        raise ValueError(f"not an integer: {s!r}")
    return int(v)


def _opt_int(s):
    return None if s in (None, "", "none", "auto") else _int(s)


def _str(s) -> str:
    return str(s).strip()


@dataclass(frozen=True)
class Key:
    name: str
    kind: Callable[[Any], Any]
    default: Any
    help: str
    check: Callable[[Any], bool] | None = None
    rule: str = ""


def _unit(v):
    return 0.0 < v < 1.0


def _pos(v):
    return v > 0


EPS_KEYS = [
    Key("eps_EC", float, 1e-10, "error-correction failure probability", _unit, "in (0, 1)"),
    Key("soundness", float, 1e-5, "target total soundness error", _unit, "in (0, 1)"),
    Key("completeness", float, 1e-2, "target total completeness error", _unit, "in (0, 1)"),
    Key("variant", _str, "block", "block (variable-length blocks) or single (fixed rounds)",
        lambda v: v in ("block", "single"), "block or single"),
]

COMMANDS: dict[str, list[Key]] = {
    "entropy-rate": [
        Key("gamma", float, 1.0, "test probability", lambda v: 0 < v <= 1, "in (0, 1]"),
        Key("delta_est", float, 1e-3, "estimation tolerance", _unit, "in (0, 1)"),
        Key("n", float, 1e8, "number of rounds", lambda v: v >= 1, ">= 1"),
        Key("eps_s", float, 1e-6, "smoothing parameter", _unit, "in (0, 1)"),
        Key("eps_e", float, 1e-6, "accumulation error", _unit, "in (0, 1)"),
        Key("omega_min", float, 0.75, "first winning probability of the grid",
            lambda v: 0.75 <= v <= QUANTUM_WIN, "in [3/4, (2+sqrt2)/4]"),
        Key("omega_max", float, QUANTUM_WIN, "last winning probability of the grid",
            lambda v: 0.75 <= v <= QUANTUM_WIN, "in [3/4, (2+sqrt2)/4]"),
        Key("points", _int, 50, "grid points", lambda v: v >= 1, ">= 1"),
        Key("dim", _str, "13", "dimension constant: 13 (key distribution) or 9 (expansion)",
            lambda v: v in ("13", "9"), "13 or 9"),
        Key("ceil_gradient", _bool, False, "round the gradient term up to an integer"),
    ],
    "keyrate-curve": [
        Key("sweep", _str, "Q", "sweep variable: Q or nbar", lambda v: v in ("Q", "nbar"), "Q or nbar"),
        Key("nbar", float, 1e15, "expected rounds (Q sweep)", lambda v: v >= 1, ">= 1"),
        Key("Q", float, 0.01, "bit error rate (nbar sweep)", lambda v: 0 <= v < 0.5, "in [0, 1/2)"),
        Key("q_min", float, 0.0, "first Q of the sweep", lambda v: 0 <= v < 0.5, "in [0, 1/2)"),
        Key("q_max", float, 0.08, "last Q of the sweep", lambda v: 0 <= v < 0.5, "in [0, 1/2)"),
        Key("nbar_min", float, 1e6, "first nbar of the sweep (log spaced)", lambda v: v >= 1, ">= 1"),
        Key("nbar_max", float, 1e15, "last nbar of the sweep (log spaced)", lambda v: v >= 1, ">= 1"),
        Key("points", _int, 9, "sweep points", lambda v: v >= 1, ">= 1"),
        *EPS_KEYS,
    ],
    "noise-tolerance": [
        Key("nbar", float, 1e15, "expected number of rounds", lambda v: v >= 1, ">= 1"),
        Key("tol", float, 1e-4, "bisection tolerance on Q", lambda v: 0 < v < 0.1, "in (0, 0.1)"),
        *EPS_KEYS,
    ],
    "expansion": [
        Key("n", float, 1e10, "number of rounds", lambda v: v >= 2, ">= 2"),
        Key("gamma", float, 1e-2, "test probability", _unit, "in (0, 1)"),
        Key("delta", float, 1e-2, "extractor seed fraction", lambda v: v >= 0, ">= 0"),
        Key("eps_s", float, 1e-6, "smoothing parameter", _unit, "in (0, 1)"),
        Key("eps_EA", float, 1e-6, "accumulation error", _unit, "in (0, 1)"),
        Key("omega_exp", float, QUANTUM_WIN, "expected winning probability",
            lambda v: 0.75 <= v <= QUANTUM_WIN, "in [3/4, (2+sqrt2)/4]"),
        Key("delta_est", float, 1e-4, "estimation tolerance", _unit, "in (0, 1)"),
        Key("c_extractor", float, 1.0, "extractor error constant c", _pos, "> 0"),
    ],
    "simulate": [
        Key("device", _str, "werner:0.0", "werner:NU, classical:ID (0-15) or memory:NU:ID[:FRACTION]"),
        Key("protocol", _str, "ea", "ea, diqkd, expansion or block",
            lambda v: v in ("ea", "diqkd", "expansion", "block"), "ea, diqkd, expansion or block"),
        Key("n", _int, 10_000, "rounds (blocks for the block protocol)", lambda v: v >= 1, ">= 1"),
        Key("gamma", float, 0.5, "test probability", lambda v: 0 < v <= 1, "in (0, 1]"),
        Key("omega_exp", float, 0.85, "expected winning probability", lambda v: 0 <= v <= 1, "in [0, 1]"),
        Key("delta_est", float, 0.02, "estimation tolerance", lambda v: 0 < v < 1, "in (0, 1)"),
        Key("s_max", _int, 1, "maximal block length", lambda v: v >= 1, ">= 1"),
        Key("Q", float, 0.0, "bit error rate used for the leakage estimate", lambda v: 0 <= v < 0.5,
            "in [0, 1/2)"),
        Key("trials", _int, 100, "Monte Carlo trials", lambda v: v >= 1, ">= 1"),
        Key("seed", _int, 0, "master seed", lambda v: 0 <= v < 2**64, "in [0, 2^64)"),
        Key("threads", _opt_int, None, "worker threads (default: EATQKD_THREADS or up to 4)",
            lambda v: v is None or v >= 1, ">= 1"),
        Key("key_length", _opt_int, None, "override the hashed key length (diqkd)",
            lambda v: v is None or v >= 0, ">= 0"),
        Key("output_length", _opt_int, None, "override the output length (expansion)",
            lambda v: v is None or v >= 0, ">= 0"),
        Key("symmetrize", _bool, False, "flip both outputs on a shared random bit"),
        Key("transcript", _str, "", "write the first trial's per-round transcript CSV here"),
    ],
    "verify": [
        Key("only", _str, "", "comma-separated subset of suites (default: all)"),
        Key("perturb_log13", float, 0.0, "test hook: offset added to the single-round log2(13)"),
    ],
}

# keys excluded from the echoed configuration because they cannot change results
_NOT_ECHOED = {"threads"}


def _flag(name):
    return "--" + name.replace("_", "-")


def _epilog(keys):
    lines = ["configuration keys (config file key=value, or the matching --flag):"]
    for k in keys:
        d = "" if k.default is None else f" [default {fmt(k.default)}]"
        lines.append(f"  {k.name}: {k.help}{d}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eatqkd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"eatqkd {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd, keys in COMMANDS.items():
        p = sub.add_parser(cmd, epilog=_epilog(keys),
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", help="key=value file; flags override its values")
        p.add_argument("--output", help="write the result here instead of stdout")
        for k in keys:
            p.add_argument(_flag(k.name), dest=k.name, default=None, help=k.help)
    return parser


def read_config_file(path) -> dict[str, str]:
    out = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    with fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def resolve(cmd: str, file_values: dict, flag_values: dict) -> dict:
    keys = {k.name: k for k in COMMANDS[cmd]}
    unknown = sorted(set(file_values) - set(keys))
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r} for {cmd}")
    cfg = {}
    for name, k in keys.items():
        raw = flag_values.get(name)
        if raw is None:
            raw = file_values.get(name, k.default)
        try:
            val = raw if raw is None else k.kind(raw)
        except (TypeError, ValueError):
            raise ConfigError(f"field {name!r}: cannot parse {raw!r}") from None
        if isinstance(val, float) and not math.isfinite(val):
            raise ConfigError(f"field {name!r}: must be finite")
        if k.check is not None and not k.check(val):
            raise ConfigError(f"field {name!r}: must be {k.rule}, got {fmt(val)}")
        cfg[name] = val
    return cfg


def header(cmd: str, cfg: dict) -> list[str]:
    lines = [f"# eatqkd {__version__} {cmd}"]
    lines += [f"# {k}={fmt(v)}" for k, v in cfg.items() if k not in _NOT_ECHOED]
    return lines


def csv_table(cmd, cfg, columns, rows) -> str:
    lines = header(cmd, cfg) + [",".join(columns)]
    lines += [",".join(fmt(r[c]) for c in columns) for r in rows]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------


def cmd_entropy_rate(cfg) -> str:
    if cfg["omega_max"] < cfg["omega_min"]:
        raise ConfigError("field 'omega_max': must be >= omega_min")
    dim = LOG2_13 if cfg["dim"] == "13" else LOG2_9
    ctx = TradeoffContext(cfg["gamma"], 1, dim)
    rows = []
    for w in np.linspace(cfg["omega_min"], cfg["omega_max"], cfg["points"]):
        r = eta_opt(float(w), cfg["delta_est"], cfg["gamma"], cfg["n"], cfg["eps_s"], cfg["eps_e"],
                    ctx, ceil_gradient=cfg["ceil_gradient"])
        rows.append(dict(omega_exp=float(w), eta_opt=r.value, argmax_pt=r.argmax_pt,
                         first_order=r.first_order, second_order=r.second_order,
                         g_single=float(entropy_bound(float(w)))))
    cols = ["omega_exp", "eta_opt", "argmax_pt", "first_order", "second_order", "g_single"]
    return csv_table("entropy-rate", cfg, cols, rows)


KEYRATE_COLUMNS = ["rate", "rate_raw", "ell", "entropy", *PENALTY_TERMS, "gamma", "s_max",
                   "delta_est", "eps_s", "eps_EA", "eps_PA", "eps_EC", "eps_EC_prime", "eps_t",
                   "soundness_total", "completeness_total"]


def _policy(cfg):
    try:
        return BudgetPolicy(cfg["eps_EC"], cfg["soundness"], cfg["completeness"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _keyrate_row(Q, nbar, policy, variant, warm):
    if omega_from_qber(Q) < 0.75:
        row = {c: math.nan for c in KEYRATE_COLUMNS}
        row.update(rate=0.0, rate_raw=0.0, ell=0.0)
        return row, warm
    r = optimize_key_rate(Q, nbar, policy, variant, x0=warm)
    p = r.params
    row = dict(rate=r.rate, rate_raw=r.rate_raw, ell=r.ell, **r.terms,
               gamma=p["gamma"], s_max=p["s_max"], delta_est=p["delta_est"],
               eps_s=p["eps_s"], eps_EA=p["eps_EA"], eps_PA=p["eps_PA"], eps_EC=p["eps_EC"],
               eps_EC_prime=p["eps_EC_prime"], eps_t=p.get("eps_t"),
               soundness_total=r.soundness, completeness_total=r.completeness)
    return row, p["theta"]


def cmd_keyrate_curve(cfg) -> str:
    policy = _policy(cfg)
    rows, warm = [], None
    if cfg["sweep"] == "Q":
        if cfg["q_max"] < cfg["q_min"]:
            raise ConfigError("field 'q_max': must be >= q_min")
        for q in np.linspace(cfg["q_min"], cfg["q_max"], cfg["points"]):
            row, warm = _keyrate_row(float(q), cfg["nbar"], policy, cfg["variant"], warm)
            rows.append({"Q": float(q), **row})
        cols = ["Q"] + KEYRATE_COLUMNS
    else:
        if cfg["nbar_max"] < cfg["nbar_min"]:
            raise ConfigError("field 'nbar_max': must be >= nbar_min")
        grid = np.logspace(math.log10(cfg["nbar_min"]), math.log10(cfg["nbar_max"]), cfg["points"])
        for nb in grid:
            row, warm = _keyrate_row(cfg["Q"], float(nb), policy, cfg["variant"], warm)
            rows.append({"nbar": float(nb), **row})
        cols = ["nbar"] + KEYRATE_COLUMNS
    return csv_table("keyrate-curve", cfg, cols, rows)


def cmd_noise_tolerance(cfg) -> str:
    q = noise_tolerance(cfg["nbar"], _policy(cfg), cfg["variant"], tol=cfg["tol"])
    return csv_table("noise-tolerance", cfg, ["nbar", "noise_tolerance"],
                     [dict(nbar=cfg["nbar"], noise_tolerance=q)])


def cmd_expansion(cfg) -> str:
    rep = expansion_lengths(cfg["n"], cfg["gamma"], cfg["delta"], cfg["eps_s"], cfg["eps_EA"],
                            cfg["omega_exp"], cfg["delta_est"], cfg["c_extractor"])
    ext = rep.extractor
    rows = [
        ("input_expected", rep.input_expected),
        ("input_whp", rep.input_whp),
        ("output", rep.output),
        ("eta_opt", rep.eta_opt),
        ("expansion_ratio", rep.expansion_ratio),
        ("extractor_seed_d", ext.seed_length if ext else None),
        ("extractor_output_m", ext.output_length if ext else None),
        ("extractor_error", ext.eps_ex if ext else None),
    ]
    return csv_table("expansion", cfg, ["quantity", "value"],
                     [dict(quantity=k, value=v) for k, v in rows])


def cmd_simulate(cfg) -> str:
    from .sim import ProtocolParams, estimate_abort_probability, parse_device, trial_generators
    from .sim.protocols import run_block_protocol, run_diqkd, run_entropy_accumulation, run_expansion

    try:
        device = parse_device(cfg["device"])
    except ValueError as exc:
        raise ConfigError(f"field 'device': {exc}") from None
    proto = cfg["protocol"]
    budget = None
    if proto == "diqkd":
        budget = EpsilonBudget(1e-5, 1e-6, 1e-10, 1e-3, 1e-6)
    gamma = cfg["gamma"]
    if proto == "expansion" and gamma >= 1.0:
        raise ConfigError("field 'gamma': expansion needs gamma < 1")
    if proto == "diqkd" and not 0.75 <= cfg["omega_exp"] <= QUANTUM_WIN and cfg["key_length"] is None:
        raise ConfigError("field 'omega_exp': diqkd key length needs omega_exp in [3/4, (2+sqrt2)/4]")
    try:
        params = ProtocolParams(cfg["n"], gamma, cfg["omega_exp"], cfg["delta_est"],
                                s_max=cfg["s_max"], symmetrize=cfg["symmetrize"], Q=cfg["Q"],
                                budget=budget, key_length=cfg["key_length"],
                                output_length=cfg["output_length"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    est = estimate_abort_probability(device, proto, params, cfg["trials"], cfg["seed"],
                                     cfg["threads"])
    if cfg["transcript"]:
        rng = trial_generators(cfg["seed"], 1)[0]
        dev = device.fresh()
        runner = {"ea": run_entropy_accumulation, "block": run_block_protocol,
                  "diqkd": lambda d, p, g: run_diqkd(d, p, g).transcript,
                  "expansion": lambda d, p, g: run_expansion(d, p, g).transcript}[proto]
        with open(cfg["transcript"], "w", encoding="utf-8", newline="\n") as fh:
            fh.write(runner(dev, params, rng).to_csv())
    if proto == "block":
        bound = math.exp(-2.0 * params.n * params.delta_est**2)
        denom = est.mean_rounds
    else:
        bound = hoeffding_completeness(params.n, params.delta_est)
        denom = params.n
    rows = [
        ("abort_frequency", est.estimate),
        ("abort_stderr", est.stderr),
        ("aborts", est.aborts),
        ("trials", est.trials),
        ("hoeffding_abort_bound", bound),
        ("mean_test_statistic", est.mean_score / denom),
        ("mean_rounds", est.mean_rounds),
        ("mean_bits_consumed", est.mean_bits_consumed),
    ]
    return csv_table("simulate", cfg, ["quantity", "value"],
                     [dict(quantity=k, value=v) for k, v in rows])


def cmd_verify(cfg):
    from .verify import SUITES, run_all

    only = [s.strip() for s in cfg["only"].split(",") if s.strip()]
    bad = [s for s in only if s not in SUITES]
    if bad:
        raise ConfigError(f"field 'only': unknown suite {bad[0]!r}; choose from {', '.join(SUITES)}")
    results = run_all(cfg["perturb_log13"], only or None)
    lines = [f"{'PASS' if r.passed else 'FAIL'} {r.name:<10} {r.seconds:8.3f}s  {r.detail}"
             for r in results]
    total = sum(r.seconds for r in results)
    ok = all(r.passed for r in results)
    lines.append(f"{'all suites passed' if ok else 'verification FAILED'} in {total:.3f}s")
    return "\n".join(lines) + "\n", ok


HANDLERS = {
    "entropy-rate": cmd_entropy_rate,
    "keyrate-curve": cmd_keyrate_curve,
    "noise-tolerance": cmd_noise_tolerance,
    "expansion": cmd_expansion,
    "simulate": cmd_simulate,
}


def _emit(text, path):
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cmd = args.command
    flags = {k.name: getattr(args, k.name) for k in COMMANDS[cmd]}
    try:
        file_values = read_config_file(args.config) if args.config else {}
        cfg = resolve(cmd, file_values, flags)
        if cmd == "verify":
            text, ok = cmd_verify(cfg)
            _emit(text, args.output)
            return EXIT_OK if ok else EXIT_VERIFY
        _emit(HANDLERS[cmd](cfg), args.output)
    except ConfigError as exc:
        print(f"eatqkd {cmd}: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"eatqkd {cmd}: {exc}", file=sys.stderr)
        return 1
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
