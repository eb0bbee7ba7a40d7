from __future__ import annotations

import math

import pytest

from eatqkd import __version__
from eatqkd.cli import COMMANDS, build_parser, main
from eatqkd.chsh import werner_omega
from eatqkd.entropy_core import binary_entropy


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def table(text):
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    cols = lines[0].split(",")
    return [dict(zip(cols, l.split(","))) for l in lines[1:]]


def test_entropy_rate_csv_layout(capsys):
    code, out, _ = run(capsys, "entropy-rate", "--points", "3")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == f"# eatqkd {__version__} entropy-rate"
    assert any(l == "# n=100000000" for l in lines)
    rows = table(out)
    assert list(rows[0]) == ["omega_exp", "eta_opt", "argmax_pt", "first_order", "second_order", "g_single"]
    assert float(rows[0]["omega_exp"]) == 0.75 and float(rows[0]["g_single"]) == 0.0
    # 17 significant digits round-trip exactly
    assert repr(float(rows[1]["eta_opt"])) in out or len(rows[1]["eta_opt"].replace(".", "").lstrip("-0")) <= 17


def test_entropy_rate_is_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["entropy-rate", "--points", "5", "--output", str(a)]) == 0
    assert main(["entropy-rate", "--points", "5", "--output", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_config_file_and_flag_precedence(capsys, tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("# comment\npoints = 2\nn=1e6\n")
    code, out, _ = run(capsys, "entropy-rate", "--config", str(cfg), "--n", "1e7")
    assert code == 0
    assert "# n=10000000" in out and "# points=2" in out
    assert len(table(out)) == 2


@pytest.mark.parametrize("argv,field", [
    (["entropy-rate", "--gamma", "2"], "gamma"),
    (["entropy-rate", "--points", "x"], "points"),
    (["entropy-rate", "--omega-min", "0.8", "--omega-max", "0.77"], "omega_max"),
    (["simulate", "--device", "qubit:3"], "device"),
    (["keyrate-curve", "--variant", "other"], "variant"),
    (["verify", "--only", "nosuch"], "only"),
])
def test_config_errors_exit_2(capsys, argv, field):
    code, _, err = run(capsys, *argv)
    assert code == 2 and field in err


def test_unknown_config_key_exit_2(capsys, tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("bogus=1\n")
    code, _, err = run(capsys, "entropy-rate", "--config", str(cfg))
    assert code == 2 and "bogus" in err
    code, _, err = run(capsys, "entropy-rate", "--config", str(tmp_path / "missing.txt"))
    assert code == 2


def test_help_documents_every_key(capsys):
    parser = build_parser()
    sub = next(a for a in parser._actions if a.dest == "command")
    for cmd, keys in COMMANDS.items():
        text = sub.choices[cmd].format_help()
        for k in keys:
            assert f"  {k.name}:" in text


def test_expansion_report(capsys):
    code, out, _ = run(capsys, "expansion", "--gamma", "0.5", "--delta", "0", "--n", "1000")
    rows = {r["quantity"]: r["value"] for r in table(out)}
    assert code == 0 and float(rows["input_expected"]) == 1502.0
    code, out, _ = run(capsys, "expansion", "--gamma", "0.01", "--delta", "0.01")
    rows = {r["quantity"]: r["value"] for r in table(out)}
    n = 1e10
    assert float(rows["input_expected"]) == pytest.approx((binary_entropy(0.01) + 0.02) * n + 2)
    assert float(rows["output"]) == pytest.approx(n * float(rows["eta_opt"]) - 9 * math.log2(n))
    assert float(rows["expansion_ratio"]) > 1


def test_keyrate_curve_clamps_beyond_tolerance(capsys):
    code, out, _ = run(capsys, "keyrate-curve", "--q-min", "0.2", "--q-max", "0.2", "--points", "1")
    assert code == 0
    row = table(out)[0]
    assert float(row["rate"]) == 0.0 and row["gamma"] == "nan"


def test_simulate_report_and_thread_independence(capsys, monkeypatch, tmp_path):
    omega = repr(werner_omega(0.02))
    argv = ["simulate", "--device", "werner:0.02", "--omega-exp", omega, "--trials", "40",
            "--n", "10000", "--seed", "7"]
    monkeypatch.setenv("EATQKD_THREADS", "1")
    _, one, _ = run(capsys, *argv)
    monkeypatch.setenv("EATQKD_THREADS", "4")
    _, four, _ = run(capsys, *argv)
    assert one == four
    rows = {r["quantity"]: r["value"] for r in table(one)}
    assert float(rows["abort_frequency"]) == 0.0
    assert float(rows["hoeffding_abort_bound"]) == pytest.approx(math.exp(-8.0))
    tpath = tmp_path / "t.csv"
    code, out, _ = run(capsys, "simulate", "--device", "classical:0", "--trials", "20",
                       "--transcript", str(tpath))
    assert code == 0 and float({r["quantity"]: r["value"] for r in table(out)}["abort_frequency"]) == 1.0
    assert tpath.read_text().startswith("index,T,X,Y,A,B,C\n")


@pytest.mark.parametrize("proto", ["diqkd", "expansion", "block"])
def test_simulate_other_protocols(capsys, proto):
    code, out, _ = run(capsys, "simulate", "--protocol", proto, "--trials", "5", "--n", "2000",
                       "--gamma", "0.25", "--s-max", "4", "--key-length", "16", "--output-length", "16")
    assert code == 0
    rows = {r["quantity"]: r["value"] for r in table(out)}
    if proto == "expansion":
        assert float(rows["mean_bits_consumed"]) > 0


def test_verify_passes_and_hook_fails(capsys):
    code, out, _ = run(capsys, "verify", "--only", "werner,reduction,interval")
    assert code == 0 and out.count("PASS") == 3
    code, out, _ = run(capsys, "verify", "--only", "reduction", "--perturb-log13", "0.01")
    assert code == 3 and "FAIL reduction" in out
