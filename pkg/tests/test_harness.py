import csv
import json

import numpy as np
import pytest

from landaulab import cli
from landaulab.harness import (
    DEFAULT_CONFIG,
    CheckResult,
    ConfigError,
    RunReport,
    export_matrix,
    fit_decay,
    load_config,
    read_matrix,
    upper_envelope,
    validate_config,
    write_csv,
    write_json,
)


# ---------------------------------------------------------------------------
# decay-law fitting

def test_fit_decay_exponential_exact():
    t = np.linspace(0.0, 8.0, 33)
    fit = fit_decay(t, 3.0 * np.exp(-0.8 * t), model="EXP")
    assert fit.model == "EXP"
    assert fit.rate == pytest.approx(0.8, abs=1e-10)
    assert fit.poly_order == 0.0
    assert fit.prefactor == pytest.approx(3.0, rel=1e-10)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.window == (0.0, 8.0)


def test_fit_decay_poly_exp_exact():
    t = np.linspace(0.2, 9.0, 45)
    vals = 2.0 * t**1.5 * np.exp(-0.6 * t)
    fit = fit_decay(t, vals, model="POLY_EXP")
    assert fit.rate == pytest.approx(0.6, abs=1e-8)
    assert fit.poly_order == pytest.approx(1.5, abs=1e-8)
    assert fit.prefactor == pytest.approx(2.0, rel=1e-8)
    # growing-then-decaying algebraic envelopes keep the same algebra with
    # negative orders
    fit_neg = fit_decay(t, 5.0 * t**-2.0 * np.exp(-0.3 * t), model="POLY_EXP")
    assert fit_neg.poly_order == pytest.approx(-2.0, abs=1e-8)


def test_fit_decay_with_noise(rng):
    t = np.linspace(0.1, 12.0, 120)
    clean = 1.7 * np.exp(-1.1 * t)
    noisy = clean * np.exp(rng.normal(0.0, 0.15, t.size))
    fit = fit_decay(t, noisy, model="EXP")
    assert fit.rate == pytest.approx(1.1, rel=0.1)
    assert 0.9 < fit.r_squared <= 1.0


def test_fit_decay_validation():
    t = np.linspace(0.0, 5.0, 20)
    v = np.exp(-t)
    with pytest.raises(ValueError, match="matching shapes"):
        fit_decay(t, v[:-1])
    with pytest.raises(ValueError, match="at least 8"):
        fit_decay(t[:5], v[:5])
    with pytest.raises(ValueError, match="positive"):
        fit_decay(t, v - 0.5)
    with pytest.raises(ValueError, match="strictly positive times"):
        fit_decay(t, v, model="POLY_EXP")
    with pytest.raises(ValueError, match="unknown fit model"):
        fit_decay(t, v, model="POWER")
    with pytest.raises(ValueError, match="degenerate"):
        fit_decay(np.full(10, 2.0), np.full(10, 0.5))


def test_upper_envelope_extracts_peaks():
    t = np.linspace(0.0, 20.0, 400)
    vals = np.exp(-0.2 * t) * (1.1 + np.cos(4.0 * t))
    te, ve = upper_envelope(t, vals)
    assert te.size < t.size
    assert te.size >= 8
    # peaks ride on the true envelope and keep its decay rate
    fit = fit_decay(te, ve, model="EXP")
    assert fit.rate == pytest.approx(0.2, rel=0.1)
    # short series fall back to the identity
    t4, v4 = upper_envelope(t[:4], vals[:4])
    assert t4.size == 4 and v4.size == 4


# ---------------------------------------------------------------------------
# artifact round trips

def test_matrix_round_trip(tmp_path, rng):
    M = rng.standard_normal((7, 5))
    p = tmp_path / "m.bin"
    export_matrix(p, M)
    assert p.stat().st_size == 16 + 7 * 5 * 8
    back = read_matrix(p)
    np.testing.assert_array_equal(back, M)
    # header/payload mismatch is refused
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(ValueError, match="does not match"):
        read_matrix(p)


def test_csv_cells_round_trip_exactly(tmp_path):
    p = tmp_path / "t.csv"
    x = 0.1 + 0.2  # not representable; repr must preserve it bit for bit
    write_csv(p, ["a", "b", "c"], [[x, 3, "tag"], [1e-300, -2, "end"]])
    with p.open() as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["a", "b", "c"]
    assert float(rows[1][0]) == x
    assert float(rows[2][0]) == 1e-300
    assert rows[1][1] == "3"


def test_write_json_deterministic(tmp_path):
    payload = {"b": np.float64(1.5), "a": [np.int64(2), float("inf")],
               "arr": np.arange(3)}
    p1, p2 = tmp_path / "one.json", tmp_path / "two.json"
    write_json(p1, payload)
    write_json(p2, dict(reversed(list(payload.items()))))
    assert p1.read_bytes() == p2.read_bytes()
    assert p1.read_text().endswith("\n")
    out = json.loads(p1.read_text())
    assert out["a"] == [2, "inf"]
    assert out["arr"] == [0, 1, 2]


# ---------------------------------------------------------------------------
# configuration handling

def test_validate_config_defaults_and_merge():
    merged = validate_config({"n": 7})
    assert merged["n"] == 7
    assert merged["radius"] == DEFAULT_CONFIG["radius"]
    assert merged["gammas"] == [0.0, -1.0]
    # numbers are normalized to float
    assert isinstance(validate_config({"radius": 5})["radius"], float)


def test_validate_config_rejects_bad_input():
    with pytest.raises(ConfigError, match="unknown config keys"):
        validate_config({"nn": 9})
    with pytest.raises(ConfigError, match="must be an integer"):
        validate_config({"n": 9.0})
    with pytest.raises(ConfigError, match="must be an integer"):
        validate_config({"seed": True})
    with pytest.raises(ConfigError, match="must be a number"):
        validate_config({"radius": "big"})
    with pytest.raises(ConfigError, match="gammas"):
        validate_config({"gammas": []})
    with pytest.raises(ConfigError, match="odd"):
        validate_config({"n": 8})
    with pytest.raises(ConfigError, match="gamma"):
        validate_config({"gammas": [2.0]})
    with pytest.raises(ConfigError):
        validate_config("just a string")


def test_load_config(tmp_path):
    good = tmp_path / "good.json"
    good.write_text('{"n": 7, "gammas": [0.0]}')
    cfg = load_config(good)
    assert cfg["n"] == 7 and cfg["gammas"] == [0.0]
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="cannot read config"):
        load_config(bad)
    with pytest.raises(ConfigError, match="cannot read config"):
        load_config(tmp_path / "missing.json")


# ---------------------------------------------------------------------------
# check bookkeeping

def test_check_result_lines():
    ok = CheckResult("A1", "structure", True, "all good")
    bad = CheckResult("A5", "decay", False, "rate too low")
    skipped = CheckResult("A4", "dispersion", None, "slow-only")
    assert ok.line() == "A1 PASS (all good)"
    assert bad.line() == "A5 FAIL (rate too low)"
    assert skipped.line() == "A4 SKIP (slow-only)"
    assert skipped.to_dict()["status"] == "SKIP"


def test_report_pass_semantics():
    checks = [
        CheckResult("A1", "x", True, ""),
        CheckResult("A4", "y", None, ""),
    ]
    rep = RunReport(config={}, checks=checks, summaries={}, timing={"assemble": 1.0},
                    stages_done=["assemble"])
    assert rep.passed  # skips do not fail a run
    rep.checks.append(CheckResult("A2", "z", False, ""))
    assert not rep.passed
    d = rep.to_dict()
    assert set(d) == {"config", "checks", "summaries", "stages_done", "passed",
                      "timing"}
    # timing sits in its own key so byte-level comparisons can drop it
    stripped = {k: v for k, v in d.items() if k != "timing"}
    assert "timing" not in stripped


# ---------------------------------------------------------------------------
# command-line driver

def test_cli_rejects_bad_config(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"n": 8}')
    code = cli.main(["verify", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert code == 2
    err = capsys.readouterr().err
    assert "odd" in err
    # nothing half-written on config errors
    assert not (tmp_path / "o").exists()


def test_cli_unknown_stage_requires_command(capsys):
    with pytest.raises(SystemExit):
        cli.main([])
