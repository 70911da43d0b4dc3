"""End-to-end acceptance gate.

Runs the full staged pipeline once per session and turns every reported
check into its own test, so the verdict for each criterion appears as one
line of the pytest output.  Without ``--runslow`` the fine-grid criteria
(A4, A9, and the slow half of A7) report SKIP, mirroring the fast CLI run.
"""

import json

import pytest

from landaulab.harness import DEFAULT_CONFIG, run_suite


@pytest.fixture(scope="session")
def suite(tmp_path_factory, request):
    out = tmp_path_factory.mktemp("acceptance")
    slow = bool(request.config.getoption("--runslow"))
    report = run_suite(DEFAULT_CONFIG, out, fast=not slow, slow=slow)
    return report, out


def _verdict(suite, check_id: str):
    report, _out = suite
    matches = [c for c in report.checks if c.check_id == check_id]
    assert matches, f"suite produced no {check_id} check"
    for c in matches:
        print(c.line())
    if all(c.passed is None for c in matches):
        pytest.skip(f"{check_id} runs only with --runslow")
    failed = [c.detail for c in matches if c.passed is False]
    assert not failed, f"{check_id} failed: {failed}"


def test_a1_operator_structure(suite):
    _verdict(suite, "A1")


def test_a2_coercivity(suite):
    _verdict(suite, "A2")


def test_a3_kernel_formula(suite):
    _verdict(suite, "A3")


def test_a4_dispersion_branches(suite):
    _verdict(suite, "A4")


def test_a5_decay_split(suite):
    _verdict(suite, "A5")


def test_a6_chain_levels(suite):
    _verdict(suite, "A6")


def test_a7_mixture_bounds(suite):
    _verdict(suite, "A7")


def test_a8_cutoff_scaling(suite):
    _verdict(suite, "A8")


def test_a9_regime_sweep(suite):
    _verdict(suite, "A9")


def test_a10_green_reconstruction(suite):
    _verdict(suite, "A10")


def test_a11_commutators(suite):
    _verdict(suite, "A11")


def test_all_stages_completed(suite):
    report, out = suite
    assert report.stages_done == [
        "assemble", "gap", "branches", "chain", "green", "fits",
    ]
    manifest = (out / "MANIFEST").read_text().split()
    assert manifest == report.stages_done


def test_overall_verdict_and_report(suite):
    report, out = suite
    assert report.passed
    on_disk = json.loads((out / "report.json").read_text())
    assert on_disk["passed"] is True
    assert on_disk["stages_done"] == report.stages_done
    ids = {c["check_id"] for c in on_disk["checks"]}
    assert {f"A{i}" for i in range(1, 12)} <= ids


def test_expected_artifacts_exist(suite):
    _report, out = suite
    expected = [
        "report.json",
        "MANIFEST",
        "gap.json",
        "gap_series.csv",
        "dispersion_fit.json",
        "branches.csv",
        "spectrum.csv",
        "chain.csv",
        "snapshots.csv",
        "ks_scan.csv",
        "operator_p0_00.bin",
        "operator_p0_00.json",
        "operator_m1_00.bin",
        "operator_m1_00.json",
        "profile_p0_00.csv",
        "profile_m1_00.csv",
    ]
    missing = [name for name in expected if not (out / name).exists()]
    assert not missing, f"missing artifacts: {missing}"
