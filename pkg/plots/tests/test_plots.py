from pathlib import Path

import pytest

from landauplots.cli import main
from landauplots.io import PlotDataError, load_table

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def _run(args):
    return main([str(a) for a in args])


def test_profile_renders_from_run(artifacts, tmp_path):
    out = tmp_path / "profile.png"
    rc = _run(["profile", "--in", artifacts / "profile_p0_00.csv", "--out", out])
    assert rc == 0
    assert out.read_bytes()[:8] == _PNG_MAGIC


def test_spectrum_renders_with_gap_line(artifacts, tmp_path):
    out = tmp_path / "spectrum.png"
    rc = _run([
        "spectrum", "--in", artifacts / "spectrum.csv",
        "--fit", artifacts / "gap.json", "--out", out,
    ])
    assert rc == 0
    assert out.read_bytes()[:8] == _PNG_MAGIC


def test_branches_renders_with_and_without_fit(artifacts, tmp_path):
    with_fit = tmp_path / "branches_fit.png"
    bare = tmp_path / "branches.png"
    rc = _run([
        "branches", "--in", artifacts / "branches.csv",
        "--fit", artifacts / "dispersion_fit.json", "--out", with_fit,
    ])
    assert rc == 0
    assert _run(["branches", "--in", artifacts / "branches.csv", "--out", bare]) == 0
    # the fitted parabolas add ink, so the two renders must differ
    assert with_fit.read_bytes() != bare.read_bytes()


def test_chain_renders_from_run(artifacts, tmp_path):
    out = tmp_path / "chain.png"
    assert _run(["chain", "--in", artifacts / "chain.csv", "--out", out]) == 0
    assert out.read_bytes()[:8] == _PNG_MAGIC


def test_regimes_renders(regimes_csv, tmp_path):
    out = tmp_path / "regimes.png"
    assert _run(["regimes", "--in", regimes_csv, "--out", out]) == 0
    assert out.read_bytes()[:8] == _PNG_MAGIC


def test_rerun_is_byte_identical(artifacts, tmp_path):
    first = tmp_path / "a.png"
    second = tmp_path / "b.png"
    for out in (first, second):
        assert _run(["chain", "--in", artifacts / "chain.csv", "--out", out]) == 0
    assert first.read_bytes() == second.read_bytes()


def test_empty_table_writes_no_file(tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text("t,j,norm\n")
    out = tmp_path / "chain.png"
    assert _run(["chain", "--in", empty, "--out", out]) == 2
    assert not out.exists()
    assert "no data rows" in capsys.readouterr().err
    empty.write_text("")
    assert _run(["chain", "--in", empty, "--out", out]) == 2
    assert not out.exists()


def test_missing_column_diagnostic(tmp_path, capsys):
    bad = tmp_path / "branches.csv"
    bad.write_text("kappa,j,re_sigma,overlap\n0.1,0,-0.01,0.99\n")
    out = tmp_path / "branches.png"
    assert _run(["branches", "--in", bad, "--out", out]) == 2
    err = capsys.readouterr().err
    assert "im_sigma" in err
    assert not out.exists()


def test_unknown_kind_rejected():
    with pytest.raises(SystemExit):
        main(["not-a-kind", "--in", "x.csv", "--out", "y.png"])


def test_load_table_parses_mixed_columns(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("regime,t\nI,0.5\nII,1.5\n")
    cols = load_table(p, required=("regime", "t"))
    assert list(cols["regime"]) == ["I", "II"]
    assert cols["t"].tolist() == [0.5, 1.5]
    with pytest.raises(PlotDataError, match="missing"):
        load_table(p, required=("value",))
