import os
import shutil
import subprocess
import sys
from pathlib import Path

import pytest


@pytest.fixture(scope="session")
def artifacts(tmp_path_factory) -> Path:
    """Artifact directory from a completed solver run.

    The solver is only ever touched through its command line; the plotting
    package must work from the files alone.  Set LANDAUPLOTS_ARTIFACTS to
    reuse an existing run directory instead of producing a fresh one.
    """
    override = os.environ.get("LANDAUPLOTS_ARTIFACTS")
    if override:
        p = Path(override)
        if not (p / "MANIFEST").exists():
            pytest.skip(f"LANDAUPLOTS_ARTIFACTS={override} has no MANIFEST")
        return p
    if shutil.which(sys.executable) is None:  # pragma: no cover
        pytest.skip("no python executable for the solver subprocess")
    out = tmp_path_factory.mktemp("run")
    proc = subprocess.run(
        [sys.executable, "-m", "landaulab.cli", "verify", "--fast", "--out", str(out)],
        capture_output=True,
        text=True,
        timeout=3600,
    )
    if proc.returncode != 0:
        pytest.skip(
            "solver run unavailable: "
            f"rc {proc.returncode}, stderr tail {proc.stderr[-300:]!r}"
        )
    return out


@pytest.fixture()
def regimes_csv(tmp_path) -> Path:
    """Schema-conforming regime table.

    The regime sweep only runs under the solver's slow profile, which is far
    too expensive for this suite, so the schema is reproduced here.
    """
    rows = ["regime,t,value,reference"]
    for i in range(9):
        t = 0.5 * i
        rows.append(f"I,{t},{1e-16},0.0")
        rows.append(f"II,{t},{0.8 * (1.0 + t) ** -1.5},{0.9 * (1.0 + t) ** -1.5}")
        rows.append(f"III,{t},{0.5 * 2.7 ** (-0.3 * t)},{0.6 * 2.7 ** (-0.3 * t)}")
    p = tmp_path / "regimes.csv"
    p.write_text("\n".join(rows) + "\n")
    return p
