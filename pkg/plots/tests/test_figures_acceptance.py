"""Secondary acceptance: render every figure kind from CSVs produced by the
experiment CLI itself, and re-render byte-identically."""

import shutil
import subprocess

import pytest

from plateauplots.figures import PlotSpec, render

pytestmark = pytest.mark.skipif(
    shutil.which("plateaulab") is None, reason="experiment CLI not on PATH"
)


def cli(*args):
    subprocess.run(["plateaulab", *args], check=True, capture_output=True, text=True)


@pytest.fixture(scope="module")
def produced(tmp_path_factory):
    root = tmp_path_factory.mktemp("suite-csv")
    gorge = root / "gorge-samples.csv"
    cli(
        "gorge", "--family", "global", "--n", "10", "--delta", "0.5",
        "--samples", "20000", "--seed", "3",
        "--out", str(root / "gorge.csv"), "--samples-out", str(gorge),
    )
    trace = root / "trace-l2.csv"
    cli(
        "autoencoder-train", "--cost", "local", "--n-b", "5", "--L", "2",
        "--max-iters", "15", "--seed", "1", "--out", str(trace),
    )
    trace3 = root / "trace-l3.csv"
    cli(
        "autoencoder-train", "--cost", "local", "--n-b", "5", "--L", "3",
        "--max-iters", "15", "--seed", "1", "--out", str(trace3),
    )
    scan = root / "scan.csv"
    cli(
        "variance-scan", "--n", "4,6", "--m", "2", "--L", "1", "--family", "global",
        "--samples", "500", "--seed", "5", "--out", str(scan),
    )
    return {"gorge": gorge, "traces": (trace, trace3), "scan": scan}


def test_every_kind_renders_and_rerenders_identically(produced, tmp_path):
    specs = {
        "landscape": (str(produced["gorge"]),),
        "training": (str(produced["traces"][0]),),
        "layers": tuple(str(p) for p in produced["traces"]),
        "scaling": (str(produced["scan"]),),
    }
    for kind, inputs in specs.items():
        first = tmp_path / f"{kind}-1.png"
        second = tmp_path / f"{kind}-2.png"
        render(PlotSpec(kind, inputs, str(first), log_y=(kind in ("training", "layers"))))
        render(PlotSpec(kind, inputs, str(second), log_y=(kind in ("training", "layers"))))
        print(f"[PASS] figure kind {kind}: rendered {first.stat().st_size} bytes, re-render identical "
              f"{first.read_bytes() == second.read_bytes()}")
        assert first.stat().st_size > 1000
        assert first.read_bytes() == second.read_bytes()
