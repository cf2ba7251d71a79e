"""Figure regeneration tests: byte-stable output from the golden records."""

import csv
import re
import subprocess
import sys
from pathlib import Path

import pytest

FIGDIR = Path(__file__).resolve().parent.parent
PLOT = FIGDIR / "plot.py"
GOLDEN = FIGDIR / "golden"

QUAD = GOLDEN / "quad_kimad.csv"
LSQ = GOLDEN / "lsq_kimad.csv"
LSQ_PLUS = GOLDEN / "lsq_kimad_plus.csv"


def render(kind, inputs, out):
    proc = subprocess.run(
        [sys.executable, str(PLOT), "--kind", kind,
         "--in", *[str(p) for p in inputs], "--out", str(out)],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc.stdout


@pytest.mark.parametrize("kind,inputs", [
    ("loss", (QUAD,)),
    ("loss", (LSQ, LSQ_PLUS)),
    ("throughput", (QUAD,)),
    ("eps", (LSQ, LSQ_PLUS)),
])
def test_svg_regeneration_is_byte_stable(kind, inputs, tmp_path):
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    render(kind, inputs, a)
    render(kind, inputs, b)
    data = a.read_bytes()
    assert data == b.read_bytes()
    assert data.lstrip().startswith(b"<?xml")


def test_throughput_tracks_link_rate(tmp_path):
    out = render("throughput", (QUAD,), tmp_path / "throughput.svg")
    m = re.search(r"pearson_r=([0-9.eE+-]+)", out)
    assert m, f"no correlation in output: {out!r}"
    assert float(m.group(1)) > 0.9


def test_eps_golden_pair_dominance():
    # The allocation-aware run should sit at or below the proportional one
    # in nearly every round of the committed golden pair.
    def eps(path):
        with open(path, newline="") as fh:
            return [float(r["eps_k"]) for r in csv.DictReader(fh)]

    base, plus = eps(LSQ), eps(LSQ_PLUS)
    assert len(base) == len(plus) > 0
    frac = sum(p <= b for p, b in zip(plus, base)) / len(base)
    assert frac >= 0.95


def test_rejects_foreign_columns(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("round,loss\n0,1.0\n")
    proc = subprocess.run(
        [sys.executable, str(PLOT), "--kind", "loss", "--in", str(bad),
         "--out", str(tmp_path / "x.svg")],
        capture_output=True, text=True)
    assert proc.returncode != 0
    assert "unexpected columns" in proc.stderr


def test_png_output(tmp_path):
    out = tmp_path / "loss.png"
    render("loss", (QUAD,), out)
    assert out.read_bytes().startswith(b"\x89PNG")
