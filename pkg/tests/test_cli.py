import csv

import pytest

from nadash.cli import RUN_COLUMNS, main
from nadash.config import bundled_config

SMALL = """
[run]
repetitions = 2
[video]
segments = 12
[core]
source = markov
matrix = 0.5 0.5; 0.5 0.5
rates = 700, 1100
[edge]
source = markov
matrix = 0.5 0.5 0; 1/3 1/3 1/3; 0 0.5 0.5
rates = 100, 500, 900
[sweep]
buffer_values = 10, 20
window_values = 6, 10
"""


@pytest.fixture
def small_cfg(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL)
    return path


def _rows(path):
    with path.open() as fh:
        return list(csv.DictReader(fh))


def test_run_writes_results(small_cfg, tmp_path):
    out = tmp_path / "out"
    assert main(["run", str(small_cfg), "--output", str(out), "--per-segment", "-q"]) == 0
    header = (out / "runs.csv").read_text().splitlines()[0]
    assert header == ",".join(RUN_COLUMNS)
    rows = _rows(out / "runs.csv")
    # 2 policies x (2 buffer + 2 window values) x 2 seeds
    assert len(rows) == 16
    summary = _rows(out / "summary.csv")
    assert {r["panel"] for r in summary} >= {
        "utility_vs_buffer", "bitrate_vs_buffer", "utility_vs_window", "bitrate_vs_window",
    }
    segments = _rows(out / "segments.csv")
    assert len(segments) == 16 * 12


def test_single_baseline_run(small_cfg, tmp_path):
    out = tmp_path / "single"
    assert main(["run", str(small_cfg), "--policy", "baseline", "--buffer", "20", "--output", str(out), "-q"]) == 0
    rows = _rows(out / "runs.csv")
    assert len(rows) == 1
    assert rows[0]["policy"] == "baseline" and float(rows[0]["cache_peak_kB"]) == 0
    assert rows[0]["buffer_s"] == "20.0"


def test_byte_identical_reruns(small_cfg, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["run", str(small_cfg), "--output", str(out), "--emit-timelines", "-q"]) == 0
    for name in ("runs.csv", "summary.csv", "timelines/seed0_core.csv", "timelines/seed1_edge.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_env_seed(small_cfg, tmp_path, monkeypatch):
    monkeypatch.setenv("NADASH_SEED", "7")
    monkeypatch.setenv("NADASH_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["run", str(small_cfg), "--buffer", "20", "-q"]) == 0
    assert {r["seed"] for r in _rows(tmp_path / "env" / "runs.csv")} == {"7"}


def test_validate(capsys):
    assert main(["validate", str(bundled_config("paper_case1.cfg"))]) == 0
    out = capsys.readouterr().out
    assert out.startswith("valid\n") and "eta_up = 0.1" in out and "prune_floor = false" in out
    assert main(["validate", "paper_case2.cfg"]) == 0


def test_validate_rejects(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text(SMALL.replace("[sweep]", "[scheduler]\nwindow = 4\nholdback = 4\n[sweep]"))
    assert main(["validate", str(bad)]) == 2
    assert "holdback" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.cfg")]) == 2


def test_oracle_check(capsys):
    assert main(["oracle-check", "--n", "4", "--m", "3", "--seeds", "20"]) == 0
    assert "20/20 agreements" in capsys.readouterr().out


def test_oracle_guard(capsys):
    assert main(["oracle-check", "--n", "13", "--m", "3", "--seeds", "1"]) == 2
    assert "guard" in capsys.readouterr().err


def test_trace_inspect(tmp_path, capsys):
    trace = bundled_config("sample_trace.csv")
    out = tmp_path / "q.csv"
    assert main(["trace-inspect", str(trace), "--quantization", "2", "--output", str(out)]) == 0
    text = capsys.readouterr().out
    assert "samples: 897" in text
    assert out.read_text().startswith("start_s,rate_kbps\n")
