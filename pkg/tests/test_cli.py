import json
import subprocess
import sys

import pytest

from mvba import cli
from mvba.net import RunConfig, run


def _run_cli(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_single_run_csv(capsys):
    code, out, _ = _run_cli(capsys, "run", "--n", "7", "--t", "2", "--c", "1024", "--l", "51200", "--seed", "1")
    assert code == 0
    (row,) = cli.read_report(out, "csv")
    assert tuple(row) == cli.REPORT_FIELDS
    expected = 7 * 6 / 5 + 6 * 402 / (5 * 1024)
    assert row["overhead"] == pytest.approx(expected)
    assert row["broadcast_phases"] == 0 and row["bound_ok"]


def test_formats_agree(capsys, tmp_path):
    args = ["run", "--n", "4", "--t", "1", "--c", "8", "--l", "480", "--adversary", "tampering_peer", "--seed", "2"]
    assert cli.main(args + ["--format", "json", "--out", str(tmp_path / "r.json")]) == 0
    assert cli.main(args + ["--format", "csv", "--out", str(tmp_path / "r.csv")]) == 0
    a = cli.read_report((tmp_path / "r.json").read_text(), "json")
    b = cli.read_report((tmp_path / "r.csv").read_text(), "csv")
    assert a == b


def test_sweep(capsys):
    code, out, _ = _run_cli(
        capsys, "sweep", "--n", "4,7,10", "--adversary", "tampering_peer", "--c", "8", "--l", "2000"
    )
    assert code == 0
    rows = cli.read_report(out, "csv")
    assert [(r["n"], r["t"]) for r in rows] == [(4, 1), (7, 2), (10, 3)]
    assert all(r["broadcast_phases"] >= 1 for r in rows)


def test_exit_codes(capsys):
    assert _run_cli(capsys, "run", "--n", "4", "--t", "1", "--c", "8", "--l", "0")[0] == cli.EXIT_USAGE
    assert _run_cli(capsys, "frobnicate")[0] == cli.EXIT_USAGE
    assert _run_cli(capsys, "run", "--n", "3", "--t", "1", "--c", "8", "--l", "9")[0] == cli.EXIT_CONFIG
    assert _run_cli(capsys, "run", "--n", "4", "--t", "1", "--c", "8", "--l", "9", "--adversary", "x")[0] == cli.EXIT_CONFIG
    code = _run_cli(capsys, "run", "--n", "4", "--t", "1", "--c", "8", "--l", "9", "--adversary-params", "nokey")[0]
    assert code == cli.EXIT_CONFIG


def test_invariant_violation_exit(capsys, monkeypatch):
    from mvba.net import InvariantViolation

    def broken(config):
        raise InvariantViolation("forced")

    monkeypatch.setattr(cli, "run", broken)
    code, _, err = _run_cli(capsys, "run", "--n", "4", "--t", "1", "--c", "8", "--l", "9")
    assert code == cli.EXIT_INVARIANT and "forced" in err


def test_transcript_file(capsys, tmp_path):
    path = tmp_path / "t.txt"
    args = ["run", "--n", "4", "--t", "1", "--c", "8", "--l", "48", "--transcript", str(path)]
    assert cli.main(args + ["--out", str(tmp_path / "r.csv")]) == 0
    _, tr = run(RunConfig(4, 1, 8, 48))
    assert path.read_text() == tr.to_text()


def test_bound_reported_for_adversarial_run_at_c_star(capsys):
    code, out, _ = _run_cli(
        capsys, "run", "--n", "4", "--t", "1", "--c", "17", "--l", "10000", "--adversary", "lying_claims", "--format", "json"
    )
    row = json.loads(out)
    assert code == 0 and row["c_star"] == pytest.approx(16.667, rel=1e-3)
    assert 1 <= row["broadcast_phases"] <= 2 and row["bound_ok"]


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "mvba", "run", "--n", "4", "--t", "1", "--c", "8", "--l", "24", "--format", "json"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["bits_data"] == 96
