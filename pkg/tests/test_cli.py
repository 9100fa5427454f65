import json
import subprocess
import sys
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from ising_gof import FiberId, LatticeShape, find_fiber_member
from ising_gof.cli import main, resolve_seed
from ising_gof.io import format_text_grid, read_grid, write_grid

SCHEMA_PATH = Path(__file__).resolve().parents[1] / "docs" / "report.schema.json"


@pytest.fixture
def figure1_file(tmp_path, figure1):
    path = tmp_path / "figure1.txt"
    path.write_text(format_text_grid(figure1.grid))
    return path


@pytest.fixture(scope="module")
def sample_10x10(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "sample.txt"
    cfg = find_fiber_member(LatticeShape((10, 10)), FiberId(52, 70), seed=0)
    path.write_text(format_text_grid(cfg.grid))
    return path


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_stats_figure1(capsys, figure1_file):
    code, out, _ = run_cli(capsys, "stats", figure1_file)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "T1=6 T2=18"
    assert "singletons=2" in lines[1] and "4x1" in lines[1] and "1x2" in lines[1]


def test_stats_empty_grid(capsys, tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("0,0,0\n0,0,0\n")
    code, out, _ = run_cli(capsys, "stats", path)
    assert code == 0 and out.splitlines()[0] == "T1=0 T2=0"


def test_stats_large_pgm(capsys, tmp_path):
    # synthetic stand-in with the sufficient statistics of the 800x800 mask
    cfg = find_fiber_member(LatticeShape((800, 800)), FiberId(14483, 51145), seed=0)
    path = tmp_path / "mask.pgm"
    write_grid(path, cfg.grid)
    code, out, _ = run_cli(capsys, "stats", path, "--threshold", "200")
    assert code == 0 and out.splitlines()[0] == "T1=14483 T2=51145"


def test_malformed_grid_exit_code(capsys, tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("0101\n01x1\n")
    code, _, err = run_cli(capsys, "stats", bad)
    assert code == 4 and "line 2" in err
    code, _, err = run_cli(capsys, "stats", tmp_path / "missing.txt")
    assert code == 4


def test_usage_errors(capsys, figure1_file):
    with pytest.raises(SystemExit) as info:
        main(["stats"])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        main(["test", str(figure1_file), "--out"])
    assert info.value.code == 1
    capsys.readouterr()
    code, _, err = run_cli(capsys, "generate", "--size", "ten")
    assert code == 1 and "error" in err


def test_seed_precedence(monkeypatch):
    monkeypatch.delenv("ISING_GOF_SEED", raising=False)
    assert resolve_seed(None) == 0
    monkeypatch.setenv("ISING_GOF_SEED", "17")
    assert resolve_seed(None) == 17
    assert resolve_seed(5) == 5
    monkeypatch.setenv("ISING_GOF_SEED", "many")
    with pytest.raises(Exception, match="not an integer"):
        resolve_seed(None)


def test_test_command_outputs(capsys, tmp_path, sample_10x10):
    out = tmp_path / "run"
    code, stdout, _ = run_cli(capsys, "test", sample_10x10, "--out", out, "--chains", 3, "--steps", 20000,
                              "--burn-in", 2000, "--seed", 4)
    assert code in (0, 2)
    for name in ("report.json", "samples.csv", "histogram.csv", "manifest.json"):
        assert (out / name).exists()
    report = json.loads((out / "report.json").read_text())
    schema = json.loads(SCHEMA_PATH.read_text())
    jsonschema.validate(report, schema)
    assert report["fiber"] == {"a": 52, "b": 70}
    assert report["settings"]["n_chains"] == 3 and report["settings"]["seed"] == 4
    assert [s["statistic"]["name"] for s in report["statistics"]] == [
        "diagonal_pairs", "adjacent_pairs", "consecutive_pairs", "dT1", "dT2", "dT12"]
    assert (code == 2) == bool(report["rejected"])
    rows = (out / "samples.csv").read_text().splitlines()
    assert rows[0].startswith("chain,record,diagonal_pairs")
    assert len(rows) - 1 == sum(c["n_samples"] for c in report["chains"])
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["input"]["sha256"] and manifest["command"] == "test"
    assert manifest["elapsed_seconds"] >= 0
    assert "consecutive_pairs" in stdout


def test_packaged_schema_matches_docs():
    import ising_gof

    packaged = Path(ising_gof.__file__).with_name("report.schema.json")
    assert json.loads(packaged.read_text()) == json.loads(SCHEMA_PATH.read_text())


def test_replay_is_bit_identical(capsys, tmp_path, sample_10x10, monkeypatch):
    monkeypatch.setenv("ISING_GOF_SEED", "31")
    first = tmp_path / "first"
    run_cli(capsys, "test", sample_10x10, "--out", first, "--chains", 2, "--steps", 15000,
            "--burn-in", 1000, "--K", 20)
    monkeypatch.delenv("ISING_GOF_SEED")
    second = tmp_path / "second"
    code, _, _ = run_cli(capsys, "replay", first / "manifest.json", "--out", second)
    assert code in (0, 2)
    assert (first / "report.json").read_bytes() == (second / "report.json").read_bytes()
    assert (first / "samples.csv").read_bytes() == (second / "samples.csv").read_bytes()
    assert json.loads((first / "report.json").read_text())["settings"]["seed"] == 31


def test_env_seed_changes_output(capsys, tmp_path, sample_10x10, monkeypatch):
    outs = []
    for seed in ("1", "2"):
        monkeypatch.setenv("ISING_GOF_SEED", seed)
        out = tmp_path / seed
        run_cli(capsys, "test", sample_10x10, "--out", out, "--chains", 2, "--steps", 15000,
                "--burn-in", 1000, "--K", 0)
        outs.append((out / "samples.csv").read_bytes())
    assert outs[0] != outs[1]


def test_test_command_under_sampled(capsys, tmp_path, sample_10x10):
    code, _, err = run_cli(capsys, "test", sample_10x10, "--out", tmp_path / "x", "--steps", 1500,
                           "--burn-in", 100)
    assert code == 3 and "on-fiber samples" in err


def test_test_command_with_motif_file(capsys, tmp_path, sample_10x10):
    motifs = tmp_path / "motifs.txt"
    motifs.write_text("consecutive_pairs rotations\n0110\n\nell rotations_and_reflections\n1.\n11\n")
    out = tmp_path / "m"
    run_cli(capsys, "test", sample_10x10, "--out", out, "--chains", 2, "--steps", 15000,
            "--burn-in", 1000, "--K", 0, "--motifs", motifs)
    report = json.loads((out / "report.json").read_text())
    names = [s["statistic"]["name"] for s in report["statistics"]]
    assert names == ["consecutive_pairs", "ell", "diagonal_pairs", "adjacent_pairs"]


def test_generate_model_round_trip(capsys, tmp_path):
    path = tmp_path / "overall.txt"
    code, out, _ = run_cli(capsys, "generate", "--model", "overall", "--gamma", 0.2, "--size", "10x10",
                           "--out", path, "--seed", 3)
    assert code == 0
    grid = read_grid(path)
    assert grid.shape == (10, 10)
    code, stats_out, _ = run_cli(capsys, "stats", path)
    assert stats_out.splitlines()[0] in out
    assert json.loads(Path(str(path) + ".manifest.json").read_text())["settings"]["gamma"] == 0.2


def test_generate_fiber_to_stdout(capsys):
    code, out, _ = run_cli(capsys, "generate", "--fiber", "52,70", "--size", "10x10")
    assert code == 0
    grid = np.array([[int(ch) for ch in row] for row in out.split()])
    from ising_gof import Configuration

    c = Configuration.from_grid(grid)
    assert (c.t1, c.t2) == (52, 70)


def test_generate_formats(capsys, tmp_path):
    for name in ("g.csv", "g.pgm"):
        code, _, _ = run_cli(capsys, "generate", "--size", "6x7", "--beta", -0.5, "--out", tmp_path / name)
        assert code == 0 and read_grid(tmp_path / name).shape == (6, 7)


def test_sample_strict_frozen(capsys, tmp_path, figure2_pair):
    path = tmp_path / "fig2.txt"
    path.write_text(format_text_grid(figure2_pair[0].grid))
    code, out, err = run_cli(capsys, "sample", path, "--mode", "strict", "--steps", 5000, "--burn-in", 100,
                             "--out", tmp_path / "s")
    assert code == 0
    assert "chain frozen: 0 accepted moves" in err
    assert "acceptance=0.0000" in out
    assert read_grid(tmp_path / "s" / "final.txt").tolist() == figure2_pair[0].grid.tolist()
    code, _, err = run_cli(capsys, "sample", path, "--steps", 5000, "--burn-in", 100)
    assert "frozen" not in err


def test_enumerate(capsys):
    code, out, _ = run_cli(capsys, "enumerate", "3x3", "--degree1-count")
    assert code == 0 and out.strip() == "466"
    code, out, _ = run_cli(capsys, "enumerate", "4x6", "--a", 4)
    lines = out.splitlines()
    assert lines[0] == "a,b,size,components_e0,components_e2"
    assert "4,8,580,7,1" in lines


def test_diagnose(capsys, tmp_path, sample_10x10):
    out = tmp_path / "d"
    run_cli(capsys, "test", sample_10x10, "--out", out, "--chains", 2, "--steps", 15000, "--burn-in", 1000, "--K", 0)
    code, stdout, _ = run_cli(capsys, "diagnose", out / "samples.csv", "--json", out / "diag.json")
    assert code == 0 and "R-hat" in stdout
    diag = json.loads((out / "diag.json").read_text())
    report = json.loads((out / "report.json").read_text())
    for stat in report["statistics"]:
        assert diag[stat["statistic"]["name"]]["psrf"] == pytest.approx(stat["diagnostics"]["psrf"])
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n1,2\n")
    code, _, _ = run_cli(capsys, "diagnose", bad)
    assert code == 4


def test_console_script_entry_point(figure1_file):
    proc = subprocess.run([sys.executable, "-m", "ising_gof.cli", "stats", str(figure1_file)],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and proc.stdout.startswith("T1=6 T2=18")
    proc = subprocess.run([sys.executable, "-m", "ising_gof.cli", "--version"], capture_output=True, text=True)
    assert "0.1.0" in proc.stdout
