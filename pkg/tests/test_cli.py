"""End-to-end command-line pipeline."""

import numpy as np
import pytest

from iso4d import cli, tessellation


def run(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_gen_table_verify(capsys):
    code, out, _ = run(capsys, "gen-table", "--verify")
    assert code == 0
    assert "192/192 paths match" in out


def test_gen_table_dump(capsys):
    code, out, _ = run(capsys, "gen-table")
    lines = [l for l in out.splitlines() if l]
    assert code == 0 and len(lines) == 192
    assert lines[0] == "0 + 32 33"


def test_full_pipeline(tmp_path, capsys):
    vol = str(tmp_path / "toxel.t4v")
    mesh = str(tmp_path / "toxel.st4")
    code, out, _ = run(capsys, "synth", "single-toxel",
                       "--dims", "3", "3", "3", "3", "--out", vol)
    assert code == 0
    code, out, _ = run(capsys, "info", "--input", vol, "--isovalue", "0.5")
    assert code == 0 and "active toxels at isovalue 0.5: 1" in out

    code, out, _ = run(capsys, "extract", "--input", vol, "--isovalue", "0.5",
                       "--mode", "mixed", "--placement", "interpolate",
                       "--output", mesh)
    assert code == 0 and "16 tets on 8 vertices" in out
    loaded = tessellation.read_st4(mesh)
    assert loaded.n_tets == 16 and loaded.n_vertices == 8

    code, out, _ = run(capsys, "validate", "--mesh", mesh)
    assert code == 0 and out.startswith("PASS")

    code, out, _ = run(capsys, "slice", "--mesh", mesh, "--t", "0.8,1.0,1.2",
                       "--format", "obj", "--out-prefix", str(tmp_path / "sl"))
    assert code == 0
    assert (tmp_path / "sl0001.obj").exists()

    code, out, _ = run(capsys, "slice", "--mesh", mesh, "--t", "1.0",
                       "--format", "ply", "--out-prefix", str(tmp_path / "pl"))
    assert code == 0
    assert (tmp_path / "pl0000.ply").read_text().startswith("ply")

    code, out, _ = run(capsys, "info", "--mesh", mesh)
    assert code == 0 and "tets: 16" in out


def test_enumerate_cell_smoke(capsys):
    code, out, _ = run(capsys, "enumerate-cell", "--mixed-samples", "8")
    assert code == 0
    assert "cycle length histogram" in out
    assert "sections per cell" in out


def test_validation_failure_exit_code(tmp_path, capsys):
    # a mesh with an unpaired triangle must fail with code 5
    mesh = tessellation.TetMesh4(
        np.array([[0, 0, 0, 0], [1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0],
                  [0, 0, 0, 1.0]]),
        np.array([[0, 1, 2, 4]]),
    )
    path = tmp_path / "open.st4"
    tessellation.write_st4(mesh, path)
    code, out, err = run(capsys, "validate", "--mesh", str(path))
    assert code == 5
    assert "error: code=5" in err


def test_io_and_format_exit_codes(tmp_path, capsys):
    code, _, err = run(capsys, "validate", "--mesh", str(tmp_path / "no.st4"))
    assert code == 3 and "code=3" in err
    bad = tmp_path / "bad.st4"
    bad.write_text("not a mesh\n")
    code, _, err = run(capsys, "validate", "--mesh", str(bad))
    assert code == 4 and "code=4" in err
    code, _, err = run(capsys, "slice", "--mesh", str(bad), "--t", "1")
    assert code == 4


def test_usage_exit_code(capsys):
    assert cli.main(["extract", "--input", "x"]) == 2
    code, _, err = run(capsys, "synth", "hypersphere",
                       "--dims", "6", "6", "6", "6", "--radius", "9",
                       "--out", "/tmp/never.t4v")
    assert code == 4  # shape outside grid is a format error
