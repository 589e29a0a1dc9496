"""End-to-end checks of the command-line interface."""

import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from isaacsfem.analysis import CSV_HEADER
from isaacsfem.cli import RunManifest, main, resolve_thread_count
from isaacsfem.errors import ParameterError
from isaacsfem.mesh import generate_triangle_mesh
from isaacsfem.problems import experiment1

RIGHT_TRIANGLE = "3 1\n0.0 0.0 1\n1.0 0.0 1\n0.0 1.0 1\n0 1 2\n"

BAD_REACTION_CONFIG = """
[problem]
name = sink
T = 1.0

[domain]
kind = triangle

[controls]
alphas = 0
betas = 0

[coefficients]
a = 1
c = -1

[data]
g = 0
v_T = 0
"""


def read(path: Path) -> str:
    return path.read_text(encoding="utf-8")


def without_runtime(csv_text: str) -> list[str]:
    return [line.rsplit(",", 1)[0] for line in csv_text.splitlines()]


def test_check_mesh_reports_the_equilateral_angle(capsys):
    assert main(["check-mesh", "--triangle", "--level", "3"]) == 0
    out = capsys.readouterr().out
    assert "30.00" in out
    assert "strictly acute" in out


def test_check_mesh_flags_a_right_triangle(tmp_path, capsys):
    path = tmp_path / "right.mesh"
    path.write_text(RIGHT_TRIANGLE, encoding="utf-8")
    assert main(["check-mesh", "--mesh", str(path)]) == 1
    out = capsys.readouterr().out
    assert "0.00" in out
    assert "NOT strictly acute" in out


def test_check_mesh_names_the_malformed_line(tmp_path, capsys):
    path = tmp_path / "broken.mesh"
    path.write_text(RIGHT_TRIANGLE.replace("1.0 0.0 1", "one 0.0 1"), encoding="utf-8")
    assert main(["check-mesh", "--mesh", str(path)]) == 2
    assert "line 3" in capsys.readouterr().err


def test_check_mesh_missing_file(tmp_path, capsys):
    assert main(["check-mesh", "--mesh", str(tmp_path / "nowhere.mesh")]) == 2
    assert "error" in capsys.readouterr().err


def test_convergence_writes_table_and_manifest(tmp_path, capsys):
    out = tmp_path / "conv"
    code = main(
        ["convergence", "--levels", "2..3", "--out-dir", str(out)]
    )
    assert code == 0
    lines = read(out / "convergence.csv").splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 3
    manifest = RunManifest.from_json(read(out / "manifest.json"))
    assert manifest.subcommand == "convergence"
    assert manifest.artifacts == ("convergence.csv",)
    assert manifest.flags["levels"] == "2..3"
    # round trip: parse then re-emit identical
    assert manifest.to_json() == read(out / "manifest.json")


def test_convergence_reruns_match_except_runtime(tmp_path):
    outs = []
    for name in ("first", "second"):
        out = tmp_path / name
        assert main(["convergence", "--levels", "2..3", "--out-dir", str(out)]) == 0
        outs.append(out)
    first, second = (read(o / "convergence.csv") for o in outs)
    assert without_runtime(first) == without_runtime(second)
    m1, m2 = (RunManifest.from_json(read(o / "manifest.json")) for o in outs)
    assert m1.flags == {**m2.flags, "out_dir": m1.flags["out_dir"]}
    assert m1.mesh == m2.mesh


def test_convergence_thread_pool_matches_sequential(tmp_path):
    seq = tmp_path / "seq"
    par = tmp_path / "par"
    assert main(["convergence", "--levels", "2..3", "--out-dir", str(seq)]) == 0
    assert (
        main(
            [
                "convergence",
                "--levels",
                "2..3",
                "--threads",
                "2",
                "--out-dir",
                str(par),
            ]
        )
        == 0
    )
    assert without_runtime(read(seq / "convergence.csv")) == without_runtime(
        read(par / "convergence.csv")
    )


def test_convergence_rejects_bad_level_syntax(tmp_path, capsys):
    code = main(
        ["convergence", "--levels", "a..b", "--out-dir", str(tmp_path / "x")]
    )
    assert code == 2
    assert "levels" in capsys.readouterr().err


def test_convergence_needs_an_exact_solution_domain(tmp_path, capsys):
    code = main(
        [
            "convergence",
            "--problem",
            "tag-chase",
            "--levels",
            "2..3",
            "--out-dir",
            str(tmp_path / "x"),
        ]
    )
    assert code == 2


def test_strict_convergence_failure_keeps_completed_rows(tmp_path, capsys):
    out = tmp_path / "partial"
    code = main(
        [
            "convergence",
            "--levels",
            "2,3",
            "--h",
            "0.25",  # stable on level 2, above the level-3 ceiling
            "--strict",
            "--out-dir",
            str(out),
        ]
    )
    assert code == 3
    assert "solver failure" in capsys.readouterr().err
    lines = read(out / "convergence.csv").splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 2  # header plus the completed level-2 row
    assert (out / "manifest.json").exists()


def test_solve_snapshot_matches_the_exact_solution(tmp_path):
    out = tmp_path / "field"
    code = main(
        [
            "solve",
            "--problem",
            "exp1",
            "--level",
            "2",
            "--snapshot",
            "0",
            "--out-dir",
            str(out),
        ]
    )
    assert code == 0
    mesh = generate_triangle_mesh(2)
    table = np.loadtxt(out / "experiment1-t0.000.csv", delimiter=",", skiprows=1)
    assert table.shape == (mesh.n_vertices, 3)
    np.testing.assert_array_equal(table[:, :2], mesh.vertices)
    p = experiment1()
    exact = p.exact.value(mesh.vertices[:, 0], mesh.vertices[:, 1], 0.0)
    assert np.abs(table[:, 2] - exact).max() < 2e-2

    vtk = read(out / "experiment1-t0.000.vtk")
    lines = vtk.splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0"
    assert "DATASET UNSTRUCTURED_GRID" in lines
    assert f"POINTS {mesh.n_vertices} double" in lines
    assert f"CELLS {mesh.n_triangles} {4 * mesh.n_triangles}" in lines
    cell_types = lines.index(f"CELL_TYPES {mesh.n_triangles}")
    assert all(
        lines[cell_types + 1 + i] == "5" for i in range(mesh.n_triangles)
    )
    assert f"POINT_DATA {mesh.n_vertices}" in lines
    assert "\r" not in vtk

    manifest = RunManifest.from_json(read(out / "manifest.json"))
    assert sorted(manifest.artifacts) == [
        "experiment1-mesh.csv",
        "experiment1-t0.000.csv",
        "experiment1-t0.000.vtk",
    ]
    mesh_rows = read(out / "experiment1-mesh.csv").splitlines()
    assert mesh_rows[0] == "i,j,k"
    assert len(mesh_rows) == mesh.n_triangles + 1
    first = [int(v) for v in mesh_rows[1].split(",")]
    assert first == list(mesh.triangles[0])


def test_solve_tag_chase_defaults_to_time_zero(tmp_path):
    out = tmp_path / "chase"
    code = main(
        [
            "solve",
            "--problem",
            "tag-chase",
            "--n-alpha",
            "8",
            "--n-beta",
            "8",
            "--n-radial",
            "5",
            "--n-angular",
            "16",
            "--out-dir",
            str(out),
        ]
    )
    assert code == 0
    table = np.loadtxt(out / "tag-chase-t0.000.csv", delimiter=",", skiprows=1)
    assert table[:, 2].min() >= -1e-9
    assert table[:, 2].max() <= 1.0 + 1e-9


def test_solve_reruns_are_bit_identical(tmp_path):
    texts = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert (
            main(
                [
                    "solve",
                    "--problem",
                    "exp1",
                    "--level",
                    "2",
                    "--out-dir",
                    str(out),
                ]
            )
            == 0
        )
        texts.append(
            (read(out / "experiment1-t0.000.csv"), read(out / "experiment1-t0.000.vtk"))
        )
    assert texts[0] == texts[1]


def test_exact_alpha_run_stays_close_to_the_grid_run(tmp_path):
    columns = []
    for extra, name in ((["--exact-alpha"], "closed"), ([], "grid")):
        out = tmp_path / name
        args = [
            "solve",
            "--problem",
            "exp1",
            "--level",
            "3",
            "--out-dir",
            str(out),
        ] + extra
        assert main(args) == 0
        stem = "experiment1-exact-alpha" if extra else "experiment1"
        table = np.loadtxt(out / f"{stem}-t0.000.csv", delimiter=",", skiprows=1)
        columns.append(table[:, 2])
    gap = np.abs(columns[0] - columns[1]).max()
    assert 0.0 < gap < 1.040e-2  # below this level's documented sup error


def test_exact_alpha_rejected_for_the_pursuit_problem(tmp_path, capsys):
    code = main(
        [
            "solve",
            "--problem",
            "tag-chase",
            "--exact-alpha",
            "--out-dir",
            str(tmp_path / "x"),
        ]
    )
    assert code == 2
    assert "exact-alpha" in capsys.readouterr().err


def test_solve_oversized_step_is_a_property_failure(tmp_path, capsys):
    code = main(
        [
            "solve",
            "--problem",
            "exp1",
            "--h",
            "0.5",
            "--out-dir",
            str(tmp_path / "x"),
        ]
    )
    assert code == 1
    assert "property failure" in capsys.readouterr().err


def test_solve_unknown_problem(tmp_path, capsys):
    code = main(
        ["solve", "--problem", "mystery", "--out-dir", str(tmp_path / "x")]
    )
    assert code == 2


def test_validate_clean_problem(capsys):
    assert main(["validate", "--problem", "exp1", "--samples", "100"]) == 0
    assert "clean" in capsys.readouterr().out


def test_validate_flags_inadmissible_data(tmp_path, capsys):
    config = tmp_path / "sink.ini"
    config.write_text(BAD_REACTION_CONFIG, encoding="utf-8")
    out = tmp_path / "report"
    code = main(
        [
            "validate",
            "--config",
            str(config),
            "--samples",
            "50",
            "--out-dir",
            str(out),
        ]
    )
    assert code == 1
    assert "VIOLATION" in capsys.readouterr().out
    assert "VIOLATION" in read(out / "validation.txt")
    assert (out / "manifest.json").exists()


def test_thread_count_resolution(monkeypatch):
    monkeypatch.delenv("ISAACS_FEM_THREADS", raising=False)
    assert resolve_thread_count(None) == 1
    monkeypatch.setenv("ISAACS_FEM_THREADS", "3")
    assert resolve_thread_count(None) == 3
    assert resolve_thread_count(2) == 2  # the flag wins over the environment
    monkeypatch.setenv("ISAACS_FEM_THREADS", "many")
    with pytest.raises(ParameterError):
        resolve_thread_count(None)
    with pytest.raises(ParameterError):
        resolve_thread_count(0)


def test_manifest_rejects_garbage():
    with pytest.raises(ParameterError):
        RunManifest.from_json("not json")
    with pytest.raises(ParameterError):
        RunManifest.from_json("{}")


def test_missing_subcommand_is_an_input_error():
    assert main([]) == 2


def test_module_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "isaacsfem.cli", "check-mesh", "--triangle"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "strictly acute" in proc.stdout
