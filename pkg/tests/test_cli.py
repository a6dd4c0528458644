import os
import subprocess
import sys

import numpy as np
import pytest

from rkdg.basis import Space
from rkdg.cli import main
from rkdg.config import ConfigError, RunConfig, load_config, parse_config
from rkdg.dgop import interpolate
from rkdg.mesh import create_cartesian
from rkdg.output import read_csv, write_vtk

SOD = """
[problem]
name = sod
end_time = {end}

[space]
order = 1
basis = onb
counts = {counts}

[limiter]
mode = default

[stepper]
type = explicit
order = 3

[output]
directory = {out}
vtk_every = 0
norms = l1, l2
"""


def write_cfg(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def sod_cfg(tmp_path, end=0.02, counts=20):
    return write_cfg(tmp_path, SOD.format(end=end, counts=counts, out=tmp_path / "out"))


def parse_vtk(path):
    """Section sizes of a legacy VTK file."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0"
    assert lines[2] == "ASCII" and lines[3] == "DATASET UNSTRUCTURED_GRID"
    info = {}
    for i, line in enumerate(lines):
        head = line.split()
        if head and head[0] in ("POINTS", "CELLS", "CELL_TYPES", "CELL_DATA", "POINT_DATA"):
            info[head[0]] = (int(head[1]), i)
    n_types, at = info["CELL_TYPES"]
    info["types"] = [int(v) for v in lines[at + 1:at + 1 + n_types]]
    info["scalars"] = [l.split()[1] for l in lines if l.startswith("SCALARS")]
    return info


def test_parse_config_roundtrip(tmp_path):
    cfg = load_config(sod_cfg(tmp_path))
    assert cfg.problem == "sod" and cfg.order == 1 and cfg.counts == (20,)
    assert cfg.end_time == 0.02 and cfg.norms == ("l1", "l2")


def test_problem_params_passed_through():
    cfg = parse_config("[problem]\nname = heat\neps = 0.05\n")
    assert cfg.params == {"eps": 0.05}


@pytest.mark.parametrize("text, where", [
    ("[problem]\nname = nope\n", "problem.name"),
    ("[space]\norder = 2\n", "problem.name"),
    ("[problem]\nname = sod\n[space]\nbasis = legendre\n", "space.basis"),
    ("[problem]\nname = sod\n[space]\norder = two\n", "order"),
    ("[problem]\nname = sod\n[stepper]\ncfl = -1\n", "stepper.cfl"),
    ("[problem]\nname = sod\n[stepper]\nkind = rk4\n", "stepper.kind"),
    ("[problem]\nname = sod\n[mesh]\nn = 4\n", "mesh"),
    ("[problem]\nname = sod\n[limiter]\nmode = minmod\n", "limiter.mode"),
    ("[problem]\nname = sod\n[output]\nnorms = l3\n", "output.norms"),
    ("no section header", "malformed"),
])
def test_config_errors(text, where):
    with pytest.raises(ConfigError, match=where.replace(".", r"\.")):
        parse_config(text)


def test_config_error_exit_code(tmp_path, capsys):
    path = write_cfg(tmp_path, "[problem]\nname = sod\n[space]\nbasis = legendre\n")
    assert main(["solve", path]) == 2
    assert "space.basis" in capsys.readouterr().err
    assert main(["solve", str(tmp_path / "missing.ini")]) == 2


def test_bad_flags(tmp_path):
    path = sod_cfg(tmp_path)
    assert main(["solve", path, "--workers", "0"]) == 2
    assert main(["solve", path, "--vtk-every", "-1"]) == 2
    assert main(["study", path, "--levels", "0"]) == 2
    with pytest.raises(SystemExit) as err:
        main(["solve"])
    assert err.value.code != 0


def test_solve_writes_vtk_and_csv(tmp_path, capsys):
    path = sod_cfg(tmp_path)
    out = tmp_path / "res"
    assert main(["solve", path, "--out", str(out), "--vtk-every", "5"]) == 0
    text = capsys.readouterr().out
    assert "problem      sod" in text and "l1 error" in text
    files = sorted(os.listdir(out))
    assert "sod_final.vtk" in files and "sod_final.csv" in files and "sod_00000.vtk" in files
    assert len([f for f in files if f.endswith(".vtk")]) >= 3
    header, rows = read_csv(out / "sod_final.csv")
    assert header == ["x", "density", "momentum_x", "energy"]
    assert rows.shape == (20, 4) and np.all(np.diff(rows[:, 0]) > 0)
    info = parse_vtk(out / "sod_final.vtk")
    assert info["CELLS"][0] == 20 and info["POINTS"][0] == 40 and set(info["types"]) == {3}
    assert info["scalars"][:4] == ["density", "momentum_x", "energy", "level"]


def test_end_time_zero(tmp_path, capsys):
    path = sod_cfg(tmp_path, end=0.0)
    out = tmp_path / "zero"
    assert main(["solve", path, "--out", str(out)]) == 0
    assert "steps        0" in capsys.readouterr().out
    header, rows = read_csv(out / "sod_final.csv")
    assert rows[0, 1] == pytest.approx(1.0) and rows[-1, 1] == pytest.approx(0.125)


def test_vtk_two_quads(tmp_path):
    mesh = create_cartesian((0, 0), (2, 1), (2, 1))
    U = interpolate(Space("onb", 1, 2, 2), mesh, lambda x: np.stack([x[:, 0], 1 + x[:, 1]], axis=1))
    path = write_vtk(U, str(tmp_path / "two.vtk"), cell_data={"eta": [0.5, 1.5]}, names=["a", "b"])
    info = parse_vtk(path)
    assert info["POINTS"][0] == 8 and info["CELLS"][0] == 2 and info["types"] == [9, 9]
    assert info["scalars"] == ["a", "b", "level", "eta", "a_point", "b_point"]


def test_vtk_readable_by_meshio(tmp_path):
    meshio = pytest.importorskip("meshio")
    mesh = create_cartesian((0, 0), (2, 1), (2, 1))
    U = interpolate(Space("gauss", 2, 2), mesh, lambda x: x[:, :1] ** 2)
    path = write_vtk(U, str(tmp_path / "m.vtk"))
    m = meshio.read(path)
    assert m.points.shape == (8, 3)
    assert m.cells[0].type == "quad" and len(m.cells[0].data) == 2
    means = np.ravel(m.cell_data["u_h"][0])
    np.testing.assert_allclose(means, [1.0 / 3.0, 7.0 / 3.0], atol=1e-12)
    np.testing.assert_allclose(np.ravel(m.point_data["u_h_point"]), m.points[:, 0] ** 2, atol=1e-12)


def test_vtk_errors(tmp_path):
    mesh = create_cartesian((0,), (1,), (2,))
    U = interpolate(Space("onb", 1, 1), mesh, lambda x: x[:, :1])
    with pytest.raises(OSError):
        write_vtk(U, str(tmp_path / "nowhere" / "x.vtk"))
    with pytest.raises(ValueError):
        write_vtk(U, str(tmp_path / "x.vtk"), cell_data={"bad": [1.0]})


def test_study_is_deterministic(tmp_path, capsys):
    path = sod_cfg(tmp_path, end=0.05, counts=10)
    assert main(["study", path, "--levels", "2", "--out", str(tmp_path / "s1")]) == 0
    first = capsys.readouterr().out
    assert main(["study", path, "--levels", "2", "--out", str(tmp_path / "s2")]) == 0
    second = capsys.readouterr().out
    strip = lambda text: [line.rsplit(",", 1)[0] for line in text.strip().splitlines()]
    assert strip(first) == strip(second)
    with open(tmp_path / "s1" / "sod_convergence.csv") as fh:
        head = fh.readline().strip().split(",")
    assert head == ["level", "cells", "dofs", "l1_error", "l1_eoc", "l2_error", "l2_eoc", "runtime"]


def test_study_needs_exact_solution(tmp_path):
    path = write_cfg(tmp_path, "[problem]\nname = three_body\nend_time = 0.01\n[space]\norder = 1\n")
    assert main(["study", path, "--levels", "1"]) == 2


def test_module_entry_point(tmp_path):
    path = sod_cfg(tmp_path, end=0.0)
    res = subprocess.run([sys.executable, "-m", "rkdg", "solve", path, "--out", str(tmp_path / "o")],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    res = subprocess.run([sys.executable, "-m", "rkdg", "solve", str(tmp_path / "nope.ini")],
                         capture_output=True, text=True)
    assert res.returncode != 0 and "error" in res.stderr


def test_run_config_defaults():
    cfg = RunConfig("sod")
    assert cfg.order == 4 and cfg.cfl == 0.45 and cfg.limiter == "default"
