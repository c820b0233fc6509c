import csv
import re

import numpy as np
import pytest

from opioid_residence.cli import main
from opioid_residence.io import emit_svg_lineplot


def _run(tmp_path, *argv, config=None):
    args = list(argv) + ["--out", str(tmp_path / "out")]
    if config is not None:
        p = tmp_path / "run.ini"
        p.write_text(config)
        args += ["--config", str(p)]
    return main(args)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_equilibrium(tmp_path, capsys):
    assert _run(tmp_path, "equilibrium") == 0
    head, row = _rows(tmp_path / "out" / "equilibrium.csv")
    assert head == ["x1", "x2", "x3", "z", "R0"]
    assert float(row[0]) == pytest.approx(3.007288 / 3.157288, abs=1e-15)
    assert float(row[4]) == pytest.approx(0.0766, abs=5e-5)
    assert "R0" in capsys.readouterr().out


def test_linearize_roundtrip(tmp_path):
    assert _run(tmp_path, "linearize") == 0
    rows = _rows(tmp_path / "out" / "jacobian.csv")
    assert rows[0] == ["c1", "c2", "c3"]
    A = np.array(rows[1:], dtype=float)
    m = tmp_path / "A.csv"
    m.write_text("\n".join(",".join(repr(float(v)) for v in r) for r in A) + "\n")
    first = (tmp_path / "out" / "eigenvalues.csv").read_bytes()
    assert main(["linearize", "--matrix", str(m), "--out", str(tmp_path / "o2")]) == 0
    assert (tmp_path / "o2" / "eigenvalues.csv").read_bytes() == first
    ev = np.array(_rows(tmp_path / "out" / "eigenvalues.csv")[1:], dtype=float)
    np.testing.assert_allclose(np.sort(ev[:, 0]), [-3.157288, -1.03310045, -0.03230858], atol=1e-7)


def test_linearize_identity(tmp_path):
    assert _run(tmp_path, "linearize", "--identity") == 0
    ev = np.array(_rows(tmp_path / "out" / "eigenvalues.csv")[1:], dtype=float)
    np.testing.assert_array_equal(ev, [[1, 0]] * 3)


def test_riccati_outputs_feed_back(tmp_path):
    assert _run(tmp_path, "riccati") == 0
    out = tmp_path / "out"
    K = np.loadtxt(out / "K.csv", delimiter=",")
    assert K.shape == (2, 3)
    P = np.loadtxt(out / "P.csv", delimiter=",")
    np.testing.assert_allclose(K, -np.array([[0.01, 0, 0], [0, 0, 0.001]]) @ P / 1e-3, rtol=1e-12)
    cfg = f"[control]\npolicy = linear\ngain = {out / 'K.csv'}\n[sde]\nt_max = 1\nepsilon_noise = 0\n"
    assert _run(tmp_path, "simulate", config=cfg) == 0


def test_simulate_noiseless_equilibrium_is_constant(tmp_path):
    cfg = "[sde]\nepsilon_noise = 0\nt_max = 5\ndt = 0.01\n"
    assert _run(tmp_path, "simulate", "--stop", config=cfg) == 0
    rows = _rows(tmp_path / "out" / "trajectory.csv")
    assert rows[0] == ["t", "x1", "x2", "x3", "z"]
    states = np.array(rows[1:], dtype=float)
    assert states.shape == (501, 5)
    assert np.all(states[:, 1:] == states[0, 1:])
    ex = _rows(tmp_path / "out" / "exit.csv")
    assert ex[1][1] == "1"


def test_exitstats_compare_is_byte_deterministic(tmp_path):
    cfg = "[sde]\nt_max = 20\n[ensemble]\nn_paths = 200\n[control]\ngain = reported\n"
    assert _run(tmp_path, "exitstats", "--compare", "--seed", "3", config=cfg) == 0
    out = tmp_path / "out"
    names = ["compare.csv", "controlled_exit_times.csv", "uncontrolled_survival.csv", "controlled_mean.csv"]
    first = {n: (out / n).read_bytes() for n in names}
    assert _rows(out / "compare.csv")[0][0] == "variant"
    assert main(["exitstats", "--compare", "--seed", "3", "--workers", "3",
                 "--config", str(tmp_path / "run.ini"), "--out", str(tmp_path / "again")]) == 0
    for n in names:
        assert (tmp_path / "again" / n).read_bytes() == first[n]


def test_quasipotential_on_box(tmp_path):
    cfg = "[domain]\nkind = box\nlower = -1,-1,-1\nupper = 1,1,1\n"
    P = tmp_path / "P.csv"
    P.write_text("1,0,0\n0,1,0\n0,0,1\n")
    assert _run(tmp_path, "quasipotential", "--P", str(P), config=cfg) == 0
    head, row = _rows(tmp_path / "out" / "phi.csv")
    assert head[0] == "phi" and float(row[0]) == 0.5


def test_quasipotential_center_on_simplex_boundary_is_invalid(tmp_path):
    assert _run(tmp_path, "quasipotential") == 2


def test_eigenrate(tmp_path):
    cfg = "[grid]\nn1 = 9\nn2 = 9\nn3 = 9\nepsilon_noise = 0.1\n[control]\npolicy = linear\ngain = reported\n"
    assert _run(tmp_path, "eigenrate", "--psi", config=cfg) == 0
    head, row = _rows(tmp_path / "out" / "lambda.csv")
    assert head == ["lambda", "residual", "iterations", "psi_min"]
    assert float(row[0]) > 0 and float(row[3]) > 0
    assert len(_rows(tmp_path / "out" / "psi.csv")) == 7**3 + 1


@pytest.mark.parametrize(
    "config",
    [
        "[params]\nbeta = -1\n",
        "[params]\nunknown = 1\n",
        "[nosuch]\n",
        "[sde]\ndt = 0\n",
        "[sde]\ndt = abc\n",
        "[control]\ngamma_tilde = 0\n",
        "[control]\npolicy = optimal\n",
        "[ensemble]\nn_paths = 0\n",
        "[ensemble]\nfit_lo = 1\n",
        "[domain]\nkind = box\nlower = 0,0\nupper = 1,1\n",
        "[grid]\nn1 = 2\n",
        "[params]\ngamma = 0.1\n",
    ],
)
def test_invalid_config_exit_code(tmp_path, config, capsys):
    assert _run(tmp_path, "equilibrium", config=config) == 2
    assert "error" in capsys.readouterr().err


def test_missing_config_and_bad_seed(tmp_path):
    assert main(["equilibrium", "--config", str(tmp_path / "none.ini")]) == 2
    assert _run(tmp_path, "equilibrium", "--seed", "-1") == 2


def test_plot_missing_column(tmp_path):
    c = tmp_path / "d.csv"
    c.write_text("t,a\n0,1\n1,2\n")
    assert _run(tmp_path, "plot", "--csv", str(c), "--y", "b") == 2
    assert _run(tmp_path, "plot", "--csv", str(tmp_path / "missing.csv")) == 2


# --- SVG -----------------------------------------------------------------------------

def test_svg_two_points(tmp_path):
    c = tmp_path / "d.csv"
    c.write_text("t,a\n0,1\n1,2\n")
    emit_svg_lineplot(c, "t", ["a"], tmp_path / "p.svg")
    svg = (tmp_path / "p.svg").read_text()
    assert svg.count("<polyline") == 1
    pts = re.search(r'points="([^"]+)"', svg).group(1).split()
    assert len(pts) == 2


def test_svg_is_deterministic_and_has_one_series_per_column(tmp_path):
    c = tmp_path / "d.csv"
    t = np.linspace(0, 1, 50)
    rows = ["t,x1,x2,x3,z"] + [",".join(repr(float(u)) for u in (v, np.sin(v), v * v, 1 - v, 0.5)) for v in t]
    c.write_text("\n".join(rows) + "\n")
    assert _run(tmp_path, "plot", "--csv", str(c), "--output", str(tmp_path / "a.svg")) == 0
    assert _run(tmp_path, "plot", "--csv", str(c), "--output", str(tmp_path / "b.svg")) == 0
    a = (tmp_path / "a.svg").read_bytes()
    assert a == (tmp_path / "b.svg").read_bytes()
    assert a.decode().count("<polyline") == 4
