import json

import pytest

from aniso_torsion import (
    BadParameter,
    ExperimentConfig,
    make_square,
    run_convergence,
    run_rectangle_limit,
    run_triangle_limit,
    save_body,
)
from aniso_torsion.cli import main
from aniso_torsion.experiments import run_bound_matrix


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(
        "# thin rectangles\n"
        "experiment = rect-limit\n"
        "norms = euclidean; quad:q11=1,q12=0,q22=4\n"
        "p = 2, 3\n"
        "eps = 0.2, 0.1\n"
        "continuation = off\n"
        "max-iters = 50\n"
    )
    cfg = ExperimentConfig.from_file(path, tol="1e-8")
    assert cfg.experiment == "rect-limit"
    assert cfg.norms == ("euclidean", "quad:q11=1,q12=0,q22=4")
    assert cfg.p == (2.0, 3.0)
    assert cfg.eps == (0.2, 0.1)
    assert cfg.continuation is False
    assert cfg.max_iters == 50
    assert cfg.tol == 1e-8
    assert cfg.mesh_h == pytest.approx(1 / 32)
    cfg.validate()


@pytest.mark.parametrize(
    "values",
    [
        {"experiment": "nope"},
        {"experiment": "rect-limit", "eps": "0.1, 0.2"},
        {"experiment": "rect-limit", "eps": "1.5"},
        {"experiment": "triangle-limit", "a_tri": "0.3, 0.8"},
        {"experiment": "bound-matrix", "shapes": "wulff; blob"},
        {"experiment": "bound-matrix", "p": "1.0"},
        {"experiment": "bound-matrix", "norms": "lr:r=0.5"},
        {"experiment": "bound-matrix", "h": "2"},
        {"experiment": "bound-matrix", "workers": "0"},
        {"experiment": "bound-matrix", "continuation": "maybe"},
        {"experiment": "bound-matrix", "tol": "fast"},
        {"colour": "blue"},
    ],
)
def test_config_fails_fast(values):
    with pytest.raises(BadParameter):
        ExperimentConfig.from_strings(values).validate()


def test_rectangle_limit_small():
    cfg = ExperimentConfig(eps=(0.2, 0.1, 0.05), p=(2.0,), norms=("euclidean",), h=1 / 16)
    rows, summary = run_rectangle_limit(cfg)
    assert summary["ok"]
    psi = [r["Psi"] for r in rows]
    assert psi[0] < psi[1] < psi[2] < 1 / 3


def test_rectangle_limit_quadratic_inradius():
    cfg = ExperimentConfig(eps=(0.1,), p=(2.0,), norms=("quad:q11=1,q12=0,q22=4",), h=1 / 8)
    rows, _ = run_rectangle_limit(cfg)
    assert rows[0]["R_F"] == pytest.approx(0.1)


def test_triangle_limit_columns():
    cfg = ExperimentConfig(a_tri=(0.3, 0.2), h=1 / 16)
    rows, summary = run_triangle_limit(cfg)
    assert rows[1]["M_ellipse"] == pytest.approx(0.0192)
    assert all(r["status"] == "ok" for r in rows)
    assert rows[0]["Phi"] > rows[1]["Phi"] > 1 / 3
    assert summary["Phi_decreasing"]


def test_convergence_small():
    cfg = ExperimentConfig(norms=("euclidean",), p=(2.0,), h=0.2, levels=3)
    rows, summary = run_convergence(cfg)
    errs = [r["rel_error"] for r in rows]
    assert errs[0] > errs[1] > errs[2]
    assert rows[-1]["order"] >= 0.9
    assert summary["ok"]


def test_bound_matrix_subset_and_error_rows():
    cfg = ExperimentConfig(norms=("euclidean",), shapes=("square",), p=(2.0,))
    rows, summary = run_bound_matrix(cfg)
    assert summary["ok"] and summary["rows"] == 1
    row = rows[0]
    assert 0.25 <= row["Phi"] <= 2 / 3
    # a budget of one Newton step cannot converge at p = 3: the row records it and the run goes on
    cfg = ExperimentConfig(norms=("euclidean",), shapes=("square", "wulff"), p=(3.0,), max_iters=1)
    rows, summary = run_bound_matrix(cfg)
    assert len(rows) == 2 and not summary["ok"]
    assert all(r["status"].startswith("NoConvergence") for r in rows)


def test_outputs_are_deterministic(tmp_path):
    bodies = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        cfg = ExperimentConfig(norms=("quad:q11=1,q12=0,q22=4",), shapes=("random", "henrot"), p=(2.0,), out=str(out))
        run_bound_matrix(cfg)
        bodies.append((out / "bound_matrix.csv").read_bytes())
        assert (out / "bound_matrix.json").exists()
        assert (out / "bound_matrix.dat").exists()
    assert bodies[0] == bodies[1]
    header = bodies[0].decode().splitlines()[0]
    assert header.startswith("# aniso_torsion table v1") and "seed=7" in header


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["convergence", "--norm", "euclidean", "--p", "2", "--h", "0.3", "--levels", "2"]) == 0
    assert json.loads(capsys.readouterr().out)["ok"]
    assert main(["rect-limit", "--eps", "0.1,0.2"]) == 2
    assert "eps" in capsys.readouterr().err
    cfg = tmp_path / "strict.cfg"
    cfg.write_text("norms = euclidean\nshapes = square\np = 2\np_tol = -1\n")
    assert main(["bound-matrix", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    summary = json.loads((tmp_path / "o" / "bound_matrix.json").read_text())
    assert summary["failures"][0]["failed"] == ["P_max"]


def test_cli_solve(tmp_path, capsys):
    save_body(make_square(0.5), tmp_path / "square.txt")
    code = main(["solve", str(tmp_path / "square.txt"), "--h", "0.05", "--out", str(tmp_path / "sq")])
    assert code == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["M"] == pytest.approx(0.0737, abs=1e-3)
    assert (tmp_path / "sq.txt").exists() and (tmp_path / "sq.json").exists()
    assert main(["solve", str(tmp_path / "square.txt"), "--h", "0.05", "--out", str(tmp_path / "x"), "--p", "1"]) == 2
