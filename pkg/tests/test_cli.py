import pytest

from cmgpe.cli import EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, main


def test_solve_success(tmp_path, capsys):
    code = main(["solve", "--cells-per-side", "4", "--levels", "2", "--out", str(tmp_path),
                 "--no-plots", "-q"])
    assert code == EXIT_OK
    assert "slopes" in capsys.readouterr().out
    assert (tmp_path / "errors.csv").exists()
    assert not (tmp_path / "eigenvalue_errors.svg").exists()


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "study.cfg"
    cfg.write_text("cells_per_side = 4\nlevels = 2\nsmoother = sgs\nzeta = 0\n")
    code = main(["solve", "--config", str(cfg), "--smoother", "jacobi", "--omega", "0.6",
                 "--out", str(tmp_path / "o"), "-q"])
    assert code == EXIT_OK
    assert "smoother=jacobi" in capsys.readouterr().out


@pytest.mark.parametrize(
    "argv",
    [["--levels", "0"], ["--zeta", "-1"], ["--smoother", "ssor", "--omega", "3"], ["--config", "/nonexistent.cfg"],
     ["--modes", "nope"]],
)
def test_validation_errors_exit_one(argv, tmp_path, capsys):
    assert main(["solve", "--out", str(tmp_path), "-q", *argv]) == EXIT_CONFIG
    assert "configuration error" in capsys.readouterr().err


def test_bad_mesh_file_exit_one(tmp_path, capsys):
    bad = tmp_path / "bad.mesh"
    bad.write_text("3 1\n0 0\n1 0\n2 0\n0 1 2\n")
    assert main(["solve", "--mesh", str(bad), "--out", str(tmp_path), "-q"]) == EXIT_CONFIG


def test_mesh_file_runs(tmp_path):
    from cmgpe.mesh import build_structured_unit_square, write_mesh

    m = tmp_path / "sq.mesh"
    m.write_text(write_mesh(build_structured_unit_square(4)))
    assert main(["solve", "--mesh", str(m), "--levels", "2", "--out", str(tmp_path / "o"), "-q"]) == EXIT_OK


def test_solver_failure_exit_two(tmp_path, monkeypatch, capsys):
    import cmgpe.harness as H

    def boom(*a, **k):
        raise RuntimeError("no convergence")

    monkeypatch.setattr(H, "direct_level_solve", boom)
    assert main(["solve", "--cells-per-side", "4", "--levels", "2", "--out", str(tmp_path), "-q"]) == EXIT_SOLVER
    assert "solver failure" in capsys.readouterr().err


def test_check_command(capsys):
    assert main(["check"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.count("[PASS]") >= 10 and "[FAIL]" not in out
