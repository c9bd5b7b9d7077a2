import math
import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cmgpe.harness import (
    COLUMNS,
    ConfigError,
    ErrorTable,
    StudyConfig,
    csv_to_rows,
    fit_slope,
    format_report,
    parse_config_text,
    run_study,
    table_to_csv,
)
from cmgpe.plots import emit_plots, loglog_svg


def test_fit_slope_examples():
    assert fit_slope([(0.5, 0.5), (0.25, 0.25)]) == pytest.approx(1.0)
    assert fit_slope([(0.5, 0.25), (0.25, 1 / 16)]) == pytest.approx(2.0)
    assert math.isnan(fit_slope([(0.5, 0.1)]))
    assert math.isnan(fit_slope([]))
    assert math.isnan(fit_slope([(0.5, 0.0), (0.25, 0.1)]))


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 4), st.floats(1e-3, 1e3), st.integers(2, 8))
def test_fit_slope_recovers_power_law(p, c, n):
    pts = [(2.0**-k, c * 2.0 ** (-k * p)) for k in range(1, n + 1)]
    assert fit_slope(pts) == pytest.approx(p, rel=1e-9)


def test_config_parsing():
    text = """
    # study
    cells-per-side = 5
    levels = 3
    gamma = 1, 2
    modes = cascadic, direct
    plots = false
    omega = none
    smoother = jacobi
    """
    vals = parse_config_text(text)
    assert vals == {"cells_per_side": 5, "levels": 3, "gamma": (1.0, 2.0),
                    "modes": ("cascadic", "direct"), "plots": False, "omega": None,
                    "smoother": "jacobi"}


@pytest.mark.parametrize("text", ["bogus = 1", "levels", "levels = two", "gamma = 1", "plots = maybe"])
def test_config_parse_errors(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


@pytest.mark.parametrize(
    "kw",
    [dict(levels=0), dict(cells_per_side=1), dict(gamma=(-1.0, 1.0)), dict(zeta=-1.0),
     dict(modes=("fast",)), dict(modes=()), dict(smoother="gmres"), dict(omega=2.0, smoother="jacobi"),
     dict(zeta_sched=0.5), dict(tol_lambda=0.0), dict(pre_refine=-1)],
)
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        StudyConfig(**kw).validate()


def test_schedule_alpha_follows_smoother():
    assert StudyConfig(smoother="cg").schedule().alpha == 1.0
    assert StudyConfig(smoother="sgs").schedule().alpha == 0.5


def test_csv_roundtrip():
    rows = [{"level": 2, "h": 0.1, "N": 81, "m_k": 4, "lambda": 22.123456789012345, "varpi": 2,
             "err_h1": 1 / 3, "err_l2": 1e-300, "err_lambda": float("nan"), "work": 1234, "seconds": 0.0}]
    back = csv_to_rows(table_to_csv(rows))
    assert back[0]["lambda"] == rows[0]["lambda"]
    assert back[0]["err_h1"] == rows[0]["err_h1"]
    assert back[0]["err_l2"] == rows[0]["err_l2"]
    assert math.isnan(back[0]["err_lambda"])
    assert back[0]["N"] == 81 and isinstance(back[0]["N"], int)
    assert table_to_csv(rows).splitlines()[0] == ",".join(COLUMNS)


def test_single_level_study(tmp_path):
    cfg = StudyConfig(cells_per_side=4, levels=1, modes=("cascadic", "auxiliary", "direct"),
                      out=str(tmp_path))
    res = run_study(cfg)
    for table in (res.cascadic, res.auxiliary):
        assert len(table.rows) == 1
        assert table.rows[0]["err_h1"] == table.rows[0]["err_lambda"] == 0.0
        assert all(math.isnan(v) for v in table.slopes.values())
    assert "nan" in format_report(res)
    svg = (tmp_path / "eigenvalue_errors.svg").read_text()
    assert "insufficient data" in svg


@pytest.fixture(scope="module")
def small_study(tmp_path_factory):
    out = tmp_path_factory.mktemp("study")
    cfg = StudyConfig(cells_per_side=4, levels=3, modes=("cascadic", "auxiliary", "direct"),
                      out=str(out), timing=False)
    return run_study(cfg), out


def test_study_artifacts(small_study):
    res, out = small_study
    names = set(os.listdir(out))
    assert {"errors.csv", "errors_auxiliary.csv", "trace.csv", "direct.csv", "report.txt",
            "eigenvalue_errors.svg", "eigenfunction_errors.svg"} <= names
    rows = csv_to_rows((out / "errors.csv").read_text())
    assert [r["level"] for r in rows] == [1, 2, 3]
    assert all(r["err_h1"] >= 0 and r["err_lambda"] >= 0 for r in rows)
    assert rows[1]["err_h1"] > 0
    svg = (out / "eigenfunction_errors.svg").read_text()
    assert 'data-xscale="log"' in svg and "slope 1" in svg and "slope 2" in svg


def test_study_rerun_is_byte_identical(small_study, tmp_path):
    res, out = small_study
    cfg = StudyConfig(cells_per_side=4, levels=3, modes=("cascadic", "auxiliary", "direct"),
                      out=str(tmp_path), timing=False)
    run_study(cfg)
    for name in ("errors.csv", "errors_auxiliary.csv", "trace.csv", "direct.csv",
                 "eigenvalue_errors.svg", "eigenfunction_errors.svg", "report.txt"):
        assert (tmp_path / name).read_bytes() == (out / name).read_bytes(), name


def test_direct_lambda_decreases_for_linear_problem(tmp_path):
    cfg = StudyConfig(cells_per_side=8, levels=3, gamma=(0.0, 0.0), zeta=0.0, modes=("direct",),
                      out=str(tmp_path))
    res = run_study(cfg)
    lam = [r["lambda"] for r in res.direct]
    assert all(a > b > 2 * math.pi**2 for a, b in zip(lam, lam[1:]))
    assert res.cascadic is None and res.primary() is None


def test_errors_available_without_direct_mode(tmp_path):
    res = run_study(StudyConfig(cells_per_side=4, levels=2, modes=("cascadic",), out=str(tmp_path)))
    assert res.cascadic.rows[1]["err_h1"] > 0
    assert not (tmp_path / "direct.csv").exists()


def test_failure_flushes_partial_trace(tmp_path, monkeypatch):
    import cmgpe.harness as H

    real = H.cascadic_solve
    calls = []

    def flaky(*a, **k):
        calls.append(1)
        if len(calls) > 1:
            raise RuntimeError("boom")
        return real(*a, **k)

    monkeypatch.setattr(H, "cascadic_solve", flaky)
    with pytest.raises(RuntimeError):
        run_study(StudyConfig(cells_per_side=4, levels=3, out=str(tmp_path)))
    assert (tmp_path / "trace.csv").exists()
    assert (tmp_path / "direct.csv").exists()


def test_loglog_svg_deterministic():
    series = {"a": [(0.5, 0.1), (0.25, 0.03)]}
    assert loglog_svg("t", "h", series) == loglog_svg("t", "h", series)
    assert "insufficient data" in loglog_svg("t", "h", {"a": [(0.5, 0.1)]})


def test_emit_plots_empty_table(tmp_path):
    table = ErrorTable([{"level": 1, "h": 0.5, "err_h1": 0.0, "err_l2": 0.0, "err_lambda": 0.0}])
    paths = emit_plots(table, str(tmp_path))
    assert len(paths) == 2
    assert all("insufficient data" in open(p).read() for p in paths)


def test_report_flags_dropped_and_capped(small_study):
    from dataclasses import replace

    res, _ = small_study
    trace = [dict(r) for r in res.trace]
    trace[1]["dropped"] = 1
    trace[2]["converged"] = False
    text = format_report(replace(res, trace=trace))
    assert "rank-deficient correction space" in text and "level 2" in text
    cap_line = next(l for l in text.splitlines() if "iteration cap" in l)
    assert "level 3" in cap_line
    assert "rank-deficient" not in format_report(res)
