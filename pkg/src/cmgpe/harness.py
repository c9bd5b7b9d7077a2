"""Convergence studies: cascadic vs auxiliary vs direct solves.

Row k of a cascadic error table is the final eigenpair of a cascadic run
with n = k levels, compared with the direct solve on level k. This is the
convergence behaviour the schedule is designed for: m_k depends on n - k,
so intermediate iterates of a single run are not final approximations.
Auxiliary rows come from one run over all levels.
"""
from __future__ import annotations

import csv
import io
import math
import os
import time
from dataclasses import dataclass, field, fields

import numpy as np

from .cascadic import (
    Discretization,
    Problem,
    Schedule,
    auxiliary_solve,
    cascadic_solve,
    check_pair,
    direct_level_solve,
    h1_distance,
    l2_distance,
)
from .eigensolve import ScfConfig
from .mesh import build_hierarchy, build_structured_unit_square, read_mesh
from .smoother import SmootherKind

MODES = ("cascadic", "auxiliary", "direct")
COLUMNS = ("level", "h", "N", "m_k", "lambda", "varpi", "err_h1", "err_l2", "err_lambda", "work", "seconds")
TRACE_COLUMNS = ("level", "h", "N", "m_k", "lambda", "varpi", "converged", "dropped", "work", "seconds")


class ConfigError(ValueError):
    pass


@dataclass
class StudyConfig:
    cells_per_side: int = 6
    mesh: str | None = None
    pre_refine: int = 0
    levels: int = 4
    gamma: tuple = (1.0, 1.0)
    zeta: float = 1.0
    smoother: str = "cg"
    omega: float | None = None
    tau: float | None = None
    mbar: float = 2.0
    sigma: float = 2.0
    zeta_sched: float = 1.8
    tol_lambda: float = 1e-10
    max_iter: int = 50
    corr_max_iter: int = 3
    inner_tol: float = 1e-10
    modes: tuple = ("cascadic", "direct")
    out: str = "results"
    plots: bool = True
    timing: bool = True
    seed: int = 0

    def validate(self) -> "StudyConfig":
        if self.levels < 1:
            raise ConfigError("levels must be >= 1")
        if self.pre_refine < 0:
            raise ConfigError("pre_refine must be >= 0")
        if self.mesh is None and self.cells_per_side < 2:
            raise ConfigError("cells_per_side must be >= 2")
        if len(self.gamma) != 2 or any(g < 0 for g in self.gamma):
            raise ConfigError("gamma must be two nonnegative numbers")
        if self.zeta < 0:
            raise ConfigError("zeta must be nonnegative")
        bad = [m for m in self.modes if m not in MODES]
        if bad or not self.modes:
            raise ConfigError(f"modes must be a nonempty subset of {MODES}, got {self.modes}")
        try:
            self.smoother_kind()
            self.schedule()
            self.scf_full()
            self.scf_corr()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self

    def smoother_kind(self) -> SmootherKind:
        return SmootherKind(self.smoother, self.omega, self.tau)

    def schedule(self) -> Schedule:
        return Schedule(self.mbar, self.sigma, 2.0, self.zeta_sched, self.smoother_kind().alpha)

    def problem(self) -> Problem:
        return Problem(tuple(float(g) for g in self.gamma), float(self.zeta))

    def scf_full(self) -> ScfConfig:
        return ScfConfig(self.tol_lambda, self.max_iter, self.inner_tol)

    def scf_corr(self) -> ScfConfig:
        return ScfConfig(self.tol_lambda, self.corr_max_iter, self.inner_tol)


def _parse_value(name: str, raw: str):
    kind = {f.name: f.type for f in fields(StudyConfig)}.get(name)
    if kind is None:
        raise ConfigError(f"unknown config key {name!r}")
    raw = raw.strip()
    try:
        if name == "gamma":
            vals = tuple(float(v) for v in raw.replace(" ", "").split(","))
            if len(vals) != 2:
                raise ValueError("expected two comma-separated values")
            return vals
        if name == "modes":
            return tuple(m.strip() for m in raw.split(",") if m.strip())
        if name in ("plots", "timing"):
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(f"not a boolean: {raw}")
            return low in ("true", "1", "yes")
        if name in ("mesh", "out", "smoother"):
            return raw
        if name in ("omega", "tau"):
            return None if raw.lower() in ("", "none") else float(raw)
        if name in ("cells_per_side", "pre_refine", "levels", "max_iter", "corr_max_iter", "seed"):
            return int(raw)
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {exc}") from None


def parse_config_text(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment; dashes in keys allowed."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = line.split("=", 1)
        key = key.strip().replace("-", "_")
        out[key] = _parse_value(key, raw)
    return out


@dataclass
class ErrorTable:
    rows: list
    slopes: dict = field(default_factory=dict)

    def column(self, name) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)

    def compute_slopes(self) -> "ErrorTable":
        tail = [r for r in self.rows if r["level"] >= 2]
        for name in ("err_h1", "err_l2", "err_lambda"):
            self.slopes[name] = fit_slope([(r["h"], r[name]) for r in tail])
        return self


def fit_slope(points) -> float:
    """Least-squares slope of log e against log h; nan for fewer than 2 points."""
    pts = [(float(h), float(e)) for h, e in points]
    if len(pts) < 2:
        return float("nan")
    if any(h <= 0 or e <= 0 for h, e in pts):
        return float("nan")
    x = np.log([h for h, _ in pts])
    y = np.log([e for _, e in pts])
    if np.ptp(x) == 0:
        return float("nan")
    xm = x - x.mean()
    return float(xm @ (y - y.mean()) / (xm @ xm))


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return f"{v:.17g}"


def table_to_csv(rows, columns=COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def csv_to_rows(text: str) -> list:
    reader = csv.DictReader(io.StringIO(text))
    rows = []
    for rec in reader:
        row = {}
        for k, v in rec.items():
            row[k] = int(v) if k in ("level", "N", "m_k", "varpi", "work", "converged", "dropped") else float(v)
        rows.append(row)
    return rows


@dataclass
class StudyResult:
    config: StudyConfig
    cascadic: ErrorTable | None
    auxiliary: ErrorTable | None
    direct: list
    trace: list

    def primary(self) -> ErrorTable | None:
        return self.cascadic or self.auxiliary


def load_coarse_mesh(cfg: StudyConfig):
    if cfg.mesh:
        with open(cfg.mesh) as f:
            return read_mesh(f.read())
    return build_structured_unit_square(cfg.cells_per_side)


def _error_row(disc, k, pair, ref, m_k, varpi, work, seconds):
    ops = disc.ops(k)
    if ref is None:
        e1 = e0 = el = float("nan")
    else:
        e1 = h1_distance(ops, pair.coefficients, ref.coefficients)
        e0 = l2_distance(ops, pair.coefficients, ref.coefficients)
        el = abs(pair.lam - ref.lam)
    return {
        "level": k, "h": ops.h, "N": ops.n_dofs, "m_k": m_k, "lambda": pair.lam,
        "varpi": varpi, "err_h1": e1, "err_l2": e0, "err_lambda": el,
        "work": work, "seconds": seconds,
    }


def run_study(cfg: StudyConfig, write: bool = True, log=None) -> StudyResult:
    """Build the hierarchy, run the requested modes and tabulate errors."""
    cfg.validate()
    say = log or (lambda msg: None)
    hierarchy = build_hierarchy(load_coarse_mesh(cfg), cfg.pre_refine, cfg.levels)
    disc = Discretization(hierarchy, cfg.problem())
    schedule, kind = cfg.schedule(), cfg.smoother_kind()
    scf_full, scf_corr = cfg.scf_full(), cfg.scf_corr()
    zeta = disc.problem.zeta
    n = cfg.levels
    clock = time.perf_counter if cfg.timing else (lambda: 0.0)
    partial = {"direct": [], "trace": []}

    try:
        t0 = clock()
        first = direct_level_solve(disc, 1, scf_full)
        t_first = clock() - t0
        direct = [None] * n
        direct[0] = first[0]
        direct_rows = []
        # direct solves are the reference for every error table, so they run
        # whenever any mode is requested; the direct mode only adds direct.csv
        pair, info = first
        direct_rows.append({"level": 1, "h": disc.ops(1).h, "N": disc.ops(1).n_dofs,
                            "lambda": pair.lam, "varpi": info.iterations, "seconds": t_first})
        for k in range(2, n + 1):
            t0 = clock()
            warm = disc.step(k - 1) @ direct[k - 2].coefficients
            pair, info = direct_level_solve(disc, k, scf_full, warm)
            check_pair(pair, disc.ops(k), zeta, f" (direct, level {k})")
            direct[k - 1] = pair
            direct_rows.append({"level": k, "h": disc.ops(k).h, "N": disc.ops(k).n_dofs,
                                "lambda": pair.lam, "varpi": info.iterations,
                                "seconds": clock() - t0})
            partial["direct"] = direct_rows
            say(f"direct level {k}: lambda={pair.lam:.12f} scf={info.iterations}")

        casc_table = aux_table = None
        trace = []
        smoothed = {}
        if "cascadic" in cfg.modes or "auxiliary" in cfg.modes:
            t0 = clock()
            full = cascadic_solve(disc, schedule, kind, scf_full, scf_corr, n, first=first)
            full_time = clock() - t0
            smoothed = full.smoothed
            trace = [
                {"level": r.level, "h": r.h, "N": r.N, "m_k": r.m_k, "lambda": r.lam,
                 "varpi": r.varpi, "converged": r.converged, "dropped": len(r.dropped), "work": r.work,
                 "seconds": r.seconds if cfg.timing else 0.0}
                for r in full.trace
            ]
            partial["trace"] = trace
        if "cascadic" in cfg.modes:
            rows = []
            for k in range(1, n + 1):
                if k == n:
                    res, secs = full, full_time + t_first
                else:
                    t0 = clock()
                    res = cascadic_solve(disc, schedule, kind, scf_full, scf_corr, k, first=first)
                    secs = clock() - t0 + t_first
                last = res.trace[-1]
                rows.append(_error_row(disc, k, res.pair, direct[k - 1], last.m_k, last.varpi,
                                       res.report.smoothing_work, secs))
                say(f"cascadic n={k}: lambda={res.pair.lam:.12f}")
            casc_table = ErrorTable(rows).compute_slopes()
        if "auxiliary" in cfg.modes:
            # exact-solve oracle: correction spaces iterate SCF to full tolerance
            aux = auxiliary_solve(disc, smoothed, scf_full, scf_full, n, first=first)
            rows = [
                _error_row(disc, r.level, p, direct[r.level - 1], 0, r.varpi, 0,
                           r.seconds if cfg.timing else 0.0)
                for r, p in zip(aux.trace, aux.pairs)
            ]
            aux_table = ErrorTable(rows).compute_slopes()
    except Exception:
        if write:
            os.makedirs(cfg.out, exist_ok=True)
            if partial["trace"]:
                _write(os.path.join(cfg.out, "trace.csv"), table_to_csv(partial["trace"], TRACE_COLUMNS))
            if partial["direct"]:
                _write(os.path.join(cfg.out, "direct.csv"),
                       table_to_csv(partial["direct"], ("level", "h", "N", "lambda", "varpi", "seconds")))
        raise

    if "direct" not in cfg.modes:
        direct_rows = []
    result = StudyResult(cfg, casc_table, aux_table, direct_rows, trace)
    if write:
        write_artifacts(result)
    return result


def _write(path, text):
    with open(path, "w", newline="") as f:
        f.write(text)


def format_report(result: StudyResult) -> str:
    cfg = result.config
    lines = [
        "cascadic multigrid study",
        f"mesh: {cfg.mesh or f'structured {cfg.cells_per_side}x{cfg.cells_per_side}'}"
        f"  pre_refine={cfg.pre_refine}  levels={cfg.levels}",
        f"gamma={cfg.gamma}  zeta={cfg.zeta}  smoother={cfg.smoother}"
        f"  mbar={cfg.mbar} sigma={cfg.sigma} zeta_sched={cfg.zeta_sched}",
        f"modes: {','.join(cfg.modes)}",
        "",
    ]
    for name, table in (("cascadic", result.cascadic), ("auxiliary", result.auxiliary)):
        if table is None:
            continue
        lines.append(f"[{name}] errors against per-level direct solves")
        lines.append(f"{'level':>5} {'h':>10} {'N':>7} {'lambda':>18} {'err_h1':>10} {'err_l2':>10} {'err_lam':>10}")
        for r in table.rows:
            lines.append(
                f"{r['level']:>5} {r['h']:>10.4e} {r['N']:>7} {r['lambda']:>18.12f}"
                f" {r['err_h1']:>10.3e} {r['err_l2']:>10.3e} {r['err_lambda']:>10.3e}"
            )
        lines.append("slopes: " + "  ".join(f"{k}={v:.3f}" for k, v in table.slopes.items()))
        lines.append("")
    flagged = [f"level {r['level']}" for r in result.trace if r.get("dropped")]
    if flagged:
        lines.append("rank-deficient correction space (smoothed function dropped): " + ", ".join(flagged))
    unconverged = [f"level {r['level']}" for r in result.trace if not r["converged"]]
    if unconverged:
        lines.append("correction SCF hit its iteration cap: " + ", ".join(unconverged))
    if result.direct:
        lines.append("[direct] " + "  ".join(f"L{r['level']}:{r['lambda']:.12f}" for r in result.direct))
    return "\n".join(lines) + "\n"


def write_artifacts(result: StudyResult):
    from .plots import emit_plots

    cfg = result.config
    os.makedirs(cfg.out, exist_ok=True)
    if result.cascadic is not None:
        _write(os.path.join(cfg.out, "errors.csv"), table_to_csv(result.cascadic.rows))
    if result.auxiliary is not None:
        _write(os.path.join(cfg.out, "errors_auxiliary.csv"), table_to_csv(result.auxiliary.rows))
    if result.trace:
        _write(os.path.join(cfg.out, "trace.csv"), table_to_csv(result.trace, TRACE_COLUMNS))
    if result.direct:
        _write(os.path.join(cfg.out, "direct.csv"),
               table_to_csv(result.direct, ("level", "h", "N", "lambda", "varpi", "seconds")))
    _write(os.path.join(cfg.out, "report.txt"), format_report(result))
    table = result.primary()
    if cfg.plots and table is not None:
        emit_plots(table, cfg.out)
