"""Cascadic multigrid for the GPE ground state, plus its exact-solve twin.

A correction step on level k+1 smooths the linearised source problem
``Â w = λ_k M u_k - (M_W + M_cubic(u_k)) u_k`` starting from the prolonged
``u_k``, then re-solves the nonlinear eigenproblem on the small space
spanned by the coarse basis and the smoothed function. The auxiliary
variant replaces smoothing by an exact solve and keeps both functions.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .eigensolve import (
    Eigenpair,
    ScfConfig,
    eigenpair_violations,
    make_pair,
    normalize,
    scf_loop,
    scf_solve,
    smallest_eig_dense,
)
from .fem import (
    FeSpace,
    assemble_cubic,
    assemble_laplace,
    assemble_mass,
    assemble_potential,
    prolongation_matrix,
)
from .mesh import Hierarchy
from .smoother import SmootherKind, cg_solve, smooth

RANK_TOL = 1e-12


class InvariantViolation(AssertionError):
    pass


@dataclass(frozen=True)
class Problem:
    """``-Δu + (γ1 x² + γ2 y²) u + ζ|u|²u = λu`` with ``u = 0`` on ∂Ω."""

    gamma: tuple = (1.0, 1.0)
    zeta: float = 1.0

    def __post_init__(self):
        if any(g < 0 for g in self.gamma):
            raise ValueError("gamma must be nonnegative")
        if self.zeta < 0:
            raise ValueError("zeta must be nonnegative")


@dataclass(frozen=True)
class Schedule:
    m_bar: float = 2.0
    sigma: float = 2.0
    beta: float = 2.0
    zeta_sched: float = 1.8
    alpha: float = 1.0

    def __post_init__(self):
        if self.m_bar < 1:
            raise ValueError("m_bar must be >= 1")
        if self.sigma < 1:
            raise ValueError("sigma must be >= 1")
        if self.zeta_sched <= 1:
            raise ValueError("zeta_sched must exceed 1")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")


def schedule_m(k: int, n: int, s: Schedule) -> int:
    """Smoothing steps on level k of n: ⌈m̄ σ^{1/α} β^{ζ(n-k)/α}⌉."""
    if not 2 <= k <= n:
        raise ValueError(f"level {k} outside 2..{n}")
    x = s.m_bar * s.sigma ** (1.0 / s.alpha) * s.beta ** (s.zeta_sched * (n - k) / s.alpha)
    return int(math.ceil(x - 1e-9 * x))


@dataclass(eq=False)
class LevelOps:
    space: FeSpace
    A: sp.csr_matrix
    M: sp.csr_matrix
    M_W: sp.csr_matrix

    @property
    def n_dofs(self) -> int:
        return self.space.n_dofs

    @property
    def h(self) -> float:
        return self.space.mesh.h


def level_operators(space: FeSpace, problem: Problem) -> LevelOps:
    return LevelOps(
        space, assemble_laplace(space), assemble_mass(space), assemble_potential(space, problem.gamma)
    )


class Discretization:
    """Lazily assembled operators and transfer matrices for a hierarchy."""

    def __init__(self, hierarchy: Hierarchy, problem: Problem):
        self.hierarchy = hierarchy
        self.problem = problem
        self._ops = {}
        self._from_coarse = {}
        self._step = {}

    @property
    def n_levels(self) -> int:
        return self.hierarchy.n_levels

    def ops(self, k: int) -> LevelOps:
        if k not in self._ops:
            self._ops[k] = level_operators(FeSpace(self.hierarchy.mesh(k)), self.problem)
        return self._ops[k]

    def step(self, k: int) -> sp.csr_matrix:
        """Interpolation from level k to level k + 1."""
        if k not in self._step:
            self._step[k] = prolongation_matrix(self.hierarchy, k, k + 1)
        return self._step[k]

    def from_coarse(self, k: int) -> sp.csr_matrix:
        """Interpolation from the coarse space V_H (level 0) to level k."""
        if k not in self._from_coarse:
            if k == 1:
                P = prolongation_matrix(self.hierarchy, 0, 1)
            else:
                P = (self.step(k - 1) @ self.from_coarse(k - 1)).tocsr()
            self._from_coarse[k] = P
        return self._from_coarse[k]


def correction_rhs(lam_k, u_k, M, M_W, M_cubic) -> np.ndarray:
    u = np.asarray(u_k, dtype=float)
    if M.shape[0] != u.shape[0]:
        raise ValueError("u_k must already live on the fine level")
    return lam_k * (M @ u) - (M_W + M_cubic) @ u


@dataclass
class CorrectionSpace:
    """Columns: prolonged coarse basis ``base`` (sparse) then ``extra`` (dense)."""

    base: sp.csr_matrix
    extra: np.ndarray
    dropped: list = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.base.shape[1] + self.extra.shape[1]

    def expand(self, c) -> np.ndarray:
        nb = self.base.shape[1]
        return self.base @ c[:nb] + self.extra @ c[nb:]

    def project(self, K) -> np.ndarray:
        KB = (K @ self.base).tocsr() if sp.issparse(K) else K @ self.base
        KE = K @ self.extra
        bb = np.asarray((self.base.T @ KB).todense()) if sp.issparse(KB) else self.base.T @ KB
        be = np.asarray(self.base.T @ KE)
        ee = self.extra.T @ KE
        out = np.block([[bb, be], [be.T, ee]])
        return 0.5 * (out + out.T)


def build_correction_space(P_H, columns, M, rtol: float = RANK_TOL) -> CorrectionSpace:
    """Append ``columns`` to ``P_H``, dropping numerically dependent ones.

    Each candidate is M-normalised and kept only if its Cholesky pivot (the
    Schur complement of the Gram matrix) exceeds ``rtol`` times the largest
    diagonal of the Gram matrix.
    """
    G = np.asarray((P_H.T @ (M @ P_H)).todense())
    L = np.linalg.cholesky(G) if G.size else np.zeros((0, 0))
    largest = float(G.diagonal().max()) if G.size else 0.0
    kept, dropped = [], []
    for j, col in enumerate(columns):
        col = np.asarray(col, dtype=float)
        nrm = math.sqrt(max(col @ (M @ col), 0.0))
        if nrm == 0.0:
            dropped.append(j)
            continue
        col = col / nrm
        Mc = M @ col
        g = np.concatenate([P_H.T @ Mc, [k @ Mc for k in kept]])
        l = np.linalg.solve(L, g) if L.size else g
        s = 1.0 - l @ l
        if s < rtol * max(largest, 1.0):
            dropped.append(j)
            continue
        kept.append(col)
        piv = math.sqrt(s)
        n = L.shape[0]
        L2 = np.zeros((n + 1, n + 1))
        L2[:n, :n] = L
        L2[n, :n] = l
        L2[n, n] = piv
        L = L2
    extra = np.column_stack(kept) if kept else np.zeros((P_H.shape[0], 0))
    return CorrectionSpace(P_H.tocsr(), extra, dropped)


@dataclass
class StepInfo:
    m: int
    varpi: int
    converged: bool
    smoothed: np.ndarray
    dropped: list
    cubic_assemblies: int


def solve_in_space(ops: LevelOps, V: CorrectionSpace, zeta: float, c0, cfg: ScfConfig):
    """Nonlinear eigenproblem restricted to ``V``; cubic term assembled on the fine mesh."""
    K_lin = V.project(ops.A + ops.M_W)
    M_s = V.project(ops.M)
    count = [0]

    def cubic_of(c):
        if zeta == 0:
            return np.zeros_like(K_lin)
        count[0] += 1
        return V.project(assemble_cubic(ops.space, V.expand(c), zeta))

    def orient_fine(c):
        u = V.expand(c)
        return -c if u[np.argmax(np.abs(u))] < 0 else c

    def eig(K, M, x):
        return smallest_eig_dense(K, M, x)

    _, c, info = scf_loop(K_lin, M_s, cubic_of, eig, c0, cfg, zeta, orient_fine)
    pair = make_pair(ops.A, ops.M, ops.M_W, ops.space, zeta, V.expand(c))
    return pair, info, count[0]


def _initial_coords(V: CorrectionSpace, M, u) -> np.ndarray:
    """Gram-solve coordinates of ``u`` in ``V`` (exact if ``u`` is a column)."""
    G = V.project(M)
    rhs = np.concatenate([V.base.T @ (M @ u), V.extra.T @ (M @ u)])
    return np.linalg.solve(G, rhs)


def one_correction_step(fine: LevelOps, P_H, P_prev, lam_k, u_k, m: int,
                        kind: SmootherKind, zeta: float, cfg: ScfConfig):
    """Smoothing-based correction from level k to level k + 1.

    ``P_H`` maps V_H into the fine level; ``P_prev`` maps level k into it.
    Returns ``(Eigenpair, StepInfo)``.
    """
    u_prol = P_prev @ np.asarray(u_k, dtype=float)
    C = assemble_cubic(fine.space, u_prol, zeta)
    rhs = correction_rhs(lam_k, u_prol, fine.M, fine.M_W, C)
    smoothed = smooth(fine.A, rhs, u_prol, m, kind)
    V = build_correction_space(P_H, [smoothed], fine.M)
    c0 = _initial_coords(V, fine.M, smoothed)
    pair, info, n_cubic = solve_in_space(fine, V, zeta, c0, cfg)
    return pair, StepInfo(m, info.iterations, info.converged, smoothed, V.dropped, n_cubic + 1)


def auxiliary_correction_step(fine: LevelOps, P_H, P_prev, lam_k, u_k, smoothed_cascadic,
                              zeta: float, cfg: ScfConfig, rtol: float = 1e-12):
    """Exact-solve correction; the space also holds the cascadic smoothed function."""
    u_prol = P_prev @ np.asarray(u_k, dtype=float)
    C = assemble_cubic(fine.space, u_prol, zeta)
    rhs = correction_rhs(lam_k, u_prol, fine.M, fine.M_W, C)
    exact, _, ok = cg_solve(fine.A, rhs, u_prol, rtol=rtol)
    if not ok:
        raise RuntimeError("auxiliary source solve did not reach the requested residual")
    columns = [exact] if smoothed_cascadic is None else [exact, smoothed_cascadic]
    V = build_correction_space(P_H, columns, fine.M)
    c0 = _initial_coords(V, fine.M, exact)
    pair, info, n_cubic = solve_in_space(fine, V, zeta, c0, cfg)
    return pair, StepInfo(0, info.iterations, info.converged, exact, V.dropped, n_cubic + 1)


@dataclass
class LevelRecord:
    level: int
    h: float
    N: int
    m_k: int
    lam: float
    varpi: int
    converged: bool
    work: int
    seconds: float
    dropped: list = field(default_factory=list)


@dataclass
class WorkReport:
    records: list

    @property
    def smoothing_work(self) -> int:
        return sum(r.work for r in self.records)

    @property
    def total_varpi(self) -> int:
        return sum(r.varpi for r in self.records)

    @property
    def N_final(self) -> int:
        return self.records[-1].N


@dataclass
class CascadicResult:
    pair: Eigenpair
    pairs: list
    smoothed: dict
    report: WorkReport

    @property
    def trace(self) -> list:
        return self.report.records


def check_pair(pair: Eigenpair, ops: LevelOps, zeta: float, where: str = ""):
    bad = eigenpair_violations(pair, ops.A, ops.M, ops.M_W, zeta)
    if bad:
        raise InvariantViolation(f"eigenpair invariants violated{where}: {', '.join(bad)}")


def direct_level_solve(disc: Discretization, k: int, cfg: ScfConfig, u0=None):
    ops = disc.ops(k)
    return scf_solve(ops.A, ops.M, ops.M_W, ops.space, disc.problem.zeta, u0, cfg, "sparse")


def cascadic_solve(disc: Discretization, schedule: Schedule, kind: SmootherKind = SmootherKind(),
                   scf_full: ScfConfig | None = None, scf_corr: ScfConfig | None = None,
                   n: int | None = None, m_of=None, first=None) -> CascadicResult:
    """Run the cascadic method on levels 1..n of ``disc``.

    ``m_of(k, n, ops)`` overrides the schedule; ``first`` reuses a level-1
    ``(Eigenpair, ScfInfo)``.
    """
    scf_full = scf_full or ScfConfig()
    scf_corr = scf_corr or ScfConfig(max_iter=3)
    n = disc.n_levels if n is None else n
    zeta = disc.problem.zeta
    t0 = time.perf_counter()
    pair, info = first if first is not None else direct_level_solve(disc, 1, scf_full)
    ops = disc.ops(1)
    check_pair(pair, ops, zeta, " on level 1")
    records = [LevelRecord(1, ops.h, ops.n_dofs, 0, pair.lam, info.iterations, info.converged,
                           0, time.perf_counter() - t0)]
    pairs, smoothed = [pair], {}
    for k in range(1, n):
        t0 = time.perf_counter()
        fine = disc.ops(k + 1)
        m = m_of(k + 1, n, fine) if m_of is not None else schedule_m(k + 1, n, schedule)
        kk = kind.resolved(fine.A)
        pair, step = one_correction_step(
            fine, disc.from_coarse(k + 1), disc.step(k), pair.lam, pair.coefficients,
            m, kk, zeta, scf_corr,
        )
        check_pair(pair, fine, zeta, f" on level {k + 1}")
        smoothed[k + 1] = step.smoothed
        pairs.append(pair)
        records.append(LevelRecord(k + 1, fine.h, fine.n_dofs, m, pair.lam, step.varpi,
                                   step.converged, m * fine.A.nnz, time.perf_counter() - t0,
                                   step.dropped))
    return CascadicResult(pair, pairs, smoothed, WorkReport(records))


def auxiliary_solve(disc: Discretization, smoothed: dict, scf_full: ScfConfig | None = None,
                    scf_corr: ScfConfig | None = None, n: int | None = None, first=None):
    """Exact-solve multilevel correction paired with a cascadic run's smoothed functions."""
    scf_full = scf_full or ScfConfig()
    scf_corr = scf_corr or ScfConfig()
    n = disc.n_levels if n is None else n
    zeta = disc.problem.zeta
    t0 = time.perf_counter()
    pair, info = first if first is not None else direct_level_solve(disc, 1, scf_full)
    ops = disc.ops(1)
    records = [LevelRecord(1, ops.h, ops.n_dofs, 0, pair.lam, info.iterations, info.converged,
                           0, time.perf_counter() - t0)]
    pairs = [pair]
    for k in range(1, n):
        t0 = time.perf_counter()
        fine = disc.ops(k + 1)
        pair, step = auxiliary_correction_step(
            fine, disc.from_coarse(k + 1), disc.step(k), pair.lam, pair.coefficients,
            smoothed.get(k + 1), zeta, scf_corr,
        )
        check_pair(pair, fine, zeta, f" on level {k + 1}")
        pairs.append(pair)
        records.append(LevelRecord(k + 1, fine.h, fine.n_dofs, 0, pair.lam, step.varpi,
                                   step.converged, 0, time.perf_counter() - t0, step.dropped))
    return CascadicResult(pair, pairs, {}, WorkReport(records))


def correct_to_fixed_point(fine: LevelOps, P_H, pair: Eigenpair, step, tol: float = 1e-12,
                           max_sweeps: int = 50) -> tuple:
    """Repeat a same-level correction ``step(lam, u) -> (pair, info)`` until λ stalls."""
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        new, _ = step(pair.lam, pair.coefficients)
        done = abs(new.lam - pair.lam) <= tol
        pair = new
        if done:
            break
    return pair, sweeps


def h1_distance(ops: LevelOps, x, y) -> float:
    d = np.asarray(x) - np.asarray(y)
    return math.sqrt(max(d @ (ops.A @ d) + d @ (ops.M @ d), 0.0))


def l2_distance(ops: LevelOps, x, y) -> float:
    d = np.asarray(x) - np.asarray(y)
    return math.sqrt(max(d @ (ops.M @ d), 0.0))


__all__ = [
    "CascadicResult",
    "CorrectionSpace",
    "Discretization",
    "LevelOps",
    "LevelRecord",
    "Problem",
    "Schedule",
    "StepInfo",
    "WorkReport",
    "auxiliary_correction_step",
    "auxiliary_solve",
    "build_correction_space",
    "cascadic_solve",
    "correct_to_fixed_point",
    "correction_rhs",
    "direct_level_solve",
    "h1_distance",
    "l2_distance",
    "level_operators",
    "normalize",
    "one_correction_step",
    "schedule_m",
    "solve_in_space",
]
