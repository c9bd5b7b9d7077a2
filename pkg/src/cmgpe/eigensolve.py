"""Smallest eigenpairs of the discrete GPE problem.

Linear generalized eigenproblems ``K x = λ M x`` are solved densely
(Cholesky + symmetric eigensolver) on small spaces and by inverse iteration
with inner CG on full FE spaces. The nonlinearity is handled by a
self-consistent field loop that freezes the density ``|u|²``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .fem import FeFunction, FeSpace, assemble_cubic
from .smoother import cg_solve

NORM_TOL = 1e-12
CONSISTENCY_TOL = 1e-10


class EigenSolveError(RuntimeError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []


class ScfConvergenceError(RuntimeError):
    """Raised by strict SCF solves; carries the last iterate."""

    def __init__(self, message, pair, info):
        super().__init__(message)
        self.pair = pair
        self.info = info


@dataclass(frozen=True, eq=False)
class Eigenpair:
    lam: float
    u: FeFunction

    @property
    def coefficients(self) -> np.ndarray:
        return self.u.coefficients


@dataclass
class ScfConfig:
    tol_lambda: float = 1e-10
    max_iter: int = 50
    inner_tol: float = 1e-10

    def __post_init__(self):
        if self.tol_lambda <= 0:
            raise ValueError("tol_lambda must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.inner_tol <= 0:
            raise ValueError("inner_tol must be positive")


@dataclass
class ScfInfo:
    iterations: int
    converged: bool
    history: list = field(default_factory=list)
    mixing: bool = False


def orient(x: np.ndarray) -> np.ndarray:
    """Flip sign so the entry of largest magnitude is positive."""
    return -x if x[np.argmax(np.abs(x))] < 0 else x


def normalize(x, M) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    nrm = np.sqrt(x @ (M @ x))
    if not nrm > 0:
        raise ValueError("cannot normalize a zero vector")
    return x / nrm


def bubble_guess(space: FeSpace) -> np.ndarray:
    return space.interpolate(lambda x, y: 16.0 * x * (1 - x) * y * (1 - y))


def smallest_eig_dense(K, M, x0=None):
    """Smallest eigenpair of the pencil ``(K, M)`` via Cholesky of ``M``.

    The eigenvector is M-normalised; if ``x0`` is given its sign is chosen so
    that ``x' M x0 >= 0``.
    """
    K = np.asarray(K.toarray() if sp.issparse(K) else K, dtype=float)
    M = np.asarray(M.toarray() if sp.issparse(M) else M, dtype=float)
    L = la.cholesky(M, lower=True)
    tmp = la.solve_triangular(L, K, lower=True)
    C = la.solve_triangular(L, tmp.T, lower=True)
    w, v = la.eigh(C, subset_by_index=[0, 0])
    x = la.solve_triangular(L.T, v[:, 0], lower=False)
    x = x / np.sqrt(x @ (M @ x))
    if x0 is not None:
        if x @ (M @ np.asarray(x0, dtype=float)) < 0:
            x = -x
    else:
        x = orient(x)
    return float(w[0]), x


def smallest_eig_sparse(K, M, x0, tol: float = 1e-10, max_iter: int = 1000, res_tol: float | None = None):
    """Inverse iteration ``K y = M x`` with warm-started inner CG.

    Stops once the Rayleigh quotient changes by at most ``tol`` and the
    relative eigen-residual ``‖Kx - ρMx‖ / ‖Kx‖`` is at most ``res_tol``
    (defaults to ``tol``).
    """
    if res_tol is None:
        res_tol = tol
    inner_rtol = max(min(tol, res_tol) / 10.0, 1e-14)
    x = normalize(x0, M)
    Kx = K @ x
    rho = float(x @ Kx)
    trace = []
    for it in range(1, max_iter + 1):
        y, n_cg, ok = cg_solve(K, M @ x, x / rho, rtol=inner_rtol)
        if not ok:
            trace.append((it, rho, n_cg, "stagnated"))
            raise EigenSolveError(
                f"inner CG stagnated at outer step {it} after {n_cg} iterations", trace
            )
        if y @ (M @ x) < 0:
            y = -y
        x = normalize(y, M)
        Kx = K @ x
        rho_new = float(x @ Kx)
        res = np.linalg.norm(Kx - rho_new * (M @ x)) / np.linalg.norm(Kx)
        trace.append((it, rho_new, n_cg, res))
        done = abs(rho_new - rho) <= tol and res <= res_tol
        rho = rho_new
        if done:
            return rho, x, it
    raise EigenSolveError(f"inverse iteration did not converge in {max_iter} steps", trace)


def _alternating(increments, window=6):
    if len(increments) < window:
        return False
    s = np.sign(increments[-window:])
    return bool(np.all(s[1:] * s[:-1] < 0))


def scf_loop(K_lin, M, cubic_of, eig, u0, cfg: ScfConfig, zeta: float, orient_fn=orient):
    """Self-consistent field iteration on a generic coordinate space.

    ``cubic_of(x)`` returns the frozen cubic matrix at ``x`` in the same
    coordinates; ``eig(K, M, x)`` returns the smallest pair warm-started at
    ``x``. The eigenvalue sequence is the nonlinear Rayleigh quotient
    ``x'(K_lin + C(x))x`` of the normalised iterates, starting from ``u0``.
    """
    x = orient_fn(normalize(u0, M))
    C = cubic_of(x)
    lam = float(x @ ((K_lin + C) @ x))
    history = [lam]
    mixing = False
    C_used = C
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        C_used = 0.5 * (C + C_used) if mixing else C
        _, y = eig(K_lin + C_used, M, x)
        x = orient_fn(normalize(y, M))
        C = cubic_of(x)
        lam_new = float(x @ ((K_lin + C) @ x))
        history.append(lam_new)
        step = abs(lam_new - lam)
        lam = lam_new
        if zeta == 0 or step <= cfg.tol_lambda:
            converged = True
            break
        if not mixing and _alternating(np.diff(history)):
            mixing = True
    return lam, x, ScfInfo(it, converged, history, mixing)


def nonlinear_rayleigh(A, M_W, space, zeta, x) -> float:
    C = assemble_cubic(space, x, zeta)
    return float(x @ ((A + M_W + C) @ x))


def scf_solve(A, M, M_W, space: FeSpace, zeta: float, u0=None, cfg: ScfConfig | None = None,
              backend: str = "sparse", strict: bool = True):
    """Ground state of the discrete GPE on the whole space ``space``.

    Returns ``(Eigenpair, ScfInfo)``. With ``strict`` a non-converged loop
    raises :class:`ScfConvergenceError` carrying the last iterate.
    """
    cfg = cfg or ScfConfig()
    if u0 is None:
        u0 = bubble_guess(space)
    u0 = u0.coefficients if isinstance(u0, FeFunction) else np.asarray(u0, dtype=float)
    if not np.any(u0):
        raise ValueError("initial guess must be nonzero")
    K_lin = (A + M_W).tocsr()
    if zeta == 0:
        cubic_of = lambda x: sp.csr_matrix(K_lin.shape)  # noqa: E731
    else:
        cubic_of = lambda x: assemble_cubic(space, x, zeta)  # noqa: E731
    if backend == "dense":
        Md = M.toarray()
        eig = lambda K, _M, x: smallest_eig_dense(K.toarray(), Md, x)  # noqa: E731
    elif backend == "sparse":
        eig = lambda K, M_, x: smallest_eig_sparse(  # noqa: E731
            K, M_, x, tol=cfg.inner_tol, res_tol=cfg.inner_tol
        )[:2]
    else:
        raise ValueError(f"unknown backend {backend!r}")
    _, x, info = scf_loop(K_lin, M, cubic_of, eig, u0, cfg, zeta)
    pair = make_pair(A, M, M_W, space, zeta, x)
    if strict and not info.converged:
        raise ScfConvergenceError(
            f"SCF did not reach |dλ| <= {cfg.tol_lambda} in {cfg.max_iter} iterations",
            pair, info,
        )
    return pair, info


def make_pair(A, M, M_W, space, zeta, x) -> Eigenpair:
    """Normalise, orient and attach λ = a(u, u)."""
    x = orient(normalize(x, M))
    return Eigenpair(nonlinear_rayleigh(A, M_W, space, zeta, x), FeFunction(x, space))


def eigenpair_violations(pair: Eigenpair, A, M, M_W, zeta) -> list:
    """Names of the Eigenpair invariants that ``pair`` breaks."""
    x = pair.coefficients
    out = []
    if abs(x @ (M @ x) - 1.0) > NORM_TOL:
        out.append("normalization")
    if x[np.argmax(np.abs(x))] <= 0:
        out.append("sign")
    if abs(pair.lam - nonlinear_rayleigh(A, M_W, pair.u.space, zeta, x)) > CONSISTENCY_TOL:
        out.append("consistency")
    return out
