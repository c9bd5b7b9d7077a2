"""Fast self-checks of the core invariants, run by ``cmgpe check``."""
from __future__ import annotations

import math
from math import factorial

import numpy as np

from .cascadic import Discretization, Problem, Schedule, cascadic_solve, direct_level_solve, schedule_m
from .eigensolve import ScfConfig, eigenpair_violations, smallest_eig_dense, smallest_eig_sparse
from .fem import QUAD4, FeSpace, assemble_laplace, assemble_mass, assemble_potential, prolongation_matrix
from .mesh import build_hierarchy, build_structured_unit_square, read_mesh, refine_regular, write_mesh
from .smoother import KINDS, SmootherKind, energy_norm, smooth


def _mesh_conformity(rng):
    m = build_structured_unit_square(4)
    for _ in range(2):
        m, _ = refine_regular(m)
    m.validate()
    return bool(np.all(m.areas > 0) and set(np.unique(m.edge_counts)) <= {1, 2})


def _mesh_roundtrip(rng):
    m = build_structured_unit_square(3)
    r = read_mesh(write_mesh(m))
    return np.array_equal(r.vertices, m.vertices) and np.array_equal(r.triangles, m.triangles)


def _refinement_counts(rng):
    m = build_structured_unit_square(2)
    f, _ = refine_regular(m)
    return f.n_vertices == m.n_vertices + m.n_edges and f.n_triangles == 4 * m.n_triangles


def _quadrature(rng):
    lam = QUAD4.points
    worst = 0.0
    for a in range(5):
        for b in range(5 - a):
            q = 0.5 * np.sum(QUAD4.weights * lam[:, 1] ** a * lam[:, 2] ** b)
            worst = max(worst, abs(q - factorial(a) * factorial(b) / factorial(a + b + 2)))
    return worst <= 1e-14


def _symmetry(rng):
    S = FeSpace(build_structured_unit_square(5))
    return all((abs(K - K.T)).max() == 0 for K in
               (assemble_laplace(S), assemble_mass(S), assemble_potential(S, (1, 2))))


def _definiteness(rng):
    S = FeSpace(build_structured_unit_square(5))
    return all(np.all(np.linalg.eigvalsh(K.toarray()) > 0) for K in (assemble_laplace(S), assemble_mass(S)))


def _prolongation(rng):
    h = build_hierarchy(build_structured_unit_square(3), 0, 3)
    P = prolongation_matrix(h, 1, 3)
    Mc, Mf = assemble_mass(FeSpace(h.mesh(1))), assemble_mass(FeSpace(h.mesh(3)))
    x = rng.standard_normal(P.shape[1])
    y = P @ x
    return abs(math.sqrt(x @ Mc @ x) - math.sqrt(y @ Mf @ y)) <= 1e-12


def _smoother_nonexpansion(rng):
    A = assemble_laplace(FeSpace(build_structured_unit_square(8)))
    for name in KINDS:
        kind = SmootherKind(name).resolved(A)
        for _ in range(10):
            x0 = rng.standard_normal(A.shape[0])
            m = int(rng.integers(1, 12))
            if energy_norm(A, smooth(A, np.zeros_like(x0), x0, m, kind)) > energy_norm(A, x0) * (1 + 1e-12):
                return False
    return True


def _dense_sparse(rng):
    S = FeSpace(build_structured_unit_square(10))
    K = assemble_laplace(S) + assemble_potential(S, (1, 1))
    M = assemble_mass(S)
    ld, _ = smallest_eig_dense(K.toarray(), M.toarray())
    ls, _, _ = smallest_eig_sparse(K, M, np.ones(S.n_dofs), tol=1e-12)
    return abs(ld - ls) <= 1e-8


def _schedule(rng):
    s = Schedule()
    return [schedule_m(k, 5, s) for k in (5, 4, 2)] == [4, 14, 169]


def _eigenpairs(rng):
    disc = Discretization(build_hierarchy(build_structured_unit_square(4), 0, 3), Problem((1, 1), 1.0))
    res = cascadic_solve(disc, Schedule(), SmootherKind("cg"))
    return all(not eigenpair_violations(p, disc.ops(k).A, disc.ops(k).M, disc.ops(k).M_W, 1.0)
               for k, p in enumerate(res.pairs, 1))


def _degenerate(rng):
    disc = Discretization(build_hierarchy(build_structured_unit_square(5), 0, 1), Problem((1, 1), 1.0))
    res = cascadic_solve(disc, Schedule())
    ref, _ = direct_level_solve(disc, 1, ScfConfig())
    return abs(res.pair.lam - ref.lam) <= 1e-12


CHECKS = [
    ("mesh conformity and positive areas", _mesh_conformity),
    ("mesh file round trip", _mesh_roundtrip),
    ("refinement counts", _refinement_counts),
    ("degree-4 quadrature exactness", _quadrature),
    ("assembled matrices exactly symmetric", _symmetry),
    ("laplace and mass positive definite", _definiteness),
    ("prolongation preserves L2 norm", _prolongation),
    ("smoother energy non-expansion", _smoother_nonexpansion),
    ("dense and sparse eigensolvers agree", _dense_sparse),
    ("schedule m_k values", _schedule),
    ("eigenpair invariants on a cascadic run", _eigenpairs),
    ("single-level cascadic equals direct", _degenerate),
]


def run_checks(seed: int = 0, echo=print) -> bool:
    rng = np.random.default_rng(seed)
    ok_all = True
    for name, fn in CHECKS:
        try:
            ok = bool(fn(rng))
            detail = ""
        except Exception as exc:  # report and keep going
            ok, detail = False, f" ({type(exc).__name__}: {exc})"
        ok_all &= ok
        echo(f"[{'PASS' if ok else 'FAIL'}] {name}{detail}")
    return ok_all
