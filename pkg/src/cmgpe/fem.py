"""P1 finite elements on triangles with homogeneous Dirichlet elimination.

Element matrices are symmetric by construction and duplicates are summed in
a fixed (stable-sorted) order, so assembled matrices are bit-symmetric and
independent of the scipy version.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .mesh import Hierarchy, Mesh


@dataclass(frozen=True)
class QuadratureRule:
    """Barycentric points (nq, 3) and weights (nq,) normalised to sum to 1."""

    points: np.ndarray
    weights: np.ndarray

    @property
    def n_points(self) -> int:
        return self.weights.shape[0]


def _dunavant4() -> QuadratureRule:
    # 6-point symmetric rule, exact for total degree 4
    a1, w1 = 0.44594849091596488632, 0.22338158967801146570
    a2, w2 = 0.09157621350977074346, 0.10995174365532186764
    b1, b2 = 1.0 - 2.0 * a1, 1.0 - 2.0 * a2
    points = np.array(
        [
            [b1, a1, a1],
            [a1, b1, a1],
            [a1, a1, b1],
            [b2, a2, a2],
            [a2, b2, a2],
            [a2, a2, b2],
        ]
    )
    weights = np.array([w1, w1, w1, w2, w2, w2])
    return QuadratureRule(points, weights)


QUAD4 = _dunavant4()


class FeSpace:
    """Continuous P1 space on ``mesh``.

    With ``dirichlet=True`` boundary vertices are eliminated; ``free_dofs``
    lists the remaining vertices in increasing order and ``dof_of_vertex``
    holds -1 for constrained vertices.
    """

    def __init__(self, mesh: Mesh, dirichlet: bool = True):
        self.mesh = mesh
        self.dirichlet = dirichlet
        if dirichlet:
            free = np.flatnonzero(~mesh.boundary_flags)
        else:
            free = np.arange(mesh.n_vertices)
        dof = np.full(mesh.n_vertices, -1, dtype=np.int64)
        dof[free] = np.arange(free.size)
        free.setflags(write=False)
        dof.setflags(write=False)
        self.free_dofs = free
        self.dof_of_vertex = dof

    @property
    def n_dofs(self) -> int:
        return self.free_dofs.size

    def __repr__(self):
        return f"FeSpace(n_dofs={self.n_dofs}, h={self.mesh.h:.4g})"

    def to_vertices(self, x) -> np.ndarray:
        """Vertex values of a free-dof vector (zero on constrained vertices)."""
        full = np.zeros(self.mesh.n_vertices)
        full[self.free_dofs] = _coeffs(x)
        return full

    def interpolate(self, f) -> np.ndarray:
        """Nodal interpolant ``f(x, y)`` restricted to the free dofs."""
        v = self.mesh.vertices[self.free_dofs]
        return np.asarray(f(v[:, 0], v[:, 1]), dtype=float) * np.ones(self.n_dofs)

    @cached_property
    def _geometry(self):
        verts, tris = self.mesh.vertices, self.mesh.triangles
        p = verts[tris]  # (nt, 3, 2)
        area = self.mesh.areas
        # grad of barycentric i is rot90(p_{i+2} - p_{i+1}) / (2 area)
        d = np.roll(p, -2, axis=1) - np.roll(p, -1, axis=1)
        grads = np.stack([-d[:, :, 1], d[:, :, 0]], axis=2) / (2.0 * area)[:, None, None]
        return area, grads

    @cached_property
    def quadrature_points(self) -> np.ndarray:
        """Physical quadrature points, shape (nt, nq, 2)."""
        p = self.mesh.vertices[self.mesh.triangles]
        return np.einsum("qa,tad->tqd", QUAD4.points, p)

    @cached_property
    def _scatter(self):
        tris = self.mesh.triangles
        rows = np.repeat(tris, 3, axis=1).ravel()
        cols = np.tile(tris, (1, 3)).ravel()
        r, c = self.dof_of_vertex[rows], self.dof_of_vertex[cols]
        keep = np.flatnonzero((r >= 0) & (c >= 0))
        key = r[keep] * self.n_dofs + c[keep]
        # stable sort keeps element order inside each (i, j) group, so the
        # (i, j) and (j, i) sums run over identical sequences
        order = keep[np.argsort(key, kind="stable")]
        skey = np.sort(key, kind="stable")
        starts = np.flatnonzero(np.r_[True, skey[1:] != skey[:-1]])
        ukey = skey[starts]
        indptr = np.searchsorted(ukey // self.n_dofs, np.arange(self.n_dofs + 1))
        return order, starts, ukey % self.n_dofs, indptr

    def assemble(self, local: np.ndarray) -> sp.csr_matrix:
        """Sum (nt, 3, 3) element matrices into a free-dof CSR matrix."""
        order, starts, indices, indptr = self._scatter
        n = self.n_dofs
        if order.size == 0:
            return sp.csr_matrix((n, n))
        data = np.add.reduceat(local.reshape(-1)[order], starts)
        return sp.csr_matrix((data, indices.copy(), indptr.copy()), shape=(n, n))

    def assemble_weighted_mass(self, coef_q: np.ndarray) -> sp.csr_matrix:
        """Matrix of ``∫ c φ_i φ_j`` for ``c`` given at quadrature points (nt, nq)."""
        lam = QUAD4.points
        outer = (lam[:, :, None] * lam[:, None, :]).reshape(QUAD4.n_points, 9)
        area, _ = self._geometry
        cw = coef_q * QUAD4.weights[None, :] * area[:, None]
        local = np.zeros((cw.shape[0], 9))
        for q in range(QUAD4.n_points):
            local += cw[:, q, None] * outer[q]
        return self.assemble(local.reshape(-1, 3, 3))

    def evaluate_at_quadrature(self, x) -> np.ndarray:
        """Values of the P1 function ``x`` at quadrature points, (nt, nq)."""
        full = self.to_vertices(x)
        return full[self.mesh.triangles] @ QUAD4.points.T


@dataclass(frozen=True, eq=False)
class FeFunction:
    coefficients: np.ndarray
    space: FeSpace

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float)
        if c.shape != (self.space.n_dofs,):
            raise ValueError(
                f"coefficient vector has shape {c.shape}, space has {self.space.n_dofs} dofs"
            )
        object.__setattr__(self, "coefficients", c)


def _coeffs(u) -> np.ndarray:
    if isinstance(u, FeFunction):
        return u.coefficients
    return np.asarray(u, dtype=float)


def assemble_laplace(space: FeSpace) -> sp.csr_matrix:
    area, g = space._geometry
    local = area[:, None, None] * (
        g[:, :, None, 0] * g[:, None, :, 0] + g[:, :, None, 1] * g[:, None, :, 1]
    )
    return space.assemble(local)


def assemble_mass(space: FeSpace) -> sp.csr_matrix:
    return space.assemble_weighted_mass(np.ones((space.mesh.n_triangles, QUAD4.n_points)))


def assemble_potential(space: FeSpace, gamma=(1.0, 1.0)) -> sp.csr_matrix:
    """Matrix of the harmonic trap ``W = γ1 x² + γ2 y²``."""
    g1, g2 = (float(g) for g in gamma)
    if g1 < 0 or g2 < 0:
        raise ValueError(f"potential coefficients must be nonnegative, got {gamma}")
    xq = space.quadrature_points
    w = g1 * xq[:, :, 0] ** 2 + g2 * xq[:, :, 1] ** 2
    return space.assemble_weighted_mass(w)


def assemble_cubic(space: FeSpace, u, zeta: float) -> sp.csr_matrix:
    """Frozen nonlinear term ``ζ ∫ |u|² φ_i φ_j`` (exact for P1 ``u``)."""
    if zeta < 0:
        raise ValueError("zeta must be nonnegative")
    uq = space.evaluate_at_quadrature(u)
    return space.assemble_weighted_mass(zeta * uq * uq)


def l2_norm(u, M) -> float:
    x = _coeffs(u)
    return float(np.sqrt(max(x @ (M @ x), 0.0)))


def h1_norm(u, A, M) -> float:
    x = _coeffs(u)
    return float(np.sqrt(max(x @ (A @ x) + x @ (M @ x), 0.0)))


def _step_prolongation(coarse: Mesh, fine: Mesh, parent: np.ndarray) -> sp.csr_matrix:
    cs, fs = FeSpace(coarse), FeSpace(fine)
    nvc = coarse.n_vertices
    cdof, fdof = cs.dof_of_vertex, fs.dof_of_vertex
    rows, cols, vals = [], [], []
    kept = np.flatnonzero(fdof[:nvc] >= 0)
    rows.append(fdof[kept])
    cols.append(cdof[kept])
    vals.append(np.ones(kept.size))
    for end in (0, 1):
        e = np.arange(parent.shape[0])
        r = fdof[nvc + e]
        c = cdof[parent[:, end]]
        ok = (r >= 0) & (c >= 0)
        rows.append(r[ok])
        cols.append(c[ok])
        vals.append(np.full(ok.sum(), 0.5))
    return sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(fs.n_dofs, cs.n_dofs),
    ).tocsr()


def prolongation_matrix(hierarchy: Hierarchy, from_level: int, to_level: int) -> sp.csr_matrix:
    """Free-dof interpolation operator from ``from_level`` to ``to_level``.

    Level 0 is the coarse mesh T_H.
    """
    if from_level > to_level:
        raise ValueError(f"from_level {from_level} exceeds to_level {to_level}")
    i0 = hierarchy.chain_index(from_level)
    i1 = hierarchy.chain_index(to_level)
    P = sp.identity(FeSpace(hierarchy.chain[i0]).n_dofs, format="csr")
    for i in range(i0, i1):
        step = _step_prolongation(hierarchy.chain[i], hierarchy.chain[i + 1], hierarchy.parents[i])
        P = (step @ P).tocsr()
    return P


def prolongate(u_coarse, hierarchy: Hierarchy, k: int) -> FeFunction:
    """Embed a level-``k`` function into level ``k + 1``."""
    if not 1 <= k < hierarchy.n_levels:
        raise IndexError(f"cannot prolongate from level {k} of {hierarchy.n_levels}")
    x = _coeffs(u_coarse)
    P = prolongation_matrix(hierarchy, k, k + 1)
    if x.shape != (P.shape[1],):
        raise ValueError("coefficient vector does not belong to the level-k space")
    return FeFunction(P @ x, FeSpace(hierarchy.mesh(k + 1)))


def matrix_to_text(A) -> str:
    """Coordinate-format dump, one ``i j value`` per line."""
    C = sp.coo_matrix(A)
    order = np.lexsort((C.col, C.row))
    return "".join(
        f"{i} {j} {v:.17g}\n" for i, j, v in zip(C.row[order], C.col[order], C.data[order])
    )
