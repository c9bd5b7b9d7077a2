"""Triangular meshes, red refinement and nested hierarchies.

Meshes are immutable: every array is stored read-only after construction.
Refinement keeps the coarse vertex numbering and appends one midpoint per
coarse edge, in edge order, so the parent of a fine vertex is recoverable
from its index alone.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

BOUNDARY_TOL = 1e-12


class MeshError(ValueError):
    """Base class for mesh construction and validation failures."""


class MeshParseError(MeshError):
    pass


class NonConformingMeshError(MeshError):
    pass


class DegenerateTriangleError(MeshError):
    pass


def _frozen(a, dtype):
    a = np.ascontiguousarray(a, dtype=dtype)
    a.setflags(write=False)
    return a


def signed_areas(vertices, triangles):
    p0 = vertices[triangles[:, 0]]
    e1 = vertices[triangles[:, 1]] - p0
    e2 = vertices[triangles[:, 2]] - p0
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def _edges_and_incidence(triangles):
    """Unique sorted edges, triangle->edge map and per-edge triangle count."""
    local = np.concatenate(
        [triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]]
    )
    local = np.sort(local, axis=1)
    edges, inverse, counts = np.unique(
        local, axis=0, return_inverse=True, return_counts=True
    )
    nt = triangles.shape[0]
    # columns: edge (0,1), edge (1,2), edge (2,0)
    tri_edges = inverse.reshape(-1).reshape(3, nt).T
    return edges, tri_edges, counts


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming P1 triangulation with counterclockwise triangles.

    ``boundary_flags`` marks vertices on boundary edges (edges that belong
    to exactly one triangle).
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_flags: np.ndarray = field(default=None)

    def __post_init__(self):
        verts = _frozen(self.vertices, np.float64)
        tris = _frozen(self.triangles, np.int64)
        if verts.ndim != 2 or verts.shape[1] != 2:
            raise MeshError("vertices must have shape (nv, 2)")
        if tris.ndim != 2 or tris.shape[1] != 3:
            raise MeshError("triangles must have shape (nt, 3)")
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "triangles", tris)
        if self.boundary_flags is None:
            flags = np.zeros(verts.shape[0], dtype=bool)
            flags[self.edges[self.edge_counts == 1].ravel()] = True
        else:
            flags = self.boundary_flags
        object.__setattr__(self, "boundary_flags", _frozen(flags, bool))

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @cached_property
    def _topology(self):
        edges, tri_edges, counts = _edges_and_incidence(self.triangles)
        for a in (edges, tri_edges, counts):
            a.setflags(write=False)
        return edges, tri_edges, counts

    @property
    def edges(self) -> np.ndarray:
        return self._topology[0]

    @property
    def triangle_edges(self) -> np.ndarray:
        return self._topology[1]

    @property
    def edge_counts(self) -> np.ndarray:
        return self._topology[2]

    @cached_property
    def areas(self) -> np.ndarray:
        return signed_areas(self.vertices, self.triangles)

    @cached_property
    def h(self) -> float:
        """Mesh size: the longest edge (= largest triangle diameter)."""
        d = self.vertices[self.edges[:, 0]] - self.vertices[self.edges[:, 1]]
        return float(np.sqrt((d**2).sum(axis=1)).max())

    @property
    def boundary_edge_mask(self) -> np.ndarray:
        return self.edge_counts == 1

    def validate(self):
        """Raise a MeshError subclass if any invariant is violated."""
        nv = self.n_vertices
        if self.triangles.size and (self.triangles.min() < 0 or self.triangles.max() >= nv):
            raise MeshParseError("triangle vertex index out of range")
        if np.any(self.areas <= 0.0):
            bad = int(np.flatnonzero(self.areas <= 0.0)[0])
            raise DegenerateTriangleError(
                f"triangle {bad} has non-positive signed area {self.areas[bad]:.3e}"
            )
        if np.any(self.edge_counts > 2):
            bad = self.edges[self.edge_counts > 2][0]
            raise NonConformingMeshError(
                f"edge {tuple(int(v) for v in bad)} shared by more than 2 triangles"
            )
        used = np.zeros(nv, dtype=bool)
        used[self.triangles.ravel()] = True
        if not used.all():
            raise NonConformingMeshError(
                f"vertex {int(np.flatnonzero(~used)[0])} belongs to no triangle"
            )
        # hanging vertex: lies in the interior of a boundary edge
        bedges = self.edges[self.boundary_edge_mask]
        if bedges.size:
            p, q = self.vertices[bedges[:, 0]], self.vertices[bedges[:, 1]]
            bverts = np.flatnonzero(self.boundary_flags)
            for v in bverts:
                x = self.vertices[v]
                d = q - p
                t = ((x - p) * d).sum(axis=1) / (d**2).sum(axis=1)
                inside = (t > 1e-9) & (t < 1 - 1e-9)
                if not inside.any():
                    continue
                proj = p[inside] + t[inside, None] * d[inside]
                dist = np.sqrt(((proj - x) ** 2).sum(axis=1))
                if np.any(dist < 1e-9 * self.h):
                    raise NonConformingMeshError(f"hanging vertex {int(v)}")
        return self


def build_structured_unit_square(cells_per_side: int) -> Mesh:
    """Uniform right-triangle mesh of (0,1)^2, diagonals running SW-NE."""
    n = int(cells_per_side)
    if n != cells_per_side or n < 2:
        raise ValueError(f"cells_per_side must be an integer >= 2, got {cells_per_side!r}")
    t = np.arange(n + 1) / n
    xx, yy = np.meshgrid(t, t, indexing="xy")
    vertices = np.column_stack([xx.ravel(), yy.ravel()])
    j, i = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    v00 = (j * (n + 1) + i).ravel()
    v10 = v00 + 1
    v01 = v00 + n + 1
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.stack([lower, upper], axis=1).reshape(-1, 3)
    x, y = vertices[:, 0], vertices[:, 1]
    flags = (
        (np.abs(x) <= BOUNDARY_TOL)
        | (np.abs(x - 1) <= BOUNDARY_TOL)
        | (np.abs(y) <= BOUNDARY_TOL)
        | (np.abs(y - 1) <= BOUNDARY_TOL)
    )
    return Mesh(vertices, triangles, flags)


_INT_RE = re.compile(r"^[+-]?\d+$")


def read_mesh(text: str) -> Mesh:
    """Parse the ASCII mesh format ``nv nt`` / ``x y`` rows / ``i j k`` rows.

    Clockwise triangles are reoriented. Boundary flags come from edge
    incidence.
    """
    tokens = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            tokens.append(line.split())
    if not tokens or len(tokens[0]) != 2:
        raise MeshParseError("header must be 'nv nt'")
    try:
        nv, nt = (int(s) for s in tokens[0])
    except ValueError:
        raise MeshParseError("header must contain two integers") from None
    if nv < 3 or nt < 1:
        raise MeshParseError(f"need at least 3 vertices and 1 triangle, got {nv} {nt}")
    body = tokens[1:]
    if len(body) != nv + nt:
        raise MeshParseError(
            f"expected {nv + nt} data lines after header, found {len(body)}"
        )
    try:
        verts = np.array([[float(s) for s in row] for row in body[:nv]])
    except ValueError as exc:
        raise MeshParseError(f"bad vertex coordinate: {exc}") from None
    if verts.shape != (nv, 2):
        raise MeshParseError("each vertex line must hold exactly 2 coordinates")
    rows = body[nv:]
    if any(len(r) != 3 or not all(_INT_RE.match(s) for s in r) for r in rows):
        raise MeshParseError("each triangle line must hold exactly 3 integer indices")
    tris = np.array([[int(s) for s in r] for r in rows], dtype=np.int64)
    if tris.min() < 0 or tris.max() >= nv:
        raise MeshParseError("triangle vertex index out of range")
    if np.any((tris[:, 0] == tris[:, 1]) | (tris[:, 1] == tris[:, 2]) | (tris[:, 0] == tris[:, 2])):
        raise DegenerateTriangleError("triangle with repeated vertex")
    area = signed_areas(verts, tris)
    if np.any(area == 0.0):
        raise DegenerateTriangleError(
            f"triangle {int(np.flatnonzero(area == 0.0)[0])} has zero area"
        )
    cw = area < 0
    tris[cw] = tris[cw][:, [0, 2, 1]]
    return Mesh(verts, tris).validate()


def write_mesh(mesh: Mesh) -> str:
    lines = [f"{mesh.n_vertices} {mesh.n_triangles}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles]
    return "\n".join(lines) + "\n"


def refine_regular(mesh: Mesh):
    """Split every triangle into four through its edge midpoints.

    Returns the fine mesh and the parent map, an ``(n_edges, 2)`` array:
    fine vertex ``mesh.n_vertices + e`` is the midpoint of coarse vertices
    ``parent[e]``. Fine vertices below ``mesh.n_vertices`` are the coarse
    vertices themselves.
    """
    nv = mesh.n_vertices
    edges = mesh.edges
    mids = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    vertices = np.vstack([mesh.vertices, mids])
    a, b, c = mesh.triangles.T
    te = mesh.triangle_edges + nv
    mab, mbc, mca = te[:, 0], te[:, 1], te[:, 2]
    children = np.stack(
        [
            np.column_stack([a, mab, mca]),
            np.column_stack([mab, b, mbc]),
            np.column_stack([mca, mbc, c]),
            np.column_stack([mab, mbc, mca]),
        ],
        axis=1,
    ).reshape(-1, 3)
    flags = np.concatenate([mesh.boundary_flags, mesh.boundary_edge_mask])
    fine = Mesh(vertices, children, flags)
    parent = edges.copy()
    parent.setflags(write=False)
    return fine, parent


@dataclass(frozen=True, eq=False)
class Hierarchy:
    """Nested meshes T_H ⊆ T_{h_1} ⊂ ... ⊂ T_{h_n}.

    ``chain`` holds every mesh from the coarse one through the finest;
    ``parents[i]`` maps ``chain[i + 1]`` back to ``chain[i]``. Level 0 is the
    coarse mesh and level k >= 1 is ``chain[pre_refinements + k - 1]``.
    """

    chain: tuple
    parents: tuple
    pre_refinements: int
    beta: int = 2

    @property
    def coarse_mesh(self) -> Mesh:
        return self.chain[0]

    @property
    def n_levels(self) -> int:
        return len(self.chain) - self.pre_refinements

    @property
    def levels(self) -> tuple:
        return self.chain[self.pre_refinements:]

    def chain_index(self, level: int) -> int:
        if level == 0:
            return 0
        if not 1 <= level <= self.n_levels:
            raise IndexError(f"level {level} outside 0..{self.n_levels}")
        return self.pre_refinements + level - 1

    def mesh(self, level: int) -> Mesh:
        return self.chain[self.chain_index(level)]

    def parent_vertex_map(self, level: int) -> np.ndarray:
        """Parent edges of the midpoint vertices of ``level`` (level >= 2)."""
        i = self.chain_index(level)
        if i == 0 or level < 2:
            raise IndexError("level 1 has no parent within the level list")
        return self.parents[i - 1]


def build_hierarchy(coarse: Mesh, pre_refinements: int = 0, n_levels: int = 1) -> Hierarchy:
    if n_levels < 1:
        raise ValueError("n_levels must be >= 1")
    if pre_refinements < 0:
        raise ValueError("pre_refinements must be >= 0")
    chain = [coarse]
    parents = []
    for _ in range(pre_refinements + n_levels - 1):
        fine, parent = refine_regular(chain[-1])
        chain.append(fine)
        parents.append(parent)
    return Hierarchy(tuple(chain), tuple(parents), pre_refinements)
