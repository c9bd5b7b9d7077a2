import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cmgpe.mesh import (
    DegenerateTriangleError,
    Mesh,
    MeshParseError,
    NonConformingMeshError,
    build_hierarchy,
    build_structured_unit_square,
    read_mesh,
    refine_regular,
    signed_areas,
    write_mesh,
)

TWO_TRIANGLES = """\
# unit square split along the diagonal
4 2
0 0
1 0
1 1
0 1
0 1 2
0 2 3
"""


def test_structured_counts():
    m = build_structured_unit_square(4)
    assert m.n_vertices == 25
    assert m.n_triangles == 32
    assert np.isclose(m.h, np.sqrt(2) / 4)
    assert m.boundary_flags.sum() == 16
    assert np.all(m.areas > 0)


def test_structured_rejects_tiny():
    with pytest.raises(ValueError):
        build_structured_unit_square(1)


def test_read_two_triangles():
    m = read_mesh(TWO_TRIANGLES)
    assert m.n_vertices == 4 and m.n_triangles == 2
    assert np.all(m.boundary_flags)
    assert np.isclose(m.areas.sum(), 1.0)


def test_read_reorients_clockwise():
    text = TWO_TRIANGLES.replace("0 1 2\n", "0 2 1\n")
    m = read_mesh(text)
    assert np.all(signed_areas(m.vertices, m.triangles) > 0)


@pytest.mark.parametrize(
    "text, exc, match",
    [
        ("4 2\n0 0\n1 0\n1 1\n0 1\n0 1 2\n0 2 4\n", MeshParseError, "out of range"),
        ("4 2\n0 0\n1 0\n1 1\n0 1\n0 1 2\n", MeshParseError, "expected"),
        ("x 2\n", MeshParseError, "integers"),
        ("3 1\n0 0\n1 0\n2 0\n0 1 2\n", DegenerateTriangleError, "zero area"),
        ("3 1\n0 0\n1 0\n0 1\n0 1 1\n", DegenerateTriangleError, "repeated"),
        ("4 2\n0 0\n1 0\n1 1\n0 1\n0 1 2.5\n0 2 3\n", MeshParseError, "integer"),
    ],
)
def test_read_errors(text, exc, match):
    with pytest.raises(exc, match=match):
        read_mesh(text)


def test_hanging_vertex_rejected():
    # vertex 4 sits on the shared edge of the left triangle only
    verts = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5]], float)
    tris = np.array([[0, 1, 4], [1, 2, 4], [0, 2, 3]])
    with pytest.raises(NonConformingMeshError):
        Mesh(verts, tris).validate()


def test_unused_vertex_rejected():
    verts = np.array([[0, 0], [1, 0], [0, 1], [5, 5]], float)
    with pytest.raises(NonConformingMeshError):
        Mesh(verts, np.array([[0, 1, 2]])).validate()


def test_write_read_roundtrip():
    m = build_structured_unit_square(3)
    r = read_mesh(write_mesh(m))
    np.testing.assert_array_equal(r.vertices, m.vertices)
    np.testing.assert_array_equal(r.triangles, m.triangles)
    np.testing.assert_array_equal(r.boundary_flags, m.boundary_flags)


def test_refine_counts_and_midpoints():
    m = build_structured_unit_square(2)
    f, parent = refine_regular(m)
    assert f.n_vertices == m.n_vertices + m.n_edges
    assert f.n_triangles == 4 * m.n_triangles
    np.testing.assert_array_equal(f.vertices[: m.n_vertices], m.vertices)
    mids = 0.5 * (m.vertices[parent[:, 0]] + m.vertices[parent[:, 1]])
    np.testing.assert_array_equal(f.vertices[m.n_vertices:], mids)
    assert np.isclose(f.h, m.h / 2)
    np.testing.assert_allclose(np.sort(f.areas), np.full(f.n_triangles, m.areas[0] / 4))
    f.validate()


def test_refine_boundary_flags_follow_edges():
    f, _ = refine_regular(build_structured_unit_square(3))
    x, y = f.vertices.T
    geometric = (x == 0) | (x == 1) | (y == 0) | (y == 1)
    np.testing.assert_array_equal(f.boundary_flags, geometric)


def test_refine_is_deterministic():
    m = build_structured_unit_square(3)
    a, pa = refine_regular(m)
    b, pb = refine_regular(m)
    np.testing.assert_array_equal(a.triangles, b.triangles)
    np.testing.assert_array_equal(pa, pb)


def test_hierarchy_levels():
    h = build_hierarchy(build_structured_unit_square(2), pre_refinements=1, n_levels=3)
    assert h.n_levels == 3
    assert h.mesh(0) is h.coarse_mesh
    assert h.mesh(1).n_triangles == 4 * h.coarse_mesh.n_triangles
    assert h.mesh(3).n_triangles == 64 * h.coarse_mesh.n_triangles
    with pytest.raises(IndexError):
        h.mesh(4)


def test_hierarchy_without_pre_refinement_starts_at_coarse():
    c = build_structured_unit_square(2)
    h = build_hierarchy(c, 0, 2)
    assert h.mesh(1) is c


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2))
def test_refinement_preserves_area_and_conformity(n, times):
    m = build_structured_unit_square(n)
    for _ in range(times):
        m, _ = refine_regular(m)
    m.validate()
    assert np.isclose(m.areas.sum(), 1.0)
    assert set(np.unique(m.edge_counts)) <= {1, 2}


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.floats(-0.2, 0.2), st.floats(-0.2, 0.2)), min_size=9, max_size=9))
def test_perturbed_mesh_roundtrip(shifts):
    m = build_structured_unit_square(4)
    v = m.vertices.copy()
    inner = np.flatnonzero(~m.boundary_flags)
    v[inner] += 0.2 * np.array(shifts)[: inner.size] / 4
    p = Mesh(v, m.triangles)
    if np.any(p.areas <= 0):
        return
    r = read_mesh(write_mesh(p))
    np.testing.assert_array_equal(r.vertices, p.vertices)
