import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from cmgpe.fem import FeSpace, assemble_laplace
from cmgpe.mesh import build_structured_unit_square
from cmgpe.smoother import (
    KINDS,
    SmootherKind,
    cg_solve,
    energy_error,
    energy_norm,
    estimate_lambda_max,
    smooth,
)


@pytest.fixture(scope="module")
def A():
    return assemble_laplace(FeSpace(build_structured_unit_square(10)))


def test_alpha_declared():
    assert SmootherKind("cg").alpha == 1.0
    for name in ("jacobi", "sgs", "ssor", "richardson"):
        assert SmootherKind(name).alpha == 0.5


def test_defaults_and_validation():
    assert SmootherKind("jacobi").omega == 0.5
    assert SmootherKind("ssor").omega == 0.8
    with pytest.raises(ValueError):
        SmootherKind("gmres")
    with pytest.raises(ValueError):
        SmootherKind("jacobi", omega=1.5)
    with pytest.raises(ValueError):
        SmootherKind("ssor", omega=0.0)
    with pytest.raises(ValueError):
        SmootherKind("richardson", tau=-1.0)


def test_richardson_one_by_one():
    A1 = sp.csr_matrix([[2.0]])
    x = smooth(A1, np.array([2.0]), np.array([0.0]), 1, SmootherKind("richardson", tau=0.5))
    np.testing.assert_array_equal(x, [1.0])


@pytest.mark.parametrize("name", KINDS)
def test_zero_steps_returns_x0(A, name, rng):
    x0 = rng.standard_normal(A.shape[0])
    out = smooth(A, np.ones_like(x0), x0, 0, SmootherKind(name))
    np.testing.assert_array_equal(out, x0)
    assert out is not x0


def test_dimension_mismatch(A):
    with pytest.raises(ValueError, match="dimension"):
        smooth(A, np.zeros(3), np.zeros(A.shape[0]), 1)
    with pytest.raises(ValueError):
        smooth(A, np.zeros(A.shape[0]), np.zeros(A.shape[0]), -1)


def test_cg_finite_termination(rng):
    B = rng.standard_normal((10, 10))
    A10 = sp.csr_matrix(B @ B.T + 10 * np.eye(10))
    b = rng.standard_normal(10)
    x = smooth(A10, b, np.zeros(10), 10, SmootherKind("cg"))
    assert np.linalg.norm(b - A10 @ x) <= 1e-10 * np.linalg.norm(b)


def test_lambda_max_estimate(A):
    exact = np.linalg.eigvalsh(A.toarray())[-1]
    est = estimate_lambda_max(A)
    assert 0.9 * exact <= est <= exact * (1 + 1e-12)


@pytest.mark.parametrize("name", KINDS)
def test_per_step_non_expansion(A, name, rng):
    kind = SmootherKind(name).resolved(A)
    x = rng.standard_normal(A.shape[0])
    prev = energy_norm(A, x)
    for _ in range(30):
        x = smooth(A, np.zeros_like(x), x, 1, kind)
        cur = energy_norm(A, x)
        assert cur <= prev * (1 + 1e-12)
        prev = cur


def test_cg_energy_error_monotone(A, rng):
    b = rng.standard_normal(A.shape[0])
    errs = [energy_error(A, b, smooth(A, b, np.zeros_like(b), m)) for m in range(25)]
    assert all(e1 <= e0 * (1 + 1e-12) for e0, e1 in zip(errs, errs[1:]))
    assert errs[-1] < 1e-2 * errs[0]


def test_energy_error_zero_at_solution(A, rng):
    b = rng.standard_normal(A.shape[0])
    x, _, ok = cg_solve(A, b, rtol=1e-14)
    assert ok
    assert energy_error(A, b, x) <= 1e-10
    assert energy_error(A, b, x + 1e-3) > 0


@pytest.mark.parametrize("name", KINDS)
def test_deterministic(A, name, rng):
    x0, b = rng.standard_normal(A.shape[0]), rng.standard_normal(A.shape[0])
    kind = SmootherKind(name)
    np.testing.assert_array_equal(smooth(A, b, x0, 7, kind), smooth(A, b, x0, 7, kind))


@pytest.mark.parametrize("name", ["jacobi", "sgs", "ssor", "richardson"])
def test_affine_kinds_converge(A, name, rng):
    b = rng.standard_normal(A.shape[0])
    x = smooth(A, b, np.zeros_like(b), 400, SmootherKind(name).resolved(A))
    assert energy_error(A, b, x) < 0.5 * energy_error(A, b, np.zeros_like(b))


def test_cg_solve_reports(A, rng):
    b = rng.standard_normal(A.shape[0])
    x, its, ok = cg_solve(A, b, rtol=1e-12)
    assert ok and its > 0
    assert np.linalg.norm(b - A @ x) <= 1e-12 * np.linalg.norm(b)
    _, _, ok = cg_solve(A, b, rtol=1e-12, maxiter=2)
    assert not ok
    z, its, ok = cg_solve(A, np.zeros_like(b))
    assert ok and its == 0 and not z.any()


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(KINDS), st.integers(1, 20), st.integers(0, 2**31 - 1))
def test_non_expansion_property(name, m, seed):
    A8 = assemble_laplace(FeSpace(build_structured_unit_square(6)))
    x0 = np.random.default_rng(seed).standard_normal(A8.shape[0])
    x = smooth(A8, np.zeros_like(x0), x0, m, SmootherKind(name).resolved(A8))
    assert energy_norm(A8, x) <= energy_norm(A8, x0) * (1 + 1e-12)
