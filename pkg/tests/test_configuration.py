import math

import numpy as np
import pytest
from fractions import Fraction as F

from blc.configuration import build_configuration, detect_essential, factorize, reduce_essential
from blc.errors import DefectiveConfiguration, EmptyOrFullSubset, NotEssential
from blc.linalg import Matrix


def gauss_integral(widths, matrix):
    """Closed form for int prod_j exp(-w_j (a_j.x)^2 / 2) dx."""
    a = np.asarray(matrix, dtype=float)
    m = a.shape[0]
    gram = (a * np.asarray(widths)[None, :]) @ a.T
    return (2 * math.pi) ** (m / 2) / math.sqrt(np.linalg.det(gram))


def test_build_identity_all_essential():
    c = build_configuration(Matrix.from_columns([[1, 0, 0], [0, 1, 0], [0, 0, 1]]))
    assert c.spans
    assert all(c.essential_flags)
    assert c.proportional_pairs == ()
    assert not c.properly_redundant


def test_build_worked_example(worked_example):
    assert worked_example.spans
    assert not any(worked_example.essential_flags)
    assert worked_example.proportional_pairs == ()
    assert worked_example.properly_redundant


def test_build_proportional_pair_recorded():
    c = build_configuration(Matrix.from_columns([[1, 0], [2, 0], [0, 1]]))
    assert c.proportional_pairs == ((0, 1),)
    assert not c.properly_redundant
    with pytest.raises(DefectiveConfiguration):
        c.require_clean()


def test_build_rejects_zero_column():
    with pytest.raises(ValueError):
        build_configuration(Matrix.from_columns([[1, 0], [0, 0]]))


def test_detect_essential_cases(worked_example):
    c = build_configuration(Matrix.from_columns([[1, 0], [0, 1]]))
    assert detect_essential(c) == {0, 1}
    assert detect_essential(worked_example) == frozenset()
    c4 = build_configuration(
        Matrix.from_columns([[1, 0, 0], [0, 1, 0], [0, 1, 1], [0, 0, 1]])
    )
    assert detect_essential(c4) == {0}


def test_reduce_essential_scaled_axis():
    c = build_configuration(Matrix.from_columns([[2, 0], [0, 1]]))
    reduced, factor = reduce_essential(c, 0)
    assert abs(factor - 0.5) < 1e-14
    assert reduced.ambient_dim == 1 and reduced.vector_count == 1


def test_reduce_essential_identity_two_ways():
    c = build_configuration(Matrix.from_columns([[1, 0], [0, 1]]))
    for j in (0, 1):
        reduced, factor = reduce_essential(c, j)
        assert abs(factor - 1.0) < 1e-14
        assert reduced.ambient_dim == 1 and reduced.vector_count == 1
        assert abs(abs(reduced.a.entries[0]) - 1.0) < 1e-14


def test_reduce_essential_four_vectors():
    c = build_configuration(
        Matrix.from_columns([[1, 0, 0], [0, 1, 0], [0, 1, 1], [0, 0, 1]])
    )
    reduced, factor = reduce_essential(c, 0)
    assert abs(factor - 1.0) < 1e-12
    assert reduced.ambient_dim == 2 and reduced.vector_count == 3
    assert reduced.properly_redundant


def test_reduce_essential_wrong_index(worked_example):
    c = build_configuration(
        Matrix.from_columns([[1, 0, 0], [0, 1, 0], [0, 1, 1], [0, 0, 1]])
    )
    with pytest.raises(NotEssential):
        reduce_essential(c, 1)


def test_reduce_preserves_gaussian_integral_closed_form():
    # with p_j = 1 for the removed vector, the full integral equals the
    # Jacobian factor times (1-D mass) times the reduced integral
    cols = [[1, 0, 0], [0, 1, 0], [0, 1, 1], [0, 0, 1]]
    c = build_configuration(Matrix.from_columns(cols))
    reduced, factor = reduce_essential(c, 0)
    widths = [1.0, 0.7, 1.3, 0.9]
    lhs = gauss_integral(widths, c.a.numpy())
    mass_removed = math.sqrt(2 * math.pi / widths[0])
    rhs = factor * mass_removed * gauss_integral(widths[1:], reduced.a.numpy())
    assert abs(lhs - rhs) < 1e-12 * abs(lhs)


def test_reduce_preserves_integral_literal_quadrature():
    # A = [2 e1, e2], remove column 0: int f(2x) g(y) dxdy
    # = (1/2) int f * int g
    c = build_configuration(Matrix.from_columns([[2, 0], [0, 1]]))
    reduced, factor = reduce_essential(c, 0)
    xs = np.linspace(-12, 12, 4001)
    f = np.exp(-0.5 * xs**2)
    g = np.exp(-0.8 * xs**2)
    lhs = np.trapezoid(np.exp(-0.5 * (2 * xs) ** 2), xs) * np.trapezoid(g, xs)
    scale = float(abs(reduced.a.entries[0]))
    rhs = factor * np.trapezoid(f, xs) * np.trapezoid(
        np.exp(-0.8 * (scale * xs) ** 2), xs
    )
    assert abs(lhs - rhs) < 1e-8 * abs(lhs)


def test_factorize_worked_example(worked_example):
    fact = factorize(worked_example, {0, 1, 2})
    assert fact.r == 2
    cvec = fact.c_vectors.numpy()
    assert np.max(np.abs(cvec[:, [0, 1, 2]])) < 1e-10
    assert np.linalg.norm(cvec[:, 3]) > 0.1 and np.linalg.norm(cvec[:, 4]) > 0.1


def test_factorize_spanning_subset_degenerate(worked_example):
    fact = factorize(worked_example, {0, 1, 3})
    assert fact.r == 3
    assert fact.v_basis is None and fact.c_vectors is None


def test_factorize_hand_case():
    c = build_configuration(Matrix.from_columns([[1, 0], [0, 1], [1, 1]]))
    fact = factorize(c, {0})
    assert fact.r == 1
    b = fact.b_vectors.numpy()[0]
    cv = fact.c_vectors.numpy()[0]
    assert np.allclose(np.abs(b), [1, 0, 1], atol=1e-12)
    assert np.allclose(np.abs(cv), [0, 1, 1], atol=1e-12)


def test_factorize_reconstruction_property(worked_example):
    rng = np.random.default_rng(5)
    an = worked_example.a.numpy()
    for _ in range(20):
        size = int(rng.integers(1, 5))
        subset = frozenset(rng.choice(5, size=size, replace=False).tolist())
        if len(subset) == 5:
            continue
        fact = factorize(worked_example, subset)
        u = fact.u_basis.numpy()
        recon = u @ fact.b_vectors.numpy()
        if fact.v_basis is not None:
            recon = recon + fact.v_basis.numpy() @ fact.c_vectors.numpy()
        assert np.max(np.abs(recon - an)) < 1e-10
        assert np.max(np.abs(u.T @ u - np.eye(fact.r))) < 1e-12


def test_factorize_rejects_trivial_subsets(worked_example):
    with pytest.raises(EmptyOrFullSubset):
        factorize(worked_example, set())
    with pytest.raises(EmptyOrFullSubset):
        factorize(worked_example, set(range(5)))


def test_factorize_deterministic(worked_example):
    f1 = factorize(worked_example, {0, 1, 2})
    f2 = factorize(worked_example, {0, 1, 2})
    assert f1.u_basis.entries == f2.u_basis.entries
    assert f1.v_basis.entries == f2.v_basis.entries
