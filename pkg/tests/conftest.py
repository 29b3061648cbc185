import numpy as np
import pytest
from fractions import Fraction as F

from blc.configuration import build_configuration
from blc.linalg import Matrix
from blc.polytope import ExponentVector


@pytest.fixture(scope="session")
def worked_example():
    """The five-vector configuration in R^3: three vectors in the plane
    x1 + x2 + x3 = 0 plus e1 and e2."""
    m = Matrix.from_columns([[1, -1, 0], [0, 1, -1], [-1, 0, 1], [1, 0, 0], [0, 1, 0]])
    return build_configuration(m)


@pytest.fixture(scope="session")
def worked_canonical_z():
    return ExponentVector((F(1, 2), F(5, 8), F(5, 8), F(5, 8), F(5, 8)))


@pytest.fixture(scope="session")
def worked_boundary_z():
    return ExponentVector((F(2, 3), F(2, 3), F(2, 3), F(1, 2), F(1, 2)))


@pytest.fixture(scope="session")
def young_triple():
    """Three-vector planar configuration whose sharp constant is sqrt(3)/2."""
    m = Matrix.from_columns([[1, 0], [-1, -1], [0, 1]])
    return build_configuration(m)


@pytest.fixture(scope="session")
def young_z():
    return ExponentVector((F(2, 3), F(2, 3), F(2, 3)))


def random_properly_redundant(rng, m_low=2, m_high=4, n_extra=4, entry=3):
    """Draw an integer configuration until it is properly redundant."""
    while True:
        m = int(rng.integers(m_low, m_high + 1))
        n = int(rng.integers(m + 1, m + n_extra + 1))
        a = rng.integers(-entry, entry + 1, size=(m, n))
        if np.any(np.all(a == 0, axis=0)):
            continue
        try:
            cfg = build_configuration(Matrix.from_rows(a.tolist()))
        except Exception:
            continue
        if cfg.properly_redundant:
            return cfg


def random_interior_z(rng, cfg, vertices_list, mix=0.3):
    """Random strictly interior rational exponents: a positive vertex mix
    pulled toward the canonical point."""
    from blc.optimizers import canonical_indices
    from blc.polytope import snap_to_fraction

    canon = canonical_indices(cfg).z_circ.floats()
    varr = np.array([v.floats() for v in vertices_list])
    w = rng.dirichlet(np.ones(len(vertices_list)))
    zr = (1.0 - mix) * (varr.T @ w) + mix * canon
    zx = [snap_to_fraction(float(x)) for x in zr]
    zx[-1] += cfg.m - sum(zx)
    if not 0 <= zx[-1] <= 1:
        return None
    try:
        return ExponentVector(tuple(zx))
    except ValueError:
        return None
