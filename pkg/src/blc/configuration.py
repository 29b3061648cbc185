"""Vector-configuration validation and coordinate-change reductions.

A configuration is a spanning-or-not set of N nonzero column vectors in
R^M together with its classification: which vectors are essential (their
removal destroys spanning), which pairs are proportional, and whether the
whole set is properly redundant.  Two reductions live here as well: the
elimination of an essential vector (one dimension and one function fewer,
with a Jacobian factor), and the orthogonal subset factorization that
splits an integral over R^M into an R^r and an R^{M-r} stage.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import FrozenSet

import numpy as np

from .errors import DefectiveConfiguration, EmptyOrFullSubset, NotEssential
from .linalg import (
    DEFAULT_TOL,
    Matrix,
    TolerancePolicy,
    exact_rank,
    orthonormal_span_and_complement,
    projection_diagonal_exact,
    rank,
)

__all__ = ["Configuration", "Factorization", "build_configuration",
           "detect_essential", "reduce_essential", "factorize"]


@dataclass(frozen=True)
class Configuration:
    """A validated M x N column-vector configuration."""

    ambient_dim: int
    vector_count: int
    a: Matrix
    essential_flags: tuple[bool, ...]
    proportional_pairs: tuple[tuple[int, int], ...]
    spans: bool

    @property
    def m(self) -> int:
        return self.ambient_dim

    @property
    def n(self) -> int:
        return self.vector_count

    @property
    def properly_redundant(self) -> bool:
        return self.spans and not any(self.essential_flags) and not self.proportional_pairs

    @property
    def defects(self) -> tuple[str, ...]:
        out = []
        if not self.spans:
            out.append("does not span the ambient space")
        if self.proportional_pairs:
            pairs = ", ".join(str(p) for p in self.proportional_pairs)
            out.append(f"proportional column pairs: {pairs}")
        return tuple(out)

    def require_clean(self) -> None:
        if self.defects:
            raise DefectiveConfiguration("; ".join(self.defects))


@dataclass(frozen=True)
class Factorization:
    """Orthogonal split of a configuration along a column subset S.

    u_basis spans span{a_j : j in S} (r columns), v_basis its orthogonal
    complement (M - r columns, None when r = M).  b_vectors = U^t A and
    c_vectors = V^t A; the c-columns vanish on S, and a_j = U b_j + V c_j
    reconstructs every column.
    """

    subset: FrozenSet[int]
    r: int
    u_basis: Matrix
    v_basis: Matrix | None
    b_vectors: Matrix
    c_vectors: Matrix | None


def _column_rank(m: Matrix, cols: list[int], tol: TolerancePolicy) -> int:
    return rank(m.column_subset(cols), tol)


def build_configuration(a: Matrix, tol: TolerancePolicy = DEFAULT_TOL) -> Configuration:
    """Classify a configuration; defects are recorded, never raised.

    Zero columns are rejected outright (out of scope).  Essential flags are
    decided by the rank-drop definition and, when an exact mirror exists,
    cross-checked against the exact projection diagonal P_jj = 1.
    """
    m, n = a.rows, a.cols
    if n < m:
        raise ValueError("need at least M vectors in R^M")
    an = a.numpy()
    norms = np.linalg.norm(an, axis=0)
    if np.any(norms == 0.0):
        raise ValueError("zero columns are not supported")

    full_rank = rank(a, tol)
    spans = full_rank == m

    proportional = []
    for i in range(n):
        for j in range(i + 1, n):
            if _column_rank(a, [i, j], tol) == 1:
                proportional.append((i, j))

    flags = [False] * n
    if spans:
        for j in range(n):
            others = [k for k in range(n) if k != j]
            if not others:
                flags[j] = m == 1
            else:
                flags[j] = _column_rank(a, others, tol) == m - 1
        if a.has_exact:
            diag = projection_diagonal_exact(a)
            exact_flags = [d == 1 for d in diag]
            if exact_flags != flags:
                raise DefectiveConfiguration(
                    "essential-vector classifications disagree between the "
                    "rank-drop and projection-diagonal definitions"
                )

    return Configuration(
        ambient_dim=m,
        vector_count=n,
        a=a,
        essential_flags=tuple(flags),
        proportional_pairs=tuple(proportional),
        spans=spans,
    )


def detect_essential(c: Configuration) -> frozenset[int]:
    """Indices whose removal drops the rank to M - 1."""
    if not c.spans:
        raise DefectiveConfiguration("configuration does not span")
    return frozenset(j for j, f in enumerate(c.essential_flags) if f)


def reduce_essential(c: Configuration, j: int,
                     tol: TolerancePolicy = DEFAULT_TOL) -> tuple[Configuration, float]:
    """Eliminate essential column j; returns the reduced configuration and
    the Jacobian factor 1/|u1 . a_j|.

    The original constant with p_j forced to 1 equals factor times the
    constant of the reduced (M-1)-dimensional problem on the remaining
    N-1 vectors.  Apply repeatedly for several essential vectors; the
    factors compose multiplicatively.
    """
    if not c.spans:
        raise DefectiveConfiguration("configuration does not span")
    if not c.essential_flags[j]:
        raise NotEssential(f"column {j} is not essential")
    if c.m < 2:
        raise ValueError("cannot reduce a one-dimensional configuration")

    others = [k for k in range(c.n) if k != j]
    rest = c.a.column_subset(others).numpy()
    # the remaining vectors span exactly M-1 dimensions because j is essential
    u_span, u_comp = orthonormal_span_and_complement(rest, c.m - 1)
    u1 = u_comp[:, 0]
    aj = np.array(c.a.column(j), dtype=float)
    factor = 1.0 / abs(float(u1 @ aj))
    reduced = Matrix.from_numpy(u_span.T @ rest)
    return build_configuration(reduced, tol), factor


def factorize(c: Configuration, s: frozenset[int] | set[int],
              tol: TolerancePolicy = DEFAULT_TOL) -> Factorization:
    """Orthogonal factorization along the proper non-empty subset s.

    Any orthonormal completion is admissible (the split integral identity
    is basis-independent); the bases actually used are returned.
    """
    s = frozenset(s)
    if not s or s == frozenset(range(c.n)):
        raise EmptyOrFullSubset("subset must be proper and non-empty")
    if any(j < 0 or j >= c.n for j in s):
        raise ValueError("subset index out of range")

    cols = sorted(s)
    sub = c.a.column_subset(cols)
    r = rank(sub, tol)
    u, v = orthonormal_span_and_complement(sub.numpy(), r)
    an = c.a.numpy()
    b = Matrix.from_numpy(u.T @ an)
    if r == c.m:
        v_basis = None
        c_vectors = None
    else:
        v_basis = Matrix.from_numpy(v)
        c_vectors = Matrix.from_numpy(v.T @ an)
    return Factorization(
        subset=s,
        r=r,
        u_basis=Matrix.from_numpy(u),
        v_basis=v_basis,
        b_vectors=b,
        c_vectors=c_vectors,
    )
