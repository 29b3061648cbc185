"""Dense linear algebra with an explicit tolerance policy.

Everything else in the package sits on this module: an immutable matrix
value (optionally carrying an exact rational mirror of its entries), rank
decisions that prefer exact arithmetic whenever the input was rational,
projections, SPD inverse square roots, and the subset-expansion log-det
used to cross-check the solver objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .errors import NotSPD, RankAmbiguous, SingularGram, TooManySubsets

__all__ = [
    "TolerancePolicy",
    "DEFAULT_TOL",
    "Matrix",
    "rank",
    "projection_onto_row_space",
    "projection_diagonal_exact",
    "inverse_sqrt_spd",
    "cauchy_binet_logdet",
    "orthonormal_span_and_complement",
    "exact_rank",
    "exact_solve",
    "exact_nullspace",
    "exact_det",
    "exact_gram_inverse",
]

# Subset enumeration guard shared with the polytope module.
MAX_ENUMERATION_COLUMNS = 20


@dataclass(frozen=True)
class TolerancePolicy:
    """Numeric thresholds used by every tolerance-relative decision.

    rank_rel_tol:       singular values below rank_rel_tol * sigma_max count
                        as zero.
    psd_tol:            relative eigenvalue floor for SPD checks and the
                        allowed residual in projection identities.
    newton_tol:         Euler-Lagrange residual demanded of a converged solve.
    quadrature_rel_tol: relative drift allowed in conserved quantities of the
                        heat-flow quadratures.
    """

    rank_rel_tol: float = 1e-9
    psd_tol: float = 1e-10
    newton_tol: float = 1e-12
    quadrature_rel_tol: float = 1e-5

    def __post_init__(self) -> None:
        for name in ("rank_rel_tol", "psd_tol", "newton_tol", "quadrature_rel_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.rank_rel_tol >= 1:
            raise ValueError("rank_rel_tol must be < 1")


DEFAULT_TOL = TolerancePolicy()


def _as_exact(x) -> Fraction | None:
    """Exact value of an entry, or None if it is a genuine float."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, float) and x.is_integer():
        return Fraction(int(x))
    if isinstance(x, np.integer):
        return Fraction(int(x))
    return None


@dataclass(frozen=True)
class Matrix:
    """Immutable dense matrix, row-major, with an optional exact mirror.

    The mirror is present exactly when every entry was given as an int,
    Fraction or rational string; each float entry then equals the rational
    entry to within conversion rounding.
    """

    rows: int
    cols: int
    entries: tuple[float, ...]
    exact: tuple[Fraction, ...] | None = None

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ValueError("matrix must have at least one row and column")
        if len(self.entries) != self.rows * self.cols:
            raise ValueError("entry count does not match shape")
        if self.exact is not None and len(self.exact) != len(self.entries):
            raise ValueError("exact mirror does not match shape")

    @classmethod
    def from_rows(cls, data: Sequence[Sequence]) -> "Matrix":
        rows = len(data)
        cols = len(data[0])
        if any(len(r) != cols for r in data):
            raise ValueError("ragged rows")
        flat = [x for r in data for x in r]
        exacts = [_as_exact(x) for x in flat]
        if all(e is not None for e in exacts):
            exact = tuple(exacts)
            entries = tuple(float(e) for e in exact)
        else:
            exact = None
            entries = tuple(float(x) for x in flat)
        return cls(rows, cols, entries, exact)

    @classmethod
    def from_columns(cls, columns: Sequence[Sequence]) -> "Matrix":
        rows = len(columns[0])
        return cls.from_rows([[col[i] for col in columns] for i in range(rows)])

    @classmethod
    def from_numpy(cls, a: np.ndarray) -> "Matrix":
        a = np.asarray(a, dtype=float)
        if a.ndim != 2:
            raise ValueError("expected a 2-d array")
        return cls(a.shape[0], a.shape[1], tuple(float(x) for x in a.ravel()))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def has_exact(self) -> bool:
        return self.exact is not None

    def numpy(self) -> np.ndarray:
        return np.array(self.entries, dtype=float).reshape(self.rows, self.cols)

    def exact_rows(self) -> list[list[Fraction]]:
        if self.exact is None:
            raise ValueError("matrix has no exact mirror")
        return [
            list(self.exact[i * self.cols : (i + 1) * self.cols])
            for i in range(self.rows)
        ]

    def column(self, j: int) -> tuple[float, ...]:
        return tuple(self.entries[i * self.cols + j] for i in range(self.rows))

    def column_exact(self, j: int) -> tuple[Fraction, ...]:
        if self.exact is None:
            raise ValueError("matrix has no exact mirror")
        return tuple(self.exact[i * self.cols + j] for i in range(self.rows))

    def column_subset(self, indices: Iterable[int]) -> "Matrix":
        idx = list(indices)
        entries = tuple(
            self.entries[i * self.cols + j] for i in range(self.rows) for j in idx
        )
        exact = None
        if self.exact is not None:
            exact = tuple(
                self.exact[i * self.cols + j] for i in range(self.rows) for j in idx
            )
        return Matrix(self.rows, len(idx), entries, exact)

    def transpose(self) -> "Matrix":
        entries = tuple(
            self.entries[i * self.cols + j]
            for j in range(self.cols)
            for i in range(self.rows)
        )
        exact = None
        if self.exact is not None:
            exact = tuple(
                self.exact[i * self.cols + j]
                for j in range(self.cols)
                for i in range(self.rows)
            )
        return Matrix(self.cols, self.rows, entries, exact)


# -- exact rational elimination ----------------------------------------------

def _echelonize(rows: list[list[Fraction]]) -> int:
    """In-place fraction elimination; returns the rank."""
    if not rows:
        return 0
    n_rows, n_cols = len(rows), len(rows[0])
    piv = 0
    for col in range(n_cols):
        pivot_row = next((r for r in range(piv, n_rows) if rows[r][col] != 0), None)
        if pivot_row is None:
            continue
        rows[piv], rows[pivot_row] = rows[pivot_row], rows[piv]
        inv = 1 / rows[piv][col]
        rows[piv] = [x * inv for x in rows[piv]]
        for r in range(n_rows):
            if r != piv and rows[r][col] != 0:
                f = rows[r][col]
                rows[r] = [a - f * b for a, b in zip(rows[r], rows[piv])]
        piv += 1
        if piv == n_rows:
            break
    return piv


def exact_rank(rows: Sequence[Sequence[Fraction]]) -> int:
    return _echelonize([list(r) for r in rows])


def exact_solve(
    a_rows: Sequence[Sequence[Fraction]], b_rows: Sequence[Sequence[Fraction]]
) -> list[list[Fraction]]:
    """Solve A X = B exactly for square rational A; raises SingularGram."""
    n = len(a_rows)
    aug = [list(a_rows[i]) + list(b_rows[i]) for i in range(n)]
    if _echelonize(aug) < n:
        raise SingularGram("exact system is singular")
    return [row[n:] for row in aug]


def exact_gram_inverse(a_rows: Sequence[Sequence[Fraction]]) -> list[list[Fraction]]:
    n = len(a_rows)
    eye = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    return exact_solve(a_rows, eye)


def exact_nullspace(rows: Sequence[Sequence[Fraction]]) -> list[list[Fraction]]:
    """Basis of the right nullspace of a rational matrix."""
    work = [list(r) for r in rows]
    n_cols = len(work[0]) if work else 0
    rank_ = _echelonize(work)
    pivots: list[int] = []
    r = 0
    for col in range(n_cols):
        if r < rank_ and work[r][col] == 1 and all(
            work[k][col] == 0 for k in range(len(work)) if k != r
        ):
            pivots.append(col)
            r += 1
    free = [c for c in range(n_cols) if c not in pivots]
    basis = []
    for fc in free:
        vec = [Fraction(0)] * n_cols
        vec[fc] = Fraction(1)
        for r, pc in enumerate(pivots):
            vec[pc] = -work[r][fc]
        basis.append(vec)
    return basis


def exact_det(a_rows: Sequence[Sequence[Fraction]]) -> Fraction:
    n = len(a_rows)
    work = [list(r) for r in a_rows]
    det = Fraction(1)
    for col in range(n):
        pivot_row = next((r for r in range(col, n) if work[r][col] != 0), None)
        if pivot_row is None:
            return Fraction(0)
        if pivot_row != col:
            work[col], work[pivot_row] = work[pivot_row], work[col]
            det = -det
        det *= work[col][col]
        inv = 1 / work[col][col]
        for r in range(col + 1, n):
            if work[r][col] != 0:
                f = work[r][col] * inv
                work[r] = [a - f * b for a, b in zip(work[r], work[col])]
    return det


def exact_gram(m: Matrix) -> list[list[Fraction]]:
    """A A^t over the rationals."""
    rows = m.exact_rows()
    return [[sum(ri[k] * rj[k] for k in range(m.cols)) for rj in rows] for ri in rows]


# -- rank ---------------------------------------------------------------------

def rank(m: Matrix, tol: TolerancePolicy = DEFAULT_TOL) -> int:
    """Numerical rank by singular-value thresholding.

    With an exact mirror present the rank is decided by fraction-free
    elimination and the float path is only a consistency check.  Without a
    mirror, a singular value within a factor of 10 of the threshold (on
    either side) makes the decision unsafe and raises RankAmbiguous.
    """
    sigma = np.linalg.svd(m.numpy(), compute_uv=False)
    smax = sigma[0] if len(sigma) else 0.0
    threshold = tol.rank_rel_tol * smax
    float_rank = int(np.sum(sigma > threshold)) if smax > 0 else 0

    if m.has_exact:
        r = exact_rank(m.exact_rows())
        if r != float_rank:
            raise RankAmbiguous(
                f"exact rank {r} disagrees with float rank {float_rank}; "
                "input is numerically degenerate"
            )
        return r

    if smax > 0:
        near = (sigma > threshold / 10.0) & (sigma < threshold * 10.0)
        if np.any(near):
            raise RankAmbiguous(
                "singular value within a factor 10 of the rank threshold "
                "and no exact mirror available"
            )
    return float_rank


# -- projections --------------------------------------------------------------

def projection_onto_row_space(a: Matrix, tol: TolerancePolicy = DEFAULT_TOL) -> Matrix:
    """Orthogonal projection P = A^t (A A^t)^{-1} A onto Img(A^t).

    Requires full row rank; P is symmetric, idempotent and has trace equal
    to the number of rows, each within psd_tol.
    """
    an = a.numpy()
    gram = an @ an.T
    eig = np.linalg.eigvalsh(gram)
    if eig[0] <= tol.psd_tol * max(eig[-1], 0.0) or eig[0] <= 0:
        raise SingularGram("A A^t is singular at tolerance; A does not span")
    p = an.T @ np.linalg.solve(gram, an)
    p = 0.5 * (p + p.T)
    m = a.rows
    if np.max(np.abs(p @ p - p)) > 100 * tol.psd_tol or abs(np.trace(p) - m) > 100 * tol.psd_tol:
        raise SingularGram("projection identities fail; input too ill-conditioned")
    return Matrix.from_numpy(p)


def projection_diagonal_exact(a: Matrix) -> tuple[Fraction, ...]:
    """Diagonal of the projection onto Img(A^t), in exact arithmetic.

    P_{jj} = a_j . (A A^t)^{-1} a_j for column j.
    """
    gram = exact_gram(a)
    ginv = exact_gram_inverse(gram)
    diag = []
    for j in range(a.cols):
        col = a.column_exact(j)
        val = sum(
            col[i] * ginv[i][k] * col[k] for i in range(a.rows) for k in range(a.rows)
        )
        diag.append(val)
    return tuple(diag)


# -- SPD inverse square root --------------------------------------------------

def inverse_sqrt_spd(m: Matrix, tol: TolerancePolicy = DEFAULT_TOL) -> Matrix:
    """Symmetric R with R m R = I, via eigendecomposition."""
    mn = m.numpy()
    if m.rows != m.cols:
        raise NotSPD("matrix is not square")
    if np.max(np.abs(mn - mn.T)) > tol.psd_tol * max(1.0, np.max(np.abs(mn))):
        raise NotSPD("matrix is not symmetric at tolerance")
    vals, vecs = np.linalg.eigh(0.5 * (mn + mn.T))
    if vals[0] <= tol.psd_tol * max(vals[-1], 0.0) or vals[0] <= 0:
        raise NotSPD("matrix has an eigenvalue at or below the PSD floor")
    r = (vecs / np.sqrt(vals)) @ vecs.T
    return Matrix.from_numpy(0.5 * (r + r.T))


# -- Cauchy-Binet cross-check -------------------------------------------------

def cauchy_binet_logdet(a: Matrix, t: Sequence[float]) -> float:
    """ln det(A e^T A^t) by explicit M-subset enumeration.

    Expands the determinant as sum over column subsets S of size M of
    exp(sum_{j in S} t_j) * det(A_S A_S^t), with log-sum-exp stabilization.
    Deliberately independent of the direct determinant path so it can serve
    as an oracle for it.
    """
    m, n = a.rows, a.cols
    if len(t) != n:
        raise ValueError("t must have one entry per column")
    if n > MAX_ENUMERATION_COLUMNS:
        raise TooManySubsets(f"refusing to enumerate C({n},{m}) subsets")
    an = a.numpy()
    t = np.asarray(t, dtype=float)
    log_terms = []
    for subset in combinations(range(n), m):
        cols = an[:, subset]
        if a.has_exact:
            sub_rows = [[a.exact[i * a.cols + j] for j in subset] for i in range(m)]
            gram = [
                [sum(ri[k] * rj[k] for k in range(m)) for rj in sub_rows]
                for ri in sub_rows
            ]
            det = exact_det(gram)
            if det == 0:
                continue
            log_terms.append(float(sum(t[j] for j in subset)) + math.log(float(det)))
        else:
            sign, logdet = np.linalg.slogdet(cols @ cols.T)
            if sign <= 0:
                continue
            log_terms.append(float(sum(t[j] for j in subset)) + logdet)
    if not log_terms:
        raise SingularGram("no basis subset: configuration does not span")
    peak = max(log_terms)
    return peak + math.log(sum(math.exp(x - peak) for x in log_terms))


# -- deterministic orthonormal bases -------------------------------------------

def orthonormal_span_and_complement(
    vectors: np.ndarray, span_rank: int
) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal basis of the column span and of its orthogonal complement.

    Column-pivoted QR makes the result reproducible across runs; column
    signs are normalized so the largest-magnitude component is positive.
    """
    m = vectors.shape[0]
    q, r, _ = scipy.linalg.qr(vectors, pivoting=True)
    u = q[:, :span_rank].copy()
    v = q[:, span_rank:].copy()
    for block in (u, v):
        for j in range(block.shape[1]):
            k = int(np.argmax(np.abs(block[:, j])))
            if block[k, j] < 0:
                block[:, j] = -block[:, j]
    return u, v
