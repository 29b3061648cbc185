"""Feasibility polytope of reciprocal exponents: membership, criticality,
vertices, and the recursive critical-set decomposition.

The polytope K_A consists of vectors z with 0 <= z_j <= 1, sum z_j = M and
sum_{j in S} z_j <= r(S) for every proper non-empty subset S, where r(S) is
the rank of the columns indexed by S.  Criticality (equality) is an exact
combinatorial predicate, so every comparison here runs in rational
arithmetic: float inputs are snapped to rationals with denominator <= 10^6
and the snap is recorded in the report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.optimize

from .configuration import Configuration, Factorization, build_configuration, factorize
from .errors import NotMember, RankAmbiguous, TooManySubsets
from .linalg import DEFAULT_TOL, Matrix, TolerancePolicy, exact_rank

__all__ = [
    "ExponentVector",
    "PolytopeReport",
    "DecompositionNode",
    "SNAP_MAX_DENOMINATOR",
    "membership",
    "least_critical_superset",
    "vertices",
    "membership_via_hull",
    "decompose",
    "subset_ranks",
]

SNAP_MAX_DENOMINATOR = 10**6


def snap_to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(x).limit_denominator(SNAP_MAX_DENOMINATOR)


@dataclass(frozen=True)
class ExponentVector:
    """Reciprocal exponents z_j = 1/p_j with 0 <= z_j <= 1.

    Entries are Fractions when the input was rational, floats otherwise.
    The scaling condition sum z_j = M is checked against a configuration by
    the operations that take one.
    """

    z: tuple

    def __post_init__(self) -> None:
        for v in self.z:
            if isinstance(v, Fraction):
                ok = 0 <= v <= 1
            else:
                ok = -1e-12 <= float(v) <= 1 + 1e-12
            if not ok:
                raise ValueError(f"entry {v} outside [0, 1]")

    @classmethod
    def from_reciprocals(cls, values: Sequence) -> "ExponentVector":
        out = []
        for v in values:
            if isinstance(v, (Fraction, int)):
                out.append(Fraction(v))
            elif isinstance(v, str):
                out.append(Fraction(v))
            else:
                out.append(float(v))
        return cls(tuple(out))

    @classmethod
    def from_exponents(cls, ps: Sequence) -> "ExponentVector":
        """Build from L^p indices; 'inf' (or float inf) maps to z = 0."""
        out = []
        for p in ps:
            if isinstance(p, str):
                if p.strip().lower() in ("inf", "infinity"):
                    out.append(Fraction(0))
                    continue
                p = Fraction(p)
            if isinstance(p, float) and math.isinf(p):
                out.append(Fraction(0))
                continue
            if isinstance(p, (int, Fraction)):
                if p < 1:
                    raise ValueError("exponents must lie in [1, inf]")
                out.append(Fraction(1) / Fraction(p))
            else:
                if p < 1:
                    raise ValueError("exponents must lie in [1, inf]")
                out.append(1.0 / float(p))
        return cls(tuple(out))

    def __len__(self) -> int:
        return len(self.z)

    @property
    def is_exact(self) -> bool:
        return all(isinstance(v, Fraction) for v in self.z)

    def exact(self) -> tuple[tuple[Fraction, ...], float]:
        """Rational image of z plus the largest snapping error."""
        snapped = tuple(snap_to_fraction(v) for v in self.z)
        err = max(abs(float(s) - float(v)) for s, v in zip(snapped, self.z))
        return snapped, err

    def floats(self) -> np.ndarray:
        return np.array([float(v) for v in self.z], dtype=float)

    def p_values(self) -> tuple:
        """L^p indices; z = 0 maps back to inf."""
        out = []
        for v in self.z:
            if v == 0:
                out.append(math.inf)
            elif isinstance(v, Fraction):
                out.append(Fraction(1) / v)
            else:
                out.append(1.0 / float(v))
        return tuple(out)


@dataclass(frozen=True)
class PolytopeReport:
    member: bool
    interior: bool
    critical_sets: tuple[frozenset, ...]
    supercritical_witness: Optional[frozenset]
    least_critical_containing: dict
    z_exact: tuple[Fraction, ...]
    snapped: bool
    snap_error: float


# -- subset ranks --------------------------------------------------------------


def _subset_ranks_exact(c: Configuration) -> dict[int, int]:
    """Rank of every column subset, keyed by bitmask, by shared elimination.

    Depth-first enumeration extends each subset by larger indices only, so
    each subset performs one column reduction against its parent's echelon
    basis.
    """
    n = c.n
    cols = [list(c.a.column_exact(j)) for j in range(n)]
    ranks: dict[int, int] = {0: 0}

    def reduce_against(basis: list[tuple[int, list[Fraction]]], vec: list[Fraction]):
        v = list(vec)
        for pivot_pos, row in basis:
            if v[pivot_pos] != 0:
                f = v[pivot_pos] / row[pivot_pos]
                v = [a - f * b for a, b in zip(v, row)]
        return v

    def dfs(mask: int, start: int, basis) -> None:
        for j in range(start, n):
            v = reduce_against(basis, cols[j])
            pivot = next((i for i, x in enumerate(v) if x != 0), None)
            new_mask = mask | (1 << j)
            if pivot is None:
                ranks[new_mask] = len(basis)
                dfs(new_mask, j + 1, basis)
            else:
                ranks[new_mask] = len(basis) + 1
                dfs(new_mask, j + 1, basis + [(pivot, v)])

    dfs(0, 0, [])
    return ranks


def _subset_ranks_float(c: Configuration, tol: TolerancePolicy) -> dict[int, int]:
    n = c.n
    cols = [np.array(c.a.column(j), dtype=float) for j in range(n)]
    ranks: dict[int, int] = {0: 0}

    def dfs(mask: int, start: int, basis: list[np.ndarray]) -> None:
        for j in range(start, n):
            v = cols[j].copy()
            for b in basis:
                v -= (b @ v) * b
            new_mask = mask | (1 << j)
            if np.linalg.norm(v) > tol.rank_rel_tol * max(np.linalg.norm(cols[j]), 1.0):
                ranks[new_mask] = len(basis) + 1
                dfs(new_mask, j + 1, basis + [v / np.linalg.norm(v)])
            else:
                ranks[new_mask] = len(basis)
                dfs(new_mask, j + 1, basis)

    dfs(0, 0, [])
    return ranks


@lru_cache(maxsize=64)
def _subset_ranks_cached(c: Configuration, tol: TolerancePolicy) -> dict[int, int]:
    if c.n > 20:
        raise TooManySubsets(f"subset enumeration refused for N = {c.n} > 20")
    if c.a.has_exact:
        return _subset_ranks_exact(c)
    return _subset_ranks_float(c, tol)


def subset_ranks(c: Configuration, tol: TolerancePolicy = DEFAULT_TOL) -> dict[int, int]:
    """Rank of every column subset, keyed by bitmask."""
    return _subset_ranks_cached(c, tol)


def _mask(s) -> int:
    m = 0
    for j in s:
        m |= 1 << j
    return m


def _unmask(mask: int, n: int) -> frozenset[int]:
    return frozenset(j for j in range(n) if mask >> j & 1)


def _validated_exact_z(c: Configuration, z) -> tuple[tuple[Fraction, ...], bool, float]:
    if not isinstance(z, ExponentVector):
        z = ExponentVector.from_reciprocals(z)
    if len(z) != c.n:
        raise ValueError("exponent vector length does not match configuration")
    zx, err = z.exact()
    snapped = not z.is_exact
    if sum(zx) != c.m:
        raise ValueError(
            f"scaling condition violated: sum z = {sum(zx)} but M = {c.m}"
        )
    return zx, snapped, err


def _classify_subsets(
    n: int, zx: Sequence[Fraction], rank_of: Callable[[frozenset], int]
) -> tuple[list[frozenset], Optional[frozenset]]:
    """Critical subsets plus a supercritical witness (least |S|, then lex)."""
    critical: list[frozenset] = []
    witness: Optional[frozenset] = None
    witness_key = None
    for mask in range(1, (1 << n) - 1):
        s = _unmask(mask, n)
        total = sum(zx[j] for j in s)
        r = rank_of(s)
        if total > r:
            key = (len(s), tuple(sorted(s)))
            if witness_key is None or key < witness_key:
                witness, witness_key = s, key
        elif total == r:
            critical.append(s)
    critical.sort(key=lambda s: (len(s), tuple(sorted(s))))
    return critical, witness


def membership(
    c: Configuration, z, tol: TolerancePolicy = DEFAULT_TOL
) -> PolytopeReport:
    """Classify every proper non-empty subset and report membership.

    Criticality comparisons are exact; the full index set (always critical
    under the scaling condition) is excluded.
    """
    c.require_clean()
    if c.n > 20:
        raise TooManySubsets(f"subset enumeration refused for N = {c.n} > 20")
    zx, snapped, err = _validated_exact_z(c, z)
    ranks = subset_ranks(c, tol)
    rank_of = lambda s: ranks[_mask(s)]
    critical, witness = _classify_subsets(c.n, zx, rank_of)

    member = witness is None
    interior = member and not critical
    least: dict[frozenset, Optional[frozenset]] = {}
    if member:
        for j in range(c.n):
            supersets = [s for s in critical if j in s]
            if supersets:
                common = frozenset.intersection(*supersets)
                least[frozenset({j})] = common
            else:
                least[frozenset({j})] = None
    return PolytopeReport(
        member=member,
        interior=interior,
        critical_sets=tuple(critical),
        supercritical_witness=witness,
        least_critical_containing=least,
        z_exact=zx,
        snapped=snapped,
        snap_error=err,
    )


def least_critical_superset(
    c: Configuration, z, seed, tol: TolerancePolicy = DEFAULT_TOL
) -> Optional[frozenset]:
    """Least critical set containing seed, or None when none exists.

    The lattice property is re-checked: intersections of critical supersets
    of the seed must themselves be critical.
    """
    seed = frozenset(seed)
    report = membership(c, z, tol)
    if not report.member:
        raise NotMember(f"supercritical witness {sorted(report.supercritical_witness)}")
    supersets = [s for s in report.critical_sets if seed <= s]
    if not supersets:
        return None
    ranks = subset_ranks(c, tol)
    zx = report.z_exact
    for s1, s2 in combinations(supersets, 2):
        inter = s1 & s2
        if inter:
            total = sum(zx[j] for j in inter)
            if total != ranks[_mask(inter)]:
                raise AssertionError(
                    "critical-set family is not intersection-closed; "
                    "this contradicts the submodularity of the rank function"
                )
    common = frozenset.intersection(*supersets)
    return common


def vertices(c: Configuration, tol: TolerancePolicy = DEFAULT_TOL) -> list[ExponentVector]:
    """All 0/1 exponent vectors supported on basis M-subsets."""
    if not c.spans:
        raise NotMember("configuration does not span; the polytope is empty")
    if c.n > 20 or math.comb(c.n, c.m) > 500_000:
        raise TooManySubsets("vertex enumeration refused")
    ranks = subset_ranks(c, tol)
    out = []
    for subset in combinations(range(c.n), c.m):
        if ranks[_mask(subset)] == c.m:
            zvec = [Fraction(0)] * c.n
            for j in subset:
                zvec[j] = Fraction(1)
            out.append(ExponentVector(tuple(zvec)))
    return out


# -- convex-hull membership (independent route) --------------------------------


def _exact_phase1_feasible(columns: list[list[Fraction]], rhs: list[Fraction]) -> bool:
    """Phase-1 simplex over the rationals: is there x >= 0 with Ax = b?

    Dantzig pivoting with a Bland fallback after a pivot budget guarantees
    termination on these highly degenerate 0/1 systems.
    """
    m = len(rhs)
    n = len(columns)
    rows = [[columns[j][i] for j in range(n)] for i in range(m)]
    for i in range(m):
        if rhs[i] < 0:
            rows[i] = [-x for x in rows[i]]
            rhs = list(rhs)
            rhs[i] = -rhs[i]
    # tableau columns: structural | artificial | rhs
    width = n + m + 1
    tab = []
    for i in range(m):
        row = rows[i] + [Fraction(int(k == i)) for k in range(m)] + [rhs[i]]
        tab.append(row)
    obj = [Fraction(0)] * width
    for i in range(m):
        obj = [a - b for a, b in zip(obj, tab[i])]
    for k in range(m):
        obj[n + k] = Fraction(0)
    basis = [n + i for i in range(m)]

    pivots = 0
    bland_after = 200
    while True:
        entering = None
        if pivots < bland_after:
            best = Fraction(0)
            for j in range(n + m):
                if obj[j] < best:
                    best, entering = obj[j], j
        else:
            entering = next((j for j in range(n + m) if obj[j] < 0), None)
        if entering is None:
            break
        ratio = None
        leaving = None
        for i in range(m):
            a = tab[i][entering]
            if a > 0:
                r = tab[i][width - 1] / a
                if ratio is None or r < ratio or (r == ratio and basis[i] < basis[leaving]):
                    ratio, leaving = r, i
        if leaving is None:
            raise AssertionError("phase-1 objective unbounded; impossible")
        piv = tab[leaving][entering]
        tab[leaving] = [x / piv for x in tab[leaving]]
        for i in range(m):
            if i != leaving and tab[i][entering] != 0:
                f = tab[i][entering]
                tab[i] = [a - f * b for a, b in zip(tab[i], tab[leaving])]
        if obj[entering] != 0:
            f = obj[entering]
            obj = [a - f * b for a, b in zip(obj, tab[leaving])]
        basis[leaving] = entering
        pivots += 1
        if pivots > 10_000:
            raise AssertionError("simplex pivot budget exceeded")
    return -obj[width - 1] == 0


def _exact_support_solution(
    columns: list[list[Fraction]], rhs: list[Fraction], support: list[int]
) -> bool:
    """Certify feasibility exactly on a candidate support from the float LP."""
    m = len(rhs)
    aug = [[columns[j][i] for j in support] + [rhs[i]] for i in range(m)]
    work = [row[:] for row in aug]
    n_cols = len(support)
    piv_rows: list[tuple[int, int]] = []
    r = 0
    for col in range(n_cols):
        pr = next((i for i in range(r, m) if work[i][col] != 0), None)
        if pr is None:
            continue
        work[r], work[pr] = work[pr], work[r]
        inv = 1 / work[r][col]
        work[r] = [x * inv for x in work[r]]
        for i in range(m):
            if i != r and work[i][col] != 0:
                f = work[i][col]
                work[i] = [a - f * b for a, b in zip(work[i], work[r])]
        piv_rows.append((r, col))
        r += 1
    # consistency of the dropped rows
    for i in range(r, m):
        if work[i][n_cols] != 0:
            return False
    x = [Fraction(0)] * n_cols
    for row_idx, col in piv_rows:
        x[col] = work[row_idx][n_cols]
        if any(work[row_idx][c] != 0 for c in range(n_cols) if c != col):
            return False  # underdetermined support; let the simplex decide
    return all(v >= 0 for v in x)


def membership_via_hull(
    c: Configuration, z, tol: TolerancePolicy = DEFAULT_TOL
) -> bool:
    """Is z a convex combination of the 0/1 vertex indicators?

    A float LP proposes the verdict, which is then certified in exact
    arithmetic: a rational feasible point on the proposed support, or a
    full rational phase-1 simplex when the float answer cannot be certified
    directly.  Independent of the subset-rank membership test.
    """
    verts = vertices(c, tol)
    raw = z.z if isinstance(z, ExponentVector) else tuple(z)
    # deliberately no box validation: out-of-box vectors are simply
    # infeasible for the hull program
    zx = tuple(snap_to_fraction(v) for v in raw)
    if len(zx) != c.n:
        raise ValueError("exponent vector length does not match configuration")

    columns = [[Fraction(v.z[i]) for i in range(c.n)] + [Fraction(1)] for v in verts]
    rhs = list(zx) + [Fraction(1)]

    a_eq = np.array([[float(x) for x in col] for col in columns], dtype=float).T
    b_eq = np.array([float(x) for x in rhs], dtype=float)
    lp = scipy.optimize.linprog(
        c=np.zeros(len(columns)),
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=(0, None),
        method="highs",
    )
    if lp.status == 0:
        support = [j for j, v in enumerate(lp.x) if v > 1e-9]
        if support and _exact_support_solution(columns, rhs, support):
            return True
    return _exact_phase1_feasible(columns, rhs)


# -- decomposition -------------------------------------------------------------


@dataclass(frozen=True)
class Split:
    critical_local: frozenset[int]
    critical_global: frozenset[int]
    factorization: Factorization
    left: "DecompositionNode"
    right: "DecompositionNode"


@dataclass(frozen=True)
class DecompositionNode:
    """One node of the critical-set decomposition tree.

    indices maps the node's columns back to the original problem; a None
    configuration marks the trivial zero-dimensional leaf (every remaining
    exponent is infinite).  deleted_infinite records columns whose vector
    vanished in the contracted coordinates; this forces z_j = 0 and the
    corresponding factor is deletable without affecting the constant.
    """

    configuration: Optional[Configuration]
    exponents: tuple[Fraction, ...]
    indices: tuple[int, ...]
    leaf_interior: bool
    split: Optional[Split] = None
    deleted_infinite: tuple[int, ...] = ()
    contracted: frozenset = frozenset()

    @property
    def is_leaf(self) -> bool:
        return self.split is None

    def leaves(self) -> list["DecompositionNode"]:
        if self.split is None:
            return [self]
        return self.split.left.leaves() + self.split.right.leaves()


def decompose(
    c: Configuration, z, tol: TolerancePolicy = DEFAULT_TOL
) -> DecompositionNode:
    """Peel critical subsets of least cardinality until every leaf is
    interior (or trivially zero-dimensional).

    Criticality inside children is decided exactly through the root's
    subset ranks: a left child restricts the rank function to S, a right
    child contracts it by S.
    """
    report = membership(c, z, tol)
    if not report.member:
        raise NotMember(
            f"supercritical witness {sorted(report.supercritical_witness)}"
        )
    root_ranks = subset_ranks(c, tol)

    def rank_global(subset: frozenset[int]) -> int:
        return root_ranks[_mask(subset)]

    def build(
        config: Optional[Configuration],
        zx: tuple[Fraction, ...],
        gidx: tuple[int, ...],
        contracted: frozenset[int],
        deleted: tuple[int, ...],
    ) -> DecompositionNode:
        if config is None:
            return DecompositionNode(None, zx, gidx, True, None, deleted, contracted)
        n_local = config.n
        base = rank_global(contracted) if contracted else 0

        def rank_local(s: frozenset[int]) -> int:
            gs = frozenset(gidx[j] for j in s)
            return rank_global(gs | contracted) - base

        critical, witness = _classify_subsets(n_local, zx, rank_local)
        if witness is not None:
            raise AssertionError("child problem left the polytope; decomposition bug")
        if not critical:
            return DecompositionNode(config, zx, gidx, True, None, deleted, contracted)

        s_local = critical[0]
        s_sorted = sorted(s_local)
        comp_sorted = [j for j in range(n_local) if j not in s_local]
        fact = factorize(config, s_local, tol)
        r = fact.r
        if r != rank_local(s_local):
            raise RankAmbiguous("float factorization rank disagrees with exact rank")

        left_cfg = build_configuration(fact.b_vectors.column_subset(s_sorted), tol)
        left_z = tuple(zx[j] for j in s_sorted)
        left_g = tuple(gidx[j] for j in s_sorted)
        left = build(left_cfg, left_z, left_g, contracted, ())

        comp_z = tuple(zx[j] for j in comp_sorted)
        comp_g = tuple(gidx[j] for j in comp_sorted)
        new_contracted = contracted | frozenset(gidx[j] for j in s_local)
        if fact.c_vectors is None:
            if any(v != 0 for v in comp_z):
                raise AssertionError("zero-dimensional child with finite exponents")
            right = build(None, comp_z, comp_g, new_contracted, ())
        else:
            cmat = fact.c_vectors.column_subset(comp_sorted)
            cn = cmat.numpy()
            scale = max(np.max(np.abs(cn)), 1.0)
            keep = [k for k in range(cmat.cols)
                    if np.linalg.norm(cn[:, k]) > 1e-12 * scale]
            dropped = tuple(comp_g[k] for k in range(cmat.cols) if k not in keep)
            for k in range(cmat.cols):
                if k not in keep and comp_z[k] != 0:
                    raise AssertionError(
                        "vanishing contracted column with nonzero exponent"
                    )
            if not keep:
                right = build(None, comp_z, comp_g, new_contracted, dropped)
            else:
                right_cfg = build_configuration(cmat.column_subset(keep), tol)
                right_z = tuple(comp_z[k] for k in keep)
                right_g = tuple(comp_g[k] for k in keep)
                right = build(right_cfg, right_z, right_g, new_contracted, dropped)

        split = Split(
            critical_local=s_local,
            critical_global=frozenset(gidx[j] for j in s_local),
            factorization=fact,
            left=left,
            right=right,
        )
        return DecompositionNode(config, zx, gidx, False, split, deleted, contracted)

    return build(c, report.z_exact, tuple(range(c.n)), frozenset(), ())
