"""Heat-flow interpolation: evolves each profile's p-th power by its own
1-D heat equation and certifies that the product integral is monotone and
approaches the Gaussian constant.

Evolution is the exact semigroup applied to the piecewise-linear
interpolant of the sampled initial data (Gaussian-kernel convolution in
closed form via erf), so there is no time-stepping error and no stability
constraint; the only numerical error is quadrature of the product integral
over the box, estimated by step-halving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import erf

from .configuration import Configuration
from .errors import GridTooCoarse, UnsupportedDimension
from .linalg import DEFAULT_TOL, Matrix, TolerancePolicy, inverse_sqrt_spd
from .polytope import ExponentVector

__all__ = [
    "Profile",
    "FlowProblem",
    "FlowTrace",
    "MonotonicityReport",
    "indicator_profile",
    "gaussian_profile",
    "q_matrix",
    "make_flow_problem",
    "evolve",
    "certify_monotone",
    "dissipation_values",
]

POSITIVITY_FLOOR = 1e-300
DENSITY_FLOOR = 1e-30


@dataclass(frozen=True)
class Profile:
    """Sampled nonnegative 1-D profile with compact support.

    The function used throughout is the piecewise-linear interpolant of
    (grid, values); it must vanish at both grid ends.
    """

    grid: np.ndarray
    values: np.ndarray
    compact: bool = True

    def __post_init__(self) -> None:
        g, v = np.asarray(self.grid), np.asarray(self.values)
        if g.ndim != 1 or g.shape != v.shape or len(g) < 3:
            raise ValueError("profile needs matching 1-d grid and values")
        if np.any(np.diff(g) <= 0):
            raise ValueError("grid must be strictly increasing")
        if np.any(v < 0):
            raise ValueError("profile values must be nonnegative")
        if v[0] != 0.0 or v[-1] != 0.0:
            raise ValueError("profile must vanish at the grid ends")


def indicator_profile(half_width: float = 1.0, step: float = 0.0025) -> Profile:
    """Piecewise-linear surrogate of the indicator of [-a, a]: value one on
    the interior nodes, ramping to zero over one cell at each edge."""
    a = float(half_width)
    n = int(round(2 * a / step)) + 1
    grid = np.linspace(-a - step, a + step, n + 2)
    values = np.ones_like(grid)
    values[0] = values[-1] = 0.0
    return Profile(grid=grid, values=values)


def gaussian_profile(s: float, step: float = 0.01, radius_sigmas: float = 8.0) -> Profile:
    """exp(-s^2 y^2 / 4) truncated at radius_sigmas standard deviations."""
    sigma = math.sqrt(2.0) / s
    r = radius_sigmas * sigma
    n = max(int(round(2 * r / step)) + 1, 201)
    grid = np.linspace(-r, r, n)
    values = np.exp(-0.25 * (s * grid) ** 2)
    values = values - values[0]
    values[values < 0] = 0.0
    return Profile(grid=grid, values=values)


def q_matrix(c: Configuration, z, r: Matrix) -> Matrix:
    """Q_ij = delta_ij p_j |R a_j|^2 - (R a_i).(R a_j), an N x N matrix
    indexed by the functions."""
    if not isinstance(z, ExponentVector):
        z = ExponentVector.from_reciprocals(z)
    zf = z.floats()
    if np.any(zf <= 0):
        raise ValueError("q_matrix needs every exponent finite (z_j > 0)")
    ra = r.numpy() @ c.a.numpy()
    gram = ra.T @ ra
    q = np.diag((1.0 / zf) * np.diag(gram)) - gram
    return Matrix.from_numpy(q)


@dataclass(frozen=True)
class FlowProblem:
    """Everything evolve() needs: the configuration, exponents, stationary
    widths, the kernel matrix R = (A S^2 A^t)^{-1/2}, the per-function
    diffusion constants |R a_j|^2, and the sampled initial profiles."""

    configuration: Configuration
    z: ExponentVector
    s: np.ndarray
    r_matrix: Matrix
    diffusions: np.ndarray
    initial: tuple[Profile, ...]
    d_value: Optional[float]
    tol: TolerancePolicy


@dataclass(frozen=True)
class FlowTrace:
    times: tuple[float, ...]
    eta_values: tuple[float, ...]
    eta_errors: tuple[float, ...]
    norms: tuple[tuple[float, ...], ...]
    norm_product: float
    limit_estimate: float


@dataclass(frozen=True)
class MonotonicityReport:
    monotone: bool
    min_increment: float
    tolerance_used: float
    limit_gap: Optional[float]


def make_flow_problem(
    c: Configuration,
    z,
    s,
    initial: Sequence[Profile],
    tol: TolerancePolicy = DEFAULT_TOL,
    d_value: Optional[float] = None,
    r_matrix: Optional[Matrix] = None,
    enforce_stationarity: bool = True,
) -> FlowProblem:
    """Assemble a flow problem; by default R is the inverse square root of
    A S^2 A^t and the widths must be stationary, which makes the diffusion
    constants equal z_j / s_j^2 and the dissipation matrix Q positive
    semidefinite.  Pass enforce_stationarity=False (with an explicit
    r_matrix) to study deliberately mismatched kernels.
    """
    if not isinstance(z, ExponentVector):
        z = ExponentVector.from_reciprocals(z)
    zf = z.floats()
    if np.any(zf <= 0):
        raise ValueError("heat flow needs every exponent finite")
    if len(initial) != c.n:
        raise ValueError("one initial profile per column is required")
    s = np.asarray(s, dtype=float)
    a = c.a.numpy()
    if r_matrix is None:
        r_matrix = inverse_sqrt_spd(Matrix.from_numpy((a * (s**2)[None, :]) @ a.T), tol)
    ra = r_matrix.numpy() @ a
    diffusions = np.sum(ra * ra, axis=0)
    if enforce_stationarity:
        expected = zf / s**2
        if np.max(np.abs(diffusions - expected)) > 1e-8 * max(1.0, np.max(expected)):
            raise ValueError(
                "diffusion constants do not match z_j / s_j^2; the widths "
                "are not stationary for these exponents"
            )
        q = q_matrix(c, z, r_matrix).numpy()
        if np.linalg.eigvalsh(q)[0] < -100 * tol.psd_tol:
            raise ValueError("dissipation matrix is not PSD at tolerance")
    return FlowProblem(
        configuration=c,
        z=z,
        s=s,
        r_matrix=r_matrix,
        diffusions=diffusions,
        initial=tuple(initial),
        d_value=d_value,
        tol=tol,
    )


# -- exact piecewise-linear heat evolution --------------------------------------


def _evolved_values(profile: Profile, diffusion: float, t: float,
                    y: np.ndarray, derivative: bool = False) -> np.ndarray:
    """Heat evolution of the piecewise-linear interpolant, evaluated at y.

    Closed form per cell [a, b] with values (va, vb): with the kernel cdf
    Phi and pdf phi at standard deviation sigma = sqrt(2 D t),

      u(y) = sum_k va DPhi + m_k [ (y - a) DPhi - s^2 (phi(y-b) - phi(y-a)) ]

    and u'(y) = sum_k m_k DPhi, where DPhi = Phi(y-a) - Phi(y-b).
    """
    nodes = profile.grid
    vals = profile.values
    if t <= 0.0:
        if derivative:
            slopes = np.diff(vals) / np.diff(nodes)
            idx = np.clip(np.searchsorted(nodes, y, side="right") - 1, 0, len(slopes) - 1)
            out = slopes[idx]
            out[(y <= nodes[0]) | (y >= nodes[-1])] = 0.0
            return out
        return np.interp(y, nodes, vals, left=0.0, right=0.0)
    sigma = math.sqrt(2.0 * diffusion * t)
    diffs = y[:, None] - nodes[None, :]
    cdf = 0.5 * (1.0 + erf(diffs / (sigma * math.sqrt(2.0))))
    slopes = np.diff(vals) / np.diff(nodes)
    dphi = cdf[:, :-1] - cdf[:, 1:]
    if derivative:
        return dphi @ slopes
    pdf = np.exp(-0.5 * (diffs / sigma) ** 2) / (sigma * math.sqrt(2.0 * math.pi))
    contrib = (
        vals[:-1][None, :] * dphi
        + slopes[None, :] * ((y[:, None] - nodes[:-1][None, :]) * dphi
                             - sigma**2 * (pdf[:, 1:] - pdf[:, :-1]))
    )
    return contrib.sum(axis=1)


def _profile_range(problem: FlowProblem, j: int, t: float) -> tuple[float, float]:
    g = problem.initial[j].grid
    pad = 10.0 * math.sqrt(2.0 * problem.diffusions[j] * max(t, 0.0))
    return float(g[0]) - pad, float(g[-1]) + pad


def _xi_halfwidth(problem: FlowProblem) -> float:
    a = problem.configuration.a.numpy()
    zf = problem.z.floats()
    lam_min = float(np.linalg.eigvalsh(a @ a.T)[0])
    spread = max(
        float(np.max(np.abs(p.grid))) + 10.0 * math.sqrt(2.0 * d / z)
        for p, d, z in zip(problem.initial, problem.diffusions, zf)
    )
    return spread * math.sqrt(problem.configuration.n / lam_min)


def _eta_on_mesh(problem: FlowProblem, t: float, step: float,
                 halfwidth: float, profiles_1d) -> float:
    """Product integral by tensor trapezoid on the self-similar mesh
    x = sqrt(1+t) * xi."""
    m = problem.configuration.m
    scale = math.sqrt(1.0 + t)
    n = int(math.ceil(2.0 * halfwidth / step)) + 1
    axis = np.linspace(-halfwidth, halfwidth, n)
    mesh = np.meshgrid(*([axis] * m), indexing="ij", sparse=True)
    a = problem.configuration.a.numpy()
    integrand = None
    for j in range(problem.configuration.n):
        arg = sum(a[k, j] * mesh[k] for k in range(m)) * scale
        yg, fg = profiles_1d[j]
        f = np.interp(arg, yg, fg, left=0.0, right=0.0)
        integrand = f if integrand is None else integrand * f
    val = integrand
    for _ in range(m):
        val = np.trapezoid(val, axis, axis=-1)
    return float(val) * scale**m


def evolve(problem: FlowProblem, t_grid: Sequence[float],
           xi_step: Optional[float] = None, profile_points: int = 4001) -> FlowTrace:
    """Evolve every profile exactly and record eta(t), its quadrature error
    estimate (step halving) and the conserved norms."""
    c = problem.configuration
    if c.m > 3:
        raise UnsupportedDimension("tensor quadrature limited to M <= 3")
    times = sorted(float(t) for t in t_grid)
    if times[0] < 0:
        raise ValueError("negative times not allowed")
    if xi_step is None:
        xi_step = 0.05 if c.m <= 2 else 0.2
    zf = problem.z.floats()
    p_vals = 1.0 / zf
    halfwidth = _xi_halfwidth(problem)

    initial_norms = []
    for j, prof in enumerate(problem.initial):
        u0 = prof.values ** p_vals[j]
        initial_norms.append(float(np.trapezoid(u0, prof.grid)) ** zf[j])
    norm_product = float(np.prod(initial_norms))

    eta_vals, eta_errs, norms_t = [], [], []
    power_profiles = [
        Profile(grid=p.grid, values=p.values ** p_vals[j], compact=p.compact)
        for j, p in enumerate(problem.initial)
    ]
    for t in times:
        profiles_1d = []
        norms_j = []
        for j in range(c.n):
            lo, hi = _profile_range(problem, j, t)
            yg = np.linspace(lo, hi, profile_points)
            u = _evolved_values(power_profiles[j], problem.diffusions[j], t, yg)
            u[u < 0] = 0.0
            norms_j.append(float(np.trapezoid(u, yg)) ** zf[j])
            profiles_1d.append((yg, u ** zf[j]))
        coarse = _eta_on_mesh(problem, t, xi_step, halfwidth, profiles_1d)
        fine = _eta_on_mesh(problem, t, 0.5 * xi_step, halfwidth, profiles_1d)
        eta_vals.append(fine)
        eta_errs.append(abs(fine - coarse) / 3.0 + 1e-15 * abs(fine))
        norms_t.append(tuple(norms_j))
        drift = max(
            abs(nj - n0) / max(n0, 1e-300) for nj, n0 in zip(norms_j, initial_norms)
        )
        if drift > problem.tol.quadrature_rel_tol:
            raise GridTooCoarse(
                f"norm drift {drift:.3e} at t = {t} exceeds "
                f"{problem.tol.quadrature_rel_tol:.1e}"
            )
    return FlowTrace(
        times=tuple(times),
        eta_values=tuple(eta_vals),
        eta_errors=tuple(eta_errs),
        norms=tuple(norms_t),
        norm_product=norm_product,
        limit_estimate=eta_vals[-1] / norm_product,
    )


def certify_monotone(trace: FlowTrace, d_value: Optional[float] = None) -> MonotonicityReport:
    """Nondecreasing within three times the estimated quadrature error."""
    min_inc = math.inf
    tol_used = 0.0
    for k in range(len(trace.times) - 1):
        inc = trace.eta_values[k + 1] - trace.eta_values[k]
        allowance = 3.0 * (trace.eta_errors[k] + trace.eta_errors[k + 1])
        min_inc = min(min_inc, inc)
        if inc < -allowance:
            tol_used = max(tol_used, allowance)
    tol_used = max(
        3.0 * (trace.eta_errors[k] + trace.eta_errors[k + 1])
        for k in range(len(trace.times) - 1)
    )
    monotone = all(
        trace.eta_values[k + 1] - trace.eta_values[k]
        >= -3.0 * (trace.eta_errors[k] + trace.eta_errors[k + 1])
        for k in range(len(trace.times) - 1)
    )
    gap = None
    if d_value is not None:
        gap = d_value * trace.norm_product - trace.eta_values[-1]
    return MonotonicityReport(
        monotone=monotone,
        min_increment=min_inc,
        tolerance_used=tol_used,
        limit_gap=gap,
    )


def dissipation_values(problem: FlowProblem, t: float, points: np.ndarray) -> np.ndarray:
    """Quadratic form h'(x)^t Q h'(x) of the log-derivatives at sample
    points, restricted to points where the product density is above the
    floor; at stationary widths Q is PSD and these values are nonnegative."""
    c = problem.configuration
    a = c.a.numpy()
    zf = problem.z.floats()
    p_vals = 1.0 / zf
    q = q_matrix(c, problem.z, problem.r_matrix).numpy()
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    args = pts @ a  # (n_pts, N)
    hprime = np.zeros_like(args)
    density = np.ones(len(pts))
    power_profiles = [
        Profile(grid=p.grid, values=p.values ** p_vals[j], compact=p.compact)
        for j, p in enumerate(problem.initial)
    ]
    for j in range(c.n):
        y = args[:, j]
        u = _evolved_values(power_profiles[j], problem.diffusions[j], t, y)
        du = _evolved_values(power_profiles[j], problem.diffusions[j], t, y,
                             derivative=True)
        u = np.maximum(u, 0.0)
        density *= u ** zf[j]
        safe = u > POSITIVITY_FLOOR
        hprime[safe, j] = du[safe] / (p_vals[j] * u[safe])
        hprime[~safe, j] = 0.0
    keep = density > DENSITY_FLOOR
    vals = np.einsum("ij,jk,ik->i", hprime[keep], q, hprime[keep])
    return vals
