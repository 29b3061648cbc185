"""Command-line surface: analyze / solve / decompose / verify with
deterministic JSON reports.

The problem file is JSON: "matrix" is a list of N column vectors of M
entries (numbers or "p/q" strings), "exponents" an optional list of N
L^p indices ("inf" allowed), plus optional "tolerances" overrides and a
"seed".  Exit codes: 0 success, 1 parse error, 2 defective configuration,
3 infeasible exponents, 4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from fractions import Fraction
from typing import Optional

import numpy as np

from . import __version__
from .configuration import Configuration, build_configuration
from .errors import BlcError, NotMember, ParseError, TooManySubsets
from .gaussian import solve_euler_lagrange, young_convolution_configuration
from .heatflow import certify_monotone, evolve, indicator_profile, make_flow_problem
from .linalg import DEFAULT_TOL, Matrix, TolerancePolicy
from .optimizers import (
    canonical_indices,
    decide_boundary_optimizers,
    decomposition_d_value,
    describe_optimizers,
)
from .polytope import (
    DecompositionNode,
    ExponentVector,
    decompose,
    membership,
    vertices,
)
from .sphere import (
    SphereSampler,
    StepFunction,
    cap_density,
    check_theorem1,
    check_theorem2,
    divergence_trial,
)

SQRT3_OVER_2 = math.sqrt(3.0) / 2.0


def _frac_str(x) -> Optional[str]:
    if isinstance(x, Fraction):
        return str(x)
    return None


def _serialize_values(values) -> dict:
    return {
        "float": [float(v) for v in values],
        "exact": [_frac_str(v) for v in values],
    }


def _load_problem(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot parse problem file {path}: {exc}") from exc
    if not isinstance(raw, dict) or "matrix" not in raw:
        raise ParseError("problem file must be a JSON object with a 'matrix' key")
    cols = raw["matrix"]
    if not isinstance(cols, list) or not cols:
        raise ParseError("'matrix' must be a non-empty list of column vectors")
    m = len(cols[0])
    if any(len(col) != m for col in cols):
        raise ParseError("matrix columns must share one length")
    return raw


def _tolerances(raw: dict, override: Optional[str]) -> TolerancePolicy:
    data = dict(raw.get("tolerances", {}))
    if override:
        try:
            for pair in override.split(","):
                key, val = pair.split("=")
                data[key.strip()] = float(val)
        except ValueError as exc:
            raise ParseError(f"bad --tolerances override: {override}") from exc
    try:
        return TolerancePolicy(**data) if data else DEFAULT_TOL
    except (TypeError, ValueError) as exc:
        raise ParseError(f"bad tolerance policy: {exc}") from exc


def _configuration_from(raw: dict, tol: TolerancePolicy) -> Configuration:
    try:
        matrix = Matrix.from_columns(raw["matrix"])
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"bad matrix: {exc}") from exc
    try:
        return build_configuration(matrix, tol)
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def _exponents_from(raw: dict, n: int) -> ExponentVector:
    if "exponents" not in raw:
        raise ParseError("solve needs an 'exponents' list in the problem file")
    ps = raw["exponents"]
    if len(ps) != n:
        raise ParseError("need one exponent per column")
    try:
        return ExponentVector.from_exponents(ps)
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"bad exponents: {exc}") from exc


def _config_section(c: Configuration) -> dict:
    return {
        "ambient_dim": c.ambient_dim,
        "vector_count": c.vector_count,
        "spans": c.spans,
        "essential": [j for j, f in enumerate(c.essential_flags) if f],
        "proportional_pairs": [list(p) for p in c.proportional_pairs],
        "properly_redundant": c.properly_redundant,
        "defects": list(c.defects),
    }


def _tol_section(tol: TolerancePolicy) -> dict:
    return {
        "rank_rel_tol": tol.rank_rel_tol,
        "psd_tol": tol.psd_tol,
        "newton_tol": tol.newton_tol,
        "quadrature_rel_tol": tol.quadrature_rel_tol,
    }


def _tree_section(node: DecompositionNode) -> dict:
    out = {
        "indices": list(node.indices),
        "exponents": _serialize_values(node.exponents),
        "leaf_interior": node.leaf_interior,
        "zero_dimensional": node.configuration is None,
        "deleted_infinite": list(node.deleted_infinite),
    }
    if node.configuration is not None:
        out["dimension"] = node.configuration.ambient_dim
    if node.split is not None:
        out["critical_set"] = sorted(node.split.critical_global)
        out["left"] = _tree_section(node.split.left)
        out["right"] = _tree_section(node.split.right)
    return out


def _emit(report: dict, pretty: bool) -> None:
    if pretty:
        _render_pretty(report)
    else:
        print(json.dumps(report, sort_keys=True, indent=2))


def _render_pretty(report: dict, indent: int = 0) -> None:
    pad = "  " * indent
    for key in sorted(report):
        val = report[key]
        if isinstance(val, dict):
            print(f"{pad}{key}:")
            _render_pretty(val, indent + 1)
        elif isinstance(val, list) and val and isinstance(val[0], dict):
            print(f"{pad}{key}:")
            for item in val:
                _render_pretty(item, indent + 1)
                print(f"{pad}  -")
        else:
            print(f"{pad}{key}: {val}")


def _base_report(command: str, seed: int, tol: TolerancePolicy, timing: Optional[float]) -> dict:
    report = {
        "command": command,
        "version": __version__,
        "seed": seed,
        "tolerances": _tol_section(tol),
    }
    if timing is not None:
        report["timing_seconds"] = timing
    return report


def _resolve_seed(args, raw: Optional[dict]) -> int:
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    if raw and raw.get("seed") is not None:
        return int(raw["seed"])
    env = os.environ.get("BLC_SEED")
    return int(env) if env else 0


def cmd_analyze(args) -> int:
    t0 = time.perf_counter()
    raw = _load_problem(args.problem)
    tol = _tolerances(raw, args.tolerances)
    c = _configuration_from(raw, tol)
    seed = _resolve_seed(args, raw)
    report = _base_report("analyze", seed, tol,
                          time.perf_counter() - t0 if args.timing else None)
    report["configuration"] = _config_section(c)
    warnings = []
    if any(c.essential_flags):
        warnings.append(
            "essential vectors present: the constant factorizes through the "
            "one-dimensional reduction and the corresponding index is forced to 1"
        )
    exit_code = 0
    if c.defects:
        exit_code = 2
    else:
        try:
            verts = vertices(c, tol)
            report["polytope"] = {
                "vertex_count": len(verts),
                "vertices": [[int(x) for x in v.z] for v in verts],
            }
        except TooManySubsets as exc:
            report["polytope"] = {"skipped": str(exc)}
        canon = canonical_indices(c, tol)
        report["canonical"] = {
            "p": _serialize_values(canon.p_circ),
            "z": _serialize_values(canon.z_circ.z),
            "d_best_best": canon.d_best_best,
            "interior_verified": canon.interior_verified,
        }
    report["warnings"] = warnings
    if args.timing:
        report["timing_seconds"] = time.perf_counter() - t0
    _emit(report, args.pretty)
    return exit_code


def cmd_solve(args) -> int:
    t0 = time.perf_counter()
    raw = _load_problem(args.problem)
    tol = _tolerances(raw, args.tolerances)
    c = _configuration_from(raw, tol)
    seed = _resolve_seed(args, raw)
    report = _base_report("solve", seed, tol, None)
    report["configuration"] = _config_section(c)
    if c.defects:
        report["warnings"] = ["configuration is defective; no solve attempted"]
        _emit(report, args.pretty)
        return 2
    z = _exponents_from(raw, c.n)
    pol = membership(c, z, tol)
    report["polytope"] = {
        "member": pol.member,
        "interior": pol.interior,
        "critical_sets": [sorted(s) for s in pol.critical_sets],
        "snapped": pol.snapped,
        "snap_error": pol.snap_error,
    }
    if not pol.member:
        report["polytope"]["supercritical_witness"] = sorted(pol.supercritical_witness)
        report["solution"] = {
            "d_value": "inf",
            "note": "the partial-scaling integral diverges on the witness subset",
        }
        _emit(report, args.pretty)
        return 3

    if pol.interior:
        sol = solve_euler_lagrange(c, z, tol)
        family = describe_optimizers(c, z, sol, tol)
        report["solution"] = {
            "route": "interior",
            "s": list(sol.s),
            "t": list(sol.t),
            "d_value": sol.d_value,
            "dual_value": sol.dual_value,
            "legendre_value": sol.legendre_value,
            "residual": sol.residual,
            "iterations": sol.iterations,
        }
        report["optimizers"] = {
            "exists": True,
            "family": {
                "widths": list(family.gaussian_params.s),
                "curvature": family.gaussian_params.curvature,
                "translation_basis": [
                    list(row) for row in
                    family.gaussian_params.translation_basis.numpy().tolist()
                ],
            },
        }
    else:
        tree = decompose(c, z, tol)
        report["decomposition"] = _tree_section(tree)
        d_val = decomposition_d_value(tree, tol)
        report["solution"] = {"route": "boundary", "d_value": d_val}
        if all(v > 0 for v in pol.z_exact):
            verdict = decide_boundary_optimizers(c, z, tol)
            report["optimizers"] = {
                "exists": verdict.exists,
                "splits": [
                    {
                        "critical_set": sorted(v.critical_global),
                        "compatible": v.compatible,
                        "rank_b": v.rank_b,
                        "rank_c": v.rank_c,
                        "rank_joint": v.rank_joint,
                    }
                    for v in verdict.split_verdicts
                ],
            }
            if verdict.failure_split is not None:
                report["optimizers"]["failure_split"] = sorted(
                    verdict.failure_split.critical_global
                )
        else:
            report["optimizers"] = {
                "note": "infinite indices present: optimizers at such points "
                        "are non-unique and not decided here"
            }
    if args.timing:
        report["timing_seconds"] = time.perf_counter() - t0
    _emit(report, args.pretty)
    return 0


def cmd_decompose(args) -> int:
    raw = _load_problem(args.problem)
    tol = _tolerances(raw, args.tolerances)
    c = _configuration_from(raw, tol)
    report = _base_report("decompose", _resolve_seed(args, raw), tol, None)
    report["configuration"] = _config_section(c)
    if c.defects:
        _emit(report, args.pretty)
        return 2
    z = _exponents_from(raw, c.n)
    try:
        tree = decompose(c, z, tol)
    except NotMember as exc:
        report["error"] = str(exc)
        _emit(report, args.pretty)
        return 3
    report["decomposition"] = _tree_section(tree)
    _emit(report, args.pretty)
    return 0


def _verify_heatflow(args, report: dict) -> bool:
    c, z = young_convolution_configuration(3)
    sol = solve_euler_lagrange(c, z)
    prob = make_flow_problem(
        c, z, sol.s, [indicator_profile(step=args.profile_step) for _ in range(3)],
        d_value=sol.d_value,
    )
    times = [0.0] + list(np.geomspace(0.01, args.t_max, args.time_points))
    trace = evolve(prob, times, xi_step=args.xi_step)
    cert = certify_monotone(trace, d_value=sol.d_value)
    ratio = trace.limit_estimate
    lo, hi = 0.857, SQRT3_OVER_2
    checks = {
        "monotone": cert.monotone,
        "limit_within_window": lo <= ratio <= hi,
    }
    report["verification"] = {
        "suite": "heatflow",
        "d_value": sol.d_value,
        "times": list(trace.times),
        "eta": list(trace.eta_values),
        "eta_errors": list(trace.eta_errors),
        "limit_ratio": ratio,
        "window": [lo, hi],
        "min_increment": cert.min_increment,
        "checks": checks,
    }
    return all(checks.values())


def _verify_sphere1(args, report: dict) -> bool:
    n = args.n
    seed = args.seed if args.seed is not None else 0
    if args.constant_functions:
        rep = check_theorem1(n, [1.0] * n, args.p, SphereSampler(n, seed))
        checks = {"exact_equality": abs(rep.lhs - rep.rhs) < 1e-12}
        report["verification"] = {
            "suite": "sphere1",
            "mode": "constant",
            "lhs": rep.lhs,
            "rhs": rep.rhs,
            "checks": checks,
        }
        return all(checks.values())
    rng = np.random.default_rng(seed)
    trials = []
    all_hold = True
    for trial in range(args.trials):
        sampler = SphereSampler(n, seed=seed * 1000 + trial)
        fs = []
        for _ in range(n):
            edges = np.sort(rng.uniform(-1.0, 1.0, 3))
            vals = tuple(float(x) for x in rng.uniform(0.1, 3.0, 4))
            fs.append(StepFunction(edges=(-1.0, *map(float, edges), 1.0), values=vals))
        rep = check_theorem1(n, fs, args.p, sampler, samples=args.samples)
        trials.append({
            "lhs": rep.lhs, "stderr": rep.lhs_stderr, "rhs": rep.rhs,
            "holds": rep.holds,
        })
        all_hold = all_hold and rep.holds
    report["verification"] = {
        "suite": "sphere1",
        "mode": "random-step-functions",
        "trials": trials,
        "checks": {"all_hold": all_hold},
    }
    return all_hold


def _verify_sphere2(args, report: dict) -> bool:
    n = args.n
    seed = args.seed if args.seed is not None else 0
    schedule = [float(x) for x in args.eps_schedule.split(",")]
    sampler = SphereSampler(n, seed=seed)
    rows = []
    ratios = []
    bound_ok = True
    for eps in schedule:
        density = cap_density(n, eps)
        rep = check_theorem2(n, density, sampler, bins=args.bins,
                             samples=args.samples)
        rows.append({
            "epsilon": eps,
            "entropy_f": rep.entropy_f,
            "sum_marginals": float(sum(rep.marginal_entropies)),
            "ratio": rep.ratio,
            "holds": rep.holds,
        })
        ratios.append(rep.ratio)
        bound_ok = bound_ok and rep.holds
    increasing = all(b > a for a, b in zip(ratios, ratios[1:]))
    checks = {
        "bound_never_exceeded": bound_ok,
        "ratio_increasing": increasing,
        "final_ratio_above_1.8": ratios[-1] > 1.8,
    }
    report["verification"] = {
        "suite": "sphere2",
        "schedule": rows,
        "checks": checks,
    }
    return all(checks.values())


def _verify_appendix(args, report: dict) -> bool:
    caps = [float(x) for x in args.caps.split(",")]
    rep = divergence_trial(args.n, args.alpha, args.p, caps)
    checks = {
        "norm_finite": math.isfinite(rep.norm),
        "strictly_increasing": rep.strictly_increasing,
        "at_least_doubling": rep.overall_growth >= 2.0,
    }
    report["verification"] = {
        "suite": "appendix",
        "norm": rep.norm,
        "cap_levels": list(rep.cap_levels),
        "lhs_values": list(rep.lhs_values),
        "overall_growth": rep.overall_growth,
        "checks": checks,
    }
    return all(checks.values())


def cmd_verify(args) -> int:
    tol = DEFAULT_TOL
    report = _base_report(f"verify:{args.suite}", args.seed or 0, tol, None)
    t0 = time.perf_counter()
    runner = {
        "heatflow": _verify_heatflow,
        "sphere1": _verify_sphere1,
        "sphere2": _verify_sphere2,
        "appendix": _verify_appendix,
    }[args.suite]
    passed = runner(args, report)
    if args.timing:
        report["timing_seconds"] = time.perf_counter() - t0
    report["passed"] = passed
    if not passed:
        failing = [k for k, v in report["verification"]["checks"].items() if not v]
        report["failing_invariants"] = failing
    _emit(report, args.pretty)
    return 0 if passed else 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blc",
        description="sharp-constant computation and certification for the "
                    "generalized Young inequality",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--pretty", action="store_true", help="human rendering")
        p.add_argument("--timing", action="store_true",
                       help="include wall-clock timing (breaks byte determinism)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--tolerances", default=None,
                       help="comma list key=value overriding the policy")

    p_an = sub.add_parser("analyze", help="classify a configuration")
    p_an.add_argument("problem")
    common(p_an)
    p_an.set_defaults(func=cmd_analyze)

    p_so = sub.add_parser("solve", help="compute the sharp constant")
    p_so.add_argument("problem")
    common(p_so)
    p_so.set_defaults(func=cmd_solve)

    p_de = sub.add_parser("decompose", help="critical-set decomposition tree")
    p_de.add_argument("problem")
    common(p_de)
    p_de.set_defaults(func=cmd_decompose)

    p_ve = sub.add_parser("verify", help="run a certification suite")
    p_ve.add_argument("suite", choices=["heatflow", "sphere1", "sphere2", "appendix"])
    common(p_ve)
    p_ve.add_argument("--n", type=int, default=3)
    p_ve.add_argument("--constant-functions", action="store_true",
                      help="sphere1: run the exact constant-function branch")
    p_ve.add_argument("--samples", type=int, default=200_000)
    p_ve.add_argument("--trials", type=int, default=20)
    p_ve.add_argument("--bins", type=int, default=64)
    p_ve.add_argument("--p", type=float, default=2.0)
    p_ve.add_argument("--alpha", type=float, default=0.51)
    p_ve.add_argument("--eps-schedule", default="0.1,0.03,0.01,0.003")
    p_ve.add_argument("--caps", default="10,100,1000,10000")
    p_ve.add_argument("--t-max", type=float, default=100.0)
    p_ve.add_argument("--time-points", type=int, default=12)
    p_ve.add_argument("--xi-step", type=float, default=None)
    p_ve.add_argument("--profile-step", type=float, default=0.0025)
    p_ve.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "verify" and args.suite == "appendix":
        # p defaults differ per suite: the divergence trial lives below 2
        if args.p == 2.0:
            args.p = 1.9
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 1
    except NotMember as exc:
        print(f"infeasible exponents: {exc}", file=sys.stderr)
        return 3
    except BlcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
