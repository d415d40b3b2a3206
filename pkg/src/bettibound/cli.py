"""Command line entry points.

Verbs:

* ``verify-abstract``: run the seeded randomized suites for the abstract
  operator inequalities and report worst-case margins.
* ``betti-bound``: evaluate the certified Betti bounds on a builtin
  surface or a mesh file, over a single point or a (rho0, t0) grid.
* ``mesh-info``: combinatorial and geometric summary of a mesh with both
  homology oracles.
* ``gen-fixture``: write a builtin surface to an OFF file.

Every verb prints a human table (unless --quiet) and optionally writes a
JSON report (--out).  The exit status is 0 only if every recorded check
passed and all inputs were valid.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from .dec import betti1_rank_count, gaussian_curvature
from .mesh import (
    BUILTIN_NAMES,
    MeshError,
    builtin_mesh,
    builtin_surface,
    load_mesh,
    write_off,
)
from .pipeline import (
    BettiBoundInputs,
    betti_bound,
    prepare_surface,
    prefactors,
)
from .report import (
    RunReport,
    build_config,
    inequality_record,
    equality_record,
    serialize_json,
)
from .suites import run_abstract_suites

USAGE_ERROR = 2


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.verb is None:
        parser.print_help()
        return USAGE_ERROR
    try:
        return args.func(args)
    except (MeshError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bettibound",
        description="Certified first-Betti-number bounds from heat semigroup "
        "differences on closed surfaces.",
    )
    sub = parser.add_subparsers(dest="verb")
    parser.set_defaults(verb=None)

    def common(p):
        p.add_argument("--seed", type=int, default=None, help="suite seed")
        p.add_argument("--trials", type=int, default=None, help="instances per suite")
        p.add_argument(
            "--tolerance",
            type=float,
            default=None,
            help="relative slack applied to every inequality family",
        )
        p.add_argument("--config", type=str, default=None, help="INI config file")
        p.add_argument("--out", type=str, default=None, help="write JSON report here")
        p.add_argument("--quiet", action="store_true", help="summary line only")

    p_verify = sub.add_parser("verify-abstract", help="run the abstract suites")
    common(p_verify)
    p_verify.add_argument("--n-points-max", type=int, default=None)
    p_verify.add_argument("--fiber-max", type=int, default=None)
    p_verify.set_defaults(func=cmd_verify_abstract)

    p_bound = sub.add_parser("betti-bound", help="certified Betti bounds")
    common(p_bound)
    _mesh_source(p_bound)
    p_bound.add_argument("--rho0", type=str, default="0.5", help="comma list")
    p_bound.add_argument("--t0", type=str, default="1.0", help="comma list")
    p_bound.add_argument("--p", type=float, default=2.0, help="Schatten exponent")
    p_bound.add_argument(
        "--curvature",
        choices=("angle-defect", "analytic"),
        default="angle-defect",
    )
    p_bound.add_argument(
        "--no-schatten",
        action="store_true",
        help="skip the operator-level Schatten certificate",
    )
    p_bound.add_argument(
        "--liyau-floor",
        type=float,
        default=None,
        help="curvature floor K >= -floor enabling the (uncertified) "
        "heat-kernel-style bound",
    )
    p_bound.add_argument("--liyau-c", type=float, default=1.0)
    p_bound.add_argument("--liyau-alpha", type=float, default=1.0)
    p_bound.set_defaults(func=cmd_betti_bound)

    p_info = sub.add_parser("mesh-info", help="mesh summary and homology oracles")
    common(p_info)
    _mesh_source(p_info)
    p_info.set_defaults(func=cmd_mesh_info)

    p_gen = sub.add_parser("gen-fixture", help="write a builtin surface as OFF")
    p_gen.add_argument("--name", required=True, choices=BUILTIN_NAMES)
    p_gen.add_argument("--resolution", type=int, default=None)
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--quiet", action="store_true")
    p_gen.set_defaults(func=cmd_gen_fixture)
    return parser


def _mesh_source(p):
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--builtin", choices=BUILTIN_NAMES)
    group.add_argument("--mesh", type=str, help="OFF or OBJ file")
    p.add_argument("--resolution", type=int, default=None)


def _suite_config(args, **extra):
    tolerances = None
    if args.tolerance is not None:
        from .report import DEFAULT_TOLERANCES

        tolerances = {k: args.tolerance for k in DEFAULT_TOLERANCES}
    return build_config(
        file_path=args.config,
        seed=args.seed,
        trials=args.trials,
        tolerances=tolerances,
        **extra,
    )


def _finish(report: RunReport, args, started: float) -> int:
    report.wall_time_s = time.perf_counter() - started
    if not args.quiet:
        _print_records(report)
    _print_summary(report)
    if args.out:
        Path(args.out).write_text(serialize_json(report.as_dict()))
    return 0 if report.passed else 1


def _print_records(report: RunReport):
    if not report.records:
        return
    width = max(len(r.name) for r in report.records)
    print(f"{'check':<{width}}  {'lhs':>13} {'rhs':>13} {'margin':>13}  result")
    for r in report.records:
        flag = "pass" if r.passed else "FAIL"
        print(
            f"{r.name:<{width}}  {r.lhs:>13.6g} {r.rhs:>13.6g} "
            f"{r.margin:>13.6g}  {flag}"
        )


def _print_summary(report: RunReport):
    failed = len(report.failures())
    status = "PASS" if report.passed else "FAIL"
    print(
        f"{report.command}: {status} "
        f"({len(report.records) - failed}/{len(report.records)} checks, "
        f"{report.wall_time_s:.2f}s)"
    )


def cmd_verify_abstract(args) -> int:
    started = time.perf_counter()
    config = _suite_config(
        args, n_points_max=args.n_points_max, fiber_max=args.fiber_max
    )
    report = run_abstract_suites(config)
    return _finish(report, args, started)


def _parse_grid(text: str):
    try:
        values = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ValueError(f"bad grid value in {text!r}: {exc}") from exc
    if not values:
        raise ValueError("the parameter grid must be nonempty")
    if any(v <= 0 for v in values):
        raise ValueError("grid values must be strictly positive")
    return values


def _load_surface(args):
    if args.mesh:
        return load_mesh(args.mesh), f"file:{args.mesh}"
    surface = builtin_surface(args.builtin)
    if surface is None:
        return builtin_mesh(args.builtin, args.resolution), args.builtin
    return surface, args.builtin


def cmd_betti_bound(args) -> int:
    started = time.perf_counter()
    config = _suite_config(args)
    rho0_values = _parse_grid(args.rho0)
    t0_values = _parse_grid(args.t0)
    surface, label = _load_surface(args)
    data = prepare_surface(
        surface,
        resolution=args.resolution if not args.mesh else None,
        curvature_source=args.curvature,
    )
    slack = config.tol("soundness")

    report = RunReport(
        command="betti-bound",
        config=dict(
            config.as_dict(),
            surface=label,
            rho0=rho0_values,
            t0=t0_values,
            p=args.p,
            curvature=args.curvature,
            schatten=not args.no_schatten,
        ),
    )
    rows = []
    for rho0 in rho0_values:
        for t0 in t0_values:
            inputs = BettiBoundInputs(
                surface=surface,
                rho0=rho0,
                t0=t0,
                p=args.p,
                resolution=args.resolution,
                curvature_source=args.curvature,
                compute_schatten=not args.no_schatten,
            )
            result = betti_bound(
                inputs,
                data=data,
                liyau_curvature_floor=args.liyau_floor,
                liyau_c=args.liyau_c,
                liyau_alpha=args.liyau_alpha,
            )
            rows.append(result)
            tag = f"rho0={rho0:g},t0={t0:g}"
            report.add(
                inequality_record(
                    f"soundness_main[{tag}]",
                    "homology oracle below the certified product bound",
                    float(result.b1_oracle),
                    result.bound_main,
                    slack * (1.0 + abs(result.bound_main)),
                )
            )
            if result.bound_schatten is not None:
                report.add(
                    inequality_record(
                        f"soundness_schatten[{tag}]",
                        "homology oracle below the operator-level bound",
                        float(result.b1_oracle),
                        result.bound_schatten,
                        slack * (1.0 + abs(result.bound_schatten)),
                    )
                )
            if result.intermediate["curvature_min"] > rho0:
                report.add(
                    equality_record(
                        f"vanishing_criterion[{tag}]",
                        "curvature everywhere above rho0 forces a zero bound",
                        result.bound_main,
                        0.0,
                    )
                )
            sharp, loose = prefactors(rho0, t0)
            report.add(
                inequality_record(
                    f"prefactor[{tag}]",
                    "sharp prefactor below the loose 4n/rho0^2 form",
                    sharp,
                    loose,
                    0.0,
                )
            )
    report.extra["reports"] = [r.as_dict() for r in rows]
    if not args.quiet:
        _print_bound_table(rows)
    return _finish(report, args, started)


def _print_bound_table(rows):
    print(
        f"{'surface':<28} {'rho0':>8} {'t0':>8} {'b1':>4} "
        f"{'bound_main':>12} {'schatten':>12} {'liyau':>12}  result"
    )
    for r in rows:
        schatten = f"{r.bound_schatten:.6g}" if r.bound_schatten is not None else "-"
        liyau = f"{r.bound_liyau:.6g}" if r.bound_liyau is not None else "-"
        flag = "pass" if r.passed else "FAIL"
        print(
            f"{r.surface:<28} {r.rho0:>8.3g} {r.t0:>8.3g} {r.b1_oracle:>4d} "
            f"{r.bound_main:>12.6g} {schatten:>12} {liyau:>12}  {flag}"
        )


def cmd_mesh_info(args) -> int:
    started = time.perf_counter()
    config = _suite_config(args)
    surface, label = _load_surface(args)
    data = prepare_surface(
        surface, resolution=args.resolution if not args.mesh else None
    )
    mesh, dec = data.mesh, data.dec
    geom_tol = config.tol("geometry")

    report = RunReport(
        command="mesh-info", config=dict(config.as_dict(), surface=label)
    )
    harmonic = data.laplacian1.kernel_dim()
    combinatorial = betti1_rank_count(dec)
    report.add(
        equality_record(
            "betti_oracles_agree",
            "harmonic kernel dimension equals the chain-complex count",
            float(harmonic),
            float(combinatorial),
        )
    )
    curvature = gaussian_curvature(mesh)
    report.add(
        inequality_record(
            "gauss_bonnet_residual",
            "total angle defect minus 2 pi Euler characteristic",
            curvature.gauss_bonnet_residual(),
            geom_tol,
            0.0,
        )
    )
    report.add(
        equality_record(
            "incidence_composition",
            "d1 d0 = 0 in exact integer arithmetic",
            float(dec.incidence_composition_max()),
            0.0,
        )
    )
    info = {
        **mesh.describe(),
        "betti1": harmonic,
        "betti0_kernel": data.kernel_dim_0forms,
        "gauss_bonnet_residual": curvature.gauss_bonnet_residual(),
        "curvature_min": curvature.min(),
        "diameter_estimate": mesh.diameter_estimate(),
        "volume": mesh.total_area,
    }
    report.extra["mesh"] = info
    if not args.quiet:
        for key, value in info.items():
            print(f"{key}: {value}")
    return _finish(report, args, started)


def cmd_gen_fixture(args) -> int:
    mesh = builtin_mesh(args.name, args.resolution)
    write_off(mesh, args.out)
    if not args.quiet:
        d = mesh.describe()
        print(
            f"wrote {args.name} to {args.out} "
            f"({d['vertices']}v {d['edges']}e {d['faces']}f, chi={d['euler_characteristic']})"
        )
        if args.name == "flat-torus":
            print(
                "note: OFF stores the parameter-plane embedding; the flat "
                "metric is available only through the builtin surface"
            )
    return 0


if __name__ == "__main__":
    sys.exit(main())
