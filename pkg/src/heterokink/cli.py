"""Command-line interface.

Subcommands: eig, scan, trace, bvp, asym, fit, compare.  Every command
is deterministic (no seeds, no timestamps in data files) and writes
through atomic renames.  Exit codes: 0 success, 2 usage/configuration/
file-format error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import analysis, asymptotics, bvp, fileio, shoot
from ._version import __version__
from .config import load_config
from .errors import (
    BranchLost,
    ConfigError,
    DomainError,
    FileFormatError,
    NumericalFailure,
)
from .systems import ModelKind, ModelParams, dimension, equilibrium_analysis

__all__ = ["main", "build_parser"]


def _kind(value: str) -> ModelKind:
    try:
        return ModelKind(value.lower())
    except ValueError:
        raise argparse.ArgumentTypeError(f"kind must be cch or hcch, got {value!r}")


def _delta_list(value: str) -> list[float]:
    try:
        return [float(tok) for tok in value.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad delta list {value!r}")


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="heterokink",
        description=(
            "Heteroclinic stationary solutions of driven fourth- and "
            "sixth-order Cahn-Hilliard equations: shooting, collocation "
            "BVPs, branch tracing, and asymptotic cross-checks."
        ),
    )
    top.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    top.add_argument("--config", default=None, help="key=value config file")
    top.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override one config key (repeatable; wins over files)",
    )
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eig", help="equilibrium eigenstructure at U+ and U-")
    p.add_argument("--kind", type=_kind, required=True)
    p.add_argument("--A", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.set_defaults(func=cmd_eig)

    p = sub.add_parser("scan", help="distance-function scan over an A window")
    p.add_argument("--kind", type=_kind, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--a-min", type=float, default=None)
    p.add_argument("--a-max", type=float, default=None)
    p.add_argument("--a-step", type=float, default=None)
    p.add_argument("--out", type=Path, required=True, help="branch CSV path")
    p.add_argument("--distance-out", type=Path, default=None)
    p.add_argument("--plot", action="store_true", help="render PNGs next to the data")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("trace", help="continue one het_k family over a delta schedule")
    p.add_argument("--kind", type=_kind, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--deltas", type=_delta_list, default=None, help="comma-separated list")
    p.add_argument("--delta-min", type=float, default=None)
    p.add_argument("--delta-max", type=float, default=None)
    p.add_argument("--n-deltas", type=int, default=10)
    p.add_argument("--spacing", choices=("log", "linear"), default="log")
    p.add_argument("--start", type=Path, default=None, help="branch CSV with a starting row")
    p.add_argument("--resume", action="store_true", help="skip deltas already in --out")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("bvp", help="collocation solve of one heteroclinic profile")
    p.add_argument("--kind", type=_kind, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--formulation", choices=("half", "full"), default="half")
    p.add_argument("--L", type=float, default=None, help="override half-domain length")
    p.add_argument("--guess-file", type=Path, default=None, help="profile CSV used as guess")
    p.add_argument(
        "--auto-guess",
        action="store_true",
        help="seed from the asymptotic laws (default when no guess file)",
    )
    p.add_argument("--out", type=Path, required=True, help="profile CSV path")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_bvp)

    p = sub.add_parser("asym", help="evaluate the closed-form prediction laws")
    p.add_argument("--kind", type=_kind, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--deltas", type=_delta_list, required=True)
    p.add_argument("--out", type=Path, default=None, help="CSV path (stdout when omitted)")
    p.set_defaults(func=cmd_asym)

    p = sub.add_parser("fit", help="least-squares law fits on a branch file")
    p.add_argument("--branch", type=Path, required=True)
    p.add_argument("--model", choices=("linear", "logwidth", "cuberoot"), required=True)
    p.add_argument("--k", type=int, default=None, help="restrict to one family")
    p.add_argument("--delta-min", type=float, default=None)
    p.add_argument("--delta-max", type=float, default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("compare", help="numeric-vs-asymptotic report for a branch file")
    p.add_argument("--branch", type=Path, required=True)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--delta-min", type=float, default=None)
    p.add_argument("--delta-max", type=float, default=None)
    p.add_argument("--out", type=Path, default=None, help="report JSON path")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_compare)

    return top


def _eq_payload(info) -> dict:
    return {
        "point": [float(v) for v in info.point],
        "eigenvalues": [[float(z.real), float(z.imag)] for z in info.eigenvalues],
        "n_unstable": info.n_unstable,
        "n_stable": info.n_stable,
        "n_center": info.n_center,
        "char_poly_coeffs": [float(c) for c in info.char_coeffs],
    }


def cmd_eig(args, rc) -> int:
    params = ModelParams(A=args.A, delta=args.delta)
    payload = {
        "schema": 1,
        "kind": args.kind.value,
        "A": args.A,
        "delta": args.delta,
        "U+": _eq_payload(equilibrium_analysis(args.kind, params, which=+1)),
        "U-": _eq_payload(equilibrium_analysis(args.kind, params, which=-1)),
    }
    print(json.dumps(payload, sort_keys=True, indent=2))
    return 0


def _rows_from_points(points) -> list[analysis.BranchRow]:
    return [
        analysis.BranchRow(
            kind=p.kind,
            k=p.k,
            delta=p.delta,
            A=p.A,
            d_min=p.d_min,
            root_distances=tuple(p.root_distances),
            source="shoot",
        )
        for p in points
    ]


def cmd_scan(args, rc) -> int:
    grid = (
        args.a_min if args.a_min is not None else rc["a_min"],
        args.a_max if args.a_max is not None else rc["a_max"],
        args.a_step if args.a_step is not None else rc["a_step"],
    )
    cfg = rc.shoot_config(A_grid=grid)
    points, profile = shoot.scan_and_refine(args.kind, args.delta, cfg, return_profile=True)
    table = analysis.BranchTable(_rows_from_points(points))
    fileio.write_branch(args.out, table, meta={"delta": args.delta, "command": "scan"})
    distance_out = args.distance_out or args.out.with_name(args.out.stem + "_distance.csv")
    fileio.write_distance(
        distance_out, profile, meta={"kind": args.kind.value, "delta": args.delta}
    )
    print(f"{len(points)} root(s) -> {args.out}, distance profile -> {distance_out}")
    if args.plot:
        from . import plots

        plots.save_distance_profile(
            distance_out.with_suffix(".png"),
            profile,
            title=f"{args.kind.value} delta={args.delta:g}",
        )
        if len(table):
            plots.save_branch_plane(
                args.out.with_suffix(".png"), table,
                title=f"{args.kind.value} roots at delta={args.delta:g}",
            )
    return 0


def _schedule(args) -> list[float]:
    if args.deltas:
        return sorted(args.deltas)
    if args.delta_min is None or args.delta_max is None:
        raise ConfigError("trace needs --deltas or both --delta-min and --delta-max")
    if not (0.0 < args.delta_min < args.delta_max):
        raise ConfigError("need 0 < delta-min < delta-max")
    if args.spacing == "log":
        return list(np.geomspace(args.delta_min, args.delta_max, args.n_deltas))
    return list(np.linspace(args.delta_min, args.delta_max, args.n_deltas))


def _start_point(args, rc, cfg, schedule):
    delta0 = schedule[0]
    if args.start is not None:
        table = fileio.read_branch(args.start)
        rows = [r for r in table if r.k == args.k]
        if not rows:
            raise FileFormatError(f"no het_{args.k} row in {args.start}")
        row = min(rows, key=lambda r: abs(math.log(r.delta) - math.log(delta0)))
        return shoot.branch_point_at(args.kind, row.delta, row.A, cfg), []
    # narrow scan around the asymptotic prediction at the smallest delta
    pred = asymptotics.predict(args.kind, args.k, delta0)
    if not (0.0 < pred.A_pred < 1.0):
        raise DomainError(
            f"no usable asymptotic start at delta={delta0}; provide --start"
        )
    lo = max(pred.A_pred - 0.05, 0.3)
    hi = min(pred.A_pred + 0.05, 0.99999)
    narrow = rc.shoot_config(A_grid=(lo, hi, 2e-4))
    points = shoot.scan_and_refine(args.kind, delta0, narrow)
    points = [p for p in points if p.k == args.k]
    if not points:
        raise NumericalFailure(
            f"auto-start scan found no het_{args.k} root at delta={delta0}"
        )
    start = min(points, key=lambda p: abs(p.A - pred.A_pred))
    return start, [delta0]


def cmd_trace(args, rc) -> int:
    cfg = rc.shoot_config()
    schedule = _schedule(args)
    done: list[float] = []
    prior_rows: list[analysis.BranchRow] = []
    if args.resume and args.out.exists():
        prior = fileio.read_branch(args.out)
        prior_rows = [r for r in prior if r.k == args.k]
        done = [r.delta for r in prior_rows]
    start, consumed = _start_point(args, rc, cfg, schedule)
    remaining = [
        d for d in schedule
        if d not in consumed and not any(math.isclose(d, e, rel_tol=1e-12) for e in done)
    ]
    exit_code = 0
    try:
        points = shoot.trace_branch(args.kind, args.k, start, remaining, cfg)
    except BranchLost as exc:
        points = exc.points
        print(f"branch lost: {exc}", file=sys.stderr)
        exit_code = 3
    rows = {(r.delta, r.k, r.source): r for r in prior_rows}
    for r in _rows_from_points(points):
        rows.setdefault((r.delta, r.k, r.source), r)
    table = analysis.BranchTable(list(rows.values()))
    fileio.write_branch(args.out, table, meta={"command": "trace", "k": args.k})
    print(f"{len(table)} row(s) -> {args.out}")
    if args.plot and len(table):
        from . import plots

        plots.save_branch_plane(
            args.out.with_suffix(".png"), table,
            title=f"{args.kind.value} het_{args.k} branch",
        )
    return exit_code


def _auto_guess_solution(args, rc, cfg):
    kind, k, delta = args.kind, args.k, args.delta
    L = args.L if args.L is not None else bvp.default_L(kind, k, delta)
    pred = asymptotics.predict(kind, k, delta)
    if 0.5 <= pred.A_pred < 1.0:
        problem = bvp.build_half_problem(
            kind, delta, L, pred.A_pred, k=k, n=rc["n_init"]
        )
        return bvp.solve(problem, cfg)
    # prediction law unusable this far out; walk in from a small delta
    # where it is accurate, then continue to the requested value
    coef = (2 * k + 1) * 2.0 ** (1.0 / 6.0)
    delta_safe = (0.3 / coef) ** 3
    if kind is ModelKind.CCH:
        delta_safe = 0.3 * math.sqrt(2.0) / (2 * k + 1)
    delta_safe = min(delta_safe, delta / 2.0) if delta_safe >= delta else delta_safe
    pred0 = asymptotics.predict(kind, k, delta_safe)
    L0 = bvp.default_L(kind, k, delta_safe)
    problem = bvp.build_half_problem(
        kind, delta_safe, L0, pred0.A_pred, k=k, n=rc["n_init"]
    )
    sol0 = bvp.solve(problem, cfg)
    n_steps = max(4, int(math.ceil(abs(math.log(delta / delta_safe)) / math.log(1.6))))
    schedule = list(np.geomspace(delta_safe, delta, n_steps + 1))[1:]
    sols = bvp.continue_in_delta(kind, k, sol0, schedule, cfg)
    return sols[-1]


def cmd_bvp(args, rc) -> int:
    cfg = rc.bvp_config()
    try:
        if args.guess_file is not None:
            x, states, _meta = fileio.read_profile(args.guess_file)
            if states.shape[1] != dimension(args.kind):
                raise FileFormatError(
                    f"guess has {states.shape[1]} components, expected {dimension(args.kind)}"
                )
            half = x <= 0.0
            x, states = x[half], states[half]
            L = float(-x[0])
            nodes = 1.0 + x / L
            pred = asymptotics.predict(args.kind, args.k, args.delta)
            A0 = pred.A_pred if 0.0 < pred.A_pred < 1.0 else 0.9
            problem = bvp.build_half_problem(
                args.kind, args.delta, L, A0, guess=(nodes, states), k=args.k
            )
            sol = bvp.solve(problem, cfg)
        else:
            sol = _auto_guess_solution(args, rc, cfg)
        if args.formulation == "full":
            ref, L_full = bvp.reference_from_solution(sol)
            full_problem = bvp.build_full_problem(
                args.kind, args.delta, ref, L_full, sol.A
            )
            full_sol = bvp.solve(full_problem, cfg)
            x_out = full_problem.x_of_s(full_sol.mesh.nodes, full_sol.p)
            states_out = full_sol.mesh.states[:, : dimension(args.kind)]
            A_report, residual = full_sol.A, full_sol.max_residual
            L_report = full_sol.L
        else:
            profile = bvp.reflect(sol)
            x_out, states_out = profile.x, profile.states
            A_report, residual = sol.A, sol.max_residual
            L_report = sol.L
    except (NumericalFailure, DomainError) as exc:
        diag = {
            "schema": 1,
            "error": type(exc).__name__,
            "message": str(exc),
            "kind": args.kind.value,
            "k": args.k,
            "delta": args.delta,
        }
        print(json.dumps(diag, sort_keys=True, indent=2))
        return 3
    fileio.write_profile(
        args.out,
        x_out,
        states_out,
        meta={
            "kind": args.kind.value,
            "k": args.k,
            "A": A_report,
            "delta": args.delta,
            "L": L_report,
            "source": "bvp",
            "residual": residual,
            "formulation": args.formulation,
        },
    )
    print(f"A={A_report:.12g} residual={residual:.3e} -> {args.out}")
    if args.plot:
        from . import plots

        plots.save_profile(
            args.out.with_suffix(".png"), x_out, states_out,
            title=f"{args.kind.value} het_{args.k} delta={args.delta:g} A={A_report:.6g}",
        )
    return 0


def cmd_asym(args, rc) -> int:
    lines = ["delta,A_pred,width_pred,validity,conjectured"]
    for delta in args.deltas:
        p = asymptotics.predict(args.kind, args.k, delta)
        width = format(p.width_pred, ".17g") if math.isfinite(p.width_pred) else "nan"
        lines.append(
            f"{format(p.delta, '.17g')},{format(p.A_pred, '.17g')},{width},"
            f"{str(p.validity).lower()},{str(p.conjectured).lower()}"
        )
    text = "\n".join(lines) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        from .fileio import _atomic_write_text, _write_sidecar

        _atomic_write_text(args.out, text)
        _write_sidecar(args.out, {"kind": args.kind.value, "k": args.k})
        print(f"{len(args.deltas)} prediction(s) -> {args.out}")
    return 0


def _subset(args, table: analysis.BranchTable) -> analysis.BranchTable:
    sub = table.subset(delta_max=args.delta_max, delta_min=args.delta_min, k=args.k)
    if not len(sub):
        raise FileFormatError("no rows left after subsetting")
    return sub


def cmd_fit(args, rc) -> int:
    table = _subset(args, fileio.read_branch(args.branch))
    fit_fn = {
        "linear": analysis.fit_linear_A,
        "logwidth": analysis.fit_log_width,
        "cuberoot": analysis.fit_cube_root_A,
    }[args.model]
    result = fit_fn(table)
    kind, k = table.family()
    payload = {"schema": 1, "kind": kind.value, "k": k}
    payload.update(result.to_json_dict())
    print(json.dumps(payload, sort_keys=True, indent=2))
    return 0


def cmd_compare(args, rc) -> int:
    table = _subset(args, fileio.read_branch(args.branch))
    kind, k = table.family()
    preds = [asymptotics.predict(kind, k, r.delta) for r in table]
    report = analysis.compare_report(table, preds)
    sys.stdout.write(report.to_text())
    if args.out is not None:
        fileio.write_json(args.out, report.to_json_dict())
        print(f"report -> {args.out}")
        if args.plot:
            from . import plots

            fit = report.fits.get("log_width")
            plots.save_width_fit(
                args.out.with_suffix(".png"), table, fit=fit,
                predictor=lambda d: asymptotics.predict(kind, k, d).width_pred,
                title=f"{kind.value} het_{k} width law",
            )
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        rc = load_config(args.config, args.set)
        return args.func(args, rc)
    except (ConfigError, FileFormatError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
