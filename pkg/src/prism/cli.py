"""Command-line interface.

Subcommands: decompose, bound, rank, verify, gradcheck, demo. Exit codes
are stable: 0 success, 1 property or certification failure, 2 usage or
input/IO error. Reports go to stdout, diagnostics to stderr. All commands
are deterministic given their inputs, flags, and seed; there is no
environment-variable configuration.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import matio
from .bound import prism_bound, report_to_dict
from .errors import PrismError
from .geometry import decompose
from .oracle import (
    DEFAULT_MAGNITUDES,
    DEFAULT_RANK_GRID,
    DEFAULT_SIZES,
    PERTURBATION_KINDS,
    rank_experiment,
    sweep,
    sweep_rows_to_csv,
)
from .regularizer import drift_demo, demo_to_csv, gradient_check

RANK_THRESHOLD = 0.9
GRADCHECK_THRESHOLD = 1e-5


def _fmt(x, digits=17):
    if x is None:
        return ""
    return format(x, f".{digits}g") if digits == 17 else format(x, f".{digits}f")


def _resolve(base: Path, p: str) -> Path:
    path = Path(p)
    return path if path.is_absolute() else base / path


def _emit_rows(rows: list[dict], columns: list[str], fmt: str) -> str:
    """Render result rows as csv (full precision), table (4 decimals) or json."""
    if fmt == "json":
        return json.dumps(rows, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([
                _fmt(row.get(c)) if isinstance(row.get(c), float) else row.get(c, "")
                for c in columns
            ])
        return buf.getvalue()
    # table
    cells = [columns]
    for row in rows:
        cells.append([
            f"{row[c]:.4f}" if isinstance(row.get(c), float)
            else ("-" if row.get(c) is None else str(row[c]))
            for c in columns
        ])
    widths = [max(len(r[i]) for r in cells) for i in range(len(columns))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    return "\n".join(lines) + "\n"


def _decomp_row(variant_id: str, d) -> dict:
    return {
        "variant_id": variant_id,
        "rho_t": d.rho_t,
        "rho_p": d.rho_p,
        "omega": d.omega,
        "scale_term": d.scale_term,
        "shape_term": d.shape_term,
        "residual": d.residual,
        "alignment": d.alignment,
    }


_DECOMP_COLUMNS = [
    "variant_id", "rho_t", "rho_p", "omega",
    "scale_term", "shape_term", "residual", "alignment",
]

_BOUND_COLUMNS = [
    "variant_id", "family", "method", "head_mode",
    "rho_t", "rho_p", "omega", "delta", "gamma", "bound", "empirical_gap",
]


def cmd_decompose(args) -> int:
    z_t = matio.read_matrix(args.target)
    rows = []
    if args.proxy:
        z_p = matio.read_matrix(args.proxy)
        rows.append(_decomp_row("-", decompose(z_t, z_p, args.alignment)))
    else:
        manifest = matio.read_manifest(args.manifest)
        base = Path(args.manifest).parent
        for v in manifest.variants:
            z_p = matio.read_matrix(_resolve(base, v.feature_path))
            rows.append(_decomp_row(v.variant_id, decompose(z_t, z_p, args.alignment)))
    sys.stdout.write(_emit_rows(rows, _DECOMP_COLUMNS, args.format))
    return 0


def cmd_bound(args) -> int:
    z_t = matio.read_matrix(args.target_features)
    h_t = matio.read_matrix(args.target_head)
    manifest = matio.read_manifest(args.manifest)
    base = Path(args.manifest).parent
    rows = []
    any_failed = False
    for v in manifest.variants:
        try:
            z_p = matio.read_matrix(_resolve(base, v.feature_path))
            if v.head_path:
                h_p = matio.read_matrix(_resolve(base, v.head_path))
                head_mode = "file"
            else:
                h_p = h_t
                head_mode = "frozen-head"
            report = prism_bound(
                z_t, z_p, h_t, h_p,
                alignment=args.alignment,
                k_feat_mode=args.k_feat_mode,
                variant_id=v.variant_id,
                empirical_gap=v.empirical_gap,
            )
        except (PrismError, OSError, ValueError) as e:
            if not args.skip_bad:
                raise
            print(f"variant {v.variant_id}: {e}", file=sys.stderr)
            any_failed = True
            rows.append({
                "variant_id": v.variant_id, "family": v.family, "method": v.method,
                "head_mode": "failed",
            })
            continue
        d = report_to_dict(report)
        rows.append({
            "variant_id": v.variant_id, "family": v.family, "method": v.method,
            "head_mode": head_mode,
            "rho_t": d["rho_t"], "rho_p": d["rho_p"], "omega": d["omega"],
            "delta": d["delta"], "gamma": d["gamma"], "bound": d["bound"],
            "empirical_gap": d.get("empirical_gap"),
        })
    sys.stdout.write(_emit_rows(rows, _BOUND_COLUMNS, args.format))
    return 1 if any_failed else 0


def cmd_verify(args) -> int:
    if args.trials < 1:
        print("error: --trials must be >= 1", file=sys.stderr)
        return 2
    kinds = args.kinds.split(",") if args.kinds else list(PERTURBATION_KINDS)
    result = sweep(
        seed=args.seed,
        trials=args.trials,
        n=args.n, d=args.d, vocab=args.V,
        kinds=kinds,
        alignment=args.alignment,
        k_feat_mode=args.k_feat_mode,
    )
    if args.csv:
        Path(args.csv).write_text(sweep_rows_to_csv(result.rows), encoding="utf-8")
    print(f"trials={len(result.rows)} violations={result.violations} "
          f"max_slack_ratio={result.max_slack_ratio:.6f}")
    return 0 if result.violations == 0 else 1


def cmd_rank(args) -> int:
    grid = [float(g) for g in args.grid.split(",")] if args.grid else list(DEFAULT_RANK_GRID)
    kinds = args.kinds.split(",") if args.kinds else list(PERTURBATION_KINDS)
    summary = rank_experiment(
        seed=args.seed,
        grid=grid,
        sizes=(args.n, args.d, args.V),
        kinds=kinds,
        alignment=args.alignment,
        k_feat_mode=args.k_feat_mode,
    )
    if args.csv:
        Path(args.csv).write_text(sweep_rows_to_csv(summary.rows), encoding="utf-8")
    ok = True
    for kind, r_s in summary.r_s.items():
        print(f"r_s[{kind}] = {r_s:.4f}")
        if r_s < RANK_THRESHOLD:
            ok = False
    return 0 if ok else 1


def cmd_gradcheck(args) -> int:
    max_err = gradient_check(seed=args.seed, instances=args.instances, coords=args.coords)
    print(f"max_relative_error={max_err:.3e} over "
          f"{args.instances} instances x {args.coords} coordinates")
    return 0 if max_err <= GRADCHECK_THRESHOLD else 1


def cmd_demo(args) -> int:
    lambdas = [float(x) for x in args.lambdas.split(",")]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    any_diverged = False
    for lam in lambdas:
        result = drift_demo(seed=args.seed, lam=lam, steps=args.steps, lr=args.lr)
        path = out_dir / f"demo_lambda_{lam:g}.csv"
        path.write_text(demo_to_csv(result), encoding="utf-8")
        status = "diverged" if result.diverged else "ok"
        any_diverged = any_diverged or result.diverged
        print(f"lambda={lam:g} final_omega={result.omega_trajectory[-1]:.6f} "
              f"status={status} csv={path}")
    return 1 if any_diverged else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prism",
        description="Scale/shape/head decomposition and certified risk-gap bounds",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--alignment", choices=("identity", "procrustes"), default="identity")
        p.add_argument("--k-feat-mode", choices=("exact", "spectral"), default="exact")

    def add_sizes(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--n", type=int, default=DEFAULT_SIZES[0])
        p.add_argument("--d", type=int, default=DEFAULT_SIZES[1])
        p.add_argument("--V", type=int, default=DEFAULT_SIZES[2])

    p = sub.add_parser("decompose", help="scale/shape decomposition of target vs proxy features")
    p.add_argument("--target", required=True, help="target feature matrix file")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--proxy", help="proxy feature matrix file")
    group.add_argument("--manifest", help="variant manifest (one output row per variant)")
    p.add_argument("--format", choices=("table", "csv", "json"), default="table")
    p.add_argument("--alignment", choices=("identity", "procrustes"), default="identity")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("bound", help="per-variant bound reports from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--target-features", required=True)
    p.add_argument("--target-head", required=True)
    p.add_argument("--skip-bad", action="store_true",
                   help="mark unreadable variants failed instead of aborting")
    p.add_argument("--format", choices=("table", "csv", "json"), default="table")
    add_common(p)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("verify", help="brute-force bound verification sweep")
    add_sizes(p)
    p.add_argument("--trials", type=int,
                   default=len(PERTURBATION_KINDS) * len(DEFAULT_MAGNITUDES) * 8)
    p.add_argument("--kinds", help="comma-separated perturbation kinds")
    p.add_argument("--csv", help="write one verification record per row to this file")
    add_common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("rank", help="bound-vs-gap rank correlation per perturbation axis")
    add_sizes(p)
    p.add_argument("--grid", help="comma-separated magnitude grid")
    p.add_argument("--kinds", help="comma-separated perturbation kinds")
    p.add_argument("--csv", help="write per-instance records to this file")
    add_common(p)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("gradcheck", help="finite-difference check of the shape-penalty gradient")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--instances", type=int, default=50)
    p.add_argument("--coords", type=int, default=20)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("demo", help="toy drift run with the shape regularizer")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lambdas", default="0,0.01,0.1,1.0")
    p.add_argument("--steps", type=int, default=80)
    p.add_argument("--lr", type=float, default=0.3)
    p.add_argument("--out-dir", default="demo_out")
    p.set_defaults(func=cmd_demo)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (PrismError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
