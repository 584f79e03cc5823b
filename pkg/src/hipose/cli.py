"""Command-line front end: `hipose encode|solve|bench`.

Conventions: stdout carries data, stderr carries diagnostics. Exit codes are
0 success, 1 unreadable/malformed input, 2 usage or invariant violation,
3 solver failure. A TOML file given via --config overrides command-line
flags; the HIPOSE_THREADS environment variable supplies the default thread
count.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .errors import HiposeError, InputError, InvariantError, SolverError

_LOG = logging.getLogger("hipose")

_MAX_BITS = 24


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="base RNG seed")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker processes (default: $HIPOSE_THREADS or 1)")
    parser.add_argument("--log-level", default="warning",
                        choices=["debug", "info", "warning", "error"])
    parser.add_argument("--out-dir", default=".", help="directory for output files")
    parser.add_argument("--config", default=None,
                        help="TOML file whose top-level keys override flags")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hipose",
        description="Hierarchical binary surface encoding and coarse-to-fine pose solving",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    enc = sub.add_parser("encode", help="build a surface encoding from a mesh")
    enc.add_argument("--mesh", required=True, help="ASCII PLY or OBJ file")
    enc.add_argument("--bits", type=int, default=16, help="code depth d (default 16)")
    enc.add_argument("--out", default=None, help="output .hsenc path")
    _common_flags(enc)

    solve = sub.add_parser("solve", help="estimate a pose from correspondences")
    solve.add_argument("--encoding", required=True, help=".hsenc file")
    solve.add_argument("--corrs", required=True, help="correspondence JSON-lines file")
    solve.add_argument("--solver", default="hierarchical",
                       choices=["hierarchical", "plain", "ransac"])
    solve.add_argument("--report", default=None, help="write the solve report JSON here")
    _common_flags(solve)

    bench = sub.add_parser("bench", help="run a synthetic ablation preset")
    bench.add_argument("--preset", required=True,
                       choices=["table3", "table2", "fig4", "noise"])
    bench.add_argument("--seeds", type=int, default=100, help="scenarios per cell")
    bench.add_argument("--bits", type=int, default=16, help="encoding depth")
    _common_flags(bench)
    return parser


def _apply_config(args: argparse.Namespace) -> dict:
    """Overlay --config TOML onto parsed flags: top-level keys replace the
    matching flag values; returns the sub-tables (solver/ransac/scenario)."""
    if not args.config:
        return {}
    try:
        with open(args.config, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config {args.config}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise InputError(f"malformed TOML in {args.config}: {exc}") from exc
    tables = {}
    for key, value in data.items():
        if isinstance(value, dict):
            tables[key] = value
            continue
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise InputError(f"unknown config key {key!r} in {args.config}")
        setattr(args, attr, value)
    return tables


def _resolve_threads(args: argparse.Namespace) -> int:
    if args.threads is not None:
        return max(1, int(args.threads))
    env = os.environ.get("HIPOSE_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise InputError(f"HIPOSE_THREADS must be an integer, got {env!r}") from exc
    return 1


def _require_file(path: str, what: str) -> None:
    if not os.path.isfile(path):
        raise InputError(f"{what} not found: {path}")


def cmd_encode(args: argparse.Namespace) -> int:
    from .encoding import build_encoding, save_encoding
    from .mesh import load_mesh, upsample_mesh

    if not 1 <= args.bits <= _MAX_BITS:
        raise InvariantError(f"--bits must be in [1, {_MAX_BITS}], got {args.bits}")
    _require_file(args.mesh, "mesh file")
    out = args.out or os.path.join(
        args.out_dir, os.path.splitext(os.path.basename(args.mesh))[0] + ".hsenc"
    )
    mesh = load_mesh(args.mesh)
    t0 = time.perf_counter()
    dense = upsample_mesh(mesh, args.bits, seed=args.seed)
    enc = build_encoding(dense, args.bits, args.seed)
    elapsed = time.perf_counter() - t0
    save_encoding(enc, out)
    print(f"d={enc.d} N={enc.n} build_seconds={elapsed:.3f} out={out}")
    return 0


def cmd_solve(args: argparse.Namespace, tables: dict) -> int:
    from .codes import read_correspondences
    from .encoding import load_encoding
    from .solver import (RansacParams, SolverConfig, hierarchical_solve,
                         plain_kabsch_solve, ransac_kabsch_solve)

    _require_file(args.encoding, "encoding file")
    _require_file(args.corrs, "correspondence file")
    enc = load_encoding(args.encoding)
    corrs = read_correspondences(args.corrs)

    try:
        solver_cfg = SolverConfig(**tables.get("solver", {}))
        ransac_params = RansacParams(seed=args.seed, **tables.get("ransac", {}))
    except TypeError as exc:
        raise InputError(f"bad solver/ransac table in config: {exc}") from exc

    if args.solver == "hierarchical":
        report = hierarchical_solve(enc, corrs, solver_cfg)
        payload = report.to_dict()
        pose = report.pose
        print(f"solver=hierarchical points={report.n_points} "
              f"final_inliers={len(report.final_inlier_ids)}")
        for rec in report.iterations:
            print(f"  it={rec.index} inliers={rec.inlier_count} "
                  f"median_distance={rec.median_distance:.6g}")
    elif args.solver == "plain":
        pose = plain_kabsch_solve(enc, corrs)
        payload = {"solver": "plain", "n_points": len(corrs), "pose": pose.to_dict()}
        print(f"solver=plain points={len(corrs)}")
    else:
        pose = ransac_kabsch_solve(enc, corrs, ransac_params)
        payload = {
            "solver": "ransac",
            "n_points": len(corrs),
            "seed": ransac_params.seed,
            "pose": pose.to_dict(),
        }
        print(f"solver=ransac points={len(corrs)} seed={ransac_params.seed}")

    print("rotation:")
    for row in pose.rotation:
        print("  [% .9f % .9f % .9f]" % tuple(row))
    print("translation: [%.6f %.6f %.6f]" % tuple(pose.translation))
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(payload, sort_keys=True))
        _LOG.info("report written to %s", args.report)
    return 0


def cmd_bench(args: argparse.Namespace, tables: dict) -> int:
    from .bench import default_bench_assets, run_preset

    if not 1 <= args.bits <= _MAX_BITS:
        raise InvariantError(f"--bits must be in [1, {_MAX_BITS}], got {args.bits}")
    if args.seeds < 1:
        raise InvariantError(f"--seeds must be >= 1, got {args.seeds}")
    threads = _resolve_threads(args)
    t0 = time.perf_counter()
    _LOG.info("building %d-bit benchmark encoding", args.bits)
    mesh, enc = default_bench_assets(bits=args.bits, seed=args.seed)
    _LOG.info("encoding ready in %.1fs", time.perf_counter() - t0)
    summary = run_preset(args.preset, args.out_dir, n_seeds=args.seeds,
                         threads=threads, base_seed=args.seed, enc=enc, mesh=mesh,
                         scenario_overrides=tables.get("scenario"))
    print(json.dumps(summary, indent=1, sort_keys=True))
    if summary.get("n_rows") and summary["n_rows"] == summary.get("n_failed"):
        print("all benchmark rows failed", file=sys.stderr)
        return 3
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        tables = _apply_config(args)
        logging.basicConfig(level=args.log_level.upper(), stream=sys.stderr,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.command == "encode":
            return cmd_encode(args)
        if args.command == "solve":
            return cmd_solve(args, tables)
        return cmd_bench(args, tables)
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return exc.exit_code
    except HiposeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
