"""Command-line driver: scenario simulation, pipeline, maps, what-if service.

Exit codes: 0 success, 1 input error (bad files, bad arguments), 2 internal
error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .bundle import bundle_hash, load_bundle, save_bundle, save_map, write_map_csv_slices
from .clustering import export_labels
from .errors import (FlowmapError, FormatError, InsufficientDataError, InvalidInputError)
from .flowmodel import Region
from .ingest import clean_trajectories, parse_trajectory_file, serialize_trajectories
from .model import WhatIfOverrides
from .pipeline import PipelineConfig, load_config, run_pipeline
from .proximity import MAP_KINDS, generate_map
from .simulate import generate_scenario, load_scenario

_INPUT_ERRORS = (InvalidInputError, FormatError, InsufficientDataError, OSError,
                 json.JSONDecodeError)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return 1
    try:
        return args.func(args)
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FlowmapError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flowmap",
                                     description="airspace flow modeling and proximity maps")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("simulate", help="generate a synthetic trajectory corpus")
    p.add_argument("--config", required=True, help="scenario spec JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="trajectory CSV to write")
    p.add_argument("--truth", help="ground-truth labels CSV (default <out>.truth.csv)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("ingest", help="parse and clean a trajectory file")
    p.add_argument("--config", required=True)
    p.add_argument("--in", dest="traj", required=True)
    p.add_argument("--out", help="write the cleaned trajectories here")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("cluster", help="cluster a trajectory file into flows")
    p.add_argument("--config", required=True)
    p.add_argument("--in", dest="traj", required=True)
    p.add_argument("--out", required=True, help="labels CSV to write")
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("fit", help="fit the generative model (pipeline alias)")
    _add_pipeline_args(p)
    p.set_defaults(func=_cmd_pipeline)

    p = sub.add_parser("pipeline", help="trajectories -> clusters -> model bundle")
    _add_pipeline_args(p)
    p.set_defaults(func=_cmd_pipeline)

    p = sub.add_parser("map", help="compute a proximity map from a bundle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--kind", choices=MAP_KINDS, default="presence")
    p.add_argument("--weekday", type=int, default=0, help="0=Monday .. 6=Sunday")
    p.add_argument("--bin", type=int, default=0, help="time bin index within the day")
    p.add_argument("--out", required=True, help="map JSON to write")
    p.add_argument("--csv-dir", help="also write per-FL CSV slices here")
    p.add_argument("--region", type=float, nargs=6,
                   metavar=("X_LO", "X_HI", "Y_LO", "Y_HI", "Z_LO", "Z_HI"))
    p.add_argument("--step-xy", type=float, default=1.0)
    p.add_argument("--step-z", type=float, default=1000.0)
    p.add_argument("--rate-scale", action="append", default=[], metavar="FLOW_ID=FACTOR")
    p.add_argument("--remove", action="append", type=int, default=[], metavar="FLOW_ID")
    p.add_argument("--prox-lateral", type=float, help="proximity half-width override, NM")
    p.add_argument("--prox-vertical", type=float, help="proximity half-height override, ft")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_map)

    p = sub.add_parser("serve", help="run the what-if HTTP service")
    p.add_argument("--bundle", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=_cmd_serve)
    return parser


def _add_pipeline_args(p) -> None:
    p.add_argument("--config", required=True)
    p.add_argument("--in", dest="traj", required=True)
    p.add_argument("--out", required=True, help="bundle JSON to write")
    p.add_argument("--report", help="human-readable report path (default <out>.report.txt)")


def _cmd_simulate(args) -> int:
    spec = load_scenario(args.config)
    truth = args.truth or f"{args.out}.truth.csv"
    result = generate_scenario(spec, args.seed, args.out, truth)
    print(f"wrote {len(result.trajectories)} flights to {args.out}")
    for name, count in sorted(result.flights_per_flow.items()):
        print(f"  {name}: {count}")
    return 0


def _cmd_ingest(args) -> int:
    config = load_config(args.config)
    parsed = parse_trajectory_file(args.traj)
    clean, rejected = clean_trajectories(parsed.trajectories, config.cleaning)
    print(f"parsed {len(parsed.trajectories)} flights "
          f"({parsed.malformed_lines} malformed lines)")
    reasons: dict[str, int] = {}
    for _, reason in rejected:
        reasons[reason] = reasons.get(reason, 0) + 1
    print(f"clean {len(clean)}, rejected {len(rejected)} {reasons if reasons else ''}".rstrip())
    if args.out:
        serialize_trajectories(clean, args.out)
        print(f"wrote cleaned corpus to {args.out}")
    return 0


def _cmd_cluster(args) -> int:
    config = load_config(args.config)
    result = run_pipeline(config, args.traj)
    export_labels(args.out, result.resampled, result.labeling)
    print(f"{result.labeling.n_clusters} clusters, "
          f"outlier fraction {result.labeling.outlier_fraction:.3f}; labels in {args.out}")
    return 0


def _cmd_pipeline(args) -> int:
    config = load_config(args.config)
    result = run_pipeline(config, args.traj)
    digest = save_bundle(result.bundle, args.out)
    report_path = args.report or f"{args.out}.report.txt"
    with open(report_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(result.report)
    print(f"bundle {digest[:12]} with {result.bundle.n_flows} flows -> {args.out}")
    print(f"report -> {report_path}")
    return 0


def _cmd_map(args) -> int:
    bundle = load_bundle(args.bundle)
    rate_scale = {}
    for item in args.rate_scale:
        fid, _, factor = item.partition("=")
        try:
            rate_scale[int(fid)] = float(factor)
        except ValueError:
            raise InvalidInputError(f"bad --rate-scale {item!r}, expected FLOW_ID=FACTOR")
    overrides = WhatIfOverrides(
        rate_scale=rate_scale,
        removed_flows=frozenset(args.remove),
        half_lateral=args.prox_lateral,
        half_vertical=args.prox_vertical,
    )
    region = Region(*args.region) if args.region else None
    grid = generate_map(bundle, region=region, steps=(args.step_xy, args.step_xy, args.step_z),
                        kind=args.kind, time_bin=(args.weekday, args.bin),
                        overrides=overrides, mode=bundle.provenance.get(
                            "config", {}).get("speed_mode", "constant-speed"),
                        workers=args.workers)
    overrides_doc = {
        "rate_scale": {str(k): v for k, v in sorted(rate_scale.items())},
        "removed_flows": sorted(args.remove),
        "half_lateral": args.prox_lateral,
        "half_vertical": args.prox_vertical,
    }
    save_map(grid, args.out, model_hash=bundle_hash(bundle), overrides_doc=overrides_doc)
    print(f"{args.kind} map {grid.values.shape} -> {args.out} "
          f"(max {float(np.max(grid.values)):.6f})")
    if args.csv_dir:
        import os
        os.makedirs(args.csv_dir, exist_ok=True)
        for path in write_map_csv_slices(grid, args.csv_dir):
            print(f"  slice -> {path}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    bundle = load_bundle(args.bundle)
    app = create_app(bundle)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


if __name__ == "__main__":
    sys.exit(main())
