"""Command-line entry point: one subcommand per pipeline stage.

Stages write their artifacts under <out>/<stage>/ together with a
manifest.json of config and file hashes, so a chain of runs documents its
own reproducibility.  Later stages locate their prerequisites in the same
run directory.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import pipeline
from .config import RunConfig

log = logging.getLogger(__name__)

STAGES = (
    "synth",
    "ingest",
    "clean",
    "classify",
    "tracks",
    "metrics",
    "grid",
    "berths",
    "locate-receivers",
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aisbay",
        description="Reconstruct vessel activity from AIS reports and locate "
        "receivers from radio shadows.",
    )
    parser.add_argument("--config", help="JSON/TOML run configuration")
    parser.add_argument("--out", default="run", help="run directory (default: run)")
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="stage", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scenario")
    p.add_argument("--scenario", help="scenario JSON (default: built-in reference)")
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("ingest", help="parse and normalize NDJSON reports")
    p.add_argument("inputs", nargs="*", help="NDJSON files ('-' for stdin)")
    p.add_argument("--type-map", help="code->category map (JSON/TOML)")
    p.add_argument("--gt-table", help="gross tonnage CSV")
    p.add_argument("--window", nargs=2, type=int, metavar=("T0", "T1"))

    p = sub.add_parser("clean", help="run the cleaning cascade")
    p.add_argument("--roi", help="ROI polygon GeoJSON")
    p.add_argument("--areas", help="transit areas GeoJSON")

    p = sub.add_parser("classify", help="label inter-leg gaps moored/absent")
    p.add_argument("--areas", help="transit areas GeoJSON")
    p.add_argument("--areas-policy", dest="areas_policy",
                   help="low | df | hi | comma-separated ids")

    sub.add_parser("tracks", help="build trajectory models")

    p = sub.add_parser("metrics", help="counts, transits, daily profiles")
    p.add_argument("--edge-exclusion-days", type=float, default=None)
    p.add_argument("--gt-split", type=float, default=None)
    p.add_argument("--delta-dark", type=float, default=None)
    p.add_argument("--delta-aisb-file", default=None)

    p = sub.add_parser("grid", help="accumulate occupancy/speed/course rasters")
    p.add_argument("--shoreline", help="land polygons GeoJSON")
    p.add_argument("--bbox", nargs=4, type=float,
                   metavar=("LAT0", "LAT1", "LON0", "LON1"))

    p = sub.add_parser("berths", help="detect and label berth areas")
    p.add_argument("--shoreline", help="land polygons GeoJSON")

    p = sub.add_parser("locate-receivers", help="estimate receiver positions")
    p.add_argument("--segments", help="shadow segment GeoJSON")

    return parser


def _apply_args(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    if args.threads is not None:
        cfg.threads = args.threads
    stage = args.stage
    if stage == "synth":
        if args.scenario:
            cfg.scenario_path = args.scenario
        if args.seed is not None:
            cfg.seed = args.seed
    elif stage == "ingest":
        if args.inputs:
            cfg.input_paths = args.inputs
        if args.type_map:
            cfg.type_map_path = args.type_map
        if args.gt_table:
            cfg.gt_table_path = args.gt_table
        if args.window:
            cfg.window_start, cfg.window_end = args.window
    elif stage == "clean":
        if args.roi:
            cfg.roi_path = args.roi
        if args.areas:
            cfg.areas_path = args.areas
    elif stage == "classify":
        if args.areas:
            cfg.areas_path = args.areas
        if args.areas_policy:
            cfg.areas_policy = args.areas_policy
    elif stage == "metrics":
        if args.edge_exclusion_days is not None:
            cfg.edge_exclusion_days = args.edge_exclusion_days
        if args.gt_split is not None:
            cfg.gt_split = args.gt_split
        if args.delta_dark is not None:
            cfg.delta_dark = args.delta_dark
        if args.delta_aisb_file is not None:
            cfg.delta_aisb_file = args.delta_aisb_file
    elif stage == "grid":
        if args.shoreline:
            cfg.shoreline_path = args.shoreline
        if args.bbox:
            (cfg.grid_lat_min, cfg.grid_lat_max,
             cfg.grid_lon_min, cfg.grid_lon_max) = args.bbox
    elif stage == "berths":
        if args.shoreline:
            cfg.shoreline_path = args.shoreline
    elif stage == "locate-receivers":
        if args.segments:
            cfg.segments_path = args.segments
    return cfg


def run_stage(stage: str, cfg: RunConfig, out_root: str) -> dict:
    """Dispatch one stage; returns its counter dict."""
    stage_dir = os.path.join(out_root, stage)
    if stage == "synth":
        return pipeline.run_synth(cfg, stage_dir)
    if stage == "ingest":
        return pipeline.run_ingest(cfg, stage_dir)
    if stage == "clean":
        return pipeline.run_clean(cfg, stage_dir, os.path.join(out_root, "ingest"))
    if stage == "classify":
        return pipeline.run_classify(cfg, stage_dir, os.path.join(out_root, "clean"))
    if stage == "tracks":
        return pipeline.run_tracks(cfg, stage_dir, os.path.join(out_root, "clean"))
    if stage == "metrics":
        return pipeline.run_metrics(
            cfg, stage_dir,
            os.path.join(out_root, "ingest"),
            os.path.join(out_root, "clean"),
            os.path.join(out_root, "classify"),
        )
    if stage == "grid":
        return pipeline.run_grid(
            cfg, stage_dir,
            os.path.join(out_root, "tracks"),
            os.path.join(out_root, "classify"),
        )
    if stage == "berths":
        return pipeline.run_berths(
            cfg, stage_dir,
            os.path.join(out_root, "grid"),
            os.path.join(out_root, "tracks"),
            os.path.join(out_root, "classify"),
            os.path.join(out_root, "ingest"),
        )
    if stage == "locate-receivers":
        return pipeline.run_locate_receivers(cfg, stage_dir)
    raise ValueError(f"unknown stage {stage}")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level.upper(), logging.WARNING))

    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
        cfg = _apply_args(cfg, args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    try:
        counts = run_stage(args.stage, cfg, args.out)
    except pipeline.MissingArtifact as exc:
        print(f"missing prerequisite: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"{args.stage} failed: {exc}", file=sys.stderr)
        return 1

    for key in sorted(counts):
        print(f"{args.stage}: {key} = {counts[key]}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
