"""Command-line interface.

Subcommands: fuse, align, landmarks, topo, run, synth, export. Options can
come from a JSON config file (--config); explicit flags override config
entries. See README for the file formats.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import pipeline
from .errors import SemmapError, ValidationError
from .geoalign import SimilarityTransform, estimate_similarity, sample_anchors
from .io import (
    load_gps_csv,
    load_landmarks_csv,
    load_map,
    load_slam_export,
    export_dot,
    export_ply,
    transform_to_dict,
)
from .landmarks import associate_landmarks, place_landmarks
from .synth import WorldSpec, generate_world, rotation_about_z
from .topo import build_topo, detect_turns, fuse_revisits, graph_to_dict, to_dot

log = logging.getLogger(__name__)

_CONFIG_KEYS = (
    "slam", "rasters", "gps", "landmarks", "out", "stride",
    "turn_threshold_deg", "turn_window", "merge_radius", "allow_partial",
)


def _add_pipeline_flags(parser: argparse.ArgumentParser, *, need_slam: bool = True) -> None:
    parser.add_argument("--config", help="JSON config file; flags override its entries")
    parser.add_argument("--slam", required=False, help="SLAM export text file")
    parser.add_argument("--rasters", help="directory of SSCM score rasters (frame_NNNNNN.sscm)")
    parser.add_argument("--gps", help="GPS fixes CSV (frame_id,lat,lon,alt)")
    parser.add_argument("--landmarks", help="landmark gazetteer CSV (name,lat,lon[,sigma])")
    parser.add_argument("--out", help="output directory for map.json / map.ply / topo.dot")
    parser.add_argument("--stride", type=int, help="GPS anchor sampling stride (default 30)")
    parser.add_argument("--turn-threshold-deg", type=float, dest="turn_threshold_deg",
                        help="accumulated heading change that counts as a turn (default 30)")
    parser.add_argument("--turn-window", type=int, dest="turn_window",
                        help="keyframe window for turn accumulation (default 5)")
    parser.add_argument("--merge-radius", type=float, dest="merge_radius",
                        help="revisit node merge radius in map units (default 5)")
    parser.add_argument("--allow-partial", action="store_true", default=None,
                        dest="allow_partial",
                        help="degrade landmark/topo stages instead of failing on weak GPS")
    parser.set_defaults(_need_slam=need_slam)


def _merged_options(args: argparse.Namespace) -> dict:
    options: dict = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            try:
                loaded = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"config file is not valid JSON: {exc}")
        unknown = set(loaded) - set(_CONFIG_KEYS)
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        options.update(loaded)
    for key in _CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            options[key] = value
    return options


def _pipeline_config(args: argparse.Namespace, **overrides) -> pipeline.PipelineConfig:
    options = _merged_options(args)
    options.update({k: v for k, v in overrides.items() if v is not None})
    if options.get("slam") is None:
        raise ValidationError("--slam (or a config with 'slam') is required")
    threshold_deg = options.get("turn_threshold_deg")
    return pipeline.PipelineConfig(
        slam=options["slam"],
        rasters=options.get("rasters"),
        gps=options.get("gps"),
        landmarks=options.get("landmarks"),
        out=options.get("out"),
        stride=int(options.get("stride", 30)),
        turn_threshold=(
            math.radians(float(threshold_deg)) if threshold_deg is not None
            else pipeline.DEFAULT_TURN_THRESHOLD
        ),
        turn_window=int(options.get("turn_window", pipeline.DEFAULT_TURN_WINDOW)),
        merge_radius=float(options.get("merge_radius", pipeline.DEFAULT_MERGE_RADIUS)),
        allow_partial=bool(options.get("allow_partial", False)),
    )


def _cmd_run(args: argparse.Namespace) -> int:
    doc = pipeline.run_pipeline(_pipeline_config(args))
    labeled = sum(1 for p in doc.points if p.observation_count > 0)
    print(f"map: {len(doc.points)} points ({labeled} observed), "
          f"{len(doc.landmarks)} landmarks, "
          f"{'no topo graph' if doc.topo is None else f'{len(doc.topo.nodes)} topo nodes'}")
    return 0


def _cmd_fuse(args: argparse.Namespace) -> int:
    config = _pipeline_config(args)
    config.gps = None
    config.landmarks = None
    if config.rasters is None:
        raise ValidationError("fuse requires --rasters")
    doc = pipeline.run_pipeline(config)
    print(f"fused beliefs for {len(doc.points)} points")
    return 0


def _cmd_align(args: argparse.Namespace) -> int:
    options = _merged_options(args)
    if options.get("slam") is None or options.get("gps") is None:
        raise ValidationError("align requires --slam and --gps")
    export = load_slam_export(options["slam"])
    fixes = load_gps_csv(options["gps"])
    anchors = sample_anchors(export.keyframes, fixes, stride=int(options.get("stride", 30)))
    transform, rmse = estimate_similarity(anchors)
    payload = transform_to_dict(transform)
    payload["residual_rmse"] = rmse
    payload["anchors"] = len(anchors)
    payload["origin"] = {
        "lat": anchors.origin.lat, "lon": anchors.origin.lon, "alt": anchors.origin.alt,
    }
    text = json.dumps(payload, indent=2, sort_keys=True)
    if options.get("out"):
        out = Path(options["out"])
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text + "\n", encoding="utf-8")
        print(f"wrote {out}")
    else:
        print(text)
    return 0


def _cmd_landmarks(args: argparse.Namespace) -> int:
    options = _merged_options(args)
    for key in ("slam", "gps", "landmarks"):
        if options.get(key) is None:
            raise ValidationError("landmarks requires --slam, --gps, and --landmarks")
    export = load_slam_export(options["slam"])
    fixes = load_gps_csv(options["gps"])
    anchors = sample_anchors(export.keyframes, fixes, stride=int(options.get("stride", 30)))
    transform, _ = estimate_similarity(anchors)
    placed = place_landmarks(load_landmarks_csv(options["landmarks"]), transform, anchors.origin)
    associations = associate_landmarks(placed, export.keyframes)
    payload = {
        "landmarks": [
            {
                "name": lm.name,
                "map_position": [float(v) for v in lm.map_position],
                "sigma": lm.sigma,
            }
            for lm in placed
        ],
        "associations": [
            {"name": a.name, "frame_id": a.frame_id, "distance": a.distance}
            for a in associations
        ],
    }
    text = json.dumps(payload, indent=2, sort_keys=True)
    if options.get("out"):
        out = Path(options["out"])
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text + "\n", encoding="utf-8")
        print(f"wrote {out}")
    else:
        print(text)
    return 0


def _cmd_topo(args: argparse.Namespace) -> int:
    options = _merged_options(args)
    for key in ("slam", "gps", "landmarks"):
        if options.get(key) is None:
            raise ValidationError("topo requires --slam, --gps, and --landmarks")
    export = load_slam_export(options["slam"])
    fixes = load_gps_csv(options["gps"])
    anchors = sample_anchors(export.keyframes, fixes, stride=int(options.get("stride", 30)))
    transform, _ = estimate_similarity(anchors)
    placed = place_landmarks(load_landmarks_csv(options["landmarks"]), transform, anchors.origin)
    associations = associate_landmarks(placed, export.keyframes)
    threshold_deg = options.get("turn_threshold_deg")
    turns = detect_turns(
        export.keyframes,
        angle_threshold=(
            math.radians(float(threshold_deg)) if threshold_deg is not None
            else pipeline.DEFAULT_TURN_THRESHOLD
        ),
        window=int(options.get("turn_window", pipeline.DEFAULT_TURN_WINDOW)),
    )
    graph = fuse_revisits(
        build_topo(export.keyframes, associations, turns),
        merge_radius=float(options.get("merge_radius", pipeline.DEFAULT_MERGE_RADIUS)),
    )
    if options.get("out"):
        out_dir = Path(options["out"])
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "topo.dot").write_text(to_dot(graph), encoding="utf-8")
        (out_dir / "topo.json").write_text(
            json.dumps(graph_to_dict(graph), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        print(f"wrote topo.dot and topo.json in {out_dir}")
    else:
        print(to_dot(graph), end="")
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    spec = WorldSpec(
        seed=args.seed,
        n_points=args.points,
        n_frames=args.frames,
        shape=args.shape,
        margin=args.margin,
        gps_noise=args.gps_noise,
        transform=SimilarityTransform(
            rotation=rotation_about_z(math.radians(args.yaw_deg)),
            scale=args.scale,
            translation=np.array(args.translation),
        ),
        n_landmarks=args.landmarks,
        point_placement=args.placement,
    )
    paths, truth = generate_world(spec, args.out)
    print(f"world written to {paths.root} "
          f"({spec.n_frames} frames, {spec.n_points} points, "
          f"{len(truth.turn_frames)} true turns)")
    return 0


def _cmd_export(args: argparse.Namespace) -> int:
    doc = load_map(args.map)
    wrote = []
    if args.ply:
        export_ply(doc, args.ply)
        wrote.append(args.ply)
    if args.dot:
        export_dot(doc, args.dot)
        wrote.append(args.dot)
    if not wrote:
        raise ValidationError("export needs --ply and/or --dot")
    print("wrote " + ", ".join(str(p) for p in wrote))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semmap",
        description="Semantic map fusion: label fusion, GPS alignment, landmarks, topo graphs.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log at DEBUG level")
    parser.add_argument("-q", "--quiet", action="store_true", help="log warnings only")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="full pipeline: fuse, align, landmarks, topo, export")
    _add_pipeline_flags(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_fuse = sub.add_parser("fuse", help="Bayesian label fusion only")
    _add_pipeline_flags(p_fuse)
    p_fuse.set_defaults(func=_cmd_fuse)

    p_align = sub.add_parser("align", help="estimate the GPS-to-map similarity transform")
    _add_pipeline_flags(p_align)
    p_align.set_defaults(func=_cmd_align)

    p_lm = sub.add_parser("landmarks", help="place and associate the landmark gazetteer")
    _add_pipeline_flags(p_lm)
    p_lm.set_defaults(func=_cmd_landmarks)

    p_topo = sub.add_parser("topo", help="build the topological graph")
    _add_pipeline_flags(p_topo)
    p_topo.set_defaults(func=_cmd_topo)

    p_synth = sub.add_parser("synth", help="generate a synthetic input bundle")
    p_synth.add_argument("--out", required=True, help="bundle output directory")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--points", type=int, default=40)
    p_synth.add_argument("--frames", type=int, default=120)
    p_synth.add_argument("--shape", default="straight",
                         choices=["straight", "L", "loop", "figure-eight"])
    p_synth.add_argument("--margin", type=float, default=0.3,
                         help="expected true-label score margin in (0, 1]")
    p_synth.add_argument("--gps-noise", type=float, default=2.0, dest="gps_noise",
                         help="GPS noise sigma in meters")
    p_synth.add_argument("--scale", type=float, default=2.0,
                         help="true map-units-per-meter scale")
    p_synth.add_argument("--yaw-deg", type=float, default=20.0, dest="yaw_deg",
                         help="true rotation about the vertical axis")
    p_synth.add_argument("--translation", type=float, nargs=3, default=[140.0, -60.0, 3.0],
                         metavar=("TX", "TY", "TZ"))
    p_synth.add_argument("--landmarks", type=int, default=4,
                         help="number of gazetteer landmarks")
    p_synth.add_argument("--placement", default="along", choices=["along", "ahead"],
                         help="map point placement strategy")
    p_synth.set_defaults(func=_cmd_synth)

    p_export = sub.add_parser("export", help="re-export a saved map as PLY/DOT")
    p_export.add_argument("--map", required=True, help="map.json to load")
    p_export.add_argument("--ply", help="output PLY path")
    p_export.add_argument("--dot", help="output DOT path")
    p_export.set_defaults(func=_cmd_export)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SemmapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
