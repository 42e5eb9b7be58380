"""The batch pipeline: fuse, align, place landmarks, build the topo graph.

Stages run in a fixed order and are independently skippable: a stage whose
inputs are not configured is skipped with a log line. A configured alignment
that fails for lack of anchors (or degenerate geometry) aborts the run unless
allow_partial is set, in which case the landmark and topo stages are skipped
with a warning and the document carries empty landmark/topo sections. Errors
escaping a stage are wrapped with the stage name.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import (
    DegenerateGeometryError,
    InsufficientAnchorsError,
    PipelineStageError,
    SemmapError,
    ValidationError,
    ZeroScaleError,
)
from .fusion import FusionReport, fuse_frame, load_raster
from .geoalign import estimate_similarity, sample_anchors
from .io import (
    SemanticMapDocument,
    export_dot,
    export_ply,
    load_gps_csv,
    load_landmarks_csv,
    load_slam_export,
    save_map,
)
from .landmarks import associate_landmarks, place_landmarks
from .topo import (
    DEFAULT_MERGE_RADIUS,
    DEFAULT_TURN_THRESHOLD,
    DEFAULT_TURN_WINDOW,
    build_topo,
    detect_turns,
    fuse_revisits,
)

log = logging.getLogger(__name__)

RASTER_PATTERN = "frame_{:06d}.sscm"

MAP_JSON = "map.json"
CLOUD_PLY = "map.ply"
TOPO_DOT = "topo.dot"


@dataclass
class PipelineConfig:
    """Inputs, outputs, and stage parameters for one pipeline run."""

    slam: str | Path
    rasters: str | Path | None = None
    gps: str | Path | None = None
    landmarks: str | Path | None = None
    out: str | Path | None = None
    stride: int = 30
    turn_threshold: float = DEFAULT_TURN_THRESHOLD
    turn_window: int = DEFAULT_TURN_WINDOW
    merge_radius: float = DEFAULT_MERGE_RADIUS
    allow_partial: bool = False


def _stage(name: str, fn):
    try:
        return fn()
    except PipelineStageError:
        raise
    except SemmapError as exc:
        raise PipelineStageError(name, exc) from exc


def run_pipeline(config: PipelineConfig) -> SemanticMapDocument:
    """Execute the configured stages and return (and optionally write) the map."""
    export = _stage("load-slam", lambda: load_slam_export(config.slam))
    smap = export.to_semantic_map()

    if config.rasters is not None:
        def fuse_all():
            raster_dir = Path(config.rasters)
            totals = FusionReport()
            for kf in export.keyframes:
                visible = export.visibility.get(kf.frame_id, [])
                if not visible:
                    continue
                raster = load_raster(raster_dir / RASTER_PATTERN.format(kf.frame_id))
                totals += fuse_frame(smap, kf, raster, visible)
            log.info(
                "fusion: %d updates, %d projection rejects, %d bounds rejects",
                totals.updated, totals.rejected_projection, totals.rejected_bounds,
            )
        _stage("fuse", fuse_all)
    else:
        log.info("fuse: no rasters configured, beliefs stay uniform")

    transform = None
    rmse = None
    origin = None
    if config.gps is not None:
        def align():
            fixes = load_gps_csv(config.gps)
            anchors = sample_anchors(export.keyframes, fixes, stride=config.stride)
            estimated, residual = estimate_similarity(anchors)
            log.info(
                "alignment: %d anchors, scale %.6g, residual RMSE %.4g",
                len(anchors), estimated.scale, residual,
            )
            return estimated, residual, anchors.origin
        try:
            transform, rmse, origin = _stage("align", align)
        except PipelineStageError as exc:
            recoverable = (InsufficientAnchorsError, DegenerateGeometryError, ZeroScaleError)
            if config.allow_partial and isinstance(exc.cause, recoverable):
                log.warning("alignment skipped (%s); landmark and topo stages degraded", exc.cause)
            else:
                raise
    else:
        log.info("align: no GPS configured")

    placed = []
    associations = None
    if config.landmarks is not None:
        if transform is None:
            message = "landmark placement requires a GPS alignment"
            if not config.allow_partial:
                raise PipelineStageError("landmarks", ValidationError(message))
            log.warning("%s; skipping landmark and topo stages", message)
        else:
            def landmarks_stage():
                gazetteer = load_landmarks_csv(config.landmarks)
                placed_landmarks = place_landmarks(gazetteer, transform, origin)
                assoc = associate_landmarks(placed_landmarks, export.keyframes)
                log.info("landmarks: placed and associated %d entries", len(placed_landmarks))
                return placed_landmarks, assoc
            placed, associations = _stage("landmarks", landmarks_stage)

    graph = None
    if associations is not None:
        def topo_stage():
            turns = detect_turns(
                export.keyframes,
                angle_threshold=config.turn_threshold,
                window=config.turn_window,
            )
            built = build_topo(export.keyframes, associations, turns)
            fused = fuse_revisits(built, merge_radius=config.merge_radius)
            log.info(
                "topo: %d turns detected, %d nodes after revisit fusion",
                len(turns), len(fused.nodes),
            )
            return fused
        graph = _stage("topo", topo_stage)

    doc = SemanticMapDocument(
        points=[smap.points[pid] for pid in sorted(smap.points)],
        landmarks=placed,
        transform=transform,
        alignment_rmse=rmse,
        topo=graph,
    )

    if config.out is not None:
        def write_outputs():
            out_dir = Path(config.out)
            out_dir.mkdir(parents=True, exist_ok=True)
            save_map(doc, out_dir / MAP_JSON)
            export_ply(doc, out_dir / CLOUD_PLY)
            export_dot(doc, out_dir / TOPO_DOT)
            log.info("wrote %s, %s, %s in %s", MAP_JSON, CLOUD_PLY, TOPO_DOT, out_dir)
        _stage("export", write_outputs)

    return doc


def turn_threshold_from_degrees(degrees: float) -> float:
    return math.radians(degrees)
