"""Project map points into frames, sample score rasters, fuse beliefs.

The per-frame loop: project each visible point with the keyframe's composite
3x4 matrix, look up the per-pixel class scores at the nearest pixel, and fold
the normalized score vector into the point's belief. Points are independent
within a frame; frames for the same point must be applied in ascending
frame_id order.

Score raster binary format ("SSCM"):
    magic   4 bytes  b"SSCM"
    height  u32 little-endian
    width   u32 little-endian
    labels  u32 little-endian, must be 19
    data    height*width*labels float32 little-endian, row-major,
            channel-last
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateObservationError, ParseError, UnknownPointError, ValidationError
from .labels import N_LABELS
from .model import KeyframeRecord, SemanticMap, bayes_update

# Homogeneous depths at or below this are treated as behind the camera.
NEAR_PLANE = 1e-6

RASTER_MAGIC = b"SSCM"

# A pixel coordinate is a plain (u, v) float pair; u is the column axis.
PixelCoord = tuple[float, float]


@dataclass
class ScoreRaster:
    """Dense per-pixel class scores for one frame, shape (H, W, 19).

    Scores are non-negative but need not sum to 1 per pixel; sampling
    normalizes the channel vector.
    """

    scores: np.ndarray

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=float)
        if self.scores.ndim != 3 or self.scores.shape[2] != N_LABELS:
            raise ValidationError(
                f"raster must have shape (H, W, {N_LABELS}), got {self.scores.shape}"
            )
        if not np.all(np.isfinite(self.scores)):
            raise ValidationError("raster scores must be finite")
        if np.any(self.scores < 0.0):
            raise ValidationError("raster scores must be non-negative")

    @property
    def height(self) -> int:
        return self.scores.shape[0]

    @property
    def width(self) -> int:
        return self.scores.shape[1]


@dataclass
class FusionReport:
    """Per-frame fusion outcome counts; the three counts partition the input."""

    updated: int = 0
    rejected_projection: int = 0
    rejected_bounds: int = 0

    @property
    def total(self) -> int:
        return self.updated + self.rejected_projection + self.rejected_bounds

    def __iadd__(self, other: "FusionReport") -> "FusionReport":
        self.updated += other.updated
        self.rejected_projection += other.rejected_projection
        self.rejected_bounds += other.rejected_bounds
        return self


def project_point(position, camera_matrix) -> PixelCoord | None:
    """Project a map point: (u, v, w) = M @ (x, y, z, 1), return (u/w, v/w).

    Returns None when w <= NEAR_PLANE (point behind or grazing the camera).
    The matrix is assumed rank 3 (KeyframeRecord validates this).
    """
    m = np.asarray(camera_matrix, dtype=float)
    p = np.asarray(position, dtype=float)
    u, v, w = m[:, :3] @ p + m[:, 3]
    if not w > NEAR_PLANE:
        return None
    u, v = u / w, v / w
    if not (math.isfinite(u) and math.isfinite(v)):
        return None
    return (u, v)


def nearest_pixel(pixel: PixelCoord) -> tuple[int, int]:
    """Integer pixel via round-half-away-from-zero, as (column, row)."""
    return (_round_half_away(pixel[0]), _round_half_away(pixel[1]))


def _round_half_away(x: float) -> int:
    return math.floor(x + 0.5) if x >= 0.0 else math.ceil(x - 0.5)


def sample_scores(raster: ScoreRaster, pixel: PixelCoord) -> np.ndarray | None:
    """Nearest-pixel score lookup, normalized to a belief.

    Returns None when the rounded pixel falls outside [0, W) x [0, H).
    Raises DegenerateObservationError if the channel vector is all zero.
    """
    if not (math.isfinite(pixel[0]) and math.isfinite(pixel[1])):
        return None
    col, row = nearest_pixel(pixel)
    if not (0 <= col < raster.width and 0 <= row < raster.height):
        return None
    channel = raster.scores[row, col]
    total = channel.sum()
    if total <= 0.0:
        raise DegenerateObservationError(f"all-zero score vector at pixel ({col}, {row})")
    return channel / total


def fuse_frame(smap: SemanticMap, frame: KeyframeRecord, raster: ScoreRaster,
               visible_point_ids) -> FusionReport:
    """Fuse one frame's observations into the listed points.

    Each point is projected and sampled; points that fail projection or land
    out of bounds are skipped and counted. Beliefs and observation counts are
    updated in place; positions never change.
    """
    report = FusionReport()
    for pid in visible_point_ids:
        try:
            point = smap.points[pid]
        except KeyError:
            raise UnknownPointError(f"point id {pid} not in map") from None
        pixel = project_point(point.position, frame.camera_matrix)
        if pixel is None:
            report.rejected_projection += 1
            continue
        observation = sample_scores(raster, pixel)
        if observation is None:
            report.rejected_bounds += 1
            continue
        point.belief = bayes_update(point.belief, observation)
        point.observation_count += 1
        report.updated += 1
    return report


def save_raster(raster: ScoreRaster, path) -> None:
    """Write a raster in the SSCM binary format (float32 payload)."""
    h, w = raster.height, raster.width
    payload = np.ascontiguousarray(raster.scores, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(RASTER_MAGIC)
        fh.write(struct.pack("<III", h, w, N_LABELS))
        fh.write(payload.tobytes())


def load_raster(path) -> ScoreRaster:
    """Read an SSCM raster file, validating magic, label count, and size."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 16:
        raise ParseError("file too short for an SSCM header", path=path)
    if blob[:4] != RASTER_MAGIC:
        raise ParseError(f"bad magic {blob[:4]!r}, expected {RASTER_MAGIC!r}", path=path)
    h, w, labels = struct.unpack_from("<III", blob, 4)
    if labels != N_LABELS:
        raise ParseError(f"raster declares {labels} labels, expected {N_LABELS}", path=path)
    expected = 16 + h * w * labels * 4
    if len(blob) != expected:
        raise ParseError(
            f"payload size mismatch: file has {len(blob)} bytes, header implies {expected}",
            path=path,
        )
    data = np.frombuffer(blob, dtype="<f4", offset=16).reshape(h, w, labels)
    return ScoreRaster(scores=data.astype(float))
