"""Seeded synthetic worlds and brute-force oracles for tests and benchmarks.

A world is a camera trajectory on a unit-step grid (straight, L, loop, or
figure-eight), sparse map points with known labels, per-frame score rasters
stamped with label-peaked noise at each visible point's pixel, GPS fixes
derived from the ground-truth similarity transform plus Gaussian noise, and a
small landmark gazetteer. Generation is deterministic per seed: the same spec
produces a byte-identical file bundle (generator algorithm version 1; any
change to the draw order or noise model must bump GENERATOR_VERSION).

Noise model for stamped observations: s = (1-w) * Dirichlet(1_19) + w *
one_hot(true). For a flat Dirichlet the expected gap between the best of the
18 competitor coordinates and the true coordinate is (H_18 - 1)/19, so
choosing w = (margin + gap)/(1 + gap) makes the expected score margin of the
true label over the runner-up exactly `margin`, with w(1) = 1 giving one-hot
rasters.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateDistributionError, ValidationError
from .fusion import ScoreRaster, nearest_pixel, project_point, save_raster
from .geoalign import (
    AnchorSet,
    GeoFix,
    LocalTangentOrigin,
    SimilarityTransform,
    apply_transform,
    local_to_wgs84,
)
from .io import (
    SlamExport,
    save_gps_csv,
    save_landmarks_csv,
    save_slam_export,
    transform_from_dict,
    transform_to_dict,
)
from .labels import N_LABELS
from .landmarks import Landmark
from .model import KeyframeRecord, OBSERVATION_FLOOR, UNDERFLOW_LIMIT

GENERATOR_VERSION = 1

RASTER_SIZE = 32
FOCAL_PX = 8.0
MIN_DEPTH = 0.5
MAX_DEPTH = 60.0

_SHAPE_SEGMENTS: dict[str, tuple[tuple[int, int], ...]] = {
    "straight": ((1, 0),),
    "L": ((1, 0), (0, 1)),
    "loop": ((1, 0), (0, 1), (-1, 0), (0, -1)),
    "figure-eight": (
        (1, 0), (0, 1), (-1, 0), (0, -1), (-1, 0), (0, -1), (1, 0), (0, 1), (1, 0),
    ),
}

_LANDMARK_NAMES = (
    "Clock Tower",
    "Market Hall",
    "Old Granary",
    "River Gate",
    "Glass Pavilion",
    "Corner Bakery",
    "Stone Bridge",
    "Tram Depot",
)


def rotation_about_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


# The gazetteer CSV carries no altitude, so synthetic worlds stay altitude
# consistent: zero origin altitude and no vertical translation.
def _default_transform() -> SimilarityTransform:
    return SimilarityTransform(
        rotation=rotation_about_z(0.35),
        scale=2.0,
        translation=np.array([140.0, -60.0, 0.0]),
    )


def _default_origin() -> LocalTangentOrigin:
    return LocalTangentOrigin(lat=49.0, lon=8.4, alt=0.0)


@dataclass
class WorldSpec:
    """Parameters of one synthetic world; everything derives from the seed."""

    seed: int = 0
    n_points: int = 40
    n_frames: int = 120
    shape: str = "straight"
    margin: float = 0.3
    gps_noise: float = 2.0
    transform: SimilarityTransform = field(default_factory=_default_transform)
    origin: LocalTangentOrigin = field(default_factory=_default_origin)
    n_landmarks: int = 4
    # "along" scatters points beside the trajectory; "ahead" puts them past
    # the final frame so straight worlds observe every point in every frame.
    point_placement: str = "along"

    def __post_init__(self):
        if self.n_points < 1 or self.n_frames < 1:
            raise ValidationError("n_points and n_frames must be >= 1")
        if self.shape not in _SHAPE_SEGMENTS:
            raise ValidationError(
                f"shape must be one of {sorted(_SHAPE_SEGMENTS)}, got {self.shape!r}"
            )
        if not 0.0 < self.margin <= 1.0:
            raise ValidationError(f"margin must be in (0, 1], got {self.margin}")
        if self.gps_noise < 0.0:
            raise ValidationError("gps_noise must be non-negative")
        segments = _SHAPE_SEGMENTS[self.shape]
        if self.n_frames - 1 < len(segments):
            raise ValidationError(
                f"shape {self.shape!r} needs at least {len(segments) + 1} frames"
            )
        if self.point_placement not in ("along", "ahead"):
            raise ValidationError(f"unknown point_placement {self.point_placement!r}")


@dataclass
class GroundTruth:
    true_labels: dict[int, int]
    landmark_positions: dict[str, np.ndarray]
    turn_frames: tuple[int, ...]
    junction_count: int
    transform: SimilarityTransform
    origin: LocalTangentOrigin


@dataclass
class World:
    """In-memory world: exactly what generate_world writes to disk."""

    spec: WorldSpec
    export: SlamExport
    rasters: dict[int, ScoreRaster]
    fixes: list[GeoFix]
    landmarks: list[Landmark]
    truth: GroundTruth


@dataclass
class WorldPaths:
    root: Path
    slam: Path
    rasters_dir: Path
    gps: Path
    landmarks: Path
    ground_truth: Path


# E[max of the other 18 coords] - E[true coord] for Dirichlet(1,...,1) on 19.
_HARMONIC_18 = float(sum(1.0 / i for i in range(1, 19)))
_RUNNER_UP_GAP = (_HARMONIC_18 - 1.0) / N_LABELS


def margin_mix_weight(margin: float) -> float:
    """Mixture weight giving an expected true-vs-runner-up margin of `margin`."""
    if not 0.0 < margin <= 1.0:
        raise ValidationError(f"margin must be in (0, 1], got {margin}")
    return (margin + _RUNNER_UP_GAP) / (1.0 + _RUNNER_UP_GAP)


def noisy_observation(rng: np.random.Generator, true_label: int, margin: float) -> np.ndarray:
    """One stamped score vector: Dirichlet noise mixed toward the true label."""
    w = margin_mix_weight(margin)
    scores = (1.0 - w) * rng.dirichlet(np.ones(N_LABELS))
    scores[true_label] += w
    return scores


def _trajectory(spec: WorldSpec):
    """Grid trajectory: positions, headings, turn frames, junction count."""
    segments = _SHAPE_SEGMENTS[spec.shape]
    n_steps = spec.n_frames - 1
    base = n_steps // len(segments)
    counts = [base] * len(segments)
    counts[-1] += n_steps - base * len(segments)

    positions = [np.zeros(3)]
    headings = []
    turn_frames = []
    for seg_index, ((dx, dy), count) in enumerate(zip(segments, counts)):
        heading = math.atan2(dy, dx)
        for _ in range(count):
            positions.append(positions[-1] + np.array([dx, dy, 0.0]))
            headings.append(heading)
        if seg_index < len(segments) - 1:
            turn_frames.append(len(positions) - 1)
    headings.append(headings[-1])

    corners = {(round(positions[f][0], 6), round(positions[f][1], 6)) for f in turn_frames}
    return np.array(positions), np.array(headings), tuple(turn_frames), len(corners)


def _camera_matrix(position: np.ndarray, heading: float) -> np.ndarray:
    c, s = math.cos(heading), math.sin(heading)
    # Camera axes in the map frame: x right, y down, z forward along heading.
    rot = np.array([
        [s, -c, 0.0],
        [0.0, 0.0, -1.0],
        [c, s, 0.0],
    ])
    center = (RASTER_SIZE - 1) / 2.0
    intrinsics = np.array([
        [FOCAL_PX, 0.0, center],
        [0.0, FOCAL_PX, center],
        [0.0, 0.0, 1.0],
    ])
    extrinsics = np.hstack([rot, (-rot @ position)[:, None]])
    return intrinsics @ extrinsics


def _heading_frame(heading: float):
    forward = np.array([math.cos(heading), math.sin(heading), 0.0])
    left = np.array([-math.sin(heading), math.cos(heading), 0.0])
    return forward, left


def build_world(spec: WorldSpec) -> World:
    """Deterministically synthesize a world in memory."""
    rng = np.random.default_rng(spec.seed)
    positions, headings, turn_frames, junctions = _trajectory(spec)

    keyframes = [
        KeyframeRecord(
            frame_id=f,
            camera_matrix=_camera_matrix(positions[f], headings[f]),
            position=positions[f],
            heading=headings[f],
        )
        for f in range(spec.n_frames)
    ]

    point_positions: dict[int, np.ndarray] = {}
    true_labels: dict[int, int] = {}
    up = np.array([0.0, 0.0, 1.0])
    for pid in range(spec.n_points):
        if spec.point_placement == "ahead":
            anchor = spec.n_frames - 1
            forward_dist = rng.uniform(8.0, 18.0)
        else:
            anchor = int(rng.integers(0, max(1, spec.n_frames - 15)))
            forward_dist = rng.uniform(6.0, 14.0)
        lateral = rng.uniform(-4.0, 4.0)
        height = rng.uniform(-2.0, 2.0)
        forward, left = _heading_frame(headings[anchor])
        point_positions[pid] = (
            positions[anchor] + forward_dist * forward + lateral * left + height * up
        )
        true_labels[pid] = int(rng.integers(0, N_LABELS))

    visibility: dict[int, list[int]] = {}
    rasters: dict[int, ScoreRaster] = {}
    for f, kf in enumerate(keyframes):
        forward, _ = _heading_frame(kf.heading)
        scores = np.full((RASTER_SIZE, RASTER_SIZE, N_LABELS), 1.0 / N_LABELS)
        # Z-buffer: when two points land on one pixel, only the nearest is
        # visible and stamped, so every listed point samples its own stamp.
        winners: dict[tuple[int, int], tuple[float, int]] = {}
        for pid in range(spec.n_points):
            rel = point_positions[pid] - kf.position
            depth = float(forward @ rel)
            if not MIN_DEPTH < depth < MAX_DEPTH:
                continue
            pixel = project_point(point_positions[pid], kf.camera_matrix)
            if pixel is None:
                continue
            col, row = nearest_pixel(pixel)
            if not (0 <= col < RASTER_SIZE and 0 <= row < RASTER_SIZE):
                continue
            held = winners.get((col, row))
            if held is None or depth < held[0]:
                winners[(col, row)] = (depth, pid)
        seen = sorted(pid for _, pid in winners.values())
        for pid in seen:
            pixel = project_point(point_positions[pid], kf.camera_matrix)
            col, row = nearest_pixel(pixel)
            scores[row, col] = noisy_observation(rng, true_labels[pid], spec.margin)
        visibility[f] = seen
        # Rounded through float32 so the in-memory world equals its SSCM file.
        rasters[f] = ScoreRaster(scores=scores.astype("<f4").astype(float))

    inverse = spec.transform.inverse()
    fixes = []
    for f in range(spec.n_frames):
        cart = apply_transform(inverse, positions[f]) + rng.normal(0.0, spec.gps_noise, 3)
        fixes.append(local_to_wgs84(cart, spec.origin, frame_id=f))

    landmarks = []
    landmark_truth: dict[str, np.ndarray] = {}
    anchor_frames = np.linspace(0.2, 0.8, spec.n_landmarks) * (spec.n_frames - 1)
    for i in range(spec.n_landmarks):
        name = _LANDMARK_NAMES[i % len(_LANDMARK_NAMES)]
        if i >= len(_LANDMARK_NAMES):
            name = f"{name} {i // len(_LANDMARK_NAMES) + 1}"
        frame = int(round(anchor_frames[i]))
        side = 1.0 if rng.random() < 0.5 else -1.0
        offset = rng.uniform(8.0, 18.0)
        _, left = _heading_frame(headings[frame])
        map_pos = positions[frame] + side * offset * left
        geo = local_to_wgs84(apply_transform(inverse, map_pos), spec.origin)
        landmarks.append(Landmark(name=name, geo=geo))
        landmark_truth[name] = map_pos

    export = SlamExport(keyframes=keyframes, points=point_positions, visibility=visibility)
    truth = GroundTruth(
        true_labels=true_labels,
        landmark_positions=landmark_truth,
        turn_frames=turn_frames,
        junction_count=junctions,
        transform=spec.transform,
        origin=spec.origin,
    )
    return World(spec=spec, export=export, rasters=rasters, fixes=fixes,
                 landmarks=landmarks, truth=truth)


def generate_world(spec: WorldSpec, out_dir) -> tuple[WorldPaths, GroundTruth]:
    """Build a world and write the full input bundle plus ground_truth.json."""
    world = build_world(spec)
    root = Path(out_dir)
    rasters_dir = root / "rasters"
    rasters_dir.mkdir(parents=True, exist_ok=True)
    paths = WorldPaths(
        root=root,
        slam=root / "slam.txt",
        rasters_dir=rasters_dir,
        gps=root / "gps.csv",
        landmarks=root / "landmarks.csv",
        ground_truth=root / "ground_truth.json",
    )
    save_slam_export(world.export, paths.slam)
    for fid, raster in world.rasters.items():
        save_raster(raster, rasters_dir / f"frame_{fid:06d}.sscm")
    save_gps_csv(world.fixes, paths.gps)
    save_landmarks_csv(world.landmarks, paths.landmarks)
    save_ground_truth(world.truth, paths.ground_truth)
    return paths, world.truth


def save_ground_truth(truth: GroundTruth, path) -> None:
    data = {
        "generator_version": GENERATOR_VERSION,
        "true_labels": {str(pid): label for pid, label in truth.true_labels.items()},
        "landmarks": {
            name: [float(v) for v in pos] for name, pos in truth.landmark_positions.items()
        },
        "turn_frames": list(truth.turn_frames),
        "junction_count": truth.junction_count,
        "transform": transform_to_dict(truth.transform),
        "origin": {
            "lat": truth.origin.lat,
            "lon": truth.origin.lon,
            "alt": truth.origin.alt,
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_ground_truth(path) -> GroundTruth:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return GroundTruth(
        true_labels={int(pid): int(label) for pid, label in data["true_labels"].items()},
        landmark_positions={
            name: np.asarray(pos, dtype=float) for name, pos in data["landmarks"].items()
        },
        turn_frames=tuple(int(f) for f in data["turn_frames"]),
        junction_count=int(data["junction_count"]),
        transform=transform_from_dict(data["transform"]),
        origin=LocalTangentOrigin(**data["origin"]),
    )


def oracle_fuse(observations, prior) -> np.ndarray:
    """Closed-form fusion: normalized product of prior and clamped observations.

    Single normalization at the end, accumulated in extended precision, so it
    is independent of the sequential update path it checks.
    """
    if len(observations) == 0:
        raise ValidationError("oracle_fuse needs at least one observation")
    acc = np.asarray(prior, dtype=np.longdouble).copy()
    if acc.shape != (N_LABELS,):
        raise ValidationError(f"prior must have shape ({N_LABELS},)")
    for obs in observations:
        clamped = np.maximum(np.asarray(obs, dtype=np.longdouble), OBSERVATION_FLOOR)
        acc *= clamped / clamped.sum()
    z = acc.sum()
    if z < UNDERFLOW_LIMIT:
        raise DegenerateDistributionError(f"oracle product underflowed (Z={float(z)!r})")
    return np.asarray(acc / z, dtype=float)


def oracle_similarity_error(estimated: SimilarityTransform, truth: SimilarityTransform,
                            probe_points) -> float:
    """RMSE between the two transforms' images of the probe points."""
    probes = np.atleast_2d(np.asarray(probe_points, dtype=float))
    if probes.size == 0:
        raise ValidationError("need at least one probe point")
    diff = apply_transform(estimated, probes) - apply_transform(truth, probes)
    return float(np.sqrt((diff ** 2).sum(axis=1).mean()))


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform-ish proper rotation from a QR factorization with sign fixes."""
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q @ np.diag(np.sign(np.diag(r)))
    if np.linalg.det(q) < 0.0:
        q[:, 2] = -q[:, 2]
    return q


def random_similarity(rng: np.random.Generator,
                      scale_range: tuple[float, float] = (0.1, 10.0),
                      translation_extent: float = 100.0) -> SimilarityTransform:
    """Random ground-truth transform, scale log-uniform over scale_range."""
    lo, hi = scale_range
    scale = float(np.exp(rng.uniform(math.log(lo), math.log(hi))))
    return SimilarityTransform(
        rotation=random_rotation(rng),
        scale=scale,
        translation=rng.uniform(-translation_extent, translation_extent, 3),
    )


def synthetic_anchor_set(rng: np.random.Generator, transform: SimilarityTransform,
                         n: int, noise: float = 0.0,
                         extent: float = 100.0) -> AnchorSet:
    """Anchor pairs from a ground-truth transform, optional map-side noise."""
    cart = rng.uniform(-extent, extent, (n, 3))
    mapped = apply_transform(transform, cart)
    if noise > 0.0:
        mapped = mapped + rng.normal(0.0, noise, mapped.shape)
    return AnchorSet(cart_points=cart, map_points=mapped)
