"""Named landmarks as fuzzy Gaussian fields over the map plane.

A landmark's location is treated as a fuzzy concept: membership of a map
location is the value of a 2D Gaussian PDF centered on the landmark, so
"being at the clock tower" degrades smoothly with distance. Landmarks are
placed by pushing their geodetic position through the ENU conversion and the
estimated similarity transform, then associated with the closest keyframe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ValidationError
from .geoalign import GeoFix, LocalTangentOrigin, SimilarityTransform, apply_transform, wgs84_to_local
from .model import KeyframeRecord

DEFAULT_SIGMA = 15.0


@dataclass
class Landmark:
    """A named place: geodetic position, map position once placed, spread sigma."""

    name: str
    geo: GeoFix
    sigma: float = DEFAULT_SIGMA
    map_position: np.ndarray | None = None

    def __post_init__(self):
        if not self.name:
            raise ValidationError("landmark name must be non-empty")
        self.sigma = float(self.sigma)
        if not self.sigma > 0.0:
            raise ValidationError(f"sigma must be positive, got {self.sigma}")
        if self.map_position is not None:
            self.map_position = np.asarray(self.map_position, dtype=float)
            if self.map_position.shape != (3,):
                raise ValidationError("map_position must be a 3-vector")


@dataclass
class LandmarkAssociation:
    """A landmark tied to its closest keyframe, with the xy distance."""

    name: str
    frame_id: int
    distance: float

    def __post_init__(self):
        if self.distance < 0.0:
            raise ValidationError("association distance must be non-negative")


def place_landmarks(landmarks: list[Landmark], transform: SimilarityTransform,
                    origin: LocalTangentOrigin) -> list[Landmark]:
    """Fill map_position for each landmark; input order preserved."""
    placed = []
    for lm in landmarks:
        map_pos = apply_transform(transform, wgs84_to_local(lm.geo, origin))
        placed.append(replace(lm, map_position=map_pos))
    return placed


def membership(landmark: Landmark, x: float, y: float) -> float:
    """2D Gaussian PDF value of (x, y) under the landmark's field.

    Peak value is 1/(2*pi*sigma^2) at the landmark center; only the first two
    map_position components participate.
    """
    if landmark.map_position is None:
        raise ValidationError(f"landmark {landmark.name!r} has not been placed")
    dx = x - landmark.map_position[0]
    dy = y - landmark.map_position[1]
    var = landmark.sigma ** 2
    return math.exp(-(dx * dx + dy * dy) / (2.0 * var)) / (2.0 * math.pi * var)


def associate_landmarks(landmarks: list[Landmark],
                        keyframes: list[KeyframeRecord]) -> list[LandmarkAssociation]:
    """Closest keyframe per landmark by xy-plane distance; ties -> lowest frame_id."""
    if not keyframes:
        raise ValidationError("cannot associate landmarks with an empty trajectory")
    positions = np.array([k.position[:2] for k in keyframes])
    frame_ids = [k.frame_id for k in keyframes]
    associations = []
    for lm in landmarks:
        if lm.map_position is None:
            raise ValidationError(f"landmark {lm.name!r} has not been placed")
        dists = np.linalg.norm(positions - lm.map_position[:2], axis=1)
        best = min(range(len(keyframes)), key=lambda i: (dists[i], frame_ids[i]))
        associations.append(
            LandmarkAssociation(name=lm.name, frame_id=frame_ids[best], distance=float(dists[best]))
        )
    return associations


def rank_landmarks(landmarks: list[Landmark], query: tuple[float, float],
                   k: int = 1) -> list[tuple[str, float]]:
    """Top-k landmarks by membership at the query point, descending.

    Membership ties break lexicographically by name; k larger than the list
    returns the full ranking.
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    x, y = query
    scored = [(lm.name, membership(lm, x, y)) for lm in landmarks]
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored[:k]
