"""Core domain types and the probabilistic primitives built on them.

A label distribution is a plain float64 array of length 19 (one probability
per Cityscapes class) that sums to 1. All operations here are pure functions
over value-semantic inputs and are safe to call concurrently; updates to a
single map point must be serialized in frame order by the caller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDistributionError, ValidationError
from .labels import LABEL_NAMES, N_LABELS

# Observation entries below this are lifted before the Bayesian product so a
# single zero score cannot permanently kill a label.
OBSERVATION_FLOOR = 1e-6

# Normalizer underflow threshold for the Bayesian update.
UNDERFLOW_LIMIT = 1e-300

BELIEF_TOL = 1e-9


def uniform_belief() -> np.ndarray:
    """Uniform distribution over the 19 labels."""
    return np.full(N_LABELS, 1.0 / N_LABELS)


def one_hot_belief(index: int) -> np.ndarray:
    """Distribution with all mass on one label."""
    if not 0 <= index < N_LABELS:
        raise ValidationError(f"label index {index} outside [0, {N_LABELS})")
    belief = np.zeros(N_LABELS)
    belief[index] = 1.0
    return belief


def normalized_belief(values) -> np.ndarray:
    """Normalize a non-negative score vector into a valid belief.

    Raises ValidationError for wrong shape, negative or non-finite entries,
    or an all-zero vector.
    """
    scores = _checked_scores(values)
    total = scores.sum()
    if total <= 0.0:
        raise ValidationError("cannot normalize an all-zero score vector")
    return scores / total


def validate_belief(belief) -> np.ndarray:
    """Assert the full label-distribution invariant (non-negative, sums to 1)."""
    probs = _checked_scores(belief)
    if abs(probs.sum() - 1.0) > BELIEF_TOL:
        raise ValidationError(f"belief sums to {probs.sum()!r}, expected 1 within {BELIEF_TOL}")
    return probs


def _checked_scores(values) -> np.ndarray:
    scores = np.asarray(values, dtype=float)
    if scores.shape != (N_LABELS,):
        raise ValidationError(f"expected shape ({N_LABELS},), got {scores.shape}")
    if not np.all(np.isfinite(scores)):
        raise ValidationError("scores must be finite")
    if np.any(scores < 0.0):
        raise ValidationError("scores must be non-negative")
    return scores


def bayes_update(prior, observation) -> np.ndarray:
    """Fold one observation into a belief: posterior ∝ prior * observation.

    Observation entries are floored at OBSERVATION_FLOOR and renormalized
    before the product, then the product is renormalized. Commutative and
    associative up to floating-point error, so observation order does not
    matter.
    """
    p = _checked_scores(prior)
    obs = np.maximum(_checked_scores(observation), OBSERVATION_FLOOR)
    obs /= obs.sum()
    posterior = p * obs
    z = posterior.sum()
    if z < UNDERFLOW_LIMIT:
        raise DegenerateDistributionError(f"posterior normalizer underflowed (Z={z!r})")
    return posterior / z


def map_label(belief) -> int:
    """Maximum-probability label index; ties go to the lowest index."""
    return int(np.argmax(_checked_scores(belief)))


def wrap_angle(angle: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = math.remainder(angle, math.tau)
    return math.pi if wrapped == -math.pi else wrapped


@dataclass
class SemanticMapPoint:
    """A sparse 3D map point carrying a semantic belief.

    observation_count equals the number of fusion updates applied so far.
    """

    id: int
    position: np.ndarray
    belief: np.ndarray = field(default_factory=uniform_belief)
    observation_count: int = 0

    def __post_init__(self):
        self.id = int(self.id)
        self.position = np.asarray(self.position, dtype=float)
        if self.position.shape != (3,):
            raise ValidationError(f"point position must be a 3-vector, got {self.position.shape}")
        self.belief = validate_belief(self.belief)
        self.observation_count = int(self.observation_count)
        if self.observation_count < 0:
            raise ValidationError("observation_count must be non-negative")

    @property
    def label(self) -> int:
        return map_label(self.belief)


@dataclass
class KeyframeRecord:
    """A camera keyframe: composite 3x4 projection, position, and heading.

    camera_matrix maps homogeneous map-frame points to pixel-homogeneous
    coordinates (intrinsics and extrinsics already composed). heading is
    wrapped to (-pi, pi] at construction.
    """

    frame_id: int
    camera_matrix: np.ndarray
    position: np.ndarray
    heading: float

    def __post_init__(self):
        self.frame_id = int(self.frame_id)
        if self.frame_id < 0:
            raise ValidationError("frame_id must be non-negative")
        self.camera_matrix = np.asarray(self.camera_matrix, dtype=float)
        if self.camera_matrix.shape != (3, 4):
            raise ValidationError(f"camera matrix must be 3x4, got {self.camera_matrix.shape}")
        if not np.all(np.isfinite(self.camera_matrix)):
            raise ValidationError("camera matrix must be finite")
        if np.linalg.matrix_rank(self.camera_matrix) < 3:
            raise ValidationError("camera matrix must have rank 3")
        self.position = np.asarray(self.position, dtype=float)
        if self.position.shape != (3,):
            raise ValidationError(f"keyframe position must be a 3-vector, got {self.position.shape}")
        self.heading = wrap_angle(float(self.heading))


@dataclass
class SemanticMap:
    """Map points keyed by id plus the keyframe trajectory."""

    points: dict[int, SemanticMapPoint]
    keyframes: list[KeyframeRecord]
    label_names: tuple[str, ...] = LABEL_NAMES

    def __post_init__(self):
        if len(self.label_names) != N_LABELS:
            raise ValidationError(f"expected {N_LABELS} label names, got {len(self.label_names)}")
        for pid, point in self.points.items():
            if pid != point.id:
                raise ValidationError(f"point keyed {pid} carries id {point.id}")
        frame_ids = [k.frame_id for k in self.keyframes]
        if any(b <= a for a, b in zip(frame_ids, frame_ids[1:])):
            raise ValidationError("keyframes must be strictly ordered by frame_id")
