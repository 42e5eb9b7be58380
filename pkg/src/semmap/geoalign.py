"""WGS84-to-map alignment: ENU conversion, anchor sampling, SVD registration.

GPS fixes are converted to a local east-north-up tangent frame on a sphere of
radius 6,371,000 m, anchored at the first sampled fix. Anchor pairs (ENU
position, SLAM map position) taken every `stride` frames feed a scaled rigid
registration: cross-covariance, SVD with a reflection guard, scale from the
mean of per-pair deviation-norm ratios.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateGeometryError,
    InsufficientAnchorsError,
    ValidationError,
    ZeroScaleError,
)
from .model import KeyframeRecord

EARTH_RADIUS_M = 6_371_000.0

# Second singular value of the cross-covariance must exceed this, otherwise
# the anchors are (near) collinear and the rotation is not identifiable.
RANK_TOL = 1e-9

# Map-side deviations below this are skipped when averaging scale ratios.
SCALE_DENOM_TOL = 1e-9

ORTHONORMAL_TOL = 1e-9


@dataclass
class GeoFix:
    """One GPS fix in WGS84 degrees, altitude in meters (0 when absent)."""

    frame_id: int
    lat: float
    lon: float
    alt: float = 0.0

    def __post_init__(self):
        self.frame_id = int(self.frame_id)
        self.lat, self.lon, self.alt = float(self.lat), float(self.lon), float(self.alt)
        if not -90.0 <= self.lat <= 90.0:
            raise ValidationError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise ValidationError(f"longitude {self.lon} outside [-180, 180]")


@dataclass
class LocalTangentOrigin:
    """Geodetic anchor of the local east-north-up frame."""

    lat: float
    lon: float
    alt: float = 0.0

    def __post_init__(self):
        self.lat, self.lon, self.alt = float(self.lat), float(self.lon), float(self.alt)
        if not -90.0 <= self.lat <= 90.0:
            raise ValidationError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise ValidationError(f"longitude {self.lon} outside [-180, 180]")


@dataclass
class SimilarityTransform:
    """Orthonormal rotation, positive uniform scale, translation.

    Maps local-Cartesian points into the map frame as
    scale * rotation @ p + translation.
    """

    rotation: np.ndarray
    scale: float
    translation: np.ndarray

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=float)
        self.translation = np.asarray(self.translation, dtype=float)
        self.scale = float(self.scale)
        if self.rotation.shape != (3, 3):
            raise ValidationError(f"rotation must be 3x3, got {self.rotation.shape}")
        if self.translation.shape != (3,):
            raise ValidationError(f"translation must be a 3-vector, got {self.translation.shape}")
        if not np.allclose(self.rotation.T @ self.rotation, np.eye(3), atol=ORTHONORMAL_TOL):
            raise ValidationError("rotation is not orthonormal")
        if abs(np.linalg.det(self.rotation) - 1.0) > ORTHONORMAL_TOL:
            raise ValidationError("rotation determinant must be +1")
        if not self.scale > 0.0:
            raise ValidationError(f"scale must be positive, got {self.scale}")

    def inverse(self) -> "SimilarityTransform":
        """The transform mapping map-frame points back to local Cartesian."""
        inv_rot = self.rotation.T
        inv_scale = 1.0 / self.scale
        inv_t = -inv_scale * (inv_rot @ self.translation)
        return SimilarityTransform(rotation=inv_rot, scale=inv_scale, translation=inv_t)


def identity_transform() -> SimilarityTransform:
    return SimilarityTransform(rotation=np.eye(3), scale=1.0, translation=np.zeros(3))


@dataclass
class AnchorSet:
    """Paired local-Cartesian and map-frame positions, plus the ENU origin used."""

    cart_points: np.ndarray
    map_points: np.ndarray
    origin: LocalTangentOrigin | None = None

    def __post_init__(self):
        self.cart_points = np.atleast_2d(np.asarray(self.cart_points, dtype=float))
        self.map_points = np.atleast_2d(np.asarray(self.map_points, dtype=float))
        if self.cart_points.shape != self.map_points.shape or self.cart_points.shape[1] != 3:
            raise ValidationError(
                f"anchor arrays must both be (N, 3), got {self.cart_points.shape} "
                f"and {self.map_points.shape}"
            )
        if len(self.cart_points) < 3:
            raise InsufficientAnchorsError(
                f"need at least 3 anchor pairs, got {len(self.cart_points)}"
            )

    def __len__(self) -> int:
        return len(self.cart_points)


def wgs84_to_local(fix: GeoFix, origin: LocalTangentOrigin) -> np.ndarray:
    """Spherical ENU: east/north from angular offsets scaled by Earth radius."""
    east = EARTH_RADIUS_M * math.radians(fix.lon - origin.lon) * math.cos(math.radians(origin.lat))
    north = EARTH_RADIUS_M * math.radians(fix.lat - origin.lat)
    up = fix.alt - origin.alt
    return np.array([east, north, up])


def local_to_wgs84(enu, origin: LocalTangentOrigin, frame_id: int = -1) -> GeoFix:
    """Inverse of wgs84_to_local; undefined at the poles."""
    east, north, up = np.asarray(enu, dtype=float)
    cos_lat = math.cos(math.radians(origin.lat))
    if abs(cos_lat) < 1e-12:
        raise ValidationError("local tangent frame is degenerate at the poles")
    lat = origin.lat + math.degrees(north / EARTH_RADIUS_M)
    lon = origin.lon + math.degrees(east / (EARTH_RADIUS_M * cos_lat))
    return GeoFix(frame_id=frame_id, lat=lat, lon=lon, alt=origin.alt + up)


def sample_anchors(keyframes: list[KeyframeRecord], fixes: list[GeoFix],
                   stride: int = 30) -> AnchorSet:
    """Pair every stride-th frame's fix (as ENU) with its keyframe position.

    Selected frame ids are the multiples of `stride` present in both inputs;
    the ENU origin is the fix at the first selected frame.
    """
    if stride < 1:
        raise ValidationError(f"stride must be >= 1, got {stride}")
    frames = {k.frame_id: k for k in keyframes}
    fix_index: dict[int, GeoFix] = {}
    for fix in fixes:
        if fix.frame_id in fix_index:
            raise ValidationError(f"duplicate GPS fix for frame {fix.frame_id}")
        fix_index[fix.frame_id] = fix
    selected = sorted(fid for fid in frames if fid % stride == 0 and fid in fix_index)
    if len(selected) < 3:
        raise InsufficientAnchorsError(
            f"only {len(selected)} frames carry both a pose and a fix at stride {stride}"
        )
    first = fix_index[selected[0]]
    origin = LocalTangentOrigin(lat=first.lat, lon=first.lon, alt=first.alt)
    cart = [wgs84_to_local(fix_index[fid], origin) for fid in selected]
    mappt = [frames[fid].position for fid in selected]
    return AnchorSet(cart_points=np.array(cart), map_points=np.array(mappt), origin=origin)


def estimate_similarity(anchors: AnchorSet) -> tuple[SimilarityTransform, float]:
    """Least-squares scaled rigid registration of cart_points onto map_points.

    Rotation from the SVD of the centered cross-covariance with a determinant
    guard so noisy or mirrored configurations never yield a reflection. Scale
    is the inverse of the mean per-pair ratio |cart deviation| / |map
    deviation|, skipping pairs whose map-side deviation is ~0. Returns the
    transform and the residual RMSE over the anchors.
    """
    cart = anchors.cart_points
    mappt = anchors.map_points
    centroid_cart = cart.mean(axis=0)
    centroid_map = mappt.mean(axis=0)
    cart_c = cart - centroid_cart
    map_c = mappt - centroid_map

    cross = cart_c.T @ map_c
    u, singular, vt = np.linalg.svd(cross)
    if singular[1] <= RANK_TOL:
        raise DegenerateGeometryError(
            f"anchors span fewer than 2 dimensions (second singular value {singular[1]:.3e})"
        )
    v = vt.T
    det_sign = 1.0 if np.linalg.det(v @ u.T) > 0.0 else -1.0
    rotation = v @ np.diag([1.0, 1.0, det_sign]) @ u.T

    cart_norms = np.linalg.norm(cart_c, axis=1)
    map_norms = np.linalg.norm(map_c, axis=1)
    usable = map_norms >= SCALE_DENOM_TOL
    if not usable.any():
        raise ZeroScaleError("every map-side anchor deviation is below tolerance")
    ratio = (cart_norms[usable] / map_norms[usable]).mean()
    if not ratio > 0.0:
        raise ZeroScaleError("cart-side anchor deviations vanish; scale undefined")
    scale = 1.0 / ratio
    translation = centroid_map - scale * (rotation @ centroid_cart)

    transform = SimilarityTransform(rotation=rotation, scale=scale, translation=translation)
    residual = apply_transform(transform, cart) - mappt
    rmse = float(np.sqrt((residual ** 2).sum(axis=1).mean()))
    return transform, rmse


def apply_transform(transform: SimilarityTransform, point) -> np.ndarray:
    """scale * rotation @ p + translation, for a 3-vector or an (N, 3) array."""
    p = np.asarray(point, dtype=float)
    return transform.scale * (p @ transform.rotation.T) + transform.translation
