"""File formats: SLAM export text, GPS/landmark CSV, map JSON, PLY, DOT.

SLAM export text format (UTF-8, '#' comments and blank lines ignored):

    SLAMEXPORT 1
    K <frame_id> <m00 .. m23> <x> <y> <z> <heading>
    P <point_id> <x> <y> <z>
    V <frame_id> [point_id ...]

K lines carry the composite 3x4 projection matrix row-major (12 values),
then the keyframe position and heading; frame ids must be strictly
increasing. P lines declare map points with unique ids. V lines list the
point ids observed in a frame, at most one line per frame.

GPS fixes CSV: header `frame_id,lat,lon,alt`, decimal degrees and meters,
empty alt permitted. Landmark gazetteer CSV: header `name,lat,lon` or
`name,lat,lon,sigma`; names may be quoted and contain commas.

The map document is JSON with explicit format_version 1.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError
from .geoalign import GeoFix, SimilarityTransform
from .labels import LABEL_NAMES, N_LABELS, PALETTE
from .landmarks import DEFAULT_SIGMA, Landmark
from .model import KeyframeRecord, SemanticMap, SemanticMapPoint, map_label, validate_belief
from .topo import TopoGraph, graph_from_dict, graph_to_dict, to_dot

SLAM_HEADER = "SLAMEXPORT 1"
MAP_FORMAT_VERSION = 1


@dataclass
class SlamExport:
    """Parsed SLAM output: trajectory, sparse points, per-frame visibility."""

    keyframes: list[KeyframeRecord]
    points: dict[int, np.ndarray]
    visibility: dict[int, list[int]] = field(default_factory=dict)

    def __post_init__(self):
        frame_ids = [k.frame_id for k in self.keyframes]
        if any(b <= a for a, b in zip(frame_ids, frame_ids[1:])):
            raise ValidationError("keyframe frame_ids must be strictly increasing")
        known_frames = set(frame_ids)
        for fid, pids in self.visibility.items():
            if fid not in known_frames:
                raise ValidationError(f"visibility references unknown frame {fid}")
            for pid in pids:
                if pid not in self.points:
                    raise ValidationError(f"visibility for frame {fid} references unknown point {pid}")

    def to_semantic_map(self) -> SemanticMap:
        """Fresh semantic map with uniform beliefs on every point."""
        points = {
            pid: SemanticMapPoint(id=pid, position=pos) for pid, pos in self.points.items()
        }
        return SemanticMap(points=points, keyframes=list(self.keyframes))


def load_slam_export(path) -> SlamExport:
    path = Path(path)
    keyframes: list[KeyframeRecord] = []
    points: dict[int, np.ndarray] = {}
    visibility: dict[int, list[int]] = {}
    header_seen = False

    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if not header_seen:
                if line != SLAM_HEADER:
                    raise ParseError(
                        f"expected header {SLAM_HEADER!r}, got {line!r}", path=path, line=lineno
                    )
                header_seen = True
                continue
            tag, *fields = line.split()
            if tag == "K":
                if len(fields) != 17:
                    raise ParseError(
                        f"keyframe line needs 17 fields (id, 12 matrix values, position, heading), got {len(fields)}",
                        path=path, line=lineno,
                    )
                fid = _parse_int(fields[0], path, lineno)
                values = [_parse_float(v, path, lineno) for v in fields[1:]]
                if keyframes and fid <= keyframes[-1].frame_id:
                    raise ValidationError(
                        f"frame_id {fid} not strictly increasing", path=path, line=lineno
                    )
                try:
                    keyframes.append(KeyframeRecord(
                        frame_id=fid,
                        camera_matrix=np.array(values[:12]).reshape(3, 4),
                        position=np.array(values[12:15]),
                        heading=values[15],
                    ))
                except ValidationError as exc:
                    raise ValidationError(str(exc), path=path, line=lineno) from None
            elif tag == "P":
                if len(fields) != 4:
                    raise ParseError(
                        f"point line needs 4 fields (id, x, y, z), got {len(fields)}",
                        path=path, line=lineno,
                    )
                pid = _parse_int(fields[0], path, lineno)
                if pid in points:
                    raise ValidationError(f"duplicate point id {pid}", path=path, line=lineno)
                points[pid] = np.array([_parse_float(v, path, lineno) for v in fields[1:]])
            elif tag == "V":
                if len(fields) < 1:
                    raise ParseError("visibility line needs a frame id", path=path, line=lineno)
                fid = _parse_int(fields[0], path, lineno)
                if fid in visibility:
                    raise ValidationError(
                        f"duplicate visibility line for frame {fid}", path=path, line=lineno
                    )
                visibility[fid] = [_parse_int(v, path, lineno) for v in fields[1:]]
            else:
                raise ParseError(f"unknown record tag {tag!r}", path=path, line=lineno)

    if not header_seen:
        raise ParseError("empty file, missing header", path=path)
    try:
        return SlamExport(keyframes=keyframes, points=points, visibility=visibility)
    except ValidationError as exc:
        raise ValidationError(str(exc), path=path) from None


def save_slam_export(export: SlamExport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(SLAM_HEADER + "\n")
        for k in export.keyframes:
            matrix = " ".join(repr(float(v)) for v in k.camera_matrix.ravel())
            pos = " ".join(repr(float(v)) for v in k.position)
            fh.write(f"K {k.frame_id} {matrix} {pos} {k.heading!r}\n")
        for pid in sorted(export.points):
            pos = " ".join(repr(float(v)) for v in export.points[pid])
            fh.write(f"P {pid} {pos}\n")
        for fid in sorted(export.visibility):
            ids = " ".join(str(p) for p in export.visibility[fid])
            fh.write(f"V {fid} {ids}".rstrip() + "\n")


def _parse_int(token: str, path, lineno: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise ParseError(f"expected integer, got {token!r}", path=path, line=lineno) from None


def _parse_float(token: str, path, lineno: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise ParseError(f"expected number, got {token!r}", path=path, line=lineno) from None


def load_gps_csv(path) -> list[GeoFix]:
    path = Path(path)
    fixes: list[GeoFix] = []
    seen: set[int] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["frame_id", "lat", "lon", "alt"]:
            raise ParseError(
                f"expected header 'frame_id,lat,lon,alt', got {header}", path=path, line=1
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ParseError(f"expected 4 columns, got {len(row)}", path=path, line=lineno)
            fid = _parse_int(row[0], path, lineno)
            if fid in seen:
                raise ValidationError(f"duplicate fix for frame {fid}", path=path, line=lineno)
            seen.add(fid)
            alt = _parse_float(row[3], path, lineno) if row[3].strip() else 0.0
            try:
                fixes.append(GeoFix(
                    frame_id=fid,
                    lat=_parse_float(row[1], path, lineno),
                    lon=_parse_float(row[2], path, lineno),
                    alt=alt,
                ))
            except ValidationError as exc:
                raise ValidationError(str(exc), path=path, line=lineno) from None
    return fixes


def save_gps_csv(fixes: list[GeoFix], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame_id", "lat", "lon", "alt"])
        for fix in fixes:
            writer.writerow([fix.frame_id, repr(fix.lat), repr(fix.lon), repr(fix.alt)])


def load_landmarks_csv(path) -> list[Landmark]:
    path = Path(path)
    landmarks: list[Landmark] = []
    names: set[str] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        stripped = [h.strip() for h in header] if header else None
        if stripped not in (["name", "lat", "lon"], ["name", "lat", "lon", "sigma"]):
            raise ParseError(
                f"expected header 'name,lat,lon[,sigma]', got {header}", path=path, line=1
            )
        width = len(stripped)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise ParseError(f"expected {width} columns, got {len(row)}", path=path, line=lineno)
            name = row[0]
            if name in names:
                raise ValidationError(f"duplicate landmark name {name!r}", path=path, line=lineno)
            names.add(name)
            sigma = DEFAULT_SIGMA
            if width == 4 and row[3].strip():
                sigma = _parse_float(row[3], path, lineno)
            try:
                landmarks.append(Landmark(
                    name=name,
                    geo=GeoFix(
                        frame_id=-1,
                        lat=_parse_float(row[1], path, lineno),
                        lon=_parse_float(row[2], path, lineno),
                    ),
                    sigma=sigma,
                ))
            except ValidationError as exc:
                raise ValidationError(str(exc), path=path, line=lineno) from None
    return landmarks


def save_landmarks_csv(landmarks: list[Landmark], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["name", "lat", "lon", "sigma"])
        for lm in landmarks:
            writer.writerow([lm.name, repr(lm.geo.lat), repr(lm.geo.lon), repr(lm.sigma)])


@dataclass
class SemanticMapDocument:
    """Persistable result of the pipeline: points, landmarks, transform, graph."""

    points: list[SemanticMapPoint]
    landmarks: list[Landmark] = field(default_factory=list)
    transform: SimilarityTransform | None = None
    alignment_rmse: float | None = None
    topo: TopoGraph | None = None
    label_names: tuple[str, ...] = LABEL_NAMES
    format_version: int = MAP_FORMAT_VERSION


def transform_to_dict(transform: SimilarityTransform) -> dict:
    return {
        "rotation": [[float(v) for v in row] for row in transform.rotation],
        "scale": float(transform.scale),
        "translation": [float(v) for v in transform.translation],
    }


def transform_from_dict(data: dict) -> SimilarityTransform:
    try:
        return SimilarityTransform(
            rotation=np.array(data["rotation"], dtype=float),
            scale=float(data["scale"]),
            translation=np.array(data["translation"], dtype=float),
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed transform document: {exc}") from exc


def save_map(doc: SemanticMapDocument, path) -> None:
    data = {
        "format_version": doc.format_version,
        "label_names": list(doc.label_names),
        "points": [
            {
                "id": p.id,
                "position": [float(v) for v in p.position],
                "belief": [float(v) for v in p.belief],
                "label": map_label(p.belief),
                "observation_count": p.observation_count,
            }
            for p in doc.points
        ],
        "landmarks": [
            {
                "name": lm.name,
                "lat": float(lm.geo.lat),
                "lon": float(lm.geo.lon),
                "alt": float(lm.geo.alt),
                "sigma": float(lm.sigma),
                "map_position": (
                    None if lm.map_position is None else [float(v) for v in lm.map_position]
                ),
            }
            for lm in doc.landmarks
        ],
        "transform": None if doc.transform is None else transform_to_dict(doc.transform),
        "alignment_rmse": None if doc.alignment_rmse is None else float(doc.alignment_rmse),
        "topo": None if doc.topo is None else graph_to_dict(doc.topo),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_map(path) -> SemanticMapDocument:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}", path=path) from None
    version = data.get("format_version")
    if version != MAP_FORMAT_VERSION:
        raise ValidationError(f"unknown format_version {version!r}", path=path)
    label_names = tuple(data.get("label_names", ()))
    if len(label_names) != N_LABELS:
        raise ValidationError(f"expected {N_LABELS} label names", path=path)
    try:
        points = []
        for entry in data["points"]:
            belief = validate_belief(entry["belief"])
            if int(entry["label"]) != map_label(belief):
                raise ValidationError(
                    f"point {entry['id']}: stored label {entry['label']} does not match belief"
                )
            points.append(SemanticMapPoint(
                id=int(entry["id"]),
                position=entry["position"],
                belief=belief,
                observation_count=int(entry["observation_count"]),
            ))
        landmarks = [
            Landmark(
                name=entry["name"],
                geo=GeoFix(frame_id=-1, lat=entry["lat"], lon=entry["lon"], alt=entry["alt"]),
                sigma=entry["sigma"],
                map_position=entry["map_position"],
            )
            for entry in data["landmarks"]
        ]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed map document: {exc}", path=path) from exc
    transform = None if data.get("transform") is None else transform_from_dict(data["transform"])
    rmse = data.get("alignment_rmse")
    topo = None if data.get("topo") is None else graph_from_dict(data["topo"])
    return SemanticMapDocument(
        points=points,
        landmarks=landmarks,
        transform=transform,
        alignment_rmse=None if rmse is None else float(rmse),
        topo=topo,
        label_names=label_names,
        format_version=version,
    )


def export_ply(doc: SemanticMapDocument, path) -> None:
    """ASCII PLY with per-vertex position and palette color of the hard label."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("ply\n")
        fh.write("format ascii 1.0\n")
        fh.write("comment semantic point cloud, colors from the 19-class palette\n")
        fh.write(f"element vertex {len(doc.points)}\n")
        fh.write("property float x\n")
        fh.write("property float y\n")
        fh.write("property float z\n")
        fh.write("property uchar red\n")
        fh.write("property uchar green\n")
        fh.write("property uchar blue\n")
        fh.write("end_header\n")
        for p in doc.points:
            r, g, b = PALETTE[map_label(p.belief)]
            x, y, z = p.position
            fh.write(f"{x:.6f} {y:.6f} {z:.6f} {r} {g} {b}\n")


def export_dot(doc: SemanticMapDocument, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(to_dot(doc.topo))


def documents_equal(a: SemanticMapDocument, b: SemanticMapDocument) -> bool:
    """Structural equality, exact on all numeric fields."""
    if a.format_version != b.format_version or a.label_names != b.label_names:
        return False
    if len(a.points) != len(b.points) or len(a.landmarks) != len(b.landmarks):
        return False
    for pa, pb in zip(a.points, b.points):
        if pa.id != pb.id or pa.observation_count != pb.observation_count:
            return False
        if not (np.array_equal(pa.position, pb.position) and np.array_equal(pa.belief, pb.belief)):
            return False
    for la, lb in zip(a.landmarks, b.landmarks):
        if (la.name, la.sigma) != (lb.name, lb.sigma):
            return False
        if (la.geo.lat, la.geo.lon, la.geo.alt) != (lb.geo.lat, lb.geo.lon, lb.geo.alt):
            return False
        if (la.map_position is None) != (lb.map_position is None):
            return False
        if la.map_position is not None and not np.array_equal(la.map_position, lb.map_position):
            return False
    if (a.transform is None) != (b.transform is None):
        return False
    if a.transform is not None:
        if not (
            np.array_equal(a.transform.rotation, b.transform.rotation)
            and a.transform.scale == b.transform.scale
            and np.array_equal(a.transform.translation, b.transform.translation)
        ):
            return False
    if a.alignment_rmse != b.alignment_rmse:
        return False
    if (a.topo is None) != (b.topo is None):
        return False
    if a.topo is not None and graph_to_dict(a.topo) != graph_to_dict(b.topo):
        return False
    return True
