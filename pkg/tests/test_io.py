import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semmap import (
    GeoFix,
    KeyframeRecord,
    Landmark,
    ParseError,
    SemanticMapDocument,
    SemanticMapPoint,
    SlamExport,
    TopoEdge,
    TopoGraph,
    TopoNode,
    ValidationError,
    documents_equal,
    export_dot,
    export_ply,
    load_gps_csv,
    load_landmarks_csv,
    load_map,
    load_slam_export,
    normalized_belief,
    random_similarity,
    save_gps_csv,
    save_landmarks_csv,
    save_map,
    save_slam_export,
    to_dot,
    uniform_belief,
)

IDENTITY_12 = "1.0 0.0 0.0 0.0 0.0 1.0 0.0 0.0 0.0 0.0 1.0 0.0"

MINIMAL_SLAM = f"""SLAMEXPORT 1
# one keyframe, one point
K 0 {IDENTITY_12} 0.0 0.0 0.0 0.0
P 7 1.5 -2.0 3.0
V 0 7
"""


class TestSlamExportFormat:
    def test_minimal_file(self, tmp_path):
        path = tmp_path / "slam.txt"
        path.write_text(MINIMAL_SLAM)
        export = load_slam_export(path)
        assert len(export.keyframes) == 1
        assert list(export.points) == [7]
        np.testing.assert_array_equal(export.points[7], [1.5, -2.0, 3.0])
        assert export.visibility == {0: [7]}

    def test_pose_line_with_eleven_matrix_values(self, tmp_path):
        path = tmp_path / "slam.txt"
        bad_matrix = " ".join(IDENTITY_12.split()[:11])
        path.write_text(f"SLAMEXPORT 1\nK 0 {bad_matrix} 0.0 0.0 0.0 0.0\n")
        with pytest.raises(ParseError) as err:
            load_slam_export(path)
        assert err.value.line == 2
        assert "17 fields" in str(err.value)

    def test_missing_header(self, tmp_path):
        path = tmp_path / "slam.txt"
        path.write_text(f"K 0 {IDENTITY_12} 0.0 0.0 0.0 0.0\n")
        with pytest.raises(ParseError, match="header"):
            load_slam_export(path)

    def test_unknown_tag(self, tmp_path):
        path = tmp_path / "slam.txt"
        path.write_text("SLAMEXPORT 1\nQ 1 2 3\n")
        with pytest.raises(ParseError, match="unknown record tag"):
            load_slam_export(path)

    def test_non_numeric_field(self, tmp_path):
        path = tmp_path / "slam.txt"
        path.write_text("SLAMEXPORT 1\nP 0 1.0 oops 3.0\n")
        with pytest.raises(ParseError) as err:
            load_slam_export(path)
        assert err.value.line == 2

    def test_non_increasing_frames(self, tmp_path):
        path = tmp_path / "slam.txt"
        path.write_text(
            f"SLAMEXPORT 1\nK 5 {IDENTITY_12} 0.0 0.0 0.0 0.0\n"
            f"K 5 {IDENTITY_12} 1.0 0.0 0.0 0.0\n"
        )
        with pytest.raises(ValidationError, match="strictly increasing"):
            load_slam_export(path)

    def test_duplicate_point_id(self, tmp_path):
        path = tmp_path / "slam.txt"
        path.write_text("SLAMEXPORT 1\nP 3 0.0 0.0 0.0\nP 3 1.0 1.0 1.0\n")
        with pytest.raises(ValidationError, match="duplicate point id"):
            load_slam_export(path)

    def test_dangling_visibility_id(self, tmp_path):
        path = tmp_path / "slam.txt"
        path.write_text(
            f"SLAMEXPORT 1\nK 0 {IDENTITY_12} 0.0 0.0 0.0 0.0\nP 1 0.0 0.0 0.0\nV 0 1 2\n"
        )
        with pytest.raises(ValidationError, match="unknown point 2"):
            load_slam_export(path)

    def test_visibility_for_unknown_frame(self, tmp_path):
        path = tmp_path / "slam.txt"
        path.write_text(
            f"SLAMEXPORT 1\nK 0 {IDENTITY_12} 0.0 0.0 0.0 0.0\nP 1 0.0 0.0 0.0\nV 9 1\n"
        )
        with pytest.raises(ValidationError, match="unknown frame 9"):
            load_slam_export(path)

    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(60)
        keyframes = [
            KeyframeRecord(
                frame_id=fid,
                camera_matrix=rng.normal(size=(3, 4)) + np.hstack([np.eye(3) * 5, np.zeros((3, 1))]),
                position=rng.uniform(-10, 10, 3),
                heading=rng.uniform(-3, 3),
            )
            for fid in (0, 2, 5)
        ]
        export = SlamExport(
            keyframes=keyframes,
            points={i: rng.uniform(-50, 50, 3) for i in range(4)},
            visibility={0: [0, 2], 5: [1, 3]},
        )
        path = tmp_path / "slam.txt"
        save_slam_export(export, path)
        loaded = load_slam_export(path)
        for a, b in zip(loaded.keyframes, export.keyframes):
            assert a.frame_id == b.frame_id
            np.testing.assert_array_equal(a.camera_matrix, b.camera_matrix)
            np.testing.assert_array_equal(a.position, b.position)
            assert a.heading == b.heading
        for pid in export.points:
            np.testing.assert_array_equal(loaded.points[pid], export.points[pid])
        assert loaded.visibility == export.visibility


class TestGpsCsv:
    def test_round_trip_and_empty_alt(self, tmp_path):
        path = tmp_path / "gps.csv"
        path.write_text("frame_id,lat,lon,alt\n0,48.5,9.25,112.5\n30,48.6,9.26,\n")
        fixes = load_gps_csv(path)
        assert fixes[0].alt == 112.5
        assert fixes[1].alt == 0.0
        out = tmp_path / "out.csv"
        save_gps_csv(fixes, out)
        assert load_gps_csv(out) == fixes

    def test_bad_header(self, tmp_path):
        path = tmp_path / "gps.csv"
        path.write_text("frame,lat,lon,alt\n0,48.5,9.25,0\n")
        with pytest.raises(ParseError, match="header"):
            load_gps_csv(path)

    def test_duplicate_frame(self, tmp_path):
        path = tmp_path / "gps.csv"
        path.write_text("frame_id,lat,lon,alt\n0,48.5,9.25,0\n0,48.6,9.25,0\n")
        with pytest.raises(ValidationError, match="duplicate fix"):
            load_gps_csv(path)

    def test_latitude_out_of_range_names_line(self, tmp_path):
        path = tmp_path / "gps.csv"
        path.write_text("frame_id,lat,lon,alt\n0,48.5,9.25,0\n30,95.0,9.25,0\n")
        with pytest.raises(ValidationError) as err:
            load_gps_csv(path)
        assert err.value.line == 3

    def test_wrong_column_count(self, tmp_path):
        path = tmp_path / "gps.csv"
        path.write_text("frame_id,lat,lon,alt\n0,48.5,9.25\n")
        with pytest.raises(ParseError, match="4 columns"):
            load_gps_csv(path)


class TestLandmarkCsv:
    def test_quoted_name_with_comma(self, tmp_path):
        path = tmp_path / "lm.csv"
        path.write_text('name,lat,lon,sigma\n"Gate, Old Town",48.5,9.25,22.5\n')
        landmarks = load_landmarks_csv(path)
        assert landmarks[0].name == "Gate, Old Town"
        assert landmarks[0].sigma == 22.5

    def test_three_column_variant_uses_default_sigma(self, tmp_path):
        path = tmp_path / "lm.csv"
        path.write_text("name,lat,lon\nTower,48.5,9.25\n")
        assert load_landmarks_csv(path)[0].sigma == 15.0

    def test_empty_sigma_field_uses_default(self, tmp_path):
        path = tmp_path / "lm.csv"
        path.write_text("name,lat,lon,sigma\nTower,48.5,9.25,\n")
        assert load_landmarks_csv(path)[0].sigma == 15.0

    def test_duplicate_name_rejected(self, tmp_path):
        path = tmp_path / "lm.csv"
        path.write_text("name,lat,lon\nTower,48.5,9.25\nTower,48.6,9.26\n")
        with pytest.raises(ValidationError, match="duplicate landmark"):
            load_landmarks_csv(path)

    def test_non_positive_sigma_rejected(self, tmp_path):
        path = tmp_path / "lm.csv"
        path.write_text("name,lat,lon,sigma\nTower,48.5,9.25,-3\n")
        with pytest.raises(ValidationError):
            load_landmarks_csv(path)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "lm.csv"
        path.write_text("title,lat,lon\nTower,48.5,9.25\n")
        with pytest.raises(ParseError, match="header"):
            load_landmarks_csv(path)

    def test_round_trip(self, tmp_path):
        landmarks = [
            Landmark(name="A, with comma", geo=GeoFix(frame_id=-1, lat=1.25, lon=-3.5), sigma=9.0),
            Landmark(name="Plain", geo=GeoFix(frame_id=-1, lat=0.0, lon=0.0)),
        ]
        path = tmp_path / "lm.csv"
        save_landmarks_csv(landmarks, path)
        loaded = load_landmarks_csv(path)
        assert [(lm.name, lm.geo.lat, lm.geo.lon, lm.sigma) for lm in loaded] == [
            (lm.name, lm.geo.lat, lm.geo.lon, lm.sigma) for lm in landmarks
        ]


def random_document(seed: int) -> SemanticMapDocument:
    rng = np.random.default_rng(seed)
    points = [
        SemanticMapPoint(
            id=i,
            position=rng.uniform(-50, 50, 3),
            belief=normalized_belief(rng.uniform(0, 1, 19)),
            observation_count=int(rng.integers(0, 40)),
        )
        for i in range(int(rng.integers(0, 12)))
    ]
    landmarks = [
        Landmark(
            name=f"L{i}",
            geo=GeoFix(frame_id=-1, lat=float(rng.uniform(-80, 80)),
                       lon=float(rng.uniform(-170, 170)), alt=float(rng.uniform(0, 300))),
            sigma=float(rng.uniform(1, 40)),
            map_position=rng.uniform(-100, 100, 3) if rng.random() < 0.8 else None,
        )
        for i in range(int(rng.integers(0, 5)))
    ]
    transform = random_similarity(rng) if rng.random() < 0.7 else None
    topo = None
    if rng.random() < 0.7:
        n = int(rng.integers(1, 6))
        nodes = []
        for i in range(n):
            if rng.random() < 0.5:
                nodes.append(TopoNode(node_id=i, kind="landmark", position=rng.uniform(0, 50, 3),
                                      landmark_names=(f"L{i}",), source_frame_ids=(i,)))
            else:
                nodes.append(TopoNode(node_id=i, kind="turn", position=rng.uniform(0, 50, 3),
                                      source_frame_ids=(i,)))
        edges = [TopoEdge(i, i + 1, float(rng.uniform(0, 100))) for i in range(n - 1)]
        topo = TopoGraph(nodes=nodes, edges=edges)
    return SemanticMapDocument(
        points=points,
        landmarks=landmarks,
        transform=transform,
        alignment_rmse=float(rng.uniform(0, 2)) if transform is not None else None,
        topo=topo,
    )


class TestMapDocument:
    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1))
    def test_save_load_identity(self, tmp_path_factory, seed):
        doc = random_document(seed)
        path = tmp_path_factory.mktemp("doc") / "map.json"
        save_map(doc, path)
        assert documents_equal(load_map(path), doc)

    def test_unknown_version_rejected(self, tmp_path):
        doc = random_document(1)
        path = tmp_path / "map.json"
        save_map(doc, path)
        data = json.loads(path.read_text())
        data["format_version"] = 99
        path.write_text(json.dumps(data))
        with pytest.raises(ValidationError, match="format_version"):
            load_map(path)

    def test_invalid_json_rejected(self, tmp_path):
        path = tmp_path / "map.json"
        path.write_text("{not json")
        with pytest.raises(ParseError, match="JSON"):
            load_map(path)

    def test_corrupted_belief_rejected(self, tmp_path):
        doc = random_document(2)
        while not doc.points:
            doc = random_document(np.random.default_rng().integers(1000))
        path = tmp_path / "map.json"
        save_map(doc, path)
        data = json.loads(path.read_text())
        data["points"][0]["belief"] = [0.5] * 19
        path.write_text(json.dumps(data))
        with pytest.raises(ValidationError):
            load_map(path)

    def test_stored_label_must_match_belief(self, tmp_path):
        doc = SemanticMapDocument(points=[SemanticMapPoint(id=0, position=[0, 0, 0])])
        path = tmp_path / "map.json"
        save_map(doc, path)
        data = json.loads(path.read_text())
        data["points"][0]["label"] = 5
        path.write_text(json.dumps(data))
        with pytest.raises(ValidationError, match="does not match"):
            load_map(path)


class TestPlyExport:
    def test_empty_map(self, tmp_path):
        path = tmp_path / "cloud.ply"
        export_ply(SemanticMapDocument(points=[]), path)
        text = path.read_text()
        assert "element vertex 0" in text
        assert text.strip().endswith("end_header")

    def test_road_point_gets_palette_color(self, tmp_path):
        from semmap import one_hot_belief

        doc = SemanticMapDocument(points=[
            SemanticMapPoint(id=0, position=[1.0, 2.0, 3.0], belief=one_hot_belief(0)),
        ])
        path = tmp_path / "cloud.ply"
        export_ply(doc, path)
        body = path.read_text().split("end_header\n")[1].strip()
        assert body == "1.000000 2.000000 3.000000 128 64 128"

    def test_vertex_count_matches(self, tmp_path):
        doc = SemanticMapDocument(points=[
            SemanticMapPoint(id=i, position=[i, 0, 0], belief=uniform_belief())
            for i in range(5)
        ])
        path = tmp_path / "cloud.ply"
        export_ply(doc, path)
        lines = path.read_text().splitlines()
        assert "element vertex 5" in lines
        assert len(lines) == lines.index("end_header") + 1 + 5


class TestDotExport:
    def test_matches_to_dot(self, tmp_path):
        doc = random_document(7)
        path = tmp_path / "topo.dot"
        export_dot(doc, path)
        assert path.read_text() == to_dot(doc.topo)

    def test_none_graph_writes_empty(self, tmp_path):
        path = tmp_path / "topo.dot"
        export_dot(SemanticMapDocument(points=[]), path)
        assert path.read_text() == "graph topo {\n}\n"
