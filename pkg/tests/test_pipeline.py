import numpy as np
import pytest

from semmap import (
    PipelineConfig,
    PipelineStageError,
    WorldSpec,
    documents_equal,
    generate_world,
    load_map,
    map_label,
    run_pipeline,
)
from semmap.errors import InsufficientAnchorsError, ValidationError


@pytest.fixture(scope="module")
def loop_bundle(tmp_path_factory):
    """A 100-frame loop world with alignment-friendly GPS."""
    root = tmp_path_factory.mktemp("loop")
    spec = WorldSpec(seed=17, n_points=25, n_frames=100, shape="loop",
                     margin=0.5, gps_noise=0.2)
    paths, truth = generate_world(spec, root)
    return paths, truth


def full_config(paths, out=None, **kwargs):
    return PipelineConfig(
        slam=paths.slam,
        rasters=paths.rasters_dir,
        gps=paths.gps,
        landmarks=paths.landmarks,
        out=out,
        **kwargs,
    )


class TestRunPipeline:
    def test_forty_frame_world_labels_95_percent(self, tmp_path):
        spec = WorldSpec(seed=2, n_points=40, n_frames=40, shape="straight", margin=0.5)
        paths, truth = generate_world(spec, tmp_path)
        doc = run_pipeline(PipelineConfig(slam=paths.slam, rasters=paths.rasters_dir))
        correct = sum(
            1 for p in doc.points if map_label(p.belief) == truth.true_labels[p.id]
        )
        assert correct / len(doc.points) >= 0.95

    def test_full_run_produces_all_layers(self, loop_bundle, tmp_path):
        paths, truth = loop_bundle
        out = tmp_path / "out"
        doc = run_pipeline(full_config(paths, out=out))
        assert doc.transform is not None
        assert doc.topo is not None and doc.topo.nodes
        assert len(doc.landmarks) == 4
        for lm in doc.landmarks:
            planar_error = np.linalg.norm(
                (lm.map_position - truth.landmark_positions[lm.name])[:2]
            )
            assert planar_error < 2.0
        assert (out / "map.json").exists()
        assert (out / "map.ply").exists()
        assert (out / "topo.dot").exists()
        assert documents_equal(load_map(out / "map.json"), doc)

    def test_no_gps_gives_semantic_map_only(self, loop_bundle):
        paths, _ = loop_bundle
        doc = run_pipeline(PipelineConfig(
            slam=paths.slam, rasters=paths.rasters_dir,
            landmarks=paths.landmarks, allow_partial=True,
        ))
        assert doc.transform is None
        assert doc.landmarks == []
        assert doc.topo is None
        assert any(p.observation_count > 0 for p in doc.points)

    def test_landmarks_without_gps_errors_when_strict(self, loop_bundle):
        paths, _ = loop_bundle
        with pytest.raises(PipelineStageError) as err:
            run_pipeline(PipelineConfig(
                slam=paths.slam, landmarks=paths.landmarks, allow_partial=False,
            ))
        assert err.value.stage == "landmarks"

    def test_insufficient_anchors_downgrades_with_allow_partial(self, tmp_path):
        # 40 frames leave only frames 0 and 30 as stride-30 anchors.
        spec = WorldSpec(seed=3, n_points=5, n_frames=40, shape="straight")
        paths, _ = generate_world(spec, tmp_path)
        strict = full_config(paths)
        with pytest.raises(PipelineStageError) as err:
            run_pipeline(strict)
        assert err.value.stage == "align"
        assert isinstance(err.value.cause, InsufficientAnchorsError)

        relaxed = full_config(paths, allow_partial=True)
        doc = run_pipeline(relaxed)
        assert doc.transform is None
        assert doc.landmarks == [] and doc.topo is None

    def test_stride_override_recovers_anchors(self, tmp_path):
        spec = WorldSpec(seed=4, n_points=5, n_frames=40, shape="straight", gps_noise=0.0)
        paths, _ = generate_world(spec, tmp_path)
        doc = run_pipeline(full_config(paths, stride=10))
        assert doc.transform is not None
        assert doc.transform.scale == pytest.approx(2.0, rel=1e-3)

    def test_default_stride_is_thirty(self):
        assert PipelineConfig(slam="x").stride == 30

    def test_missing_raster_surfaces_fuse_stage(self, tmp_path):
        spec = WorldSpec(seed=5, n_points=4, n_frames=20, shape="straight")
        paths, _ = generate_world(spec, tmp_path)
        (paths.rasters_dir / "frame_000003.sscm").unlink()
        with pytest.raises(PipelineStageError) as err:
            run_pipeline(PipelineConfig(slam=paths.slam, rasters=paths.rasters_dir))
        assert err.value.stage == "fuse"

    def test_missing_slam_file_surfaces_load_stage(self, tmp_path):
        with pytest.raises((PipelineStageError, FileNotFoundError)):
            run_pipeline(PipelineConfig(slam=tmp_path / "nope.txt"))

    def test_topology_matches_ground_truth(self, loop_bundle):
        paths, truth = loop_bundle
        doc = run_pipeline(full_config(paths))
        turn_nodes = [n for n in doc.topo.nodes if n.kind == "turn"]
        detected_frames = {fid for n in turn_nodes for fid in n.source_frame_ids}
        assert detected_frames == set(truth.turn_frames)

    def test_deterministic_given_same_inputs(self, loop_bundle, tmp_path):
        paths, _ = loop_bundle
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        run_pipeline(full_config(paths, out=out_a))
        run_pipeline(full_config(paths, out=out_b))
        assert (out_a / "map.json").read_bytes() == (out_b / "map.json").read_bytes()
        assert (out_a / "map.ply").read_bytes() == (out_b / "map.ply").read_bytes()
        assert (out_a / "topo.dot").read_bytes() == (out_b / "topo.dot").read_bytes()

    def test_beliefs_stay_uniform_without_rasters(self, loop_bundle):
        paths, _ = loop_bundle
        doc = run_pipeline(PipelineConfig(slam=paths.slam))
        assert all(p.observation_count == 0 for p in doc.points)
        for p in doc.points:
            np.testing.assert_allclose(p.belief, np.full(19, 1.0 / 19))
