import math

import numpy as np
import pytest

from semmap import (
    GeoFix,
    KeyframeRecord,
    Landmark,
    LocalTangentOrigin,
    ValidationError,
    associate_landmarks,
    identity_transform,
    membership,
    place_landmarks,
    rank_landmarks,
)
from semmap.geoalign import EARTH_RADIUS_M

IDENTITY_34 = np.hstack([np.eye(3), np.zeros((3, 1))])

ORIGIN = LocalTangentOrigin(lat=0.0, lon=0.0)


def landmark_at(name, x, y, sigma=1.0):
    return Landmark(
        name=name,
        geo=GeoFix(frame_id=-1, lat=0.0, lon=0.0),
        sigma=sigma,
        map_position=np.array([x, y, 0.0]),
    )


def keyframe(fid, x, y):
    return KeyframeRecord(
        frame_id=fid, camera_matrix=IDENTITY_34, position=[x, y, 0.0], heading=0.0
    )


class TestPlaceLandmarks:
    def test_identity_at_origin(self):
        lm = Landmark(name="A", geo=GeoFix(frame_id=-1, lat=0.0, lon=0.0))
        placed = place_landmarks([lm], identity_transform(), ORIGIN)
        np.testing.assert_allclose(placed[0].map_position, np.zeros(3), atol=1e-12)
        assert lm.map_position is None  # input untouched

    def test_order_preserved_and_independent(self):
        lms = [
            Landmark(name="A", geo=GeoFix(frame_id=-1, lat=0.001, lon=0.0)),
            Landmark(name="B", geo=GeoFix(frame_id=-1, lat=0.0, lon=0.001)),
        ]
        forward = place_landmarks(lms, identity_transform(), ORIGIN)
        backward = place_landmarks(list(reversed(lms)), identity_transform(), ORIGIN)
        assert [lm.name for lm in forward] == ["A", "B"]
        np.testing.assert_array_equal(forward[0].map_position, backward[1].map_position)

    def test_one_degree_north_composes_enu_example(self):
        lm = Landmark(name="N", geo=GeoFix(frame_id=-1, lat=1.0, lon=0.0))
        placed = place_landmarks([lm], identity_transform(), ORIGIN)
        expected = np.array([0.0, EARTH_RADIUS_M * math.pi / 180.0, 0.0])
        np.testing.assert_allclose(placed[0].map_position, expected, atol=1e-6)
        assert placed[0].map_position[1] == pytest.approx(111194.93, abs=0.005)


class TestMembership:
    def test_peak_value(self):
        lm = landmark_at("A", 0.0, 0.0, sigma=1.0)
        assert membership(lm, 0.0, 0.0) == pytest.approx(1.0 / (2.0 * math.pi), abs=1e-12)

    def test_one_sigma_falloff(self):
        sigma = 3.5
        lm = landmark_at("A", 1.0, -2.0, sigma=sigma)
        peak = membership(lm, 1.0, -2.0)
        assert membership(lm, 1.0 + sigma, -2.0) == pytest.approx(peak * math.exp(-0.5), rel=1e-12)

    def test_radial_symmetry(self):
        lm = landmark_at("A", 2.0, 2.0, sigma=4.0)
        r = 7.3
        values = [
            membership(lm, 2.0 + r * math.cos(t), 2.0 + r * math.sin(t))
            for t in np.linspace(0, math.tau, 13)
        ]
        assert max(values) - min(values) < 1e-15

    def test_strictly_decreasing_along_rays(self):
        rng = np.random.default_rng(30)
        lm = landmark_at("A", -3.0, 5.0, sigma=11.0)
        for _ in range(50):
            theta = rng.uniform(0, math.tau)
            radii = np.sort(rng.uniform(0.0, 100.0, 20))
            values = [
                membership(lm, -3.0 + r * math.cos(theta), 5.0 + r * math.sin(theta))
                for r in radii
            ]
            assert all(a > b for a, b in zip(values, values[1:]))

    @pytest.mark.parametrize("sigma", [1.0, 15.0, 50.0])
    def test_integrates_to_one(self, sigma):
        # Monte-Carlo integral over a +-5 sigma box captures ~1 - 3e-6 of mass.
        rng = np.random.default_rng(int(sigma))
        half = 5.0 * sigma
        samples = rng.uniform(-half, half, (1_000_000, 2))
        lm = landmark_at("A", 0.0, 0.0, sigma=sigma)
        var = sigma ** 2
        values = np.exp(-(samples ** 2).sum(axis=1) / (2 * var)) / (2 * math.pi * var)
        integral = values.mean() * (2 * half) ** 2
        assert integral == pytest.approx(1.0, abs=0.01)
        # Same estimate through the public function on a subsample.
        subset = samples[:1000]
        via_api = np.array([membership(lm, x, y) for x, y in subset])
        np.testing.assert_allclose(via_api, values[:1000], rtol=1e-12)

    def test_unplaced_landmark_rejected(self):
        lm = Landmark(name="A", geo=GeoFix(frame_id=-1, lat=0.0, lon=0.0))
        with pytest.raises(ValidationError):
            membership(lm, 0.0, 0.0)

    def test_sigma_validation(self):
        with pytest.raises(ValidationError):
            Landmark(name="A", geo=GeoFix(frame_id=-1, lat=0.0, lon=0.0), sigma=0.0)
        with pytest.raises(ValidationError):
            Landmark(name="", geo=GeoFix(frame_id=-1, lat=0.0, lon=0.0))


class TestAssociateLandmarks:
    def test_single_keyframe_takes_all(self):
        frames = [keyframe(3, 10.0, 10.0)]
        lms = [landmark_at("A", 0.0, 0.0), landmark_at("B", 100.0, -5.0)]
        assocs = associate_landmarks(lms, frames)
        assert [a.frame_id for a in assocs] == [3, 3]

    def test_exact_position_match(self):
        frames = [keyframe(fid, fid * 2.0, 0.0) for fid in range(10)]
        lm = landmark_at("A", 10.0, 0.0)
        assoc = associate_landmarks([lm], frames)[0]
        assert assoc.frame_id == 5
        assert assoc.distance == 0.0

    def test_tie_breaks_to_lowest_frame_id(self):
        frames = [keyframe(2, -1.0, 0.0), keyframe(7, 1.0, 0.0)]
        assoc = associate_landmarks([landmark_at("A", 0.0, 0.0)], frames)[0]
        assert assoc.frame_id == 2

    def test_distance_is_planar(self):
        frames = [keyframe(0, 0.0, 0.0)]
        lm = Landmark(
            name="A",
            geo=GeoFix(frame_id=-1, lat=0.0, lon=0.0),
            map_position=np.array([3.0, 4.0, 100.0]),
        )
        assoc = associate_landmarks([lm], frames)[0]
        assert assoc.distance == pytest.approx(5.0, abs=1e-12)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(31)
        for _ in range(10):
            n_frames = int(rng.integers(1, 200))
            frames = [keyframe(fid, *rng.uniform(-100, 100, 2)) for fid in range(n_frames)]
            lms = [landmark_at(f"L{i}", *rng.uniform(-100, 100, 2))
                   for i in range(int(rng.integers(1, 30)))]
            assocs = associate_landmarks(lms, frames)
            for lm, assoc in zip(lms, assocs):
                best = None
                for kf in frames:
                    d = math.hypot(kf.position[0] - lm.map_position[0],
                                   kf.position[1] - lm.map_position[1])
                    if best is None or (d, kf.frame_id) < best:
                        best = (d, kf.frame_id)
                assert assoc.frame_id == best[1]
                assert assoc.distance == pytest.approx(best[0], abs=1e-12)

    def test_empty_trajectory_rejected(self):
        with pytest.raises(ValidationError):
            associate_landmarks([landmark_at("A", 0.0, 0.0)], [])


class TestRankLandmarks:
    def test_query_at_center_ranks_first(self):
        lms = [landmark_at("A", 0.0, 0.0), landmark_at("B", 5.0, 0.0),
               landmark_at("C", 0.0, 9.0)]
        assert rank_landmarks(lms, (0.0, 0.0), k=1)[0][0] == "A"

    def test_k_larger_than_list_returns_all(self):
        lms = [landmark_at("A", 0.0, 0.0), landmark_at("B", 5.0, 0.0)]
        assert len(rank_landmarks(lms, (1.0, 1.0), k=10)) == 2

    def test_matches_brute_force_sort(self):
        rng = np.random.default_rng(32)
        lms = [landmark_at(f"L{i}", *rng.uniform(-50, 50, 2), sigma=rng.uniform(1, 30))
               for i in range(40)]
        query = (3.0, -7.0)
        ranked = rank_landmarks(lms, query, k=40)
        oracle = sorted(
            ((lm.name, membership(lm, *query)) for lm in lms),
            key=lambda item: (-item[1], item[0]),
        )
        assert ranked == oracle

    def test_shared_sigma_ranking_equals_distance_ranking(self):
        rng = np.random.default_rng(33)
        lms = [landmark_at(f"L{i}", *rng.uniform(-50, 50, 2), sigma=12.0) for i in range(25)]
        query = rng.uniform(-50, 50, 2)
        ranked = [name for name, _ in rank_landmarks(lms, tuple(query), k=25)]
        by_distance = sorted(
            lms, key=lambda lm: np.linalg.norm(lm.map_position[:2] - query)
        )
        assert ranked == [lm.name for lm in by_distance]

    def test_membership_tie_breaks_lexicographically(self):
        lms = [landmark_at("B", 1.0, 0.0), landmark_at("A", -1.0, 0.0)]
        ranked = rank_landmarks(lms, (0.0, 0.0), k=2)
        assert [name for name, _ in ranked] == ["A", "B"]

    def test_k_validation(self):
        with pytest.raises(ValidationError):
            rank_landmarks([landmark_at("A", 0.0, 0.0)], (0.0, 0.0), k=0)
