"""
Tests for center triangulation, merging, refinement and pruning.
"""

import itertools

import numpy as np
import pytest

from src.curvpose.core.config import HeatmapConfig, TriangulationConfig
from src.curvpose.core.errors import InsufficientViewsError
from src.curvpose.core.geometry import look_at, project
from src.curvpose.scene.generator import SceneGenerationSpec, generate_scene
from src.curvpose.scene.primitives import primitive_mesh
from src.curvpose.services.centers import (
    Center3D,
    centers_from_heatmaps,
    drop_unsupported,
    merge_candidates,
    prune,
    refine_and_score,
    reprojection_scores,
    triangulate_candidates,
)
from src.curvpose.services.heatmaps import center_heatmap, synthesize_oracle

TARGET = np.array([0.02, -0.01, 0.05])


@pytest.fixture
def ring_cameras(camera_factory):
    """Four cameras around TARGET whose principal point is a pixel center."""
    eyes = ([0.8, 0.0, 0.6], [0.0, 0.8, 0.6], [-0.8, 0.0, 0.6], [0.0, -0.8, 0.6])
    return [
        camera_factory(cx=32.5, cy=32.5, world_to_cam=look_at(TARGET + eye, TARGET))
        for eye in eyes
    ]


@pytest.fixture
def target_heatmaps(ring_cameras):
    cube, _ = primitive_mesh("cube", [0.08])
    return [
        center_heatmap([TARGET], [cube], camera, HeatmapConfig(), view_index=v)
        for v, camera in enumerate(ring_cameras)
    ]


class TestTriangulateCandidates:
    """Cross-view ray pairing."""

    def test_noise_free_peaks_give_six_exact_midpoints(self, ring_cameras):
        peaks = [[project(camera, TARGET)] for camera in ring_cameras]
        midpoints = triangulate_candidates(peaks, ring_cameras, TriangulationConfig())
        assert len(midpoints) == 6
        for midpoint in midpoints:
            assert np.linalg.norm(midpoint - TARGET) < 1e-6

    def test_far_apart_rays_are_rejected(self, ring_cameras):
        elsewhere = TARGET + np.array([0.0, 0.0, 0.2])
        peaks = [[project(ring_cameras[0], TARGET)], [project(ring_cameras[1], elsewhere)]]
        midpoints = triangulate_candidates(peaks, ring_cameras[:2], TriangulationConfig())
        assert midpoints == []

    def test_single_view_raises(self, ring_cameras):
        with pytest.raises(InsufficientViewsError):
            triangulate_candidates([[(32.5, 32.5)]], ring_cameras[:1], TriangulationConfig())

    def test_views_without_peaks_contribute_nothing(self, ring_cameras):
        peaks = [[project(ring_cameras[0], TARGET)], [], [], [project(ring_cameras[3], TARGET)]]
        midpoints = triangulate_candidates(peaks, ring_cameras, TriangulationConfig())
        assert len(midpoints) == 1


class TestMergeCandidates:
    """Agglomeration of nearby midpoints."""

    def test_points_1mm_apart_merge(self):
        merged = merge_candidates([np.zeros(3), np.array([0.001, 0.0, 0.0])], d_c=0.03)
        assert len(merged) == 1
        np.testing.assert_allclose(merged[0], [0.0005, 0.0, 0.0])

    def test_points_1m_apart_stay_separate(self):
        merged = merge_candidates([np.zeros(3), np.array([1.0, 0.0, 0.0])], d_c=0.03)
        assert len(merged) == 2

    def test_cluster_centroid_is_mean_of_members(self):
        rng = np.random.default_rng(0)
        center = np.array([0.1, 0.2, 0.3])
        points = [center + rng.normal(scale=0.002, size=3) for _ in range(6)]
        merged = merge_candidates(points, d_c=0.03)
        assert len(merged) == 1
        np.testing.assert_allclose(merged[0], np.mean(points, axis=0), atol=1e-12)

    def test_larger_clusters_come_first(self):
        far = np.array([1.0, 0.0, 0.0])
        points = [far, np.zeros(3), np.array([0.001, 0.0, 0.0]), np.array([0.0, 0.001, 0.0])]
        merged = merge_candidates(points, d_c=0.03)
        assert len(merged) == 2
        np.testing.assert_allclose(merged[1], far)

    def test_empty_input(self):
        assert merge_candidates([], d_c=0.03) == []


class TestRefineAndScore:
    """Score maximization around merged points."""

    def test_center_at_blob_maximum_is_unchanged(self, ring_cameras, target_heatmaps):
        (center,) = refine_and_score([TARGET], target_heatmaps, ring_cameras)
        assert np.linalg.norm(center.position - TARGET) < 1e-4
        assert np.all(center.per_view_scores >= 0.99)
        assert center.aggregate_score == pytest.approx(np.sum(center.per_view_scores))

    def test_offset_center_moves_toward_target(self, ring_cameras, target_heatmaps):
        start = TARGET + np.array([0.004, -0.003, 0.002])
        initial = reprojection_scores(start, target_heatmaps, ring_cameras).sum()
        (center,) = refine_and_score([start], target_heatmaps, ring_cameras)
        assert center.aggregate_score > initial
        assert np.linalg.norm(center.position - TARGET) < np.linalg.norm(start - TARGET)

    def test_point_outside_every_view_keeps_zero_score(self, ring_cameras, target_heatmaps):
        start = TARGET + np.array([0.0, 0.0, 5.0])
        (center,) = refine_and_score([start], target_heatmaps, ring_cameras)
        np.testing.assert_array_equal(center.position, start)
        assert center.aggregate_score == 0.0

    def test_scores_are_bounded(self, ring_cameras, target_heatmaps):
        scores = reprojection_scores(TARGET, target_heatmaps, ring_cameras)
        assert np.all((scores >= 0.0) & (scores <= 1.0))


class TestPrune:
    """Score-ordered suppression of overlapping centers."""

    def test_weaker_neighbor_is_dropped(self):
        strong = Center3D(np.zeros(3), [1.0, 1.0, 1.0], 3.0)
        weak = Center3D(np.array([0.001, 0.0, 0.0]), [1.0, 1.0, 0.0], 2.0)
        kept = prune([weak, strong], TriangulationConfig(d_o=0.03))
        assert len(kept) == 1 and kept[0] is strong

    def test_distant_centers_survive_in_score_order(self):
        a = Center3D(np.zeros(3), [0.5], 0.5)
        b = Center3D(np.array([0.5, 0.0, 0.0]), [0.9], 0.9)
        kept = prune([a, b], TriangulationConfig())
        assert [c is b for c in kept] == [True, False]

    def test_expected_count_caps_output(self):
        centers = [Center3D(np.array([k, 0.0, 0.0]), [k / 10], k / 10) for k in range(5)]
        kept = prune(centers, TriangulationConfig(expected_count=2))
        assert [c.aggregate_score for c in kept] == [0.4, 0.3]

    def test_pruning_twice_changes_nothing(self):
        rng = np.random.default_rng(6)
        for expected_count in (None, 3):
            config = TriangulationConfig(d_o=0.03, expected_count=expected_count)
            centers = [
                Center3D(rng.uniform(0.0, 0.08, size=3), [s], s) for s in rng.uniform(size=40)
            ]
            once = prune(centers, config)
            twice = prune(once, config)
            assert len(once) > 1
            assert [id(c) for c in twice] == [id(c) for c in once]


class TestDropUnsupported:
    """Multi-view support filter."""

    def test_two_view_crossing_is_dropped(self):
        real = Center3D.from_scores(np.zeros(3), [1.0, 0.98, 0.95, 0.9])
        ghost = Center3D.from_scores(np.array([0.1, 0.0, 0.0]), [0.9, 0.85, 0.1, 0.0])
        kept = drop_unsupported([ghost, real], TriangulationConfig())
        assert len(kept) == 1 and kept[0] is real

    def test_weak_center_is_dropped_relative_to_the_best(self):
        real = Center3D.from_scores(np.zeros(3), [1.0, 1.0, 1.0, 1.0])
        faint = Center3D.from_scores(np.array([0.2, 0.0, 0.0]), [0.35, 0.35, 0.35, 0.35])
        kept = drop_unsupported([real, faint], TriangulationConfig())
        assert len(kept) == 1 and kept[0] is real
        relaxed = TriangulationConfig(min_score_fraction=0.3)
        assert [id(c) for c in drop_unsupported([real, faint], relaxed)] == [id(real), id(faint)]

    def test_support_requirement_is_capped_by_the_view_count(self):
        center = Center3D.from_scores(np.zeros(3), [0.9, 0.8])
        kept = drop_unsupported([center], TriangulationConfig(min_support_views=3))
        assert len(kept) == 1 and kept[0] is center

    def test_no_centers(self):
        assert drop_unsupported([], TriangulationConfig()) == []


class TestCenter3D:
    def test_from_scores_clips_and_sums(self):
        center = Center3D.from_scores(np.zeros(3), [1.2, 0.5, -0.1], class_id=2)
        np.testing.assert_array_equal(center.per_view_scores, [1.0, 0.5, 0.0])
        assert center.aggregate_score == 1.5
        assert center.class_id == 2

    def test_view_weights_sum_to_one(self):
        center = Center3D.from_scores(np.zeros(3), [0.2, 0.6, 0.2])
        np.testing.assert_allclose(center.view_weights, [0.2, 0.6, 0.2])
        assert Center3D.from_scores(np.zeros(3), [0.0, 0.0]).view_weights.tolist() == [0.5, 0.5]

    def test_dict_round_trip(self):
        center = Center3D.from_scores([0.1, 0.2, 0.3], [0.9, 0.8], class_id=1)
        again = Center3D.from_dict(center.to_dict())
        np.testing.assert_array_equal(again.position, center.position)
        assert again.aggregate_score == center.aggregate_score
        assert again.class_id == 1


class TestCentersFromHeatmaps:
    """Heatmaps-to-centers chain on oracle data."""

    def test_single_target(self, ring_cameras, target_heatmaps):
        centers = centers_from_heatmaps(
            target_heatmaps, ring_cameras, HeatmapConfig(), TriangulationConfig(), class_id=0
        )
        assert len(centers) == 1
        assert np.linalg.norm(centers[0].position - TARGET) < 0.005
        assert centers[0].class_id == 0

    def test_generated_scene_centers_match_ground_truth(self, small_scene):
        oracle = synthesize_oracle(small_scene, HeatmapConfig())
        (class_id,) = small_scene.class_ids_present()
        centers = centers_from_heatmaps(
            oracle.centers[class_id],
            small_scene.cameras,
            HeatmapConfig(),
            TriangulationConfig(),
            class_id=class_id,
        )
        truth = [inst.pose.translation for inst in small_scene.instances]
        assert len(centers) == len(truth)
        best = min(
            max(np.linalg.norm(c.position - t) for c, t in zip(centers, order))
            for order in itertools.permutations(truth)
        )
        assert best < 0.01

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_five_cubes_give_exactly_five_centers(self, seed):
        scene = generate_scene(SceneGenerationSpec(n_objects=5, class_mix=[{"kind": "cube"}]), seed)
        oracle = synthesize_oracle(scene, HeatmapConfig())
        centers = centers_from_heatmaps(
            oracle.centers[0], scene.cameras, HeatmapConfig(), TriangulationConfig(), class_id=0
        )
        truth = np.array([inst.pose.translation for inst in scene.instances])
        assert len(centers) == 5
        for center in centers:
            assert np.min(np.linalg.norm(truth - center.position, axis=1)) < 0.005
