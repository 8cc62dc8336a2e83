"""
Tests for oracle heatmap synthesis, corruption and peak detection.
"""

import numpy as np
import pytest

from src.curvpose.core.config import HeatmapConfig
from src.curvpose.core.errors import InvalidHeatmapError
from src.curvpose.core.geometry import Pose
from src.curvpose.rendering.curvature import render_view
from src.curvpose.scene.primitives import primitive_mesh
from src.curvpose.scene.scene_io import Instance, ObjectClass, Scene
from src.curvpose.services.heatmaps import (
    CENTER,
    CURVATURE,
    Heatmap,
    blob_sigma,
    center_heatmap,
    center_heatmaps_by_class,
    corrupt,
    curvature_target,
    detect_peaks,
    synthesize_oracle,
    visibility_fractions,
)


@pytest.fixture
def centered_camera(camera_factory):
    """Principal point on a pixel center, so an on-axis center hits it exactly."""
    return camera_factory(cx=32.5, cy=32.5)


@pytest.fixture
def cube8():
    mesh, _ = primitive_mesh("cube", [0.08])
    return mesh


class TestHeatmap:
    """Heatmap value checks."""

    def test_negative_values_rejected(self):
        with pytest.raises(InvalidHeatmapError):
            Heatmap(np.full((4, 4), -0.1))

    def test_center_values_bounded_by_one(self):
        with pytest.raises(InvalidHeatmapError):
            Heatmap(np.full((4, 4), 1.5), kind=CENTER)

    def test_curvature_may_exceed_one(self):
        heatmap = Heatmap(np.full((4, 4), 2.5), kind=CURVATURE)
        assert heatmap.grid.max() == 2.5

    def test_grid_must_be_2d(self):
        with pytest.raises(InvalidHeatmapError):
            Heatmap(np.zeros((2, 2, 2)))

    def test_nan_rejected(self):
        grid = np.zeros((3, 3))
        grid[1, 1] = np.nan
        with pytest.raises(InvalidHeatmapError):
            Heatmap(grid)


class TestCenterHeatmap:
    """Gaussian blobs at projected centers."""

    def test_blob_sigma(self):
        assert blob_sigma(0.06, 0.6, 0.5) == pytest.approx(5.0)

    def test_on_axis_center_peaks_at_one(self, centered_camera, cube8):
        heatmap = center_heatmap([[0.0, 0.0, 1.0]], [cube8], centered_camera, HeatmapConfig())
        grid = heatmap.grid
        assert np.unravel_index(np.argmax(grid), grid.shape) == (32, 32)
        assert grid[32, 32] == 1.0
        # sigma = 0.5 * 8 / 1 = 4 px
        assert grid[32, 36] == pytest.approx(np.exp(-0.5))
        assert grid[28, 32] == pytest.approx(np.exp(-0.5))

    def test_blob_truncated_at_four_sigma(self, centered_camera, cube8):
        grid = center_heatmap(
            [[0.0, 0.0, 1.0]], [cube8], centered_camera, HeatmapConfig()
        ).grid
        assert grid[32, 48] == pytest.approx(np.exp(-8.0))
        assert grid[32, 49] == 0.0

    def test_overlapping_blobs_combine_by_maximum(self, centered_camera, cube8):
        config = HeatmapConfig()
        single = center_heatmap([[0.0, 0.0, 1.0]], [cube8], centered_camera, config)
        double = center_heatmap(
            [[0.0, 0.0, 1.0], [0.0, 0.0, 1.0]], [cube8, cube8], centered_camera, config
        )
        np.testing.assert_array_equal(single.grid, double.grid)

    def test_center_behind_camera_is_skipped(self, centered_camera, cube8):
        heatmap = center_heatmap([[0.0, 0.0, -1.0]], [cube8], centered_camera, HeatmapConfig())
        assert not heatmap.grid.any()

    def test_larger_objects_give_wider_blobs(self, centered_camera, cube8):
        big, _ = primitive_mesh("cube", [0.16])
        config = HeatmapConfig()
        narrow = center_heatmap([[0.0, 0.0, 1.0]], [cube8], centered_camera, config).grid
        wide = center_heatmap([[0.0, 0.0, 1.0]], [big], centered_camera, config).grid
        assert np.count_nonzero(wide) > np.count_nonzero(narrow)

    def test_principal_point_shift_translates_the_heatmap(self, centered_camera, cube8):
        config = HeatmapConfig()
        centers = [[0.02, 0.01, 1.0], [-0.05, 0.03, 1.2]]
        base = center_heatmap(centers, [cube8, cube8], centered_camera, config).grid
        moved_camera = centered_camera.with_principal_point(32.5 + 5, 32.5 - 3)
        moved = center_heatmap(centers, [cube8, cube8], moved_camera, config).grid
        # Five columns right, three rows up; both blobs stay inside the image.
        np.testing.assert_allclose(moved[:61, 5:], base[3:, :59], atol=1e-12)
        assert moved.sum() == pytest.approx(base.sum(), abs=1e-9)

    def test_occluded_class_dropped_by_visibility_threshold(self, axis_camera, square_mesh):
        small_cube, _ = primitive_mesh("cube", [0.04])
        scene = Scene(
            classes={0: ObjectClass(square_mesh), 1: ObjectClass(small_cube)},
            instances=[
                Instance(0, Pose(np.eye(3), [0.0, 0.0, 1.0])),
                Instance(1, Pose(np.eye(3), [0.0, 0.0, 2.0])),
            ],
            cameras=[axis_camera],
        )
        everything = center_heatmaps_by_class(scene, axis_camera, HeatmapConfig())
        filtered = center_heatmaps_by_class(
            scene, axis_camera, HeatmapConfig(visibility_threshold=0.1)
        )
        assert sorted(filtered) == [0, 1]
        assert everything[1].grid.max() > 0.5
        assert not filtered[1].grid.any()
        np.testing.assert_array_equal(everything[0].grid, filtered[0].grid)


class TestCurvatureTarget:
    """Ground-truth curvature maps and visibility masking."""

    def _layout(self, square_mesh):
        near = Pose(np.eye(3), [0.0, 0.0, 1.0])
        far = Pose(np.eye(3), [0.2, 0.0, 2.0])
        return [square_mesh, square_mesh], [near, far]

    def test_visibility_fractions(self, axis_camera, square_mesh):
        meshes, poses = self._layout(square_mesh)
        # Far square spans columns 37..46; the near one hides 37..41.
        np.testing.assert_allclose(visibility_fractions(meshes, poses, axis_camera), [1.0, 0.5])

    def test_matches_renderer(self, axis_camera, square_mesh):
        meshes, poses = self._layout(square_mesh)
        target = curvature_target(meshes, poses, axis_camera)
        np.testing.assert_array_equal(
            target.grid, render_view(meshes, poses, axis_camera).curvature
        )
        assert target.kind == CURVATURE

    def test_visible_only_masks_weakly_visible_objects(self, axis_camera, square_mesh):
        meshes, poses = self._layout(square_mesh)
        full = curvature_target(meshes, poses, axis_camera).grid
        masked = curvature_target(
            meshes, poses, axis_camera, visible_only=True, visibility_threshold=0.6
        ).grid
        assert full[:, 44:].any()
        assert not masked[:, 44:].any()
        np.testing.assert_array_equal(masked[:, :42], full[:, :42])

    def test_visible_only_keeps_sufficiently_visible_objects(self, axis_camera, square_mesh):
        meshes, poses = self._layout(square_mesh)
        full = curvature_target(meshes, poses, axis_camera).grid
        masked = curvature_target(
            meshes, poses, axis_camera, visible_only=True, visibility_threshold=0.4
        ).grid
        np.testing.assert_array_equal(masked, full)

    def test_empty_scene(self, axis_camera):
        target = curvature_target([], [], axis_camera, visible_only=True)
        assert target.shape == (64, 64)
        assert not target.grid.any()


class TestCorrupt:
    """Gaussian noise injection."""

    def test_zero_noise_returns_equal_copy(self):
        heatmap = Heatmap(np.full((8, 8), 0.5))
        noisy = corrupt(heatmap, 0.0, rng=3)
        np.testing.assert_array_equal(noisy.grid, heatmap.grid)
        assert noisy.grid is not heatmap.grid

    def test_fixed_seed_is_deterministic(self):
        heatmap = Heatmap(np.full((16, 16), 0.5))
        a = corrupt(heatmap, 0.1, rng=7)
        b = corrupt(heatmap, 0.1, rng=7)
        c = corrupt(heatmap, 0.1, rng=8)
        np.testing.assert_array_equal(a.grid, b.grid)
        assert not np.array_equal(a.grid, c.grid)

    def test_center_maps_are_clamped(self):
        noisy = corrupt(Heatmap(np.full((32, 32), 0.5)), 2.0, rng=0)
        assert noisy.grid.min() == 0.0
        assert noisy.grid.max() == 1.0

    def test_curvature_maps_only_clamped_below(self):
        noisy = corrupt(Heatmap(np.full((32, 32), 0.5), kind=CURVATURE), 2.0, rng=0)
        assert noisy.grid.min() == 0.0
        assert noisy.grid.max() > 1.0

    def test_noise_on_zero_map_is_half_normal(self):
        sigma = 0.05
        noisy = corrupt(Heatmap(np.zeros((128, 128))), sigma, rng=0).grid
        positive = noisy[noisy > 0]
        assert 0.45 < positive.size / noisy.size < 0.55
        expected_mean = sigma * np.sqrt(2.0 / np.pi)
        standard_error = sigma * np.sqrt(1.0 - 2.0 / np.pi) / np.sqrt(positive.size)
        assert abs(positive.mean() - expected_mean) < 4.0 * standard_error

    def test_shared_generator_advances(self):
        heatmap = Heatmap(np.full((8, 8), 0.5))
        rng = np.random.default_rng(0)
        first = corrupt(heatmap, 0.1, rng)
        second = corrupt(heatmap, 0.1, rng)
        assert not np.array_equal(first.grid, second.grid)

    def test_negative_sigma_rejected(self):
        with pytest.raises(ValueError):
            corrupt(Heatmap(np.zeros((2, 2))), -0.1)


class TestDetectPeaks:
    """Non-maximum suppression over center heatmaps."""

    def test_single_blob(self, centered_camera, cube8):
        heatmap = center_heatmap([[0.0, 0.0, 1.0]], [cube8], centered_camera, HeatmapConfig())
        peaks = detect_peaks(heatmap, HeatmapConfig())
        assert [(p.row, p.col) for p in peaks] == [(32, 32)]
        assert peaks[0].score == 1.0
        np.testing.assert_array_equal(peaks[0].pixel, [32.5, 32.5])

    def test_zero_map_has_no_peaks(self):
        assert detect_peaks(Heatmap(np.zeros((32, 32))), HeatmapConfig()) == []

    def test_two_blobs_three_radii_apart(self, centered_camera, cube8):
        heatmap = center_heatmap(
            [[-0.12, 0.0, 1.0], [0.03, 0.0, 1.0]], [cube8, cube8], centered_camera, HeatmapConfig()
        )
        peaks = detect_peaks(heatmap, HeatmapConfig(peak_min_distance=5))
        assert sorted((p.row, p.col) for p in peaks) == [(32, 20), (32, 35)]
        assert all(p.score == pytest.approx(1.0) for p in peaks)

    def test_threshold_is_inclusive(self):
        grid = np.zeros((20, 20))
        grid[5, 5] = 0.3
        grid[15, 15] = 0.29
        peaks = detect_peaks(Heatmap(grid), HeatmapConfig(peak_threshold=0.3))
        assert [(p.row, p.col) for p in peaks] == [(5, 5)]

    def test_plateau_keeps_lexicographically_first_pixel(self):
        grid = np.zeros((20, 20))
        grid[10, 10] = grid[10, 11] = grid[11, 10] = 0.8
        peaks = detect_peaks(Heatmap(grid), HeatmapConfig())
        assert [(p.row, p.col) for p in peaks] == [(10, 10)]

    def test_peak_on_border(self):
        grid = np.zeros((12, 12))
        grid[0, 0] = 0.9
        peaks = detect_peaks(Heatmap(grid), HeatmapConfig())
        assert [(p.row, p.col) for p in peaks] == [(0, 0)]

    def test_sorted_by_descending_score(self):
        grid = np.zeros((40, 40))
        grid[5, 30] = 0.5
        grid[20, 5] = 0.9
        grid[35, 35] = 0.7
        peaks = detect_peaks(Heatmap(grid), HeatmapConfig())
        assert [p.score for p in peaks] == [0.9, 0.7, 0.5]

    def test_matches_brute_force_window_maxima(self):
        rng = np.random.default_rng(11)
        grid = rng.random((40, 40))
        config = HeatmapConfig(peak_min_distance=3, peak_threshold=0.5)
        r = config.peak_min_distance
        expected = set()
        for i in range(40):
            for j in range(40):
                window = grid[max(i - r, 0) : i + r + 1, max(j - r, 0) : j + r + 1]
                if grid[i, j] >= config.peak_threshold and grid[i, j] == window.max():
                    expected.add((i, j))
        found = {(p.row, p.col) for p in detect_peaks(Heatmap(grid), config)}
        assert found == expected
        assert found


class TestSynthesizeOracle:
    """Per-view oracle heatmaps for a generated scene."""

    def test_layout(self, small_scene):
        oracle = synthesize_oracle(small_scene, HeatmapConfig())
        assert oracle.n_views == len(small_scene.cameras)
        assert sorted(oracle.centers) == small_scene.class_ids_present()
        for cid, maps in oracle.centers.items():
            assert [m.view_index for m in maps] == list(range(oracle.n_views))
            assert all(m.class_id == cid and m.kind == CENTER for m in maps)
        assert all(c.shape == (80, 96) for c in oracle.curvature)

    def test_noise_touches_center_maps_only(self, small_scene):
        clean = synthesize_oracle(small_scene, HeatmapConfig(), seed=1)
        noisy = synthesize_oracle(small_scene, HeatmapConfig(noise_sigma=0.1), seed=1)
        again = synthesize_oracle(small_scene, HeatmapConfig(noise_sigma=0.1), seed=1)
        for a, b in zip(clean.curvature, noisy.curvature):
            np.testing.assert_array_equal(a.grid, b.grid)
        for cid in clean.centers:
            for a, b, c in zip(clean.centers[cid], noisy.centers[cid], again.centers[cid]):
                assert not np.array_equal(a.grid, b.grid)
                np.testing.assert_array_equal(b.grid, c.grid)
