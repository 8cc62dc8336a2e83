"""
Tests for rigid poses, pinhole projection and ray geometry.
"""

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from src.curvpose.core.errors import (
    BehindCameraError,
    ConfigError,
    InvalidPoseError,
    ParallelRaysError,
    SceneValidationError,
)
from src.curvpose.core.geometry import (
    Camera,
    Pose,
    Ray,
    compose,
    inverse,
    look_at,
    pixel_ray,
    project,
    ray_pair_midpoint,
)


def _random_pose(rng) -> Pose:
    return Pose(Rotation.random(random_state=rng).as_matrix(), rng.normal(size=3))


class TestPose:
    """Pose construction and algebra."""

    def test_compose_with_identity(self):
        rng = np.random.default_rng(0)
        pose = _random_pose(rng)
        assert compose(Pose.identity(), pose).allclose(pose, atol=1e-15)
        assert compose(pose, Pose.identity()).allclose(pose, atol=1e-15)

    def test_compose_with_inverse_is_identity(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            pose = _random_pose(rng)
            assert compose(pose, inverse(pose)).allclose(Pose.identity(), atol=1e-12)
            assert (pose.inverse() @ pose).allclose(Pose.identity(), atol=1e-12)

    def test_compose_matches_homogeneous_product(self):
        rng = np.random.default_rng(2)
        a, b = _random_pose(rng), _random_pose(rng)
        expected = a.as_matrix() @ b.as_matrix()
        np.testing.assert_allclose(compose(a, b).as_matrix(), expected, atol=1e-12)

    def test_transform_applies_b_first(self):
        rng = np.random.default_rng(3)
        a, b = _random_pose(rng), _random_pose(rng)
        points = rng.normal(size=(5, 3))
        np.testing.assert_allclose(
            (a @ b).transform(points), a.transform(b.transform(points)), atol=1e-12
        )

    def test_rejects_non_orthonormal_rotation(self):
        with pytest.raises(InvalidPoseError):
            Pose(np.diag([1.0, 1.0, 2.0]), np.zeros(3))

    def test_rejects_reflection(self):
        with pytest.raises(InvalidPoseError):
            Pose(np.diag([1.0, 1.0, -1.0]), np.zeros(3))

    def test_rejects_non_finite_translation(self):
        with pytest.raises(InvalidPoseError):
            Pose(np.eye(3), [0.0, np.nan, 0.0])

    def test_rotvec_round_trip(self):
        pose = Pose.from_rotvec([0.1, -0.2, 0.3], [1.0, 2.0, 3.0])
        np.testing.assert_allclose(pose.as_rotvec(), [0.1, -0.2, 0.3], atol=1e-12)

    def test_pose_is_immutable(self):
        pose = Pose.identity()
        with pytest.raises(ValueError):
            pose.rotation[0, 0] = 2.0


class TestProjection:
    """Pinhole projection and back-projection."""

    def test_optical_axis_projects_to_principal_point(self, camera_factory):
        camera = camera_factory(width=320, height=240, focal=500.0, cx=160.0, cy=120.0)
        np.testing.assert_allclose(project(camera, [0.0, 0.0, 1.0]), [160.0, 120.0])

    def test_offset_point(self, camera_factory):
        camera = camera_factory(width=320, height=240, focal=500.0, cx=160.0, cy=120.0)
        np.testing.assert_allclose(project(camera, [0.1, 0.0, 1.0]), [210.0, 120.0])

    def test_matches_projection_matrix(self, camera_factory):
        rng = np.random.default_rng(4)
        extrinsics = Pose(Rotation.random(random_state=rng).as_matrix(), [0.0, 0.0, 3.0])
        camera = camera_factory(width=320, height=240, focal=450.0, world_to_cam=extrinsics)
        p = extrinsics.inverse().transform(np.array([0.2, -0.1, 1.5]))
        homogeneous = camera.intrinsics @ extrinsics.as_matrix()[:3] @ np.append(p, 1.0)
        np.testing.assert_allclose(project(camera, p), homogeneous[:2] / homogeneous[2])

    def test_point_behind_camera_raises(self, axis_camera):
        with pytest.raises(BehindCameraError):
            project(axis_camera, [0.0, 0.0, -1.0])

    def test_vectorized_projection_marks_behind_points(self, axis_camera):
        pixels, depths = axis_camera.project_points([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]])
        assert depths.tolist() == [1.0, -1.0]
        assert np.all(np.isnan(pixels[1]))

    def test_principal_point_ray_is_optical_axis(self, axis_camera):
        ray = pixel_ray(axis_camera, [axis_camera.cx, axis_camera.cy])
        np.testing.assert_allclose(ray.origin, np.zeros(3))
        np.testing.assert_allclose(ray.direction, [0.0, 0.0, 1.0])

    def test_rays_from_two_cameras_hit_the_point(self, camera_factory):
        point = np.array([0.05, -0.02, 0.1])
        cameras = [
            camera_factory(320, 256, 400.0, world_to_cam=look_at(eye, [0.0, 0.0, 0.0]))
            for eye in ([0.8, 0.0, 0.6], [0.0, 0.8, 0.6])
        ]
        for camera in cameras:
            ray = pixel_ray(camera, project(camera, point))
            offset = point - ray.origin
            residual = offset - (offset @ ray.direction) * ray.direction
            assert np.linalg.norm(residual) < 1e-12

    def test_look_at_centers_target(self, camera_factory):
        camera = camera_factory(world_to_cam=look_at([1.0, -0.5, 0.7], [0.1, 0.2, 0.0]))
        np.testing.assert_allclose(project(camera, [0.1, 0.2, 0.0]), [32.0, 32.0], atol=1e-9)
        np.testing.assert_allclose(camera.center, [1.0, -0.5, 0.7], atol=1e-12)

    def test_look_at_along_up_vector_raises(self):
        with pytest.raises(ConfigError):
            look_at([0.0, 0.0, 1.0], [0.0, 0.0, 0.0])

    def test_camera_rejects_bad_focal(self):
        with pytest.raises(ConfigError):
            Camera(0.0, 1.0, 0.0, 0.0, 10, 10, Pose.identity())

    def test_camera_entry_with_text_field_is_a_validation_error(self, axis_camera):
        entry = axis_camera.to_dict()
        assert Camera.from_dict(entry).fx == axis_camera.fx
        entry["fy"] = "focal"
        with pytest.raises(SceneValidationError):
            Camera.from_dict(entry)


class TestRayPairMidpoint:
    """Closest points between two rays."""

    def test_intersecting_rays(self):
        a = Ray([-1.0, 0.0, 0.0], [1.0, 0.0, 0.0])
        b = Ray([0.0, -1.0, 0.0], [0.0, 1.0, 0.0])
        midpoint, gap = ray_pair_midpoint(a, b)
        np.testing.assert_allclose(midpoint, np.zeros(3), atol=1e-15)
        assert gap == pytest.approx(0.0, abs=1e-15)

    def test_parallel_rays_raise(self):
        a = Ray([0.0, 0.0, 0.0], [0.0, 0.0, 1.0])
        b = Ray([1.0, 0.0, 0.0], [0.0, 0.0, 1.0])
        with pytest.raises(ParallelRaysError):
            ray_pair_midpoint(a, b)

    def test_skew_rays_with_known_closest_points(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            da, db = rng.normal(size=3), rng.normal(size=3)
            da /= np.linalg.norm(da)
            db /= np.linalg.norm(db)
            normal = np.cross(da, db)
            normal /= np.linalg.norm(normal)
            p = rng.normal(size=3)
            q = p + 0.3 * normal
            a = Ray(p - 2.0 * da, da)
            b = Ray(q - 3.0 * db, db)
            midpoint, gap = ray_pair_midpoint(a, b)
            np.testing.assert_allclose(midpoint, 0.5 * (p + q), atol=1e-9)
            assert gap == pytest.approx(0.3, abs=1e-9)

    def test_closest_point_behind_origin_is_clamped(self):
        a = Ray([0.0, 0.0, 0.0], [1.0, 0.0, 0.0])
        b = Ray([-1.0, 1.0, 0.0], [0.0, 1.0, 0.0])
        midpoint, gap = ray_pair_midpoint(a, b)
        # Unconstrained closest points would need negative parameters on both rays.
        assert gap == pytest.approx(np.sqrt(2.0))
        np.testing.assert_allclose(midpoint, [-0.5, 0.5, 0.0])

    def test_swapping_the_rays_changes_nothing(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            a = Ray(rng.uniform(-1.0, 1.0, size=3), rng.normal(size=3))
            b = Ray(rng.uniform(-1.0, 1.0, size=3), rng.normal(size=3))
            m_ab, gap_ab = ray_pair_midpoint(a, b)
            m_ba, gap_ba = ray_pair_midpoint(b, a)
            np.testing.assert_allclose(m_ab, m_ba, atol=1e-12)
            assert gap_ab == pytest.approx(gap_ba, abs=1e-12)

    def test_matches_grid_search_over_ray_parameters(self):
        rng = np.random.default_rng(12)
        checked = 0
        while checked < 40:
            a = Ray(rng.uniform(-1.0, 1.0, size=3), rng.normal(size=3))
            b = Ray(rng.uniform(-1.0, 1.0, size=3), rng.normal(size=3))
            if abs(float(a.direction @ b.direction)) > 0.8:
                continue
            midpoint, gap = ray_pair_midpoint(a, b)
            pa, pb = _closest_points_by_grid_search(a, b)
            assert gap == pytest.approx(float(np.linalg.norm(pa - pb)), abs=1e-9)
            np.testing.assert_allclose(midpoint, 0.5 * (pa + pb), atol=1e-6)
            checked += 1


def _closest_points_by_grid_search(a: Ray, b: Ray, span: float = 50.0, levels: int = 11):
    """Zooming grid search over (s, t) in [0, span]^2."""
    lo, hi = np.zeros(2), np.full(2, span)
    n = 201
    for _ in range(levels):
        s = np.linspace(lo[0], hi[0], n)
        t = np.linspace(lo[1], hi[1], n)
        pa = a.origin + s[:, None] * a.direction
        pb = b.origin + t[:, None] * b.direction
        dist = np.linalg.norm(pa[:, None, :] - pb[None, :, :], axis=2)
        i, j = np.unravel_index(int(np.argmin(dist)), dist.shape)
        best = np.array([s[i], t[j]])
        step = (hi - lo) / (n - 1)
        lo, hi = np.maximum(best - 4.0 * step, 0.0), best + 4.0 * step
        n = 81
    return a.point_at(best[0]), b.point_at(best[1])
