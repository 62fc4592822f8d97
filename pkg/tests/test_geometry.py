"""Camera model, lift/project and bilinear sampling."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_camera
from monodyn.errors import InvalidArgumentError
from monodyn.geometry import CameraModel, in_domain, interpolate_bilinear, lift, pixel_grid, project


def _identity_camera(w: int = 4, h: int = 4) -> CameraModel:
    return CameraModel(np.eye(3), np.eye(4), w, h)


def _matrix_chain_lift(camera: CameraModel, u: np.ndarray, d: float) -> np.ndarray:
    """Independent oracle: homogeneous 4x4 chain E^-1 * [d * K^-1 * (u, 1); 1]."""
    K_inv = np.linalg.inv(camera.intrinsics)
    x_cam = d * (K_inv @ np.array([u[0], u[1], 1.0]))
    X = np.linalg.inv(camera.extrinsics) @ np.append(x_cam, 1.0)
    return X[:3] / X[3]


class TestCameraModel:
    def test_rejects_bad_intrinsics(self):
        K = np.eye(3)
        K[2, 2] = 2.0
        with pytest.raises(InvalidArgumentError):
            CameraModel(K, np.eye(4), 4, 4)
        with pytest.raises(InvalidArgumentError):
            CameraModel(np.diag([-1.0, 1.0, 1.0]), np.eye(4), 4, 4)

    def test_rejects_non_rotation(self):
        E = np.eye(4)
        E[0, 0] = -1.0  # reflection, det = -1
        with pytest.raises(InvalidArgumentError):
            CameraModel(np.eye(3), E, 4, 4)
        E = np.eye(4)
        E[0, 1] = 1e-3
        with pytest.raises(InvalidArgumentError):
            CameraModel(np.eye(3), E, 4, 4)

    def test_rejects_bad_size(self):
        with pytest.raises(InvalidArgumentError):
            CameraModel(np.eye(3), np.eye(4), 0, 4)

    def test_arrays_are_read_only(self):
        cam = _identity_camera()
        with pytest.raises(ValueError):
            cam.intrinsics[0, 0] = 5.0

    def test_record_round_trip(self):
        cam = random_camera(np.random.default_rng(3))
        back = CameraModel.from_record(cam.to_record())
        assert np.array_equal(back.intrinsics, cam.intrinsics)
        assert np.array_equal(back.extrinsics, cam.extrinsics)
        assert back.shape == cam.shape

    def test_center(self):
        cam = CameraModel.looking_from(np.eye(3), [1.0, -2.0, 3.0], 4, 4)
        assert np.allclose(cam.center, [1.0, -2.0, 3.0])


class TestLift:
    def test_identity_camera(self):
        assert np.array_equal(lift(_identity_camera(), [0.0, 0.0], 1.0), [0.0, 0.0, 1.0])

    def test_principal_point_ray(self):
        cam = CameraModel.from_params(100.0, 100.0, 50.0, 50.0, 101, 101)
        assert np.allclose(lift(cam, [50.0, 50.0], 2.0), [0.0, 0.0, 2.0])

    def test_matches_matrix_chain(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            cam = random_camera(rng)
            u = rng.uniform([0, 0], [cam.width - 1, cam.height - 1])
            d = rng.uniform(0.1, 50.0)
            assert np.allclose(lift(cam, u, d), _matrix_chain_lift(cam, u, d), rtol=1e-12, atol=1e-10)

    def test_vectorized_shapes(self):
        cam = random_camera(np.random.default_rng(0))
        uv = np.zeros((5, 7, 2))
        assert lift(cam, uv, np.ones((5, 7))).shape == (5, 7, 3)

    @pytest.mark.parametrize("uv,d", [([np.nan, 0.0], 1.0), ([0.0, 0.0], np.inf)])
    def test_non_finite_rejected(self, uv, d):
        with pytest.raises(InvalidArgumentError):
            lift(_identity_camera(), uv, d)

    @settings(max_examples=100, deadline=None)
    @given(seed=st.integers(0, 2**31), d=st.floats(0.05, 100.0))
    def test_linear_in_depth(self, seed, d):
        rng = np.random.default_rng(seed)
        cam = random_camera(rng)
        u = rng.uniform([0, 0], [cam.width - 1, cam.height - 1])
        near = lift(cam, u, d) - cam.center
        far = lift(cam, u, 2 * d) - cam.center
        assert np.allclose(far, 2 * near, rtol=1e-9, atol=1e-12 * d)


class TestProject:
    def test_identity_camera(self):
        p = project(_identity_camera(), [0.0, 0.0, 1.0])
        assert np.array_equal(p.uv, [0.0, 0.0]) and p.depth == 1.0

    def test_behind_camera_flag(self):
        p = project(_identity_camera(), np.array([[0.0, 0.0, -1.0], [0.0, 0.0, 2.0]]))
        assert p.behind.tolist() == [True, False]
        assert p.in_front.tolist() == [False, True]

    @settings(max_examples=100, deadline=None)
    @given(seed=st.integers(0, 2**31))
    def test_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        cam = random_camera(rng)
        uv = rng.uniform([0, 0], [cam.width - 1, cam.height - 1], size=(32, 2))
        d = rng.uniform(0.1, 100.0, size=32)
        back = project(cam, lift(cam, uv, d))
        assert np.max(np.abs(back.uv - uv)) < 1e-4
        assert np.max(np.abs(back.depth - d) / d) < 1e-6


class TestInterpolateBilinear:
    raster = np.array([[0.0, 1.0], [2.0, 3.0]])

    @pytest.mark.parametrize("uv,expected", [((0, 0), 0.0), ((0.5, 0.5), 1.5), ((-5, 0.5), 1.0), ((1, 1), 3.0), ((9, 9), 3.0)])
    def test_examples(self, uv, expected):
        assert interpolate_bilinear(self.raster, np.array(uv, dtype=float)) == pytest.approx(expected, abs=1e-15)

    def test_exact_at_lattice(self):
        r = np.random.default_rng(0).random((5, 6, 3))
        uv = pixel_grid(5, 6)
        assert np.array_equal(interpolate_bilinear(r, uv), r)

    @settings(max_examples=100, deadline=None)
    @given(a=st.floats(-10, 10), b=st.floats(-10, 10), c=st.floats(-10, 10),
           x=st.floats(0, 7), y=st.floats(0, 4))
    def test_exact_for_affine(self, a, b, c, x, y):
        grid = pixel_grid(5, 8)
        raster = a * grid[..., 0] + b * grid[..., 1] + c
        assert interpolate_bilinear(raster, np.array([x, y])) == pytest.approx(a * x + b * y + c, abs=1e-9)

    def test_empty_raster(self):
        with pytest.raises(InvalidArgumentError):
            interpolate_bilinear(np.zeros((0, 3)), np.zeros(2))

    def test_in_domain(self):
        uv = np.array([[0, 0], [3, 2], [3.01, 0], [-0.01, 1]])
        assert in_domain(uv, 4, 3).tolist() == [True, True, False, False]
