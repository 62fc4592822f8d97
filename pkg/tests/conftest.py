from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from monodyn.geometry import CameraModel
from monodyn.synthetic import SyntheticConfig, build_scene


def random_camera(rng: np.random.Generator, width: int = 640, height: int = 480) -> CameraModel:
    f = rng.uniform(200.0, 1200.0)
    R = Rotation.random(random_state=rng).as_matrix()
    t = rng.uniform(-2.0, 2.0, size=3)
    return CameraModel.from_params(f, f * rng.uniform(0.9, 1.1), width / 2 + rng.uniform(-20, 20),
                                   height / 2 + rng.uniform(-20, 20), width, height, R, t)


def small_config(size: int = 64, **changes) -> SyntheticConfig:
    base = SyntheticConfig()
    return replace(base, width=size, height=size, focal=base.focal * size / base.width, **changes)


@pytest.fixture(scope="session")
def small_scene():
    cfg = small_config()
    return cfg, build_scene(cfg)


@pytest.fixture(scope="session")
def full_scene():
    cfg = SyntheticConfig()
    return cfg, build_scene(cfg)
