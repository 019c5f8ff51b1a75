import os
from pathlib import Path

import numpy as np
import pytest

from kitti_io import write_velodyne_bin
from models import CalibrationSet, DepthMap, LidarPointCloud

ON_AXIS_PROJECTION = np.array([
    [500.0, 0.0, 600.0, 0.0],
    [0.0, 500.0, 180.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
])

SMALL_PROJECTION = np.array([
    [60.0, 0.0, 32.0, 0.0],
    [0.0, 60.0, 24.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
])
SMALL_SIZE = (64, 48)


def format_row(values) -> str:
    return " ".join(repr(float(v)) for v in np.asarray(values).ravel())


def write_calib(path: Path, p2: np.ndarray, tr: np.ndarray, p0: np.ndarray = None) -> Path:
    p0 = p2 if p0 is None else p0
    lines = [
        f"P0: {format_row(p0)}",
        f"P1: {format_row(p0)}",
        f"P2: {format_row(p2)}",
        f"P3: {format_row(p2)}",
        f"Tr: {format_row(np.asarray(tr)[:3, :])}",
    ]
    path.write_text("\n".join(lines) + "\n")
    return path


def random_cloud(rng: np.random.Generator, count: int = 400) -> LidarPointCloud:
    """Points in front of an identity-extrinsic camera, mostly inside SMALL_SIZE"""
    z = rng.uniform(1.0, 60.0, count)
    x = rng.uniform(-0.6, 0.6, count) * z
    y = rng.uniform(-0.45, 0.45, count) * z
    reflectance = rng.uniform(0.0, 1.0, count)
    return LidarPointCloud(np.column_stack([x, y, z, reflectance]))


def make_sequence(root: Path, clouds, projection=SMALL_PROJECTION) -> Path:
    """KITTI layout with identity extrinsic: velodyne/NNNNNN.bin and calib.txt"""
    velodyne = root / "velodyne"
    velodyne.mkdir(parents=True)
    for index, cloud in enumerate(clouds):
        write_velodyne_bin(cloud, velodyne / f"{index:06d}.bin")
    write_calib(root / "calib.txt", projection, np.eye(4))
    return root


def random_sparse_map(rng: np.random.Generator, height: int, width: int, density: float) -> DepthMap:
    valid = rng.random((height, width)) < density
    depth = rng.uniform(0.5, 80.0, (height, width))
    return DepthMap(depth, valid)


@pytest.fixture
def rng():
    return np.random.default_rng(20220712)


@pytest.fixture
def on_axis_calib():
    return CalibrationSet(ON_AXIS_PROJECTION, np.eye(4), 1242, 375)


@pytest.fixture
def small_calib():
    return CalibrationSet(SMALL_PROJECTION, np.eye(4), *SMALL_SIZE)


@pytest.fixture
def small_sequence(tmp_path, rng):
    return make_sequence(tmp_path / "seq", [random_cloud(rng) for _ in range(3)])


@pytest.fixture(scope="session")
def kitti_sequence():
    root = os.environ.get("LIDEPTH_KITTI_SEQUENCE")
    if not root:
        pytest.skip("LIDEPTH_KITTI_SEQUENCE is not set; real KITTI Odometry frames unavailable")
    return Path(root)
