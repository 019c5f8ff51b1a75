"""Rasterize a LiDAR sweep into a sparse camera depth map.

Y = P2 * Tr * X, pixel = round(u / w, v / w), nearest z_cam wins per pixel.
"""

import logging

import numpy as np

from models import CalibrationSet, DepthMap, LidarPointCloud, ProjectionConfig

logger = logging.getLogger(__name__)


def round_half_away(values: np.ndarray) -> np.ndarray:
    """Round to nearest integer, ties away from zero"""
    magnitude = np.abs(values)
    whole = np.floor(magnitude)
    # magnitude - whole is exact, so ties are detected without the +0.5 carry error
    whole += (magnitude - whole) >= 0.5
    return np.copysign(whole, values)


def _apply_rows(matrix: np.ndarray, x: np.ndarray, y: np.ndarray, z: np.ndarray) -> list[np.ndarray]:
    # Explicit per-row sums keep results bit-identical to a scalar evaluation.
    return [row[0] * x + row[1] * y + row[2] * z + row[3] for row in matrix]


def to_camera_frame(cloud: LidarPointCloud, calib: CalibrationSet) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Transform points into the rectified camera frame"""
    xyz = cloud.xyz.astype(np.float64)
    x_cam, y_cam, z_cam = _apply_rows(calib.lidar_to_cam[:3], xyz[:, 0], xyz[:, 1], xyz[:, 2])
    return x_cam, y_cam, z_cam


def project(cloud: LidarPointCloud, calib: CalibrationSet, cfg: ProjectionConfig = ProjectionConfig()) -> DepthMap:
    """Project a sweep into a sparse depth map storing camera-frame z"""
    width, height = calib.image_size

    x_cam, y_cam, z_cam = to_camera_frame(cloud, calib)
    in_range = (z_cam > cfg.min_depth) & (z_cam <= cfg.max_depth)
    x_cam, y_cam, z_cam = x_cam[in_range], y_cam[in_range], z_cam[in_range]

    u, v, w = _apply_rows(calib.projection, x_cam, y_cam, z_cam)
    in_front = w > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        px = round_half_away(u / w)
        py = round_half_away(v / w)
    inside = in_front & (px >= 0) & (px < width) & (py >= 0) & (py < height)

    flat = py[inside].astype(np.intp) * width + px[inside].astype(np.intp)
    # z-buffer: unbuffered per-pixel minimum
    depth = np.full(height * width, np.inf)
    np.minimum.at(depth, flat, z_cam[inside].astype(np.float64))
    valid = np.isfinite(depth)
    depth[~valid] = 0.0
    logger.debug("projected %d of %d points onto %d pixels", flat.size, len(cloud), int(valid.sum()))
    return DepthMap.from_trusted(depth.reshape(height, width), valid.reshape(height, width), cfg.max_depth)


def sparsity(depth_map: DepthMap) -> float:
    """Fraction of invalid pixels"""
    return 1.0 - np.count_nonzero(depth_map.valid) / depth_map.valid.size
