"""Inverse dilation of sparse depth maps.

Every output pixel takes the nearest (minimum) valid depth found in its
kernel neighborhood, so near surfaces occlude far ones while spreading.
"""

import logging

import cv2
import numpy as np

from models import CalibrationSet, DepthMap, LidarPointCloud, ProjectionConfig, StructuringElement
from projection import project

logger = logging.getLogger(__name__)

DEFAULT_KERNEL = "diamond:5"


def inverse_dilate(depth_map: DepthMap, kernel: StructuringElement) -> DepthMap:
    """Min over valid neighbors; the neighborhood is clipped at image borders"""
    source = np.where(depth_map.valid, depth_map.depth, np.inf)
    # erode takes the min over p + offset; dilation needs p - offset
    reflected = np.ascontiguousarray(kernel.mask[::-1, ::-1], dtype=np.uint8)
    nearest = cv2.erode(
        source,
        reflected,
        borderType=cv2.BORDER_CONSTANT,
        borderValue=float("inf"),
    )
    valid = nearest <= depth_map.max_depth
    nearest[~valid] = 0.0
    return DepthMap.from_trusted(nearest, valid, depth_map.max_depth)


def densify_frame(
    cloud: LidarPointCloud,
    calib: CalibrationSet,
    cfg: ProjectionConfig,
    kernel: StructuringElement,
) -> DepthMap:
    """Project one sweep and upsample it"""
    return inverse_dilate(project(cloud, calib, cfg), kernel)
