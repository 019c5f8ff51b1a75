"""Readers and writers for KITTI Odometry data and 16-bit depth PNGs.

Formats
-------
* velodyne ``.bin``: little-endian float32 quadruples (x, y, z, reflectance), no header
* ``calib.txt``: ``KEY: v1 ... v12`` lines for ``P0``..``P3`` and ``Tr``
* ``times.txt``: one timestamp in seconds per line
* poses: 12 numbers per line, row-major upper 3x4 of each pose
* depth PNG: single-channel uint16, value = depth_m * 256, 0 = invalid
"""

from __future__ import annotations

import logging
import os
from pathlib import Path
from typing import Optional, Union

import cv2
import numpy as np

from errors import (
    CalibrationParseError,
    DataIOError,
    DepthDecodeError,
    DepthEncodeError,
    MalformedScanError,
    PoseParseError,
)
from models import (
    CAMERAS,
    DEFAULT_MAX_DEPTH,
    CalibrationSet,
    DepthMap,
    LidarPointCloud,
    Trajectory,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, os.PathLike]

SCAN_RECORD = np.dtype("<f4")
SCAN_RECORD_BYTES = 16
DEPTH_SCALE = 256.0
UINT16_MAX = np.iinfo(np.uint16).max
PNG_DEPTH_CEILING = UINT16_MAX / DEPTH_SCALE


def _read_bytes(path: PathLike) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as e:
        raise DataIOError(f"cannot read {path}: {e}") from e


def _read_lines(path: PathLike) -> list[str]:
    try:
        return Path(path).read_text().splitlines()
    except OSError as e:
        raise DataIOError(f"cannot read {path}: {e}") from e


def _write_bytes(path: PathLike, payload: bytes) -> None:
    try:
        Path(path).write_bytes(payload)
    except OSError as e:
        raise DataIOError(f"cannot write {path}: {e}") from e


# ---------------------------------------------------------------------------
# Velodyne scans
# ---------------------------------------------------------------------------

def load_velodyne_bin(path: PathLike) -> LidarPointCloud:
    """Load a KITTI scan, dropping records with non-finite values"""
    raw = _read_bytes(path)
    if len(raw) % SCAN_RECORD_BYTES:
        raise MalformedScanError(
            f"{path}: size {len(raw)} is not a multiple of {SCAN_RECORD_BYTES} bytes"
        )
    records = np.frombuffer(raw, dtype=SCAN_RECORD).reshape(-1, 4)
    finite = np.all(np.isfinite(records), axis=1)
    dropped = int(np.count_nonzero(~finite))
    if dropped:
        logger.debug("%s: dropped %d non-finite points", path, dropped)
    return LidarPointCloud(records[finite], dropped)


def write_velodyne_bin(cloud: LidarPointCloud, path: PathLike) -> None:
    _write_bytes(path, cloud.points.astype(SCAN_RECORD).tobytes())


# ---------------------------------------------------------------------------
# Calibration
# ---------------------------------------------------------------------------

def _parse_calib_values(path: PathLike) -> dict[str, list[str]]:
    values = {}
    for line in _read_lines(path):
        key, sep, rest = line.partition(":")
        if sep:
            values[key.strip()] = rest.split()
    return values


def _calib_matrix(values: dict[str, list[str]], key: str, path: PathLike) -> np.ndarray:
    if key not in values:
        raise CalibrationParseError(f"{path}: missing '{key}:' line")
    tokens = values[key]
    if len(tokens) != 12:
        raise CalibrationParseError(f"{path}: '{key}' has {len(tokens)} values, expected 12")
    try:
        return np.array([float(t) for t in tokens], dtype=np.float64).reshape(3, 4)
    except ValueError as e:
        raise CalibrationParseError(f"{path}: '{key}' holds a non-numeric value") from e


def load_kitti_calib(
    path: PathLike, image_width: int, image_height: int, camera: str = "P2"
) -> CalibrationSet:
    """Read ``calib.txt``, selecting one camera's projection matrix"""
    if camera not in CAMERAS:
        raise CalibrationParseError(f"unknown camera '{camera}', expected one of {CAMERAS}")
    values = _parse_calib_values(path)
    projection = _calib_matrix(values, camera, path)
    extrinsic = np.vstack([_calib_matrix(values, "Tr", path), [0.0, 0.0, 0.0, 1.0]])
    try:
        return CalibrationSet(projection, extrinsic, image_width, image_height)
    except ValueError as e:
        raise CalibrationParseError(f"{path}: {e}") from e


def load_times(path: PathLike) -> np.ndarray:
    """Read ``times.txt`` as float seconds"""
    times = []
    for number, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        try:
            times.append(float(line))
        except ValueError as e:
            raise PoseParseError(f"{path}:{number}: not a timestamp: {line!r}") from e
    return np.array(times, dtype=np.float64)


# ---------------------------------------------------------------------------
# Depth maps
# ---------------------------------------------------------------------------

def encode_depth(depth_map: DepthMap) -> np.ndarray:
    """Quantize to the uint16 storage values of a depth PNG.

    A valid depth that would round to 0 is stored as 1 so validity
    survives the round trip.
    """
    scaled = np.floor(depth_map.depth * DEPTH_SCALE + 0.5)
    if scaled.max(initial=0.0) > UINT16_MAX:
        raise DepthEncodeError(
            f"depth {depth_map.depth.max():.3f} m exceeds the 16-bit range "
            f"({UINT16_MAX / DEPTH_SCALE:.3f} m)"
        )
    stored = np.where(depth_map.valid, np.maximum(scaled, 1.0), 0.0)
    return stored.astype(np.uint16)


def decode_depth(stored: np.ndarray, max_depth: float = DEFAULT_MAX_DEPTH) -> DepthMap:
    """Convert uint16 storage values back to meters.

    Values up to the quantized ceiling of ``max_depth`` are accepted and
    clamped to ``max_depth``, so any map this package writes reads back
    with the same ``max_depth``.
    """
    limit = np.floor(max_depth * DEPTH_SCALE + 0.5)
    if np.any(stored > limit):
        raise DepthDecodeError(f"depth {stored.max() / DEPTH_SCALE:.3f} m exceeds max_depth {max_depth} m")
    valid = stored > 0
    depth = np.minimum(stored.astype(np.float64) / DEPTH_SCALE, max_depth)
    return DepthMap(depth, valid, max_depth)


def write_depth_png(depth_map: DepthMap, path: PathLike) -> None:
    """Write a single-channel 16-bit PNG (KITTI depth convention)"""
    ok, buffer = cv2.imencode(".png", encode_depth(depth_map))
    if not ok:
        raise DataIOError(f"PNG encoding failed for {path}")
    _write_bytes(path, buffer.tobytes())


def read_depth_png(path: PathLike, max_depth: float = DEFAULT_MAX_DEPTH) -> DepthMap:
    raw = np.frombuffer(_read_bytes(path), dtype=np.uint8)
    image = cv2.imdecode(raw, cv2.IMREAD_UNCHANGED) if raw.size else None
    if image is None:
        raise DepthDecodeError(f"{path}: not a decodable image")
    if image.ndim != 2 or image.dtype != np.uint16:
        raise DepthDecodeError(
            f"{path}: expected single-channel 16-bit PNG, got {image.dtype} with shape {image.shape}"
        )
    try:
        return decode_depth(image, max_depth)
    except DepthDecodeError as e:
        raise DepthDecodeError(f"{path}: {e}") from e


def read_image_size(path: PathLike) -> tuple[int, int]:
    """Return (width, height) of an image file"""
    image = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if image is None:
        raise DataIOError(f"cannot read image {path}")
    return image.shape[1], image.shape[0]


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------

def load_trajectory(path: PathLike) -> Trajectory:
    poses = []
    for number, line in enumerate(_read_lines(path), start=1):
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) != 12:
            raise PoseParseError(f"{path}:{number}: expected 12 values, got {len(tokens)}")
        try:
            upper = np.array([float(t) for t in tokens], dtype=np.float64).reshape(3, 4)
        except ValueError as e:
            raise PoseParseError(f"{path}:{number}: non-numeric value") from e
        poses.append(np.vstack([upper, [0.0, 0.0, 0.0, 1.0]]))
    try:
        return Trajectory(np.array(poses) if poses else np.zeros((0, 4, 4)))
    except ValueError as e:
        raise PoseParseError(f"{path}: {e}") from e


def write_trajectory(trajectory: Trajectory, path: PathLike) -> None:
    lines = [
        " ".join(f"{value:.12e}" for value in pose[:3, :].ravel())
        for pose in trajectory.poses
    ]
    payload = "\n".join(lines) + ("\n" if lines else "")
    _write_bytes(path, payload.encode("ascii"))


# ---------------------------------------------------------------------------
# Sequence layout
# ---------------------------------------------------------------------------

class KittiSequence:
    """A KITTI Odometry sequence directory"""

    IMAGE_DIRS = {"P0": "image_0", "P1": "image_1", "P2": "image_2", "P3": "image_3"}

    def __init__(self, root: PathLike, camera: str = "P2"):
        if camera not in CAMERAS:
            raise ValueError(f"camera must be one of {CAMERAS}")
        self.root = Path(root)
        self.camera = camera

    @property
    def velodyne_dir(self) -> Path:
        return self.root / "velodyne"

    @property
    def calib_path(self) -> Path:
        return self.root / "calib.txt"

    @property
    def times_path(self) -> Path:
        return self.root / "times.txt"

    @property
    def image_dir(self) -> Path:
        return self.root / self.IMAGE_DIRS[self.camera]

    def scan_paths(self, frame_limit: Optional[int] = None) -> list[Path]:
        if not self.velodyne_dir.is_dir():
            raise DataIOError(f"no velodyne directory under {self.root}")
        paths = sorted(self.velodyne_dir.glob("*.bin"))
        return paths if frame_limit is None else paths[:frame_limit]

    @staticmethod
    def frame_id(path: PathLike) -> str:
        return Path(path).stem

    def image_size(self, width: Optional[int] = None, height: Optional[int] = None) -> tuple[int, int]:
        """Explicit dimensions win; otherwise the first camera image's header"""
        if width is not None and height is not None:
            return width, height
        images = sorted(self.image_dir.glob("*.png")) if self.image_dir.is_dir() else []
        if not images:
            raise DataIOError(
                f"image size unknown: no images under {self.image_dir}; pass --width and --height"
            )
        return read_image_size(images[0])

    def calibration(self, width: Optional[int] = None, height: Optional[int] = None) -> CalibrationSet:
        image_width, image_height = self.image_size(width, height)
        return load_kitti_calib(self.calib_path, image_width, image_height, self.camera)

    def times(self) -> np.ndarray:
        return load_times(self.times_path)
