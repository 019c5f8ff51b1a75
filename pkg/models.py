from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

DEFAULT_MAX_DEPTH = 80.0
ROTATION_TOLERANCE = 1e-6
CAMERAS = ("P0", "P1", "P2", "P3")


def _frozen(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


def is_rotation(rotation: np.ndarray, tolerance: float = ROTATION_TOLERANCE) -> bool:
    """Check orthonormality and det +1 of a 3x3 block"""
    if rotation.shape != (3, 3) or not np.all(np.isfinite(rotation)):
        return False
    if np.max(np.abs(rotation @ rotation.T - np.eye(3))) > tolerance:
        return False
    return abs(np.linalg.det(rotation) - 1.0) <= tolerance


@dataclass(frozen=True)
class LidarPointCloud:
    """One LiDAR sweep in the sensor frame.

    ``points`` is an ``(N, 4)`` float32 array of x, y, z (meters) and
    reflectance. ``dropped`` counts non-finite records discarded at load.
    """

    points: np.ndarray
    dropped: int = 0

    def __post_init__(self):
        points = np.array(self.points, dtype=np.float32).reshape(-1, 4)
        if not np.all(np.isfinite(points)):
            raise ValueError("point cloud contains non-finite values")
        if self.dropped < 0:
            raise ValueError("dropped count must be non-negative")
        object.__setattr__(self, "points", _frozen(points))

    def __len__(self):
        return self.points.shape[0]

    @property
    def xyz(self) -> np.ndarray:
        return self.points[:, :3]

    @property
    def reflectance(self) -> np.ndarray:
        return self.points[:, 3]

    @classmethod
    def empty(cls) -> "LidarPointCloud":
        return cls(np.zeros((0, 4), dtype=np.float32))


@dataclass(frozen=True)
class CalibrationSet:
    """Camera projection (KITTI ``P2``) and LiDAR to camera transform (``Tr``)"""

    projection: np.ndarray
    lidar_to_cam: np.ndarray
    image_width: int
    image_height: int

    def __post_init__(self):
        projection = np.array(self.projection, dtype=np.float64)
        lidar_to_cam = np.array(self.lidar_to_cam, dtype=np.float64)
        if projection.shape != (3, 4) or not np.all(np.isfinite(projection)):
            raise ValueError("projection must be a finite 3x4 matrix")
        if lidar_to_cam.shape == (3, 4):
            lidar_to_cam = np.vstack([lidar_to_cam, [0.0, 0.0, 0.0, 1.0]])
        if lidar_to_cam.shape != (4, 4):
            raise ValueError("lidar_to_cam must be 3x4 or 4x4")
        if not np.array_equal(lidar_to_cam[3], [0.0, 0.0, 0.0, 1.0]):
            raise ValueError("lidar_to_cam bottom row must be 0 0 0 1")
        if not is_rotation(lidar_to_cam[:3, :3]):
            raise ValueError("lidar_to_cam rotation is not orthonormal with det +1")
        if not np.all(np.isfinite(lidar_to_cam[:3, 3])):
            raise ValueError("lidar_to_cam translation must be finite")
        if projection[0, 0] <= 0 or projection[1, 1] <= 0:
            raise ValueError("focal lengths must be positive")
        if int(self.image_width) <= 0 or int(self.image_height) <= 0:
            raise ValueError("image dimensions must be positive")
        object.__setattr__(self, "projection", _frozen(projection))
        object.__setattr__(self, "lidar_to_cam", _frozen(lidar_to_cam))
        object.__setattr__(self, "image_width", int(self.image_width))
        object.__setattr__(self, "image_height", int(self.image_height))

    @property
    def image_size(self) -> tuple[int, int]:
        return self.image_width, self.image_height


@dataclass(frozen=True)
class DepthMap:
    """Per-pixel depth in meters with a validity mask.

    Invalid pixels always hold 0 so that encoding is deterministic.
    """

    depth: np.ndarray
    valid: np.ndarray
    max_depth: float = DEFAULT_MAX_DEPTH

    def __post_init__(self):
        depth = np.array(self.depth, dtype=np.float64)
        valid = np.array(self.valid, dtype=bool)
        if depth.ndim != 2 or depth.shape != valid.shape:
            raise ValueError("depth and valid must be 2-D arrays of equal shape")
        if depth.shape[0] == 0 or depth.shape[1] == 0:
            raise ValueError("depth map must have positive dimensions")
        depth[~valid] = 0.0
        values = depth[valid]
        if values.size and not (np.all(values > 0) and np.all(values <= self.max_depth)):
            raise ValueError(f"valid depths must lie in (0, {self.max_depth}]")
        object.__setattr__(self, "depth", _frozen(depth))
        object.__setattr__(self, "valid", _frozen(valid))

    @property
    def width(self) -> int:
        return self.depth.shape[1]

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.depth.shape

    @classmethod
    def empty(cls, width: int, height: int, max_depth: float = DEFAULT_MAX_DEPTH) -> "DepthMap":
        """All-invalid map"""
        return cls(np.zeros((height, width)), np.zeros((height, width), dtype=bool), max_depth)

    @classmethod
    def from_depth(cls, depth: np.ndarray, max_depth: float = DEFAULT_MAX_DEPTH) -> "DepthMap":
        """Build a map treating every positive value as valid"""
        depth = np.asarray(depth, dtype=np.float64)
        return cls(depth, depth > 0, max_depth)

    @classmethod
    def from_trusted(cls, depth: np.ndarray, valid: np.ndarray, max_depth: float = DEFAULT_MAX_DEPTH) -> "DepthMap":
        """Wrap float64/bool arrays that already hold 0 at invalid pixels, without copying.

        The caller gives up ownership: both arrays are frozen in place.
        """
        depth_map = object.__new__(cls)
        object.__setattr__(depth_map, "depth", _frozen(depth))
        object.__setattr__(depth_map, "valid", _frozen(valid))
        object.__setattr__(depth_map, "max_depth", max_depth)
        return depth_map

    def same_as(self, other: "DepthMap") -> bool:
        return (
            self.shape == other.shape
            and np.array_equal(self.valid, other.valid)
            and np.array_equal(self.depth, other.depth)
        )


@dataclass(frozen=True)
class Trajectory:
    """Camera-to-world poses, one 4x4 rigid transform per frame"""

    poses: np.ndarray

    def __post_init__(self):
        poses = np.array(self.poses, dtype=np.float64)
        if poses.size == 0:
            poses = np.zeros((0, 4, 4))
        if poses.ndim != 3 or poses.shape[1:] != (4, 4):
            raise ValueError("poses must have shape (N, 4, 4)")
        for index, pose in enumerate(poses):
            if not np.array_equal(pose[3], [0.0, 0.0, 0.0, 1.0]):
                raise ValueError(f"pose {index}: bottom row must be 0 0 0 1")
            if not is_rotation(pose[:3, :3]):
                raise ValueError(f"pose {index}: rotation is not orthonormal with det +1")
            if not np.all(np.isfinite(pose[:3, 3])):
                raise ValueError(f"pose {index}: translation must be finite")
        object.__setattr__(self, "poses", _frozen(poses))

    def __len__(self):
        return self.poses.shape[0]

    @property
    def positions(self) -> np.ndarray:
        return self.poses[:, :3, 3]

    def transformed(self, transform: np.ndarray) -> "Trajectory":
        """Left-multiply every pose by a rigid transform"""
        return Trajectory(np.einsum("ij,njk->nik", transform, self.poses))


@dataclass(frozen=True)
class StructuringElement:
    """Boolean kernel with its origin at the center cell"""

    mask: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        mask = np.array(self.mask, dtype=bool)
        if mask.ndim != 2 or mask.shape[0] != mask.shape[1]:
            raise ValueError("kernel mask must be square")
        n = mask.shape[0]
        if n < 1 or n % 2 == 0:
            raise ValueError("kernel size must be odd and >= 1")
        if not mask[n // 2, n // 2]:
            raise ValueError("kernel center cell must be active")
        object.__setattr__(self, "mask", _frozen(mask))

    @property
    def size(self) -> int:
        return self.mask.shape[0]

    @property
    def origin(self) -> tuple[int, int]:
        return self.size // 2, self.size // 2

    @property
    def active_cells(self) -> int:
        return int(self.mask.sum())

    @property
    def spec(self) -> str:
        return f"{self.name}:{self.size}"

    @staticmethod
    def _check_size(n: int) -> int:
        if n < 1 or n % 2 == 0:
            raise ValueError(f"kernel size must be odd and >= 1, got {n}")
        return n

    @classmethod
    def diamond(cls, n: int) -> "StructuringElement":
        """Cells within Manhattan distance (n-1)/2 of the center"""
        c = cls._check_size(n) // 2
        i, j = np.indices((n, n))
        return cls(np.abs(i - c) + np.abs(j - c) <= c, "diamond")

    @classmethod
    def full(cls, n: int) -> "StructuringElement":
        return cls(np.ones((cls._check_size(n),) * 2, dtype=bool), "full")

    @classmethod
    def cross(cls, n: int) -> "StructuringElement":
        c = cls._check_size(n) // 2
        mask = np.zeros((n, n), dtype=bool)
        mask[c, :] = True
        mask[:, c] = True
        return cls(mask, "cross")

    @classmethod
    def from_spec(cls, spec: str) -> "StructuringElement":
        """Parse ``name:size``, e.g. ``diamond:5``"""
        name, sep, size = spec.strip().partition(":")
        builders = {"diamond": cls.diamond, "full": cls.full, "cross": cls.cross}
        if not sep or name not in builders:
            raise ValueError(f"unknown kernel '{spec}', expected one of {sorted(builders)} as name:size")
        try:
            n = int(size)
        except ValueError:
            raise ValueError(f"kernel size must be an integer in '{spec}'") from None
        return builders[name](n)


@dataclass(frozen=True)
class ProjectionConfig:
    min_depth: float = 0.0
    max_depth: float = DEFAULT_MAX_DEPTH

    def __post_init__(self):
        if not (0.0 <= self.min_depth < self.max_depth):
            raise ValueError("projection config requires 0 <= min_depth < max_depth")


@dataclass(frozen=True)
class EvalCrop:
    """Rows above ``floor(height * top_ignore_fraction)`` are ignored"""

    top_ignore_fraction: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.top_ignore_fraction < 1.0):
            raise ValueError("top_ignore_fraction must be in [0, 1)")

    @classmethod
    def learned(cls) -> "EvalCrop":
        return cls(0.30)

    def first_row(self, height: int) -> int:
        return int(math.floor(height * self.top_ignore_fraction))


@dataclass(frozen=True)
class DepthErrorReport:
    mae: float
    rmse: float
    evaluated_pixels: int
    gt_valid_pixels: int
    pred_sparsity: float

    @property
    def gt_coverage(self) -> float:
        if self.gt_valid_pixels == 0:
            return 0.0
        return self.evaluated_pixels / self.gt_valid_pixels


@dataclass(frozen=True)
class SegmentError:
    """Mean drift over all segments of one length"""

    length: float
    t_err_percent: float
    r_err_rad_per_m: float
    segment_count: int

    @property
    def r_err_deg_per_100m(self) -> float:
        return math.degrees(self.r_err_rad_per_m) * 100.0


@dataclass(frozen=True)
class OdometryErrorReport:
    per_length: dict[float, SegmentError]
    avg_t_err_percent: float
    avg_r_err_rad_per_m: float
    segment_total: int

    @property
    def avg_r_err_deg_per_100m(self) -> float:
        return math.degrees(self.avg_r_err_rad_per_m) * 100.0


@dataclass(frozen=True)
class StageStats:
    min_ms: float
    median_ms: float
    max_ms: float
    samples: int


@dataclass(frozen=True)
class RuntimeStats:
    projection: StageStats
    upsampling: StageStats
    total: StageStats
    skipped: int = 0


@dataclass(frozen=True)
class FrameTiming:
    frame: str
    projection_ms: float
    upsampling_ms: float
    total_ms: float


@dataclass(frozen=True)
class PipelineConfig:
    sequence_dir: Path
    output_dir: Path
    kernel: StructuringElement = field(default_factory=lambda: StructuringElement.diamond(5))
    camera: str = "P2"
    projection: ProjectionConfig = field(default_factory=ProjectionConfig)
    workers: int = 1
    image_width: Optional[int] = None
    image_height: Optional[int] = None
    frame_limit: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "sequence_dir", Path(self.sequence_dir))
        object.__setattr__(self, "output_dir", Path(self.output_dir))
        if self.sequence_dir.resolve() == self.output_dir.resolve():
            raise ValueError("output directory must differ from the sequence directory")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.camera not in CAMERAS:
            raise ValueError(f"camera must be one of {CAMERAS}")


@dataclass(frozen=True)
class PipelineSummary:
    frames_processed: int
    failures: list[tuple[str, str]]
    mean_sparsity_before: float
    mean_sparsity_after: float

    @property
    def ok(self) -> bool:
        return not self.failures
