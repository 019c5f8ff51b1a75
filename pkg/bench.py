"""Per-frame latency of the projection and upsampling stages over a sequence."""

import logging
import os
import statistics
import time
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import pandas as pd

from densify import densify_frame, inverse_dilate
from errors import DataIOError, EmptyEvaluationError, ParseError
from kitti_io import KittiSequence, load_velodyne_bin
from models import (
    CalibrationSet,
    DepthMap,
    FrameTiming,
    LidarPointCloud,
    ProjectionConfig,
    RuntimeStats,
    StageStats,
    StructuringElement,
)
from projection import project

logger = logging.getLogger(__name__)

DEFAULT_WARMUP = 5
CSV_COLUMNS = ["frame", "projection_ms", "upsampling_ms", "total_ms"]


@dataclass(frozen=True)
class BenchResult:
    stats: RuntimeStats
    frames: list[FrameTiming]


def _elapsed_ms(start_ns: int, end_ns: int) -> float:
    return (end_ns - start_ns) / 1e6


def time_frame(
    frame: str,
    cloud: LidarPointCloud,
    calib: CalibrationSet,
    cfg: ProjectionConfig,
    kernel: StructuringElement,
) -> tuple[FrameTiming, DepthMap]:
    """Time project, inverse_dilate and the fused densify_frame on one sweep"""
    start = time.perf_counter_ns()
    sparse = project(cloud, calib, cfg)
    projected = time.perf_counter_ns()
    inverse_dilate(sparse, kernel)
    upsampled = time.perf_counter_ns()
    dense = densify_frame(cloud, calib, cfg, kernel)
    fused = time.perf_counter_ns()
    timing = FrameTiming(
        frame=frame,
        projection_ms=_elapsed_ms(start, projected),
        upsampling_ms=_elapsed_ms(projected, upsampled),
        total_ms=_elapsed_ms(upsampled, fused),
    )
    return timing, dense


def stage_stats(samples_ms: Sequence[float]) -> StageStats:
    """Min, lower median and max"""
    return StageStats(
        min_ms=min(samples_ms),
        median_ms=statistics.median_low(samples_ms),
        max_ms=max(samples_ms),
        samples=len(samples_ms),
    )


def runtime_stats(frames: Sequence[FrameTiming], skipped: int = 0) -> RuntimeStats:
    if not frames:
        raise EmptyEvaluationError("no timed frames")
    return RuntimeStats(
        projection=stage_stats([f.projection_ms for f in frames]),
        upsampling=stage_stats([f.upsampling_ms for f in frames]),
        total=stage_stats([f.total_ms for f in frames]),
        skipped=skipped,
    )


def bench_sequence(
    sequence_dir: Union[str, os.PathLike],
    frame_limit: Optional[int] = None,
    kernel: StructuringElement = StructuringElement.diamond(5),
    warmup: int = DEFAULT_WARMUP,
    camera: str = "P2",
    cfg: ProjectionConfig = ProjectionConfig(),
    image_width: Optional[int] = None,
    image_height: Optional[int] = None,
) -> BenchResult:
    """Time every scan in a KITTI sequence, excluding the first ``warmup`` frames.

    ``frame_limit`` caps the frames executed, warmup included. Unreadable
    scans are skipped and counted.
    """
    if warmup < 0:
        raise ValueError("warmup must be >= 0")
    sequence = KittiSequence(sequence_dir, camera)
    calib = sequence.calibration(image_width, image_height)
    paths = sequence.scan_paths()
    if frame_limit is not None and frame_limit > len(paths):
        logger.warning("frame limit %d exceeds the %d available scans", frame_limit, len(paths))
    paths = paths if frame_limit is None else paths[:frame_limit]

    timed, skipped, executed = [], 0, 0
    for path in paths:
        try:
            cloud = load_velodyne_bin(path)
        except (ParseError, DataIOError) as e:
            skipped += 1
            logger.warning("skipping %s: %s", path.name, e)
            continue
        timing, _ = time_frame(sequence.frame_id(path), cloud, calib, cfg, kernel)
        executed += 1
        if executed > warmup:
            timed.append(timing)

    logger.info("timed %d frames (%d warmup, %d skipped)", len(timed), min(executed, warmup), skipped)
    return BenchResult(runtime_stats(timed, skipped), timed)


def write_bench_csv(frames: Sequence[FrameTiming], path: Union[str, os.PathLike]) -> None:
    table = pd.DataFrame(
        [(t.frame, t.projection_ms, t.upsampling_ms, t.total_ms) for t in frames],
        columns=CSV_COLUMNS,
    )
    try:
        table.to_csv(path, index=False, float_format="%.4f")
    except OSError as e:
        raise DataIOError(f"cannot write {path}: {e}") from e
