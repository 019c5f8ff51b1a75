import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from pathlib import Path
from typing import Optional, Sequence

from tqdm import tqdm

from densify import inverse_dilate
from depth_eval import aggregate_reports, eval_depth
from errors import DataIOError, EmptyEvaluationError, LidepthError
from kitti_io import PNG_DEPTH_CEILING, KittiSequence, load_velodyne_bin, read_depth_png, write_depth_png
from models import (
    CalibrationSet,
    DepthErrorReport,
    EvalCrop,
    PipelineConfig,
    PipelineSummary,
    ProjectionConfig,
    StructuringElement,
)
from projection import project, sparsity

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FrameOutcome:
    frame_id: str
    ok: bool
    message: str
    sparsity_before: float = math.nan
    sparsity_after: float = math.nan


@dataclass(frozen=True)
class KernelSweepRow:
    kernel: str
    frames: int
    mean_sparsity_before: float
    mean_sparsity_after: float
    depth_error: Optional[DepthErrorReport] = None


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values) if values else math.nan


class DepthMapGenerator:
    """Batch LiDAR depth-map generation for RGB-D consumption"""

    @staticmethod
    def output_name(frame_id: str) -> str:
        """KITTI image naming: 6-digit zero-padded frame number"""
        return f"{int(frame_id):06d}.png" if frame_id.isdigit() else f"{frame_id}.png"

    @staticmethod
    def process_frame(
        scan_path: Path,
        output_dir: Path,
        calib: CalibrationSet,
        cfg: ProjectionConfig,
        kernel: StructuringElement,
    ) -> FrameOutcome:
        """Densify one scan and write its PNG; failures are reported, not raised"""
        frame_id = KittiSequence.frame_id(scan_path)
        try:
            sparse = project(load_velodyne_bin(scan_path), calib, cfg)
            dense = inverse_dilate(sparse, kernel)
            write_depth_png(dense, output_dir / DepthMapGenerator.output_name(frame_id))
        except LidepthError as e:
            return FrameOutcome(frame_id, False, str(e))
        return FrameOutcome(frame_id, True, "ok", sparsity(sparse), sparsity(dense))

    @staticmethod
    def run(cfg: PipelineConfig, progress: bool = False) -> PipelineSummary:
        """Generate one depth PNG per scan; output is identical for any worker count"""
        sequence = KittiSequence(cfg.sequence_dir, cfg.camera)
        calib = sequence.calibration(cfg.image_width, cfg.image_height)
        scans = sequence.scan_paths(cfg.frame_limit)
        if not scans:
            raise EmptyEvaluationError(f"no scans under {sequence.velodyne_dir}")
        try:
            cfg.output_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise DataIOError(f"cannot create {cfg.output_dir}: {e}") from e

        task = partial(
            DepthMapGenerator.process_frame,
            output_dir=cfg.output_dir,
            calib=calib,
            cfg=cfg.projection,
            kernel=cfg.kernel,
        )
        # None lets tqdm hide itself when stderr is not a terminal
        hide = None if progress else True
        logger.info("densifying %d scans with %s on %d worker(s)", len(scans), cfg.kernel.spec, cfg.workers)
        if cfg.workers == 1:
            outcomes = list(tqdm(map(task, scans), total=len(scans), desc="depth maps", disable=hide))
        else:
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                results = pool.map(task, scans, chunksize=max(1, len(scans) // (cfg.workers * 8)))
                outcomes = list(tqdm(results, total=len(scans), desc="depth maps", disable=hide))

        done = [o for o in outcomes if o.ok]
        failures = [(o.frame_id, o.message) for o in outcomes if not o.ok]
        for frame_id, message in failures:
            logger.warning("frame %s failed: %s", frame_id, message)
        return PipelineSummary(
            frames_processed=len(done),
            failures=failures,
            mean_sparsity_before=_mean([o.sparsity_before for o in done]),
            mean_sparsity_after=_mean([o.sparsity_after for o in done]),
        )

    @staticmethod
    def sweep_kernels(
        sequence_dir: Path,
        kernels: Sequence[StructuringElement],
        frame_limit: Optional[int] = None,
        camera: str = "P2",
        cfg: ProjectionConfig = ProjectionConfig(),
        gt_dir: Optional[Path] = None,
        crop: EvalCrop = EvalCrop(),
        image_width: Optional[int] = None,
        image_height: Optional[int] = None,
        progress: bool = False,
    ) -> list[KernelSweepRow]:
        """Compare upsampling kernels by density and, given ground truth, accuracy"""
        sequence = KittiSequence(sequence_dir, camera)
        calib = sequence.calibration(image_width, image_height)
        before = []
        after = {k.spec: [] for k in kernels}
        reports = {k.spec: [] for k in kernels}

        for path in tqdm(sequence.scan_paths(frame_limit), desc="kernel sweep", disable=None if progress else True):
            try:
                sparse = project(load_velodyne_bin(path), calib, cfg)
            except LidepthError as e:
                logger.warning("skipping %s: %s", path.name, e)
                continue
            before.append(sparsity(sparse))
            gt = None
            if gt_dir is not None:
                gt_path = Path(gt_dir) / DepthMapGenerator.output_name(sequence.frame_id(path))
                if gt_path.exists():
                    try:
                        gt = read_depth_png(gt_path, PNG_DEPTH_CEILING)
                    except LidepthError as e:
                        logger.warning("ignoring ground truth %s: %s", gt_path.name, e)
            for kernel in kernels:
                dense = inverse_dilate(sparse, kernel)
                after[kernel.spec].append(sparsity(dense))
                if gt is not None:
                    try:
                        reports[kernel.spec].append(eval_depth(dense, gt, crop))
                    except EmptyEvaluationError:
                        logger.debug("%s: no overlap with ground truth", path.name)

        if not before:
            raise EmptyEvaluationError(f"no readable scans under {sequence.velodyne_dir}")
        return [
            KernelSweepRow(
                kernel=kernel.spec,
                frames=len(before),
                mean_sparsity_before=_mean(before),
                mean_sparsity_after=_mean(after[kernel.spec]),
                depth_error=aggregate_reports(reports[kernel.spec]) if reports[kernel.spec] else None,
            )
            for kernel in kernels
        ]
