"""Depth accuracy against ground truth: MAE, RMSE, coverage and sparsity."""

import logging
import math
import os
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np
import pandas as pd

from errors import DataIOError, EmptyEvaluationError, ShapeError
from kitti_io import read_depth_png
from models import DEFAULT_MAX_DEPTH, DepthErrorReport, DepthMap, EvalCrop
from projection import sparsity

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["frame_id", "mae", "rmse", "evaluated_pixels", "gt_coverage", "pred_sparsity"]


def eval_depth(pred: DepthMap, gt: DepthMap, crop: EvalCrop = EvalCrop()) -> DepthErrorReport:
    """Score pixels inside the crop that are valid in both maps"""
    if pred.shape != gt.shape:
        raise ShapeError(f"prediction is {pred.width}x{pred.height}, ground truth is {gt.width}x{gt.height}")
    first = crop.first_row(gt.height)
    gt_valid = gt.valid[first:]
    both = pred.valid[first:] & gt_valid
    evaluated = int(np.count_nonzero(both))
    if evaluated == 0:
        raise EmptyEvaluationError("no pixel is valid in both prediction and ground truth")
    diff = pred.depth[first:][both] - gt.depth[first:][both]
    return DepthErrorReport(
        mae=float(np.mean(np.abs(diff))),
        rmse=float(np.sqrt(np.mean(diff * diff))),
        evaluated_pixels=evaluated,
        gt_valid_pixels=int(np.count_nonzero(gt_valid)),
        pred_sparsity=sparsity(pred),
    )


def aggregate_reports(reports: Sequence[DepthErrorReport]) -> DepthErrorReport:
    """Pool frames per pixel, each frame weighted by its evaluated pixels"""
    if not reports:
        raise EmptyEvaluationError("no frame reports to aggregate")
    total = sum(r.evaluated_pixels for r in reports)
    return DepthErrorReport(
        mae=sum(r.mae * r.evaluated_pixels for r in reports) / total,
        rmse=math.sqrt(sum(r.rmse ** 2 * r.evaluated_pixels for r in reports) / total),
        evaluated_pixels=total,
        gt_valid_pixels=sum(r.gt_valid_pixels for r in reports),
        pred_sparsity=sum(r.pred_sparsity for r in reports) / len(reports),
    )


def mean_of_frames(reports: Sequence[DepthErrorReport]) -> tuple[float, float]:
    """Unweighted mean of per-frame MAE and RMSE"""
    if not reports:
        raise EmptyEvaluationError("no frame reports to aggregate")
    return (
        sum(r.mae for r in reports) / len(reports),
        sum(r.rmse for r in reports) / len(reports),
    )


def eval_depth_dirs(
    pred_dir: Union[str, os.PathLike],
    gt_dir: Union[str, os.PathLike],
    crop: EvalCrop = EvalCrop(),
    max_depth: float = DEFAULT_MAX_DEPTH,
) -> list[tuple[str, DepthErrorReport]]:
    """Score every prediction PNG that has a same-named ground-truth PNG"""
    pred_dir, gt_dir = Path(pred_dir), Path(gt_dir)
    if not pred_dir.is_dir() or not gt_dir.is_dir():
        raise DataIOError(f"both {pred_dir} and {gt_dir} must be directories")
    rows = []
    for pred_path in sorted(pred_dir.glob("*.png")):
        gt_path = gt_dir / pred_path.name
        if not gt_path.exists():
            logger.debug("no ground truth for %s", pred_path.name)
            continue
        try:
            report = eval_depth(read_depth_png(pred_path, max_depth), read_depth_png(gt_path, max_depth), crop)
        except EmptyEvaluationError:
            logger.warning("%s: no overlapping valid pixels, skipped", pred_path.name)
            continue
        rows.append((pred_path.stem, report))
    if not rows:
        raise EmptyEvaluationError(f"no evaluable frame pairs between {pred_dir} and {gt_dir}")
    return rows


def write_depth_csv(rows: Iterable[tuple[str, DepthErrorReport]], path: Union[str, os.PathLike]) -> None:
    table = pd.DataFrame(
        [
            (frame_id, r.mae, r.rmse, r.evaluated_pixels, r.gt_coverage, r.pred_sparsity)
            for frame_id, r in rows
        ],
        columns=CSV_COLUMNS,
    )
    try:
        table.to_csv(path, index=False, float_format="%.6f")
    except OSError as e:
        raise DataIOError(f"cannot write {path}: {e}") from e
