"""KITTI Odometry drift errors and trajectory plots.

For every start frame (stride ``frame_step``) and every segment length L the
first end frame covering L along the ground-truth path is located, and the
relative-motion error E = (est_i^-1 est_j)^-1 (gt_i^-1 gt_j) is scored as
translation % of the segment and rotation angle per meter.
"""

import logging
import math
import os
from typing import Sequence, Union

import matplotlib
import numpy as np
import pandas as pd
from matplotlib.figure import Figure

from errors import DataIOError, EmptyEvaluationError, ShapeError
from models import OdometryErrorReport, SegmentError, Trajectory

logger = logging.getLogger(__name__)

DEFAULT_LENGTHS = (100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0)
DEFAULT_FRAME_STEP = 10
SEGMENT_RULES = ("inclusive", "devkit")
CSV_COLUMNS = ["length", "t_err_percent", "r_err_deg_per_100m", "segments"]


def trajectory_distances(trajectory: Trajectory) -> np.ndarray:
    """Cumulative path length at every frame"""
    steps = np.linalg.norm(np.diff(trajectory.positions, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(steps)])


def rigid_inverse(pose: np.ndarray) -> np.ndarray:
    inverse = np.eye(4)
    inverse[:3, :3] = pose[:3, :3].T
    inverse[:3, 3] = -pose[:3, :3].T @ pose[:3, 3]
    return inverse


def rotation_error(error: np.ndarray) -> float:
    """Rotation angle of a pose error in radians, acos argument clamped"""
    cosine = 0.5 * (error[0, 0] + error[1, 1] + error[2, 2] - 1.0)
    return math.acos(max(min(cosine, 1.0), -1.0))


def translation_error(error: np.ndarray) -> float:
    return float(np.linalg.norm(error[:3, 3]))


def _last_frame(dist: np.ndarray, first: int, length: float, rule: str) -> int:
    if rule == "devkit":
        k = int(np.searchsorted(dist[first:], dist[first] + length, side="right"))
    else:
        k = int(np.searchsorted(dist[first:] - dist[first], length, side="left"))
    return first + k if first + k < dist.size else -1


def eval_odometry(
    est: Trajectory,
    gt: Trajectory,
    lengths: Sequence[float] = DEFAULT_LENGTHS,
    frame_step: int = DEFAULT_FRAME_STEP,
    segment_rule: str = "inclusive",
) -> OdometryErrorReport:
    """Average translational (%) and rotational (rad/m) drift over path segments.

    ``segment_rule="inclusive"`` ends a segment at the first frame with
    dist(j) - dist(i) >= L and normalizes by that distance.
    ``segment_rule="devkit"`` ends it at the first frame with
    dist(j) > dist(i) + L and normalizes by L, as the C++ devkit does.
    """
    if len(est) != len(gt):
        raise ShapeError(f"estimate has {len(est)} poses, ground truth has {len(gt)}")
    if segment_rule not in SEGMENT_RULES:
        raise ValueError(f"segment_rule must be one of {SEGMENT_RULES}")
    if frame_step < 1:
        raise ValueError("frame_step must be >= 1")
    if any(length <= 0 for length in lengths):
        raise ValueError("segment lengths must be positive")
    if len(gt) < 2:
        raise EmptyEvaluationError("at least two poses are needed")

    dist = trajectory_distances(gt)
    per_length = {float(length): [] for length in lengths}
    for first in range(0, len(gt), frame_step):
        gt_inv = rigid_inverse(gt.poses[first])
        est_inv = rigid_inverse(est.poses[first])
        for length in per_length:
            last = _last_frame(dist, first, length, segment_rule)
            if last == -1:
                continue
            delta_gt = gt_inv @ gt.poses[last]
            delta_est = est_inv @ est.poses[last]
            error = rigid_inverse(delta_est) @ delta_gt
            span = dist[last] - dist[first] if segment_rule == "inclusive" else length
            per_length[length].append((translation_error(error) / span, rotation_error(error) / span))

    segments = [s for rows in per_length.values() for s in rows]
    if not segments:
        raise EmptyEvaluationError(
            f"trajectory of {dist[-1]:.1f} m is shorter than the shortest segment {min(lengths)} m"
        )
    summary = {
        length: SegmentError(
            length=length,
            t_err_percent=100.0 * float(np.mean([t for t, _ in rows])),
            r_err_rad_per_m=float(np.mean([r for _, r in rows])),
            segment_count=len(rows),
        )
        for length, rows in per_length.items()
        if rows
    }
    logger.debug("evaluated %d segments over %d frames", len(segments), len(gt))
    return OdometryErrorReport(
        per_length=summary,
        avg_t_err_percent=100.0 * float(np.mean([t for t, _ in segments])),
        avg_r_err_rad_per_m=float(np.mean([r for _, r in segments])),
        segment_total=len(segments),
    )


def write_odometry_csv(report: OdometryErrorReport, path: Union[str, os.PathLike]) -> None:
    table = pd.DataFrame(
        [
            (f"{length:g}", row.t_err_percent, row.r_err_deg_per_100m, row.segment_count)
            for length, row in sorted(report.per_length.items())
        ],
        columns=CSV_COLUMNS,
    )
    try:
        table.to_csv(path, index=False, float_format="%.6f")
    except OSError as e:
        raise DataIOError(f"cannot write {path}: {e}") from e


def trajectory_figure(est: Trajectory, gt: Trajectory) -> Figure:
    """Top-down x-z view of both trajectories, meters on both axes"""
    if len(est) == 0 or len(gt) == 0:
        raise ValueError("cannot plot an empty trajectory")
    fig = Figure(figsize=(6, 6), dpi=72)
    ax = fig.add_subplot()
    for trajectory, label, gid, style in ((gt, "ground truth", "gt", "-"), (est, "estimate", "est", "--")):
        x, z = trajectory.positions[:, 0], trajectory.positions[:, 2]
        ax.plot(x, z, style, label=label, gid=gid, marker="o" if len(trajectory) == 1 else None)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("z [m]")
    ax.set_aspect("equal", adjustable="datalim")
    ax.grid(True, linewidth=0.3)
    ax.legend(loc="best")
    return fig


def plot_trajectory(est: Trajectory, gt: Trajectory, path: Union[str, os.PathLike]) -> Figure:
    """Write the trajectory plot as SVG; output bytes depend only on the inputs"""
    fig = trajectory_figure(est, gt)
    with matplotlib.rc_context({"svg.hashsalt": "lidepth", "svg.fonttype": "path"}):
        try:
            fig.savefig(path, format="svg", metadata={"Date": None})
        except OSError as e:
            raise DataIOError(f"cannot write {path}: {e}") from e
    return fig
