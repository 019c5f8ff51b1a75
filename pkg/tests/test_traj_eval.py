import re

import numpy as np
import pandas as pd
import pytest
from scipy.spatial.transform import Rotation

from errors import EmptyEvaluationError, ShapeError
from models import Trajectory
from traj_eval import (
    CSV_COLUMNS,
    eval_odometry,
    plot_trajectory,
    rotation_error,
    trajectory_distances,
    write_odometry_csv,
)


def straight_line(frames, scale=1.0):
    poses = np.tile(np.eye(4), (frames, 1, 1))
    poses[:, 2, 3] = scale * np.arange(frames)
    return Trajectory(poses)


def wandering_path(rng, frames=600):
    """Forward motion of about 1 m per frame with small random turns"""
    poses = [np.eye(4)]
    for _ in range(frames - 1):
        step = np.eye(4)
        step[:3, :3] = Rotation.from_rotvec([0.0, rng.normal(0.0, 0.02), rng.normal(0.0, 0.002)]).as_matrix()
        step[:3, 3] = [rng.normal(0.0, 0.02), 0.0, 1.0 + rng.normal(0.0, 0.05)]
        poses.append(poses[-1] @ step)
    return Trajectory(np.array(poses))


def drifted(rng, trajectory):
    poses = [trajectory.poses[0]]
    drift = np.eye(4)
    for pose in trajectory.poses[1:]:
        noise = np.eye(4)
        noise[:3, :3] = Rotation.from_rotvec(rng.normal(0.0, 5e-4, 3)).as_matrix()
        noise[:3, 3] = rng.normal(0.0, 0.01, 3)
        drift = drift @ noise
        poses.append(drift @ pose)
    return Trajectory(np.array(poses))


def devkit_errors(est, gt, lengths, step):
    """Line-by-line transcription of the KITTI devkit segment loop"""
    positions = gt.poses[:, :3, 3]
    dist = [0.0]
    for i in range(1, len(gt)):
        dist.append(dist[-1] + float(np.linalg.norm(positions[i] - positions[i - 1])))
    errors = []
    for first in range(0, len(gt), step):
        for length in lengths:
            last = -1
            for i in range(first, len(dist)):
                if dist[i] > dist[first] + length:
                    last = i
                    break
            if last == -1:
                continue
            delta_gt = np.linalg.inv(gt.poses[first]) @ gt.poses[last]
            delta_est = np.linalg.inv(est.poses[first]) @ est.poses[last]
            error = np.linalg.inv(delta_est) @ delta_gt
            d = 0.5 * (error[0, 0] + error[1, 1] + error[2, 2] - 1.0)
            r_err = np.arccos(max(min(d, 1.0), -1.0))
            t_err = np.linalg.norm(error[:3, 3])
            errors.append((t_err / length, r_err / length))
    return errors


def test_perfect_estimate_has_zero_error():
    gt = straight_line(900)
    report = eval_odometry(gt, gt)
    assert report.avg_t_err_percent == 0.0
    assert report.avg_r_err_rad_per_m == 0.0
    assert sorted(report.per_length) == [100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0]


def test_one_percent_scale_drift():
    gt, est = straight_line(900), straight_line(900, scale=1.01)
    report = eval_odometry(est, gt)
    assert report.avg_t_err_percent == pytest.approx(1.0, abs=1e-9)
    assert report.avg_r_err_rad_per_m == 0.0
    assert report.per_length[100.0].segment_count == 80
    assert report.per_length[800.0].segment_count == 10


def test_devkit_rule_overshoots_by_one_frame():
    gt, est = straight_line(900), straight_line(900, scale=1.01)
    report = eval_odometry(est, gt, segment_rule="devkit")
    for length, row in report.per_length.items():
        assert row.t_err_percent == pytest.approx((length + 1) / length, abs=1e-9)


def test_rigid_transform_of_both_trajectories_changes_nothing(rng):
    gt = wandering_path(rng)
    est = drifted(rng, gt)
    lengths = [100.0, 200.0, 300.0, 400.0]
    baseline = eval_odometry(est, gt, lengths)
    transform = np.eye(4)
    transform[:3, :3] = Rotation.from_rotvec([0.3, -1.2, 0.7]).as_matrix()
    transform[:3, 3] = [120.0, -4.0, 33.0]
    moved = eval_odometry(est.transformed(transform), gt.transformed(transform), lengths)
    assert moved.segment_total == baseline.segment_total
    assert moved.avg_t_err_percent == pytest.approx(baseline.avg_t_err_percent, rel=1e-6)
    assert moved.avg_r_err_rad_per_m == pytest.approx(baseline.avg_r_err_rad_per_m, rel=1e-6)


def test_devkit_rule_matches_transcribed_loop(rng):
    lengths = [100.0, 200.0, 300.0, 400.0, 500.0]
    for _ in range(10):
        gt = wandering_path(rng)
        est = drifted(rng, gt)
        expected = devkit_errors(est, gt, lengths, 10)
        report = eval_odometry(est, gt, lengths, 10, segment_rule="devkit")
        assert report.segment_total == len(expected)
        assert report.avg_t_err_percent == pytest.approx(100.0 * np.mean([t for t, _ in expected]), rel=1e-6)
        assert report.avg_r_err_rad_per_m == pytest.approx(np.mean([r for _, r in expected]), rel=1e-6)


def test_only_lengths_with_segments_are_reported():
    gt = straight_line(250)
    report = eval_odometry(gt, gt)
    assert sorted(report.per_length) == [100.0, 200.0]


def test_distances_accumulate_along_the_path():
    np.testing.assert_array_equal(trajectory_distances(straight_line(4)), [0.0, 1.0, 2.0, 3.0])


def test_rotation_error_is_clamped():
    assert rotation_error(np.eye(4) * (1.0 + 1e-12)) == 0.0
    flipped = np.diag([-1.0, -1.0, 1.0, 1.0])
    assert rotation_error(flipped) == pytest.approx(np.pi)


def test_input_errors():
    with pytest.raises(ShapeError):
        eval_odometry(straight_line(900), straight_line(899))
    with pytest.raises(EmptyEvaluationError):
        eval_odometry(straight_line(1), straight_line(1))
    with pytest.raises(EmptyEvaluationError, match="shorter"):
        eval_odometry(straight_line(50), straight_line(50))
    with pytest.raises(ValueError):
        eval_odometry(straight_line(900), straight_line(900), segment_rule="nearest")
    with pytest.raises(ValueError):
        eval_odometry(straight_line(900), straight_line(900), frame_step=0)


def test_csv_report(tmp_path):
    report = eval_odometry(straight_line(900, scale=1.01), straight_line(900))
    path = tmp_path / "odometry.csv"
    write_odometry_csv(report, path)
    table = pd.read_csv(path, dtype={"length": str})
    assert list(table.columns) == CSV_COLUMNS
    assert table["length"].tolist() == ["100", "200", "300", "400", "500", "600", "700", "800"]
    assert table["t_err_percent"][0] == pytest.approx(1.0, abs=1e-6)


class TestPlot:
    @staticmethod
    def line_path(svg, gid):
        match = re.search(rf'<g id="{gid}">\s*<path [^>]*?\bd="([^"]+)"', svg)
        assert match, f"no line group '{gid}'"
        return match.group(1)

    def test_both_lines_are_drawn(self, tmp_path, rng):
        gt = wandering_path(rng, frames=100)
        path = tmp_path / "traj.svg"
        plot_trajectory(drifted(rng, gt), gt, path)
        svg = path.read_text()
        assert self.line_path(svg, "gt") != self.line_path(svg, "est")

    def test_identical_trajectories_overlap(self, tmp_path):
        path = tmp_path / "same.svg"
        plot_trajectory(straight_line(50), straight_line(50), path)
        svg = path.read_text()
        assert self.line_path(svg, "gt") == self.line_path(svg, "est")

    def test_output_is_deterministic(self, tmp_path, rng):
        gt = wandering_path(rng, frames=80)
        est = drifted(rng, gt)
        plot_trajectory(est, gt, tmp_path / "a.svg")
        plot_trajectory(est, gt, tmp_path / "b.svg")
        assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()

    def test_canvas_is_square(self, tmp_path):
        fig = plot_trajectory(straight_line(10), straight_line(10), tmp_path / "sq.svg")
        width, height = fig.get_size_inches()
        assert width == height
        header = re.search(r"<svg[^>]*>", (tmp_path / "sq.svg").read_text()).group(0)
        assert re.search(r'\bwidth="([\d.]+)pt"', header).group(1) == re.search(r'\bheight="([\d.]+)pt"', header).group(1)

    def test_single_pose_and_empty(self, tmp_path):
        one = straight_line(1)
        plot_trajectory(one, one, tmp_path / "one.svg")
        with pytest.raises(ValueError):
            plot_trajectory(Trajectory(np.zeros((0, 4, 4))), one, tmp_path / "none.svg")

    @staticmethod
    def numbers(text):
        return np.array([float(v) for v in re.findall(r"-?\d+(?:\.\d+)?(?:e[-+]?\d+)?", text)])

    def test_square_path_keeps_its_extent(self, tmp_path):
        side, frames = 200.0, 900
        corners = np.array([[0.0, 0.0], [side, 0.0], [side, side], [0.0, side], [0.0, 0.0]])
        s = np.linspace(0.0, 4 * side, frames)
        poses = np.tile(np.eye(4), (frames, 1, 1))
        poses[:, 0, 3] = np.interp(s, side * np.arange(5), corners[:, 0])
        poses[:, 2, 3] = np.interp(s, side * np.arange(5), corners[:, 1])
        square = Trajectory(poses)
        path = tmp_path / "square.svg"
        fig = plot_trajectory(square, square, path)

        xy = self.numbers(self.line_path(path.read_text(), "gt")).reshape(-1, 2)
        span_x, span_y = np.ptp(xy, axis=0)
        line = fig.axes[0].lines[0]
        display = line.get_transform().transform(line.get_xydata())
        expected_x, expected_y = np.ptp(display, axis=0)
        assert abs(span_x - expected_x) <= 1.0
        assert abs(span_y - expected_y) <= 1.0
        # equal aspect: both sides of the square have the same length on the canvas
        assert abs(span_x - span_y) <= 1.0
        assert span_x > 100.0

    def test_single_pose_is_one_marker_per_line(self, tmp_path):
        one = straight_line(1)
        path = tmp_path / "one.svg"
        fig = plot_trajectory(one, one, path)
        assert [line.get_marker() for line in fig.axes[0].lines] == ["o", "o"]

        svg = path.read_text()
        gt_group = svg[svg.index('<g id="gt">'):svg.index('<g id="est">')]
        est_group = svg[svg.index('<g id="est">'):svg.index('<g id="legend_1">')]
        assert gt_group.count("<use ") == 1
        assert est_group.count("<use ") == 1

        height = fig.get_size_inches()[1] * 72
        marker = re.search(r'<use [^>]*?\bx="([^"]+)"[^>]*?\by="([^"]+)"', gt_group)
        x, y = float(marker.group(1)), float(marker.group(2))
        expected = fig.axes[0].transData.transform([0.0, 0.0])
        assert abs(x - expected[0]) <= 1.0
        assert abs((height - y) - expected[1]) <= 1.0
