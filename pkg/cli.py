"""Subcommands. Every handler is a thin wrapper over one module operation.

Exit codes: 0 success, 1 pipeline frame failures, 2 usage error,
3 parse error, 4 shape error, 5 empty evaluation, 6 I/O error.
"""

import functools
import math
from pathlib import Path

import click

from app import Settings, app, parse_kernel
from bench import bench_sequence, write_bench_csv
from densify import inverse_dilate
from depth_eval import aggregate_reports, eval_depth, eval_depth_dirs, mean_of_frames, write_depth_csv
from errors import LidepthError
from kitti_io import (
    PNG_DEPTH_CEILING,
    load_kitti_calib,
    load_trajectory,
    load_velodyne_bin,
    read_depth_png,
    read_image_size,
    write_depth_png,
)
from models import EvalCrop, PipelineConfig, StructuringElement
from pipeline import DepthMapGenerator
from projection import project, sparsity
from traj_eval import (
    DEFAULT_FRAME_STEP,
    DEFAULT_LENGTHS,
    SEGMENT_RULES,
    eval_odometry,
    plot_trajectory,
    write_odometry_csv,
)

pass_settings = click.make_pass_decorator(Settings)

existing_file = click.Path(exists=True, dir_okay=False, path_type=Path)
existing_dir = click.Path(exists=True, file_okay=False, path_type=Path)
output_file = click.Path(dir_okay=False, path_type=Path)


def handle_errors(func):
    """Map library errors onto their exit codes"""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except LidepthError as e:
            click.echo(f"error: {e}", err=True)
            raise SystemExit(e.exit_code)
    return wrapper


def parse_lengths(text: str) -> list[float]:
    """``100..800`` (step 100), ``100..800:50`` or ``100,200,400``"""
    try:
        if ".." in text:
            span, _, step = text.partition(":")
            start, _, stop = span.partition("..")
            start, stop, step = float(start), float(stop), float(step or 100)
            if not all(map(math.isfinite, (start, stop, step))) or step <= 0 or stop < start:
                raise ValueError
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            lengths = [start + i * step for i in range(count)]
        else:
            lengths = [float(v) for v in text.split(",") if v.strip()]
        if not lengths or min(lengths) <= 0 or not all(map(math.isfinite, lengths)):
            raise ValueError
        return lengths
    except ValueError:
        raise click.BadParameter(f"cannot parse segment lengths '{text}'", param_hint="--lengths") from None


def _image_size(width, height, image):
    if width is not None and height is not None:
        return width, height
    if image is not None:
        return read_image_size(image)
    raise click.UsageError("pass --width and --height, or --image")


def _format_depth_report(report) -> list[str]:
    return [
        f"mae              {report.mae:.3f} m",
        f"rmse             {report.rmse:.3f} m",
        f"evaluated pixels {report.evaluated_pixels}",
        f"gt coverage      {report.gt_coverage:.3f}",
        f"pred sparsity    {report.pred_sparsity:.3f}",
    ]


@app.command("project")
@click.option("--scan", required=True, type=existing_file, help="Velodyne .bin scan.")
@click.option("--calib", required=True, type=existing_file, help="KITTI calib.txt.")
@click.option("--out", required=True, type=output_file, help="Sparse depth PNG to write.")
@click.option("--width", type=click.IntRange(min=1))
@click.option("--height", type=click.IntRange(min=1))
@click.option("--image", type=existing_file, help="Camera image to take dimensions from.")
@pass_settings
@handle_errors
def cmd_project(settings, scan, calib, out, width, height, image):
    """Project one LiDAR scan into a sparse depth map."""
    image_width, image_height = _image_size(width, height, image)
    calibration = load_kitti_calib(calib, image_width, image_height, settings.camera)
    depth_map = project(load_velodyne_bin(scan), calibration, settings.projection)
    write_depth_png(depth_map, out)
    click.echo(f"sparsity {sparsity(depth_map):.4f}")


@app.command("densify")
@click.option("--in", "source", required=True, type=existing_file, help="Sparse depth PNG.")
@click.option("--out", required=True, type=output_file, help="Dense depth PNG to write.")
@click.option("--kernel", default=None, callback=parse_kernel, help="Kernel as name:size.")
@pass_settings
@handle_errors
def cmd_densify(settings, source, out, kernel):
    """Upsample a sparse depth PNG by inverse dilation."""
    kernel = kernel or settings.kernel
    sparse = read_depth_png(source, settings.max_depth)
    dense = inverse_dilate(sparse, kernel)
    write_depth_png(dense, out)
    click.echo(f"kernel {kernel.spec}: sparsity {sparsity(sparse):.4f} -> {sparsity(dense):.4f}")


@app.command("pipeline")
@click.option("--sequence", required=True, type=existing_dir, help="KITTI Odometry sequence directory.")
@click.option("--out", "output_dir", required=True, type=click.Path(file_okay=False, path_type=Path))
@click.option("--workers", type=click.IntRange(min=1), default=None, help="Frame-parallel workers.")
@click.option("--frames", type=click.IntRange(min=1), default=None, help="Process only the first N scans.")
@click.option("--kernel", default=None, callback=parse_kernel)
@click.option("--width", type=click.IntRange(min=1))
@click.option("--height", type=click.IntRange(min=1))
@pass_settings
@handle_errors
def cmd_pipeline(settings, sequence, output_dir, workers, frames, kernel, width, height):
    """Write one depth PNG per scan (depth factor 256) for RGB-D SLAM."""
    try:
        cfg = PipelineConfig(
            sequence_dir=sequence,
            output_dir=output_dir,
            kernel=kernel or settings.kernel,
            camera=settings.camera,
            projection=settings.projection,
            workers=workers or settings.workers,
            image_width=width,
            image_height=height,
            frame_limit=frames,
        )
    except ValueError as e:
        raise click.UsageError(str(e)) from e
    summary = DepthMapGenerator.run(cfg, progress=settings.progress)
    click.echo(f"frames processed       {summary.frames_processed}")
    click.echo(f"mean sparsity before   {summary.mean_sparsity_before:.4f}")
    click.echo(f"mean sparsity after    {summary.mean_sparsity_after:.4f}")
    click.echo(f"failures               {len(summary.failures)}")
    for frame_id, message in summary.failures:
        click.echo(f"  {frame_id}: {message}", err=True)
    if not summary.ok:
        raise SystemExit(1)


@app.command("eval-depth")
@click.option("--pred", type=existing_file, help="Predicted depth PNG.")
@click.option("--gt", type=existing_file, help="Ground-truth depth PNG.")
@click.option("--pred-dir", type=existing_dir, help="Directory of predicted PNGs.")
@click.option("--gt-dir", type=existing_dir, help="Directory of ground-truth PNGs with matching names.")
@click.option("--crop", type=click.FloatRange(0.0, 1.0, max_open=True), default=0.0, show_default=True,
              help="Fraction of top rows to ignore.")
@click.option("--learned", is_flag=True, help="Ignore the upper 30 % (for network-produced maps).")
@click.option("--csv", "csv_path", type=output_file, help="Per-frame CSV report.")
@handle_errors
def cmd_eval_depth(pred, gt, pred_dir, gt_dir, crop, learned, csv_path):
    """Score predicted depth maps against ground truth (MAE, RMSE)."""
    crop = EvalCrop.learned() if learned else EvalCrop(crop)
    if pred and gt:
        rows = [(pred.stem, eval_depth(read_depth_png(pred, PNG_DEPTH_CEILING), read_depth_png(gt, PNG_DEPTH_CEILING), crop))]
    elif pred_dir and gt_dir:
        rows = eval_depth_dirs(pred_dir, gt_dir, crop, PNG_DEPTH_CEILING)
    else:
        raise click.UsageError("pass --pred and --gt, or --pred-dir and --gt-dir")

    reports = [report for _, report in rows]
    for line in _format_depth_report(aggregate_reports(reports)):
        click.echo(line)
    if len(reports) > 1:
        mae, rmse = mean_of_frames(reports)
        click.echo(f"frames           {len(reports)}")
        click.echo(f"per-frame mean   mae {mae:.3f} m, rmse {rmse:.3f} m")
    if csv_path:
        write_depth_csv(rows, csv_path)


@app.command("eval-traj")
@click.option("--est", required=True, type=existing_file, help="Estimated poses (KITTI format).")
@click.option("--gt", required=True, type=existing_file, help="Ground-truth poses (KITTI format).")
@click.option("--lengths", default="100..800", show_default=True, help="Segment lengths in meters.")
@click.option("--step", type=click.IntRange(min=1), default=DEFAULT_FRAME_STEP, show_default=True,
              help="Start-frame stride.")
@click.option("--rule", type=click.Choice(SEGMENT_RULES), default="inclusive", show_default=True,
              help="Segment end-frame rule.")
@click.option("--plot", type=output_file, help="SVG trajectory plot.")
@click.option("--csv", "csv_path", type=output_file, help="Per-length CSV report.")
@handle_errors
def cmd_eval_traj(est, gt, lengths, step, rule, plot, csv_path):
    """KITTI Odometry translational and rotational drift."""
    estimate, ground_truth = load_trajectory(est), load_trajectory(gt)
    segment_lengths = parse_lengths(lengths) if lengths else list(DEFAULT_LENGTHS)
    report = eval_odometry(estimate, ground_truth, segment_lengths, step, rule)
    click.echo(f"{'length':>8} {'t_err %':>10} {'r_err °/100m':>14} {'segments':>9}")
    for length, row in sorted(report.per_length.items()):
        click.echo(f"{length:>8g} {row.t_err_percent:>10.3f} {row.r_err_deg_per_100m:>14.3f} {row.segment_count:>9}")
    click.echo(f"average translational error {report.avg_t_err_percent:.3f} %")
    click.echo(f"average rotational error    {report.avg_r_err_deg_per_100m:.3f} °/100m")
    if csv_path:
        write_odometry_csv(report, csv_path)
    if plot:
        plot_trajectory(estimate, ground_truth, plot)


@app.command("bench")
@click.option("--sequence", required=True, type=existing_dir, help="KITTI Odometry sequence directory.")
@click.option("--frames", type=click.IntRange(min=1), default=None, help="Frames to execute, warmup included.")
@click.option("--warmup", type=click.IntRange(min=0), default=5, show_default=True)
@click.option("--kernel", default=None, callback=parse_kernel)
@click.option("--width", type=click.IntRange(min=1))
@click.option("--height", type=click.IntRange(min=1))
@click.option("--csv", "csv_path", type=output_file, help="Per-frame timing CSV.")
@pass_settings
@handle_errors
def cmd_bench(settings, sequence, frames, warmup, kernel, width, height, csv_path):
    """Time projection and upsampling per frame (single-threaded)."""
    result = bench_sequence(
        sequence,
        frame_limit=frames,
        kernel=kernel or settings.kernel,
        warmup=warmup,
        camera=settings.camera,
        cfg=settings.projection,
        image_width=width,
        image_height=height,
    )
    stats = result.stats
    click.echo(f"{'stage':<12} {'min ms':>8} {'median ms':>10} {'max ms':>8}")
    for name, stage in (("projection", stats.projection), ("upsampling", stats.upsampling), ("total", stats.total)):
        click.echo(f"{name:<12} {stage.min_ms:>8.3f} {stage.median_ms:>10.3f} {stage.max_ms:>8.3f}")
    click.echo(f"timed frames {stats.projection.samples}, skipped {stats.skipped}")
    if csv_path:
        write_bench_csv(result.frames, csv_path)


@app.command("sweep")
@click.option("--sequence", required=True, type=existing_dir, help="KITTI Odometry sequence directory.")
@click.option("--kernels", default="diamond:5,full:5,cross:5,diamond:3,full:3", show_default=True,
              help="Comma-separated kernels to compare.")
@click.option("--frames", type=click.IntRange(min=1), default=None)
@click.option("--gt-dir", type=existing_dir, help="Ground-truth depth PNGs named like the output.")
@click.option("--crop", type=click.FloatRange(0.0, 1.0, max_open=True), default=0.0)
@click.option("--width", type=click.IntRange(min=1))
@click.option("--height", type=click.IntRange(min=1))
@pass_settings
@handle_errors
def cmd_sweep(settings, sequence, kernels, frames, gt_dir, crop, width, height):
    """Compare upsampling kernels by density and accuracy."""
    try:
        elements = [StructuringElement.from_spec(spec) for spec in kernels.split(",") if spec.strip()]
    except ValueError as e:
        raise click.BadParameter(str(e), param_hint="--kernels") from e
    rows = DepthMapGenerator.sweep_kernels(
        sequence, elements, frames, settings.camera, settings.projection,
        gt_dir, EvalCrop(crop), width, height, settings.progress,
    )
    click.echo(f"{'kernel':<12} {'sparsity in':>12} {'sparsity out':>13} {'mae m':>7} {'rmse m':>7}")
    for row in rows:
        mae = f"{row.depth_error.mae:.3f}" if row.depth_error else "-"
        rmse = f"{row.depth_error.rmse:.3f}" if row.depth_error else "-"
        click.echo(f"{row.kernel:<12} {row.mean_sparsity_before:>12.4f} {row.mean_sparsity_after:>13.4f} {mae:>7} {rmse:>7}")
