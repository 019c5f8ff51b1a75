import logging
import os
from dataclasses import dataclass, field

import click

from densify import DEFAULT_KERNEL
from models import CAMERAS, DEFAULT_MAX_DEPTH, ProjectionConfig, StructuringElement

# Configure logging
LOG_LEVEL = os.environ.get("LIDEPTH_LOG", "WARNING").upper()
logging.basicConfig(
    level=getattr(logging, LOG_LEVEL, logging.WARNING),
    format="%(asctime)s %(levelname)s %(name)s: %(message)s",
)

DEFAULT_WORKERS = os.environ.get("LIDEPTH_WORKERS", "1")


@dataclass
class Settings:
    """Options shared by every subcommand"""

    camera: str = "P2"
    max_depth: float = DEFAULT_MAX_DEPTH
    kernel: StructuringElement = field(default_factory=lambda: StructuringElement.from_spec(DEFAULT_KERNEL))
    workers: int = 1
    quiet: bool = False

    @property
    def projection(self) -> ProjectionConfig:
        return ProjectionConfig(max_depth=self.max_depth)

    @property
    def progress(self) -> bool:
        return not self.quiet


def parse_kernel(ctx, param, value):
    """click callback turning ``name:size`` into a StructuringElement"""
    if value is None:
        return None
    try:
        return StructuringElement.from_spec(value)
    except ValueError as e:
        raise click.BadParameter(str(e), ctx=ctx, param=param) from e


def default_workers() -> int:
    try:
        return max(1, int(DEFAULT_WORKERS))
    except ValueError:
        logging.getLogger(__name__).warning("ignoring LIDEPTH_WORKERS=%r", DEFAULT_WORKERS)
        return 1


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--camera", type=click.Choice(CAMERAS), default="P2", show_default=True,
              help="KITTI projection matrix to use.")
@click.option("--max-depth", type=click.FloatRange(min=0.0, min_open=True), default=DEFAULT_MAX_DEPTH,
              show_default=True, help="Depth ceiling in meters.")
@click.option("--kernel", "kernel", default=DEFAULT_KERNEL, show_default=True, callback=parse_kernel,
              help="Default upsampling kernel as name:size (diamond, full, cross).")
@click.option("--quiet", is_flag=True, help="Hide progress bars.")
@click.pass_context
def app(ctx, camera, max_depth, kernel, quiet):
    """LiDAR depth maps for RGB-D SLAM: generation, evaluation and benchmarking."""
    try:
        ProjectionConfig(max_depth=max_depth)
    except ValueError as e:
        raise click.BadParameter(str(e), param_hint="--max-depth") from e
    ctx.obj = Settings(camera=camera, max_depth=max_depth, kernel=kernel, workers=default_workers(), quiet=quiet)


# Import commands after app initialization
import cli  # noqa: E402,F401
