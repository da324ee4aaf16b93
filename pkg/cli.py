"""Command-line surface: encode depth views, derive LGA and importance grids,
report statistics, evaluate losses and score predictions.

    python cli.py encode depth.dpm camera.txt tsdf.vxg --flipped
    python cli.py lga labels.vxg lga.vxg
    python cli.py weights lga.vxg importance.vxg --lambda 1.0 --alpha 0.5
    python cli.py stats lga.vxg --csv
    python cli.py loss probs.npy labels.vxg importance.vxg --all
    python cli.py eval pred.vxg gt.vxg mask.vxg
    python cli.py downsample labels.vxg labels_60.vxg --factor 4
"""
from config.log_config import LoggingConfig
from config.decorators import step
from config.ssc_config import SSCConfig
from schemas.models import ClassWeights, GridGeometry, GridKind, LgaGrid, LogitVolume, LossConfig, ProbabilityVolume, TargetVolume
from handlers.input_handler import FormatError, InputHandler, UsageError
from handlers.output_handler import OutputHandler
from ssc.grid import downsample_labels, downsample_mask, free_space_mask, require_same_geometry
from ssc.lga import compute_lga, importance_grid, lga_histogram
from ssc.loss import dice_loss, focal_loss, loss_report, pa_loss, softmax, wce_loss
from ssc.metrics import ConfusionCounts, aggregate
from ssc.tsdf import compute_tsdf, flip_tsdf

from pathlib import Path
from typing import List, Optional, Sequence
import argparse
import logging
import sys

logging_config = LoggingConfig()
err_console = logging_config.err_console
logger = logging.getLogger("ssc.cli")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_DOMAIN = 3

LOSS_NAMES = ("pa", "wce", "focal", "dice")


class SSCArgumentParser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _numbers(kind, count: int):
    def parse(raw: str):
        try:
            values = tuple(kind(v) for v in raw.split(","))
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected {count} comma-separated values, got {raw!r}") from None
        if len(values) != count:
            raise argparse.ArgumentTypeError(f"expected {count} comma-separated values, got {raw!r}")
        return values
    return parse


def _float_list(raw: str):
    try:
        return tuple(float(v) for v in raw.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {raw!r}") from None


# Commands
@step
def encode(args: argparse.Namespace) -> int:
    inputs = InputHandler()
    depth = inputs.depth(args.depth)
    intrinsics, pose = inputs.camera(args.camera)
    geometry = GridGeometry(dims=args.dims, voxel_size=args.voxel_size, origin=args.origin)
    grid = compute_tsdf(depth, intrinsics, pose, geometry, args.truncation)
    if args.flipped:
        grid = flip_tsdf(grid)
    OutputHandler().save_grid(grid, args.out, GridKind.SCALAR)
    return EXIT_OK


@step
def lga(args: argparse.Namespace) -> int:
    labels = InputHandler().grid(args.labels, GridKind.LABELS)
    OutputHandler().save_grid(compute_lga(labels, free_space_mask(labels)), args.out, GridKind.LGA)
    return EXIT_OK


@step
def weights(args: argparse.Namespace) -> int:
    lga_grid = InputHandler().grid(args.lga, GridKind.LGA)
    importance = importance_grid(lga_grid, args.lambda_, args.alpha)
    OutputHandler().save_grid(importance, args.out, GridKind.SCALAR)
    return EXIT_OK


@step
def stats(args: argparse.Namespace) -> int:
    grid = InputHandler().grid(args.grid, GridKind.LGA, GridKind.LABELS)
    # label grids are reduced to LGA on the fly
    if not isinstance(grid, LgaGrid):
        grid = compute_lga(grid, free_space_mask(grid))
    OutputHandler().lga_stats(lga_histogram(grid), csv=args.csv)
    return EXIT_OK


@step
def loss(args: argparse.Namespace) -> int:
    inputs = InputHandler()
    values = inputs.array(args.predictions)
    labels = inputs.grid(args.labels, GridKind.LABELS)
    importance = inputs.grid(args.importance, GridKind.SCALAR) if args.importance else None
    mask = inputs.grid(args.mask, GridKind.MASK) if args.mask else None
    require_same_geometry(labels, *(g for g in (importance, mask) if g is not None))

    if values.ndim != 2 or values.shape[0] != labels.geometry.num_voxels:
        raise ValueError(
            f"{args.predictions}: predictions of shape {values.shape} do not match "
            f"{labels.geometry.num_voxels} voxels of {args.labels}"
        )
    probs = softmax(LogitVolume(values=values)) if args.logits else ProbabilityVolume(values=values)
    targets = TargetVolume(labels=labels.flat(), mask=mask.flat() if mask is not None else None)
    class_weights = ClassWeights(weights=args.class_weights) if args.class_weights else None
    config = LossConfig.model_validate({**args.loss_config.model_dump(), "gamma": args.gamma, "epsilon": args.epsilon})

    if args.all:
        results = loss_report(probs, targets, importance, class_weights, config)
    elif args.loss == "pa":
        results = {"pa": pa_loss(probs, targets, importance, config.epsilon)}
    elif args.loss == "wce":
        results = {"wce": wce_loss(probs, targets, class_weights, config.epsilon)}
    elif args.loss == "focal":
        results = {"focal": focal_loss(probs, targets, config.gamma, config.epsilon)}
    else:
        results = {"dice": dice_loss(probs, targets, config.epsilon)}
    OutputHandler().losses(results)
    return EXIT_OK


def _scene_counts(inputs: InputHandler, pred: Path, gt: Path, mask: Path) -> ConfusionCounts:
    return ConfusionCounts.from_grids(
        inputs.grid(pred, GridKind.LABELS),
        inputs.grid(gt, GridKind.LABELS),
        inputs.grid(mask, GridKind.MASK),
    )


def _scene_list(path: Path) -> List[Sequence[Path]]:
    if not path.is_file():
        raise FileNotFoundError(f"Scene list does not exist: {path}")
    scenes = []
    offset = 0
    for number, line in enumerate(path.read_bytes().splitlines(keepends=True), start=1):
        text = line.decode("utf-8", errors="replace").strip()
        if text and not text.startswith("#"):
            fields = text.split()
            if len(fields) != 3:
                raise FormatError(path, offset, f"line {number}: expected 'pred gt mask', got {text!r}")
            # relative entries are resolved against the list's folder
            scenes.append(tuple(path.parent / f for f in fields))
        offset += len(line)
    if not scenes:
        raise FormatError(path, offset, "scene list is empty")
    return scenes


@step
def evaluate(args: argparse.Namespace) -> int:
    inputs = InputHandler()
    if args.aggregate:
        scenes = [_scene_counts(inputs, *entry) for entry in _scene_list(args.aggregate)]
        report = aggregate(scenes, micro=not args.macro)
        logger.info("Aggregated %d scenes (%s)", len(scenes), "macro" if args.macro else "micro")
    else:
        scenes = [_scene_counts(inputs, args.pred, args.gt, args.mask)]
        report = scenes[0].report()
    output = OutputHandler()
    output.metrics(report, scenes=len(scenes))
    if args.json:
        output.save_to_json(report, args.json)
    return EXIT_OK


@step
def downsample(args: argparse.Namespace) -> int:
    grid = InputHandler().grid(args.grid, GridKind.LABELS, GridKind.MASK)
    if grid.data.dtype == bool:
        OutputHandler().save_grid(downsample_mask(grid, args.factor), args.out, GridKind.MASK)
    else:
        OutputHandler().save_grid(downsample_labels(grid, args.factor), args.out, GridKind.LABELS)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    config = SSCConfig()
    geometry = config.grid_geometry()
    loss_config = config.loss_config()
    parser = SSCArgumentParser(prog="ssc", description="Semantic scene completion toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging on stderr.")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("encode", help="Encode a depth view into a TSDF or flipped-TSDF grid.")
    p.add_argument("depth", type=Path, help="DPM1 depth raster.")
    p.add_argument("camera", type=Path, help="Camera text file.")
    p.add_argument("out", type=Path, help="Output grid.")
    p.add_argument("--dims", type=_numbers(int, 3), default=geometry.dims, help="nx,ny,nz")
    p.add_argument("--voxel-size", type=float, default=geometry.voxel_size, help="Voxel edge in meters.")
    p.add_argument("--origin", type=_numbers(float, 3), default=geometry.origin, help="x,y,z of the grid min-corner.")
    p.add_argument("--truncation", type=float, default=config.get('truncation'), help="Truncation distance in meters.")
    p.add_argument("--flipped", action="store_true", help="Write the flipped TSDF.")
    p.set_defaults(func=encode)

    p = commands.add_parser("lga", help="Compute the LGA grid of a label grid.")
    p.add_argument("labels", type=Path)
    p.add_argument("out", type=Path)
    p.set_defaults(func=lga)

    p = commands.add_parser("weights", help="Compute the importance grid of an LGA grid.")
    p.add_argument("lga", type=Path)
    p.add_argument("out", type=Path)
    p.add_argument("--lambda", dest="lambda_", type=float, default=loss_config.lambda_)
    p.add_argument("--alpha", type=float, default=loss_config.alpha)
    p.set_defaults(func=weights)

    p = commands.add_parser("stats", help="Histogram of LGA values.")
    p.add_argument("grid", type=Path, help="LGA grid, or a label grid to reduce first.")
    p.add_argument("--csv", action="store_true", help="Print lga,count,fraction rows.")
    p.set_defaults(func=stats)

    p = commands.add_parser("loss", help="Evaluate training losses on a prediction.")
    p.add_argument("predictions", type=Path, help=".npy array (N, C) in x-fastest voxel order.")
    p.add_argument("labels", type=Path)
    p.add_argument("importance", type=Path, nargs="?", help="Importance grid; all ones when omitted.")
    p.add_argument("--loss", choices=LOSS_NAMES, default="pa")
    p.add_argument("--all", action="store_true", help="Print all four losses.")
    p.add_argument("--logits", action="store_true", help="Predictions are logits, not probabilities.")
    p.add_argument("--mask", type=Path, help="Mask grid of participating voxels.")
    p.add_argument("--class-weights", type=_float_list, help="w_0,...,w_C-1 for wce; all ones when omitted.")
    p.add_argument("--gamma", type=float, default=loss_config.gamma)
    p.add_argument("--epsilon", type=float, default=loss_config.epsilon)
    p.set_defaults(func=loss, loss_config=loss_config)

    p = commands.add_parser("eval", help="SC and SSC metrics of a prediction.")
    p.add_argument("pred", type=Path, nargs="?")
    p.add_argument("gt", type=Path, nargs="?")
    p.add_argument("mask", type=Path, nargs="?")
    p.add_argument("--aggregate", type=Path, help="File listing 'pred gt mask' per line.")
    p.add_argument("--macro", action="store_true", help="Average per-scene values instead of pooling counts.")
    p.add_argument("--json", type=Path, help="Also write the report as JSON.")
    p.set_defaults(func=evaluate)

    p = commands.add_parser("downsample", help="Majority-pool a label grid or any-pool a mask grid.")
    p.add_argument("grid", type=Path)
    p.add_argument("out", type=Path)
    p.add_argument("--factor", type=int, default=4)
    p.set_defaults(func=downsample)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "eval":
            given = [a for a in (args.pred, args.gt, args.mask) if a is not None]
            if args.aggregate and given:
                parser.error("eval takes either pred gt mask or --aggregate, not both")
            if not args.aggregate and len(given) != 3:
                parser.error("eval needs pred gt mask or --aggregate")
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    logging_config.set_verbose(args.verbose)
    try:
        return args.func(args)
    except UsageError as e:
        err_console.print(f"Error: {e}", style="error", markup=False, soft_wrap=True)
        return EXIT_USAGE
    except (OSError, FormatError) as e:
        err_console.print(f"Error: {e}", style="error", markup=False, soft_wrap=True)
        return EXIT_IO
    except ValueError as e:
        err_console.print(f"Error: {e}", style="error", markup=False, soft_wrap=True)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
