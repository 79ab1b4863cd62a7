"""
Command line entry point::

    cavs phantom   --out DIR [--clips 4 --frames 24 --size 64 --seed 7 ...]
    cavs train     --data DIR [--n 1 --epochs 100 --size 448 ...]
    cavs eval      --data DIR --checkpoint FILE [--out PREFIX]
    cavs segment   --clip DIR --checkpoint FILE --out DIR
    cavs gradcheck [--scope ops|network|all]
    cavs info      FILE

Every subcommand takes ``--config FILE`` with flat key=value lines; flags
given on the command line win over the file. Exit codes: 0 success, 1
runtime failure, 2 bad usage.
"""
import argparse
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

import numpy as np
from PIL import Image

from ._version import __version__
from .config import build, parse_resolution, read_config
from .data.dataset import load_clip, load_dataset, partition
from .data.preprocess import preprocess_frame
from .data.phantom import PhantomParams, gen_phantom_dataset
from .engine.gradcheck import run_op_suite
from .model.checkpoint import load_checkpoint
from .model.config import ModelConfig
from .model.network import network_gradcheck, parameter_count
from .params import check_params
from .pipeline.config import TrainConfig
from .pipeline.evaluate import evaluate_clips, segment_video
from .pipeline.train import train

logger = logging.getLogger(__name__)

OP_TOLERANCE = 1e-5
NETWORK_TOLERANCE = 1e-4


def _file_values(args):
    return read_config(args.config) if args.config else {}


def _resolution(value):
    return None if value is None else parse_resolution(value)


### SETTINGS ###

@dataclass(frozen=True)
class EvalSettings:
    tau: float = 0.05
    threshold: float = 0.5
    split: str = 'test'
    data_seed: int = 0
    batch_size: int = 4

    limits = {
        'tau': (0.0, 1.0),
        'threshold': (0.0, 1.0),
        'split': ['test', 'all'],
        'data_seed': (0, 2 ** 32 - 1),
        'batch_size': (1, None),
    }

    def __post_init__(self):
        check_params(self)


@dataclass(frozen=True)
class SegmentSettings:
    """N = -1 and an empty resolution accept whatever the checkpoint was trained with"""
    tau: float = 0.05
    threshold: float = 0.5
    N: int = -1
    resolution: Tuple[int, ...] = ()
    native: bool = False
    overlay: bool = False

    limits = {
        'tau': (0.0, 1.0),
        'threshold': (0.0, 1.0),
        'N': (-1, 16),
    }

    def __post_init__(self):
        check_params(self)


@dataclass(frozen=True)
class GradcheckSettings:
    scope: str = 'all'
    N: int = 1
    resolution: Tuple[int, int] = (32, 32)
    base_channels: int = 8
    entries: int = 200
    seed: int = 0

    limits = {
        'scope': ['ops', 'network', 'all'],
        'N': (0, 16),
        'entries': (1, None),
        'seed': (0, 2 ** 32 - 1),
    }

    def __post_init__(self):
        check_params(self)


@dataclass(frozen=True)
class InfoSettings:
    """info has nothing to configure, a config file may only be empty"""


### SUBCOMMANDS ###

def cmd_phantom(args):
    values = _file_values(args)
    file_clips, file_seed = values.pop('n_clips', 4), values.pop('seed', 0)
    n_clips = int(file_clips) if args.clips is None else args.clips
    seed = int(file_seed) if args.seed is None else args.seed
    params = build(PhantomParams, values, dict(
        frames=args.frames, resolution=_resolution(args.size), branching_depth=args.depth,
        radius_range=args.radius, front_speed=args.speed, motion_amplitude=args.amplitude,
        motion_period=args.period, noise_std=args.noise_std, noise_scale=args.noise_scale,
        blob_count=args.blobs, occlusion=True if args.occlusion else None, contrast=args.contrast, fps=args.fps))
    written = gen_phantom_dataset(n_clips, params, seed, args.out)
    print("wrote {} clips of {} frames at {}x{} to {}".format(len(written), params.frames, *params.resolution,
                                                               args.out))
    return 0


def cmd_train(args):
    values = _file_values(args)
    data_seed = args.data_seed
    if data_seed is None and 'data_seed' not in values:
        data_seed = args.seed
    config = build(TrainConfig, values, dict(
        N=args.n, epochs=args.epochs, batch_size=args.batch_size, lr=args.lr, optimizer=args.optimizer,
        weight_decay=args.weight_decay, resolution=_resolution(args.size), base_channels=args.base_channels,
        seed=args.seed, data_seed=data_seed, checkpoint=args.checkpoint, log=args.log, eval_every=args.eval_every,
        tau=args.tau, threshold=args.threshold, max_steps=args.max_steps, init_weights=args.init_weights,
        plot=args.plot))
    _, log = train(config, load_dataset(args.data))
    print("steps={} final_loss={:.6f} best_test_iou={:.4f} best_epoch={}".format(
        len(log.steps), log.losses[-1], log.best_iou, log.best_epoch))
    if config.checkpoint:
        print("checkpoint={}".format(config.checkpoint))
    if config.log:
        print("log={}".format(config.log))
    return 0


def cmd_eval(args):
    values = _file_values(args)
    data_seed = args.data_seed
    if data_seed is None and 'data_seed' not in values:
        data_seed = args.seed
    settings = build(EvalSettings, values, dict(tau=args.tau, threshold=args.threshold, split=args.split,
                                                data_seed=data_seed, batch_size=args.batch_size))
    params, config = load_checkpoint(args.checkpoint)
    clips = load_dataset(args.data)
    if settings.split == 'test':
        clips = partition(clips, settings.data_seed).test
    result = evaluate_clips(params, clips, settings.tau, settings.threshold, settings.batch_size)
    summary = result.summary()
    print("{:<20s} {:>8s} {:>12s} {:>12s} {:>8s}".format('variant', 'iou', 'sensitivity', 'specificity', 'dice'))
    for name, m in summary.items():
        print("{:<20s} {:8.4f} {:12.4f} {:12.4f} {:8.4f}".format(
            name, m['iou'], m['sensitivity'], m['specificity'], m['dice']))
    if args.out:
        result.write(args.out)
    return 0


def cmd_segment(args):
    settings = build(SegmentSettings, _file_values(args), dict(
        tau=args.tau, threshold=args.threshold, N=args.n, resolution=_resolution(args.size), native=args.native,
        overlay=args.overlay))
    params, config = load_checkpoint(args.checkpoint)
    clip = load_clip(args.clip, labels=False)
    masks = segment_video(params, clip, N=None if settings.N < 0 else settings.N,
                          resolution=settings.resolution or None, tau=settings.tau, threshold=settings.threshold,
                          native=settings.native)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, mask in enumerate(masks):
        Image.fromarray(mask * np.uint8(255)).save(out / "{:05d}.png".format(i))
    if settings.overlay:
        from .analysis.plotting import plot_overlay
        for i, mask in enumerate(masks):
            plot_overlay(preprocess_frame(clip.frames[i], mask.shape), mask,
                         out / "overlay_{:05d}.png".format(i), title="{} frame {}".format(clip.id, i))
    print("wrote {} masks to {}".format(len(masks), out))
    return 0


def cmd_gradcheck(args):
    settings = build(GradcheckSettings, _file_values(args), dict(
        scope=args.scope, N=args.n, resolution=_resolution(args.size), base_channels=args.base_channels,
        entries=args.entries, seed=args.seed))
    results = {}
    tolerances = {}
    if settings.scope in ('ops', 'all'):
        for name, error in run_op_suite(seed=settings.seed).items():
            results[name], tolerances[name] = error, OP_TOLERANCE
    if settings.scope in ('network', 'all'):
        config = ModelConfig(N=settings.N, in_resolution=settings.resolution, base_channels=settings.base_channels,
                             seed=settings.seed)
        results['network'] = network_gradcheck(config, entries=settings.entries, seed=settings.seed)
        tolerances['network'] = NETWORK_TOLERANCE
    failed = 0
    print("{:<20s} {:>12s} {:>10s} {}".format('op', 'rel_error', 'tolerance', 'status'))
    for name, error in results.items():
        ok = bool(error < tolerances[name])
        failed += not ok
        print("{:<20s} {:12.3e} {:10.0e} {}".format(name, error, tolerances[name], 'ok' if ok else 'FAIL'))
    return 0 if failed == 0 else 1


def cmd_info(args):
    build(InfoSettings, _file_values(args))
    params, config = load_checkpoint(args.checkpoint)
    print("N={}".format(config.N))
    print("frames={}".format(config.frames))
    print("resolution={}x{}".format(*config.in_resolution))
    print("base_channels={}".format(config.base_channels))
    print("parameters={}".format(parameter_count(config)))
    print("tensors={}".format(len(params)))
    return 0


### PARSER ###

def _common(parser):
    parser.add_argument('--config', help="flat key=value file, flags override its values")
    parser.add_argument('--seed', type=int, help="seed for every random choice of the command")


def build_parser():
    parser = argparse.ArgumentParser(prog='cavs', description="3D-2D angiography video segmentation")
    parser.add_argument('--version', action='version', version='%(prog)s ' + __version__)
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('-v', '--verbose', action='store_true', help="debug logging")
    verbosity.add_argument('-q', '--quiet', action='store_true', help="warnings and errors only")
    sub = parser.add_subparsers(dest='command', metavar='command')
    sub.required = True

    p = sub.add_parser('phantom', help="generate a synthetic dataset")
    _common(p)
    p.add_argument('--out', required=True, help="dataset directory to write")
    p.add_argument('--clips', type=int, help="number of clips (4)")
    p.add_argument('--frames', type=int, help="frames per clip (24)")
    p.add_argument('--size', help="resolution, 64 or 64x64")
    p.add_argument('--depth', type=int, help="branching depth of the vessel tree")
    p.add_argument('--radius', help="tube radius range min,max in pixels")
    p.add_argument('--speed', type=float, help="contrast front speed in pixels per frame")
    p.add_argument('--amplitude', type=float, help="cardiac motion amplitude in pixels")
    p.add_argument('--period', type=int, help="cardiac motion period in frames")
    p.add_argument('--noise-std', type=float, help="std of the additive noise")
    p.add_argument('--noise-scale', type=float, help="scale of the signal dependent noise")
    p.add_argument('--blobs', type=int, help="number of background blobs")
    p.add_argument('--occlusion', action='store_true', help="add a vessel crossing the tree")
    p.add_argument('--contrast', type=float, help="darkness of a filled vessel")
    p.add_argument('--fps', type=float, help="frame rate written to meta.txt")
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser('train', help="train a network")
    _common(p)
    p.add_argument('--data', required=True, help="dataset directory")
    p.add_argument('--n', type=int, help="auxiliary frames on each side of the target (1)")
    p.add_argument('--epochs', type=int)
    p.add_argument('--batch-size', type=int)
    p.add_argument('--lr', type=float)
    p.add_argument('--optimizer', choices=['sgd', 'adam'], help="update rule (sgd)")
    p.add_argument('--weight-decay', type=float)
    p.add_argument('--size', help="network resolution, 448 or 448x448")
    p.add_argument('--base-channels', type=int, help="width of the first encoder stage (64)")
    p.add_argument('--data-seed', type=int, help="seed of the train/test cut and shuffling, defaults to --seed")
    p.add_argument('--checkpoint', help="final checkpoint path, the best one goes next to it")
    p.add_argument('--log', help="csv file of step losses")
    p.add_argument('--eval-every', type=int, help="epochs between test evaluations")
    p.add_argument('--tau', type=float, help="relative area threshold of the post-processing")
    p.add_argument('--threshold', type=float, help="probability threshold")
    p.add_argument('--max-steps', type=int, help="stop after this many optimizer steps, 0 = no limit")
    p.add_argument('--init-weights', help=".npz archive of named tensors to start from")
    p.add_argument('--plot', help="image file for the loss and IOU curves")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser('eval', help="score a checkpoint on a dataset")
    _common(p)
    p.add_argument('--data', required=True, help="dataset directory")
    p.add_argument('--checkpoint', required=True)
    p.add_argument('--split', choices=['test', 'all'], help="held-out slices (default) or whole clips")
    p.add_argument('--data-seed', type=int, help="seed of the train/test cut, defaults to --seed")
    p.add_argument('--tau', type=float)
    p.add_argument('--threshold', type=float)
    p.add_argument('--batch-size', type=int)
    p.add_argument('--out', help="prefix of the csv reports")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser('segment', help="segment every frame of a clip")
    _common(p)
    p.add_argument('--clip', required=True, help="clip directory with frames/")
    p.add_argument('--checkpoint', required=True)
    p.add_argument('--out', required=True, help="directory for the mask images")
    p.add_argument('--n', type=int, help="expected N, rejected if the checkpoint differs")
    p.add_argument('--size', help="expected resolution, rejected if the checkpoint differs")
    p.add_argument('--tau', type=float)
    p.add_argument('--threshold', type=float)
    p.add_argument('--native', action='store_true', default=None, help="write masks at the clip's own resolution")
    p.add_argument('--overlay', action='store_true', default=None, help="also write frame and mask side by side")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser('gradcheck', help="finite-difference gradient checks")
    _common(p)
    p.add_argument('--scope', choices=['ops', 'network', 'all'], help="what to check (all)")
    p.add_argument('--n', type=int, help="N of the checked network (1)")
    p.add_argument('--size', help="resolution of the checked network (32)")
    p.add_argument('--base-channels', type=int, help="width of the checked network (8)")
    p.add_argument('--entries', type=int, help="parameter entries checked in the network (200)")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser('info', help="summarise a checkpoint")
    _common(p)
    p.add_argument('checkpoint')
    p.set_defaults(func=cmd_info)
    return parser


def configure_logging(args):
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)


def run(argv=None):
    """
    Parses argv and runs one subcommand.

    returns:
        exit code: 0 success, 1 runtime failure, 2 bad usage
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code is None else exc.code
    configure_logging(args)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print("error: {}: {}".format(type(exc).__name__, exc), file=sys.stderr)
        return 1


def main():
    sys.exit(run())
