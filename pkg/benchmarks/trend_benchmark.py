"""
Trains the 2D baseline (N=0) and the 3D-2D models (N=1, N=2) on a noisy
phantom dataset with occluding vessel crossings and reports the test IOU of
each run. Expect the median IOU to grow with N; nothing here is asserted.

    python benchmarks/trend_benchmark.py --out trend --epochs 50 --seeds 3

Takes a few CPU hours at the defaults.
"""
import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import pandas as pd

from cavs.analysis.plotting import plot_trend
from cavs.data.phantom import PhantomParams, clip_seeds, gen_phantom
from cavs.pipeline import TrainConfig, train

logger = logging.getLogger('trend_benchmark')

PHANTOM = PhantomParams(resolution=(64, 64), frames=24, occlusion=True, noise_std=0.12, noise_scale=0.08,
                        blob_count=10, motion_amplitude=3.0)
VARIANTS = {'2D (N=0)': 0, '3D-2D N=1': 1, '3D-2D N=2': 2}


def make_clips(n_clips, seed):
    return [gen_phantom(replace(PHANTOM, seed=s), clip_id="clip_{:03d}".format(i))
            for i, s in enumerate(clip_seeds(n_clips, seed))]


def run_benchmark(out, n_clips=12, epochs=50, seeds=3, base_channels=16):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    clips = make_clips(n_clips, seed=2024)
    rows = []
    for seed in range(seeds):
        for variant, N in VARIANTS.items():
            config = TrainConfig(N=N, resolution=PHANTOM.resolution, base_channels=base_channels, epochs=epochs,
                                 seed=seed, data_seed=seed, eval_every=epochs, checkpoint='', log='')
            _, log = train(config, clips)
            last = log.evals[-1]
            rows.append(dict(variant=variant, N=N, seed=seed, test_iou=last['postprocessed_mean_iou'],
                             raw_iou=last['raw_mean_iou'], final_loss=log.losses[-1], seconds=log.wall_clock))
            logger.info("%s seed %d: test IOU %.4f", variant, seed, rows[-1]['test_iou'])
    results = pd.DataFrame(rows)
    results.to_csv(out / 'trend.csv', index=False, float_format='%.6f')
    plot_trend(results, out / 'trend.png')
    return results


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    parser.add_argument('--out', default='trend')
    parser.add_argument('--clips', type=int, default=12)
    parser.add_argument('--epochs', type=int, default=50)
    parser.add_argument('--seeds', type=int, default=3)
    parser.add_argument('--base-channels', type=int, default=16)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    results = run_benchmark(args.out, args.clips, args.epochs, args.seeds, args.base_channels)
    print(results.groupby('variant', sort=False)['test_iou'].median().to_string())


if __name__ == '__main__':
    main()
