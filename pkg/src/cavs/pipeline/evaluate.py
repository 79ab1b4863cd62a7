"""
Batched inference and scoring. Every test image is scored twice, on the
thresholded network output and on the post-processed mask, and each variant
is summarised both as a mean over images and from pooled pixel counts.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List

from ..analysis.metrics import ConfusionCounts, MetricsRecord, binarize
from ..analysis.postprocess import postprocess
from ..analysis.report import mean_metrics, pooled_metrics, summary_frame, write_metrics_report
from ..config import parse_resolution
from ..data.dataset import clip_samples, dataset_samples, stack_batch
from ..data.preprocess import preprocess_mask
from ..errors import ConfigMismatchError, DatasetError, ShapeError
from ..model.network import forward

logger = logging.getLogger(__name__)

VARIANTS = ('raw', 'postprocessed')


def predict(params, samples, batch_size=4):
    """
    Probability maps for a list of ClipSample, in sample order.

    returns:
        list of (H, W) arrays
    """
    config = params.config
    expected = (config.frames,) + config.in_resolution
    probs = []
    for begin in range(0, len(samples), batch_size):
        batch = samples[begin:begin + batch_size]
        for s in batch:
            if s.window.shape != expected:
                raise ShapeError("sample {}:{} has window {}, network expects {}".format(
                    s.clip_id, s.center_index, s.window.shape, expected))
        frames, _ = stack_batch(batch)
        prob, _ = forward(frames, params)
        probs.extend(prob[:, 0])
    return probs


def segment_masks(probs, threshold=0.5, tau=0.05):
    """(raw, post-processed) binary masks for each probability map"""
    raw = [binarize(p, threshold) for p in probs]
    return raw, [postprocess(m, tau) for m in raw]


@dataclass
class Evaluation:
    raw: List[MetricsRecord] = field(default_factory=list)
    postprocessed: List[MetricsRecord] = field(default_factory=list)
    raw_counts: List[ConfusionCounts] = field(default_factory=list)
    postprocessed_counts: List[ConfusionCounts] = field(default_factory=list)

    def records(self, variant):
        return getattr(self, variant)

    def summary(self):
        """{'<variant>_mean' | '<variant>_pooled': {metric: value}}"""
        out = {}
        for variant in VARIANTS:
            out[variant + '_mean'] = mean_metrics(getattr(self, variant))
            out[variant + '_pooled'] = pooled_metrics(getattr(self, variant + '_counts'))
        return out

    @property
    def mean_iou(self):
        """selection score: mean IOU of the post-processed masks"""
        return self.summary()['postprocessed_mean']['iou']

    def write(self, prefix):
        """<prefix>_raw.csv, <prefix>_postprocessed.csv and <prefix>_summary.csv"""
        prefix = Path(prefix)
        for variant in VARIANTS:
            write_metrics_report(getattr(self, variant), prefix.with_name(prefix.name + '_' + variant + '.csv'))
        summary_frame(self.summary()).to_csv(prefix.with_name(prefix.name + '_summary.csv'),
                                             index_label='variant', float_format='%.6f')


def score_predictions(predictions, tau=0.05):
    """
    Scores binary predictions against their targets.

    args:
        predictions (iterable): (clip_id, frame_index, pred_mask, target_mask) tuples
        tau (float): relative area threshold of the post-processing
    returns:
        Evaluation
    """
    result = Evaluation()
    for clip_id, index, pred, target in predictions:
        record, counts = MetricsRecord.from_masks(clip_id, index, pred, target)
        result.raw.append(record)
        result.raw_counts.append(counts)
        record, counts = MetricsRecord.from_masks(clip_id, index, postprocess(pred, tau), target)
        result.postprocessed.append(record)
        result.postprocessed_counts.append(counts)
    if not result.raw:
        raise DatasetError("nothing to evaluate: the test set is empty")
    return result


def evaluate(params, samples, tau=0.05, threshold=0.5, batch_size=4):
    """
    Runs the network on test samples and scores raw and post-processed masks.

    args:
        params (NetworkParams): trained parameters
        samples (list of ClipSample): windows built with the network's N and resolution
    returns:
        Evaluation
    """
    if not samples:
        raise DatasetError("nothing to evaluate: the test set is empty")
    probs = predict(params, samples, batch_size)
    raw = [binarize(p, threshold) for p in probs]
    result = score_predictions(((s.clip_id, s.center_index, m, s.target_mask) for s, m in zip(samples, raw)), tau)
    logger.info("evaluated %d images: mean IOU raw %.4f, post-processed %.4f",
                len(samples), result.summary()['raw_mean']['iou'], result.mean_iou)
    return result


def evaluate_clips(params, clips, tau=0.05, threshold=0.5, batch_size=4):
    """evaluate on whole clips, windows built with the checkpoint's N and resolution"""
    config = params.config
    return evaluate(params, dataset_samples(clips, config.N, config.in_resolution), tau, threshold, batch_size)


def segment_video(params, clip, N=None, resolution=None, tau=0.05, threshold=0.5, batch_size=4, native=False):
    """
    One post-processed mask per frame of a clip.

    args:
        params (NetworkParams): trained parameters, N and resolution come from its config
        clip (Clip): frames to segment, labels are ignored
        N, resolution: optional expectations, rejected when they differ from the checkpoint
        native (bool): resize masks back to the clip's own resolution
    returns:
        list of uint8 {0, 1} masks
    """
    config = params.config
    if N is not None and int(N) != config.N:
        raise ConfigMismatchError("checkpoint was trained with N={}, got N={}".format(config.N, N))
    if resolution is not None and parse_resolution(resolution) != config.in_resolution:
        raise ConfigMismatchError("checkpoint expects {}x{}, got {}".format(*config.in_resolution, resolution))
    samples = clip_samples(clip, config.N, config.in_resolution)
    _, masks = segment_masks(predict(params, samples, batch_size), threshold, tau)
    if native and clip.resolution != config.in_resolution:
        masks = [preprocess_mask(m, clip.resolution) for m in masks]
    logger.debug("segmented %d frames of %s", len(masks), clip.id)
    return masks
