"""
Overlap losses and segmentation metrics. The soft forms work on probability
maps and return analytic gradients for training; the binary forms work on
strict {0, 1} masks for evaluation. Empty-vs-empty comparisons score 1.
"""
from dataclasses import asdict, dataclass

import numpy as np

from ..engine.optim import decay_penalty
from ..errors import ShapeError


def _same_shape(a, b):
    if a.shape != b.shape:
        raise ShapeError("masks have different shapes {} and {}".format(a.shape, b.shape))


def _ratio(num, den):
    return 1.0 if den == 0 else num / den


### SOFT (TRAINING) FORMS ###

def soft_dice(pred, target, smooth=1.0):
    """
    (2*sum(p*t) + smooth) / (sum(p) + sum(t) + smooth) and its gradient w.r.t. pred.

    args:
        pred (ndarray): probabilities in [0, 1]
        target (ndarray): binary mask of the same shape
        smooth (float): additive smoothing, 0 gives the plain set formula
    returns:
        (dice, grad) with grad shaped like pred
    """
    _same_shape(pred, target)
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    inter = float(np.sum(p * t))
    den = float(np.sum(p) + np.sum(t)) + smooth
    num = 2.0 * inter + smooth
    if den == 0:
        return 1.0, np.zeros_like(pred)
    dice = num / den
    grad = (2.0 * t * den - num) / (den * den)
    return dice, grad.astype(pred.dtype, copy=False)


def dice_loss(pred, target, smooth=1.0):
    """1 - soft_dice, returns (loss, grad)"""
    dice, grad = soft_dice(pred, target, smooth)
    return 1.0 - dice, -grad


def batch_dice_loss(pred, target, smooth=1.0):
    """
    Dice loss computed per image and averaged over the batch.

    args:
        pred (ndarray): (B, 1, H, W) probabilities
        target (ndarray): (B, 1, H, W) or (B, H, W) binary masks
    returns:
        (loss, grad) with grad shaped like pred
    """
    target = np.asarray(target).reshape(pred.shape)
    grad = np.empty_like(pred)
    total = 0.0
    for i in range(pred.shape[0]):
        loss, g = dice_loss(pred[i], target[i], smooth)
        total += loss
        grad[i] = g / pred.shape[0]
    return total / pred.shape[0], grad


def total_loss(dice_loss_value, params, weight_decay, decayed=None):
    """
    Dice loss plus the L2 regularisation term (weight_decay / 2) * sum ||w||^2.
    The SGD update applies the matching decay itself, this is the reported value.
    """
    return dice_loss_value + decay_penalty(params, weight_decay, decayed)


### BINARY (EVALUATION) FORMS ###

def binarize(prob, threshold=0.5):
    """1 where prob >= threshold. Rejects values outside [0, 1]."""
    prob = np.asarray(prob)
    if prob.size and (np.nanmin(prob) < 0 or np.nanmax(prob) > 1 or np.isnan(prob).any()):
        raise ValueError("probabilities must lie in [0, 1]")
    return (prob >= threshold).astype(np.uint8)


def _check_binary(mask):
    mask = np.asarray(mask)
    if mask.dtype != bool and not np.isin(mask, (0, 1)).all():
        raise ValueError("mask is not binary")
    return mask.astype(bool)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other):
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn)


def confusion(pred, target):
    _same_shape(np.asarray(pred), np.asarray(target))
    p = _check_binary(pred)
    t = _check_binary(target)
    tp = int(np.count_nonzero(p & t))
    fp = int(np.count_nonzero(p & ~t))
    fn = int(np.count_nonzero(~p & t))
    return ConfusionCounts(tp, fp, p.size - tp - fp - fn, fn)


def sensitivity(counts):
    """true positive rate tp / (tp + fn)"""
    return _ratio(counts.tp, counts.tp + counts.fn)


def specificity(counts):
    """true negative rate tn / (tn + fp)"""
    return _ratio(counts.tn, counts.tn + counts.fp)


def iou_from_counts(counts):
    return _ratio(counts.tp, counts.tp + counts.fp + counts.fn)


def dice_from_counts(counts):
    return _ratio(2 * counts.tp, 2 * counts.tp + counts.fp + counts.fn)


def iou(pred, target):
    """|X & Y| / |X | Y|, 1 when both masks are empty"""
    return iou_from_counts(confusion(pred, target))


def dice_coefficient(pred, target):
    """2|X & Y| / (|X| + |Y|) on binary masks, 1 when both are empty"""
    return dice_from_counts(confusion(pred, target))


@dataclass
class MetricsRecord:
    clip_id: str
    frame_index: int
    iou: float
    sensitivity: float
    specificity: float
    dice: float

    @classmethod
    def from_masks(cls, clip_id, frame_index, pred, target):
        counts = confusion(pred, target)
        return cls(clip_id, int(frame_index), iou_from_counts(counts), sensitivity(counts), specificity(counts),
                   dice_from_counts(counts)), counts

    def as_dict(self):
        return asdict(self)
