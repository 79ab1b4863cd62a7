"""
Training loop: plain SGD (or Adam) on the dice loss with L2 weight decay, a fixed
learning rate, a per-epoch shuffle that depends only on (data_seed, epoch)
and evaluation on the held-out slices every ``eval_every`` epochs.
"""
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List

import numpy as np
import pandas as pd

from ..analysis.metrics import batch_dice_loss, binarize, iou, total_loss
from ..data.dataset import dataset_samples, partition, stack_batch
from ..engine.optim import adam_step, sgd_step
from ..errors import DatasetError, NonFiniteLossError
from ..model.checkpoint import import_weights, save_checkpoint
from ..model.network import backward, build_network, decayed_names, forward
from .evaluate import evaluate

logger = logging.getLogger(__name__)


@dataclass
class TrainLog:
    """
    Per-step losses, per-epoch summaries and evaluation scores of one run.
    Wall-clock time is kept in memory only, the files written by ``write``
    depend on the seeds alone.
    """
    steps: List[Dict] = field(default_factory=list)
    epochs: List[Dict] = field(default_factory=list)
    evals: List[Dict] = field(default_factory=list)
    wall_clock: float = 0.0
    best_iou: float = -1.0
    best_epoch: int = -1

    @property
    def losses(self):
        return [s['loss'] for s in self.steps]

    def steps_frame(self):
        return pd.DataFrame(self.steps, columns=['step', 'epoch', 'loss', 'dice_loss'])

    def epochs_frame(self):
        return pd.DataFrame(self.epochs, columns=['epoch', 'steps', 'mean_loss', 'train_iou'])

    def evals_frame(self):
        return pd.DataFrame(self.evals)

    def write(self, path):
        """<path> holds the step losses, <stem>_epochs and <stem>_eval the summaries"""
        path = Path(path)
        self.steps_frame().to_csv(path, index=False, float_format='%.9g')
        self.epochs_frame().to_csv(path.with_name(path.stem + '_epochs.csv'), index=False, float_format='%.9g')
        if self.evals:
            self.evals_frame().to_csv(path.with_name(path.stem + '_eval.csv'), index=False, float_format='%.9g')


def _batches(order, batch_size):
    for begin in range(0, len(order), batch_size):
        yield order[begin:begin + batch_size]


def epoch_order(n_samples, data_seed, epoch):
    """visiting order of the training samples in one epoch"""
    return np.random.default_rng([data_seed, epoch]).permutation(n_samples)


def train_step(params, samples, config, decayed, state=None):
    """
    One optimizer update on a batch of samples. ``state`` carries the Adam
    moments between steps and is ignored by SGD.

    returns:
        (loss, dice_loss, per-image train IOUs)
    """
    frames, targets = stack_batch(samples)
    prob, trace = forward(frames, params)
    dice_value, grad = batch_dice_loss(prob, targets, config.smooth)
    loss = total_loss(dice_value, params, config.weight_decay, decayed)
    if not np.isfinite(loss):
        return loss, dice_value, None
    grads = backward(trace, params, grad.astype(params.dtype, copy=False)).param_grads
    if config.optimizer == 'adam':
        adam_step(params, grads, {} if state is None else state, config.lr, config.weight_decay, decayed)
    else:
        sgd_step(params, grads, config.lr, config.weight_decay, decayed)
    ious = [iou(binarize(prob[i, 0], config.threshold), s.target_mask) for i, s in enumerate(samples)]
    return loss, dice_value, ious


def train(config, clips):
    """
    Trains a network on the train slices of ``clips`` and evaluates on the
    test slices.

    args:
        config (TrainConfig): hyperparameters, seeds and output paths ('' disables a file)
        clips (list of Clip): full clips, cut by ``partition(clips, config.data_seed)``
    returns:
        (params, log): final parameters and TrainLog
    """
    model_config = config.model_config()
    train_clips, test_clips = partition(clips, config.data_seed)
    train_samples = dataset_samples(train_clips, config.N, config.resolution)
    test_samples = dataset_samples(test_clips, config.N, config.resolution)
    if not train_samples:
        raise DatasetError("the training set is empty")
    logger.info("training N=%d %dx%d on %d samples, %d held out", config.N, *config.resolution,
                len(train_samples), len(test_samples))

    params = build_network(model_config)
    if config.init_weights:
        import_weights(params, config.init_weights)
    decayed = decayed_names(model_config)
    state = {}
    log = TrainLog()
    started = time.perf_counter()
    step = 0
    done = False
    for epoch in range(config.epochs):
        order = epoch_order(len(train_samples), config.data_seed, epoch)
        losses, ious = [], []
        for batch in _batches(order, config.batch_size):
            batch_samples = [train_samples[i] for i in batch]
            loss, dice_value, batch_ious = train_step(params, batch_samples, config, decayed, state)
            if batch_ious is None:
                raise NonFiniteLossError(step, loss)
            log.steps.append(dict(step=step, epoch=epoch, loss=float(loss), dice_loss=float(dice_value)))
            logger.debug("step %d epoch %d loss %.6f", step, epoch, loss)
            losses.append(loss)
            ious.extend(batch_ious)
            step += 1
            if config.max_steps and step >= config.max_steps:
                done = True
                break
        log.epochs.append(dict(epoch=epoch, steps=len(losses), mean_loss=float(np.mean(losses)),
                               train_iou=float(np.mean(ious))))
        logger.info("epoch %d: mean loss %.5f, train IOU %.4f", epoch, log.epochs[-1]['mean_loss'],
                    log.epochs[-1]['train_iou'])
        last = done or epoch == config.epochs - 1
        if test_samples and ((epoch + 1) % config.eval_every == 0 or last):
            result = evaluate(params, test_samples, config.tau, config.threshold, config.batch_size)
            row = dict(epoch=epoch)
            for name, metrics in result.summary().items():
                row.update({"{}_{}".format(name, k): v for k, v in metrics.items()})
            log.evals.append(row)
            if result.mean_iou > log.best_iou:
                log.best_iou, log.best_epoch = result.mean_iou, epoch
                if config.best_checkpoint:
                    save_checkpoint(params, model_config, config.best_checkpoint)
        if done:
            break
    log.wall_clock = time.perf_counter() - started

    if config.checkpoint:
        save_checkpoint(params, model_config, config.checkpoint)
    if config.log:
        log.write(config.log)
    if config.plot:
        from ..analysis.plotting import plot_training_log
        plot_training_log(log.steps_frame(), log.epochs_frame(), config.plot)
    logger.info("finished %d steps in %.1f s, best post-processed test IOU %.4f at epoch %d",
                step, log.wall_clock, log.best_iou, log.best_epoch)
    return params, log
