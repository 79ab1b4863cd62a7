from dataclasses import replace

import numpy as np
import pytest

from cavs.data.dataset import clip_samples
from cavs.data.phantom import PhantomParams, gen_phantom
from cavs.pipeline import TrainConfig, train, train_step, epoch_order
from cavs.model import build_network, decayed_names


@pytest.mark.slow
def test_overfits_two_phantom_clips():
    params = PhantomParams(resolution=(64, 64), frames=12, noise_std=0.01, blob_count=2)
    clips = [gen_phantom(replace(params, seed=s), clip_id='o{}'.format(s)) for s in (0, 1)]
    # plain SGD at 2e-4 barely moves the head bias in 500 steps, Adam rescales the dice gradient
    config = TrainConfig(N=1, resolution=(64, 64), base_channels=8, lr=1e-3, weight_decay=0.0,
                         optimizer='adam', epochs=1, checkpoint='', log='', batch_size=4)
    net = build_network(config.model_config())
    decayed = decayed_names(config.model_config())
    samples = [s for clip in clips for s in clip_samples(clip, 1, (64, 64))[4:8]]
    assert {s.clip_id for s in samples} == {'o0', 'o1'}
    state = {}
    step = 0
    train_dice = 0.0
    dice_loss = 1.0
    for epoch in range(500):
        order = epoch_order(len(samples), 0, epoch)
        ious = []
        for begin in range(0, len(order), config.batch_size):
            batch = [samples[i] for i in order[begin:begin + config.batch_size]]
            _, dice_loss, batch_ious = train_step(net, batch, config, decayed, state)
            ious.extend(batch_ious)
            step += 1
        train_dice = float(np.mean([2 * v / (1 + v) for v in ious]))
        if train_dice > 0.95 or step >= 500:
            break
    assert step <= 500
    assert train_dice > 0.95, (step, dice_loss)


@pytest.mark.slow
def test_loss_decreases_over_epochs(phantom_clips):
    config = TrainConfig(N=1, resolution=(32, 32), base_channels=8, lr=0.1, epochs=20, checkpoint='', log='',
                         eval_every=20)
    _, log = train(config, phantom_clips)
    means = [e['mean_loss'] for e in log.epochs]
    assert np.mean(means[-3:]) < means[0]
