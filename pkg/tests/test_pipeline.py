import importlib
from dataclasses import replace

import numpy as np
import pytest

from cavs.analysis.metrics import binarize, confusion, iou_from_counts
from cavs.data.dataset import dataset_samples, partition
from cavs.data.phantom import gen_phantom
from cavs.errors import ConfigMismatchError, DatasetError, NonFiniteLossError
from cavs.model import build_network, load_checkpoint
from cavs.pipeline import TrainConfig, epoch_order, evaluate, predict, score_predictions, segment_video, train

# the package re-exports train(), which hides the submodule of the same name
train_module = importlib.import_module('cavs.pipeline.train')


def tiny_train_config(tmp_path, **overrides):
    values = dict(N=1, resolution=(32, 32), base_channels=8, epochs=1, seed=3, data_seed=5,
                  checkpoint=str(tmp_path / 'model.ckpt'), log=str(tmp_path / 'log.csv'))
    values.update(overrides)
    return TrainConfig(**values)


def test_training_defaults():
    config = TrainConfig()
    assert (config.lr, config.batch_size, config.epochs) == (2e-4, 4, 100)


@pytest.mark.parametrize('bad', [dict(lr=0.0), dict(batch_size=0), dict(epochs=0), dict(tau=2.0),
                                 dict(optimizer='rmsprop')])
def test_config_limits(bad):
    with pytest.raises(ValueError):
        TrainConfig(**bad)


def test_best_checkpoint_path():
    assert TrainConfig(checkpoint='runs/a.ckpt').best_checkpoint.endswith('a.best.ckpt')
    assert TrainConfig(checkpoint='').best_checkpoint == ''


def test_epoch_order_is_a_permutation():
    for epoch in range(5):
        order = epoch_order(23, 1, epoch)
        assert sorted(order.tolist()) == list(range(23))
    assert not np.array_equal(epoch_order(23, 1, 0), epoch_order(23, 1, 1))
    np.testing.assert_array_equal(epoch_order(23, 1, 0), epoch_order(23, 1, 0))


def test_one_epoch_of_eight_samples_is_two_steps(tmp_path, phantom_clips):
    # a 10 frame clip leaves 8 training frames after the cut
    params, log = train(tiny_train_config(tmp_path), phantom_clips[:1])
    assert [s['step'] for s in log.steps] == [0, 1]
    assert all(np.isfinite(log.losses))
    assert len(log.epochs) == 1 and 0.0 <= log.epochs[0]['train_iou'] <= 1.0
    assert (tmp_path / 'model.ckpt').exists()
    assert (tmp_path / 'model.best.ckpt').exists()
    assert (tmp_path / 'log.csv').read_text().splitlines()[0] == 'step,epoch,loss,dice_loss'
    loaded, config = load_checkpoint(tmp_path / 'model.ckpt')
    assert config.N == 1 and config.in_resolution == (32, 32)


def test_training_is_deterministic(tmp_path, phantom_clips):
    a, b = tmp_path / 'a', tmp_path / 'b'
    a.mkdir()
    b.mkdir()
    _, log_a = train(tiny_train_config(a, epochs=2), phantom_clips)
    _, log_b = train(tiny_train_config(b, epochs=2), phantom_clips)
    assert log_a.losses == log_b.losses
    assert (a / 'model.ckpt').read_bytes() == (b / 'model.ckpt').read_bytes()
    assert (a / 'log.csv').read_bytes() == (b / 'log.csv').read_bytes()
    assert (a / 'log_epochs.csv').read_bytes() == (b / 'log_epochs.csv').read_bytes()


def test_training_changes_parameters(tmp_path, phantom_clips):
    config = tiny_train_config(tmp_path, checkpoint='', log='')
    params, _ = train(config, phantom_clips[:1])
    initial = build_network(config.model_config())
    assert any(not np.array_equal(params[n], initial[n]) for n in params)


def test_max_steps_stops_early(tmp_path, phantom_clips):
    _, log = train(tiny_train_config(tmp_path, epochs=5, max_steps=3, batch_size=2), phantom_clips)
    assert len(log.steps) == 3


def test_adam_training_runs_and_repeats(tmp_path, phantom_clips):
    config = tiny_train_config(tmp_path, optimizer='adam', lr=1e-3, epochs=2, checkpoint='', log='')
    params_a, log_a = train(config, phantom_clips)
    params_b, log_b = train(config, phantom_clips)
    assert all(np.isfinite(log_a.losses))
    assert log_a.losses == log_b.losses
    assert all(np.array_equal(params_a[n], params_b[n]) for n in params_a)


def test_non_finite_loss_aborts(tmp_path, phantom_clips, monkeypatch):
    monkeypatch.setattr(train_module, 'batch_dice_loss',
                        lambda pred, target, smooth: (float('nan'), np.zeros_like(pred)))
    with pytest.raises(NonFiniteLossError) as info:
        train(tiny_train_config(tmp_path), phantom_clips[:1])
    assert info.value.step == 0


def test_empty_training_set_rejected(tmp_path):
    with pytest.raises(DatasetError):
        train(tiny_train_config(tmp_path), [])


### EVALUATION ###

def test_ground_truth_scores_one(phantom_clips):
    samples = dataset_samples(phantom_clips, 1, (32, 32))
    result = score_predictions((s.clip_id, s.center_index, s.target_mask, s.target_mask) for s in samples)
    summary = result.summary()
    for name in ('raw_mean', 'raw_pooled'):
        assert summary[name] == {'iou': 1.0, 'sensitivity': 1.0, 'specificity': 1.0, 'dice': 1.0}, name
    # post-processing may only drop small fragments of the mask
    assert summary['postprocessed_pooled']['specificity'] == 1.0


def test_background_prediction_scores(phantom_clips):
    samples = [s for s in dataset_samples(phantom_clips, 1, (32, 32)) if s.target_mask.any()]
    result = score_predictions((s.clip_id, s.center_index, np.zeros_like(s.target_mask), s.target_mask)
                               for s in samples)
    summary = result.summary()
    assert summary['raw_mean']['sensitivity'] == 0.0
    assert summary['raw_mean']['specificity'] == 1.0


def test_evaluate_matches_independent_count(tiny_config, phantom_clips):
    params = build_network(tiny_config)
    _, test = partition(phantom_clips, 0)
    samples = dataset_samples(test, 1, (32, 32))
    result = evaluate(params, samples)
    assert len(result.raw) == len(samples)
    probs = predict(params, samples)
    for record, prob, sample in zip(result.raw, probs, samples):
        counts = confusion(binarize(prob), sample.target_mask)
        assert record.iou == iou_from_counts(counts)
        assert (record.clip_id, record.frame_index) == (sample.clip_id, sample.center_index)
    assert result.summary()['raw_mean']['iou'] == pytest.approx(np.mean([r.iou for r in result.raw]))


def test_evaluate_rejects_empty_and_mismatched(tiny_config, phantom_clips):
    params = build_network(tiny_config)
    with pytest.raises(DatasetError):
        evaluate(params, [])
    with pytest.raises(ValueError):
        evaluate(params, dataset_samples(phantom_clips[:1], 2, (32, 32)))


def test_evaluation_reports(tmp_path, tiny_config, phantom_clips):
    params = build_network(tiny_config)
    result = evaluate(params, dataset_samples(phantom_clips[:1], 1, (32, 32)))
    result.write(tmp_path / 'eval')
    for name in ('eval_raw.csv', 'eval_postprocessed.csv', 'eval_summary.csv'):
        assert (tmp_path / name).exists()


### WHOLE VIDEO ###

def test_segment_video(tiny_config, phantom_clips):
    params = build_network(tiny_config)
    clip = phantom_clips[0]
    masks = segment_video(params, clip)
    assert len(masks) == len(clip)
    assert all(m.shape == (32, 32) and set(np.unique(m).tolist()) <= {0, 1} for m in masks)
    assert len(segment_video(params, clip, N=1, resolution='32x32')) == len(clip)


def test_segment_video_rejects_conflicts(tiny_config, phantom_clips):
    params = build_network(tiny_config)
    with pytest.raises(ConfigMismatchError):
        segment_video(params, phantom_clips[0], N=2)
    with pytest.raises(ConfigMismatchError):
        segment_video(params, phantom_clips[0], resolution=64)


def test_segment_video_native_resolution(tiny_config, small_phantom_params):
    clip = gen_phantom(replace(small_phantom_params, resolution=(40, 48), frames=4))
    masks = segment_video(build_network(tiny_config), clip, native=True)
    assert masks[0].shape == (40, 48)
