from dataclasses import replace

import numpy as np
import pytest

from cavs.data.dataset import load_dataset
from cavs.data.phantom import (BACKGROUND_LEVEL, PhantomParams, clip_seeds, displace, gen_phantom,
                               gen_phantom_dataset, grow_tree, place_crossing, render_tubes)
from cavs.config import read_config


def test_same_seed_is_bit_identical(small_phantom_params):
    a, b = gen_phantom(small_phantom_params), gen_phantom(small_phantom_params)
    for fa, fb, la, lb in zip(a.frames, b.frames, a.labels, b.labels):
        np.testing.assert_array_equal(fa, fb)
        np.testing.assert_array_equal(la, lb)


def test_clip_layout(small_phantom_params):
    clip = gen_phantom(small_phantom_params)
    assert len(clip) == 10
    assert clip.frame_rate == 15.0
    assert clip.frames[0].dtype == np.uint8 and clip.frames[0].shape == (32, 32)
    assert all(set(np.unique(m).tolist()) <= {0, 1} for m in clip.labels)


def test_noise_free_pixels_are_dark_exactly_on_labels():
    params = PhantomParams(resolution=(48, 48), frames=8, noise_std=0.0, noise_scale=0.0, blob_count=0, seed=3)
    clip = gen_phantom(params)
    background = int(np.round(BACKGROUND_LEVEL * 255))
    for frame, label in zip(clip.frames, clip.labels):
        np.testing.assert_array_equal(frame < background, label.astype(bool))
        assert np.all(frame[label == 0] == background)


def test_contrast_front_advances():
    params = PhantomParams(resolution=(64, 64), frames=12, front_speed=2.0, motion_amplitude=0.0, seed=4)
    areas = [int(m.sum()) for m in gen_phantom(params).labels]
    assert areas[0] > 0
    assert areas == sorted(areas)
    assert areas[-1] > areas[0]


def test_tree_radius_decays(rng):
    tree = grow_tree(rng, PhantomParams(branching_depth=3, radius_range=(1.0, 4.0)))
    assert tree.radius.max() == 4.0
    assert tree.radius.min() >= 1.0
    assert len(np.unique(tree.branch)) == 15
    assert np.all(np.diff(tree.arclength[tree.branch == 0]) >= 0)


OCCLUSION_PARAMS = dict(resolution=(64, 64), frames=16, motion_period=8, occlusion=True, front_speed=8.0,
                        noise_std=0.0, noise_scale=0.0, blob_count=0)


@pytest.mark.parametrize('seed', [0, 1, 2])
def test_crossing_overlaps_and_separates(seed):
    params = PhantomParams(seed=seed, **OCCLUSION_PARAMS)
    tree = grow_tree(np.random.default_rng(seed), params)
    fill = tree.fill_frame(params.front_speed)
    tree_labels = [render_tubes(displace(tree.points[fill <= t], t, params, 0.0), tree.radius[fill <= t], params)[1]
                   for t in range(params.frames)]
    crossing = place_crossing(np.random.default_rng(seed + 100), tree, tree_labels, params, 0.0)
    assert crossing.offset(0, params.motion_period) == 0.0
    assert crossing.offset(params.motion_period // 2, params.motion_period) == pytest.approx(crossing.amplitude)
    overlaps = []
    for t in range(params.frames):
        line = displace(crossing.centre_line(t, params.motion_period), t, params, 0.0)
        _, label = render_tubes(line, np.full(len(line), crossing.radius), params)
        overlaps.append(int(np.count_nonzero(label & tree_labels[t])))
    assert max(overlaps) > 0
    assert min(overlaps) == 0


def test_occlusion_adds_a_vessel():
    params = PhantomParams(seed=1, **OCCLUSION_PARAMS)
    occluded = gen_phantom(params)
    plain = gen_phantom(replace(params, occlusion=False))
    extra = [int(o.sum()) - int(p.sum()) for o, p in zip(occluded.labels, plain.labels)]
    assert min(extra) >= 0
    assert max(extra) > 0
    for o, p in zip(occluded.labels, plain.labels):
        assert np.all(o >= p)


def test_params_validation():
    with pytest.raises(ValueError):
        PhantomParams(motion_period=1)
    with pytest.raises(ValueError):
        PhantomParams(radius_range=(3.0, 1.0))
    with pytest.raises(ValueError):
        PhantomParams(noise_std=-0.1)
    with pytest.raises(ValueError):
        PhantomParams(occlusion=True, frames=6, motion_period=12)
    assert PhantomParams(resolution=32).resolution == (32, 32)


def test_dataset_round_trip(tmp_path, small_phantom_params):
    written = gen_phantom_dataset(4, small_phantom_params, seed=7, root=tmp_path)
    assert len(written) == 4
    clips = load_dataset(tmp_path)
    assert [c.id for c in clips] == ['clip_000', 'clip_001', 'clip_002', 'clip_003']
    assert all(len(c) == small_phantom_params.frames for c in clips)
    assert all(c.frame_rate == 15.0 for c in clips)
    firsts = [c.frames[0].tobytes() for c in clips]
    assert len(set(firsts)) == 4
    manifest = read_config(tmp_path / 'phantom.txt')
    assert manifest['seed'] == '7' and manifest['n_clips'] == '4'


def test_clip_seeds_are_distinct_and_reproducible():
    seeds = clip_seeds(8, 7)
    assert len(set(seeds)) == 8
    assert seeds == clip_seeds(8, 7)
