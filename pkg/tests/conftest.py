import os
from dataclasses import replace

import numpy as np
import pytest

from cavs.data.phantom import PhantomParams, gen_phantom
from cavs.model.config import ModelConfig


def pytest_collection_modifyitems(config, items):
    if os.environ.get('CAVS_RUN_SLOW') == '1':
        return
    skip = pytest.mark.skip(reason="slow, set CAVS_RUN_SLOW=1 to run")
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config():
    return ModelConfig(N=1, in_resolution=(32, 32), base_channels=8)


@pytest.fixture
def small_phantom_params():
    return PhantomParams(resolution=(32, 32), frames=10, branching_depth=2, radius_range=(1.0, 2.0),
                         front_speed=6.0, blob_count=2)


@pytest.fixture
def phantom_clips(small_phantom_params):
    return [gen_phantom(replace(small_phantom_params, seed=s), clip_id='c{}'.format(s)) for s in (1, 2)]
