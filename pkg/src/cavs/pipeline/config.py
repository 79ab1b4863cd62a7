"""
Training hyperparameters. Defaults: fixed
learning rate 2e-4, batch size 4, 100 epochs of plain SGD. ``optimizer="adam"``
swaps in Adam for short runs.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

from ..model.config import ModelConfig
from ..params import check_params, raise_param_error


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 2e-4
    optimizer: str = 'sgd'
    batch_size: int = 4
    epochs: int = 100
    weight_decay: float = 1e-4
    N: int = 1
    resolution: Tuple[int, int] = (448, 448)
    base_channels: int = 64
    seed: int = 0
    data_seed: int = 0
    checkpoint: str = 'cavs.ckpt'
    log: str = 'train_log.csv'
    eval_every: int = 1
    tau: float = 0.05
    threshold: float = 0.5
    smooth: float = 1.0
    max_steps: int = 0
    init_weights: str = ''
    plot: str = ''

    limits = {
        'lr': (1e-12, None),
        'optimizer': ['sgd', 'adam'],
        'batch_size': (1, None),
        'epochs': (1, None),
        'weight_decay': (0.0, None),
        'N': (0, 16),
        'resolution': (32, 4096),
        'base_channels': (2, 1024),
        'seed': (0, 2 ** 32 - 1),
        'data_seed': (0, 2 ** 32 - 1),
        'eval_every': (1, None),
        'tau': (0.0, 1.0),
        'threshold': (0.0, 1.0),
        'smooth': (0.0, None),
        'max_steps': (0, None),
    }

    def __post_init__(self):
        resolution = self.resolution
        if isinstance(resolution, int):
            resolution = (resolution, resolution)
        object.__setattr__(self, 'resolution', tuple(int(v) for v in resolution))
        if len(self.resolution) != 2:
            raise_param_error("resolution must be (H, W), got {}".format(self.resolution))
        check_params(self)

    def model_config(self):
        return ModelConfig(N=self.N, in_resolution=self.resolution, base_channels=self.base_channels, seed=self.seed)

    @property
    def best_checkpoint(self):
        """<checkpoint stem>.best<suffix> next to the final checkpoint, '' when checkpoints are off"""
        if not self.checkpoint:
            return ''
        path = Path(self.checkpoint)
        return str(path.with_name(path.stem + '.best' + path.suffix))
