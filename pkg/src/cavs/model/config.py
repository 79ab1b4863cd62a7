"""
Hyperparameters of the 3D-2D network.
"""
from dataclasses import dataclass
from typing import Tuple

from ..params import check_params, raise_param_error

#: residual basic blocks per encoder stage (ResNet-34 layout)
STAGE_BLOCKS = (3, 4, 6, 3)
#: five stride-2 reductions between input and bottleneck
DOWNSAMPLE = 32


@dataclass(frozen=True)
class ModelConfig:
    """
    N is the temporal half-window: the network sees N frames before and after
    the target frame. N = 0 is the plain 2D baseline whose fusion kernel has
    temporal extent 1.
    """
    N: int = 1
    in_resolution: Tuple[int, int] = (448, 448)
    base_channels: int = 64
    fusion_channels: int = 16
    fused_channels: int = 3
    seed: int = 0

    # tuple is an inclusive range, None means unbounded
    limits = {
        'N': (0, 16),
        'in_resolution': (DOWNSAMPLE, 4096),
        'base_channels': (2, 1024),
        'fusion_channels': (1, 1024),
        'fused_channels': (1, 1024),
        'seed': (0, 2 ** 32 - 1),
    }

    def __post_init__(self):
        object.__setattr__(self, 'in_resolution', tuple(int(v) for v in self.in_resolution))
        if len(self.in_resolution) != 2:
            raise_param_error("in_resolution must be (H, W), got {}".format(self.in_resolution))
        check_params(self)
        for axis, size in zip('HW', self.in_resolution):
            if size % DOWNSAMPLE:
                raise_param_error("resolution {} = {} is not divisible by {}".format(axis, size, DOWNSAMPLE))
        if self.base_channels % 2:
            raise_param_error("base_channels must be even, got {}".format(self.base_channels))

    @property
    def frames(self):
        return 2 * self.N + 1

    @property
    def stage_channels(self):
        b = self.base_channels
        return (b, 2 * b, 4 * b, 8 * b)

    @property
    def head_channels(self):
        """width of the decoder output feeding the segmentation head"""
        return self.base_channels // 2

    def compatible(self, other):
        """same architecture, seeds may differ"""
        return (self.N, self.in_resolution, self.base_channels, self.fusion_channels, self.fused_channels) == \
            (other.N, other.in_resolution, other.base_channels, other.fusion_channels, other.fused_channels)
