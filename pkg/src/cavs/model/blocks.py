"""
Building blocks of the 3D-2D context encoder network: temporal fusion input,
residual encoder, dense atrous convolution (DAC) and residual multi-kernel
pooling (RMP) bottleneck, decoder and segmentation head.
"""
import numpy as np

from ..engine import functional as F
from ..engine.layers import (Block, Conv2d, Conv3d, ConvTranspose2d, InstanceNorm, MaxPool2d, ReLU, Sequential,
                             Sigmoid, conv_norm_relu)
from ..engine.tensor import GradPair
from ..errors import ShapeError
from .config import STAGE_BLOCKS

#: dilation rates of the cascaded 3x3 convs in each DAC branch, 0 closes the branch with a 1x1 conv
DAC_LADDERS = ((1,), (1, 3), (1, 3, 5), (1, 3, 5, 0))
#: RMP max-pool sizes, stride equals size
RMP_POOLS = (2, 3, 5, 6)


def _merge(*grad_maps):
    merged = {}
    for grads in grad_maps:
        merged.update(grads)
    return merged


class FusionBlock(Block):
    """
    3D conv over the 2N+1 stacked frames (temporal padding 0, so depth collapses
    to 1), then a 3x3 2D conv to the channel count the encoder expects,
    instance norm and ReLU.
    """
    def __init__(self, config, name='fusion'):
        super().__init__(name)
        self.frames = config.frames
        self.conv3d = Conv3d(name + '.conv3d', 1, config.fusion_channels, (config.frames, 3, 3),
                             padding=(0, 1, 1), bias=True)
        self.mix = Sequential(name, [Conv2d(name + '.conv2d', config.fusion_channels, config.fused_channels, 3,
                                            padding=1, bias=True),
                                     InstanceNorm(name + '.norm', config.fused_channels),
                                     ReLU()])
        self.children = [self.conv3d, self.mix]

    def forward(self, frames, params):
        if frames.ndim != 5 or frames.shape[1] != 1:
            raise ShapeError("frames must be (B, 1, 2N+1, H, W), got {}".format(frames.shape))
        if frames.shape[2] != self.frames:
            raise ShapeError("expected {} frames (2N+1), got {}".format(self.frames, frames.shape[2]))
        volume, c3 = self.conv3d.forward(frames, params)
        fused, c2 = self.mix.forward(volume[:, :, 0], params)
        return fused, (c3, c2)

    def backward(self, cache, params, grad_out):
        c3, c2 = cache
        mix = self.mix.backward(c2, params, grad_out)
        volume = self.conv3d.backward(c3, params, mix.input_grad[:, :, None])
        return GradPair(volume.input_grad, _merge(mix.param_grads, volume.param_grads))


class BasicBlock(Block):
    """
    Two 3x3 conv-norm units with an identity (or 1x1 projection) shortcut, ReLU after the sum.
    """
    def __init__(self, name, in_channels, out_channels, stride=1):
        super().__init__(name)
        self.main = Sequential(name, [
            conv_norm_relu(name + '.conv1', in_channels, out_channels, 3, stride, 1),
            conv_norm_relu(name + '.conv2', out_channels, out_channels, 3, 1, 1, relu=False),
        ])
        self.shortcut = None
        if stride != 1 or in_channels != out_channels:
            self.shortcut = conv_norm_relu(name + '.downsample', in_channels, out_channels, 1, stride, 0, relu=False)
        self.children = [self.main] + ([self.shortcut] if self.shortcut else [])

    def forward(self, x, params):
        main, cm = self.main.forward(x, params)
        if self.shortcut is None:
            short, cs = x, None
        else:
            short, cs = self.shortcut.forward(x, params)
        pre = F.add_forward(main, short)
        return F.relu_forward(pre), (cm, cs, pre)

    def backward(self, cache, params, grad_out):
        cm, cs, pre = cache
        g = F.relu_backward(pre, grad_out)
        main = self.main.backward(cm, params, g)
        if self.shortcut is None:
            return GradPair(main.input_grad + g, main.param_grads)
        short = self.shortcut.backward(cs, params, g)
        return GradPair(main.input_grad + short.input_grad, _merge(main.param_grads, short.param_grads))


class Encoder(Block):
    """
    ResNet-34 shaped encoder: 7x7 stride-2 stem, 3x3 stride-2 max-pool, then
    four residual stages. The output of every stage is kept as a skip.
    """
    def __init__(self, config, name='encoder'):
        super().__init__(name)
        width = config.base_channels
        self.stem = conv_norm_relu(name + '.stem', config.fused_channels, width, 7, 2, 3)
        self.pool = MaxPool2d(name + '.pool', 3, 2, 1)
        self.stages = []
        in_channels = width
        for i, (n_blocks, out_channels) in enumerate(zip(STAGE_BLOCKS, config.stage_channels)):
            blocks = []
            for j in range(n_blocks):
                stride = 2 if (j == 0 and i > 0) else 1
                blocks.append(BasicBlock('{}.stage{}.block{}'.format(name, i + 1, j), in_channels, out_channels,
                                         stride))
                in_channels = out_channels
            self.stages.append(Sequential('{}.stage{}'.format(name, i + 1), blocks))
        self.children = [self.stem, self.pool] + self.stages

    def forward(self, x, params):
        """returns ((bottleneck, skips), cache) with skips in stage order"""
        y, c_stem = self.stem.forward(x, params)
        y, c_pool = self.pool.forward(y, params)
        skips, c_stages = [], []
        for stage in self.stages:
            y, c = stage.forward(y, params)
            skips.append(y)
            c_stages.append(c)
        return (y, skips), (c_stem, c_pool, c_stages)

    def backward(self, cache, params, grad_out, skip_grads=None):
        c_stem, c_pool, c_stages = cache
        skip_grads = skip_grads or [None] * len(self.stages)
        grads = {}
        g = grad_out
        for i in reversed(range(len(self.stages))):
            if skip_grads[i] is not None:
                g = g + skip_grads[i]
            pair = self.stages[i].backward(c_stages[i], params, g)
            grads.update(pair.param_grads)
            g = pair.input_grad
        g = self.pool.backward(c_pool, params, g).input_grad
        pair = self.stem.backward(c_stem, params, g)
        grads.update(pair.param_grads)
        return GradPair(pair.input_grad, grads)


class DACBlock(Block):
    """
    Dense atrous convolution: parallel cascades of dilated 3x3 convs (padding
    equal to the dilation keeps the shape), each ReLU'd and summed onto the input.
    """
    def __init__(self, channels, name='dac'):
        super().__init__(name)
        self.branches = []
        for i, ladder in enumerate(DAC_LADDERS):
            layers = []
            for j, dilation in enumerate(ladder):
                layer_name = '{}.branch{}.conv{}'.format(name, i + 1, j)
                if dilation:
                    layers.append(Conv2d(layer_name, channels, channels, 3, 1, dilation, dilation, bias=True))
                else:
                    layers.append(Conv2d(layer_name, channels, channels, 1, bias=True))
            self.branches.append(Sequential('{}.branch{}'.format(name, i + 1), layers))
        self.children = list(self.branches)

    def forward(self, x, params):
        out = x.copy()
        caches = []
        for branch in self.branches:
            y, c = branch.forward(x, params)
            out += F.relu_forward(y)
            caches.append((c, y))
        return out, caches

    def backward(self, cache, params, grad_out):
        gx = grad_out.copy()
        grads = {}
        for branch, (c, y) in zip(self.branches, cache):
            pair = branch.backward(c, params, F.relu_backward(y, grad_out))
            gx += pair.input_grad
            grads.update(pair.param_grads)
        return GradPair(gx, grads)


class RMPBlock(Block):
    """
    Residual multi-kernel pooling: max-pools of several sizes, a 1x1 conv to one
    channel each, bilinear re-expansion and concatenation after the input.
    """
    def __init__(self, channels, name='rmp'):
        super().__init__(name)
        self.channels = channels
        self.convs = [Conv2d('{}.branch{}'.format(name, size), channels, 1, 1, bias=True) for size in RMP_POOLS]
        self.children = list(self.convs)

    def forward(self, x, params, adaptive=False):
        """
        adaptive clamps every pool window to the feature-map size instead of
        rejecting maps smaller than the largest pool
        """
        H, W = x.shape[2:]
        if not adaptive and min(H, W) < max(RMP_POOLS):
            raise ShapeError("RMP needs spatial dims >= {}, got {}x{}".format(max(RMP_POOLS), H, W))
        outs, caches = [x], []
        for size, conv in zip(RMP_POOLS, self.convs):
            kernel = (min(size, H), min(size, W))
            pooled, arg = F.maxpool2d_forward(x, kernel, kernel)
            reduced, c = conv.forward(pooled, params)
            outs.append(F.upsample_bilinear_forward(reduced, H, W))
            caches.append((arg, c, reduced.shape))
        return F.concat_channels_forward(outs), (x.shape, caches)

    def backward(self, cache, params, grad_out):
        x_shape, caches = cache
        parts = F.concat_channels_backward([x_shape[1]] + [1] * len(self.convs), grad_out)
        gx = parts[0].copy()
        grads = {}
        for conv, (arg, c, reduced_shape), g in zip(self.convs, caches, parts[1:]):
            g = F.upsample_bilinear_backward(reduced_shape, g)
            pair = conv.backward(c, params, g)
            grads.update(pair.param_grads)
            gx += F.maxpool2d_backward(x_shape, arg, pair.input_grad)
        return GradPair(gx, grads)


class DecoderBlock(Sequential):
    """
    1x1 reduce to a quarter of the channels, 3x3 stride-2 transposed conv, 1x1
    expand, each followed by instance norm and ReLU. Doubles the spatial size.
    """
    def __init__(self, name, in_channels, out_channels):
        mid = max(in_channels // 4, 1)
        super().__init__(name, [
            conv_norm_relu(name + '.reduce', in_channels, mid, 1),
            ConvTranspose2d(name + '.deconv.conv', mid, mid, 3, stride=2, padding=1, output_padding=1, bias=False),
            InstanceNorm(name + '.deconv.norm', mid),
            ReLU(),
            conv_norm_relu(name + '.expand', mid, out_channels, 1),
        ])


class Decoder(Block):
    """
    Four decoder blocks climbing back from the bottleneck, the outputs of the
    first three summed with the matching encoder skips, then a stride-2
    transposed conv and a 3x3 conv undo the stem's downsampling.
    """
    def __init__(self, config, name='decoder'):
        super().__init__(name)
        c1, c2, c3, c4 = config.stage_channels
        head = config.head_channels
        self.blocks = [
            DecoderBlock(name + '.block4', c4 + len(RMP_POOLS), c3),
            DecoderBlock(name + '.block3', c3, c2),
            DecoderBlock(name + '.block2', c2, c1),
            DecoderBlock(name + '.block1', c1, c1),
        ]
        # encoder skip index added after each block, None for the last block
        self.skip_index = (2, 1, 0, None)
        self.final = Sequential(name + '.final', [
            ConvTranspose2d(name + '.final.deconv', c1, head, 4, stride=2, padding=1, bias=True),
            ReLU(),
            Conv2d(name + '.final.conv', head, head, 3, 1, 1, bias=True),
            ReLU(),
        ])
        self.children = self.blocks + [self.final]

    def forward(self, x, skips, params):
        caches = []
        y = x
        for block, index in zip(self.blocks, self.skip_index):
            y, c = block.forward(y, params)
            caches.append(c)
            if index is not None:
                if y.shape != skips[index].shape:
                    raise ShapeError("{} output {} does not match encoder skip {} {}".format(
                        block.name, y.shape, index + 1, skips[index].shape))
                y = F.add_forward(y, skips[index])
        y, c_final = self.final.forward(y, params)
        return y, (caches, c_final)

    def backward(self, cache, params, grad_out):
        """returns (GradPair, skip grads in encoder stage order)"""
        caches, c_final = cache
        pair = self.final.backward(c_final, params, grad_out)
        grads = dict(pair.param_grads)
        g = pair.input_grad
        skip_grads = [None] * 4
        for block, index, c in zip(reversed(self.blocks), reversed(self.skip_index), reversed(caches)):
            if index is not None:
                skip_grads[index] = g
            pair = block.backward(c, params, g)
            grads.update(pair.param_grads)
            g = pair.input_grad
        return GradPair(g, grads), skip_grads


class Head(Sequential):
    """3x3 conv to one channel and a sigmoid"""
    def __init__(self, config, name='head'):
        super().__init__(name, [Conv2d(name + '.conv', config.head_channels, 1, 3, 1, 1, bias=True), Sigmoid()])
