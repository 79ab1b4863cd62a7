"""
Binary checkpoint files. Layout, all little-endian:

    b'A3D2'                       magic
    u16                           format version
    u32 x 6                       N, H, W, base_channels, fusion_channels, fused_channels
    u32                           tensor count
    per tensor:
        u16 + utf-8               name
        u8                        ndim
        u32 x ndim                dims
        f32 x prod(dims)          data, row-major
"""
import logging
import struct
from pathlib import Path

import numpy as np

from ..errors import (BadMagicError, CheckpointError, CheckpointShapeError, ConfigMismatchError,
                      TruncatedCheckpointError, UnsupportedVersionError)
from .config import ModelConfig
from .network import NetworkParams, parameter_shapes

logger = logging.getLogger(__name__)

MAGIC = b'A3D2'
VERSION = 1
_CONFIG = struct.Struct('<6I')


def encode_checkpoint(params, config):
    if not config.compatible(params.config):
        raise ConfigMismatchError("parameters were built for a different configuration than the one given")
    chunks = [MAGIC, struct.pack('<H', VERSION),
              _CONFIG.pack(config.N, config.in_resolution[0], config.in_resolution[1], config.base_channels,
                           config.fusion_channels, config.fused_channels),
              struct.pack('<I', len(params))]
    for name, tensor in params.items():
        raw = name.encode('utf-8')
        chunks.append(struct.pack('<H', len(raw)) + raw)
        chunks.append(struct.pack('<B', tensor.ndim) + struct.pack('<{}I'.format(tensor.ndim), *tensor.shape))
        chunks.append(np.ascontiguousarray(tensor, dtype='<f4').tobytes())
    return b''.join(chunks)


def save_checkpoint(params, config, path):
    """
    Writes params and the architecture part of config. Values are stored as float32.
    """
    path = Path(path)
    data = encode_checkpoint(params, config)
    path.write_bytes(data)
    logger.info("saved checkpoint %s (%d tensors, %d bytes)", path, len(params), len(data))
    return path


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.data):
            raise TruncatedCheckpointError("truncated checkpoint: needed {} bytes for {} at offset {}, file has {}".format(
                n, what, self.pos, len(self.data)))
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def decode_checkpoint(data):
    if len(data) < len(MAGIC):
        raise TruncatedCheckpointError("truncated checkpoint: {} bytes, no room for the magic".format(len(data)))
    reader = _Reader(data)
    magic = reader.take(len(MAGIC), 'magic')
    if magic != MAGIC:
        raise BadMagicError("bad magic {!r}, expected {!r}".format(magic, MAGIC))
    version, = reader.unpack('<H', 'version')
    if version != VERSION:
        raise UnsupportedVersionError("unsupported checkpoint version {}, expected {}".format(version, VERSION))
    n, h, w, base, fusion, fused = reader.unpack('<6I', 'config block')
    try:
        config = ModelConfig(N=n, in_resolution=(h, w), base_channels=base, fusion_channels=fusion,
                             fused_channels=fused)
    except ValueError as err:
        raise CheckpointError("checkpoint config block is invalid: {}".format(err)) from err
    count, = reader.unpack('<I', 'tensor count')
    tensors = {}
    for i in range(count):
        length, = reader.unpack('<H', 'name length')
        name = reader.take(length, 'name').decode('utf-8')
        ndim, = reader.unpack('<B', 'ndim')
        shape = reader.unpack('<{}I'.format(ndim), 'dims')
        size = int(np.prod(shape)) if ndim else 1
        raw = reader.take(4 * size, 'data of ' + name)
        tensors[name] = np.frombuffer(raw, dtype='<f4').astype(np.float32).reshape(shape)
    if reader.pos != len(data):
        raise CheckpointError("{} trailing bytes after the last tensor".format(len(data) - reader.pos))
    expected = parameter_shapes(config)
    if set(expected) != set(tensors):
        missing = sorted(set(expected) - set(tensors))
        extra = sorted(set(tensors) - set(expected))
        raise CheckpointShapeError("tensor names do not match the architecture: missing {}, unexpected {}".format(
            missing[:3], extra[:3]))
    for name, shape in expected.items():
        if tensors[name].shape != tuple(shape):
            raise CheckpointShapeError("tensor {} has shape {}, architecture expects {}".format(
                name, tensors[name].shape, tuple(shape)))
    return NetworkParams(config, tensors), config


def load_checkpoint(path, expect=None):
    """
    Reads a checkpoint.

    args:
        path (str or Path): checkpoint file
        expect (ModelConfig or None): reject the file unless it has the same architecture
    returns:
        (NetworkParams, ModelConfig)
    """
    params, config = decode_checkpoint(Path(path).read_bytes())
    if expect is not None and not expect.compatible(config):
        raise ConfigMismatchError("checkpoint has N={} {}x{} base={}, run expects N={} {}x{} base={}".format(
            config.N, *config.in_resolution, config.base_channels,
            expect.N, *expect.in_resolution, expect.base_channels))
    logger.debug("loaded checkpoint %s", path)
    return params, config


def import_weights(params, npz_path):
    """
    Copies tensors from a numpy .npz archive into params where name and shape
    match, e.g. externally trained encoder weights. Returns (copied, skipped) names.
    """
    copied, skipped = [], []
    with np.load(npz_path) as archive:
        for name in archive.files:
            value = archive[name]
            if name in params and params[name].shape == value.shape:
                params[name][...] = value
                copied.append(name)
            else:
                skipped.append(name)
    if skipped:
        logger.warning("import_weights skipped %d tensors without a matching parameter, e.g. %s",
                       len(skipped), skipped[0])
    logger.info("imported %d tensors from %s", len(copied), npz_path)
    return copied, skipped
