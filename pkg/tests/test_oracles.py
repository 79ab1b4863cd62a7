"""
Convolution, transposed convolution and max-pool kernels against plain
nested loops. The loops accumulate in the same order as the kernels, so the
float64 results must agree bit for bit.
"""
import numpy as np
import pytest

from cavs.engine import functional as F
from cavs.engine.tensor import ConvSpec

CASES = 100


def naive_conv3d(x, w, b, stride, padding, dilation):
    B, C, D, H, W = x.shape
    O, _, KD, KH, KW = w.shape
    dims = [(n + 2 * p - d * (k - 1) - 1) // s + 1
            for n, k, s, p, d in zip((D, H, W), (KD, KH, KW), stride, padding, dilation)]
    out = np.zeros((B, O) + tuple(dims))
    (sd, sh, sw), (pd, ph, pw), (dd, dh, dw) = stride, padding, dilation
    for bi in range(B):
        for o in range(O):
            for od in range(dims[0]):
                for oh in range(dims[1]):
                    for ow in range(dims[2]):
                        acc = 0.0
                        for c in range(C):
                            for kd in range(KD):
                                iz = od * sd - pd + kd * dd
                                if iz < 0 or iz >= D:
                                    continue
                                for kh in range(KH):
                                    iy = oh * sh - ph + kh * dh
                                    if iy < 0 or iy >= H:
                                        continue
                                    for kw in range(KW):
                                        ix = ow * sw - pw + kw * dw
                                        if ix < 0 or ix >= W:
                                            continue
                                        acc += x[bi, c, iz, iy, ix] * w[o, c, kd, kh, kw]
                        out[bi, o, od, oh, ow] = acc + (b[o] if b is not None else 0.0)
    return out


def naive_conv_transpose2d(x, w, b, stride, padding, output_padding):
    B, Cin, H, W = x.shape
    _, Cout, KH, KW = w.shape
    OH = (H - 1) * stride[0] - 2 * padding[0] + KH + output_padding[0]
    OW = (W - 1) * stride[1] - 2 * padding[1] + KW + output_padding[1]
    out = np.zeros((B, Cout, OH, OW))
    for bi in range(B):
        for co in range(Cout):
            for ci in range(Cin):
                for kh in range(KH):
                    for kw in range(KW):
                        wv = w[ci, co, kh, kw]
                        for ih in range(H):
                            oy = ih * stride[0] - padding[0] + kh
                            if oy < 0 or oy >= OH:
                                continue
                            for iw in range(W):
                                ox = iw * stride[1] - padding[1] + kw
                                if ox < 0 or ox >= OW:
                                    continue
                                out[bi, co, oy, ox] += x[bi, ci, ih, iw] * wv
    if b is not None:
        out += b[None, :, None, None]
    return out


def naive_maxpool2d(x, k, s, p):
    B, C, H, W = x.shape
    OH, OW = (H + 2 * p - k) // s + 1, (W + 2 * p - k) // s + 1
    out = np.empty((B, C, OH, OW))
    arg = np.empty((B, C, OH, OW), dtype=np.int64)
    for bi in range(B):
        for c in range(C):
            for oh in range(OH):
                for ow in range(OW):
                    best, idx = None, -1
                    for i in range(k):
                        for j in range(k):
                            iy, ix = oh * s - p + i, ow * s - p + j
                            if 0 <= iy < H and 0 <= ix < W and (best is None or x[bi, c, iy, ix] > best):
                                best, idx = x[bi, c, iy, ix], iy * W + ix
                    out[bi, c, oh, ow] = best
                    arg[bi, c, oh, ow] = idx
    return out, arg


def _valid(size, k, s, p, d):
    return (size + 2 * p - d * (k - 1) - 1) // s + 1 >= 1


@pytest.mark.parametrize('seed', range(CASES))
def test_conv2d_matches_loops(seed):
    rng = np.random.default_rng(seed)
    while True:
        B, C, O = rng.integers(1, 3), rng.integers(1, 4), rng.integers(1, 4)
        H, W, K = rng.integers(1, 8), rng.integers(1, 8), rng.integers(1, 4)
        s, p, d = rng.integers(1, 3), rng.integers(0, 3), rng.integers(1, 3)
        if _valid(H, K, s, p, d) and _valid(W, K, s, p, d):
            break
    x = rng.standard_normal((B, C, H, W))
    w = rng.standard_normal((O, C, K, K))
    b = rng.standard_normal(O) if seed % 2 else None
    got = F.conv2d_forward(x, w, b, ConvSpec.of(2, stride=s, padding=p, dilation=d))
    want = naive_conv3d(x[:, :, None], w[:, :, None], b, (1, s, s), (0, p, p), (1, d, d))[:, :, 0]
    np.testing.assert_array_equal(got, want)


@pytest.mark.parametrize('seed', range(CASES))
def test_conv3d_matches_loops(seed):
    rng = np.random.default_rng(1000 + seed)
    while True:
        B, C, O = rng.integers(1, 3), rng.integers(1, 3), rng.integers(1, 4)
        D, H, W = rng.integers(1, 6), rng.integers(1, 7), rng.integers(1, 7)
        KD, K = rng.integers(1, 4), rng.integers(1, 4)
        stride = tuple(int(v) for v in rng.integers(1, 3, 3))
        padding = tuple(int(v) for v in rng.integers(0, 2, 3))
        dilation = tuple(int(v) for v in rng.integers(1, 3, 3))
        kernel = (KD, K, K)
        if all(_valid(n, k, s, p, d) for n, k, s, p, d in zip((D, H, W), kernel, stride, padding, dilation)):
            break
    x = rng.standard_normal((B, C, D, H, W))
    w = rng.standard_normal((O, C) + kernel)
    b = rng.standard_normal(O)
    got = F.conv3d_forward(x, w, b, ConvSpec(stride, padding, dilation, (0, 0, 0)))
    np.testing.assert_array_equal(got, naive_conv3d(x, w, b, stride, padding, dilation))


@pytest.mark.parametrize('seed', range(CASES))
def test_conv_transpose2d_matches_loops(seed):
    rng = np.random.default_rng(2000 + seed)
    while True:
        B, Cin, Cout = rng.integers(1, 3), rng.integers(1, 4), rng.integers(1, 4)
        H, W, K = rng.integers(1, 6), rng.integers(1, 6), rng.integers(1, 5)
        s = int(rng.integers(1, 3))
        p = int(rng.integers(0, 2))
        op = int(rng.integers(0, s))
        if min((H - 1) * s - 2 * p + K + op, (W - 1) * s - 2 * p + K + op) >= 1:
            break
    x = rng.standard_normal((B, Cin, H, W))
    w = rng.standard_normal((Cin, Cout, K, K))
    b = rng.standard_normal(Cout) if seed % 2 else None
    got = F.conv_transpose2d_forward(x, w, b, ConvSpec.of(2, stride=s, padding=p, output_padding=op))
    np.testing.assert_array_equal(got, naive_conv_transpose2d(x, w, b, (s, s), (p, p), (op, op)))


@pytest.mark.parametrize('seed', range(CASES))
def test_maxpool2d_matches_loops(seed):
    rng = np.random.default_rng(3000 + seed)
    while True:
        k = int(rng.integers(1, 4))
        s = int(rng.integers(1, 4))
        p = int(rng.integers(0, k))
        H, W = int(rng.integers(1, 8)), int(rng.integers(1, 8))
        if k <= H + 2 * p and k <= W + 2 * p:
            break
    x = rng.standard_normal((int(rng.integers(1, 3)), int(rng.integers(1, 4)), H, W))
    if seed % 3 == 0:
        x = np.round(x)
    got, got_arg = F.maxpool2d_forward(x, k, s, p)
    want, want_arg = naive_maxpool2d(x, k, s, p)
    np.testing.assert_array_equal(got, want)
    np.testing.assert_array_equal(got_arg, want_arg)
