"""
numba kernels behind the convolution and pooling ops. Everything works on
5D (B, C, D, H, W) volumes for convolutions and 4D (B, C, H, W) maps for
pooling; 2D convolutions run as D = 1 volumes. Parallelism is over the
(batch, channel) pairs that own disjoint output slices, and each output
element is accumulated in a fixed loop order, so results do not depend on
the thread count.
"""
import numpy as np
from numba import njit, prange


@njit(parallel=True, cache=True)
def conv3d_forward(x, w, bias, out, sd, sh, sw, pd, ph, pw, dd, dh, dw):
    B, C, D, H, W = x.shape
    O = w.shape[0]
    KD, KH, KW = w.shape[2], w.shape[3], w.shape[4]
    OD, OH, OW = out.shape[2], out.shape[3], out.shape[4]
    for bo in prange(B * O):
        b = bo // O
        o = bo % O
        for od in range(OD):
            for oh in range(OH):
                for ow in range(OW):
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
                                    acc += x[b, c, iz, iy, ix] * w[o, c, kd, kh, kw]
                    out[b, o, od, oh, ow] = acc + bias[o]


@njit(parallel=True, cache=True)
def conv3d_weight_grad(x, g, gw, sd, sh, sw, pd, ph, pw, dd, dh, dw):
    B, C, D, H, W = x.shape
    O = g.shape[1]
    OD, OH, OW = g.shape[2], g.shape[3], g.shape[4]
    KD, KH, KW = gw.shape[2], gw.shape[3], gw.shape[4]
    for oc in prange(O * C):
        o = oc // C
        c = oc % C
        for kd in range(KD):
            for kh in range(KH):
                for kw in range(KW):
                    acc = 0.0
                    for b in range(B):
                        for od in range(OD):
                            iz = od * sd - pd + kd * dd
                            if iz < 0 or iz >= D:
                                continue
                            for oh in range(OH):
                                iy = oh * sh - ph + kh * dh
                                if iy < 0 or iy >= H:
                                    continue
                                for ow in range(OW):
                                    ix = ow * sw - pw + kw * dw
                                    if ix < 0 or ix >= W:
                                        continue
                                    acc += g[b, o, od, oh, ow] * x[b, c, iz, iy, ix]
                    gw[o, c, kd, kh, kw] = acc


@njit(parallel=True, cache=True)
def conv3d_input_grad(g, w, gx, sd, sh, sw, pd, ph, pw, dd, dh, dw):
    """
    Scatters g back through the kernel into gx, which must be zero on entry.
    gx's spatial shape decides the extent, so the same kernel serves as the
    forward map of the transposed convolution.
    """
    B, C, D, H, W = gx.shape
    O = g.shape[1]
    OD, OH, OW = g.shape[2], g.shape[3], g.shape[4]
    KD, KH, KW = w.shape[2], w.shape[3], w.shape[4]
    for bc in prange(B * C):
        b = bc // C
        c = bc % C
        for o in range(O):
            for kd in range(KD):
                for kh in range(KH):
                    for kw in range(KW):
                        wv = w[o, c, kd, kh, kw]
                        for od in range(OD):
                            iz = od * sd - pd + kd * dd
                            if iz < 0 or iz >= D:
                                continue
                            for oh in range(OH):
                                iy = oh * sh - ph + kh * dh
                                if iy < 0 or iy >= H:
                                    continue
                                for ow in range(OW):
                                    ix = ow * sw - pw + kw * dw
                                    if ix < 0 or ix >= W:
                                        continue
                                    gx[b, c, iz, iy, ix] += g[b, o, od, oh, ow] * wv


@njit(parallel=True, cache=True)
def maxpool2d_forward(x, out, arg, kh, kw, sh, sw, ph, pw):
    B, C, H, W = x.shape
    OH, OW = out.shape[2], out.shape[3]
    for bc in prange(B * C):
        b = bc // C
        c = bc % C
        for oh in range(OH):
            for ow in range(OW):
                best = -np.inf
                idx = -1
                for i in range(kh):
                    iy = oh * sh - ph + i
                    if iy < 0 or iy >= H:
                        continue
                    for j in range(kw):
                        ix = ow * sw - pw + j
                        if ix < 0 or ix >= W:
                            continue
                        v = x[b, c, iy, ix]
                        # strict > keeps the first row-major maximum
                        if idx == -1 or v > best:
                            best = v
                            idx = iy * W + ix
                out[b, c, oh, ow] = best
                arg[b, c, oh, ow] = idx


@njit(parallel=True, cache=True)
def maxpool2d_backward(g, arg, gx):
    B, C, H, W = gx.shape
    OH, OW = g.shape[2], g.shape[3]
    for bc in prange(B * C):
        b = bc // C
        c = bc % C
        for oh in range(OH):
            for ow in range(OW):
                idx = arg[b, c, oh, ow]
                gx[b, c, idx // W, idx % W] += g[b, c, oh, ow]
