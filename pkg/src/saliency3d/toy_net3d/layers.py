"""Forward/backward kernels for the desk-scale 3D network.

Convolutions use an im2col layout so both passes run as single matmuls;
pooling has a fast reshape path for non-overlapping windows (the only kind
the reference topology uses) and a strided-window fallback. The ReLU
subgradient at exactly zero is zero. Everything is plain numpy and keeps the
input dtype, so the same code runs the float32 training path and the
float64 gradient checks.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import DimensionError


def _triple(k) -> tuple[int, int, int]:
    if isinstance(k, (tuple, list)):
        if len(k) != 3:
            raise DimensionError(f"kernel/stride triple must have 3 entries, got {k}")
        return tuple(int(v) for v in k)
    return (int(k),) * 3


def conv3d_out_shape(in_shape, kernel, stride, padding):
    """(T,H,W) output extents for the given conv geometry."""
    k = _triple(kernel)
    s = _triple(stride)
    p = _triple(padding)
    out = []
    for n, kk, ss, pp in zip(in_shape, k, s, p):
        o = (n + 2 * pp - kk) // ss + 1
        if o < 1:
            raise DimensionError(
                f"conv output extent {o} < 1 for input {n}, kernel {kk}, "
                f"stride {ss}, padding {pp}"
            )
        out.append(o)
    return tuple(out)


def _windows(xp: np.ndarray, kernel, stride) -> np.ndarray:
    """(B, C, To, Ho, Wo, kt, kh, kw) view of the padded input."""
    kt, kh, kw = kernel
    st, sh, sw = stride
    win = sliding_window_view(xp, (kt, kh, kw), axis=(2, 3, 4))
    return win[:, :, ::st, ::sh, ::sw]


def conv3d_forward(x, w, b, stride, padding):
    """x: (B,Cin,T,H,W), w: (Cout,Cin,kt,kh,kw), b: (Cout,) -> (B,Cout,To,Ho,Wo)."""
    B = x.shape[0]
    cout = w.shape[0]
    s = _triple(stride)
    p = _triple(padding)
    xp = np.pad(x, ((0, 0), (0, 0), (p[0], p[0]), (p[1], p[1]), (p[2], p[2])))
    win = _windows(xp, w.shape[2:], s)
    to, ho, wo = win.shape[2:5]
    cols = np.ascontiguousarray(win.transpose(0, 2, 3, 4, 1, 5, 6, 7)).reshape(
        B * to * ho * wo, -1
    )
    y = cols @ w.reshape(cout, -1).T + b
    y = np.ascontiguousarray(
        y.reshape(B, to, ho, wo, cout).transpose(0, 4, 1, 2, 3)
    )
    return y, (x.shape, cols, (to, ho, wo))


def conv3d_backward(dout, cache, w, stride, padding):
    """Returns (dx, dw, db) for conv3d_forward."""
    in_shape, cols, (to, ho, wo) = cache
    B, cin, T, H, W = in_shape
    cout = w.shape[0]
    kt, kh, kw = w.shape[2:]
    s = _triple(stride)
    p = _triple(padding)

    dmat = np.ascontiguousarray(dout.transpose(0, 2, 3, 4, 1)).reshape(-1, cout)
    wmat = w.reshape(cout, -1)
    dw = (dmat.T @ cols).reshape(w.shape)
    db = dmat.sum(axis=0)

    dcols = (dmat @ wmat).reshape(B, to, ho, wo, cin, kt, kh, kw)
    dxp = np.zeros(
        (B, cin, T + 2 * p[0], H + 2 * p[1], W + 2 * p[2]), dtype=dout.dtype
    )
    for it in range(kt):
        for ih in range(kh):
            for iw in range(kw):
                dxp[
                    :,
                    :,
                    it : it + s[0] * to : s[0],
                    ih : ih + s[1] * ho : s[1],
                    iw : iw + s[2] * wo : s[2],
                ] += dcols[:, :, :, :, :, it, ih, iw].transpose(0, 4, 1, 2, 3)
    dx = dxp[:, :, p[0] : p[0] + T, p[1] : p[1] + H, p[2] : p[2] + W]
    return np.ascontiguousarray(dx), dw, db


def relu_forward(x):
    return np.maximum(x, 0), (x > 0)


def relu_backward(dout, mask):
    return dout * mask


def _pool_geometry(shape, kernel, stride):
    k = _triple(kernel)
    s = _triple(stride if stride is not None else kernel)
    out = tuple((n - kk) // ss + 1 for n, kk, ss in zip(shape, k, s))
    if any(o < 1 for o in out):
        raise DimensionError(f"pool window {k} too large for input {shape}")
    return k, s, out


def maxpool3d_forward(x, kernel, stride=None):
    B, C = x.shape[:2]
    k, s, out = _pool_geometry(x.shape[2:], kernel, stride)
    if k == s:
        to, ho, wo = out
        xt = x[:, :, : to * k[0], : ho * k[1], : wo * k[2]]
        win = xt.reshape(B, C, to, k[0], ho, k[1], wo, k[2]).transpose(
            0, 1, 2, 4, 6, 3, 5, 7
        )
        flat = np.ascontiguousarray(win).reshape(B, C, to, ho, wo, -1)
    else:
        win = _windows(x, k, s)
        flat = np.ascontiguousarray(win).reshape(B, C, *out, -1)
    arg = flat.argmax(axis=-1)
    y = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
    return y, (x.shape, arg, k, s)


def maxpool3d_backward(dout, cache):
    in_shape, arg, k, s = cache
    B, C, T, H, W = in_shape
    to, ho, wo = dout.shape[2:]
    dwin = np.zeros((B, C, to, ho, wo, k[0] * k[1] * k[2]), dtype=dout.dtype)
    np.put_along_axis(dwin, arg[..., None], dout[..., None], axis=-1)
    dwin = dwin.reshape(B, C, to, ho, wo, k[0], k[1], k[2])
    dx = np.zeros(in_shape, dtype=dout.dtype)
    if k == s:
        back = dwin.transpose(0, 1, 2, 5, 3, 6, 4, 7).reshape(
            B, C, to * k[0], ho * k[1], wo * k[2]
        )
        dx[:, :, : to * k[0], : ho * k[1], : wo * k[2]] = back
    else:
        for it in range(k[0]):
            for ih in range(k[1]):
                for iw in range(k[2]):
                    dx[
                        :,
                        :,
                        it : it + s[0] * to : s[0],
                        ih : ih + s[1] * ho : s[1],
                        iw : iw + s[2] * wo : s[2],
                    ] += dwin[:, :, :, :, :, it, ih, iw]
    return dx


def avgpool3d_forward(x, kernel, stride=None):
    B, C = x.shape[:2]
    k, s, out = _pool_geometry(x.shape[2:], kernel, stride)
    win = _windows(x, k, s)
    y = win.mean(axis=(5, 6, 7))
    return np.ascontiguousarray(y), (x.shape, k, s)


def avgpool3d_backward(dout, cache):
    in_shape, k, s = cache
    to, ho, wo = dout.shape[2:]
    share = dout / (k[0] * k[1] * k[2])
    dx = np.zeros(in_shape, dtype=dout.dtype)
    for it in range(k[0]):
        for ih in range(k[1]):
            for iw in range(k[2]):
                dx[
                    :,
                    :,
                    it : it + s[0] * to : s[0],
                    ih : ih + s[1] * ho : s[1],
                    iw : iw + s[2] * wo : s[2],
                ] += share
    return dx


def global_avgpool_forward(x):
    B, C, T, H, W = x.shape
    return x.mean(axis=(2, 3, 4)), x.shape


def global_avgpool_backward(dout, in_shape):
    B, C, T, H, W = in_shape
    scale = 1.0 / (T * H * W)
    return np.broadcast_to(
        dout[:, :, None, None, None] * scale, in_shape
    ).astype(dout.dtype, copy=True)


def dense_forward(x, w, b):
    """x: (B,F), w: (out,F), b: (out,)."""
    return x @ w.T + b, x


def dense_backward(dout, x, w):
    dw = dout.T @ x
    db = dout.sum(axis=0)
    dx = dout @ w
    return dx, dw, db
