"""Hot inner kernels, each with a numba @njit build and a pure-numpy fallback.

The active path is chosen once at import time: setting the environment
variable ``VSRDIFF_NO_NUMBA=1`` forces the numpy fallback, otherwise numba
is used whenever it imports cleanly.  ``IMPLEMENTATIONS`` keeps both paths
reachable so the agreement tests and ``benchmarks/bench_accel.py`` can
compare them directly.

All kernels are deterministic (no fastmath, no parallel reductions).
"""

from __future__ import annotations

import os

import numpy as np

ENV_FLAG = "VSRDIFF_NO_NUMBA"


def _numba_requested() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() not in ("1", "true", "yes")


# ---------------------------------------------------------------------------
# numpy fallback path
# ---------------------------------------------------------------------------

def conv3x3_forward_numpy(x, w, b):
    """Same-size 3x3 convolution with zero padding.

    x: (N, C, H, W), w: (O, C, 3, 3), b: (O,) -> (N, O, H, W)
    """
    n, c, h, wd = x.shape
    xp = np.zeros((n, c, h + 2, wd + 2), dtype=x.dtype)
    xp[:, :, 1:-1, 1:-1] = x
    y = np.tile(b[None, :, None, None], (n, 1, h, wd)).astype(x.dtype)
    for p in range(3):
        for q in range(3):
            y += np.einsum(
                "nchw,oc->nohw", xp[:, :, p : p + h, q : q + wd], w[:, :, p, q]
            ).astype(x.dtype, copy=False)
    return y


def conv3x3_backward_numpy(x, w, gy):
    """Gradients of conv3x3_forward w.r.t. input, kernel and bias."""
    n, c, h, wd = x.shape
    xp = np.zeros((n, c, h + 2, wd + 2), dtype=x.dtype)
    xp[:, :, 1:-1, 1:-1] = x
    gxp = np.zeros_like(xp)
    gw = np.zeros_like(w)
    for p in range(3):
        for q in range(3):
            gxp[:, :, p : p + h, q : q + wd] += np.einsum(
                "nohw,oc->nchw", gy, w[:, :, p, q]
            ).astype(x.dtype, copy=False)
            gw[:, :, p, q] = np.einsum("nohw,nchw->oc", gy, xp[:, :, p : p + h, q : q + wd])
    gb = gy.sum(axis=(0, 2, 3), dtype=np.float64).astype(w.dtype)
    return gxp[:, :, 1:-1, 1:-1], gw, gb


def _reflect_pad_2d(x, r):
    # reflect without repeating the edge sample, e.g. [a b c] -> [b a b c b]
    return np.pad(x, ((0, 0), (r, r), (r, r)), mode="reflect")


def sep_correlate2d_numpy(x, k):
    """Separable correlation along the two trailing axes with reflect padding.

    x: (N, H, W), k: (K,) with K odd -> (N, H, W)
    """
    r = k.size // 2
    xp = _reflect_pad_2d(x, r)
    acc = np.zeros((x.shape[0], x.shape[1], xp.shape[2]), dtype=np.float64)
    for i in range(k.size):
        acc += k[i] * xp[:, i : i + x.shape[1], :]
    out = np.zeros(x.shape, dtype=np.float64)
    for j in range(k.size):
        out += k[j] * acc[:, :, j : j + x.shape[2]]
    return out.astype(x.dtype)


def valid_correlate2d_numpy(x, k):
    """Separable valid-mode correlation: (N, H, W) -> (N, H-K+1, W-K+1)."""
    ksz = k.size
    hv = x.shape[1] - ksz + 1
    wv = x.shape[2] - ksz + 1
    acc = np.zeros((x.shape[0], hv, x.shape[2]), dtype=np.float64)
    for i in range(ksz):
        acc += k[i] * x[:, i : i + hv, :]
    out = np.zeros((x.shape[0], hv, wv), dtype=np.float64)
    for j in range(ksz):
        out += k[j] * acc[:, :, j : j + wv]
    return out.astype(x.dtype)


def _dct8_basis():
    # orthonormal 8-point DCT-II basis, rows are basis vectors
    n = np.arange(8)
    basis = np.cos((2 * n[None, :] + 1) * n[:, None] * np.pi / 16.0)
    basis[0] *= np.sqrt(1.0 / 8.0)
    basis[1:] *= np.sqrt(2.0 / 8.0)
    return basis


_DCT8 = _dct8_basis()


def block_dct_roundtrip_numpy(x, step):
    """8x8 block DCT, uniform quantization with `step`, inverse DCT.

    x: (N, H, W) with H and W divisible by 8.
    """
    n, h, w = x.shape
    blocks = x.reshape(n, h // 8, 8, w // 8, 8).transpose(0, 1, 3, 2, 4)
    coef = np.einsum("ui,nbcij,vj->nbcuv", _DCT8, blocks.astype(np.float64), _DCT8)
    coef = np.round(coef / step) * step
    rec = np.einsum("iu,nbcuv,jv->nbcij", _DCT8, coef, _DCT8)
    return rec.transpose(0, 1, 3, 2, 4).reshape(n, h, w).astype(x.dtype)


def bilinear_warp_numpy(frame, dx, dy):
    """Warp a frame by a constant displacement with bilinear sampling.

    frame: (C, H, W).  Output pixel (y, x) samples frame at (y - dy, x - dx);
    returns the warped frame and a {0,1} mask of fully in-bounds pixels.
    """
    c, h, w = frame.shape
    ys = np.arange(h, dtype=np.float64)[:, None] - dy
    xs = np.arange(w, dtype=np.float64)[None, :] - dx
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    fy = ys - y0
    fx = xs - x0
    mask = (y0 >= 0) & (y0 + 1 <= h - 1) & (x0 >= 0) & (x0 + 1 <= w - 1)
    y0c = np.clip(y0, 0, h - 2)
    x0c = np.clip(x0, 0, w - 2)
    fyb = np.broadcast_to(fy, (h, w))
    fxb = np.broadcast_to(fx, (h, w))
    y0b = np.broadcast_to(y0c, (h, w))
    x0b = np.broadcast_to(x0c, (h, w))
    out = np.empty((c, h, w), dtype=np.float64)
    for ch in range(c):
        f = frame[ch]
        out[ch] = (
            f[y0b, x0b] * (1 - fyb) * (1 - fxb)
            + f[y0b, x0b + 1] * (1 - fyb) * fxb
            + f[y0b + 1, x0b] * fyb * (1 - fxb)
            + f[y0b + 1, x0b + 1] * fyb * fxb
        )
    return out.astype(frame.dtype), mask.astype(frame.dtype)


_NUMPY_IMPL = {
    "conv3x3_forward": conv3x3_forward_numpy,
    "conv3x3_backward": conv3x3_backward_numpy,
    "sep_correlate2d": sep_correlate2d_numpy,
    "valid_correlate2d": valid_correlate2d_numpy,
    "block_dct_roundtrip": block_dct_roundtrip_numpy,
    "bilinear_warp": bilinear_warp_numpy,
}


# ---------------------------------------------------------------------------
# numba path
# ---------------------------------------------------------------------------

def _build_numba_impl():
    from numba import njit

    @njit(cache=True)
    def conv3x3_forward_nb(x, w, b):
        n, c, h, wd = x.shape
        o = w.shape[0]
        y = np.empty((n, o, h, wd), dtype=x.dtype)
        for ni in range(n):
            for oi in range(o):
                for i in range(h):
                    for j in range(wd):
                        acc = float(b[oi])
                        for ci in range(c):
                            for p in range(3):
                                ii = i + p - 1
                                if ii < 0 or ii >= h:
                                    continue
                                for q in range(3):
                                    jj = j + q - 1
                                    if jj < 0 or jj >= wd:
                                        continue
                                    acc += x[ni, ci, ii, jj] * w[oi, ci, p, q]
                        y[ni, oi, i, j] = acc
        return y

    @njit(cache=True)
    def conv3x3_backward_nb(x, w, gy):
        n, c, h, wd = x.shape
        o = w.shape[0]
        gx = np.zeros(x.shape, dtype=x.dtype)
        gw = np.zeros(w.shape, dtype=w.dtype)
        gb = np.zeros(o, dtype=w.dtype)
        for ni in range(n):
            for oi in range(o):
                for i in range(h):
                    for j in range(wd):
                        g = gy[ni, oi, i, j]
                        gb[oi] += g
                        for ci in range(c):
                            for p in range(3):
                                ii = i + p - 1
                                if ii < 0 or ii >= h:
                                    continue
                                for q in range(3):
                                    jj = j + q - 1
                                    if jj < 0 or jj >= wd:
                                        continue
                                    gx[ni, ci, ii, jj] += g * w[oi, ci, p, q]
                                    gw[oi, ci, p, q] += g * x[ni, ci, ii, jj]
        return gx, gw, gb

    @njit(cache=True)
    def sep_correlate2d_nb(x, k):
        n, h, w = x.shape
        r = k.size // 2
        tmp = np.empty((n, h, w), dtype=np.float64)
        out = np.empty((n, h, w), dtype=x.dtype)
        for ni in range(n):
            for i in range(h):
                for j in range(w):
                    acc = 0.0
                    for t in range(k.size):
                        ii = i + t - r
                        if ii < 0:
                            ii = -ii
                        elif ii >= h:
                            ii = 2 * h - 2 - ii
                        acc += k[t] * x[ni, ii, j]
                    tmp[ni, i, j] = acc
            for i in range(h):
                for j in range(w):
                    acc = 0.0
                    for t in range(k.size):
                        jj = j + t - r
                        if jj < 0:
                            jj = -jj
                        elif jj >= w:
                            jj = 2 * w - 2 - jj
                        acc += k[t] * tmp[ni, i, jj]
                    out[ni, i, j] = acc
        return out

    @njit(cache=True)
    def valid_correlate2d_nb(x, k):
        n, h, w = x.shape
        ksz = k.size
        hv = h - ksz + 1
        wv = w - ksz + 1
        tmp = np.empty((n, hv, w), dtype=np.float64)
        out = np.empty((n, hv, wv), dtype=x.dtype)
        for ni in range(n):
            for i in range(hv):
                for j in range(w):
                    acc = 0.0
                    for t in range(ksz):
                        acc += k[t] * x[ni, i + t, j]
                    tmp[ni, i, j] = acc
            for i in range(hv):
                for j in range(wv):
                    acc = 0.0
                    for t in range(ksz):
                        acc += k[t] * tmp[ni, i, j + t]
                    out[ni, i, j] = acc
        return out

    @njit(cache=True)
    def block_dct_roundtrip_nb(x, step, basis):
        n, h, w = x.shape
        out = np.empty_like(x)
        coef = np.empty((8, 8), dtype=np.float64)
        tmp = np.empty((8, 8), dtype=np.float64)
        for ni in range(n):
            for bi in range(h // 8):
                for bj in range(w // 8):
                    # forward: coef = B @ block @ B.T
                    for u in range(8):
                        for j in range(8):
                            acc = 0.0
                            for i in range(8):
                                acc += basis[u, i] * x[ni, bi * 8 + i, bj * 8 + j]
                            tmp[u, j] = acc
                    for u in range(8):
                        for v in range(8):
                            acc = 0.0
                            for j in range(8):
                                acc += tmp[u, j] * basis[v, j]
                            coef[u, v] = np.round(acc / step) * step
                    # inverse: block = B.T @ coef @ B
                    for i in range(8):
                        for v in range(8):
                            acc = 0.0
                            for u in range(8):
                                acc += basis[u, i] * coef[u, v]
                            tmp[i, v] = acc
                    for i in range(8):
                        for j in range(8):
                            acc = 0.0
                            for v in range(8):
                                acc += tmp[i, v] * basis[v, j]
                            out[ni, bi * 8 + i, bj * 8 + j] = acc
        return out

    @njit(cache=True)
    def bilinear_warp_nb(frame, dx, dy):
        c, h, w = frame.shape
        out = np.zeros((c, h, w), dtype=frame.dtype)
        mask = np.zeros((h, w), dtype=frame.dtype)
        for i in range(h):
            ys = i - dy
            y0 = int(np.floor(ys))
            fy = ys - y0
            for j in range(w):
                xs = j - dx
                x0 = int(np.floor(xs))
                fx = xs - x0
                if y0 >= 0 and y0 + 1 <= h - 1 and x0 >= 0 and x0 + 1 <= w - 1:
                    mask[i, j] = 1.0
                    for ch in range(c):
                        out[ch, i, j] = (
                            frame[ch, y0, x0] * (1 - fy) * (1 - fx)
                            + frame[ch, y0, x0 + 1] * (1 - fy) * fx
                            + frame[ch, y0 + 1, x0] * fy * (1 - fx)
                            + frame[ch, y0 + 1, x0 + 1] * fy * fx
                        )
        return out, mask

    def block_dct_roundtrip(x, step):
        return block_dct_roundtrip_nb(x, step, _DCT8)

    return {
        "conv3x3_forward": conv3x3_forward_nb,
        "conv3x3_backward": conv3x3_backward_nb,
        "sep_correlate2d": sep_correlate2d_nb,
        "valid_correlate2d": valid_correlate2d_nb,
        "block_dct_roundtrip": block_dct_roundtrip,
        "bilinear_warp": bilinear_warp_nb,
    }


_NUMBA_IMPL = None
if _numba_requested():
    try:
        _NUMBA_IMPL = _build_numba_impl()
    except ImportError:
        _NUMBA_IMPL = None

USING_NUMBA = _NUMBA_IMPL is not None

IMPLEMENTATIONS = {"numpy": _NUMPY_IMPL}
if _NUMBA_IMPL is not None:
    IMPLEMENTATIONS["numba"] = _NUMBA_IMPL

_ACTIVE = _NUMBA_IMPL if USING_NUMBA else _NUMPY_IMPL

conv3x3_forward = _ACTIVE["conv3x3_forward"]
conv3x3_backward = _ACTIVE["conv3x3_backward"]
sep_correlate2d = _ACTIVE["sep_correlate2d"]
valid_correlate2d = _ACTIVE["valid_correlate2d"]
block_dct_roundtrip = _ACTIVE["block_dct_roundtrip"]
bilinear_warp = _ACTIVE["bilinear_warp"]
