"""Fused loops for the batched logical layers (numba).

Numerically these follow the numpy versions in :mod:`mllp.logic` (same
factors, same small-factor rule for the leave-one-out products) but avoid
the ``(B, n, m)`` temporaries. Accumulation order is fixed, so results are
deterministic.
"""
import numpy as np
from numba import njit

SMALL_FACTOR = 1e-12


@njit(cache=True)
def conj_forward(H, W):
    B, m = H.shape
    n = W.shape[0]
    out = np.empty((B, n))
    for b in range(B):
        for i in range(n):
            p = 1.0
            for j in range(m):
                p *= 1.0 - W[i, j] * (1.0 - H[b, j])
            out[b, i] = p
    return out


@njit(cache=True)
def disj_forward(H, W):
    B, m = H.shape
    n = W.shape[0]
    out = np.empty((B, n))
    for b in range(B):
        for i in range(n):
            p = 1.0
            for j in range(m):
                p *= 1.0 - H[b, j] * W[i, j]
            out[b, i] = 1.0 - p
    return out


@njit(cache=True)
def _leave_one_out(f, full, out, pre):
    m = f.shape[0]
    small = False
    for j in range(m):
        if f[j] <= SMALL_FACTOR:
            small = True
            break
    if not small:
        for j in range(m):
            out[j] = full / f[j]
        return
    pre[0] = 1.0
    for j in range(m):
        pre[j + 1] = pre[j] * f[j]
    suf = 1.0
    for j in range(m - 1, -1, -1):
        out[j] = pre[j] * suf
        suf *= f[j]


@njit(cache=True)
def conj_backward(H, W, up, need_h):
    """``(grad_W, grad_H)`` for ``sum(up * Conj(H, W))``."""
    B, m = H.shape
    n = W.shape[0]
    gW = np.zeros((n, m))
    gH = np.zeros((B, m))
    f = np.empty(m)
    ex = np.empty(m)
    pre = np.empty(m + 1)
    for b in range(B):
        for i in range(n):
            u = up[b, i]
            if u == 0.0:
                continue
            p = 1.0
            for j in range(m):
                f[j] = 1.0 - W[i, j] * (1.0 - H[b, j])
                p *= f[j]
            _leave_one_out(f, p, ex, pre)
            for j in range(m):
                c = u * ex[j]
                gW[i, j] += c * (H[b, j] - 1.0)
                if need_h:
                    gH[b, j] += c * W[i, j]
    return gW, gH


@njit(cache=True)
def disj_backward(H, W, up, need_h):
    B, m = H.shape
    n = W.shape[0]
    gW = np.zeros((n, m))
    gH = np.zeros((B, m))
    f = np.empty(m)
    ex = np.empty(m)
    pre = np.empty(m + 1)
    for b in range(B):
        for i in range(n):
            u = up[b, i]
            if u == 0.0:
                continue
            p = 1.0
            for j in range(m):
                f[j] = 1.0 - H[b, j] * W[i, j]
                p *= f[j]
            _leave_one_out(f, p, ex, pre)
            for j in range(m):
                c = u * ex[j]
                gW[i, j] += c * H[b, j]
                if need_h:
                    gH[b, j] += c * W[i, j]
    return gW, gH
