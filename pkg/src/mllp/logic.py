"""Product-form conjunction/disjunction activations and their gradients.

With ``F_c(h, w) = 1 - w (1 - h)`` and ``F_d(h, w) = h w``::

    Conj(h, W_i) = prod_j F_c(h_j, W_ij)
    Disj(h, W_i) = 1 - prod_j (1 - F_d(h_j, W_ij))

Both reduce to Boolean AND / OR over the selected inputs when ``h`` and
``W_i`` are binary. Single-row functions take ``h`` of shape ``(m,)`` and a
weight row of shape ``(m,)``; the ``*_layer_*`` functions work on a batch
``H`` of shape ``(B, m)`` and a weight matrix of shape ``(n, m)``.
"""
from __future__ import annotations

import numpy as np

from .errors import DimensionError

SMALL_FACTOR = 1e-12


def f_conj(h, w):
    return 1.0 - w * (1.0 - h)


def f_disj(h, w):
    return h * w


def _check_row(h, w):
    h = np.asarray(h, dtype=float)
    w = np.asarray(w, dtype=float)
    if h.shape != w.shape or h.ndim != 1:
        raise DimensionError(f"input length {h.shape} does not match weight row {w.shape}")
    return h, w


def _check_layer(H, W):
    H = np.asarray(H, dtype=float)
    W = np.asarray(W, dtype=float)
    if H.ndim != 2 or W.ndim != 2 or H.shape[1] != W.shape[1]:
        raise DimensionError(f"batch {H.shape} does not chain with weights {W.shape}")
    return H, W


def exclusive_prod(factors: np.ndarray, full: np.ndarray | None = None) -> np.ndarray:
    """``out[..., j] = prod_{k != j} factors[..., k]`` along the last axis.

    Uses ``prod / factor`` where every factor of the row exceeds
    ``SMALL_FACTOR``; rows holding a tiny or zero factor are recomputed with
    prefix/suffix products so no division by (near) zero happens.
    """
    f = np.asarray(factors, dtype=float)
    if full is None:
        full = np.prod(f, axis=-1)
    small = f <= SMALL_FACTOR
    out = full[..., None] / np.maximum(f, SMALL_FACTOR)
    if small.any():
        risky = small.any(axis=-1)
        sub = f[risky]
        ones = np.ones(sub.shape[:-1] + (1,))
        prefix = np.cumprod(np.concatenate([ones, sub[..., :-1]], axis=-1), axis=-1)
        suffix = np.cumprod(np.concatenate([ones, sub[..., :0:-1]], axis=-1), axis=-1)[..., ::-1]
        out[risky] = prefix * suffix
    return out


# --------------------------------------------------------------------------
# single-row operations
# --------------------------------------------------------------------------

def conj_forward(h, w) -> float:
    h, w = _check_row(h, w)
    return float(np.prod(f_conj(h, w)))


def disj_forward(h, w) -> float:
    h, w = _check_row(h, w)
    return float(1.0 - np.prod(1.0 - f_disj(h, w)))


def conj_backward(h, w, upstream: float = 1.0):
    """Returns ``(grad_w, grad_h)`` of ``upstream * Conj(h, w)``."""
    h, w = _check_row(h, w)
    rest = exclusive_prod(f_conj(h, w))
    return upstream * (h - 1.0) * rest, upstream * w * rest


def disj_backward(h, w, upstream: float = 1.0):
    """Returns ``(grad_w, grad_h)`` of ``upstream * Disj(h, w)``."""
    h, w = _check_row(h, w)
    rest = exclusive_prod(1.0 - f_disj(h, w))
    return upstream * h * rest, upstream * w * rest


def clip_weights(W):
    return np.clip(W, 0.0, 1.0)


def binarize_weight(w, threshold: float = 0.5):
    """``1`` where ``w > threshold`` (strict), else ``0``. Works elementwise."""
    out = np.asarray(w) > threshold
    return out.astype(np.float64) if out.ndim else int(out)


# --------------------------------------------------------------------------
# batched layers
# --------------------------------------------------------------------------

def conj_layer_forward(H, W, return_cache: bool = False):
    H, W = _check_layer(H, W)
    F = f_conj(H[:, None, :], W[None, :, :])
    out = np.prod(F, axis=-1)
    return (out, (F, out)) if return_cache else out


def disj_layer_forward(H, W, return_cache: bool = False):
    H, W = _check_layer(H, W)
    G = 1.0 - f_disj(H[:, None, :], W[None, :, :])
    p = np.prod(G, axis=-1)
    out = 1.0 - p
    return (out, (G, p)) if return_cache else out


def conj_layer_backward(H, W, upstream, need_input_grad: bool = True, cache=None):
    """Gradients of ``sum(upstream * conj_layer_forward(H, W))``.

    Returns ``(grad_W, grad_H)``; ``grad_H`` is ``None`` when not requested.
    ``cache`` is the one produced by ``conj_layer_forward(..., return_cache=True)``.
    """
    H, W = _check_layer(H, W)
    F, full = cache if cache is not None else (f_conj(H[:, None, :], W[None, :, :]), None)
    g = exclusive_prod(F, full)  # (B, n, m)
    g *= np.asarray(upstream, dtype=float)[:, :, None]
    grad_W = np.einsum("bnm,bm->nm", g, H - 1.0)
    grad_H = np.einsum("bnm,nm->bm", g, W) if need_input_grad else None
    return grad_W, grad_H


def disj_layer_backward(H, W, upstream, need_input_grad: bool = True, cache=None):
    H, W = _check_layer(H, W)
    G, full = cache if cache is not None else (1.0 - f_disj(H[:, None, :], W[None, :, :]), None)
    g = exclusive_prod(G, full)
    g *= np.asarray(upstream, dtype=float)[:, :, None]
    grad_W = np.einsum("bnm,bm->nm", g, H)
    grad_H = np.einsum("bnm,nm->bm", g, W) if need_input_grad else None
    return grad_W, grad_H


# Binary inputs: F_c(x, w) is 1 where x = 1 and 1 - w where x = 0, so the
# conjunction is exp((1 - x) @ log(1 - w)^T) and reduces to matrix products.
# Factors equal to exactly 0 (w = 1 on an inactive input) are counted apart.

def conj_binary_input_forward(X, W):
    """Conjunction layer on a binary batch ``X``; returns ``(out, cache)``."""
    X, W = _check_layer(X, W)
    off = 1.0 - X
    one = W >= 1.0
    logs = np.log1p(-np.where(one, 0.0, W))
    n_zero = off @ one.T.astype(float)  # exact zero factors per (b, i)
    rest = np.exp(off @ logs.T)  # product over the non-zero factors
    out = np.where(n_zero > 0.5, 0.0, rest)
    return out, (off, one, n_zero, rest)


def conj_binary_input_backward(W, upstream, cache):
    off, one, n_zero, rest = cache
    up = np.asarray(upstream, dtype=float)
    none_zero = n_zero < 0.5
    single_zero = np.abs(n_zero - 1.0) < 0.5
    a = (up * rest * none_zero).T @ off  # (n, m)
    denom = np.where(one, 1.0, 1.0 - W)
    grad = -np.where(one, 0.0, a / denom)
    grad -= ((up * rest * single_zero).T @ off) * one
    return grad
