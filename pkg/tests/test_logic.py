import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from mllp import _kernels
from mllp.errors import DimensionError
from mllp.logic import (
    binarize_weight,
    clip_weights,
    conj_backward,
    conj_binary_input_backward,
    conj_binary_input_forward,
    conj_forward,
    conj_layer_backward,
    conj_layer_forward,
    disj_backward,
    disj_forward,
    disj_layer_backward,
    disj_layer_forward,
    exclusive_prod,
)

FD_STEP = 1e-5


def _rel_err(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return np.max(np.abs(a - b) / np.maximum(1e-8, np.abs(a) + np.abs(b)))


# ---------------------------------------------------------------------------
# worked examples
# ---------------------------------------------------------------------------

def test_conj_forward_examples():
    assert conj_forward([1, 1], [1, 0]) == 1.0
    assert conj_forward([0.5, 1], [1, 1]) == 0.5
    assert conj_forward([0.2, 0.8], [0.5, 0.25]) == pytest.approx(0.57)


def test_disj_forward_examples():
    assert disj_forward([0, 0], [1, 1]) == 0.0
    assert disj_forward([0.5, 0.5], [1, 1]) == 0.75
    assert disj_forward([0.2, 0.8], [0.5, 0.5]) == pytest.approx(0.46)


def test_conj_backward_examples():
    gw, _ = conj_backward([1, 1], [0.3, 0.9], 1.0)
    assert gw.tolist() == [0.0, 0.0]
    gw, _ = conj_backward([0, 1], [0.5, 0.5], 1.0)
    assert gw.tolist() == pytest.approx([-1.0, 0.0])


def test_disj_backward_examples():
    gw, _ = disj_backward([0, 0], [0.3, 0.9], 1.0)
    assert gw.tolist() == [0.0, 0.0]
    gw, _ = disj_backward([1, 0.5], [0.5, 1], 1.0)
    assert gw.tolist() == pytest.approx([0.5, 0.25])


def test_clip_and_binarize_examples():
    assert clip_weights(np.array([1.2, -0.3, 0.5])).tolist() == [1.0, 0.0, 0.5]
    assert binarize_weight(0.7, 0.5) == 1
    assert binarize_weight(0.5, 0.5) == 0
    assert binarize_weight(0.3, 0.5) == 0


def test_length_mismatch_raises():
    with pytest.raises(DimensionError):
        conj_forward([1, 0, 1], [1, 1])
    with pytest.raises(DimensionError):
        disj_layer_forward(np.ones((2, 3)), np.ones((4, 2)))


# ---------------------------------------------------------------------------
# Boolean fidelity, exhaustive up to length 10
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("m", range(0, 11))
def test_boolean_fidelity_exhaustive(m):
    if m == 0:
        assert conj_forward([], []) == 1.0 and disj_forward([], []) == 0.0
        return
    grid = np.array(list(itertools.product([0, 1], repeat=m)), dtype=float)
    # all input vectors against a set of weight rows (all rows for m <= 6)
    if m <= 6:
        rows = grid
    else:
        rng = np.random.default_rng(m)
        rows = np.vstack([np.zeros(m), np.ones(m), rng.integers(0, 2, size=(40, m))]).astype(float)
    conj = conj_layer_forward(grid, rows)
    disj = disj_layer_forward(grid, rows)
    sel = rows.astype(bool)
    h = grid.astype(bool)
    want_and = np.all(h[:, None, :] | ~sel[None, :, :], axis=2)
    want_or = np.any(h[:, None, :] & sel[None, :, :], axis=2)
    assert np.array_equal(conj, want_and.astype(float))
    assert np.array_equal(disj, want_or.astype(float))
    assert np.array_equal(_kernels.conj_forward(grid, rows), conj)
    assert np.array_equal(_kernels.disj_forward(grid, rows), disj)
    fast, _ = conj_binary_input_forward(grid, rows)
    assert np.array_equal(fast, conj)


def test_empty_selection_conventions():
    h = np.array([0.3, 0.0, 1.0])
    assert conj_forward(h, np.zeros(3)) == 1.0
    assert disj_forward(h, np.zeros(3)) == 0.0


# ---------------------------------------------------------------------------
# range closure and monotonicity
# ---------------------------------------------------------------------------

unit = st.floats(0.0, 1.0, allow_nan=False)


@given(st.integers(1, 12).flatmap(lambda m: st.tuples(arrays(float, m, elements=unit), arrays(float, m, elements=unit))))
def test_range_closure(hw):
    h, w = hw
    assert 0.0 <= conj_forward(h, w) <= 1.0
    assert 0.0 <= disj_forward(h, w) <= 1.0


@given(st.integers(1, 8).flatmap(lambda m: st.tuples(
    arrays(float, m, elements=unit), arrays(float, m, elements=unit), arrays(float, m, elements=unit))))
def test_monotone_in_inputs(hdw):
    h, d, w = hdw
    hi = np.minimum(1.0, h + d)
    assert conj_forward(hi, w) >= conj_forward(h, w) - 1e-12
    assert disj_forward(hi, w) >= disj_forward(h, w) - 1e-12


# ---------------------------------------------------------------------------
# gradients against central finite differences
# ---------------------------------------------------------------------------

def _fd_row(f, h, w):
    gw = np.empty_like(w)
    gh = np.empty_like(h)
    for j in range(w.size):
        e = np.zeros_like(w)
        e[j] = FD_STEP
        gw[j] = (f(h, w + e) - f(h, w - e)) / (2 * FD_STEP)
        gh[j] = (f(h + e, w) - f(h - e, w)) / (2 * FD_STEP)
    return gw, gh


@pytest.mark.parametrize("kind", ["conj", "disj"])
def test_row_gradients_match_finite_differences(kind):
    fwd, bwd = (conj_forward, conj_backward) if kind == "conj" else (disj_forward, disj_backward)
    rng = np.random.default_rng(11 if kind == "conj" else 12)
    for _ in range(100):
        m = int(rng.integers(1, 12))
        h = rng.uniform(0.05, 0.95, m)
        w = rng.uniform(0.05, 0.95, m)
        up = rng.uniform(-2, 2)
        gw, gh = bwd(h, w, up)
        fw, fh = _fd_row(fwd, h, w)
        assert _rel_err(gw, up * fw) < 1e-5
        assert _rel_err(gh, up * fh) < 1e-5


def _ld_layer(kind, H, W):
    """Reference forward pass in extended precision (oracle for finite differences)."""
    H = np.asarray(H, dtype=np.longdouble)
    W = np.asarray(W, dtype=np.longdouble)
    if kind == "conj":
        return np.prod(1 - W[None] * (1 - H[:, None, :]), axis=2)
    return 1 - np.prod(1 - H[:, None, :] * W[None], axis=2)


@pytest.mark.parametrize("kind", ["conj", "disj"])
def test_layer_gradients_match_finite_differences(kind):
    bwd = conj_layer_backward if kind == "conj" else disj_layer_backward
    kern = _kernels.conj_backward if kind == "conj" else _kernels.disj_backward
    rng = np.random.default_rng(21)
    for B, n, m in [(3, 4, 5), (2, 64, 64), (5, 1, 1), (4, 7, 30)]:
        H = rng.uniform(0.05, 0.95, (B, m))
        W = rng.uniform(0.05, 0.95, (n, m))
        U = rng.normal(size=(B, n))
        step = np.longdouble(FD_STEP)

        def obj(i, H_, W_):
            # one neuron's weighted output keeps the objective small
            return np.sum(U[:, i] * _ld_layer(kind, H_, W_)[:, i])

        gW, gH = bwd(H, W, U)
        for _ in range(40):
            i, j, b = rng.integers(n), rng.integers(m), rng.integers(B)
            E = np.zeros((n, m), dtype=np.longdouble)
            E[i, j] = step
            fd = (obj(i, H, W + E) - obj(i, H, W - E)) / (2 * step)
            assert _rel_err(gW[i, j], float(fd)) < 1e-5
            E = np.zeros((B, m), dtype=np.longdouble)
            E[b, j] = step
            fd = sum((obj(k, H + E, W) - obj(k, H - E, W)) / (2 * step) for k in range(n))
            assert _rel_err(gH[b, j], float(fd)) < 1e-5
        kW, kH = kern(H, W, U, True)
        assert np.allclose(kW, gW, rtol=1e-10, atol=1e-13)
        assert np.allclose(kH, gH, rtol=1e-10, atol=1e-13)


@pytest.mark.parametrize("kind", ["conj", "disj"])
def test_gradients_with_zero_factors(kind):
    # weights at 1 on inactive inputs make factors exactly 0; no division by zero
    bwd = conj_layer_backward if kind == "conj" else disj_layer_backward
    kern = _kernels.conj_backward if kind == "conj" else _kernels.disj_backward
    H = np.array([[0.0, 0.0, 0.4, 1.0], [1.0, 0.0, 0.5, 0.2]])
    W = np.array([[1.0, 1.0, 0.3, 0.2], [1.0, 0.0, 0.7, 1.0]])
    U = np.ones((2, 2))
    gW, gH = bwd(H, W, U)
    assert np.isfinite(gW).all() and np.isfinite(gH).all()
    kW, kH = kern(H, W, U, True)
    assert np.allclose(kW, gW) and np.allclose(kH, gH)
    # brute-force leave-one-out products for the first row/neuron
    fwd = conj_layer_forward if kind == "conj" else disj_layer_forward
    for j in range(4):
        E = np.zeros_like(W)
        E[0, j] = FD_STEP
        lo, hi = np.clip(W - E, 0, 1), np.clip(W + E, 0, 1)
        fd = (np.sum(fwd(H, hi)) - np.sum(fwd(H, lo))) / (hi[0, j] - lo[0, j])
        assert gW[0, j] == pytest.approx(fd, abs=1e-6)


def test_binary_input_fast_path_matches_generic():
    rng = np.random.default_rng(5)
    for _ in range(20):
        B, n, m = rng.integers(1, 20), rng.integers(1, 20), rng.integers(1, 40)
        X = rng.integers(0, 2, size=(B, m)).astype(float)
        W = rng.uniform(0, 1, size=(n, m))
        W[rng.random(W.shape) < 0.15] = 1.0  # exact zero factors
        U = rng.normal(size=(B, n))
        out, cache = conj_binary_input_forward(X, W)
        assert np.allclose(out, conj_layer_forward(X, W), atol=1e-12)
        gW, _ = conj_layer_backward(X, W, U, need_input_grad=False)
        assert np.allclose(conj_binary_input_backward(W, U, cache), gW, atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(arrays(float, st.integers(1, 12), elements=st.floats(0.0, 1.0)))
def test_exclusive_prod_matches_brute_force(f):
    out = exclusive_prod(f)
    want = [np.prod(np.delete(f, j)) for j in range(f.size)]
    assert np.allclose(out, want, rtol=1e-9, atol=1e-300)
