"""Pure-numpy implementations of the hot numeric kernels.

Every function here has a jitted twin in ``numba_backend`` with identical
semantics and call signatures; tests hold the two in lockstep. This module
is the fallback path (``SEQBIND_BACKEND=numpy``) and is also the reference
the single-step recurrent cells build on.

Array layout conventions:
  * convolution inputs are (batch, channels, length), already zero-padded
  * recurrent scans are time-major: (steps, batch, features)
  * recurrent gate blocks are packed along the last axis
    (LSTM order: input, forget, candidate, output; GRU order: update, reset)
"""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _sigmoid(x):
    # evaluated via exp on the negative half-line only, so it never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# ---------------------------------------------------------------------------
# 1-D convolution (valid cross-correlation with dilated taps), computed as
# an explicit patch matrix against one BLAS matmul
# ---------------------------------------------------------------------------

def _im2col(xp, window, dilation):
    batch, n_in, padded_len = xp.shape
    span = (window - 1) * dilation + 1
    out_len = padded_len - span + 1
    xt = np.ascontiguousarray(xp.transpose(0, 2, 1))  # (B, Lp, N)
    patches = np.empty((batch, out_len, window, n_in))
    for m in range(window):
        off = m * dilation
        patches[:, :, m, :] = xt[:, off:off + out_len, :]
    return patches.reshape(batch * out_len, window * n_in), out_len


def conv1d_forward(xp, w, dilation):
    """xp (B,N,Lp) correlated with filters w (K,M,N) -> ((B,K,Lo), patches).

    The returned patch matrix can be fed back to conv1d_backward_weights to
    avoid repacking the input during the backward pass.
    """
    k, window, n_in = w.shape
    patches, out_len = _im2col(xp, window, dilation)
    y = patches @ np.ascontiguousarray(w.reshape(k, window * n_in).T)
    return np.ascontiguousarray(y.reshape(xp.shape[0], out_len, k).transpose(0, 2, 1)), patches


def conv1d_backward_input(dy, w, dilation, padded_len):
    """Gradient of conv1d_forward w.r.t. its padded input."""
    batch, k, out_len = dy.shape
    n_in = w.shape[2]
    dy_flat = np.ascontiguousarray(dy.transpose(0, 2, 1)).reshape(batch * out_len, k)
    dxp_t = np.zeros((batch, padded_len, n_in))
    for m in range(w.shape[1]):
        off = m * dilation
        dxp_t[:, off:off + out_len, :] += (dy_flat @ w[:, m, :]).reshape(
            batch, out_len, n_in)
    return np.ascontiguousarray(dxp_t.transpose(0, 2, 1))


def conv1d_backward_weights(dy, patches, n_in, window):
    """Gradient of conv1d_forward w.r.t. the filter bank, from its patches."""
    batch, k, out_len = dy.shape
    dy_flat = np.ascontiguousarray(dy.transpose(0, 2, 1)).reshape(batch * out_len, k)
    return np.ascontiguousarray((dy_flat.T @ patches).reshape(k, window, n_in))


# ---------------------------------------------------------------------------
# Max pooling over sliding windows
# ---------------------------------------------------------------------------

def maxpool_forward(x, window, stride):
    """x (B,K,L) -> (out (B,K,Lo), arg (B,K,Lo) absolute index of the max).

    Ties resolve to the smallest index so gradient routing is deterministic.
    """
    win = sliding_window_view(x, window, axis=2)[:, :, ::stride]  # (B,K,Lo,P)
    arg_local = win.argmax(axis=3)
    out = np.take_along_axis(win, arg_local[..., None], axis=3)[..., 0]
    n_out = win.shape[2]
    arg = arg_local + np.arange(n_out, dtype=np.int64) * stride
    return np.ascontiguousarray(out), np.ascontiguousarray(arg)


def maxpool_backward(dout, arg, length):
    batch, k, _ = dout.shape
    dx = np.zeros(batch * k * length)
    base = np.arange(batch * k, dtype=np.int64)[:, None] * length
    flat = (arg.reshape(batch * k, -1) + base).ravel()
    np.add.at(dx, flat, dout.ravel())
    return dx.reshape(batch, k, length)


# ---------------------------------------------------------------------------
# LSTM / GRU full-sequence scans (loss taken at the final hidden state)
# ---------------------------------------------------------------------------

def lstm_forward(xproj, u):
    """Scan an LSTM over xproj (T,B,4H) with recurrent weights u (H,4H).

    xproj already contains the input projection plus biases. Returns the
    state trajectories and gate activations needed by the backward pass:
    (h (T+1,B,H), c (T+1,B,H), gates (T,B,4H), tanh_c (T,B,H)).

    The candidate tanh rides the same vectorized exp as the sigmoids
    (tanh(x) = 2*sigmoid(2x) - 1), one transcendental pass per step.
    """
    steps, batch, h4 = xproj.shape
    hid = h4 // 4
    h = np.zeros((steps + 1, batch, hid))
    c = np.zeros((steps + 1, batch, hid))
    gates = np.empty((steps, batch, h4))
    tanh_c = np.empty((steps, batch, hid))
    with np.errstate(over="ignore"):
        for t in range(steps):
            pre = xproj[t] + h[t] @ u
            pre[:, 2 * hid:3 * hid] *= 2.0
            g = gates[t]
            np.exp(-pre, out=g)
            g += 1.0
            np.reciprocal(g, out=g)
            cand = g[:, 2 * hid:3 * hid]
            cand *= 2.0
            cand -= 1.0
            cv = c[t + 1]
            np.multiply(g[:, hid:2 * hid], c[t], out=cv)
            cv += g[:, :hid] * cand
            np.tanh(cv, out=tanh_c[t])
            np.multiply(g[:, 3 * hid:], tanh_c[t], out=h[t + 1])
    return h, c, gates, tanh_c


def lstm_backward(dh_last, h, c, gates, tanh_c, u_t):
    """Backpropagate dh_last (B,H) through the scan; returns dxproj (T,B,4H).

    u_t is the transposed recurrent matrix (4H,H). The recurrent-weight
    gradient is a single matmul of the trajectories and is left to the
    caller: du = h[:T] . dxproj summed over (T,B).
    """
    steps, batch, h4 = gates.shape
    hid = h4 // 4
    dxproj = np.empty((steps, batch, h4))
    dh = dh_last.copy()
    dc = np.zeros((batch, hid))
    for t in range(steps - 1, -1, -1):
        gi = gates[t, :, :hid]
        gf = gates[t, :, hid:2 * hid]
        gc = gates[t, :, 2 * hid:3 * hid]
        go = gates[t, :, 3 * hid:]
        tc = tanh_c[t]
        dc = dc + dh * go * (1.0 - tc * tc)
        dpre = dxproj[t]
        dpre[:, :hid] = dc * gc * gi * (1.0 - gi)
        dpre[:, hid:2 * hid] = dc * c[t] * gf * (1.0 - gf)
        dpre[:, 2 * hid:3 * hid] = dc * gi * (1.0 - gc * gc)
        dpre[:, 3 * hid:] = dh * tc * go * (1.0 - go)
        dh = dpre @ u_t
        dc = dc * gf
    return dxproj


def gru_forward(x_zr, x_cand, u_zr, u_cand):
    """Scan a GRU over projected inputs.

    x_zr (T,B,2H) holds the update/reset projections, x_cand (T,B,H) the
    candidate projection (both include biases); u_zr (H,2H) and u_cand (H,H)
    are the recurrent weights. Returns (h (T+1,B,H), zr (T,B,2H),
    cand (T,B,H), reset_h (T,B,H)).
    """
    steps, batch, h2 = x_zr.shape
    hid = h2 // 2
    h = np.zeros((steps + 1, batch, hid))
    zr = np.empty((steps, batch, h2))
    cand = np.empty((steps, batch, hid))
    reset_h = np.empty((steps, batch, hid))
    with np.errstate(over="ignore"):
        for t in range(steps):
            g = zr[t]
            np.exp(-(x_zr[t] + h[t] @ u_zr), out=g)
            g += 1.0
            np.reciprocal(g, out=g)
            upd = g[:, :hid]
            np.multiply(g[:, hid:], h[t], out=reset_h[t])
            np.tanh(x_cand[t] + reset_h[t] @ u_cand, out=cand[t])
            h[t + 1] = h[t] + upd * (cand[t] - h[t])
    return h, zr, cand, reset_h


def gru_backward(dh_last, h, zr, cand, reset_h, u_zr_t, u_cand_t):
    """Returns (dx_zr (T,B,2H), dx_cand (T,B,H)); recurrent-weight grads are
    left to the caller as trajectory matmuls."""
    steps, batch, h2 = zr.shape
    hid = h2 // 2
    dx_zr = np.empty((steps, batch, h2))
    dx_cand = np.empty((steps, batch, hid))
    dh = dh_last.copy()
    for t in range(steps - 1, -1, -1):
        upd = zr[t, :, :hid]
        rst = zr[t, :, hid:]
        hc = cand[t]
        h_prev = h[t]
        dhc = dh * upd
        dpre_c = dhc * (1.0 - hc * hc)
        dx_cand[t] = dpre_c
        drh = dpre_c @ u_cand_t
        dh_prev = dh * (1.0 - upd) + drh * rst
        dx_zr[t, :, :hid] = dh * (hc - h_prev) * upd * (1.0 - upd)
        dx_zr[t, :, hid:] = drh * h_prev * rst * (1.0 - rst)
        dh = dh_prev + dx_zr[t] @ u_zr_t
    return dx_zr, dx_cand


# ---------------------------------------------------------------------------
# Skip-gram with negative sampling (one epoch over a tokenized corpus)
# ---------------------------------------------------------------------------

def sgns_epoch(vec_in, vec_out, tokens, offsets, win_draws, neg_uniforms,
               cum_table, n_neg, alpha):
    """Run one epoch of skip-gram negative-sampling updates in place.

    tokens/offsets form a ragged array of sentences; win_draws holds one
    reduced-window size (>=1) per center position; neg_uniforms holds n_neg
    uniforms per (center, context) pair, consumed sequentially, each mapped
    to a vocabulary index through the cumulative sampling table. A drawn
    negative equal to the true context is skipped (its draw is consumed).
    Returns (summed pair loss, pair count).
    """
    loss = 0.0
    pairs = 0
    cursor = 0
    pos = 0
    for s in range(len(offsets) - 1):
        start, stop = offsets[s], offsets[s + 1]
        length = stop - start
        for center in range(length):
            reach = int(win_draws[pos])
            pos += 1
            center_tok = int(tokens[start + center])
            lo = max(0, center - reach)
            hi = min(length - 1, center + reach)
            for ctx in range(lo, hi + 1):
                if ctx == center:
                    continue
                ctx_tok = int(tokens[start + ctx])
                v = vec_in[center_tok]
                dv = np.zeros_like(v)
                for k in range(n_neg + 1):
                    if k == 0:
                        target, label = ctx_tok, 1.0
                    else:
                        u = neg_uniforms[cursor]
                        cursor += 1
                        target = int(np.searchsorted(cum_table, u, side="right"))
                        label = 0.0
                        if target == ctx_tok:
                            continue
                    w = vec_out[target]
                    f = 1.0 / (1.0 + math.exp(-min(35.0, max(-35.0, float(np.dot(v, w))))))
                    g = (label - f) * alpha
                    loss -= math.log(max(f if label else 1.0 - f, 1e-10))
                    dv += g * w
                    vec_out[target] += g * v
                vec_in[center_tok] += dv
                pairs += 1
    return loss, pairs


# ---------------------------------------------------------------------------
# Signed-rank sign-assignment counting (exact Wilcoxon tail)
# ---------------------------------------------------------------------------

def count_signed_rank_le(ranks2, limit):
    """Number of the 2^n sign assignments whose positive-rank sum is <= limit.

    ranks2 are the doubled midranks (integers), limit is on the doubled
    scale. Aggregates the full enumeration with a subset-sum table, so the
    count is exact in int64.
    """
    if limit < 0:
        return 0
    total = int(ranks2.sum())
    if limit >= total:
        return 1 << len(ranks2)
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    for r in ranks2:
        r = int(r)
        counts[r:] = counts[r:] + counts[:total + 1 - r]
    return int(counts[:limit + 1].sum())
