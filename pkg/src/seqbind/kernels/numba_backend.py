"""Numba-jitted twins of the numpy kernels.

Same signatures and semantics as ``numpy_backend``; the loops are written
for single-threaded SIMD (parallelism lives at the trial/fold process
level, so the kernels themselves stay serial and deterministic). All
kernels cache their compilation artifacts next to the module.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _pack_patches(xp, window, dilation, out_len):
    batch, n_in, padded_len = xp.shape
    xt = np.empty((batch, padded_len, n_in))
    for b in range(batch):
        for n in range(n_in):
            for i in range(padded_len):
                xt[b, i, n] = xp[b, n, i]
    patches = np.empty((batch * out_len, window * n_in))
    for b in range(batch):
        base = b * out_len
        for m in range(window):
            off = m * dilation
            col = m * n_in
            for i in range(out_len):
                row = patches[base + i]
                src = xt[b, off + i]
                for n in range(n_in):
                    row[col + n] = src[n]
    return patches


@njit(cache=True)
def conv1d_forward(xp, w, dilation):
    batch, n_in, padded_len = xp.shape
    k, window, _ = w.shape
    out_len = padded_len - (window - 1) * dilation
    patches = _pack_patches(xp, window, dilation, out_len)
    w_cols = np.empty((window * n_in, k))
    for f in range(k):
        for m in range(window):
            for n in range(n_in):
                w_cols[m * n_in + n, f] = w[f, m, n]
    flat = np.dot(patches, w_cols)  # (B*Lo, K)
    y = np.empty((batch, k, out_len))
    for b in range(batch):
        base = b * out_len
        for i in range(out_len):
            for f in range(k):
                y[b, f, i] = flat[base + i, f]
    return y, patches


@njit(cache=True)
def conv1d_backward_input(dy, w, dilation, padded_len):
    batch, k, out_len = dy.shape
    n_in = w.shape[2]
    window = w.shape[1]
    dxp = np.zeros((batch, n_in, padded_len))
    for b in range(batch):
        for f in range(k):
            row = dy[b, f]
            for m in range(window):
                off = m * dilation
                for n in range(n_in):
                    coef = w[f, m, n]
                    acc = dxp[b, n]
                    for i in range(out_len):
                        acc[off + i] += coef * row[i]
    return dxp


@njit(cache=True)
def conv1d_backward_weights(dy, patches, n_in, window):
    batch, k, out_len = dy.shape
    dy_rows = np.empty((k, batch * out_len))
    for b in range(batch):
        base = b * out_len
        for f in range(k):
            for i in range(out_len):
                dy_rows[f, base + i] = dy[b, f, i]
    flat = np.dot(dy_rows, patches)  # (K, M*N)
    dw = np.empty((k, window, n_in))
    for f in range(k):
        for m in range(window):
            for n in range(n_in):
                dw[f, m, n] = flat[f, m * n_in + n]
    return dw


@njit(cache=True)
def maxpool_forward(x, window, stride):
    batch, k, length = x.shape
    out_len = (length - window) // stride + 1
    out = np.empty((batch, k, out_len))
    arg = np.empty((batch, k, out_len), dtype=np.int64)
    for b in range(batch):
        for f in range(k):
            row = x[b, f]
            for i in range(out_len):
                lo = i * stride
                best = row[lo]
                best_j = lo
                for j in range(lo + 1, lo + window):
                    if row[j] > best:
                        best = row[j]
                        best_j = j
                out[b, f, i] = best
                arg[b, f, i] = best_j
    return out, arg


@njit(cache=True)
def maxpool_backward(dout, arg, length):
    batch, k, out_len = dout.shape
    dx = np.zeros((batch, k, length))
    for b in range(batch):
        for f in range(k):
            for i in range(out_len):
                dx[b, f, arg[b, f, i]] += dout[b, f, i]
    return dx


@njit(cache=True)
def lstm_forward(xproj, u):
    steps, batch, h4 = xproj.shape
    hid = h4 // 4
    h = np.zeros((steps + 1, batch, hid))
    c = np.zeros((steps + 1, batch, hid))
    gates = np.empty((steps, batch, h4))
    tanh_c = np.empty((steps, batch, hid))
    for t in range(steps):
        pre = xproj[t] + np.dot(h[t], u)
        for b in range(batch):
            for j in range(hid):
                gi = 1.0 / (1.0 + math.exp(-pre[b, j]))
                gf = 1.0 / (1.0 + math.exp(-pre[b, hid + j]))
                gc = math.tanh(pre[b, 2 * hid + j])
                go = 1.0 / (1.0 + math.exp(-pre[b, 3 * hid + j]))
                cv = gf * c[t, b, j] + gi * gc
                tc = math.tanh(cv)
                c[t + 1, b, j] = cv
                tanh_c[t, b, j] = tc
                h[t + 1, b, j] = go * tc
                gates[t, b, j] = gi
                gates[t, b, hid + j] = gf
                gates[t, b, 2 * hid + j] = gc
                gates[t, b, 3 * hid + j] = go
    return h, c, gates, tanh_c


@njit(cache=True)
def lstm_backward(dh_last, h, c, gates, tanh_c, u_t):
    steps, batch, h4 = gates.shape
    hid = h4 // 4
    dxproj = np.empty((steps, batch, h4))
    dh = dh_last.copy()
    dc = np.zeros((batch, hid))
    for t in range(steps - 1, -1, -1):
        for b in range(batch):
            for j in range(hid):
                gi = gates[t, b, j]
                gf = gates[t, b, hid + j]
                gc = gates[t, b, 2 * hid + j]
                go = gates[t, b, 3 * hid + j]
                tc = tanh_c[t, b, j]
                dcv = dc[b, j] + dh[b, j] * go * (1.0 - tc * tc)
                dxproj[t, b, j] = dcv * gc * gi * (1.0 - gi)
                dxproj[t, b, hid + j] = dcv * c[t, b, j] * gf * (1.0 - gf)
                dxproj[t, b, 2 * hid + j] = dcv * gi * (1.0 - gc * gc)
                dxproj[t, b, 3 * hid + j] = dh[b, j] * tc * go * (1.0 - go)
                dc[b, j] = dcv * gf
        dh = np.dot(dxproj[t], u_t)
    return dxproj


@njit(cache=True)
def gru_forward(x_zr, x_cand, u_zr, u_cand):
    steps, batch, h2 = x_zr.shape
    hid = h2 // 2
    h = np.zeros((steps + 1, batch, hid))
    zr = np.empty((steps, batch, h2))
    cand = np.empty((steps, batch, hid))
    reset_h = np.empty((steps, batch, hid))
    for t in range(steps):
        pre = x_zr[t] + np.dot(h[t], u_zr)
        for b in range(batch):
            for j in range(hid):
                upd = 1.0 / (1.0 + math.exp(-pre[b, j]))
                rst = 1.0 / (1.0 + math.exp(-pre[b, hid + j]))
                zr[t, b, j] = upd
                zr[t, b, hid + j] = rst
                reset_h[t, b, j] = rst * h[t, b, j]
        pre_c = x_cand[t] + np.dot(reset_h[t], u_cand)
        for b in range(batch):
            for j in range(hid):
                hc = math.tanh(pre_c[b, j])
                cand[t, b, j] = hc
                upd = zr[t, b, j]
                h[t + 1, b, j] = (1.0 - upd) * h[t, b, j] + upd * hc
    return h, zr, cand, reset_h


@njit(cache=True)
def gru_backward(dh_last, h, zr, cand, reset_h, u_zr_t, u_cand_t):
    steps, batch, h2 = zr.shape
    hid = h2 // 2
    dx_zr = np.empty((steps, batch, h2))
    dx_cand = np.empty((steps, batch, hid))
    dh = dh_last.copy()
    for t in range(steps - 1, -1, -1):
        for b in range(batch):
            for j in range(hid):
                upd = zr[t, b, j]
                hc = cand[t, b, j]
                dhc = dh[b, j] * upd
                dx_cand[t, b, j] = dhc * (1.0 - hc * hc)
        drh = np.dot(dx_cand[t], u_cand_t)
        for b in range(batch):
            for j in range(hid):
                upd = zr[t, b, j]
                rst = zr[t, b, hid + j]
                h_prev = h[t, b, j]
                dx_zr[t, b, j] = dh[b, j] * (cand[t, b, j] - h_prev) * upd * (1.0 - upd)
                dx_zr[t, b, hid + j] = drh[b, j] * h_prev * rst * (1.0 - rst)
                dh[b, j] = dh[b, j] * (1.0 - upd) + drh[b, j] * rst
        dh = dh + np.dot(dx_zr[t], u_zr_t)
    return dx_zr, dx_cand


@njit(cache=True)
def sgns_epoch(vec_in, vec_out, tokens, offsets, win_draws, neg_uniforms,
               cum_table, n_neg, alpha):
    dim = vec_in.shape[1]
    dv = np.zeros(dim)
    loss = 0.0
    pairs = 0
    cursor = 0
    pos = 0
    n_table = len(cum_table)
    for s in range(len(offsets) - 1):
        start = offsets[s]
        stop = offsets[s + 1]
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
                for j in range(dim):
                    dv[j] = 0.0
                for k in range(n_neg + 1):
                    if k == 0:
                        target = ctx_tok
                        label = 1.0
                    else:
                        u = neg_uniforms[cursor]
                        cursor += 1
                        # leftmost index with cum_table[idx] > u (searchsorted, right side)
                        a, bnd = 0, n_table
                        while a < bnd:
                            mid = (a + bnd) // 2
                            if cum_table[mid] <= u:
                                a = mid + 1
                            else:
                                bnd = mid
                        target = a
                        label = 0.0
                        if target == ctx_tok:
                            continue
                    w = vec_out[target]
                    f = 1.0 / (1.0 + math.exp(-min(35.0, max(-35.0, np.dot(v, w)))))
                    g = (label - f) * alpha
                    loss -= math.log(max(f if label == 1.0 else 1.0 - f, 1e-10))
                    for j in range(dim):
                        dv[j] += g * w[j]
                        w[j] += g * v[j]
                for j in range(dim):
                    v[j] += dv[j]
                pairs += 1
    return loss, pairs


@njit(cache=True)
def count_signed_rank_le(ranks2, limit):
    """Gray-code walk over all 2^n sign assignments, counting sums <= limit."""
    n = len(ranks2)
    if limit < 0:
        return 0
    total = np.int64(0)
    for i in range(n):
        total += ranks2[i]
    if limit >= total:
        return np.int64(1) << n
    count = np.int64(1) if limit >= 0 else np.int64(0)  # empty assignment
    cur = np.int64(0)
    member = np.zeros(n, dtype=np.uint8)
    for code in range(1, 1 << n):
        bit = 0
        while (code >> bit) & 1 == 0:
            bit += 1
        if member[bit]:
            cur -= ranks2[bit]
            member[bit] = 0
        else:
            cur += ranks2[bit]
            member[bit] = 1
        if cur <= limit:
            count += 1
    return count
