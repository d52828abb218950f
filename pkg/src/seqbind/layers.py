"""Layer zoo: 1-D convolution modules, max pooling, LSTM/GRU cells and
bidirectional wrappers, dense heads, and inverted dropout.

Single-step cell functions (`lstm_step`, `gru_step`, `rnn_run`) operate on
plain arrays and define the recurrences; the tape-recorded `*_layer`
functions run the same math through the fused scan ops for training.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter
from .errors import ConfigError, ShapeMismatch


def _sig(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# ---------------------------------------------------------------------------
# Recurrent cell parameters. Gate weights are (hidden, hidden + input_dim)
# and multiply the concatenation [h_prev, x]; biases are (hidden,).
# ---------------------------------------------------------------------------

class GRUCell:
    gate_names = ("update", "reset", "cand")

    def __init__(self, name, input_dim, hidden, init):
        self.input_dim = input_dim
        self.hidden = hidden
        shape = (hidden, hidden + input_dim)
        self.w_update = Parameter(f"{name}.w_update", init(shape, hidden + input_dim, hidden))
        self.w_reset = Parameter(f"{name}.w_reset", init(shape, hidden + input_dim, hidden))
        self.w_cand = Parameter(f"{name}.w_cand", init(shape, hidden + input_dim, hidden))
        self.b_update = Parameter(f"{name}.b_update", np.zeros(hidden))
        self.b_reset = Parameter(f"{name}.b_reset", np.zeros(hidden))
        self.b_cand = Parameter(f"{name}.b_cand", np.zeros(hidden))

    def parameters(self):
        return [self.w_update, self.w_reset, self.w_cand,
                self.b_update, self.b_reset, self.b_cand]


class LSTMCell:
    gate_names = ("input", "forget", "cell", "output")

    def __init__(self, name, input_dim, hidden, init):
        self.input_dim = input_dim
        self.hidden = hidden
        shape = (hidden, hidden + input_dim)
        for gate in self.gate_names:
            setattr(self, f"w_{gate}",
                    Parameter(f"{name}.w_{gate}", init(shape, hidden + input_dim, hidden)))
            setattr(self, f"b_{gate}", Parameter(f"{name}.b_{gate}", np.zeros(hidden)))

    def parameters(self):
        out = [getattr(self, f"w_{g}") for g in self.gate_names]
        out += [getattr(self, f"b_{g}") for g in self.gate_names]
        return out


def gru_step(x, h_prev, cell):
    """One GRU update. x (...,D) and h_prev (...,H) may carry a batch axis.

    update = sigmoid(W_u [h,x] + b_u); reset = sigmoid(W_r [h,x] + b_r);
    cand = tanh(W_c [reset*h, x] + b_c); h = (1-update)*h_prev + update*cand.
    """
    hx = np.concatenate([h_prev, x], axis=-1)
    upd = _sig(hx @ cell.w_update.value.T + cell.b_update.value)
    rst = _sig(hx @ cell.w_reset.value.T + cell.b_reset.value)
    rhx = np.concatenate([rst * h_prev, x], axis=-1)
    cand = np.tanh(rhx @ cell.w_cand.value.T + cell.b_cand.value)
    return (1.0 - upd) * h_prev + upd * cand


def lstm_step(x, h_prev, c_prev, cell):
    """One LSTM update with forget/input/output gates; returns (h, c)."""
    hx = np.concatenate([h_prev, x], axis=-1)
    gi = _sig(hx @ cell.w_input.value.T + cell.b_input.value)
    gf = _sig(hx @ cell.w_forget.value.T + cell.b_forget.value)
    go = _sig(hx @ cell.w_output.value.T + cell.b_output.value)
    gc = np.tanh(hx @ cell.w_cell.value.T + cell.b_cell.value)
    c = gf * c_prev + gi * gc
    return go * np.tanh(c), c


def rnn_run(xseq, cell, direction="forward", return_states=False):
    """Iterate a cell over xseq (T,D) or (T,B,D) from zero state; returns h_T.

    direction="backward" consumes the sequence reversed, so it equals a
    forward run on reverse(xseq).
    """
    xseq = np.asarray(xseq, dtype=np.float64)
    if xseq.shape[0] < 1:
        raise ShapeMismatch("rnn_run", xseq.shape)
    if direction not in ("forward", "backward"):
        raise ConfigError(f"unknown direction {direction!r}")
    order = range(xseq.shape[0]) if direction == "forward" else range(xseq.shape[0] - 1, -1, -1)
    state_shape = xseq.shape[1:-1] + (cell.hidden,)
    h = np.zeros(state_shape)
    c = np.zeros(state_shape) if isinstance(cell, LSTMCell) else None
    states = []
    for t in order:
        if c is None:
            h = gru_step(xseq[t], h, cell)
        else:
            h, c = lstm_step(xseq[t], h, c, cell)
        states.append(h)
    return (h, states) if return_states else h


def birnn_run(xseq, fwd_cell, bwd_cell):
    """Concatenated final states [forward(x); forward-on-reverse(x)]."""
    if fwd_cell.hidden != bwd_cell.hidden:
        raise ShapeMismatch("birnn_run", (fwd_cell.hidden,), (bwd_cell.hidden,))
    h_f = rnn_run(xseq, fwd_cell, "forward")
    h_b = rnn_run(xseq[::-1], bwd_cell, "forward")
    return np.concatenate([h_f, h_b], axis=-1)


# ---------------------------------------------------------------------------
# Tape-recorded layers (training path)
# ---------------------------------------------------------------------------

def conv_module(x, w, b, dilation=1):
    """Same-family convolution block: pad (M-1)*dilation on both ends so
    filters may partially overlap the sequence boundary, then bias + ReLU."""
    pad = (w.value.shape[1] - 1) * dilation
    return ad.relu(ad.bias_add(ad.conv1d(x, w, dilation=dilation, pad=pad), b))


def dense(x, w, b, activation="none"):
    out = ad.bias_add(ad.matmul(x, w), b)
    if activation == "relu":
        return ad.relu(out)
    if activation == "sigmoid":
        return ad.sigmoid(out)
    if activation == "none":
        return out
    raise ConfigError(f"unknown activation {activation!r}")


def dropout(x, keep_prob, rng=None, training=False):
    """Inverted dropout: keep with probability keep_prob and rescale by its
    inverse during training; identity at inference or keep_prob == 1."""
    if not 0.0 < keep_prob <= 1.0:
        raise ConfigError(f"dropout keep_prob must lie in (0, 1], got {keep_prob}")
    if not training or keep_prob == 1.0:
        return x
    mask = (rng.random(x.value.shape) < keep_prob) / keep_prob
    return ad.apply_mask(x, mask)


def _packed(cell, gates):
    """Stack per-gate weights into (input-projection, recurrent, bias) nodes."""
    hid = cell.hidden
    v_parts, u_parts, b_parts = [], [], []
    for gate in gates:
        w = getattr(cell, f"w_{gate}")
        u_parts.append(ad.transpose(ad.slice_axis(w, 1, 0, hid)))
        v_parts.append(ad.transpose(ad.slice_axis(w, 1, hid, hid + cell.input_dim)))
        b_parts.append(getattr(cell, f"b_{gate}"))
    return (ad.concat(v_parts, axis=1), ad.concat(u_parts, axis=1),
            ad.concat(b_parts, axis=0))


def _project(xseq, v, bias):
    steps, batch, dim = xseq.value.shape
    flat = ad.reshape(xseq, (steps * batch, dim))
    return ad.reshape(ad.bias_add(ad.matmul(flat, v), bias),
                      (steps, batch, bias.value.shape[0]))


def gru_layer(xseq, cell):
    """xseq (T,B,D) -> final hidden state (B,H), recorded on the tape."""
    v_zr, u_zr, b_zr = _packed(cell, ("update", "reset"))
    v_c, u_c, b_c = _packed(cell, ("cand",))
    return ad.gru_scan(_project(xseq, v_zr, b_zr), _project(xseq, v_c, b_c), u_zr, u_c)


def lstm_layer(xseq, cell):
    """xseq (T,B,D) -> final hidden state (B,H), recorded on the tape."""
    v, u, b = _packed(cell, ("input", "forget", "cell", "output"))
    return ad.lstm_scan(_project(xseq, v, b), u)


def recurrent_layer(xseq, cell, bidirectional=False, bwd_cell=None):
    run = lstm_layer if isinstance(cell, LSTMCell) else gru_layer
    if not bidirectional:
        return run(xseq, cell)
    return ad.concat([run(xseq, cell), run(ad.reverse_time(xseq), bwd_cell)], axis=1)
