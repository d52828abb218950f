"""Declarative architecture specs, the nine built-in presets, and model
construction.

An ArchSpec says *what* the network looks like (input representation,
convolution stack, recurrent stage, dense head); a HyperConfig carries the
sampled training knobs. Fields marked "auto" in a spec are resolved from
the HyperConfig at build time (filter counts via the 1.5x progression,
first-layer window from the motif length, hidden sizes from their sampled
values).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import autodiff as ad
from . import layers
from .autodiff import Parameter
from .errors import ConfigError

RECURRENT_KINDS = ("none", "lstm", "bilstm", "gru", "bigru")

# fixed knobs shared by every configuration
EMBED_DIM = 50
KMER_K = 3
KMER_STRIDE = 1
POOL_WINDOW = 3
POOL_STRIDE = 1
BATCH_SIZE = 128
LATER_WINDOW = 5  # conv window for layers after the first


@dataclass(frozen=True)
class ConvLayerSpec:
    filters: int | None = None   # None -> 1.5x progression from the sampled base
    window: int | None = None    # None -> motif length (first layer) or LATER_WINDOW
    dilation: int = 1


@dataclass(frozen=True)
class ArchSpec:
    name: str
    input_repr: str
    conv_layers: tuple = ()
    recurrent: str = "none"
    rnn_hidden: int | None = None      # None -> sampled value
    head: int | str | None = "auto"    # "auto" -> sampled; None -> direct sigmoid

    def __post_init__(self):
        if self.input_repr not in ("onehot", "embedding"):
            raise ConfigError(f"input_repr must be onehot or embedding, got {self.input_repr!r}")
        if self.recurrent not in RECURRENT_KINDS:
            raise ConfigError(f"unknown recurrent kind {self.recurrent!r}")
        if not self.conv_layers and self.recurrent == "none":
            raise ConfigError("spec needs at least one of: conv layers, recurrent stage")


def _spec(name, repr_, convs, recurrent="none"):
    return ArchSpec(name, repr_, tuple(ConvLayerSpec(dilation=d) for d in convs), recurrent)


PRESETS = {
    "DeepBind": _spec("DeepBind", "onehot", [1]),
    "DeepBind*": _spec("DeepBind*", "onehot", [1, 1, 1]),
    "Dilated": _spec("Dilated", "onehot", [1, 2, 2]),
    "DanQ": _spec("DanQ", "onehot", [1], "bilstm"),
    "DanQ*": _spec("DanQ*", "onehot", [1, 1, 1], "bilstm"),
    "DeepBind-E*": _spec("DeepBind-E*", "embedding", [1, 1, 1]),
    "KEGRU": _spec("KEGRU", "embedding", [], "bigru"),
    "ECLSTM": _spec("ECLSTM", "embedding", [1], "lstm"),
    "ECBLSTM": _spec("ECBLSTM", "embedding", [1], "bilstm"),
}


def preset(name):
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return PRESETS[name]


def expand_filters(base, n_layers):
    """Filter counts growing 50% per layer: [base, round(1.5*base), ...]."""
    if base < 1:
        raise ConfigError(f"base filter count must be >= 1, got {base}")
    return [int(round(base * 1.5 ** i)) for i in range(n_layers)]


# ---------------------------------------------------------------------------
# Flat key=value serialization
# ---------------------------------------------------------------------------

def _fmt_auto(v):
    return "auto" if v is None else str(v)


def serialize_spec(spec):
    if spec.conv_layers:
        convs = "|".join(
            f"filters:{_fmt_auto(c.filters)},window:{_fmt_auto(c.window)},dilation:{c.dilation}"
            for c in spec.conv_layers)
    else:
        convs = "none"
    head = "none" if spec.head is None else str(spec.head)
    return "\n".join([
        f"name={spec.name}",
        f"input_repr={spec.input_repr}",
        f"conv_layers={convs}",
        f"recurrent={spec.recurrent}",
        f"rnn_hidden={_fmt_auto(spec.rnn_hidden)}",
        f"head={head}",
    ]) + "\n"


def parse_spec(text):
    kv = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"bad spec line {line!r}: expected key=value")
        key, value = line.split("=", 1)
        kv[key.strip()] = value.strip()
    missing = {"input_repr", "conv_layers", "recurrent"} - kv.keys()
    if missing:
        raise ConfigError(f"spec file missing keys: {sorted(missing)}")

    def auto(v, cast=int):
        return None if v == "auto" else cast(v)

    convs = []
    if kv["conv_layers"] != "none":
        for part in kv["conv_layers"].split("|"):
            entry = dict(item.split(":", 1) for item in part.split(","))
            convs.append(ConvLayerSpec(filters=auto(entry.get("filters", "auto")),
                                       window=auto(entry.get("window", "auto")),
                                       dilation=int(entry.get("dilation", 1))))
    head_raw = kv.get("head", "auto")
    head = None if head_raw == "none" else ("auto" if head_raw == "auto" else int(head_raw))
    return ArchSpec(name=kv.get("name", "custom"), input_repr=kv["input_repr"],
                    conv_layers=tuple(convs), recurrent=kv["recurrent"],
                    rnn_hidden=auto(kv.get("rnn_hidden", "auto")), head=head)


# ---------------------------------------------------------------------------
# Hyperparameter configuration (one sampled point of the search space)
# ---------------------------------------------------------------------------

N_FILTER_CHOICES = (16, 32)
RNN_HIDDEN_CHOICES = (20, 50, 80, 100)
HEAD_CHOICES = (None, 32, 64)
OPTIMIZERS = ("sgd", "adagrad")
LEARNING_RATE_RANGE = (1e-3, 1e-1)
MOMENTUM_RANGE = (0.95, 0.99)
INIT_KINDS = ("xavier", "normal")
SCALE_MOTIF_RANGE = (1e-6, 1e-1)
SCALE_RNN_RANGE = (1e-6, 1e-1)
SCALE_DENSE_RANGE = (1e-5, 1e-1)
WEIGHT_DECAY_RANGE = (1e-10, 1e-1)
DROPOUT_CHOICES = (0.4, 0.55, 0.7, 0.85, 1.0)
MOTIF_LENGTH_ONEHOT = 24
MOTIF_LENGTH_EMBEDDING = 10


@dataclass
class HyperConfig:
    motif_length: int
    n_filters: int
    rnn_hidden: int
    head_hidden: int | None
    optimizer: str
    learning_rate: float
    momentum: float
    weight_init: str
    init_scale_motifs: float
    init_scale_rnn: float
    init_scale_dense: float
    weight_decay: float
    dropout_keep: float
    selected_steps: int | None = None

    def validate(self, input_repr):
        expect = MOTIF_LENGTH_ONEHOT if input_repr == "onehot" else MOTIF_LENGTH_EMBEDDING
        checks = [
            (self.motif_length == expect, f"motif_length must be {expect} for {input_repr}"),
            (self.n_filters in N_FILTER_CHOICES, "n_filters outside its domain"),
            (self.rnn_hidden in RNN_HIDDEN_CHOICES, "rnn_hidden outside its domain"),
            (self.head_hidden in HEAD_CHOICES, "head_hidden outside its domain"),
            (self.optimizer in OPTIMIZERS, "unknown optimizer"),
            (LEARNING_RATE_RANGE[0] <= self.learning_rate <= LEARNING_RATE_RANGE[1],
             "learning_rate outside its range"),
            (MOMENTUM_RANGE[0] <= self.momentum <= MOMENTUM_RANGE[1],
             "momentum outside its range"),
            (self.weight_init in INIT_KINDS, "unknown weight_init"),
            (SCALE_MOTIF_RANGE[0] <= self.init_scale_motifs <= SCALE_MOTIF_RANGE[1],
             "init_scale_motifs outside its range"),
            (SCALE_RNN_RANGE[0] <= self.init_scale_rnn <= SCALE_RNN_RANGE[1],
             "init_scale_rnn outside its range"),
            (SCALE_DENSE_RANGE[0] <= self.init_scale_dense <= SCALE_DENSE_RANGE[1],
             "init_scale_dense outside its range"),
            (WEIGHT_DECAY_RANGE[0] <= self.weight_decay <= WEIGHT_DECAY_RANGE[1],
             "weight_decay outside its range"),
            (self.dropout_keep in DROPOUT_CHOICES, "dropout_keep outside its domain"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(f"invalid hyperparameter setting: {msg}")

    def to_dict(self):
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = "none" if v is None else repr(v) if isinstance(v, float) else str(v)
        return out

    @classmethod
    def from_dict(cls, kv):
        kwargs = {}
        for f in fields(cls):
            raw = kv[f.name]
            if raw == "none":
                kwargs[f.name] = None
            elif f.name in ("optimizer", "weight_init"):
                kwargs[f.name] = raw
            elif f.name in ("motif_length", "n_filters", "rnn_hidden", "head_hidden",
                            "selected_steps"):
                kwargs[f.name] = int(raw)
            else:
                kwargs[f.name] = float(raw)
        return cls(**kwargs)


def default_hyper(input_repr):
    """A reasonable fixed setting for `train` runs without a search."""
    return HyperConfig(
        motif_length=MOTIF_LENGTH_ONEHOT if input_repr == "onehot" else MOTIF_LENGTH_EMBEDDING,
        n_filters=16, rnn_hidden=50, head_hidden=32, optimizer="sgd",
        learning_rate=0.05, momentum=0.95, weight_init="xavier",
        init_scale_motifs=1e-2, init_scale_rnn=1e-2, init_scale_dense=1e-2,
        weight_decay=1e-6, dropout_keep=1.0, selected_steps=None)


# ---------------------------------------------------------------------------
# Model construction
# ---------------------------------------------------------------------------

def _initializer(rng, kind, scl):
    def init(shape, fan_in, fan_out):
        if kind == "xavier":
            bound = math.sqrt(6.0 / (fan_in + fan_out))
            return rng.uniform(-bound, bound, shape)
        return rng.normal(0.0, scl, shape)
    return init


class Model:
    """A wired network: parameter banks plus a pure scoring function."""

    def __init__(self, arch, hyper, fixed_length, embedding=None):
        self.arch = arch
        self.hyper = hyper
        self.fixed_length = fixed_length
        self.embedding = embedding  # (vocab, dim) array, frozen
        self.conv_layout = []       # [(filters, window, dilation), ...]
        self.conv_params = []       # [(w, b), ...]
        self.cells = []             # recurrent cells (1 or 2 for bi-)
        self.head_params = None
        self.out_params = None
        self.step_count = 0

    # -- construction ------------------------------------------------------

    @property
    def has_recurrent(self):
        return self.arch.recurrent != "none"

    @property
    def input_channels(self):
        return 4 if self.arch.input_repr == "onehot" else self.embedding.shape[1]

    def parameters(self):
        out = []
        for w, b in self.conv_params:
            out += [w, b]
        for cell in self.cells:
            out += cell.parameters()
        if self.head_params:
            out += list(self.head_params)
        out += list(self.out_params)
        return out

    def weight_parameters(self):
        """Parameters subject to weight decay (matrices, not biases)."""
        return [p for p in self.parameters() if p.value.ndim >= 2]

    def named_parameters(self):
        return {p.name: p for p in self.parameters()}

    # -- forward pass ------------------------------------------------------

    def _input_tensor(self, batch):
        if self.arch.input_repr == "onehot":
            return ad.constant(batch)
        emb = self.embedding[batch]                       # (B, T, d)
        return ad.constant(np.ascontiguousarray(np.moveaxis(emb, 1, 2)))  # (B, d, T)

    def _features(self, x, training=False, rng=None):
        keep = self.hyper.dropout_keep
        for (w, b), (_, _, dil) in zip(self.conv_params, self.conv_layout):
            x = layers.conv_module(x, w, b, dilation=dil)
            x = ad.maxpool1d(x, POOL_WINDOW, POOL_STRIDE)
            x = layers.dropout(x, keep, rng, training)
        if self.has_recurrent:
            xseq = ad.moveaxis(x, 2, 0)  # (T, B, C)
            bidir = self.arch.recurrent.startswith("bi")
            h = layers.recurrent_layer(xseq, self.cells[0], bidir,
                                       self.cells[1] if bidir else None)
            return layers.dropout(h, keep, rng, training)
        b, k, length = x.value.shape
        return ad.reshape(x, (b, k * length))

    def forward(self, batch, training=False, rng=None):
        """Probabilities (B,) that each input contains a binding site."""
        feats = self._features(self._input_tensor(batch), training, rng)
        if self.head_params:
            feats = layers.dense(feats, *self.head_params, activation="relu")
            feats = layers.dropout(feats, self.hyper.dropout_keep, rng, training)
        p = layers.dense(feats, *self.out_params, activation="sigmoid")
        return ad.reshape(p, (p.value.shape[0],))

    def predict(self, batch, chunk=512):
        """Inference probabilities as a plain array, in memory-bounded chunks."""
        parts = []
        for i in range(0, len(batch), chunk):
            parts.append(self.forward(batch[i:i + chunk]).value)
        return np.concatenate(parts) if parts else np.zeros(0)

    def encode_input(self, dataset):
        """Dataset -> the array format this model's forward pass consumes."""
        if self.arch.input_repr == "onehot":
            return dataset.onehot_matrix()
        return dataset.token_matrix(KMER_K, KMER_STRIDE)


def resolve_conv_layout(spec, hyper):
    n = len(spec.conv_layers)
    progression = expand_filters(hyper.n_filters, n)
    layout = []
    for i, layer in enumerate(spec.conv_layers):
        filters = layer.filters if layer.filters is not None else progression[i]
        window = layer.window if layer.window is not None else (
            hyper.motif_length if i == 0 else LATER_WINDOW)
        layout.append((filters, window, layer.dilation))
    explicit = [l.filters for l in spec.conv_layers if l.filters is not None]
    if len(explicit) == n and n > 1:
        expected = expand_filters(explicit[0], n)
        if explicit != expected:
            raise ConfigError(f"explicit filter counts {explicit} break the 1.5x "
                              f"progression {expected}")
    return layout


def build_model(spec, hyper, fixed_length, seed, embedding=None):
    """Create all parameter banks and verify the wiring with a dry run.

    Identical (spec, hyper, fixed_length, seed, embedding) inputs produce
    bit-identical initial parameters.
    """
    hyper.validate(spec.input_repr)
    if spec.input_repr == "embedding" and embedding is None:
        raise ConfigError(f"{spec.name} uses k-mer embedding input; an embedding "
                          "table is required")
    model = Model(spec, hyper, fixed_length, embedding)
    rng = np.random.default_rng(seed)

    conv_init = _initializer(rng, hyper.weight_init, hyper.init_scale_motifs)
    model.conv_layout = resolve_conv_layout(spec, hyper)
    in_ch = model.input_channels
    for i, (filters, window, _) in enumerate(model.conv_layout):
        w = Parameter(f"conv{i}.w", conv_init((filters, window, in_ch),
                                               window * in_ch, window * filters))
        b = Parameter(f"conv{i}.b", np.zeros(filters))
        model.conv_params.append((w, b))
        in_ch = filters

    if model.has_recurrent:
        rnn_init = _initializer(rng, hyper.weight_init, hyper.init_scale_rnn)
        hidden = spec.rnn_hidden if spec.rnn_hidden is not None else hyper.rnn_hidden
        cell_cls = layers.LSTMCell if "lstm" in spec.recurrent else layers.GRUCell
        model.cells.append(cell_cls("rnn.fwd", in_ch, hidden, rnn_init))
        if spec.recurrent.startswith("bi"):
            model.cells.append(cell_cls("rnn.bwd", in_ch, hidden, rnn_init))
        for cell in model.cells:
            # open the memory path at initialization: otherwise the state
            # halves each position and signal from mid-sequence can never
            # reach the final hidden state that feeds the classifier
            if isinstance(cell, layers.LSTMCell):
                cell.b_forget.value[...] = 1.0
            else:
                cell.b_update.value[...] = -1.0

    # dry-run the feature stage to size the dense head and catch wiring bugs
    if spec.input_repr == "onehot":
        probe = np.zeros((1, 4, fixed_length))
    else:
        n_tokens = (fixed_length - KMER_K) // KMER_STRIDE + 1
        probe = np.zeros((1, n_tokens), dtype=np.int64)
    feat_dim = model._features(model._input_tensor(probe)).value.shape[1]

    dense_init = _initializer(rng, hyper.weight_init, hyper.init_scale_dense)
    head = hyper.head_hidden if spec.head == "auto" else spec.head
    if head is not None:
        model.head_params = (Parameter("head.w", dense_init((feat_dim, head), feat_dim, head)),
                             Parameter("head.b", np.zeros(head)))
        feat_dim = head
    model.out_params = (Parameter("out.w", dense_init((feat_dim, 1), feat_dim, 1)),
                        Parameter("out.b", np.zeros(1)))
    return model
