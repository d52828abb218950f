"""Per-dataset k-mer embeddings trained with skip-gram negative sampling.

The vocabulary enumerates all 4^k k-mers lexicographically plus a trailing
UNK token for windows containing N. Training is deterministic given the
seed: window widths and negative-sampling uniforms are pre-drawn with a
numpy generator and consumed sequentially by the kernel, so both backends
walk the identical update sequence. The learned table is frozen during
supervised training unless a model is explicitly built to fine-tune it.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .data import BASES
from .errors import ConfigError, DataError

NEG_EXPONENT = 0.75
DEFAULT_WINDOW = 5
DEFAULT_NEGATIVES = 5
DEFAULT_EPOCHS = 10
DEFAULT_ALPHA = 0.025
DEFAULT_MIN_ALPHA = 1e-4


class Vocab:
    """Bijection between the 4^k canonical k-mers and 0..4^k-1; UNK is last."""

    def __init__(self, k):
        if not 1 <= k <= 8:
            raise ConfigError(f"k must lie in [1, 8], got {k}")
        self.k = k
        self.unk_index = 4 ** k
        self.size = 4 ** k + 1

    def index(self, kmer):
        if len(kmer) != self.k:
            raise ConfigError(f"expected a {self.k}-mer, got {kmer!r}")
        idx = 0
        for ch in kmer:
            code = BASES.find(ch)
            if code < 0:
                return self.unk_index
            idx = idx * 4 + code
        return idx

    def kmer(self, index):
        if index == self.unk_index:
            return "UNK"
        out = []
        for _ in range(self.k):
            out.append(BASES[index % 4])
            index //= 4
        return "".join(reversed(out))

    def kmers(self):
        return [self.kmer(i) for i in range(self.size - 1)]


def build_vocab(k):
    return Vocab(k)


def _pair_counts(lengths_per_position, positions_in_sentence, draws):
    lo = np.maximum(0, positions_in_sentence - draws)
    hi = np.minimum(lengths_per_position - 1, positions_in_sentence + draws)
    return hi - lo  # window size minus the center itself


def train_word2vec(corpus, vocab_size, dim=50, window=DEFAULT_WINDOW,
                   negatives=DEFAULT_NEGATIVES, epochs=DEFAULT_EPOCHS,
                   seed=0, alpha=DEFAULT_ALPHA, min_alpha=DEFAULT_MIN_ALPHA):
    """Skip-gram-with-negative-sampling table over token sequences.

    Returns (vectors (vocab_size, dim), per-epoch mean pair loss). The
    learning rate decays linearly across epochs from alpha to min_alpha;
    negatives are drawn from the unigram^0.75 distribution.
    """
    corpus = [np.asarray(s, dtype=np.int64) for s in corpus]
    if not corpus or sum(len(s) for s in corpus) == 0:
        raise DataError("word2vec corpus is empty")
    flat = np.concatenate(corpus)
    if flat.max() >= vocab_size:
        raise DataError("token index exceeds vocabulary size")
    offsets = np.zeros(len(corpus) + 1, dtype=np.int64)
    np.cumsum([len(s) for s in corpus], out=offsets[1:])

    counts = np.bincount(flat, minlength=vocab_size).astype(np.float64)
    weights = counts ** NEG_EXPONENT
    cum_table = np.cumsum(weights / weights.sum())
    cum_table[-1] = 1.0

    rng = np.random.default_rng(seed)
    vec_in = (rng.random((vocab_size, dim)) - 0.5) / dim
    vec_out = np.zeros((vocab_size, dim))

    lengths = np.concatenate([np.full(len(s), len(s), dtype=np.int64) for s in corpus])
    positions = np.concatenate([np.arange(len(s), dtype=np.int64) for s in corpus])

    kern = kernels.get()
    epoch_losses = []
    for epoch in range(epochs):
        draws = rng.integers(1, window + 1, size=len(flat), dtype=np.int64)
        n_pairs = int(_pair_counts(lengths, positions, draws).sum())
        uniforms = rng.random(n_pairs * negatives)
        step = alpha + (min_alpha - alpha) * (epoch / max(epochs - 1, 1))
        loss, pairs = kern.sgns_epoch(vec_in, vec_out, flat, offsets, draws,
                                      uniforms, cum_table, negatives, step)
        epoch_losses.append(loss / max(pairs, 1))
    return vec_in, epoch_losses


def embed_sequence(tokens, table):
    """Map token indices to their vectors; columns follow token order (d x T)."""
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.size and (tokens.min() < 0 or tokens.max() >= table.shape[0]):
        raise DataError("token index outside the embedding table")
    return table[tokens].T
