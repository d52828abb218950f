"""Planted-motif synthetic datasets.

Positives are uniform-random backgrounds with one (possibly mutated) motif
instance planted; negatives are dinucleotide-preserving shuffles of the
positives, mirroring how real negatives are produced from assay peaks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import BASES, Dataset, RawSequence, dinuc_shuffle
from .errors import ConfigError

_OTHERS = {b: BASES.replace(b, "") for b in BASES}


@dataclass
class PlantSpec:
    motif: str
    mutation_prob: float = 0.0
    length: int = 101
    n_pos: int = 1000
    n_neg: int = 1000
    placement: str = "center"  # or "uniform"

    def validate(self):
        if not self.motif or set(self.motif) - set(BASES):
            raise ConfigError(f"motif must be non-empty over ACGT, got {self.motif!r}")
        if len(self.motif) >= self.length:
            raise ConfigError("motif must be shorter than the sequence length")
        if not 0.0 <= self.mutation_prob <= 1.0:
            raise ConfigError("mutation probability must lie in [0, 1]")
        if self.placement not in ("center", "uniform"):
            raise ConfigError(f"placement must be center or uniform, got {self.placement!r}")


def _random_background(rng, length):
    return "".join(BASES[i] for i in rng.integers(4, size=length))


def _mutate(motif, prob, rng):
    if prob == 0.0:
        return motif
    out = []
    for ch in motif:
        if rng.random() < prob:
            out.append(_OTHERS[ch][rng.integers(3)])
        else:
            out.append(ch)
    return "".join(out)


def _plant(background, insert, start):
    return background[:start] + insert + background[start + len(insert):]


def generate(spec, seed):
    """Planted-motif dataset; negatives are shuffles of the positives."""
    spec.validate()
    rng = np.random.default_rng(seed)
    positives = []
    for i in range(spec.n_pos):
        bg = _random_background(rng, spec.length)
        site = _mutate(spec.motif, spec.mutation_prob, rng)
        if spec.placement == "center":
            start = (spec.length - len(site)) // 2
        else:
            start = int(rng.integers(spec.length - len(site) + 1))
        positives.append(RawSequence(f"pos{i}", _plant(bg, site, start), 1))
    negatives = []
    for i in range(spec.n_neg):
        source = positives[i % len(positives)]
        shuffled = dinuc_shuffle(source, rng)
        negatives.append(RawSequence(f"neg{i}", shuffled.bases, 0))
    return Dataset(positives + negatives, fixed_length=spec.length)


def two_motif_spaced(spec_a, spec_b, gap_range, seed):
    """Positives carry motif A then motif B at a gap drawn from gap_range;
    negatives carry both motifs at independent non-overlapping positions.

    Lengths, counts, and mutation probabilities come from spec_a; spec_b
    contributes the second motif and its mutation probability.
    """
    spec_a.validate()
    spec_b.validate()
    gap_lo, gap_hi = gap_range
    len_a, len_b = len(spec_a.motif), len(spec_b.motif)
    if len_a + gap_hi + len_b >= spec_a.length:
        raise ConfigError("combined motif span exceeds the sequence length")
    rng = np.random.default_rng(seed)
    sequences = []
    for i in range(spec_a.n_pos):
        bg = _random_background(rng, spec_a.length)
        gap = int(rng.integers(gap_lo, gap_hi + 1))
        start_a = int(rng.integers(spec_a.length - (len_a + gap + len_b) + 1))
        seq = _plant(bg, _mutate(spec_a.motif, spec_a.mutation_prob, rng), start_a)
        seq = _plant(seq, _mutate(spec_b.motif, spec_b.mutation_prob, rng),
                     start_a + len_a + gap)
        sequences.append(RawSequence(f"pos{i}", seq, 1))
    for i in range(spec_a.n_neg):
        bg = _random_background(rng, spec_a.length)
        while True:
            start_a = int(rng.integers(spec_a.length - len_a + 1))
            start_b = int(rng.integers(spec_a.length - len_b + 1))
            if start_a + len_a <= start_b or start_b + len_b <= start_a:
                break
        seq = _plant(bg, _mutate(spec_a.motif, spec_a.mutation_prob, rng), start_a)
        seq = _plant(seq, _mutate(spec_b.motif, spec_b.mutation_prob, rng), start_b)
        sequences.append(RawSequence(f"neg{i}", seq, 0))
    return Dataset(sequences, fixed_length=spec_a.length)
