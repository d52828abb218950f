"""Motif extraction from the first convolutional layer.

Sequences are fed through the first convolution module only; for each
filter, every placement whose activation exceeds half of that filter's
global maximum contributes the input fragment under its receptive field.
Placements whose receptive field would overlap the zero padding are
discarded (padding has no nucleotide identity). For k-mer-embedded inputs
a placement at token t covers nucleotides [t*stride, t*stride + k +
(window-1)*dilation*stride).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from . import kernels
from .arch import KMER_K, KMER_STRIDE
from .data import BASES
from .errors import DataError, SeqBindError

MEME_HEADER = (
    "MEME version 4\n\n"
    "ALPHABET= ACGT\n\n"
    "strands: + -\n\n"
    "Background letter frequencies\n"
    "A 0.25 C 0.25 G 0.25 T 0.25\n"
)


@dataclass
class PFM:
    """Position frequency matrix for one filter (rows A,C,G,T)."""
    counts: np.ndarray
    nsites: int
    filter_index: int

    @property
    def width(self):
        return self.counts.shape[1]

    def probabilities(self):
        return self.counts / self.nsites

    def consensus(self):
        return "".join(BASES[i] for i in self.counts.argmax(axis=0))

    def column_bits(self):
        """Information content per column: 2 + sum p*log2(p)."""
        p = self.probabilities()
        with np.errstate(divide="ignore", invalid="ignore"):
            plogp = np.where(p > 0, p * np.log2(p), 0.0)
        return 2.0 + plogp.sum(axis=0)

    def information_content(self):
        return float(self.column_bits().sum())


@dataclass
class FilterFragments:
    filter_index: int
    max_activation: float
    threshold: float
    fragments: list  # (sequence index, nucleotide start, fragment string)


@dataclass
class ActivationProfile:
    """Kept-placement counts per receptive-field center position, by label."""
    positions: np.ndarray
    positive: np.ndarray
    negative: np.ndarray


class _Scan:
    """First-layer activations restricted to padding-free placements."""

    def __init__(self, model, dataset):
        if not model.conv_params:
            raise SeqBindError(f"model '{model.arch.name}' has no convolutional layer; "
                               "motifs are extracted from the first convolution only")
        filters, window, dilation = model.conv_layout[0]
        w, b = model.conv_params[0]
        stride = KMER_STRIDE if model.arch.input_repr == "embedding" else 1
        reach = (window - 1) * dilation
        self.span = (KMER_K if model.arch.input_repr == "embedding" else 1) + reach * stride
        inputs = model.encode_input(dataset)
        kern = kernels.get()
        chunks = []
        for i in range(0, len(inputs), 256):
            batch = inputs[i:i + 256]
            if model.arch.input_repr == "embedding":
                x = np.ascontiguousarray(np.moveaxis(model.embedding[batch], 1, 2))
            else:
                x = batch
            if x.shape[2] <= reach:
                raise DataError("sequences are shorter than the filter's receptive field")
            # unpadded correlation: its outputs are exactly the placements
            # whose receptive field stays inside the sequence
            pre, _ = kern.conv1d_forward(np.ascontiguousarray(x), w.value, dilation)
            chunks.append(np.maximum(pre + b.value[None, :, None], 0.0))
        self.acts = np.concatenate(chunks)
        self.nuc_starts = np.arange(self.acts.shape[2]) * stride
        self.n_filters = filters


def extract_fragments(model, dataset):
    """Per-filter fragments above the half-max activation threshold.

    A filter that never activates (max <= 0) yields an empty, flagged list.
    """
    scan = _Scan(model, dataset)
    out = []
    for k in range(scan.n_filters):
        acts = scan.acts[:, k, :]
        peak = float(acts.max())
        if peak <= 0.0:
            out.append(FilterFragments(k, peak, 0.0, []))
            continue
        threshold = peak / 2.0
        frags = []
        for si, pi in np.argwhere(acts > threshold):
            start = int(scan.nuc_starts[pi])
            frags.append((int(si), start,
                          dataset.sequences[si].bases[start:start + scan.span]))
        out.append(FilterFragments(k, peak, threshold, frags))
    return out


def build_pfm(fragments, filter_index=0):
    """Stack equal-length fragments and count letters per column.

    Fragments containing N carry no full nucleotide identity and are
    excluded, so every column sums to nsites.
    """
    if not fragments:
        raise DataError("cannot build a PFM from an empty fragment list")
    strings = [f[2] if isinstance(f, tuple) else f for f in fragments]
    width = len(strings[0])
    if any(len(s) != width for s in strings):
        raise DataError("fragments must share one length")
    used = [s for s in strings if "N" not in s]
    if not used:
        raise DataError("all fragments contain N; no countable sites")
    counts = np.zeros((4, width), dtype=np.int64)
    for s in used:
        for j, ch in enumerate(s):
            counts[BASES.index(ch), j] += 1
    return PFM(counts, len(used), filter_index)


def activation_histogram(model, dataset):
    """Counts of kept placements per receptive-field center, split by label."""
    scan = _Scan(model, dataset)
    kept = np.zeros(scan.acts.shape[::2], dtype=np.int64)  # (n_seq, n_valid)
    for k in range(scan.n_filters):
        acts = scan.acts[:, k, :]
        peak = acts.max()
        if peak > 0:
            kept += acts > peak / 2.0
    labels = dataset.labels()
    centers = scan.nuc_starts + scan.span // 2
    return ActivationProfile(centers,
                             kept[labels == 1].sum(axis=0),
                             kept[labels == 0].sum(axis=0))


# ---------------------------------------------------------------------------
# MEME minimal interchange format
# ---------------------------------------------------------------------------

def _prob_row(probs):
    # fixed-point micro-units with the residual folded into the largest
    # entry, so each printed row sums to exactly 1.000000
    micro = [int(math.floor(p * 1e6 + 0.5)) for p in probs]
    micro[int(np.argmax(probs))] += 1_000_000 - sum(micro)
    return " ".join(f"{m / 1e6:.6f}" for m in micro)


def format_meme(pfms):
    blocks = [MEME_HEADER]
    for pfm in pfms:
        probs = pfm.probabilities()
        rows = "\n".join(_prob_row(probs[:, j]) for j in range(pfm.width))
        blocks.append(
            f"\nMOTIF filter_{pfm.filter_index}\n"
            f"letter-probability matrix: alength= 4 w= {pfm.width} "
            f"nsites= {pfm.nsites} E= 0\n{rows}\n")
    return "".join(blocks)


def export_meme(pfms, path):
    if not pfms:
        raise DataError("no position frequency matrices to export")
    with open(path, "w") as fh:
        fh.write(format_meme(pfms))


_MOTIF_RE = re.compile(r"^MOTIF\s+(\S+)")
_MATRIX_RE = re.compile(r"letter-probability matrix:.*\bw=\s*(\d+)\s+nsites=\s*(\d+)")


def parse_meme(path):
    """Read back a minimal MEME file: [(name, probs (w,4), nsites)]."""
    motifs = []
    with open(path) as fh:
        lines = fh.read().splitlines()
    i = 0
    while i < len(lines):
        m = _MOTIF_RE.match(lines[i])
        if not m:
            i += 1
            continue
        name = m.group(1)
        i += 1
        header = _MATRIX_RE.search(lines[i])
        if not header:
            raise DataError(f"motif {name}: missing letter-probability matrix header")
        width, nsites = int(header.group(1)), int(header.group(2))
        rows = []
        for j in range(width):
            rows.append([float(v) for v in lines[i + 1 + j].split()])
        motifs.append((name, np.array(rows), nsites))
        i += 1 + width
    if not motifs:
        raise DataError(f"{path}: no MOTIF blocks found")
    return motifs


def text_logo(pfm):
    """Plain-text surrogate for a sequence logo: consensus letter and
    information content (bits) per column, with a proportional bar."""
    bits = pfm.column_bits()
    consensus = pfm.consensus()
    lines = [f"filter_{pfm.filter_index} consensus={consensus} "
             f"total_bits={pfm.information_content():.3f}"]
    for j in range(pfm.width):
        bar = "#" * int(round(bits[j] / 2.0 * 20))
        lines.append(f"{j:3d} {consensus[j]} {bits[j]:.3f} {bar}")
    return "\n".join(lines) + "\n"
