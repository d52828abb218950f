"""Sequence ingestion, encoding, labeling, shuffling, folding, batching.

DNA and RNA share one alphabet: U is rewritten to T at parse time, and
case is normalized. Ambiguous N bases encode as an all-zero one-hot column
and map k-mers that contain them to the UNK token. Note that no
reverse-complement augmentation is applied anywhere; models see the given
strand only.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DataError

BASES = "ACGT"
_CODE = np.full(256, -1, dtype=np.int8)
for _i, _b in enumerate(BASES):
    _CODE[ord(_b)] = _i
_ALLOWED = set("ACGTUNacgtun")


@dataclass
class RawSequence:
    id: str
    bases: str
    label: int | None = None


def normalize_bases(raw, where=""):
    bad = set(raw) - _ALLOWED
    if bad:
        raise DataError(f"invalid character {sorted(bad)[0]!r} in sequence {where}")
    return raw.upper().replace("U", "T")


def _read_fasta(path):
    records = []
    name = None
    chunks = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith(">"):
                if name is not None:
                    records.append((name, "".join(chunks)))
                name = line[1:].split()[0] or f"seq{len(records)}"
                chunks = []
            elif name is None:
                raise DataError(f"{path}: sequence data before any '>' header")
            else:
                chunks.append(line)
    if name is not None:
        records.append((name, "".join(chunks)))
    if not records:
        raise DataError(f"{path}: no FASTA records found")
    for name, seq in records:
        if not seq:
            raise DataError(f"{path}: record {name} is empty")
    return records


def read_fasta(path, label=None):
    """FASTA records as normalized RawSequence objects with a shared label."""
    return [RawSequence(name, normalize_bases(seq, name), label)
            for name, seq in _read_fasta(path)]


def read_tsv(path):
    """Lines of 'SEQUENCE<TAB>LABEL' with labels in {0,1}."""
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected 'SEQ<TAB>LABEL'")
            seq, label = parts
            if label not in ("0", "1"):
                raise DataError(f"{path}:{lineno}: label must be 0 or 1, got {label!r}")
            out.append(RawSequence(f"seq{lineno}", normalize_bases(seq, f"{path}:{lineno}"),
                                   int(label)))
    if not out:
        raise DataError(f"{path}: no sequences found")
    return out


def write_fasta(path, sequences):
    with open(path, "w") as fh:
        for s in sequences:
            fh.write(f">{s.id}\n{s.bases}\n")


def write_tsv(path, sequences):
    with open(path, "w") as fh:
        for s in sequences:
            fh.write(f"{s.bases}\t{s.label}\n")


def harmonize_length(bases, target):
    """Right-pad with N, or trim symmetrically keeping the center."""
    if len(bases) < target:
        return bases + "N" * (target - len(bases))
    if len(bases) > target:
        left = (len(bases) - target) // 2
        return bases[left:left + target]
    return bases


class Dataset:
    """Fixed-length labeled sequences. All members share fixed_length."""

    def __init__(self, sequences, fixed_length=None, require_both_classes=True):
        if not sequences:
            raise DataError("dataset is empty")
        if fixed_length is None:
            counts = Counter(len(s.bases) for s in sequences)
            top = max(counts.values())
            fixed_length = min(length for length, c in counts.items() if c == top)
        self.fixed_length = fixed_length
        self.sequences = [
            RawSequence(s.id, harmonize_length(s.bases, fixed_length), s.label)
            for s in sequences
        ]
        if require_both_classes:
            labels = {s.label for s in self.sequences}
            if not {0, 1} <= labels:
                raise DataError("dataset needs at least one positive and one negative example")

    def __len__(self):
        return len(self.sequences)

    def labels(self):
        return np.array([s.label for s in self.sequences], dtype=np.float64)

    def positive_count(self):
        return int(sum(1 for s in self.sequences if s.label == 1))

    def onehot_matrix(self):
        """(n, 4, fixed_length) float64 with channel order A,C,G,T."""
        out = np.zeros((len(self.sequences), 4, self.fixed_length))
        for i, s in enumerate(self.sequences):
            out[i] = encode_onehot(s.bases)
        return out

    def token_matrix(self, k, stride):
        """(n, T) int64 k-mer token indices, UNK for windows containing N."""
        return np.stack([tokenize_kmers(s.bases, k, stride) for s in self.sequences])


def parse_input(paths, fmt):
    """Load a labeled dataset.

    fmt="fasta-pair": paths = (positives_fasta, negatives_fasta).
    fmt="tsv": paths = (tsv_path,) with SEQ<TAB>LABEL lines.
    """
    if fmt == "fasta-pair":
        pos_path, neg_path = paths
        seqs = read_fasta(pos_path, label=1) + read_fasta(neg_path, label=0)
    elif fmt == "tsv":
        (tsv_path,) = paths
        seqs = read_tsv(tsv_path)
    else:
        raise DataError(f"unknown data format {fmt!r}")
    return Dataset(seqs)


def encode_onehot(bases):
    """4 x L indicator matrix (rows A,C,G,T); N gives an all-zero column."""
    codes = _CODE[np.frombuffer(bases.encode("ascii"), dtype=np.uint8)]
    out = np.zeros((4, len(bases)))
    known = np.flatnonzero(codes >= 0)
    out[codes[known], known] = 1.0
    return out


def tokenize_kmers(bases, k, stride):
    """Overlapping k-mer token indices with the given stride.

    Exactly floor((L-k)/stride)+1 tokens; any window containing N maps to
    the UNK index 4**k.
    """
    if k < 1 or stride < 1:
        raise DataError(f"k and stride must be >= 1, got k={k} stride={stride}")
    if k > 16:
        raise DataError(f"k={k} exceeds 16; token indices must fit an int64 vocabulary")
    if len(bases) < k:
        raise DataError(f"sequence length {len(bases)} is shorter than k={k}")
    codes = _CODE[np.frombuffer(bases.encode("ascii"), dtype=np.uint8)].astype(np.int64)
    windows = sliding_window_view(codes, k)[::stride]
    powers = 4 ** np.arange(k - 1, -1, -1, dtype=np.int64)
    tokens = windows @ powers
    tokens[(windows < 0).any(axis=1)] = 4 ** k
    return tokens


# ---------------------------------------------------------------------------
# Dinucleotide-preserving shuffle (Euler-path construction)
# ---------------------------------------------------------------------------

def _reaches_terminal(last_exit, terminal):
    status = {terminal: True}
    for v in last_exit:
        chain = []
        cur = v
        while cur not in status:
            status[cur] = None
            chain.append(cur)
            cur = last_exit[cur]
        ok = status[cur] is True
        for x in chain:
            status[x] = ok
        if not ok:
            return False
    return True


def _shuffled(items, rng):
    return [items[i] for i in rng.permutation(len(items))]


def dinuc_shuffle(seq, rng):
    """Uniform random sequence with the same dinucleotide counts and the
    same first/last characters; the result is labeled negative.

    Samples a random last-exit edge per vertex of the dinucleotide
    multigraph until those edges form an in-tree to the terminal character,
    shuffles the remaining edges, and walks the resulting Euler path.
    """
    s = seq.bases
    if len(s) < 2:
        raise DataError("dinucleotide shuffle needs length >= 2")
    out = _dinuc_shuffle_str(s, rng)
    return RawSequence(seq.id, out, 0)


def _dinuc_shuffle_str(s, rng):
    if len(set(s)) == 1:
        return s
    terminal = s[-1]
    edges = {}
    for a, b in zip(s, s[1:]):
        edges.setdefault(a, []).append(b)
    sources = sorted(v for v in edges if v != terminal)
    while True:
        last_exit = {v: edges[v][rng.integers(len(edges[v]))] for v in sources}
        if _reaches_terminal(last_exit, terminal):
            break
    order = {}
    for v in sorted(edges):
        pool = list(edges[v])
        if v != terminal:
            pool.remove(last_exit[v])
            order[v] = _shuffled(pool, rng) + [last_exit[v]]
        else:
            order[v] = _shuffled(pool, rng)
    cursor = dict.fromkeys(edges, 0)
    walk = [s[0]]
    cur = s[0]
    for _ in range(len(s) - 1):
        nxt = order[cur][cursor[cur]]
        cursor[cur] += 1
        walk.append(nxt)
        cur = nxt
    return "".join(walk)


def dinucleotide_counts(bases):
    counts = Counter(zip(bases, bases[1:]))
    return {a + b: c for (a, b), c in counts.items()}


# ---------------------------------------------------------------------------
# Folding and batching
# ---------------------------------------------------------------------------

def make_folds(dataset, n_folds, seed):
    """Label-stratified partition into (train_idx, val_idx) pairs.

    Folds are disjoint, cover every index, differ in size by at most one,
    and are reproducible from the seed.
    """
    labels = dataset.labels()
    if n_folds < 2:
        raise DataError(f"n_folds must be >= 2, got {n_folds}")
    rng = np.random.default_rng(seed)
    fold_sizes = np.zeros(n_folds, dtype=np.int64)
    assign = np.empty(len(labels), dtype=np.int64)
    for cls in (1, 0):
        idx = np.flatnonzero(labels == cls)
        if len(idx) < n_folds:
            raise DataError(f"class {cls} has {len(idx)} examples, fewer than {n_folds} folds")
        idx = idx[rng.permutation(len(idx))]
        base, extra = divmod(len(idx), n_folds)
        counts = np.full(n_folds, base, dtype=np.int64)
        counts[np.argsort(fold_sizes, kind="stable")[:extra]] += 1
        pos = 0
        for f in range(n_folds):
            assign[idx[pos:pos + counts[f]]] = f
            pos += counts[f]
        fold_sizes += counts
    folds = []
    for f in range(n_folds):
        val = np.flatnonzero(assign == f)
        train = np.flatnonzero(assign != f)
        folds.append((train, val))
    return folds


def batch_iter(n_items, batch_size, rng):
    """Endless stream of index batches: each epoch is a fresh seeded
    permutation cut into consecutive chunks (last chunk may be short)."""
    n = len(n_items) if hasattr(n_items, "__len__") else int(n_items)
    if batch_size < 1:
        raise DataError(f"batch_size must be >= 1, got {batch_size}")
    while True:
        perm = rng.permutation(n)
        for i in range(0, n, batch_size):
            yield perm[i:i + batch_size]
