"""Command-line front-end.

Commands: select (calibrated search + final fit), train (fixed setting),
predict, motifs, compare, shuffle, embed, bench. Every command exits
nonzero on error with a single diagnostic line on stderr. Partial outputs
are written to temporary names and renamed into place on success.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import arch as arch_mod
from . import data as data_mod
from . import evaluate, model_io, motif, selection, synth, training
from .errors import ConfigError, SeqBindError


def _write_text(path, text):
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _ensure_out_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def _add_train_data_args(p):
    p.add_argument("--data-format", choices=["fasta-pair", "tsv"], required=True)
    p.add_argument("--pos", help="positives FASTA (fasta-pair format)")
    p.add_argument("--neg", help="negatives FASTA (fasta-pair format)")
    p.add_argument("--data", help="TSV of SEQ<TAB>LABEL lines (tsv format)")


def _load_labeled(args, fixed_length=None):
    if args.data_format == "fasta-pair":
        if not args.pos or not args.neg:
            raise ConfigError("fasta-pair format needs --pos and --neg")
        paths, fmt = (args.pos, args.neg), "fasta-pair"
    else:
        if not args.data:
            raise ConfigError("tsv format needs --data")
        paths, fmt = (args.data,), "tsv"
    dataset = data_mod.parse_input(paths, fmt)
    if fixed_length is not None and dataset.fixed_length != fixed_length:
        dataset = data_mod.Dataset(dataset.sequences, fixed_length=fixed_length)
    return dataset


def _add_arch_args(p):
    p.add_argument("--arch", help=f"preset name: {', '.join(arch_mod.PRESETS)}")
    p.add_argument("--spec-file", help="architecture spec file (key=value lines)")
    p.add_argument("--input-repr", choices=["onehot", "embedding"],
                   help="must agree with the chosen architecture")


def _resolve_spec(args):
    if bool(args.arch) == bool(args.spec_file):
        raise ConfigError("give exactly one of --arch or --spec-file")
    if args.arch:
        spec = arch_mod.preset(args.arch)
    else:
        with open(args.spec_file) as fh:
            spec = arch_mod.parse_spec(fh.read())
    if args.input_repr and args.input_repr != spec.input_repr:
        raise ConfigError(f"{spec.name} requires {spec.input_repr} input, "
                          f"but --input-repr {args.input_repr} was given")
    return spec


def _hyper_columns():
    return ["motif_length", "n_filters", "rnn_hidden", "head_hidden", "optimizer",
            "learning_rate", "momentum", "weight_init", "init_scale_motifs",
            "init_scale_rnn", "init_scale_dense", "weight_decay", "dropout_keep"]


def _calibration_tsv(trials, n_folds):
    cols = ["trial"] + _hyper_columns() + [f"fold{f}_auc" for f in range(n_folds)] \
        + ["mean_auc", "selected_steps", "error"]
    lines = ["\t".join(cols)]
    for t in trials:
        hd = t.hyper.to_dict()
        row = [str(t.index)] + [hd[c] for c in _hyper_columns()]
        for f in range(n_folds):
            row.append(f"{t.fold_aucs[f]:.6f}" if f < len(t.fold_aucs) else "nan")
        row.append(f"{t.mean_auc:.6f}")
        row.append(str(t.selected_steps) if t.selected_steps is not None else "nan")
        row.append(t.error or "")
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"


def _metrics_tsv(logs):
    lines = ["step\ttrain_loss\tval_auc"]
    for _, rows in logs:
        for step, loss, val_auc in rows:
            lines.append(f"{step}\t{loss:.6f}\t{val_auc:.6f}")
    return "\n".join(lines) + "\n"


def cmd_select(args):
    spec = _resolve_spec(args)
    dataset = _load_labeled(args)
    out = _ensure_out_dir(args.out)
    progress = None
    if not args.quiet:
        def progress(t):
            print(f"trial {t.index}: mean_auc={t.mean_auc:.4f} "
                  f"steps={t.selected_steps} {t.error or ''}".rstrip(), file=sys.stderr)
    model, trials, restarts, logs = selection.select_model(
        dataset, spec, n_trials=args.trials, n_folds=args.folds, seed=args.seed,
        max_steps=args.max_steps, checkpoint_every=args.checkpoint_every,
        n_restarts=args.restarts, workers=args.workers, progress=progress)
    model_path = os.path.join(out, "model.txt")
    tmp = model_path + ".tmp"
    model_io.save_model(model, tmp)
    os.replace(tmp, model_path)
    _write_text(os.path.join(out, "calibration.tsv"), _calibration_tsv(trials, args.folds))
    _write_text(os.path.join(out, "metrics.tsv"), _metrics_tsv(logs))
    if not args.quiet:
        for r, auc in restarts:
            print(f"restart {r}: train_auc={'nan' if auc is None else f'{auc:.4f}'}",
                  file=sys.stderr)
        print(f"model written to {model_path}", file=sys.stderr)
    return 0


def _hyper_from_args(args, input_repr):
    hyper = arch_mod.default_hyper(input_repr)
    for name in ["n_filters", "rnn_hidden", "optimizer", "learning_rate", "momentum",
                 "weight_init", "init_scale_motifs", "init_scale_rnn",
                 "init_scale_dense", "weight_decay", "dropout_keep"]:
        flag = getattr(args, name)
        if flag is not None:
            setattr(hyper, name, flag)
    if args.head_hidden is not None:
        hyper.head_hidden = None if args.head_hidden == "none" else int(args.head_hidden)
    hyper.selected_steps = args.steps
    return hyper


def cmd_train(args):
    spec = _resolve_spec(args)
    dataset = _load_labeled(args)
    out = _ensure_out_dir(args.out)
    hyper = _hyper_from_args(args, spec.input_repr)
    hyper.validate(spec.input_repr)
    embedding = None
    if spec.input_repr == "embedding":
        embedding, _ = selection.train_dataset_embedding(dataset, args.seed)
    inputs_all = None
    rng = np.random.default_rng(selection.derive_seed(args.seed, selection.TAG_FOLDS))
    labels = dataset.labels()
    if args.val_fraction > 0:
        n_val = max(2, int(round(args.val_fraction * len(labels))))
        order = rng.permutation(len(labels))
        val_idx, train_idx = order[:n_val], order[n_val:]
    else:
        train_idx, val_idx = np.arange(len(labels)), None
    model = arch_mod.build_model(spec, hyper, dataset.fixed_length,
                                 selection.derive_seed(args.seed, selection.TAG_RESTART, 0, 0),
                                 embedding=embedding)
    inputs_all = model.encode_input(dataset)
    state = training.train_model(
        model, inputs_all[train_idx], labels[train_idx], hyper,
        selection.derive_seed(args.seed, selection.TAG_RESTART, 0, 1),
        val_inputs=None if val_idx is None else inputs_all[val_idx],
        val_labels=None if val_idx is None else labels[val_idx],
        max_steps=args.steps, checkpoint_every=min(args.checkpoint_every, args.steps))
    model_path = os.path.join(out, "model.txt")
    tmp = model_path + ".tmp"
    model_io.save_model(model, tmp)
    os.replace(tmp, model_path)
    _write_text(os.path.join(out, "metrics.tsv"), _metrics_tsv([(0, state.log)]))
    if not args.quiet:
        print(f"model written to {model_path}", file=sys.stderr)
    return 0


def _load_predict_sequences(args, fixed_length):
    if args.data_format == "fasta":
        seqs = data_mod.read_fasta(args.data)
    else:
        seqs = data_mod.read_tsv(args.data)
    return data_mod.Dataset(seqs, fixed_length=fixed_length, require_both_classes=False)


def cmd_predict(args):
    model = model_io.load_model(args.model)
    dataset = _load_predict_sequences(args, model.fixed_length)
    probs = model.predict(model.encode_input(dataset))
    lines = ["id\tprobability"]
    for s, p in zip(dataset.sequences, probs):
        lines.append(f"{s.id}\t{p:.6f}")
    _write_text(args.out, "\n".join(lines) + "\n")
    return 0


def cmd_motifs(args):
    model = model_io.load_model(args.model)
    dataset = _load_labeled(args, fixed_length=model.fixed_length)
    out = _ensure_out_dir(args.out)
    fragments = motif.extract_fragments(model, dataset)
    pfms = []
    empty = 0
    for ff in fragments:
        if ff.fragments:
            try:
                pfms.append(motif.build_pfm(ff.fragments, ff.filter_index))
                continue
            except SeqBindError:
                pass
        empty += 1
    if not pfms:
        raise SeqBindError("no filter produced any usable fragments")
    _write_text(os.path.join(out, "motifs.meme"), motif.format_meme(pfms))
    profile = motif.activation_histogram(model, dataset)
    hist = ["position\tpos_count\tneg_count"]
    for position, pc, nc in zip(profile.positions, profile.positive, profile.negative):
        hist.append(f"{position}\t{pc}\t{nc}")
    _write_text(os.path.join(out, "histogram.tsv"), "\n".join(hist) + "\n")
    _write_text(os.path.join(out, "logos.txt"),
                "\n".join(motif.text_logo(p) for p in pfms))
    if not args.quiet:
        print(f"{len(pfms)} motifs written, {empty} empty filters omitted", file=sys.stderr)
    return 0


def _read_auc_table(path):
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines:
        raise SeqBindError(f"{path}: empty AUC table")
    header = lines[0].split("\t")
    if len(header) < 3 or header[0] != "dataset":
        raise SeqBindError(f"{path}:1: header must be 'dataset<TAB>model...<TAB>model'")
    names = header[1:]
    rows = []
    datasets = []
    for i, line in enumerate(lines[1:], 2):
        parts = line.split("\t")
        if len(parts) != len(header):
            raise SeqBindError(f"{path}:{i}: expected {len(header)} columns, got {len(parts)}")
        datasets.append(parts[0])
        try:
            rows.append([float(v) for v in parts[1:]])
        except ValueError as exc:
            raise SeqBindError(f"{path}:{i}: {exc}") from None
    return datasets, names, np.array(rows)


def cmd_compare(args):
    datasets, names, table = _read_auc_table(args.auc_table)
    result = evaluate.compare_models(table, names)
    out = _ensure_out_dir(args.out)

    def matrix_tsv(m, fmt):
        lines = ["model\t" + "\t".join(names)]
        for i, name in enumerate(names):
            cells = [name]
            for j in range(len(names)):
                cells.append("" if i == j else fmt(m[i, j]))
            lines.append("\t".join(cells))
        return "\n".join(lines) + "\n"

    _write_text(os.path.join(out, "pvalues.tsv"), matrix_tsv(result.p_values, "{:.6g}".format))
    _write_text(os.path.join(out, "differences.tsv"),
                matrix_tsv(result.mean_diff, "{:+.6f}".format))
    if result.identical_pairs and not args.quiet:
        for a, b in result.identical_pairs:
            print(f"note: columns {a} and {b} are identical (p set to 1)", file=sys.stderr)
    return 0


def cmd_shuffle(args):
    seqs = data_mod.read_fasta(args.data)
    rng = np.random.default_rng(args.seed)
    shuffled = [data_mod.dinuc_shuffle(s, rng) for s in seqs]
    tmp = args.out + ".tmp"
    data_mod.write_fasta(tmp, shuffled)
    os.replace(tmp, args.out)
    return 0


def cmd_embed(args):
    dataset = _load_labeled(args)
    table, losses = selection.train_dataset_embedding(dataset, args.seed)
    lines = [f"format=seqbind-embedding-1", f"k={arch_mod.KMER_K}",
             f"stride={arch_mod.KMER_STRIDE}", f"dim={table.shape[1]}",
             model_io._array_line("embed.table", table)]
    _write_text(args.out, "\n".join(lines) + "\n")
    if not args.quiet:
        print(f"mean loss by epoch: {' '.join(f'{v:.4f}' for v in losses)}", file=sys.stderr)
    return 0


def cmd_bench(args):
    out = _ensure_out_dir(args.out)
    spec_a = synth.PlantSpec(args.motif, args.mutation, args.length,
                             args.n_pos, args.n_neg, args.placement)

    def make(n_pos, n_neg, seed):
        s = synth.PlantSpec(args.motif, args.mutation, args.length, n_pos, n_neg,
                            args.placement)
        if args.motif_b:
            s2 = synth.PlantSpec(args.motif_b, args.mutation, args.length, n_pos, n_neg)
            return synth.two_motif_spaced(s, s2, (args.gap_min, args.gap_max), seed)
        return synth.generate(s, seed)

    spec_a.validate()
    train_set = make(args.n_pos, args.n_neg, np.random.SeedSequence((args.seed, 0)))
    name = "train" if args.n_test_pos else ""
    _write_split(out, train_set, args.data_format, prefix=name)
    if args.n_test_pos:
        test_set = make(args.n_test_pos, args.n_test_neg, np.random.SeedSequence((args.seed, 1)))
        _write_split(out, test_set, args.data_format, prefix="test")
    return 0


def _write_split(out, dataset, fmt, prefix=""):
    tag = f"{prefix}_" if prefix else ""
    if fmt == "tsv":
        data_mod.write_tsv(os.path.join(out, f"{tag}data.tsv"), dataset.sequences)
    else:
        data_mod.write_fasta(os.path.join(out, f"{tag}pos.fa"),
                             [s for s in dataset.sequences if s.label == 1])
        data_mod.write_fasta(os.path.join(out, f"{tag}neg.fa"),
                             [s for s in dataset.sequences if s.label == 0])


def build_parser():
    parser = argparse.ArgumentParser(
        prog="seqbind",
        description="Deep architectures for DNA/RNA protein-binding prediction")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("select", help="hyperparameter search + final training")
    _add_train_data_args(p)
    _add_arch_args(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--trials", type=int, default=40)
    p.add_argument("--folds", type=int, default=3)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--max-steps", type=int, default=training.MAX_STEPS_DEFAULT)
    p.add_argument("--checkpoint-every", type=int, default=training.CHECKPOINT_EVERY_DEFAULT)
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", required=True)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("train", help="train once with a fixed setting")
    _add_train_data_args(p)
    _add_arch_args(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--checkpoint-every", type=int, default=training.CHECKPOINT_EVERY_DEFAULT)
    p.add_argument("--val-fraction", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.add_argument("--quiet", action="store_true")
    p.add_argument("--n-filters", type=int)
    p.add_argument("--rnn-hidden", type=int)
    p.add_argument("--head-hidden")
    p.add_argument("--optimizer", choices=["sgd", "adagrad"])
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--momentum", type=float)
    p.add_argument("--weight-init", choices=["xavier", "normal"])
    p.add_argument("--init-scale-motifs", type=float)
    p.add_argument("--init-scale-rnn", type=float)
    p.add_argument("--init-scale-dense", type=float)
    p.add_argument("--weight-decay", type=float)
    p.add_argument("--dropout-keep", type=float)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score sequences with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--data-format", choices=["fasta", "tsv"], default="fasta")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("motifs", help="extract motifs from the first conv layer")
    p.add_argument("--model", required=True)
    _add_train_data_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_motifs)

    p = sub.add_parser("compare", help="pairwise signed-rank comparison of models")
    p.add_argument("--auc-table", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("shuffle", help="dinucleotide-preserving FASTA shuffle")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_shuffle)

    p = sub.add_parser("embed", help="train the k-mer embedding only")
    _add_train_data_args(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("bench", help="generate planted-motif benchmark data")
    p.add_argument("--out", required=True)
    p.add_argument("--motif", default="TGACTCA")
    p.add_argument("--motif-b", help="second motif: emit the two-motif spaced benchmark")
    p.add_argument("--gap-min", type=int, default=5)
    p.add_argument("--gap-max", type=int, default=20)
    p.add_argument("--mutation", type=float, default=0.1)
    p.add_argument("--length", type=int, default=101)
    p.add_argument("--n-pos", type=int, default=1000)
    p.add_argument("--n-neg", type=int, default=1000)
    p.add_argument("--n-test-pos", type=int, default=0)
    p.add_argument("--n-test-neg", type=int, default=0)
    p.add_argument("--placement", choices=["center", "uniform"], default="center")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--data-format", choices=["fasta-pair", "tsv"], default="fasta-pair")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SeqBindError as exc:
        print(f"seqbind: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
