"""Hyperparameter random search with cross-validated calibration and a
restart-based final fit.

Seed discipline: one master seed fans out to every randomized stage through
a counter-based derivation (`derive_seed`), so results are reproducible
regardless of worker-pool scheduling. The derivation maps a tag path to a
SeedSequence entropy tuple:

    (master, TAG, index, TAG, index, ...)

with fixed integer tags per stage (embedding=1, sampling=2, folds=3,
trial training=4, restarts=5) and a trailing 0/1 distinguishing parameter
initialization from the training stream.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .arch import (DROPOUT_CHOICES, HEAD_CHOICES, HyperConfig, INIT_KINDS,
                   KMER_K, KMER_STRIDE, LEARNING_RATE_RANGE, MOTIF_LENGTH_EMBEDDING,
                   MOTIF_LENGTH_ONEHOT, N_FILTER_CHOICES, OPTIMIZERS,
                   RNN_HIDDEN_CHOICES, SCALE_DENSE_RANGE, SCALE_MOTIF_RANGE,
                   SCALE_RNN_RANGE, WEIGHT_DECAY_RANGE, build_model)
from .data import make_folds
from .embedding import build_vocab, train_word2vec
from .errors import SeqBindError
from .evaluate import roc_auc
from .training import (CHECKPOINT_EVERY_DEFAULT, MAX_STEPS_DEFAULT, TrainingDiverged,
                       restore_params, train_model)

TAG_EMBED = 1
TAG_SAMPLE = 2
TAG_FOLDS = 3
TAG_TRIAL = 4
TAG_RESTART = 5


def derive_seed(master, *path):
    """Independent, reproducible child stream for a (tagged) counter path."""
    return np.random.SeedSequence(entropy=(int(master),) + tuple(int(p) for p in path))


def _log_uniform(rng, lo, hi):
    return math.exp(rng.uniform(math.log(lo), math.log(hi)))


def _choice(rng, options):
    return options[rng.integers(len(options))]


def sample_hyperparams(input_repr, rng):
    """One point of the search space. Draw order is fixed for determinism:
    filters, hidden size, head, optimizer, learning rate, momentum, init
    kind, three init scales, weight decay, dropout."""
    motif_length = MOTIF_LENGTH_ONEHOT if input_repr == "onehot" else MOTIF_LENGTH_EMBEDDING
    return HyperConfig(
        motif_length=motif_length,
        n_filters=_choice(rng, N_FILTER_CHOICES),
        rnn_hidden=_choice(rng, RNN_HIDDEN_CHOICES),
        head_hidden=_choice(rng, HEAD_CHOICES),
        optimizer=_choice(rng, OPTIMIZERS),
        learning_rate=_log_uniform(rng, *LEARNING_RATE_RANGE),
        momentum=0.95 + 0.04 * math.sqrt(rng.uniform()),
        weight_init=_choice(rng, INIT_KINDS),
        init_scale_motifs=_log_uniform(rng, *SCALE_MOTIF_RANGE),
        init_scale_rnn=_log_uniform(rng, *SCALE_RNN_RANGE),
        init_scale_dense=_log_uniform(rng, *SCALE_DENSE_RANGE),
        weight_decay=_log_uniform(rng, *WEIGHT_DECAY_RANGE),
        dropout_keep=_choice(rng, DROPOUT_CHOICES),
    )


@dataclass
class TrialResult:
    index: int
    hyper: HyperConfig
    fold_aucs: list
    fold_steps: list
    mean_auc: float
    selected_steps: int | None
    error: str | None = None


@dataclass
class SelectionContext:
    """Everything a fold/restart job needs; shipped once per worker."""
    spec: object
    inputs: np.ndarray
    labels: np.ndarray
    fixed_length: int
    embedding: np.ndarray | None
    master_seed: int
    max_steps: int
    checkpoint_every: int


_CTX = None


def _init_worker(ctx, in_pool=False):
    global _CTX
    _CTX = ctx
    if in_pool:
        try:
            # parallelism lives at the job level: one BLAS thread per worker
            from threadpoolctl import threadpool_limits
            threadpool_limits(1)
        except ImportError:
            pass


def _fold_job(args):
    trial_idx, fold_idx, hyper, train_idx, val_idx = args
    ctx = _CTX
    try:
        model = build_model(ctx.spec, hyper, ctx.fixed_length,
                            derive_seed(ctx.master_seed, TAG_TRIAL, trial_idx, fold_idx, 0),
                            embedding=ctx.embedding)
        state = train_model(
            model, ctx.inputs[train_idx], ctx.labels[train_idx], hyper,
            derive_seed(ctx.master_seed, TAG_TRIAL, trial_idx, fold_idx, 1),
            val_inputs=ctx.inputs[val_idx], val_labels=ctx.labels[val_idx],
            max_steps=ctx.max_steps, checkpoint_every=ctx.checkpoint_every)
        return trial_idx, fold_idx, state.best_auc, state.best_step, None
    except TrainingDiverged as exc:
        return trial_idx, fold_idx, None, None, str(exc)


def _restart_job(args):
    restart_idx, hyper = args
    ctx = _CTX
    try:
        model = build_model(ctx.spec, hyper, ctx.fixed_length,
                            derive_seed(ctx.master_seed, TAG_RESTART, restart_idx, 0),
                            embedding=ctx.embedding)
        state = train_model(
            model, ctx.inputs, ctx.labels, hyper,
            derive_seed(ctx.master_seed, TAG_RESTART, restart_idx, 1),
            max_steps=hyper.selected_steps,
            checkpoint_every=min(ctx.checkpoint_every, hyper.selected_steps))
        train_auc = roc_auc(model.predict(ctx.inputs), ctx.labels)
        snapshot = {p.name: p.value.copy() for p in model.parameters()}
        return restart_idx, train_auc, snapshot, state.log, None
    except TrainingDiverged as exc:
        return restart_idx, None, None, [], str(exc)


def _run_jobs(fn, jobs, ctx, workers):
    if workers <= 1 or len(jobs) <= 1:
        _init_worker(ctx)
        return [fn(job) for job in jobs]
    kernels.warmup()  # fork-inherited JIT code: compile once in the parent
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs)),
                             initializer=_init_worker, initargs=(ctx, True)) as pool:
        return list(pool.map(fn, jobs))


def _round_to_grid(value, grid, max_steps):
    steps = int(round(value / grid)) * grid
    return max(grid, min(steps, max_steps))


def calibrate(dataset, spec, n_trials=40, n_folds=3, seed=0, embedding=None,
              max_steps=MAX_STEPS_DEFAULT, checkpoint_every=CHECKPOINT_EVERY_DEFAULT,
              workers=1, progress=None):
    """Score n_trials sampled settings by mean cross-validated AUC.

    Each trial's step budget is re-selected per fold at the best checkpoint;
    the trial's selected_steps is the fold median snapped to the checkpoint
    grid. Diverged trials score 0. Returns (winning HyperConfig with
    selected_steps filled in, list of TrialResult). Ties go to the lower
    trial index.
    """
    hypers = [sample_hyperparams(spec.input_repr,
                                 np.random.default_rng(derive_seed(seed, TAG_SAMPLE, t)))
              for t in range(n_trials)]
    folds = make_folds(dataset, n_folds, derive_seed(seed, TAG_FOLDS))
    if spec.input_repr == "onehot":
        inputs = dataset.onehot_matrix()
    else:
        inputs = dataset.token_matrix(KMER_K, KMER_STRIDE)
    ctx = SelectionContext(spec, inputs, dataset.labels(), dataset.fixed_length,
                           embedding, int(seed), max_steps, checkpoint_every)
    jobs = [(t, f, hypers[t], train_idx, val_idx)
            for t in range(n_trials)
            for f, (train_idx, val_idx) in enumerate(folds)]
    outcomes = _run_jobs(_fold_job, jobs, ctx, workers)

    by_trial = {t: {} for t in range(n_trials)}
    for trial_idx, fold_idx, auc, best_step, err in outcomes:
        by_trial[trial_idx][fold_idx] = (auc, best_step, err)
    results = []
    for t in range(n_trials):
        fold_aucs, fold_steps, error = [], [], None
        for f in range(n_folds):
            auc, best_step, err = by_trial[t][f]
            if err is not None:
                error = err
                break
            fold_aucs.append(auc)
            fold_steps.append(best_step)
        if error is not None:
            results.append(TrialResult(t, hypers[t], [], [], 0.0, None, error))
        else:
            steps = _round_to_grid(float(np.median(fold_steps)), checkpoint_every, max_steps)
            results.append(TrialResult(t, hypers[t], fold_aucs, fold_steps,
                                       float(np.mean(fold_aucs)), steps))
        if progress is not None:
            progress(results[-1])
    if all(r.error is not None for r in results):
        raise SeqBindError("all calibration trials failed")
    best = max(results, key=lambda r: (r.mean_auc, -r.index))
    winner = HyperConfig(**{**best.hyper.__dict__, "selected_steps": best.selected_steps})
    return winner, results


def finalize(dataset, spec, best, n_restarts=5, seed=0, embedding=None,
             checkpoint_every=CHECKPOINT_EVERY_DEFAULT, workers=1):
    """Train n_restarts fresh models on the full data for exactly
    best.selected_steps; keep the one with the best training-set AUC
    (ties go to the earlier restart). Returns (model, restart rows, logs)."""
    if best.selected_steps is None:
        raise SeqBindError("finalize needs a calibrated step count")
    if spec.input_repr == "onehot":
        inputs = dataset.onehot_matrix()
    else:
        inputs = dataset.token_matrix(KMER_K, KMER_STRIDE)
    ctx = SelectionContext(spec, inputs, dataset.labels(), dataset.fixed_length,
                           embedding, int(seed), best.selected_steps, checkpoint_every)
    outcomes = _run_jobs(_restart_job, [(r, best) for r in range(n_restarts)], ctx, workers)
    outcomes.sort(key=lambda o: o[0])
    scored = [(o[1], o[0]) for o in outcomes if o[1] is not None]
    if not scored:
        raise SeqBindError("all final-training restarts diverged")
    best_auc, best_restart = max(scored, key=lambda s: (s[0], -s[1]))
    model = build_model(spec, best, dataset.fixed_length,
                        derive_seed(int(seed), TAG_RESTART, best_restart, 0),
                        embedding=embedding)
    restore_params(model, outcomes[best_restart][2])
    model.step_count = best.selected_steps
    rows = [(o[0], o[1]) for o in outcomes]
    logs = [(o[0], o[3]) for o in outcomes]
    return model, rows, logs


def train_dataset_embedding(dataset, seed, dim=50):
    """Fit the per-dataset k-mer embedding on the training sequences only."""
    vocab = build_vocab(KMER_K)
    tokens = dataset.token_matrix(KMER_K, KMER_STRIDE)
    table, losses = train_word2vec(list(tokens), vocab.size, dim=dim,
                                   seed=derive_seed(seed, TAG_EMBED))
    return table, losses


def select_model(dataset, spec, n_trials=40, n_folds=3, seed=0,
                 max_steps=MAX_STEPS_DEFAULT, checkpoint_every=CHECKPOINT_EVERY_DEFAULT,
                 n_restarts=5, workers=1, progress=None):
    """The full pipeline: (optional embedding) -> calibrate -> finalize."""
    embedding = None
    if spec.input_repr == "embedding":
        embedding, _ = train_dataset_embedding(dataset, seed)
    best, trials = calibrate(dataset, spec, n_trials, n_folds, seed, embedding,
                             max_steps, checkpoint_every, workers, progress)
    model, restarts, logs = finalize(dataset, spec, best, n_restarts, seed,
                                     embedding, checkpoint_every, workers)
    return model, trials, restarts, logs
