"""Loss, optimizers, regularization, and the checkpointed training loop."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .arch import BATCH_SIZE
from .data import batch_iter
from .errors import SeqBindError, TrainingDiverged
from .evaluate import roc_auc

log = logging.getLogger(__name__)

MAX_STEPS_DEFAULT = 40_000
CHECKPOINT_EVERY_DEFAULT = 5_000
GRAD_CLIP_NORM = 5.0  # applied to recurrent models only


def bce_loss(p, y):
    """Batch-mean binary cross-entropy on probabilities (clamped at 1e-12)."""
    return ad.binary_cross_entropy(p, y)


class SGD:
    """v <- momentum*v + grad; w <- w - lr*v."""

    def __init__(self, params, lr, momentum=0.0):
        if lr <= 0:
            raise SeqBindError(f"learning rate must be positive, got {lr}")
        self.params = list(params)
        self.lr = lr
        self.momentum = momentum
        self.velocity = [np.zeros_like(p.value) for p in self.params]

    def step(self):
        for p, v in zip(self.params, self.velocity):
            v *= self.momentum
            v += p.grad
            p.value -= self.lr * v

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()


class Adagrad:
    """G <- G + grad^2; w <- w - lr*grad/(sqrt(G) + 1e-10)."""

    def __init__(self, params, lr):
        if lr <= 0:
            raise SeqBindError(f"learning rate must be positive, got {lr}")
        self.params = list(params)
        self.lr = lr
        self.accum = [np.zeros_like(p.value) for p in self.params]

    def step(self):
        for p, g2 in zip(self.params, self.accum):
            g2 += p.grad * p.grad
            p.value -= self.lr * p.grad / (np.sqrt(g2) + 1e-10)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()


def make_optimizer(hyper, params):
    if hyper.optimizer == "sgd":
        return SGD(params, hyper.learning_rate, hyper.momentum)
    return Adagrad(params, hyper.learning_rate)


def add_weight_decay(weight_params, lam):
    """Couple the 2*lambda*w gradient of the lambda*sum(|W|^2) penalty."""
    if lam <= 0:
        return
    for p in weight_params:
        p.grad += (2.0 * lam) * p.value


def clip_global_norm(params, max_norm):
    total = 0.0
    for p in params:
        total += float((p.grad * p.grad).sum())
    norm = np.sqrt(total)
    if norm > max_norm:
        factor = max_norm / norm
        for p in params:
            p.grad *= factor
    return norm


@dataclass
class TrainState:
    """Outcome of one training run."""
    steps: int = 0
    log: list = field(default_factory=list)   # (step, mean train loss, val auc)
    best_auc: float = float("nan")
    best_step: int = 0
    best_params: dict | None = None
    clip_events: int = 0


def _snapshot(model):
    return {p.name: p.value.copy() for p in model.parameters()}


def restore_params(model, snapshot):
    for p in model.parameters():
        p.value[...] = snapshot[p.name]


def train_model(model, train_inputs, train_labels, hyper, seed,
                val_inputs=None, val_labels=None,
                max_steps=MAX_STEPS_DEFAULT, checkpoint_every=CHECKPOINT_EVERY_DEFAULT,
                metrics=None):
    """Minimize cross-entropy for up to max_steps batches of 128.

    Every checkpoint_every steps the validation AUC is recorded and the
    parameters of the best checkpoint are retained in the returned state.
    Raises TrainingDiverged on a non-finite loss or parameter.
    """
    rng = np.random.default_rng(seed)
    params = list(model.parameters())
    opt = make_optimizer(hyper, params)
    weights = model.weight_parameters()
    state = TrainState()
    batches = batch_iter(len(train_labels), BATCH_SIZE, rng)
    loss_since_checkpoint = []

    for step in range(1, max_steps + 1):
        idx = next(batches)
        with ad.Tape() as tape:
            probs = model.forward(train_inputs[idx], training=True, rng=rng)
            loss = bce_loss(probs, train_labels[idx])
        loss_value = float(loss.value)
        if not np.isfinite(loss_value):
            raise TrainingDiverged(f"non-finite loss at step {step}")
        opt.zero_grad()
        tape.backward(loss)
        add_weight_decay(weights, hyper.weight_decay)
        if model.has_recurrent:
            norm = clip_global_norm(params, GRAD_CLIP_NORM)
            if norm > GRAD_CLIP_NORM:
                state.clip_events += 1
                log.debug("gradient norm %.3f clipped to %.1f at step %d",
                          norm, GRAD_CLIP_NORM, step)
        opt.step()
        loss_since_checkpoint.append(loss_value)

        if step % checkpoint_every == 0:
            for p in params:
                if not np.isfinite(p.value).all():
                    raise TrainingDiverged(f"non-finite parameter {p.name} at step {step}")
            mean_loss = float(np.mean(loss_since_checkpoint))
            loss_since_checkpoint = []
            val_auc = float("nan")
            if val_inputs is not None:
                val_auc = roc_auc(model.predict(val_inputs), val_labels)
                if np.isnan(state.best_auc) or val_auc > state.best_auc:
                    state.best_auc = val_auc
                    state.best_step = step
                    state.best_params = _snapshot(model)
            state.log.append((step, mean_loss, val_auc))
            if metrics is not None:
                metrics.write(f"{step}\t{mean_loss:.6f}\t{val_auc:.6f}\n")
    state.steps = max_steps
    model.step_count = max_steps
    return state
