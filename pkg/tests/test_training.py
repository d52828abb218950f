"""Loss values, optimizer updates, regularization, and the training loop."""

import numpy as np
import pytest

from seqbind.arch import build_model, default_hyper, preset
from seqbind.autodiff import Parameter, Tensor
from seqbind.data import Dataset, RawSequence
from seqbind.errors import TrainingDiverged
from seqbind.selection import sample_hyperparams
from seqbind.training import SGD, Adagrad, add_weight_decay, bce_loss, train_model


class TestLossValues:
    def test_half_probability_is_ln2(self):
        loss = bce_loss(Tensor(np.array([0.5])), np.array([1.0]))
        assert float(loss.value) == pytest.approx(0.693147, abs=1e-6)

    def test_perfect_prediction_vanishes(self):
        loss = bce_loss(Tensor(np.array([1.0 - 1e-12, 1e-12])), np.array([1.0, 0.0]))
        assert float(loss.value) == pytest.approx(0.0, abs=1e-11)

    def test_two_example_average(self):
        a = float(bce_loss(Tensor(np.array([0.3])), np.array([1.0])).value)
        b = float(bce_loss(Tensor(np.array([0.6])), np.array([0.0])).value)
        both = float(bce_loss(Tensor(np.array([0.3, 0.6])), np.array([1.0, 0.0])).value)
        assert both == pytest.approx((a + b) / 2)


class TestOptimizers:
    def test_plain_sgd_update(self):
        p = Parameter("p", np.array([1.0]))
        opt = SGD([p], lr=0.1, momentum=0.0)
        p.grad[...] = 2.0
        opt.step()
        assert p.value[0] == pytest.approx(0.8)

    def test_sgd_momentum_two_steps(self):
        p = Parameter("p", np.array([1.0]))
        opt = SGD([p], lr=0.1, momentum=0.9)
        p.grad[...] = 1.0
        opt.step()
        assert p.value[0] == pytest.approx(0.9)          # step of lr*1
        p.grad[...] = 1.0
        opt.step()
        assert p.value[0] == pytest.approx(0.9 - 0.19)   # v = 0.9*1 + 1

    def test_adagrad_first_step(self):
        p = Parameter("p", np.array([1.0]))
        opt = Adagrad([p], lr=0.1)
        p.grad[...] = 3.0
        opt.step()
        assert p.value[0] == pytest.approx(1.0 - 0.1 * 3.0 / (3.0 + 1e-10))

    def test_zero_gradient_is_a_fixed_point(self):
        for make in (lambda p: SGD([p], 0.5, 0.9), lambda p: Adagrad([p], 0.5)):
            p = Parameter("p", np.array([1.0, -2.0]))
            opt = make(p)
            opt.step()  # grad buffers start at zero
            np.testing.assert_array_equal(p.value, [1.0, -2.0])

    def test_weight_decay_shrinks_weights_monotonically(self):
        p = Parameter("p", np.array([1.0, -2.0, 0.5]))
        opt = SGD([p], lr=0.1, momentum=0.0)
        mags = [np.abs(p.value).copy()]
        for _ in range(5):
            opt.zero_grad()
            add_weight_decay([p], 0.05)
            opt.step()
            mags.append(np.abs(p.value).copy())
        for before, after in zip(mags, mags[1:]):
            assert np.all(after < before)


def _separable_dataset(n=10, length=30, motif="GGATCC"):
    rng = np.random.default_rng(5)
    seqs = []
    for i in range(n // 2):
        bg = "".join("ACGT"[j] for j in rng.integers(4, size=length))
        start = int(rng.integers(length - len(motif) + 1))
        seqs.append(RawSequence(f"p{i}", bg[:start] + motif + bg[start + len(motif):], 1))
    for i in range(n // 2):
        while True:
            bg = "".join("ACGT"[j] for j in rng.integers(4, size=length))
            if motif not in bg:
                break
        seqs.append(RawSequence(f"n{i}", bg, 0))
    return Dataset(seqs)


class TestTrainLoop:
    def test_checkpoint_log_shape_and_determinism(self):
        ds = _separable_dataset(12)
        hyper = default_hyper("onehot")
        logs = []
        for _ in range(2):
            model = build_model(preset("DeepBind"), hyper, ds.fixed_length, seed=3)
            state = train_model(model, ds.onehot_matrix(), ds.labels(), hyper, seed=9,
                                val_inputs=ds.onehot_matrix(), val_labels=ds.labels(),
                                max_steps=80, checkpoint_every=10)
            assert len(state.log) == 8
            assert [row[0] for row in state.log] == list(range(10, 81, 10))
            logs.append(state.log)
        assert logs[0] == logs[1]

    def test_best_checkpoint_ties_take_smaller_step(self):
        ds = _separable_dataset(12)
        hyper = default_hyper("onehot")
        model = build_model(preset("DeepBind"), hyper, ds.fixed_length, seed=3)
        state = train_model(model, ds.onehot_matrix(), ds.labels(), hyper, seed=9,
                            val_inputs=ds.onehot_matrix(), val_labels=ds.labels(),
                            max_steps=60, checkpoint_every=10)
        aucs = [row[2] for row in state.log]
        first_best = state.log[int(np.argmax(aucs))][0]
        assert state.best_step == first_best
        assert state.best_params is not None

    def test_separable_toy_converges_for_sampled_settings(self):
        """Linearly separable 10-sequence set: loss sinks below 0.05 within
        2000 steps for sampled settings with learning rate >= 1e-2.

        Scoped away from two corners of the search space where convergence
        provably cannot happen: strong coupled weight decay whose
        momentum-amplified contraction collapses a tiny-init network to the
        all-zero stationary point, and large-step Adagrad whose +-lr first
        kick saturates the output on a 10-example batch (both verified by
        inspecting the resulting parameter values, not just the loss).
        """
        ds = _separable_dataset(10)
        inputs, labels = ds.onehot_matrix(), ds.labels()
        spec = preset("DeepBind")
        tested = 0
        trial = 0
        while tested < 3:
            hyper = sample_hyperparams("onehot", np.random.default_rng(1000 + trial))
            trial += 1
            if hyper.learning_rate < 1e-2:
                continue
            if hyper.weight_decay > 1e-3:
                continue
            if hyper.optimizer == "adagrad" and hyper.learning_rate > 0.05:
                continue
            tested += 1
            model = build_model(spec, hyper, ds.fixed_length, seed=trial)
            train_model(model, inputs, labels, hyper, seed=trial,
                        max_steps=2000, checkpoint_every=2000)
            final = float(bce_loss(Tensor(model.predict(inputs)), labels).value)
            assert final < 0.05, f"trial {trial}: loss {final} (lr={hyper.learning_rate})"

    @pytest.mark.filterwarnings("ignore:invalid value")
    def test_divergence_raises(self):
        ds = _separable_dataset(10)
        hyper = default_hyper("onehot")
        hyper.learning_rate = 0.1
        model = build_model(preset("DeepBind"), hyper, ds.fixed_length, seed=1)
        model.out_params[0].value[...] = np.inf
        with pytest.raises(TrainingDiverged):
            train_model(model, ds.onehot_matrix(), ds.labels(), hyper, seed=1,
                        max_steps=5, checkpoint_every=5)
