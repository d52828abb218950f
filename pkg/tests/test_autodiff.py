"""Engine-level checks: primitive values, adjoints, and grad_check."""

import numpy as np
import pytest

from seqbind import autodiff as ad
from seqbind.autodiff import Parameter, Tape, Tensor, grad_check
from seqbind.errors import SeqBindError, ShapeMismatch


class TestPrimitiveValues:
    def test_relu(self):
        out = ad.relu(Tensor([-1.0, 0.0, 2.0]))
        np.testing.assert_array_equal(out.value, [0.0, 0.0, 2.0])

    def test_sigmoid_at_zero(self):
        assert ad.sigmoid(Tensor(np.zeros(3))).value == pytest.approx([0.5, 0.5, 0.5])

    def test_sum_relu_gradient(self):
        x = Tensor(np.array([-1.0, 2.0]), needs_grad=True)
        with Tape() as tape:
            loss = ad.sum_all(ad.relu(x))
        tape.backward(loss)
        np.testing.assert_array_equal(x.grad, [0.0, 1.0])

    def test_matmul_grad_matches_hand_expansion(self):
        # loss = sum(W @ x) -> dW[i,j] = x[j] for every row i
        w = Parameter("w", np.array([[1.0, 2.0], [3.0, 4.0]]))
        x = np.array([[5.0], [7.0]])
        with Tape() as tape:
            loss = ad.sum_all(ad.matmul(w, Tensor(x)))
        tape.backward(loss)
        np.testing.assert_allclose(w.grad, np.array([[5.0, 7.0], [5.0, 7.0]]))

    def test_unused_parameter_gets_zero_grad(self):
        used = Parameter("used", np.ones(3))
        unused = Parameter("unused", np.ones(4))
        with Tape() as tape:
            loss = ad.sum_all(ad.tanh(used))
        tape.backward(loss)
        np.testing.assert_array_equal(unused.grad, np.zeros(4))
        assert np.any(used.grad != 0)

    def test_constant_loss_leaves_all_grads_zero(self):
        p = Parameter("p", np.ones(3))
        with Tape() as tape:
            loss = ad.sum_all(Tensor(np.array([1.0, 2.0])))
        tape.backward(loss)
        np.testing.assert_array_equal(p.grad, np.zeros(3))

    def test_backward_rejects_non_scalar(self):
        x = Tensor(np.ones(3), needs_grad=True)
        with Tape() as tape:
            out = ad.relu(x)
        with pytest.raises(SeqBindError, match="scalar"):
            tape.backward(out)

    def test_shape_mismatch_reports_op_and_shapes(self):
        with pytest.raises(ShapeMismatch, match=r"matmul.*\(2, 3\).*\(2, 3\)"):
            ad.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


class TestCrossEntropy:
    def test_half_probability(self):
        p = Tensor(np.array([0.5]))
        assert float(ad.binary_cross_entropy(p, np.array([1.0])).value) == pytest.approx(
            np.log(2.0), abs=1e-12)

    def test_exact_prediction_is_stationary(self):
        p = Tensor(np.array([0.3, 0.8]), needs_grad=True)
        with Tape() as tape:
            loss = ad.binary_cross_entropy(p, np.array([0.3, 0.8]))
        tape.backward(loss)
        np.testing.assert_allclose(p.grad, np.zeros(2), atol=1e-12)

    def test_batch_average(self):
        def single(prob, label):
            return float(ad.binary_cross_entropy(
                Tensor(np.array([prob])), np.array([label])).value)
        pair = float(ad.binary_cross_entropy(
            Tensor(np.array([0.2, 0.9])), np.array([1.0, 0.0])).value)
        assert pair == pytest.approx((single(0.2, 1.0) + single(0.9, 0.0)) / 2.0)


class TestGradCheck:
    def test_linear_fragment_is_machine_exact(self):
        rng = np.random.default_rng(0)
        w = Parameter("w", rng.standard_normal((3, 4)))
        x = np.random.default_rng(1).standard_normal((4, 2))

        def build():
            return ad.sum_all(ad.matmul(w, Tensor(x)))

        assert grad_check(build, [w]) < 1e-9

    def test_conv_pool_dense_fragment(self):
        rng = np.random.default_rng(7)
        x = Tensor(rng.standard_normal((2, 3, 12)), needs_grad=True)
        w = Parameter("w", rng.standard_normal((2, 4, 3)) * 0.7)
        b = Parameter("b", rng.standard_normal(2))
        dense_w = Parameter("dw", rng.standard_normal((2 * 12, 1)) * 0.5)

        def build():
            h = ad.relu(ad.bias_add(ad.conv1d(x, w, dilation=1, pad=3), b))
            h = ad.maxpool1d(h, 4, 1)
            flat = ad.reshape(h, (2, 2 * 12))
            return ad.sum_all(ad.sigmoid(ad.matmul(flat, dense_w)))

        assert grad_check(build, [x, w, b, dense_w]) < 1e-4

    def test_eps_domain_enforced(self):
        with pytest.raises(SeqBindError, match="eps"):
            grad_check(lambda: ad.sum_all(Tensor(np.ones(1))), [], eps=1e-2)
