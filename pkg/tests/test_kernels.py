"""Backend dispatch and numba/numpy kernel agreement."""

import numpy as np
import pytest

from seqbind import kernels
from seqbind.errors import ConfigError


def test_both_backends_present():
    assert kernels.available_backends() == ["numba", "numpy"]


def test_set_backend_roundtrip():
    first = kernels.backend_name()
    other = "numpy" if first == "numba" else "numba"
    assert kernels.set_backend(other) == first
    assert kernels.backend_name() == other
    kernels.set_backend(first)


def test_unknown_backend_rejected():
    with pytest.raises(ConfigError):
        kernels.set_backend("gpu")


class TestBackendAgreement:
    """The jitted kernels and the numpy fallback compute the same thing."""

    def setup_method(self):
        self.nb = kernels._BACKENDS["numba"]
        self.np_ = kernels._BACKENDS["numpy"]

    def test_conv_forward_backward(self, rng):
        for dilation in (1, 2, 3):
            x = rng.standard_normal((4, 3, 30))
            w = rng.standard_normal((5, 4, 3))
            ya, pa = self.nb.conv1d_forward(x, w, dilation)
            yb, pb = self.np_.conv1d_forward(x, w, dilation)
            np.testing.assert_allclose(ya, yb, atol=1e-13)
            np.testing.assert_array_equal(pa, pb)
            dy = rng.standard_normal(ya.shape)
            np.testing.assert_allclose(
                self.nb.conv1d_backward_input(dy, w, dilation, 30),
                self.np_.conv1d_backward_input(dy, w, dilation, 30), atol=1e-13)
            np.testing.assert_allclose(
                self.nb.conv1d_backward_weights(dy, pa, 3, 4),
                self.np_.conv1d_backward_weights(dy, pb, 3, 4), atol=1e-13)

    def test_maxpool(self, rng):
        x = rng.standard_normal((3, 2, 17))
        for window, stride in ((3, 1), (4, 2), (1, 1)):
            oa, aa = self.nb.maxpool_forward(x, window, stride)
            ob, ab = self.np_.maxpool_forward(x, window, stride)
            np.testing.assert_array_equal(oa, ob)
            np.testing.assert_array_equal(aa, ab)
            dout = rng.standard_normal(oa.shape)
            np.testing.assert_array_equal(self.nb.maxpool_backward(dout, aa, 17),
                                          self.np_.maxpool_backward(dout, ab, 17))

    def test_maxpool_tie_takes_smallest_index(self):
        x = np.array([[[1.0, 5.0, 5.0, 2.0]]])
        for kern in (self.nb, self.np_):
            _, arg = kern.maxpool_forward(x, 3, 1)
            np.testing.assert_array_equal(arg[0, 0], [1, 1])

    def test_recurrent_scans(self, rng):
        hid, batch, steps = 4, 3, 6
        xproj = rng.standard_normal((steps, batch, 4 * hid))
        u = rng.standard_normal((hid, 4 * hid)) * 0.4
        fa = self.nb.lstm_forward(xproj, u)
        fb = self.np_.lstm_forward(xproj, u)
        for a, b in zip(fa, fb):
            np.testing.assert_allclose(a, b, atol=1e-13)
        dh = rng.standard_normal((batch, hid))
        ut = np.ascontiguousarray(u.T)
        np.testing.assert_allclose(self.nb.lstm_backward(dh, *fa, ut),
                                   self.np_.lstm_backward(dh, *fb, ut), atol=1e-13)

        x_zr = rng.standard_normal((steps, batch, 2 * hid))
        x_c = rng.standard_normal((steps, batch, hid))
        u_zr = rng.standard_normal((hid, 2 * hid)) * 0.4
        u_c = rng.standard_normal((hid, hid)) * 0.4
        ga = self.nb.gru_forward(x_zr, x_c, u_zr, u_c)
        gb = self.np_.gru_forward(x_zr, x_c, u_zr, u_c)
        for a, b in zip(ga, gb):
            np.testing.assert_allclose(a, b, atol=1e-13)
        da = self.nb.gru_backward(dh, *ga, np.ascontiguousarray(u_zr.T),
                                  np.ascontiguousarray(u_c.T))
        db = self.np_.gru_backward(dh, *gb, np.ascontiguousarray(u_zr.T),
                                   np.ascontiguousarray(u_c.T))
        np.testing.assert_allclose(da[0], db[0], atol=1e-13)
        np.testing.assert_allclose(da[1], db[1], atol=1e-13)

    def test_sgns_epoch_identical_updates(self, rng):
        vocab, dim = 9, 6
        tokens = rng.integers(vocab, size=40).astype(np.int64)
        offsets = np.array([0, 15, 40], dtype=np.int64)
        draws = rng.integers(1, 4, size=40).astype(np.int64)
        uniforms = rng.random(40 * 3 * 8)
        cum = np.cumsum(np.full(vocab, 1.0 / vocab))
        cum[-1] = 1.0
        seed_in = rng.standard_normal((vocab, dim)) * 0.1
        results = []
        for kern in (self.nb, self.np_):
            vec_in = seed_in.copy()
            vec_out = np.zeros((vocab, dim))
            loss, pairs = kern.sgns_epoch(vec_in, vec_out, tokens, offsets, draws,
                                          uniforms, cum, 3, 0.05)
            results.append((vec_in, vec_out, loss, pairs))
        np.testing.assert_allclose(results[0][0], results[1][0], atol=1e-12)
        np.testing.assert_allclose(results[0][1], results[1][1], atol=1e-12)
        assert results[0][3] == results[1][3]
        assert results[0][2] == pytest.approx(results[1][2], rel=1e-10)

    def test_signed_rank_counts_match(self, rng):
        for _ in range(20):
            n = int(rng.integers(1, 14))
            ranks2 = (2 * rng.integers(1, n + 1, size=n)).astype(np.int64)
            limit = int(rng.integers(0, ranks2.sum() + 2))
            assert int(self.nb.count_signed_rank_le(ranks2, np.int64(limit))) == \
                int(self.np_.count_signed_rank_le(ranks2, limit))
