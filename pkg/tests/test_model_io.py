"""Model container round trips."""

import numpy as np
import pytest

from seqbind.arch import build_model, default_hyper, preset
from seqbind.errors import DataError
from seqbind.model_io import load_model, save_model


def _random_batch(rng, n, length):
    return rng.random((n, 4, length))


class TestContainer:
    def test_roundtrip_predictions_bit_identical(self, tmp_path, rng):
        model = build_model(preset("DanQ"), default_hyper("onehot"), 31, seed=4)
        path = tmp_path / "model.txt"
        save_model(model, path)
        loaded = load_model(path)
        batch = _random_batch(rng, 100, 31)
        np.testing.assert_array_equal(model.predict(batch), loaded.predict(batch))
        assert loaded.arch == model.arch
        assert loaded.hyper.to_dict() == model.hyper.to_dict()

    def test_embedding_model_roundtrip(self, tmp_path, rng):
        table = rng.standard_normal((65, 50))
        model = build_model(preset("ECLSTM"), default_hyper("embedding"), 41, seed=4,
                            embedding=table)
        path = tmp_path / "model.txt"
        save_model(model, path)
        loaded = load_model(path)
        tokens = rng.integers(65, size=(20, 39))
        np.testing.assert_array_equal(model.predict(tokens), loaded.predict(tokens))
        np.testing.assert_array_equal(loaded.embedding, table)

    def test_save_is_deterministic(self, tmp_path):
        model = build_model(preset("DeepBind"), default_hyper("onehot"), 21, seed=0)
        save_model(model, tmp_path / "a.txt")
        save_model(model, tmp_path / "b.txt")
        assert (tmp_path / "a.txt").read_bytes() == (tmp_path / "b.txt").read_bytes()

    def test_wrong_format_rejected(self, tmp_path):
        path = tmp_path / "bogus.txt"
        path.write_text("format=something-else\n")
        with pytest.raises(DataError, match="container"):
            load_model(path)

    def test_missing_array_rejected(self, tmp_path):
        model = build_model(preset("DeepBind"), default_hyper("onehot"), 21, seed=0)
        path = tmp_path / "model.txt"
        save_model(model, path)
        kept = [l for l in path.read_text().splitlines() if not l.startswith("out.w ")]
        path.write_text("\n".join(kept) + "\n")
        with pytest.raises(DataError, match="out.w"):
            load_model(path)
