"""Presets, spec serialization, and model construction."""

import numpy as np
import pytest

from seqbind.arch import (ArchSpec, ConvLayerSpec, PRESETS, build_model, default_hyper,
                          expand_filters, parse_spec, preset, serialize_spec)
from seqbind.errors import ConfigError
from seqbind.selection import sample_hyperparams


def _hyper(repr_, **overrides):
    h = default_hyper(repr_)
    for k, v in overrides.items():
        setattr(h, k, v)
    return h


class TestPresets:
    def test_kegru_has_no_convolution(self):
        assert preset("KEGRU").conv_layers == ()
        assert preset("KEGRU").recurrent == "bigru"

    def test_dilated_dilations(self):
        assert [c.dilation for c in preset("Dilated").conv_layers] == [1, 2, 2]

    def test_ecblstm_is_bidirectional_lstm(self):
        spec = preset("ECBLSTM")
        assert spec.recurrent == "bilstm"
        assert spec.input_repr == "embedding"
        assert len(spec.conv_layers) == 1

    def test_layer_counts_and_representations(self):
        expect = {
            "DeepBind": ("onehot", 1, "none"), "DeepBind*": ("onehot", 3, "none"),
            "Dilated": ("onehot", 3, "none"), "DanQ": ("onehot", 1, "bilstm"),
            "DanQ*": ("onehot", 3, "bilstm"), "DeepBind-E*": ("embedding", 3, "none"),
            "KEGRU": ("embedding", 0, "bigru"), "ECLSTM": ("embedding", 1, "lstm"),
            "ECBLSTM": ("embedding", 1, "bilstm"),
        }
        for name, (repr_, n_conv, rec) in expect.items():
            spec = preset(name)
            assert (spec.input_repr, len(spec.conv_layers), spec.recurrent) == \
                (repr_, n_conv, rec), name

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="unknown preset"):
            preset("AlphaFold")

    def test_serialization_roundtrip(self):
        for name in PRESETS:
            spec = preset(name)
            assert parse_spec(serialize_spec(spec)) == spec

    def test_custom_spec_roundtrip(self):
        spec = ArchSpec("custom", "onehot",
                        (ConvLayerSpec(16, 24, 1), ConvLayerSpec(24, 5, 2)),
                        "gru", rnn_hidden=20, head=64)
        assert parse_spec(serialize_spec(spec)) == spec


class TestExpandFilters:
    def test_progression_from_16(self):
        assert expand_filters(16, 3) == [16, 24, 36]

    def test_progression_from_32(self):
        assert expand_filters(32, 3) == [32, 48, 72]

    def test_single_layer(self):
        assert expand_filters(21, 1) == [21]


class TestBuildModel:
    def test_deepbind_first_bank_shape(self):
        model = build_model(preset("DeepBind"), _hyper("onehot"), 101, seed=0)
        assert model.conv_params[0][0].value.shape == (16, 24, 4)

    def test_embedding_conv_consumes_embedding_channels(self, rng):
        table = rng.standard_normal((65, 50))
        model = build_model(preset("ECBLSTM"), _hyper("embedding"), 101, seed=0,
                            embedding=table)
        assert model.conv_params[0][0].value.shape == (16, 10, 50)

    def test_same_seed_bit_identical(self, rng):
        table = rng.standard_normal((65, 50))
        a = build_model(preset("ECLSTM"), _hyper("embedding"), 101, 7, embedding=table)
        b = build_model(preset("ECLSTM"), _hyper("embedding"), 101, 7, embedding=table)
        for pa, pb in zip(a.parameters(), b.parameters()):
            assert pa.name == pb.name
            np.testing.assert_array_equal(pa.value, pb.value)

    def test_output_is_probability(self, rng):
        for name in ("DeepBind", "Dilated", "DanQ", "KEGRU", "ECBLSTM"):
            spec = preset(name)
            table = rng.standard_normal((65, 50)) if spec.input_repr == "embedding" else None
            hyper = _hyper(spec.input_repr, weight_init="normal", init_scale_motifs=0.1,
                           init_scale_rnn=0.1, init_scale_dense=0.1)
            model = build_model(spec, hyper, 31, seed=1, embedding=table)
            if spec.input_repr == "onehot":
                batch = rng.random((3, 4, 31))
            else:
                batch = rng.integers(65, size=(3, 29))
            probs = model.forward(batch).value
            assert probs.shape == (3,)
            assert np.all((probs > 0) & (probs < 1))

    def test_filter_progression_applied(self):
        model = build_model(preset("DeepBind*"), _hyper("onehot", n_filters=32), 51, seed=0)
        assert [layout[0] for layout in model.conv_layout] == [32, 48, 72]
        # later windows default to the small fixed width
        assert [layout[1] for layout in model.conv_layout] == [24, 5, 5]

    def test_embedding_required_for_embedding_specs(self):
        with pytest.raises(ConfigError, match="embedding"):
            build_model(preset("KEGRU"), _hyper("embedding"), 101, seed=0)

    def test_explicit_filters_must_follow_progression(self):
        spec = ArchSpec("bad", "onehot", (ConvLayerSpec(16, 24), ConvLayerSpec(20, 5)))
        with pytest.raises(ConfigError, match="progression"):
            build_model(spec, _hyper("onehot"), 51, seed=0)

    def test_motif_length_tied_to_representation(self):
        bad = _hyper("onehot", motif_length=10)
        with pytest.raises(ConfigError, match="motif_length"):
            build_model(preset("DeepBind"), bad, 101, seed=0)

    def test_sampled_hyper_builds_every_preset(self, rng):
        table = rng.standard_normal((65, 50))
        for i, name in enumerate(PRESETS):
            spec = preset(name)
            hyper = sample_hyperparams(spec.input_repr, np.random.default_rng(i))
            model = build_model(spec, hyper, 41, seed=i,
                                embedding=table if spec.input_repr == "embedding" else None)
            assert model.parameters()
