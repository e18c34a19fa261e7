import numpy as np
import pytest

from helpers import fd_grad, max_rel_err
from relex import autodiff as ad
from relex.diagnostics import model_grad_check, toy_setup
from relex.encoder import FeatureConfig
from relex.model import (
    ABLATIONS,
    ModelConfig,
    Vocab,
    config_from_dict,
    config_to_dict,
    forward_instance,
    init_params,
    predict_labels,
)


def tiny_config(**over):
    base = dict(
        features=FeatureConfig(word_dim=6, pos_dim=3, tag_dim=2, chunk_dim=2, clip_window=5),
        hidden=4,
        attn_dim=5,
        dep_hidden=5,
        ff_dim=5,
        dtype="float64",
    )
    base.update(over)
    return ModelConfig(**base)


@pytest.fixture
def setup():
    inst, vocab, _ = toy_setup()
    return inst, vocab


class TestConfig:
    def test_ablation_mapping(self):
        cfg = tiny_config()
        assert cfg.ablation == "full"
        no_cm = cfg.with_ablation("no_CM")
        assert (no_cm.use_self_attention, no_cm.use_dep_head, no_cm.use_control) == (
            True,
            True,
            False,
        )
        bare = cfg.with_ablation("no_SA_DP_CM")
        assert not bare.use_self_attention
        assert bare.ablation == "no_SA_DP_CM"
        with pytest.raises(ValueError, match="unknown ablation"):
            cfg.with_ablation("no_everything")

    def test_aggregate_dim_tracks_ablation(self):
        cfg = tiny_config()
        assert cfg.aggregate_dim == 2 * 8 + 3 * 5
        assert cfg.with_ablation("no_SA_DP_CM").aggregate_dim == 2 * 8 + 3 * 8

    def test_roundtrip_via_dict(self):
        cfg = tiny_config(lambda_dep=0.25, dep_nonlinearity="relu")
        assert config_from_dict(config_to_dict(cfg)) == cfg

    def test_documented_defaults(self):
        cfg = ModelConfig()
        assert cfg.lambda_dep == 0.01
        assert cfg.h_dim == 200            # two 100-unit LSTM directions
        assert cfg.attn_dim == 200
        assert cfg.aggregate_dim == 1000   # 2*200 + 3*200
        feats = cfg.features
        assert (feats.pos_dim, feats.tag_dim, feats.chunk_dim) == (50, 50, 50)


class TestInitParams:
    def test_unk_row_is_zero_and_trainable_slot_exists(self, setup):
        inst, vocab = setup
        params = init_params(tiny_config(), vocab, seed=0)
        assert np.array_equal(params["emb_word"][vocab.unk_id], np.zeros(6))
        assert params["emb_word"].shape[0] == len(vocab.words) + 1

    def test_pretrained_rows_copied(self, setup):
        from relex.data import EmbeddingTable

        inst, vocab = setup
        table = EmbeddingTable(
            vocab={"acme": 0}, matrix=np.arange(6, dtype=np.float64).reshape(1, 6)
        )
        params = init_params(tiny_config(), vocab, seed=0, pretrained=table)
        row = vocab.word_id("acme")
        assert np.array_equal(params["emb_word"][row], np.arange(6))

    def test_pretrained_dim_mismatch_rejected(self, setup):
        from relex.data import EmbeddingTable

        inst, vocab = setup
        table = EmbeddingTable(vocab={"acme": 0}, matrix=np.ones((1, 9)))
        with pytest.raises(ValueError, match="word_dim"):
            init_params(tiny_config(), vocab, seed=0, pretrained=table)

    def test_ablations_create_only_live_parameters(self, setup):
        inst, vocab = setup
        for name, dropped in (
            ("no_CM", ("ctl_Wp", "ctl_Wa", "ctl_Wc")),
            ("no_DP_CM", ("dep_W1", "dep_W2", "ctl_Wp")),
            ("no_SA_DP_CM", ("attn_Wk", "dep_W1", "ctl_Wp")),
        ):
            params = init_params(tiny_config().with_ablation(name), vocab, seed=0)
            for key in dropped:
                assert key not in params


class TestForward:
    def test_probabilities_sum_to_one(self, setup):
        inst, vocab = setup
        cfg = tiny_config()
        params = init_params(cfg, vocab, seed=1)
        trace = forward_instance(inst, params, cfg, vocab)
        assert abs(trace.P.data.sum() - 1.0) < 1e-6
        assert trace.o_vec.data.shape == (1, cfg.aggregate_dim)
        assert float(trace.loss_total.data) > 0

    def test_forward_is_deterministic(self, setup):
        inst, vocab = setup
        cfg = tiny_config()
        params = init_params(cfg, vocab, seed=1)
        a = forward_instance(inst, params, cfg, vocab)
        b = forward_instance(inst, params, cfg, vocab)
        assert float(a.loss_total.data) == float(b.loss_total.data)
        assert np.array_equal(a.P.data, b.P.data)

    def test_dropping_dep_head_keeps_label_loss_bit_identical(self, setup):
        inst, vocab = setup
        cfg = tiny_config()
        params = init_params(cfg, vocab, seed=1)
        full = forward_instance(inst, params, cfg, vocab)
        no_dep = forward_instance(
            inst, params, ModelConfig(**{**config_to_dict_raw(cfg), "use_dep_head": False}), vocab
        )
        assert float(full.loss_label.data) == float(no_dep.loss_label.data)
        diff = float(full.loss_total.data) - float(full.loss_label.data)
        expected = cfg.lambda_dep * float(full.loss_dep.data)
        assert abs(diff - expected) <= 1e-9 * max(1.0, expected)
        assert no_dep.loss_dep is None
        assert float(no_dep.loss_total.data) == float(no_dep.loss_label.data)

    def test_ablation_trace_shapes(self, setup):
        inst, vocab = setup
        for name in ABLATIONS:
            cfg = tiny_config().with_ablation(name)
            params = init_params(cfg, vocab, seed=2)
            trace = forward_instance(inst, params, cfg, vocab)
            assert trace.o_vec.data.shape == (1, cfg.aggregate_dim)
            if name == "full":
                assert trace.c is not None and trace.edge_probs is not None
            if name == "no_CM":
                assert trace.c is None and trace.edge_probs is not None
            if name in ("no_DP_CM", "no_SA_DP_CM"):
                assert trace.edge_probs is None and trace.loss_dep is None
            if name == "no_SA_DP_CM":
                assert trace.attn_weights is None
                assert trace.G is trace.H

    def test_every_live_parameter_reaches_the_loss(self, setup):
        inst, vocab = setup
        for name in ABLATIONS:
            cfg = tiny_config().with_ablation(name)
            params = init_params(cfg, vocab, seed=3)
            tape = ad.Tape()
            tensors = {k: ad.Tensor(v, tape) for k, v in params.items()}
            trace = forward_instance(inst, tensors, cfg, vocab)
            grads = ad.backward(trace.loss_total, tensors.values())
            for key, t in tensors.items():
                assert np.abs(grads[t]).max() > 0, (name, key)

    def test_unknown_label_is_named(self, setup):
        inst, vocab = setup
        from dataclasses import replace

        cfg = tiny_config()
        params = init_params(cfg, vocab, seed=0)
        bad = replace(inst, label="mystery_rel")
        with pytest.raises(ValueError, match="mystery_rel"):
            forward_instance(bad, params, cfg, vocab)

    def test_tie_prediction_takes_lowest_label_index(self, setup):
        inst, vocab = setup
        cfg = tiny_config()
        params = init_params(cfg, vocab, seed=0)
        params["cls_W2"][:] = 0.0
        params["cls_b2"][:] = 0.0
        labels = predict_labels([inst], params, cfg, vocab)
        assert labels == [vocab.labels[0]]


def config_to_dict_raw(cfg):
    return {k: getattr(cfg, k) for k in cfg.__dataclass_fields__}


class TestVocab:
    def test_roundtrip(self, setup):
        _, vocab = setup
        assert Vocab.from_dict(vocab.to_dict()) == Vocab.from_dict(vocab.to_dict())
        back = Vocab.from_dict(vocab.to_dict())
        assert back.words == vocab.words and back.labels == vocab.labels

    def test_oov_word_goes_to_unk(self, setup):
        _, vocab = setup
        assert vocab.word_id("never-seen") == vocab.unk_id

    def test_unknown_tags_are_named(self, setup):
        _, vocab = setup
        with pytest.raises(ValueError, match="B-GPE"):
            vocab.entity_tag_id("B-GPE")
        with pytest.raises(ValueError, match="B-ADJP"):
            vocab.chunk_tag_id("B-ADJP")


class TestWholeModelGradients:
    def test_three_token_instance_matches_independent_oracle(self):
        """Full combined loss on a 3-token instance vs the tests' own
        finite-difference oracle, sampled coordinates from every group."""
        from relex.data import DependencyTree, RelationInstance, Sentence, Token

        sent = Sentence(
            tokens=(
                Token("a", "B-PER", "B-NP"),
                Token("b", "O", "B-VP"),
                Token("c", "B-ORG", "B-NP"),
            ),
            tree=DependencyTree((1, -1, 1), ("nsubj", "root", "obj")),
        )
        inst = RelationInstance(sent, s=0, o=2, label="r1")
        vocab = Vocab(
            words=("a", "b", "c"),
            entity_tags=("B-ORG", "B-PER", "O"),
            chunk_tags=("B-NP", "B-VP"),
            deprels=("nsubj", "obj", "root"),
            labels=("None", "r1"),
        )
        cfg = tiny_config()
        params = init_params(cfg, vocab, seed=4)
        rng = np.random.default_rng(5)
        params = {k: v + rng.uniform(-0.8, 0.8, v.shape) for k, v in params.items()}

        def f(_):
            # the perturbed array is shared with params, so the full forward
            # sees the finite-difference bumps
            return float(forward_instance(inst, params, cfg, vocab).loss_total.data)

        tape = ad.Tape()
        tensors = {k: ad.Tensor(v, tape) for k, v in params.items()}
        grads = ad.backward(forward_instance(inst, tensors, cfg, vocab).loss_total)

        for name, arr in params.items():
            flat_ids = rng.choice(arr.size, size=min(4, arr.size), replace=False)
            analytic = grads[tensors[name]].reshape(-1)
            flat = arr.reshape(-1)
            for i in flat_ids:
                orig = flat[i]
                flat[i] = orig + 1e-5
                fp = f(None)
                flat[i] = orig - 1e-5
                fm = f(None)
                flat[i] = orig
                numeric = (fp - fm) / 2e-5
                err = abs(analytic[i] - numeric) / max(1.0, abs(numeric))
                assert err <= 1e-4, (name, i, err)


class TestModelGradCheckDriver:
    def test_library_grad_check_passes_for_full_model(self):
        report = model_grad_check(seed=1)
        assert report.passed
        assert sum(len(g.skipped) for g in report.groups.values()) == 0

    def test_ablation_checks_only_live_groups(self):
        _, _, cfg = toy_setup()
        report = model_grad_check(config=cfg.with_ablation("no_DP_CM"), seed=1)
        assert report.passed
        assert not any(g.startswith("dep_") for g in report.groups)
        assert not any(g.startswith("ctl_") for g in report.groups)
