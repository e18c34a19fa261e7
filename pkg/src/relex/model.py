"""Full model: configuration, parameter initialization, and the forward pass.

The pipeline per instance: token features -> BiLSTM -> self-attention ->
all-pairs edge probabilities + auxiliary loss -> entity-conditioned gating ->
aggregation -> relation distribution -> combined loss. Three independent
switches (self-attention, dependency head, control mechanism) realize the
cumulative ablations full / no_CM / no_DP_CM / no_SA_DP_CM.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .attention import self_attention
from .classifier import aggregate, label_loss, predict, total_loss
from .control import control_filter, control_gate
from .data import Corpus, EmbeddingTable, RelationInstance, adjacency_from_tree
from .dephead import dep_loss, edge_probs
from .encoder import FeatureConfig, bilstm, embed_tokens

ABLATIONS = ("full", "no_CM", "no_DP_CM", "no_SA_DP_CM")


@dataclass(frozen=True)
class ModelConfig:
    features: FeatureConfig = field(default_factory=FeatureConfig)
    hidden: int = 100          # per LSTM direction; dim(h_i) = 2*hidden
    attn_dim: int = 200
    dep_hidden: int = 200
    ff_dim: int = 200
    use_self_attention: bool = True
    use_dep_head: bool = True
    use_control: bool = True
    scale_attention: bool = False
    dep_nonlinearity: str = "tanh"
    classifier_inner_relu: bool = False
    control_pool_filtered: bool = False
    lambda_dep: float = 0.01
    dtype: str = "float32"

    def with_ablation(self, name: str) -> "ModelConfig":
        if name not in ABLATIONS:
            raise ValueError(f"unknown ablation {name!r}, expected one of {ABLATIONS}")
        return replace(
            self,
            use_control=name == "full",
            use_dep_head=name in ("full", "no_CM"),
            use_self_attention=name != "no_SA_DP_CM",
        )

    @property
    def ablation(self) -> str:
        key = (self.use_self_attention, self.use_dep_head, self.use_control)
        return {
            (True, True, True): "full",
            (True, True, False): "no_CM",
            (True, False, False): "no_DP_CM",
            (False, False, False): "no_SA_DP_CM",
        }.get(key, "custom")

    @property
    def h_dim(self) -> int:
        return 2 * self.hidden

    @property
    def enriched_dim(self) -> int:
        return self.attn_dim if self.use_self_attention else self.h_dim

    @property
    def aggregate_dim(self) -> int:
        return 2 * self.h_dim + 3 * self.enriched_dim

    def np_dtype(self):
        return np.dtype(self.dtype)


@dataclass
class Vocab:
    """Index maps shared by featurization, the classifier, and checkpoints."""

    words: tuple[str, ...]
    entity_tags: tuple[str, ...]
    chunk_tags: tuple[str, ...]
    deprels: tuple[str, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        self._word = {w: i for i, w in enumerate(self.words)}
        self._ent = {t: i for i, t in enumerate(self.entity_tags)}
        self._chunk = {t: i for i, t in enumerate(self.chunk_tags)}
        self.deprel_index = {r: i for i, r in enumerate(self.deprels)}
        self._label = {l: i for i, l in enumerate(self.labels)}

    @classmethod
    def from_corpus(cls, corpus: Corpus, pretrained: EmbeddingTable | None = None) -> "Vocab":
        words = set()
        for inst in corpus.instances:
            words.update(t.form for t in inst.sentence.tokens)
        if pretrained is not None:
            words.update(pretrained.vocab)
        return cls(
            words=tuple(sorted(words)),
            entity_tags=corpus.entity_tags,
            chunk_tags=corpus.chunk_tags,
            deprels=corpus.deprels,
            labels=corpus.labels,
        )

    @property
    def unk_id(self) -> int:
        return len(self.words)

    @property
    def n_labels(self) -> int:
        return len(self.labels)

    def word_id(self, form: str) -> int:
        return self._word.get(form, self.unk_id)

    def entity_tag_id(self, tag: str) -> int:
        if tag not in self._ent:
            raise ValueError(f"entity tag {tag!r} not covered by the model vocabulary")
        return self._ent[tag]

    def chunk_tag_id(self, tag: str) -> int:
        if tag not in self._chunk:
            raise ValueError(f"chunk tag {tag!r} not covered by the model vocabulary")
        return self._chunk[tag]

    def label_id(self, label: str) -> int:
        if label not in self._label:
            raise ValueError(f"relation label {label!r} not covered by the model vocabulary")
        return self._label[label]

    def to_dict(self) -> dict:
        return {
            "words": list(self.words),
            "entity_tags": list(self.entity_tags),
            "chunk_tags": list(self.chunk_tags),
            "deprels": list(self.deprels),
            "labels": list(self.labels),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Vocab":
        return cls(
            words=tuple(d["words"]),
            entity_tags=tuple(d["entity_tags"]),
            chunk_tags=tuple(d["chunk_tags"]),
            deprels=tuple(d["deprels"]),
            labels=tuple(d["labels"]),
        )


def init_params(
    config: ModelConfig,
    vocab: Vocab,
    seed: int = 0,
    pretrained: EmbeddingTable | None = None,
) -> dict[str, np.ndarray]:
    """Fresh parameter arrays. uniform(-0.1, 0.1) weights, zero biases, +1
    forget-gate bias, zero (trainable) unk embedding row. Pre-trained word
    rows are copied in where available and fine-tuned like everything else."""
    rng = np.random.Generator(np.random.PCG64(seed))
    dtype = config.np_dtype()
    feats = config.features

    def uniform(*shape, scale=0.1):
        return rng.uniform(-scale, scale, size=shape).astype(dtype)

    def zeros(*shape):
        return np.zeros(shape, dtype=dtype)

    if pretrained is not None and pretrained.dim != feats.word_dim:
        raise ValueError(
            f"embedding file dim {pretrained.dim} != configured word_dim {feats.word_dim}"
        )

    params: dict[str, np.ndarray] = {}
    # embedding tables start at +-0.5 so the input signal survives the gated
    # squashing of the LSTM; randomly-initialized rows are overwritten by
    # pre-trained vectors where available
    emb = uniform(len(vocab.words) + 1, feats.word_dim, scale=0.5)
    emb[vocab.unk_id] = 0.0
    if pretrained is not None:
        for i, w in enumerate(vocab.words):
            row = pretrained.vocab.get(w)
            if row is not None:
                emb[i] = pretrained.matrix[row].astype(dtype)
    params["emb_word"] = emb
    table_rows = 2 * feats.clip_window + 1
    params["emb_pos_s"] = uniform(table_rows, feats.pos_dim, scale=0.5)
    params["emb_pos_o"] = uniform(table_rows, feats.pos_dim, scale=0.5)
    if feats.use_entity_tag:
        params["emb_ent"] = uniform(len(vocab.entity_tags), feats.tag_dim, scale=0.5)
    if feats.use_chunk_tag:
        params["emb_chunk"] = uniform(len(vocab.chunk_tags), feats.chunk_dim, scale=0.5)

    d_in = feats.input_dim(len(vocab.deprels) if feats.use_deprel else 0)
    for direction in ("fw", "bw"):
        params[f"lstm_{direction}_W"] = uniform(d_in + config.hidden, 4 * config.hidden)
        b = zeros(1, 4 * config.hidden)
        b[0, config.hidden : 2 * config.hidden] = 1.0
        params[f"lstm_{direction}_b"] = b

    if config.use_self_attention:
        # near-tied key/query projections make the self logit a positive
        # quadratic ||W h||^2 while cross logits stay zero-mean, so attention
        # starts identity-biased instead of uniform and every h'_i retains its
        # own token's features; scale normalized to keep the bias magnitude
        # roughly dimension-independent
        kq_scale = 8.3 / np.sqrt(config.attn_dim)
        base = rng.uniform(-0.1, 0.1, size=(config.h_dim, config.attn_dim))
        jitter = rng.uniform(-0.02, 0.02, size=(config.h_dim, config.attn_dim))
        params["attn_Wk"] = (kq_scale * base).astype(dtype)
        params["attn_Wq"] = (kq_scale * (base + jitter)).astype(dtype)
        params["attn_Wv"] = uniform(config.h_dim, config.attn_dim)
        for name in ("k", "q", "v"):
            params[f"attn_b{name}"] = zeros(1, config.attn_dim)
    if config.use_dep_head:
        params["dep_W1"] = uniform(2 * config.enriched_dim, config.dep_hidden)
        params["dep_b1"] = zeros(1, config.dep_hidden)
        params["dep_W2"] = uniform(config.dep_hidden, 1)
        params["dep_b2"] = zeros(1, 1)
    if config.use_control:
        params["ctl_Wp"] = uniform(2 * config.h_dim, config.h_dim)
        params["ctl_bp"] = zeros(1, config.h_dim)
        params["ctl_Wa"] = uniform(config.h_dim, 1)
        params["ctl_ba"] = zeros(1, 1)
        params["ctl_Wc"] = uniform(3 * config.h_dim, config.enriched_dim)
        params["ctl_bc"] = zeros(1, config.enriched_dim)

    params["cls_W1"] = uniform(config.aggregate_dim, config.ff_dim)
    params["cls_b1"] = zeros(1, config.ff_dim)
    params["cls_W2"] = uniform(config.ff_dim, vocab.n_labels)
    params["cls_b2"] = zeros(1, vocab.n_labels)
    return params


@dataclass
class ForwardTrace:
    """Per-instance intermediates kept for losses, analysis, and tests."""

    n: int
    s: int
    o: int
    H: ad.Tensor
    Hp: ad.Tensor
    attn_weights: ad.Tensor | None
    edge_probs: ad.Tensor | None
    adjacency: np.ndarray | None
    p: ad.Tensor | None
    Hbar: ad.Tensor | None
    alpha: ad.Tensor | None
    m: ad.Tensor | None
    c: ad.Tensor | None
    G: ad.Tensor
    o_vec: ad.Tensor
    P: ad.Tensor
    pred_index: int
    loss_label: ad.Tensor
    loss_dep: ad.Tensor | None
    loss_total: ad.Tensor


def _as_param_tensors(params, tape) -> dict[str, ad.Tensor]:
    return {
        k: v if isinstance(v, ad.Tensor) else ad.Tensor(v, tape)
        for k, v in params.items()
    }


def forward_instance(
    inst: RelationInstance,
    params,
    config: ModelConfig,
    vocab: Vocab,
    tape: ad.Tape | None = None,
) -> ForwardTrace:
    """Full pipeline for one instance. ``params`` values may be arrays
    (wrapped onto ``tape``) or already-wrapped Tensors."""
    t = _as_param_tensors(params, tape)
    feats = embed_tokens(inst, config.features, t, vocab)
    H = bilstm(feats, t, config.hidden)
    n = len(inst.sentence)

    if config.use_self_attention:
        Hp, attn_w = self_attention(H, t, scale=config.scale_attention)
    else:
        Hp, attn_w = H, None

    ahat = adjacency = loss_dep = None
    if config.use_dep_head:
        ahat = edge_probs(Hp, t, nonlinearity=config.dep_nonlinearity)
        adjacency = adjacency_from_tree(inst.sentence.tree)
        loss_dep = dep_loss(ahat, adjacency)

    p = Hbar = alpha = m = c = None
    if config.use_control:
        p, Hbar = control_filter(H, inst.s, inst.o, t)
        alpha, m, c, G = control_gate(
            H, Hbar, Hp, inst.s, inst.o, t, pool_filtered=config.control_pool_filtered
        )
    else:
        G = Hp

    o_vec = aggregate(H, G, inst.s, inst.o)
    P = predict(o_vec, t, inner_relu=config.classifier_inner_relu)
    loss_label = label_loss(P, vocab.label_id(inst.label))
    lam = config.lambda_dep if config.use_dep_head else 0.0
    loss = total_loss(loss_label, loss_dep, lam)
    return ForwardTrace(
        n=n,
        s=inst.s,
        o=inst.o,
        H=H,
        Hp=Hp,
        attn_weights=attn_w,
        edge_probs=ahat,
        adjacency=adjacency,
        p=p,
        Hbar=Hbar,
        alpha=alpha,
        m=m,
        c=c,
        G=G,
        o_vec=o_vec,
        P=P,
        pred_index=int(P.data.argmax()),
        loss_label=loss_label,
        loss_dep=loss_dep,
        loss_total=loss,
    )


def predict_labels(instances, params, config: ModelConfig, vocab: Vocab) -> list[str]:
    """Argmax labels without building tapes (inference mode)."""
    out = []
    for inst in instances:
        trace = forward_instance(inst, params, config, vocab)
        out.append(vocab.labels[trace.pred_index])
    return out


def config_to_dict(config: ModelConfig) -> dict:
    return asdict(config)


def config_from_dict(d: dict) -> ModelConfig:
    d = dict(d)
    d["features"] = FeatureConfig(**d["features"])
    return ModelConfig(**d)
