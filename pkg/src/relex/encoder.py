"""Token feature vectors and the bidirectional LSTM encoder.

Each token i is represented by the concatenation of its active feature
parts: word embedding, two position embeddings (relative to the two entity
mentions, clamped to a window), entity/chunk BIO tag embeddings, a binary
on-dependency-path flag, and a dependency-relation multi-hot. The BiLSTM
turns the feature sequence into contextual hidden vectors h_i = [fwd || bwd].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .data import RelationInstance, dep_relation_multihot, path_flags


@dataclass(frozen=True)
class FeatureConfig:
    word_dim: int = 300
    pos_dim: int = 50
    tag_dim: int = 50
    chunk_dim: int = 50
    clip_window: int = 50
    use_word: bool = True
    use_positions: bool = True
    use_entity_tag: bool = True
    use_chunk_tag: bool = True
    use_path_flag: bool = True
    use_deprel: bool = True

    def __post_init__(self):
        if not (self.use_word and self.use_positions):
            raise ValueError("word and position features are the minimum viable input")

    def input_dim(self, n_deprels: int) -> int:
        dim = self.word_dim + 2 * self.pos_dim
        if self.use_entity_tag:
            dim += self.tag_dim
        if self.use_chunk_tag:
            dim += self.chunk_dim
        if self.use_path_flag:
            dim += 1
        if self.use_deprel:
            dim += n_deprels
        return dim

    def no_linguistic(self) -> "FeatureConfig":
        """Words and positions only (the reduced-feature configuration)."""
        return FeatureConfig(
            word_dim=self.word_dim,
            pos_dim=self.pos_dim,
            tag_dim=self.tag_dim,
            chunk_dim=self.chunk_dim,
            clip_window=self.clip_window,
            use_entity_tag=False,
            use_chunk_tag=False,
            use_path_flag=False,
            use_deprel=False,
        )


def position_index(i: int, anchor: int, clip_window: int) -> int:
    """Clamped relative distance mapped to a table row: clamp(i-anchor)+window."""
    d = max(-clip_window, min(clip_window, i - anchor))
    return d + clip_window


def embed_tokens(inst: RelationInstance, config, tables, vocab) -> ad.Tensor:
    """Stack the token feature vectors w_i into an (n, d_in) tensor.

    ``tables`` maps parameter names to Tensors; ``vocab`` supplies the word,
    tag, and dependency-relation index maps. A pure function of its inputs.
    """
    tables = ad.wrap_params(tables)
    sent = inst.sentence
    n = len(sent)
    dtype = tables["emb_word"].data.dtype
    word_ids = [vocab.word_id(t.form) for t in sent.tokens]
    parts = [ad.take_rows(tables["emb_word"], word_ids)]
    cw = config.clip_window
    parts.append(
        ad.take_rows(tables["emb_pos_s"], [position_index(i, inst.s, cw) for i in range(n)])
    )
    parts.append(
        ad.take_rows(tables["emb_pos_o"], [position_index(i, inst.o, cw) for i in range(n)])
    )
    if config.use_entity_tag:
        ids = [vocab.entity_tag_id(t.entity_tag) for t in sent.tokens]
        parts.append(ad.take_rows(tables["emb_ent"], ids))
    if config.use_chunk_tag:
        ids = [vocab.chunk_tag_id(t.chunk_tag) for t in sent.tokens]
        parts.append(ad.take_rows(tables["emb_chunk"], ids))
    if config.use_path_flag:
        flags = path_flags(sent.tree, inst.s, inst.o).astype(dtype).reshape(n, 1)
        parts.append(ad.Tensor(flags))
    if config.use_deprel:
        multi = dep_relation_multihot(sent.tree, vocab.deprel_index).astype(dtype)
        parts.append(ad.Tensor(multi))
    return ad.concat(parts, axis=1)


def _lstm_direction(xs: ad.Tensor, order, W: ad.Tensor, b: ad.Tensor, hidden: int):
    """One LSTM direction over the given time order; returns rows in time order.

    The input projection runs once for the whole sequence; the recurrence only
    multiplies the previous state by the recurrent block of W.
    """
    dtype = W.data.dtype
    d_in = xs.data.shape[1]
    Wx = ad.slice_rows(W, 0, d_in)
    Wh = ad.slice_rows(W, d_in, d_in + hidden)
    pre_in = ad.add(ad.matmul(xs, Wx), b)
    h = ad.Tensor(np.zeros((1, hidden), dtype=dtype))
    c = ad.Tensor(np.zeros((1, hidden), dtype=dtype))
    outputs: dict[int, ad.Tensor] = {}
    for t in order:
        pre = ad.add(ad.take_rows(pre_in, [t]), ad.matmul(h, Wh))
        i_g = ad.sigmoid(ad.slice_cols(pre, 0, hidden))
        f_g = ad.sigmoid(ad.slice_cols(pre, hidden, 2 * hidden))
        g_g = ad.tanh(ad.slice_cols(pre, 2 * hidden, 3 * hidden))
        o_g = ad.sigmoid(ad.slice_cols(pre, 3 * hidden, 4 * hidden))
        c = ad.add(ad.mul(f_g, c), ad.mul(i_g, g_g))
        h = ad.mul(o_g, ad.tanh(c))
        outputs[t] = h
    return [outputs[t] for t in sorted(outputs)]


def bilstm(xs, params, hidden: int) -> ad.Tensor:
    """Run both LSTM directions over (n, d_in) features -> (n, 2*hidden)."""
    xs = ad.as_tensor(xs)
    params = ad.wrap_params(params)
    n = xs.data.shape[0]
    fwd = _lstm_direction(xs, range(n), params["lstm_fw_W"], params["lstm_fw_b"], hidden)
    bwd = _lstm_direction(
        xs, range(n - 1, -1, -1), params["lstm_bw_W"], params["lstm_bw_b"], hidden
    )
    rows = [ad.concat([fwd[t], bwd[t]], axis=1) for t in range(n)]
    return ad.concat(rows, axis=0)
