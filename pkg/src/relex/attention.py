"""Single-head self-attention over the BiLSTM states.

Key/query/value projections of each hidden vector, unscaled dot-product
logits (a config flag can enable 1/sqrt(d) scaling, default off), row-wise
softmax including the self position, and weighted sums of the values.
"""

from __future__ import annotations

from . import autodiff as ad


def self_attention(H, params, scale: bool = False):
    """Return (H', attention weights); weights row i is token i's distribution."""
    H = ad.as_tensor(H)
    params = ad.wrap_params(params)
    K = ad.add(ad.matmul(H, params["attn_Wk"]), params["attn_bk"])
    Q = ad.add(ad.matmul(H, params["attn_Wq"]), params["attn_bq"])
    V = ad.add(ad.matmul(H, params["attn_Wv"]), params["attn_bv"])
    logits = ad.matmul(Q, ad.transpose(K))
    if scale:
        logits = ad.mul(logits, 1.0 / float(K.data.shape[1]) ** 0.5)
    weights = ad.softmax(logits)
    return ad.matmul(weights, V), weights
