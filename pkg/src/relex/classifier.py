"""Aggregation vector, relation distribution, and the combined objective."""

from __future__ import annotations

from . import autodiff as ad


def aggregate(H, G, s: int, o: int) -> ad.Tensor:
    """o = [h_s || h_o || g_s || g_o || max over tokens of G], shape (1, d).

    G is the final per-token representation feeding the classifier (the
    gated H' in the full model; H' or H under ablations).
    """
    return ad.concat(
        [
            ad.take_rows(H, [s]),
            ad.take_rows(H, [o]),
            ad.take_rows(G, [s]),
            ad.take_rows(G, [o]),
            ad.max_rows(G),
        ],
        axis=1,
    )


def predict(o_vec, params, inner_relu: bool = False) -> ad.Tensor:
    """Two-layer feed-forward then softmax -> (1, K) label distribution.

    No nonlinearity between the layers by default; ``inner_relu`` inserts one.
    """
    params = ad.wrap_params(params)
    hidden = ad.add(ad.matmul(o_vec, params["cls_W1"]), params["cls_b1"])
    if inner_relu:
        hidden = ad.relu(hidden)
    logits = ad.add(ad.matmul(hidden, params["cls_W2"]), params["cls_b2"])
    return ad.softmax(logits)


def label_loss(P: ad.Tensor, y: int) -> ad.Tensor:
    """Negative log-likelihood -log P(y) of the gold label index."""
    picked = ad.slice_cols(P, y, y + 1)
    return ad.neg(ad.reshape(ad.log(picked), ()))


def total_loss(loss_label: ad.Tensor, loss_dep, lam: float) -> ad.Tensor:
    """L = L_label + lambda * L_dep. With lam == 0 the result is bit-identical
    to the label loss (0.0 * finite + x == x)."""
    if lam < 0:
        raise ValueError("trade-off weight must be nonnegative")
    if loss_dep is None or lam == 0:
        return loss_label
    return ad.add(loss_label, ad.mul(loss_dep, lam))
