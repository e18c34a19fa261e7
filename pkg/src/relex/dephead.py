"""All-pairs dependency-edge probability head and its auxiliary loss.

Edge probabilities are computed for every ordered token pair (i, j),
diagonal included, from the ordered concatenation [h'_i, h'_j]; the loss is
the negated summed Bernoulli log-likelihood against the symmetric 0/1
adjacency target (batch code averages per-instance losses, which supplies
the 1/T normalization).
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad

_NONLINEARITIES = {"tanh": ad.tanh, "relu": ad.relu}


def edge_probs(Hp, params, nonlinearity: str = "tanh") -> ad.Tensor:
    """(n, n) matrix of edge probabilities, each strictly inside (0, 1)."""
    Hp = ad.as_tensor(Hp)
    params = ad.wrap_params(params)
    g = _NONLINEARITIES[nonlinearity]
    n = Hp.data.shape[0]
    left = ad.take_rows(Hp, np.repeat(np.arange(n), n))
    right = ad.take_rows(Hp, np.tile(np.arange(n), n))
    pairs = ad.concat([left, right], axis=1)
    hidden = g(ad.add(ad.matmul(pairs, params["dep_W1"]), params["dep_b1"]))
    logits = ad.add(ad.matmul(hidden, params["dep_W2"]), params["dep_b2"])
    probs = ad.sigmoid(logits)
    # keep the strictly-inside-(0,1) invariant under float32 saturation
    eps = float(np.finfo(probs.data.dtype).eps)
    return ad.reshape(ad.clip(probs, eps, 1.0 - eps), (n, n))


def dep_loss(ahat: ad.Tensor, target: np.ndarray) -> ad.Tensor:
    """Negated edge log-likelihood for one instance; always >= 0."""
    if ahat.data.shape != target.shape:
        raise ValueError(
            f"edge probabilities {ahat.data.shape} vs target {target.shape}"
        )
    if np.any(ahat.data <= 0.0) or np.any(ahat.data >= 1.0):
        raise ValueError("edge probabilities must lie strictly inside (0, 1)")
    a = np.asarray(target, dtype=ahat.data.dtype)
    on = ad.mul(ad.log(ahat), a)
    off = ad.mul(ad.log(ad.add(1.0, ad.neg(ahat))), 1.0 - a)
    return ad.neg(ad.sum_all(ad.add(on, off)))
