"""Entity-conditioned control mechanism.

A nonnegative control vector p, generated from the two mention states,
gates H at the feature level; attention over the gated states pools a
summary m (the weighted sum runs over the ungated H by default), and a
second control vector c gates the attention-enriched states H'.
"""

from __future__ import annotations

from . import autodiff as ad


def control_filter(H, s: int, o: int, params):
    """p = relu(W_p [h_s || h_o]); returns (p, p-gated H)."""
    H = ad.as_tensor(H)
    params = ad.wrap_params(params)
    h_s = ad.take_rows(H, [s])
    h_o = ad.take_rows(H, [o])
    p = ad.relu(ad.add(ad.matmul(ad.concat([h_s, h_o], axis=1), params["ctl_Wp"]), params["ctl_bp"]))
    return p, ad.mul(H, p)


def control_gate(H, Hbar, Hp, s: int, o: int, params, pool_filtered: bool = False):
    """Token weights from the gated states, summary m, control c, gated H'.

    Returns (alpha, m, c, c-gated H'). ``pool_filtered`` switches the
    weighted sum from H (the default) to the gated states themselves.
    """
    H, Hbar, Hp = ad.as_tensor(H), ad.as_tensor(Hbar), ad.as_tensor(Hp)
    params = ad.wrap_params(params)
    n = H.data.shape[0]
    scores = ad.add(ad.matmul(Hbar, params["ctl_Wa"]), params["ctl_ba"])
    alpha = ad.softmax(ad.reshape(scores, (1, n)))
    m = ad.matmul(alpha, Hbar if pool_filtered else H)
    h_s = ad.take_rows(H, [s])
    h_o = ad.take_rows(H, [o])
    c = ad.relu(
        ad.add(ad.matmul(ad.concat([m, h_s, h_o], axis=1), params["ctl_Wc"]), params["ctl_bc"])
    )
    return alpha, m, c, ad.mul(Hp, c)
