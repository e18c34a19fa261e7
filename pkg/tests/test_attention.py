import numpy as np

from helpers import fd_grad, max_rel_err
from relex import autodiff as ad
from relex.attention import self_attention


def make_params(h_dim, d_a, rng, scale=0.5):
    params = {}
    for name in ("k", "q", "v"):
        params[f"attn_W{name}"] = rng.uniform(-scale, scale, (h_dim, d_a))
        params[f"attn_b{name}"] = np.zeros((1, d_a))
    return params


def test_single_token_attends_to_itself():
    rng = np.random.default_rng(0)
    params = make_params(3, 4, rng)
    H = rng.normal(size=(1, 3))
    Hp, w = self_attention(H, params)
    assert np.array_equal(w.data, [[1.0]])
    v = H @ params["attn_Wv"] + params["attn_bv"]
    assert np.allclose(Hp.data, v)


def test_identical_rows_give_uniform_weights_and_mean_value():
    rng = np.random.default_rng(1)
    params = make_params(3, 4, rng)
    H = np.tile(rng.normal(size=(1, 3)), (5, 1))
    Hp, w = self_attention(H, params)
    assert np.allclose(w.data, 1.0 / 5.0)
    V = H @ params["attn_Wv"] + params["attn_bv"]
    assert np.allclose(Hp.data, np.tile(V.mean(axis=0), (5, 1)))


def test_sigma_one_row():
    # q_1=[1,0], k_1=[1,0], k_2=[0,1] -> row 1 of the weights is softmax([1,0])
    params = {
        "attn_Wk": np.eye(2),
        "attn_bk": np.zeros((1, 2)),
        "attn_Wq": np.eye(2),
        "attn_bq": np.zeros((1, 2)),
        "attn_Wv": np.eye(2),
        "attn_bv": np.zeros((1, 2)),
    }
    H = np.array([[1.0, 0.0], [0.0, 1.0]])
    _, w = self_attention(H, params)
    assert abs(w.data[0, 0] - 0.7310585786300049) < 1e-9
    assert abs(w.data[0, 1] - 0.2689414213699951) < 1e-9


def test_rows_sum_to_one():
    rng = np.random.default_rng(2)
    params = make_params(6, 5, rng, scale=1.5)
    H = rng.normal(size=(7, 6))
    _, w = self_attention(H, params)
    assert np.max(np.abs(w.data.sum(axis=1) - 1.0)) < 1e-6
    assert np.all(w.data > 0)


def test_outputs_are_convex_combinations_of_values():
    rng = np.random.default_rng(3)
    params = make_params(4, 3, rng, scale=2.0)
    H = rng.normal(size=(6, 4))
    Hp, _ = self_attention(H, params)
    V = H @ params["attn_Wv"] + params["attn_bv"]
    lo, hi = V.min(axis=0), V.max(axis=0)
    assert np.all(Hp.data >= lo - 1e-12)
    assert np.all(Hp.data <= hi + 1e-12)


def test_permutation_equivariance():
    rng = np.random.default_rng(4)
    params = make_params(4, 3, rng, scale=1.0)
    H = rng.normal(size=(6, 4))
    perm = rng.permutation(6)
    Hp, w = self_attention(H, params)
    Hp_p, w_p = self_attention(H[perm], params)
    assert np.allclose(Hp_p.data, Hp.data[perm], atol=1e-12)
    assert np.allclose(w_p.data, w.data[np.ix_(perm, perm)], atol=1e-12)


def test_scaling_flag_divides_logits():
    rng = np.random.default_rng(5)
    params = make_params(4, 4, rng, scale=1.0)
    H = rng.normal(size=(3, 4))
    _, w_plain = self_attention(H, params, scale=False)
    _, w_scaled = self_attention(H, params, scale=True)
    assert not np.allclose(w_plain.data, w_scaled.data)
    # scaled weights are flatter
    assert w_scaled.data.max() < w_plain.data.max()


def test_projection_gradients_match_finite_differences():
    rng = np.random.default_rng(6)
    H = rng.normal(scale=0.8, size=(4, 3))

    def run(arrs):
        tape = ad.Tape()
        tensors = {k: ad.Tensor(v, tape) for k, v in arrs.items()}
        Hp, _ = self_attention(ad.Tensor(H, tape), tensors)
        return tape, tensors, ad.sum_all(ad.mul(Hp, Hp))

    def f(arrs):
        return float(run(arrs)[2].data)

    arrays = make_params(3, 4, rng, scale=0.7)
    numeric = fd_grad(f, arrays)
    tape, tensors, loss = run(arrays)
    grads = ad.backward(loss)
    for name in arrays:
        assert max_rel_err(grads[tensors[name]], numeric[name]) <= 1e-4, name
