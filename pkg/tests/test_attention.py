import numpy as np
import pytest

from rcn import attention, tensor as T
from rcn.attention import ReasonAttentionParams
from rcn.encoder import EncodedSequence
from rcn.errors import DegenerateInputError, ShapeError


def make_encoded(h_data, mask):
    return EncodedSequence(h_seq=T.as_tensor(h_data), mask=np.asarray(mask, dtype=bool))


def make_params(width, length, kappa, rng=None, w1=None, w2=None, b=None):
    rng = rng or np.random.default_rng(0)
    p = ReasonAttentionParams.init(width, length, kappa, rng)
    if w1 is not None:
        p.w1 = T.as_tensor(w1)
    if w2 is not None:
        p.w2 = T.as_tensor(w2)
    if b is not None:
        p.b = T.as_tensor(b)
    return p


# --- scalar-loop oracles (independent of the tensor library) ---------------

def oracle_relatedness(h, w1, mask):
    length, width = h.shape
    m = np.zeros((length, width))
    for i in range(length):
        for q in range(width):
            s = 0.0
            for p in range(width):
                s += h[i, p] * w1[p, q]
            m[i, q] = s
    c = np.zeros((length, length))
    for i in range(length):
        for j in range(length):
            s = 0.0
            for q in range(width):
                s += m[i, q] * h[j, q]
            c[i, j] = np.tanh(s) * (1.0 if (mask[i] and mask[j]) else 0.0)
    return c


def oracle_scores(c, w2, b, mask):
    length, kappa = w2.shape
    e = np.zeros((length, kappa))
    for i in range(length):
        for k in range(kappa):
            s = 0.0
            for j in range(length):
                s += c[i, j] * w2[j, k]
            s += b[k]
            if not mask[i]:
                s += T.NEG_INF
            e[i, k] = s
    return e


def oracle_reasons(h, a):
    length, width = h.shape
    kappa = a.shape[1]
    r = np.zeros((width, kappa))
    for d in range(width):
        for k in range(kappa):
            s = 0.0
            for i in range(length):
                s += h[i, d] * a[i, k]
            r[d, k] = s
    return r


def random_instance(rng):
    length = int(rng.integers(2, 9))    # L <= 8
    h = int(rng.integers(1, 6))         # h <= 5
    kappa = int(rng.integers(1, 4))     # kappa <= 3
    h_data = rng.standard_normal((length, 2 * h))
    mask = np.zeros(length, dtype=bool)
    mask[rng.choice(length, size=int(rng.integers(1, length + 1)), replace=False)] = True
    h_data[~mask] = 0.0
    w1 = rng.standard_normal((2 * h, 2 * h))
    w2 = rng.standard_normal((length, kappa))
    b = rng.standard_normal(kappa)
    return h_data, mask, w1, w2, b


# --- pairwise relatedness ---------------------------------------------------

def test_relatedness_zero_w1_gives_zero():
    rng = np.random.default_rng(1)
    enc = make_encoded(rng.standard_normal((1, 4, 6)), np.ones((1, 4), dtype=bool))
    c = attention.pairwise_relatedness(enc, T.zeros((6, 6)))
    np.testing.assert_array_equal(c.data, np.zeros((1, 4, 4)))


def test_relatedness_single_position_identity_w1():
    rng = np.random.default_rng(2)
    h1 = rng.standard_normal(6)
    h_data = np.zeros((3, 6))
    h_data[1] = h1
    enc = make_encoded(h_data, [False, True, False])
    c = attention.pairwise_relatedness(enc, T.Tensor(np.eye(6)))
    assert np.isclose(c.data[1, 1], np.tanh(h1 @ h1), atol=1e-12)
    masked = np.ones((3, 3), dtype=bool)
    masked[1, 1] = False
    assert np.all(c.data[masked] == 0.0)


def test_relatedness_matches_scalar_loop_exactly():
    rng = np.random.default_rng(3)
    for _ in range(30):
        h_data, mask, w1, _, _ = random_instance(rng)
        enc = make_encoded(h_data, mask)
        got = attention.pairwise_relatedness(enc, T.Tensor(w1)).data
        assert np.array_equal(got, oracle_relatedness(h_data, w1, mask))


def test_relatedness_shape_error():
    enc = make_encoded(np.zeros((2, 4)), [True, True])
    with pytest.raises(ShapeError):
        attention.pairwise_relatedness(enc, T.zeros((3, 3)))


def test_relatedness_entries_bounded_by_tanh():
    rng = np.random.default_rng(4)
    h_data, mask, w1, _, _ = random_instance(rng)
    # tanh bounds hold even at scales where float64 saturates to exactly +-1
    big = attention.pairwise_relatedness(make_encoded(h_data * 10, mask), T.Tensor(w1)).data
    assert np.all(big >= -1.0) and np.all(big <= 1.0)
    # at moderate scale the open interval holds as in real arithmetic
    c = attention.pairwise_relatedness(make_encoded(h_data * 0.2, mask), T.Tensor(w1)).data
    unmasked = np.outer(mask, mask)
    assert np.all(np.abs(c[unmasked]) < 1.0)
    assert np.all(c[~unmasked] == 0.0)


# --- reason scores -----------------------------------------------------------

def test_scores_zero_relatedness_gives_bias():
    mask = np.array([True, True, False])
    params = make_params(4, 3, 2, w2=np.zeros((3, 2)), b=np.array([0.5, -1.5]))
    scores = attention.reason_scores(T.zeros((3, 3)), params, mask)
    np.testing.assert_array_equal(scores.data[:2], [[0.5, -1.5], [0.5, -1.5]])
    assert np.all(scores.data[2] <= T.NEG_INF / 2)


def test_scores_output_shape():
    rng = np.random.default_rng(5)
    h_data, mask, w1, w2, b = random_instance(rng)
    length, kappa = w2.shape
    params = make_params(h_data.shape[1], length, kappa, w2=w2, b=b)
    enc = make_encoded(h_data, mask)
    c = attention.pairwise_relatedness(enc, T.Tensor(w1))
    assert attention.reason_scores(c, params, mask).shape == (length, kappa)


def test_scores_match_scalar_loop_exactly():
    rng = np.random.default_rng(6)
    for _ in range(30):
        h_data, mask, w1, w2, b = random_instance(rng)
        c = oracle_relatedness(h_data, w1, mask)
        params = make_params(h_data.shape[1], *w2.shape, w2=w2, b=b)
        got = attention.reason_scores(T.Tensor(c), params, mask).data
        assert np.array_equal(got, oracle_scores(c, w2, b, mask))


# --- attention weights -------------------------------------------------------

def test_attention_uniform_over_unmasked():
    mask = np.ones(4, dtype=bool)
    a = attention.attention_weights(T.Tensor(np.full((4, 3), 2.0)), mask)
    np.testing.assert_allclose(a.data, np.full((4, 3), 0.25), atol=1e-15)


def test_attention_column_sums_and_masked_zero():
    rng = np.random.default_rng(7)
    for _ in range(20):
        h_data, mask, w1, w2, b = random_instance(rng)
        e = oracle_scores(oracle_relatedness(h_data, w1, mask), w2, b, mask)
        a = attention.attention_weights(T.Tensor(e), mask).data
        np.testing.assert_allclose(a.sum(axis=0), np.ones(w2.shape[1]), atol=1e-12)
        assert np.all(a[~mask] == 0.0)
        assert np.all(a >= 0.0)


def test_attention_all_masked_raises():
    with pytest.raises(DegenerateInputError):
        attention.attention_weights(T.zeros((3, 2)), np.zeros(3, dtype=bool))


# --- reason matrix -----------------------------------------------------------

def test_reason_matrix_one_hot_selects_state():
    rng = np.random.default_rng(8)
    h_data = rng.standard_normal((4, 6))
    enc = make_encoded(h_data, np.ones(4, dtype=bool))
    a = np.zeros((4, 2))
    a[2, 0] = 1.0
    a[0, 1] = 1.0
    r = attention.reason_matrix(enc, T.Tensor(a)).data
    np.testing.assert_array_equal(r[:, 0], h_data[2])
    np.testing.assert_array_equal(r[:, 1], h_data[0])


def test_reason_matrix_uniform_averages():
    rng = np.random.default_rng(9)
    h_data = rng.standard_normal((5, 4))
    enc = make_encoded(h_data, np.ones(5, dtype=bool))
    a = np.full((5, 1), 0.2)
    r = attention.reason_matrix(enc, T.Tensor(a)).data
    np.testing.assert_allclose(r[:, 0], h_data.mean(axis=0), atol=1e-12)


def test_reason_matrix_matches_scalar_loop_exactly():
    rng = np.random.default_rng(10)
    for _ in range(30):
        h_data, mask, w1, w2, b = random_instance(rng)
        e = oracle_scores(oracle_relatedness(h_data, w1, mask), w2, b, mask)
        a = attention.attention_weights(T.Tensor(e), mask).data
        enc = make_encoded(h_data, mask)
        got = attention.reason_matrix(enc, T.Tensor(a)).data
        assert np.array_equal(got, oracle_reasons(h_data, a))


def test_reason_matrix_shape_error():
    enc = make_encoded(np.zeros((3, 4)), np.ones(3, dtype=bool))
    with pytest.raises(ShapeError):
        attention.reason_matrix(enc, T.zeros((5, 2)))


# --- end-to-end properties ---------------------------------------------------

def test_masked_positions_are_inert_end_to_end():
    # swapping the token under a masked slot must not move C, E, A or R,
    # because the encoder zeroes masked rows and the attention masks them
    from rcn.encoder import BiLstmParams, encode_sequence

    rng = np.random.default_rng(11)
    emb = rng.standard_normal((9, 4))
    emb[0] = 0.0
    lstm = BiLstmParams.init(4, 3, rng)
    mask = np.array([[True, True, False, False]])
    idx_pad = np.array([[2, 5, 0, 0]])
    idx_garbage = np.array([[2, 5, 7, 8]])
    params = make_params(6, 4, 2, rng)
    params.w2 = T.Tensor(rng.standard_normal((4, 2)))
    params.b = T.Tensor(rng.standard_normal(2))
    out_pad = attention.reason_encoder(encode_sequence(idx_pad, mask, emb, lstm), params)
    out_garbage = attention.reason_encoder(encode_sequence(idx_garbage, mask, emb, lstm), params)
    for field in ("relatedness", "scores", "attention", "reasons"):
        np.testing.assert_array_equal(getattr(out_pad, field).data,
                                      getattr(out_garbage, field).data)


def test_kappa_one_degenerates_to_single_vector():
    rng = np.random.default_rng(12)
    h_data = rng.standard_normal((4, 6))
    enc = make_encoded(h_data, np.ones(4, dtype=bool))
    params = make_params(6, 4, 1, rng)
    out = attention.reason_encoder(enc, params)
    assert out.attention.shape == (4, 1)
    assert out.reasons.shape == (6, 1)


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(13)
    length, h, kappa = 6, 4, 3
    mask = np.ones(length, dtype=bool)
    mask[4:] = False
    h_param = T.parameter(np.where(mask[:, None], rng.standard_normal((length, 2 * h)), 0.0))
    params = ReasonAttentionParams.init(2 * h, length, kappa, rng)
    params.w2 = T.parameter(rng.standard_normal((length, kappa)) * 0.3)
    params.b = T.parameter(rng.standard_normal(kappa) * 0.3)

    def build():
        enc = EncodedSequence(h_seq=h_param, mask=mask)
        out = attention.reason_encoder(enc, params)
        return T.sum_all(T.mul(out.reasons, out.reasons))

    tensors = [params.w1, params.w2, params.b, h_param]
    assert T.grad_check(build, tensors) < 1e-4
