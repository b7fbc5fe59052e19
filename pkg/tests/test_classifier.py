import numpy as np
import pytest

from rcn import classifier, tensor as T
from rcn.classifier import ClassifierParams
from rcn.errors import DataError, ShapeError


def oracle_compare(rp, rq):
    width, kappa = rp.shape
    muls, subs = [], []
    for i in range(kappa):
        for j in range(kappa):
            muls.append(rp[:, i] * rq[:, j])
            d = rp[:, i] - rq[:, j]
            subs.append(d * d)
    s_mul = np.empty(width)
    s_sub = np.empty(width)
    for d in range(width):
        s_mul[d] = max(v[d] for v in muls)
        s_sub[d] = max(v[d] for v in subs)
    return s_mul, s_sub


def test_compare_identical_kappa_one_gives_zero_sub():
    rng = np.random.default_rng(0)
    r = T.Tensor(rng.standard_normal((6, 1)))
    out = classifier.compare_reasons(r, r)
    np.testing.assert_array_equal(out.s_sub.data, np.zeros(6))
    np.testing.assert_array_equal(out.s_mul.data, r.data[:, 0] ** 2)


def test_compare_identical_matrices_sub_nonnegative():
    rng = np.random.default_rng(1)
    r = T.Tensor(rng.standard_normal((4, 3)))
    out = classifier.compare_reasons(r, r)
    assert np.all(out.s_sub.data >= 0.0)


def test_compare_swap_symmetry():
    rng = np.random.default_rng(2)
    rp = T.Tensor(rng.standard_normal((5, 3)))
    rq = T.Tensor(rng.standard_normal((5, 3)))
    a = classifier.compare_reasons(rp, rq)
    b = classifier.compare_reasons(rq, rp)
    np.testing.assert_array_equal(a.s.data, b.s.data)


def test_compare_matches_brute_force_loop():
    rng = np.random.default_rng(3)
    for _ in range(25):
        rp = rng.standard_normal((4, 3))
        rq = rng.standard_normal((4, 3))
        out = classifier.compare_reasons(T.Tensor(rp), T.Tensor(rq))
        s_mul, s_sub = oracle_compare(rp, rq)
        assert np.array_equal(out.s_mul.data, s_mul)
        assert np.array_equal(out.s_sub.data, s_sub)
        assert np.array_equal(out.s.data, np.concatenate([s_mul, s_sub]))


def test_compare_shape_mismatch():
    with pytest.raises(ShapeError):
        classifier.compare_reasons(T.zeros((4, 2)), T.zeros((4, 3)))


def test_compare_s_concatenation_order():
    rng = np.random.default_rng(4)
    rp = T.Tensor(rng.standard_normal((3, 2)))
    rq = T.Tensor(rng.standard_normal((3, 2)))
    out = classifier.compare_reasons(rp, rq)
    np.testing.assert_array_equal(out.s.data[:3], out.s_mul.data)
    np.testing.assert_array_equal(out.s.data[3:], out.s_sub.data)


def _zero_classifier(input_size=8, hidden=5):
    z = T.Tensor
    return ClassifierParams(w1=z(np.zeros((input_size, hidden))), b1=z(np.zeros(hidden)),
                            w2=z(np.zeros((hidden, 3))), b2=z(np.zeros(3)))


def test_classify_zero_params_uniform():
    pred = classifier.classify(T.zeros((2, 8)), _zero_classifier())
    np.testing.assert_allclose(pred.probabilities.data, np.full((2, 3), 1.0 / 3.0), atol=1e-15)


def test_classify_probabilities_sum_to_one():
    rng = np.random.default_rng(5)
    params = ClassifierParams.init(8, 5, rng)
    pred = classifier.classify(T.Tensor(rng.standard_normal((4, 8))), params)
    np.testing.assert_allclose(pred.probabilities.data.sum(axis=1), np.ones(4), atol=1e-12)
    assert np.all(pred.probabilities.data >= 0.0)


def test_classify_shift_invariance():
    rng = np.random.default_rng(6)
    logits = rng.standard_normal((3, 3))
    a = T.softmax_rows(T.Tensor(logits)).data
    b = T.softmax_rows(T.Tensor(logits + 7.5)).data
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_loss_perfect_prediction_zero():
    probs = T.Tensor(np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]))
    loss = classifier.cross_entropy_loss(probs, [0, 2], [], l2=0.0)
    assert loss.item() == 0.0


def test_loss_uniform_single_sample_ln3():
    probs = T.Tensor(np.full((1, 3), 1.0 / 3.0))
    loss = classifier.cross_entropy_loss(probs, [1], [], l2=0.0)
    assert np.isclose(loss.item(), np.log(3.0), atol=1e-12)


def test_loss_bad_label_raises():
    probs = T.Tensor(np.full((1, 3), 1.0 / 3.0))
    with pytest.raises(DataError):
        classifier.cross_entropy_loss(probs, [3], [], l2=0.0)


def test_loss_nonnegative_and_monotone_in_true_prob():
    last = None
    for p_true in np.linspace(0.05, 0.95, 10):
        rest = (1.0 - p_true) / 2.0
        probs = T.Tensor(np.array([[p_true, rest, rest]]))
        value = classifier.cross_entropy_loss(probs, [0], [], l2=0.0).item()
        assert value >= 0.0
        if last is not None:
            assert value < last
        last = value


def test_loss_l2_term_matches_brute_force():
    rng = np.random.default_rng(7)
    params = [T.parameter(rng.standard_normal((3, 2))), T.parameter(rng.standard_normal(4))]
    probs = T.Tensor(np.full((2, 3), 1.0 / 3.0))
    lam = 0.37
    with_reg = classifier.cross_entropy_loss(probs, [0, 1], params, l2=lam).item()
    without = classifier.cross_entropy_loss(probs, [0, 1], [], l2=0.0).item()
    brute = sum(float((p.data ** 2).sum()) for p in params)
    assert np.isclose(with_reg - without, lam * brute, rtol=1e-12)


def test_loss_gradient_matches_finite_differences():
    rng = np.random.default_rng(8)
    params = ClassifierParams.init(6, 4, rng)
    s_input = T.parameter(rng.standard_normal((3, 6)))
    labels = [0, 2, 1]
    trainable = [t for _, t in params.named_tensors("clf")] + [s_input]

    def build():
        pred = classifier.classify(s_input, params)
        return classifier.cross_entropy_loss(pred.probabilities, labels, trainable, l2=0.01)

    assert T.grad_check(build, trainable) < 1e-4


def test_compare_gradient_matches_finite_differences():
    rng = np.random.default_rng(9)
    rp = T.parameter(rng.standard_normal((4, 2)))
    rq = T.parameter(rng.standard_normal((4, 2)))

    def build():
        out = classifier.compare_reasons(rp, rq)
        return T.sum_all(T.mul(out.s, out.s))

    assert T.grad_check(build, [rp, rq]) < 1e-4
