import numpy as np
import pytest
from sklearn.base import clone
from sklearn.utils.estimator_checks import check_get_params_invariance

from synthetic_corpus import synthetic_pairs

from rcn.estimator import RCNClassifier


def _xy(n_pairs=80, seed=0):
    data = synthetic_pairs(n_pairs=n_pairs, seed=seed, per_stance=30)
    X = [(p.p.text, p.q.text, p.topic) for p in data]
    y = [p.label for p in data]
    return X, y


def _small_estimator(**over):
    base = dict(hidden_size=4, max_len=10, topic_max_len=4, n_reasons=2,
                learning_rate=3e-3, dropout=0.0, patience=3, batch_size=16,
                max_epochs=4, ff_hidden=6, random_state=0)
    base.update(over)
    return RCNClassifier(**base)


def test_get_params_round_trip_and_clone():
    est = _small_estimator()
    params = est.get_params()
    assert params["hidden_size"] == 4 and params["n_reasons"] == 2
    cloned = clone(est)
    assert cloned.get_params() == params
    check_get_params_invariance("RCNClassifier", est)


def test_fit_predict_shapes_and_labels():
    X, y = _xy()
    est = _small_estimator().fit(X, y)
    proba = est.predict_proba(X[:10])
    assert proba.shape == (10, 3)
    np.testing.assert_allclose(proba.sum(axis=1), np.ones(10), atol=1e-12)
    preds = est.predict(X[:10])
    assert set(preds) <= {"Agree", "Disagree", "Neither"}
    assert list(est.classes_) == ["Agree", "Disagree", "Neither"]


def test_integer_labels_round_trip():
    X, y = _xy()
    to_int = {"Agree": 0, "Disagree": 1, "Neither": 2}
    est = _small_estimator().fit(X, [to_int[v] for v in y])
    assert list(est.classes_) == [0, 1, 2]
    assert est.predict(X[:5]).dtype.kind in "iu"


def test_score_is_accuracy():
    X, y = _xy()
    est = _small_estimator(max_epochs=6).fit(X, y)
    score = est.score(X, y)
    manual = np.mean(est.predict(X) == np.array(y))
    assert score == pytest.approx(manual)


def test_unfitted_predict_raises():
    from sklearn.exceptions import NotFittedError
    with pytest.raises(NotFittedError):
        _small_estimator().predict_proba([("a", "b", "c")])


def test_input_validation():
    est = _small_estimator()
    with pytest.raises(ValueError):
        est.fit([("only", "two")], ["Agree"])
    with pytest.raises(ValueError):
        est.fit([("a", "b", "c")], ["Maybe"])
    with pytest.raises(ValueError):
        est.fit([], [])


def test_fit_is_deterministic_under_random_state():
    X, y = _xy(n_pairs=40)
    a = _small_estimator(max_epochs=2).fit(X, y).predict_proba(X[:8])
    b = _small_estimator(max_epochs=2).fit(X, y).predict_proba(X[:8])
    np.testing.assert_array_equal(a, b)


def test_baseline_architecture_fits():
    X, y = _xy(n_pairs=40)
    est = _small_estimator(architecture="bilstm", max_epochs=2).fit(X, y)
    assert est.predict_proba(X[:4]).shape == (4, 3)
