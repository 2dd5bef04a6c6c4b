import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from superprune.dataset import FeatureMask, N_FEATURES, standardize_fit
from superprune.mlp import (MlpModel, ModelFormatError, SHIPPED_MODEL, TrainConfig, evaluate,
                            forward, from_dict, gradient_check, init, load, loss_and_grads,
                            metrics_from_predictions, roc_points, save, to_dict, train)


def separable(n=400, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 2))
    y = (X[:, 0] + 2 * X[:, 1] > 0).astype(int)
    return X, y


XOR_X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
XOR_Y = np.array([0, 1, 1, 0])


def zero_model(sizes):
    m = init(sizes)
    for w in m.weights:
        w[:] = 0.0
    return m


def test_init():
    a, b = init([14, 16, 32, 16, 1], 3), init([14, 16, 32, 16, 1], 3)
    assert all(np.array_equal(x, y) for x, y in zip(a.params(), b.params()))
    assert all(not bias.any() for bias in a.biases)
    for w in a.weights:
        n_in, n_out = w.shape
        assert np.abs(w).max() <= math.sqrt(6 / (n_in + n_out))
    assert not np.array_equal(init([2, 4, 1], 0).weights[0], init([2, 4, 1], 1).weights[0])


def test_forward_examples():
    assert forward(zero_model([3, 4, 1]), [1.0, -2.0, 5.0]) == 0.5
    m = init([1, 1, 1])
    m.weights[0][:] = 1.0
    m.weights[1][:] = 2.0
    m.biases[1][:] = -1.0
    want = 1 / (1 + math.exp(-(2 * math.tanh(0.5) - 1)))
    assert forward(m, [0.5]) == pytest.approx(want, abs=1e-15)


def test_loss_at_zero_model_is_log2():
    X, y = separable(10)
    loss, grads = loss_and_grads(zero_model([2, 4, 1]), X, y)
    assert loss == pytest.approx(math.log(2), abs=1e-15)
    assert len(grads) == 4


@pytest.mark.parametrize("sizes", [[2, 4, 1], [14, 16, 32, 16, 1]])
def test_gradient_check(sizes):
    rng = np.random.default_rng(0)
    X = rng.normal(size=(16, sizes[0]))
    y = rng.integers(0, 2, 16)
    m = init(sizes, 0)
    for b in m.biases:
        b[:] = rng.normal(0, 0.1, size=b.shape)
    assert gradient_check(m, X, y) < 1e-4


def test_gradient_check_zero_model_and_eps():
    X, y = separable(8)
    assert gradient_check(zero_model([2, 4, 1]), X, y) < 1e-4
    assert gradient_check(init([2, 4, 1], 1), X, y, eps=2e-5) < 1e-4


def test_separable_reaches_99():
    X, y = separable()
    m, curve = train(X, y, TrainConfig(seed=0))
    assert len(curve) == 400
    assert np.mean((m.predict_proba_scaled(X) >= 0.5) == y) >= 0.99
    assert curve[-1] < curve[0]


def test_xor_reaches_100():
    m, _ = train(XOR_X, XOR_Y, TrainConfig(seed=0))
    assert ((m.predict_proba_scaled(XOR_X) >= 0.5) == XOR_Y).all()


def test_train_is_deterministic():
    X, y = separable(100)
    cfg = TrainConfig(epochs=5, seed=4)
    a, ca = train(X, y, cfg)
    b, cb = train(X, y, cfg)
    assert ca == cb
    assert all(np.array_equal(p, q) for p, q in zip(a.params(), b.params()))


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=-1)


def test_metrics_hand_counts():
    m = metrics_from_predictions([1, 1, 0, 0, 0], [1, 0, 1, 0, 0])
    assert (m.tp, m.fn, m.fp, m.tn) == (1, 1, 1, 2)
    assert m.recall_valid == 0.5 and m.recall_invalid == pytest.approx(2 / 3)
    assert m.accuracy == 0.6
    assert m.precision == pytest.approx((0.5 + 2 / 3) / 2)


@pytest.fixture(scope="module")
def shipped():
    return load()


@pytest.fixture(scope="module")
def raw_rows():
    rng = np.random.default_rng(9)
    X = rng.uniform(0, 1, size=(300, N_FEATURES))
    X[:, 3:] = rng.integers(0, 4, size=(300, N_FEATURES - 3))
    return X, rng.integers(0, 2, 300)


def test_shipped_model_shape(shipped):
    assert shipped.layer_sizes == [14, 16, 32, 16, 1]
    assert shipped.mask.k == 14
    assert shipped.threshold == 1e-4


def test_threshold_zero_keeps_everything(shipped, raw_rows):
    X, y = raw_rows
    assert evaluate(shipped, X, y, 0.0).recall_valid == 1.0
    with pytest.raises(ValueError):
        evaluate(shipped, X, y, 1.5)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1))
def test_threshold_monotone(a, b):
    lo, hi = sorted((a, b))
    m = load()
    X = np.random.default_rng(1).uniform(0, 3, size=(200, N_FEATURES))
    p = m.predict_proba(X)
    assert np.all((p >= hi) <= (p >= lo))


def test_roc(shipped, raw_rows):
    X, y = raw_rows
    pts = roc_points(shipped, X, y)
    assert pts[0][1:] == (0.0, 0.0) and pts[-1][1:] == (1.0, 1.0)
    fprs, tprs = [p[1] for p in pts], [p[2] for p in pts]
    assert fprs == sorted(fprs) and tprs == sorted(tprs)
    with pytest.raises(ValueError):
        roc_points(shipped, X, np.ones(len(y)))


def test_save_load_bit_exact(tmp_path, shipped, raw_rows):
    path = tmp_path / "m.json"
    save(shipped, path)
    back = load(path)
    assert all(np.array_equal(p, q) for p, q in zip(shipped.params(), back.params()))
    assert back.mask == shipped.mask and back.threshold == shipped.threshold
    assert np.array_equal(back.predict_proba(raw_rows[0]), shipped.predict_proba(raw_rows[0]))
    assert to_dict(back) == json.loads(SHIPPED_MODEL.read_text())


def test_format_errors(shipped, tmp_path):
    d = to_dict(shipped)
    with pytest.raises(ModelFormatError):
        from_dict({**d, "version": 99})
    with pytest.raises(ModelFormatError):
        from_dict({**d, "mask": [0, 1, 2]})
    with pytest.raises(ModelFormatError):
        from_dict({k: v for k, v in d.items() if k != "weights"})
    bad = tmp_path / "bad.json"
    bad.write_text("not json")
    with pytest.raises(ModelFormatError):
        load(bad)


def test_model_validation():
    m = init([2, 3, 1])
    with pytest.raises(ValueError):
        MlpModel([2, 3, 1], m.weights, m.biases, threshold=2.0)
    with pytest.raises(ValueError):
        MlpModel([2, 3, 1], m.weights, m.biases, mask=FeatureMask((0, 1, 2)))
    with pytest.raises(ValueError):
        m.logits(np.zeros((1, 5)))


def test_prepare_scales_then_masks():
    rng = np.random.default_rng(0)
    X = rng.normal(5, 3, size=(50, N_FEATURES))
    s = standardize_fit(X)
    m = init([2, 3, 1])
    m = MlpModel(m.layer_sizes, m.weights, m.biases, FeatureMask((4, 9)), s)
    Z = m.prepare(X)
    assert np.allclose(Z, ((X - s.mean) / s.std)[:, [4, 9]])
