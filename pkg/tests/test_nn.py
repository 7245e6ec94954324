import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from qewo import nn
from qewo.qsim import RngStream


def scalar_forward(W1, W2, x):
    """Loop-only reference for a 2-layer tanh net."""
    h = [math.tanh(sum(W1[i][j] * x[j] for j in range(len(x)))) for i in range(len(W1))]
    z = [sum(W2[c][i] * h[i] for i in range(len(h))) for c in range(len(W2))]
    top = max(z)
    e = [math.exp(v - top) for v in z]
    s = sum(e)
    return [v / s for v in e]


def test_forward_matches_scalar_oracle():
    W1 = [[0.5, -0.3], [0.8, 0.1]]
    W2 = [[1.0, -1.0], [-0.5, 0.7]]
    X = np.array([[1.0, 2.0], [-0.5, 0.25], [0.0, 0.0]])
    model = nn.MlpModel([W1, W2])
    P = nn.forward(model, X)
    for row, x in zip(P, X):
        np.testing.assert_allclose(row, scalar_forward(W1, W2, x), atol=1e-12)
    # zero input gives zero logits -> uniform
    np.testing.assert_allclose(P[2], [0.5, 0.5], atol=1e-15)


def test_hand_computed_loss():
    model = nn.MlpModel([[[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 1.0]]])
    X = np.array([[1.0, 0.0]])
    Y = np.array([[1.0, 0.0]])
    t = math.tanh(1.0)
    p_true = math.exp(t) / (math.exp(t) + 1.0)
    expected = -math.log(p_true + nn.EPS) + 1e-4 * 4.0
    assert nn.loss(nn.forward(model, X), Y, model) == pytest.approx(expected, abs=1e-12)


def test_softmax_examples():
    np.testing.assert_allclose(nn.softmax(np.zeros((1, 3))), [[1 / 3] * 3])
    P = nn.softmax(np.array([[1000.0, 0.0]]))
    assert np.all(np.isfinite(P)) and P[0, 0] == pytest.approx(1.0)


@settings(max_examples=100, deadline=None)
@given(arrays(float, st.tuples(st.integers(1, 5), st.integers(1, 8)),
              elements=st.floats(-700, 700)))
def test_softmax_rows_sum_to_one(z):
    P = nn.softmax(z)
    assert np.all(P >= 0)
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)


def test_cross_entropy_examples():
    Y = np.eye(3)
    assert nn.cross_entropy(Y, Y) == pytest.approx(0.0, abs=1e-11)
    P = np.full((1, 3), 1 / 3)
    assert nn.cross_entropy(P, Y[:1]) == pytest.approx(math.log(3), abs=1e-9)


def test_loss_shape_mismatch():
    model = nn.MlpModel([np.ones((2, 2)), np.ones((3, 2))])
    with pytest.raises(ValueError):
        nn.loss(np.ones((2, 3)) / 3, np.eye(2), model)


def test_accuracy():
    P = np.array([[0.9, 0.1], [0.2, 0.8], [0.6, 0.4], [0.3, 0.7]])
    Y = np.array([[1, 0], [0, 1], [0, 1], [0, 1]])
    assert nn.accuracy(P, Y) == 75.0


def test_model_validates_chaining():
    with pytest.raises(ValueError):
        nn.MlpModel([np.ones((4, 3)), np.ones((2, 5))])
    with pytest.raises(ValueError):
        nn.MlpModel([np.ones((2, 2))], activation="softsign")


def test_input_width_checked():
    model = nn.MlpModel([np.ones((4, 3)), np.ones((2, 4))])
    with pytest.raises(ValueError):
        nn.forward(model, np.ones((5, 4)))


def test_shape_plan_and_sizes():
    assert nn.shape_plan([13, 32, 3]) == [(32, 13), (3, 32)]
    model = nn.init_weights(nn.shape_plan([64, 64, 32, 16, 10]), "uniform", RngStream(0))
    assert model.sizes == [64, 64, 32, 16, 10]
    assert model.n_weights == 64 * 64 + 64 * 32 + 32 * 16 + 16 * 10


def test_flat_roundtrip():
    model = nn.init_weights(nn.shape_plan([5, 4, 3]), "xavier", RngStream(1))
    back = nn.MlpModel.from_flat(model.flat(), model.shapes)
    for a, b in zip(model.layers, back.layers):
        np.testing.assert_array_equal(a, b)


def test_uniform_init_bounds_and_determinism():
    shapes = nn.shape_plan([13, 32, 3])
    a = nn.init_weights(shapes, "uniform", RngStream(42))
    b = nn.init_weights(shapes, "uniform", RngStream(42))
    for wa, wb in zip(a.layers, b.layers):
        np.testing.assert_array_equal(wa, wb)
        assert np.all(np.abs(wa) <= 1.0)


def test_xavier_and_kaiming_scale():
    w = nn.init_weights([(200, 300)], "xavier", RngStream(2)).layers[0]
    bound = math.sqrt(6 / 500)
    assert np.all(np.abs(w) <= bound)
    assert np.std(w) == pytest.approx(bound / math.sqrt(3), rel=0.02)
    k = nn.init_weights([(200, 300)], "kaiming", RngStream(3)).layers[0]
    assert np.std(k) == pytest.approx(math.sqrt(2 / 300), rel=0.02)
    with pytest.raises(ValueError):
        nn.init_weights([(2, 2)], "orthogonal", RngStream(0))


@pytest.mark.parametrize("kind", nn.ACTIVATIONS)
def test_activation_derivatives_match_finite_differences(kind):
    z = np.linspace(-3, 3, 41) + 0.013
    h = 1e-6
    phi = nn.activation(kind)
    numeric = (phi(z + h) - phi(z - h)) / (2 * h)
    np.testing.assert_allclose(nn.activation_derivative(kind, z), numeric, atol=1e-7)


def test_swish_and_gelu_values():
    assert nn.swish(np.array([0.0]))[0] == 0.0
    assert nn.gelu(np.array([0.0]))[0] == 0.0
    assert nn.swish(np.array([-800.0]))[0] == pytest.approx(0.0)
    assert nn.gelu(np.array([3.0]))[0] == pytest.approx(2.99636, abs=1e-4)


def test_dropout_mask_is_inverted():
    model = nn.MlpModel([np.ones((50, 4)), np.ones((2, 50))])
    mask = nn.sample_dropout_mask(model, 0.2, RngStream(0), 400)
    m = mask.masks[0]
    assert set(np.unique(m)) <= {0.0, 1.25}
    assert m.mean() == pytest.approx(1.0, abs=0.03)
    with pytest.raises(ValueError):
        nn.sample_dropout_mask(model, 1.0, RngStream(0), 3)


def test_mask_shape_checked():
    model = nn.MlpModel([np.ones((3, 2)), np.ones((2, 3))])
    mask = nn.sample_dropout_mask(model, 0.2, RngStream(0), 4)
    with pytest.raises(ValueError):
        nn.forward(model, np.ones((5, 2)), mask)


def test_l2_term():
    model = nn.MlpModel([[[3.0, 4.0]], [[1.0], [0.0]]])
    assert model.squared_norm() == 26.0
