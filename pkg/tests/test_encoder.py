import numpy as np
import pytest

from jointsurv.autodiff import Node
from jointsurv.data import NormalizationStats, PatientRecord
from jointsurv.encoder import (InputMode, assemble_inputs, grud_forward,
                               grud_imputed_input, init_grud, init_lstm,
                               input_width, lstm_forward, _grud_inputs)


def record(times, values, masks, **kw):
    values = np.asarray(values, dtype=np.float64)
    return PatientRecord(patient_id=kw.get("pid", "p0"),
                         times_minutes=np.asarray(times, dtype=np.float64),
                         values=values,
                         masks=np.asarray(masks, dtype=np.float64),
                         followup_days=kw.get("followup", 5.0),
                         event=kw.get("event", 1),
                         admission_weekday=0, admission_hour=12)


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


# ---------------------------------------------------------------------------
# input assembly


def test_featurized_is_definitional_concatenation():
    rec = record([30.0], [[1.0, 2.0]], [[1.0, 0.0]])
    out = assemble_inputs(rec, InputMode.FEATURIZED)
    np.testing.assert_array_equal(out, [[1.0, 2.0, 1.0, 0.0, 30.0]])


def test_featurized_gap_feature_zscored_with_stats():
    rec = record([30.0], [[1.0, 2.0]], [[1.0, 0.0]])
    stats = NormalizationStats(lab_mean=np.zeros(2), lab_std=np.ones(2),
                               gap_mean_hours=1.0, gap_std_hours=2.0)
    out = assemble_inputs(rec, InputMode.FEATURIZED, stats=stats)
    assert out[0, -1] == pytest.approx((0.5 - 1.0) / 2.0)


def test_static_last_plus_counts():
    rec = record([10.0, 20.0, 30.0, 40.0],
                 [[0.5, 2.0], [0.7, 2.0], [0.9, 2.0], [1.0, 2.0]],
                 [[1, 0], [1, 1], [1, 0], [0, 0]])
    out = assemble_inputs(rec, InputMode.STATIC_LAST_PLUS_COUNTS)
    np.testing.assert_array_equal(out, [1.0, 2.0, 3.0, 1.0])


def test_values_only_is_featurized_projection():
    rec = record([15.0, 45.0], [[0.1, -0.2], [0.3, 0.4]], np.ones((2, 2)))
    values = assemble_inputs(rec, InputMode.VALUES_ONLY)
    featurized = assemble_inputs(rec, InputMode.FEATURIZED)
    np.testing.assert_array_equal(values, featurized[:, :2])


def test_static_last_is_final_vector():
    rec = record([15.0, 45.0], [[0.1, -0.2], [0.3, 0.4]], np.ones((2, 2)))
    np.testing.assert_array_equal(assemble_inputs(rec, InputMode.STATIC_LAST),
                                  [0.3, 0.4])


def test_assemble_rejects_unimputed_record():
    rec = record([15.0], [[np.nan, 1.0]], [[0, 1]])
    with pytest.raises(ValueError):
        assemble_inputs(rec, InputMode.VALUES_ONLY)


def test_input_widths():
    assert input_width(InputMode.VALUES_ONLY, 3) == 3
    assert input_width(InputMode.FEATURIZED, 3) == 7
    assert input_width(InputMode.STATIC_LAST_PLUS_COUNTS, 3) == 6
    assert input_width(InputMode.GRUD_STYLE, 3) == 6


# ---------------------------------------------------------------------------
# LSTM


def test_lstm_zero_weights_gives_zero_hidden():
    params = init_lstm(np.random.default_rng(0), input_dim=3, hidden=4, n_layers=2)
    for p in params.parameters():
        p.value = np.zeros_like(p.value)
    out = lstm_forward(params, [Node(np.ones((2, 3))), Node(np.ones((2, 3)))])
    for h in out:
        np.testing.assert_array_equal(h.value, np.zeros((2, 4)))


def test_lstm_single_step_matches_hand_computation():
    rng = np.random.default_rng(1)
    params = init_lstm(rng, input_dim=3, hidden=2, n_layers=1)
    x = rng.normal(size=(1, 3))
    [h] = lstm_forward(params, [Node(x)])

    layer = params.layers[0]
    z = x @ layer.w_in.value + layer.bias.value
    i = sigmoid(z[:, 0:2])
    f = sigmoid(z[:, 2:4])
    g = np.tanh(z[:, 4:6])
    o = sigmoid(z[:, 6:8])
    c = i * g
    expected = o * np.tanh(c)
    np.testing.assert_allclose(h.value, expected, atol=1e-14)


def test_lstm_order_sensitivity():
    rng = np.random.default_rng(2)
    params = init_lstm(rng, input_dim=2, hidden=3, n_layers=1)
    a, b = rng.normal(size=(1, 2)), rng.normal(size=(1, 2))
    h_ab = lstm_forward(params, [Node(a), Node(b)])[-1].value
    h_ba = lstm_forward(params, [Node(b), Node(a)])[-1].value
    assert not np.allclose(h_ab, h_ba)


def test_lstm_deterministic():
    rng = np.random.default_rng(3)
    params = init_lstm(rng, input_dim=2, hidden=3, n_layers=2)
    steps = [Node(rng.normal(size=(2, 2))) for _ in range(3)]
    first = [h.value.copy() for h in lstm_forward(params, steps)]
    second = [h.value.copy() for h in lstm_forward(params, steps)]
    for a, b in zip(first, second):
        assert np.array_equal(a, b)


def test_lstm_width_mismatch_errors():
    params = init_lstm(np.random.default_rng(4), input_dim=3, hidden=2, n_layers=1)
    with pytest.raises(ValueError):
        lstm_forward(params, [Node(np.zeros((1, 2)))])
    with pytest.raises(ValueError):
        lstm_forward(params, [])


def test_lstm_forget_bias_initialised_to_one():
    params = init_lstm(np.random.default_rng(5), input_dim=3, hidden=4, n_layers=1)
    bias = params.layers[0].bias.value
    np.testing.assert_array_equal(bias[4:8], np.ones(4))
    np.testing.assert_array_equal(bias[:4], np.zeros(4))


# ---------------------------------------------------------------------------
# GRU-D


def _plain_gru_reference(params, xs, hidden):
    """Standard GRU on inputs [x; m] with the same packed weights."""
    h = np.zeros((xs[0].shape[0], hidden))
    out = []
    for x in xs:
        xz = x @ params.w_in.value + params.bias.value
        hz = h @ params.w_rec.value
        r = sigmoid(xz[:, :hidden] + hz[:, :hidden])
        z = sigmoid(xz[:, hidden:2 * hidden] + hz[:, hidden:2 * hidden])
        n = np.tanh(xz[:, 2 * hidden:] + r * hz[:, 2 * hidden:])
        h = (1 - z) * n + z * h
        out.append(h.copy())
    return out


def test_grud_reduces_to_plain_gru_when_fully_observed():
    rng = np.random.default_rng(6)
    params = init_grud(rng, n_labs=2, hidden=3, means=np.zeros(2))
    values = [rng.normal(size=(2, 2)) for _ in range(3)]
    ones = np.ones((2, 2))
    zeros = np.zeros((2, 2))
    out = grud_forward(params, values, [ones] * 3, [zeros] * 3, [zeros] * 3)
    ref = _plain_gru_reference(params, [np.concatenate([v, ones], axis=1)
                                        for v in values], hidden=3)
    for h, r in zip(out, ref):
        np.testing.assert_allclose(h.value, r, atol=1e-13)


def test_grud_large_delta_imputes_training_mean():
    rng = np.random.default_rng(7)
    means = np.array([2.5, -1.0])
    params = init_grud(rng, n_labs=2, hidden=3, means=means)
    params.decay_in_w.value = np.array([0.5, 0.5])
    x_hat = grud_imputed_input(params, Node(np.zeros((1, 2))), Node(np.zeros((1, 2))),
                               Node(np.full((1, 2), 1e6)), Node(np.ones((1, 2))))
    np.testing.assert_allclose(x_hat.value, means[None, :], atol=1e-12)


def test_grud_missing_step_hand_trace():
    rng = np.random.default_rng(8)
    params = init_grud(rng, n_labs=2, hidden=2, means=np.array([0.5, 0.5]))
    params.decay_in_w.value = np.array([0.3, 0.7])
    params.decay_in_b.value = np.array([0.1, 0.0])
    x = np.array([[1.0, 0.0]])
    m = np.array([[1.0, 0.0]])
    delta = np.array([[0.0, 2.0]])
    x_last = np.array([[0.8, -0.4]])
    [h] = grud_forward(params, [x], [m], [delta], [x_last])

    gamma_x = np.exp(-np.maximum(0.0, delta * params.decay_in_w.value
                                 + params.decay_in_b.value))
    x_hat = m * x + (1 - m) * (gamma_x * x_last + (1 - gamma_x) * params.means)
    gamma_h = np.exp(-np.maximum(0.0, delta @ params.decay_h_w.value
                                 + params.decay_h_b.value))
    h0 = gamma_h * np.zeros((1, 2))
    u = np.concatenate([x_hat, m], axis=1)
    xz = u @ params.w_in.value + params.bias.value
    hz = h0 @ params.w_rec.value
    r = sigmoid(xz[:, :2] + hz[:, :2])
    z = sigmoid(xz[:, 2:4] + hz[:, 2:4])
    n = np.tanh(xz[:, 4:6] + r * hz[:, 4:6])
    expected = (1 - z) * n + z * h0
    np.testing.assert_allclose(h.value, expected, atol=1e-14)


def test_grud_decay_rates_in_unit_interval():
    rng = np.random.default_rng(9)
    params = init_grud(rng, n_labs=3, hidden=2, means=np.zeros(3))
    for _ in range(200):
        delta = rng.uniform(0, 50, size=(1, 3))
        gamma = np.exp(-np.maximum(0.0, delta * params.decay_in_w.value
                                   + params.decay_in_b.value))
        assert np.all((gamma > 0) & (gamma <= 1.0))


def test_grud_negative_delta_errors():
    params = init_grud(np.random.default_rng(10), n_labs=2, hidden=2, means=np.zeros(2))
    zeros = np.zeros((1, 2))
    with pytest.raises(ValueError):
        grud_forward(params, [zeros], [zeros], [np.array([[-1.0, 0.0]])], [zeros])


def test_grud_delta_recursion():
    rec = record([60.0, 120.0, 240.0],
                 [[1.0, np.nan], [np.nan, 2.0], [3.0, np.nan]],
                 [[1, 0], [0, 1], [1, 0]])
    built = _grud_inputs(rec, feature_means=np.array([0.0, 0.0]))
    # lab 0: observed at steps 0 and 2; delta accumulates over the missing step
    np.testing.assert_allclose(built.deltas[:, 0], [0.0, 1.0, 3.0])
    # lab 1: observed at step 1 only
    np.testing.assert_allclose(built.deltas[:, 1], [0.0, 1.0, 2.0])
    np.testing.assert_allclose(built.last_observed[:, 0], [0.0, 1.0, 1.0])
    np.testing.assert_allclose(built.last_observed[:, 1], [0.0, 0.0, 2.0])


def test_encoded_length_matches_steps():
    rng = np.random.default_rng(11)
    params = init_lstm(rng, input_dim=2, hidden=3, n_layers=1)
    for n in (1, 4, 9):
        steps = [Node(rng.normal(size=(3, 2))) for _ in range(n)]
        out = lstm_forward(params, steps)
        assert len(out) == n
        assert all(h.value.shape == (3, 3) for h in out)
