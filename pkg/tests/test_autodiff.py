import numpy as np
import pytest

from jointsurv import autodiff as ad
from jointsurv.autodiff import (AdamState, DomainError, Node, NonFiniteError,
                                Parameter, adam_step, backward,
                                finite_difference_check)


def test_primitive_identities():
    assert ad.sigmoid(Node(0.0)).item() == 0.5
    np.testing.assert_allclose(ad.softmax(Node([0.0, 0.0, 0.0])).value,
                               [1 / 3, 1 / 3, 1 / 3])
    assert ad.log(ad.exp(Node(2.0))).item() == pytest.approx(2.0, abs=1e-12)


def test_domain_errors():
    with pytest.raises(DomainError):
        ad.log(Node([1.0, -0.5]))
    with pytest.raises(DomainError):
        ad.sqrt(Node(-1.0))


def test_non_finite_forward_raises():
    with pytest.raises(NonFiniteError):
        ad.div(Node(1.0), Node(0.0))
    with pytest.raises(NonFiniteError):
        Node(np.array([1.0, np.inf]))


def test_backward_square():
    x = Parameter(np.array(3.0), name="x")
    grads = backward(ad.square(x), [x])
    assert grads[x] == pytest.approx(6.0)


def test_backward_product():
    x = Parameter(np.array(2.0))
    y = Parameter(np.array(3.0))
    grads = backward(x * y, [x, y])
    assert grads[x] == pytest.approx(3.0)
    assert grads[y] == pytest.approx(2.0)


def test_backward_requires_scalar_root():
    x = Parameter(np.array([1.0, 2.0]))
    with pytest.raises(ad.AutodiffError):
        backward(ad.square(x), [x])


def test_unreachable_parameter_gets_exact_zero():
    x = Parameter(np.array(2.0))
    unused = Parameter(np.array([5.0, 1.0]))
    grads = backward(ad.square(x), [x, unused])
    assert np.array_equal(grads[unused], np.zeros(2))


def test_stale_adjoint_not_reused_across_graphs():
    x = Parameter(np.array(2.0))
    y = Parameter(np.array(4.0))
    backward(x * y, [x, y])
    grads = backward(ad.square(x), [x, y])
    assert grads[x] == pytest.approx(4.0)
    assert grads[y] == 0.0


def test_fanout_accumulates():
    x = Parameter(np.array(3.0))
    # f = x*x + x -> f' = 2x + 1
    grads = backward(x * x + x, [x])
    assert grads[x] == pytest.approx(7.0)


def test_broadcast_bias_gradient():
    rng = np.random.default_rng(0)
    w = Parameter(rng.normal(size=(4, 3)))
    b = Parameter(rng.normal(size=3))
    x = Node(rng.normal(size=(5, 4)))

    def loss():
        return ad.total_sum(ad.square(ad.matmul(x, w) + b))

    report = finite_difference_check(loss, [w, b])
    assert report.max_rel_error < 1e-7


def test_composite_ops_match_finite_differences():
    rng = np.random.default_rng(1)
    a = Parameter(rng.normal(size=(3, 4)))
    b = Parameter(rng.normal(size=(3, 4)))

    def loss():
        h = ad.concat([ad.tanh(a), ad.sigmoid(b)], axis=1)
        h = ad.reshape(h[:, 1:7], (2, 9))
        s = ad.sum_axis(ad.softplus(h), axis=0)
        return ad.mean_all(ad.square(s)) + ad.total_sum(ad.relu(a - 0.3))

    report = finite_difference_check(loss, [a, b])
    assert report.max_rel_error < 1e-6


def test_softmax_log_sqrt_gradients():
    rng = np.random.default_rng(2)
    a = Parameter(rng.normal(size=(2, 5)))

    def loss():
        p = ad.softmax(a, axis=-1)
        return ad.total_sum(ad.sqrt(p + 1.0) * ad.log(p + 0.5))

    report = finite_difference_check(loss, [a])
    assert report.max_rel_error < 1e-6


def test_clip_gradient_masks_boundaries():
    x = Parameter(np.array([-2.0, 0.5, 3.0]))
    grads = backward(ad.total_sum(ad.clip(x, -1.0, 1.0)), [x])
    np.testing.assert_array_equal(grads[x], [0.0, 1.0, 0.0])


def test_backward_linearity():
    rng = np.random.default_rng(3)
    w = Parameter(rng.normal(size=(3, 2)))
    x = Node(rng.normal(size=(4, 3)))

    def f():
        return ad.total_sum(ad.tanh(ad.matmul(x, w)))

    def g():
        return ad.mean_all(ad.square(ad.matmul(x, w)))

    a_coef, b_coef = 0.7, -1.3
    gf = backward(f(), [w])[w]
    gg = backward(g(), [w])[w]
    combined = backward(a_coef * f() + b_coef * g(), [w])[w]
    np.testing.assert_allclose(combined, a_coef * gf + b_coef * gg, atol=1e-10)


def test_adam_first_step_is_learning_rate():
    p = Parameter(np.array([1.0]))
    state = AdamState(lr=1e-3)
    adam_step([p], {p: np.array([1.0])}, state)
    assert state.step_count == 1
    assert abs((1.0 - p.value[0]) - 1e-3) < 1e-6 * 1e-3


def test_adam_zero_gradient_leaves_parameters():
    p = Parameter(np.array([2.0, -1.0]))
    state = AdamState()
    adam_step([p], {p: np.zeros(2)}, state)
    np.testing.assert_array_equal(p.value, [2.0, -1.0])


def test_adam_repeated_identical_gradient_updates_shrink_or_equal():
    p = Parameter(np.array([0.0]))
    state = AdamState(lr=1e-2)
    adam_step([p], {p: np.array([2.0])}, state)
    first = abs(p.value[0])
    adam_step([p], {p: np.array([2.0])}, state)
    second = abs(p.value[0] - (-first))
    assert state.step_count == 2
    assert second <= first + 1e-12


def test_adam_shape_mismatch_errors():
    p = Parameter(np.zeros(3))
    with pytest.raises(ad.AutodiffError):
        adam_step([p], {p: np.zeros(2)}, AdamState())


def test_finite_difference_check_quadratic_is_exact():
    w = Parameter(np.array([1.0, -2.0, 0.5]), name="w")

    def loss():
        return ad.total_sum(ad.square(w)) + 3.0 * ad.total_sum(w)

    report = finite_difference_check(loss, [w])
    assert report.max_rel_error < 1e-8
    assert report.passed
