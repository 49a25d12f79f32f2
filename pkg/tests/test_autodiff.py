import zlib

import numpy as np
import pytest

from stylelab.autodiff import Adam, AdamState, Tensor, adam_step, backward, clip_grad_norm, global_norm, grad, \
    grad_check, no_grad, ops
from stylelab.errors import ContractError, ShapeError

import gradcases


@pytest.mark.parametrize("name", sorted(gradcases.PRIMITIVES))
def test_primitive_gradients(name):
    rng = np.random.default_rng(zlib.crc32(name.encode()))
    for _ in range(3):
        fn, point = gradcases.PRIMITIVES[name](rng)
        assert grad_check(fn, point) < 1e-6


def test_mul_scalar_example():
    # d(x*y)/dx = y exactly
    x = Tensor(3.0, requires_grad=True)
    y = Tensor(4.0, requires_grad=True)
    backward(x * y)
    assert x.grad == 4.0 and y.grad == 3.0


def test_reused_node_accumulates():
    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    y = x * x + x
    backward(ops.sum(y))
    np.testing.assert_allclose(x.grad, 2 * x.data + 1)


def test_sum_of_ones_gradient_is_ones():
    x = Tensor(np.random.default_rng(0).normal(size=(4, 3)), requires_grad=True)
    backward(ops.sum(x))
    np.testing.assert_array_equal(x.grad, np.ones((4, 3)))


def test_leaf_grad_accumulates_across_calls():
    x = Tensor(2.0, requires_grad=True)
    backward(x * 3.0)
    backward(x * 3.0)
    assert x.grad == 6.0


def test_grad_does_not_clobber():
    x = Tensor(2.0, requires_grad=True)
    x.grad = np.array(10.0)
    (g,) = grad(x * x, [x])
    assert g == 4.0 and x.grad == 10.0


def test_backward_needs_scalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ShapeError):
        backward(x * 2.0)


def test_no_grad_builds_no_graph():
    x = Tensor(np.ones(3), requires_grad=True)
    with no_grad():
        y = x * 2.0
    assert not y.requires_grad and y._parents == ()


def test_matmul_shape_mismatch():
    with pytest.raises((ShapeError, ValueError)):
        ops.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 2))))


def test_cross_entropy_errors():
    with pytest.raises(ShapeError):
        ops.softmax_cross_entropy(Tensor(np.zeros(0)), 0)
    with pytest.raises(IndexError):
        ops.softmax_cross_entropy(Tensor(np.zeros(3)), 5)


def test_cross_entropy_uniform_value():
    loss = ops.softmax_cross_entropy(Tensor(np.zeros(4)), 2)
    assert loss.item() == pytest.approx(np.log(4))


def test_log_softmax_large_logits_stable():
    out = ops.log_softmax(Tensor(np.array([1000.0, 0.0, -1000.0])))
    assert np.isfinite(out.data).all()
    assert out.data[0] == pytest.approx(0.0)


def test_gru_mask_keeps_state():
    rng = np.random.default_rng(1)
    h = rng.normal(size=(2, 3))
    out = ops.gru_cell(rng.normal(size=(2, 2)), h, rng.normal(size=(2, 9)), rng.normal(size=(3, 9)),
                       np.zeros(9), np.zeros(9), mask=np.array([0.0, 1.0]))
    np.testing.assert_array_equal(out.data[0], h[0])
    assert not np.allclose(out.data[1], h[1])


def test_max_pool_windows_and_mask():
    x = np.arange(14, dtype=float).reshape(1, 7, 2)
    mask = np.ones((1, 7), dtype=bool)
    pooled, win_mask = ops.max_pool_time(Tensor(x), mask, 5)
    assert pooled.shape == (1, 2, 2)
    np.testing.assert_array_equal(pooled.data[0], [[8, 9], [12, 13]])
    assert win_mask.tolist() == [[True, True]]


def test_dropout_identity_without_rng_and_scaling():
    x = Tensor(np.ones((200, 50)))
    assert ops.dropout(x, 0.5, None) is x or np.array_equal(ops.dropout(x, 0.5, None).data, x.data)
    y = ops.dropout(x, 0.5, np.random.default_rng(0)).data
    assert set(np.unique(y)) <= {0.0, 2.0}
    assert abs(y.mean() - 1.0) < 0.05


def test_grad_check_epsilon_bounds():
    fn = lambda p: ops.sum(p[0] * p[0])
    with pytest.raises(ContractError):
        grad_check(fn, [np.ones(2)], epsilon=1e-1)
    with pytest.raises(ContractError):
        grad_check(lambda p: p[0] * 2.0, [np.ones(2)])


def test_clip_grad_norm():
    grads = [np.array([3.0, 4.0]), np.array([0.0])]
    clipped = clip_grad_norm(grads, 1.0)
    assert global_norm(clipped) == pytest.approx(1.0)
    np.testing.assert_array_equal(grads[0], [3.0, 4.0])
    assert clip_grad_norm(grads, 10.0)[0] is grads[0]
    with pytest.raises(ContractError):
        clip_grad_norm(grads, 0.0)


def test_adam_first_step_moves_by_lr():
    # bias correction makes the first update exactly lr * sign(g)
    p = np.array([1.0, -1.0])
    adam_step([p], [np.array([0.3, -2.0])], AdamState(), lr=0.1)
    np.testing.assert_allclose(p, [0.9, -0.9], atol=1e-7)


def test_adam_matches_reference_sequence():
    rng = np.random.default_rng(0)
    p = rng.normal(size=3)
    ref = p.copy()
    m = np.zeros(3)
    v = np.zeros(3)
    state = AdamState()
    for t in range(1, 6):
        g = rng.normal(size=3)
        adam_step([p], [g], state, lr=0.01, beta1=0.5, beta2=0.999)
        m = 0.5 * m + 0.5 * g
        v = 0.999 * v + 0.001 * g * g
        ref -= 0.01 * (m / (1 - 0.5 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
    np.testing.assert_allclose(p, ref, rtol=1e-12)


def test_adam_minimizes_quadratic():
    w = Tensor(np.array([5.0, -3.0]), requires_grad=True)
    opt = Adam([w], lr=0.1, clip=5.0)
    for _ in range(300):
        opt.zero_grad()
        backward(ops.sum(w * w))
        opt.step()
    assert np.abs(w.data).max() < 0.05
