import numpy as np
import pytest
from conftest import fd_check, leaf
from hypothesis import given, settings
from hypothesis import strategies as st

from hexgen import tensor as T
from hexgen.optim import Adam, AdamState, adam_step, glorot_bound, glorot_init, make_rng
from hexgen.tensor import ShapeError, Tensor, no_grad

UNARY = {
    "relu": T.relu,
    "leaky_relu": lambda x: T.leaky_relu(x, 0.2),
    "sigmoid": T.sigmoid,
    "tanh": T.tanh,
    "exp": T.exp,
    "softmax": lambda x: T.softmax(x, axis=1),
    "log_softmax": lambda x: T.log_softmax(x, axis=1),
    "reduce_sum": lambda x: T.reduce_sum(x, axis=1),
    "reduce_mean": lambda x: T.reduce_mean(x, axis=0, keepdims=True),
    "reshape": lambda x: T.reshape(x, (2, 10)),
    "transpose": lambda x: T.transpose(x, (1, 0)),
    "slice": lambda x: x[1:3, ::2],
    "take": lambda x: T.take(x, [0, 2, 2, 4], axis=1),
}


@pytest.mark.parametrize("name", sorted(UNARY))
def test_unary_gradients(name):
    x = leaf((4, 5), seed=1)
    # keep relu-type kinks away from the finite-difference stencil
    x.data[np.abs(x.data) < 1e-2] += 0.05
    assert fd_check(UNARY[name], [x]) < 1e-4


def test_log_gradient():
    x = leaf((3, 4), seed=2, low=0.5, high=2.0)
    assert fd_check(T.log, [x]) < 1e-4


@pytest.mark.parametrize("op", [T.add, T.sub, T.mul, T.div])
def test_binary_broadcast_gradients(op):
    a = leaf((3, 4), seed=3, low=0.5, high=1.5)
    b = leaf((1, 4), seed=4, low=0.5, high=1.5)
    assert fd_check(op, [a, b]) < 1e-4


def test_matmul_gradient():
    a, b = leaf((3, 4), seed=5), leaf((4, 2), seed=6)
    assert fd_check(T.matmul, [a, b]) < 1e-5


def test_concat_gradient():
    a, b = leaf((2, 3), seed=7), leaf((2, 5), seed=8)
    assert fd_check(lambda x, y: T.concat([x, y], axis=1), [a, b]) < 1e-4


def test_loss_gradients():
    x = leaf((6, 3), seed=9)
    target = np.random.default_rng(0).random((6, 3))
    weights = np.random.default_rng(1).random((6, 1))
    assert fd_check(lambda v: T.weighted_sse(v, target, weights), [x]) < 1e-4
    assert fd_check(lambda v: T.mse(v, target), [x]) < 1e-4
    z = leaf((6,), seed=10)
    assert fd_check(lambda v: T.bce_with_logits(v, np.array([0, 1, 1, 0, 1, 0.])), [z]) < 1e-4
    logits = leaf((6, 4), seed=11)
    assert fd_check(lambda v: T.softmax_cross_entropy(v, [0, 3, 1, 1, 2, 0]), [logits]) < 1e-4


def test_reduce_sum_backward_is_ones():
    x = leaf((3, 2))
    T.reduce_sum(x).backward()
    assert np.array_equal(x.grad, np.ones((3, 2)))


def test_weighted_sse_unit_weights_is_sse():
    rng = np.random.default_rng(2)
    v, t = rng.random((4, 4)), rng.random((4, 4))
    got = T.weighted_sse(Tensor(v, dtype=np.float64), t, 1.0).data
    assert float(got) == pytest.approx(((v - t) ** 2).sum())


def test_shape_mismatch():
    with pytest.raises(ShapeError):
        T.add(leaf((2, 3)), leaf((4, 3)))
    with pytest.raises(ShapeError):
        T.matmul(leaf((2, 3)), leaf((2, 3)))
    with pytest.raises(ShapeError):
        T.reshape(leaf((2, 3)), (4, 2))


def test_no_grad_to_constants():
    a = leaf((2, 2))
    b = Tensor(np.ones((2, 2)), dtype=np.float64)
    T.reduce_sum(a * b).backward()
    assert b.grad is None and a.grad is not None


def test_no_grad_context():
    a = leaf((2, 2))
    with no_grad():
        out = a * 2.0
    assert not out.requires_grad


def test_gradient_accumulates_over_reuse():
    a = leaf((3,))
    T.reduce_sum(a * a + a).backward()
    assert np.allclose(a.grad, 2 * a.data + 1)


def test_backward_bit_identical():
    def run():
        x = glorot_init(4, 3, (4, 3), 5, "w", np.float32)
        y = T.reduce_sum(T.tanh(T.matmul(Tensor(np.ones((2, 4), np.float32)), x)))
        y.backward()
        return x.grad
    assert np.array_equal(run(), run())


def test_float32_storage_default():
    assert Tensor([1, 2, 3]).dtype == np.float32


def test_sigmoid_extremes_finite():
    out = T.sigmoid(Tensor(np.array([-1000.0, 0.0, 1000.0])))
    assert np.all(np.isfinite(out.data))
    assert out.data[0] == 0.0 and out.data[1] == 0.5 and out.data[2] == 1.0


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 10 ** 6))
def test_softmax_rows_sum_to_one(n, k, seed):
    x = Tensor(np.random.default_rng(seed).normal(0, 10, (n, k)), dtype=np.float64)
    assert np.allclose(T.softmax(x, axis=1).data.sum(axis=1), 1.0)


# -- initialization and optimizer ---------------------------------------------
def test_glorot_bound_and_range():
    assert glorot_bound(3, 3) == pytest.approx(1.0)
    w = glorot_init(3, 3, (1000,), 1, "w")
    assert np.abs(w.data).max() <= 1.0


def test_glorot_mean():
    w = glorot_init(50, 50, (100000,), 2, "w", np.float64)
    assert abs(w.data.mean()) < 0.01


def test_glorot_deterministic():
    a = glorot_init(4, 4, (4, 4), 3, "k")
    b = glorot_init(4, 4, (4, 4), 3, "k")
    c = glorot_init(4, 4, (4, 4), 3, "other")
    assert np.array_equal(a.data, b.data) and not np.array_equal(a.data, c.data)


def test_glorot_rejects_bad_fans():
    with pytest.raises(ValueError):
        glorot_init(0, 3, (3,), 0)


def test_named_streams_independent():
    assert make_rng(1, "a").random() != make_rng(1, "b").random()
    assert make_rng(1, "a").random() == make_rng(1, "a").random()


def test_adam_zero_gradient():
    p = Tensor(np.array([1.0, -2.0]), requires_grad=True, dtype=np.float64)
    st_ = AdamState()
    adam_step(st_, p, np.zeros(2), "p")
    assert np.array_equal(p.data, [1.0, -2.0])
    assert st_.step == 1
    adam_step(st_, p, np.zeros(2), "p")
    assert st_.step == 2


def test_adam_defaults():
    s = AdamState()
    assert (s.lr, s.beta1, s.beta2, s.epsilon) == (2e-4, 0.5, 0.999, 1e-8)


def test_adam_one_step_descends():
    x = Tensor(np.array([1.0]), requires_grad=True, dtype=np.float64)
    opt = Adam({"x": x})
    T.reduce_sum(x * x).backward()
    opt.step()
    assert 0 < x.data[0] < 1.0
    assert opt.state.step == 1


def test_adam_quadratic_converges():
    x = Tensor(np.array([1.0, 1.0]), requires_grad=True, dtype=np.float64)
    opt = Adam({"x": x}, lr=0.05)
    for _ in range(500):
        opt.zero_grad()
        T.reduce_sum(x * x * np.array([1.0, 3.0])).backward()
        opt.step()
    assert np.abs(x.data).max() < 1e-2


def test_adam_shape_mismatch():
    p = Tensor(np.zeros(3), requires_grad=True)
    with pytest.raises(ShapeError):
        adam_step(AdamState(), p, np.zeros(4), "p")
