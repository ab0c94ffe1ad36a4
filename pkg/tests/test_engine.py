import numpy as np
import pytest

from glyphscreen.nn import engine as eg
from glyphscreen.nn.engine import Tensor


def numeric_grad(fn, arr, eps=1e-6):
    out = np.zeros_like(arr)
    flat = arr.ravel()
    gflat = out.ravel()
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        lp = fn()
        flat[i] = old - eps
        lm = fn()
        flat[i] = old
        gflat[i] = (lp - lm) / (2 * eps)
    return out


@pytest.mark.parametrize("op,shapes", [
    (eg.add, [(3, 4), (3, 4)]),
    (eg.add, [(3, 4), (4,)]),          # broadcast bias
    (eg.sub, [(3, 4), (3, 4)]),
    (eg.mul, [(3, 4), (3, 4)]),
    (eg.matmul, [(3, 4), (4, 5)]),
])
def test_binary_op_gradients(op, shapes):
    rng = np.random.default_rng(0)
    tensors = [Tensor(rng.normal(size=s)) for s in shapes]
    weights = rng.normal(size=op(*tensors).data.shape)
    out = op(*tensors)
    eg.backward(eg.mean(eg.mul(out, weights * out.data.size)))
    for t in tensors:
        num = numeric_grad(lambda: float((op(*tensors).data * weights).sum()), t.data)
        assert np.allclose(t.grad, num, atol=1e-5)


@pytest.mark.parametrize("op", [eg.sigmoid, eg.tanh, eg.relu, eg.exp])
def test_unary_op_gradients(op):
    rng = np.random.default_rng(1)
    t = Tensor(rng.normal(size=(4, 3)) + 0.1)
    weights = rng.normal(size=(4, 3))
    out = op(t)
    eg.backward(eg.mean(eg.mul(out, weights * out.data.size)))
    num = numeric_grad(lambda: float((op(t).data * weights).sum()), t.data)
    assert np.allclose(t.grad, num, atol=1e-5)


def test_softmax_rows_sum_to_one():
    rng = np.random.default_rng(2)
    out = eg.softmax(Tensor(rng.normal(size=(6, 37)) * 20))
    assert np.allclose(out.data.sum(axis=1), 1.0, atol=1e-9)
    assert np.all(out.data >= 0)


def test_softmax_gradient():
    rng = np.random.default_rng(3)
    t = Tensor(rng.normal(size=(2, 5)))
    weights = rng.normal(size=(2, 5))
    out = eg.softmax(t)
    eg.backward(eg.mean(eg.mul(out, weights * out.data.size)))
    num = numeric_grad(lambda: float((eg.softmax(t).data * weights).sum()), t.data)
    assert np.allclose(t.grad, num, atol=1e-6)


def test_constants_stay_out_of_graph():
    t = Tensor(np.ones((2, 2)))
    const = np.full((2, 2), 3.0)
    out = eg.mul(t, const)
    assert out._parents == (t,)
    eg.backward(eg.mean(out))
    assert np.allclose(t.grad, 3.0 / 4.0)


def test_constant_loss_zero_gradients():
    t = Tensor(np.ones((3,)))
    out = eg.mul(t, np.zeros(3))
    eg.backward(eg.mean(out))
    assert np.allclose(t.grad, 0.0)


def test_grad_accumulates_over_shared_nodes():
    t = Tensor(np.array([2.0]))
    out = eg.add(eg.mul(t, t), eg.mul(t, 3.0))   # t^2 + 3t -> d/dt = 2t + 3
    eg.backward(eg.mean(out))
    assert np.allclose(t.grad, 7.0)


def test_no_grad_builds_no_graph():
    t = Tensor(np.ones((2, 2)))
    with eg.no_grad():
        out = eg.mul(t, t)
    assert out._parents == ()


def test_backward_requires_scalar():
    t = Tensor(np.ones((2, 2)))
    with pytest.raises(ValueError):
        eg.backward(eg.mul(t, t))


def test_deep_chain_no_recursion_error():
    t = Tensor(np.ones((2,)))
    node = t
    for _ in range(3000):
        node = eg.add(node, 0.001)
    eg.backward(eg.mean(node))
    assert np.allclose(t.grad, 0.5)


def test_pick_and_floor():
    probs = Tensor(np.array([[0.2, 0.8], [1.0, 0.0]]))
    picked = eg.pick(probs, np.array([0, 1]), np.array([1, 1]))
    assert np.allclose(picked.data, [0.8, 0.0])
    floored = eg.maximum_scalar(picked, 1e-12)
    assert floored.data[1] == 1e-12
    eg.backward(eg.mean(eg.log(floored)))
    # gradient is zero where the floor won
    assert probs.grad[1, 1] == 0.0
    assert probs.grad[0, 1] == pytest.approx(1.0 / 0.8 / 2.0)


def test_row_head_prefix_update_gradients():
    rng = np.random.default_rng(4)
    old = Tensor(rng.normal(size=(5, 3)))
    new = Tensor(rng.normal(size=(3, 3)))
    weights = rng.normal(size=(5, 3))
    out = eg.prefix_update(old, new, 3)
    eg.backward(eg.mean(eg.mul(out, weights * out.data.size)))
    assert np.allclose(old.grad[:3], 0.0)
    assert np.allclose(old.grad[3:], weights[3:])
    assert np.allclose(new.grad, weights[:3])

    head = eg.row_head(old, 2)
    assert head.data.shape == (2, 3)


def test_conv2d_matches_scalar_oracle():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(1, 4, 4, 1))
    w = Tensor(rng.normal(size=(3, 3, 1, 2)))
    b = Tensor(rng.normal(size=(2,)))
    out = eg.conv2d(x, w, b)
    assert out.data.shape == (1, 2, 2, 2)
    for oy in range(2):
        for ox in range(2):
            for oc in range(2):
                acc = b.data[oc]
                for ky in range(3):
                    for kx in range(3):
                        acc += x[0, oy + ky, ox + kx, 0] * w.data[ky, kx, 0, oc]
                assert out.data[0, oy, ox, oc] == pytest.approx(acc, abs=1e-12)


def test_conv2d_gradients():
    rng = np.random.default_rng(6)
    x = Tensor(rng.normal(size=(2, 5, 5, 2)))
    w = Tensor(rng.normal(size=(3, 3, 2, 3)))
    b = Tensor(rng.normal(size=(3,)))
    weights = rng.normal(size=(2, 3, 3, 3))

    def loss():
        return float((eg.conv2d(x, w, b).data * weights).sum())

    out = eg.conv2d(x, w, b)
    eg.backward(eg.mean(eg.mul(out, weights * out.data.size)))
    for t in (x, w, b):
        assert np.allclose(t.grad, numeric_grad(loss, t.data), atol=1e-5)


def test_maxpool_ceil_mode():
    x = Tensor(np.arange(9, dtype=float).reshape(1, 3, 3, 1))
    out = eg.maxpool2(x)
    assert out.data.shape == (1, 2, 2, 1)
    assert out.data[0, :, :, 0] == pytest.approx(np.array([[4.0, 5.0], [7.0, 8.0]]))
    # 1x1 input survives
    tiny = eg.maxpool2(Tensor(np.ones((1, 1, 1, 4))))
    assert tiny.data.shape == (1, 1, 1, 4)


def test_maxpool_gradient_routes_to_argmax():
    rng = np.random.default_rng(7)
    x = Tensor(rng.normal(size=(1, 4, 4, 1)))
    out = eg.maxpool2(x)
    eg.backward(eg.mean(out))
    grad = x.grad[0, :, :, 0]
    assert (grad > 0).sum() == 4
    assert np.allclose(grad[grad > 0], 1.0 / out.data.size)
