import numpy as np
import pytest

from xlner import autodiff as ad


def numeric_grad(fn, x, eps=1e-6):
    g = np.zeros_like(x, dtype=float)
    flat = g.reshape(-1)
    xf = x.reshape(-1)
    for i in range(x.size):
        orig = xf[i]
        xf[i] = orig + eps
        hi = fn(x)
        xf[i] = orig - eps
        lo = fn(x)
        xf[i] = orig
        flat[i] = (hi - lo) / (2 * eps)
    return g


def check(build, *shapes, seed=0):
    """build(tensors...) -> scalar Tensor; compare tape grads with central
    finite differences for every input."""
    rng = np.random.default_rng(seed)
    values = [rng.standard_normal(shape) for shape in shapes]
    tensors = [ad.Tensor(v.copy()) for v in values]
    out = build(*tensors)
    ad.backward(out)
    for i, value in enumerate(values):
        def fn(x, i=i):
            args = [ad.Tensor(v) for v in values]
            args[i] = ad.Tensor(x)
            return float(build(*args).value)

        num = numeric_grad(fn, value.copy())
        assert np.allclose(tensors[i].grad, num, atol=1e-7), (i, tensors[i].grad, num)


def test_add_broadcast():
    check(lambda a, b: ad.tsum(a + b), (3, 4), (4,))


def test_mul_broadcast():
    check(lambda a, b: ad.tsum(a * b), (2, 3), (3,))


def test_matmul():
    check(lambda a, b: ad.tsum(a @ b), (3, 4), (4, 2))


def test_vector_matmul():
    check(lambda a, b: ad.tsum(a @ b), (4,), (4, 3))


def test_tanh_sigmoid():
    check(lambda a: ad.tsum(ad.tanh(a) * ad.sigmoid(a)), (5,))


def test_getitem_slice():
    check(lambda a: ad.tsum(a[1:3] * a[0:2]), (5,))


def test_getitem_fancy_repeated_indices():
    idx = np.array([0, 1, 0, 2])
    check(lambda a: ad.tsum(a[idx]), (4, 3))


def test_getitem_pair_index():
    rows = np.array([0, 1, 1])
    cols = np.array([2, 0, 0])
    check(lambda a: ad.tsum(a[rows, cols]), (3, 3))


def test_concat_stack_reshape():
    def build(a, b):
        c = ad.concat([a, b])
        m = ad.stack([c, c * 2.0])
        return ad.tsum(m.reshape((2, a.shape[0] + b.shape[0])) * 0.5)

    check(build, (3,), (2,))


def test_logsumexp_full():
    check(lambda a: ad.logsumexp(a), (4, 3))


def test_logsumexp_axis():
    check(lambda a: ad.tsum(ad.logsumexp(a, axis=0) * 2.0), (4, 3))
    check(lambda a: ad.tsum(ad.logsumexp(a, axis=1)), (4, 3))


def test_shared_subexpression_accumulates():
    def build(a):
        h = ad.tanh(a)
        return ad.tsum(h * h + h)

    check(build, (4,))


def test_backward_requires_scalar():
    with pytest.raises(ValueError):
        ad.backward(ad.Tensor(np.zeros(3)))


def test_constants_do_not_break_graph():
    a = ad.Tensor(np.ones(3))
    out = ad.tsum(a * np.array([1.0, 2.0, 3.0]) + 5.0)
    ad.backward(out)
    assert np.allclose(a.grad, [1.0, 2.0, 3.0])
