"""Finite-difference verification of every autodiff primitive."""

import numpy as np
import pytest

from oracles import central_difference_grad, max_relative_error

from geckit.model import autodiff as ad
from geckit.model.autodiff import Tensor


def check_gradients(build, *shapes, seed=0, tol=1e-6, h=1e-5):
    """Compare autodiff gradients of a scalar graph against central
    differences for every input tensor."""
    rng = np.random.default_rng(seed)
    tensors = [Tensor(rng.standard_normal(s), requires_grad=True) for s in shapes]
    loss = build(*tensors)
    loss.backward()
    for t in tensors:
        numeric = central_difference_grad(lambda: float(build(*tensors).data), t.data, h=h)
        assert t.grad is not None
        assert max_relative_error(t.grad, numeric) < tol


class TestPrimitives:
    def test_add_broadcast(self):
        check_gradients(lambda a, b: ad.tsum(ad.add(a, b)), (3, 4), (4,))

    def test_mul_broadcast(self):
        check_gradients(lambda a, b: ad.tsum(ad.mul(a, b)), (2, 3, 4), (3, 4))

    def test_matmul(self):
        check_gradients(lambda a, b: ad.tsum(ad.matmul(a, b)), (3, 4), (4, 5))

    def test_matmul_batched_broadcast(self):
        check_gradients(lambda a, b: ad.tsum(ad.matmul(a, b)), (2, 3, 4, 5), (5, 6))

    def test_reshape_transpose(self):
        check_gradients(
            lambda a: ad.tsum(ad.mul(ad.transpose(ad.reshape(a, (2, 6)), (1, 0)),
                                     ad.transpose(ad.reshape(a, (2, 6)), (1, 0)))),
            (3, 4),
        )

    def test_sum_axis_keepdims(self):
        check_gradients(lambda a: ad.tsum(ad.mul(ad.tsum(a, axis=1, keepdims=True), a)), (3, 4))

    def test_mean(self):
        check_gradients(lambda a: ad.tmean(ad.mul(a, a)), (5, 2))

    def test_exp_log(self):
        rng = np.random.default_rng(3)
        t = Tensor(rng.uniform(0.5, 2.0, (3, 3)), requires_grad=True)
        loss = ad.tsum(ad.log(ad.add(ad.exp(t), 1.0)))
        loss.backward()
        numeric = central_difference_grad(
            lambda: float(ad.tsum(ad.log(ad.add(ad.exp(t), 1.0))).data), t.data
        )
        assert max_relative_error(t.grad, numeric) < 1e-6

    def test_log_floor_blocks_gradient_below_clamp(self):
        t = Tensor(np.array([1e-20, 2.0]), requires_grad=True)
        loss = ad.tsum(ad.log(t, floor=1e-12))
        loss.backward()
        assert t.grad[0] == 0.0
        assert t.grad[1] == pytest.approx(0.5)

    def test_relu(self):
        check_gradients(lambda a: ad.tsum(ad.mul(ad.relu(a), a)), (4, 4), seed=9)

    def test_softmax(self):
        check_gradients(
            lambda a, w: ad.tsum(ad.mul(ad.softmax(a, axis=-1), w)), (3, 5), (3, 5)
        )

    def test_log_softmax(self):
        check_gradients(
            lambda a, w: ad.tsum(ad.mul(ad.log_softmax(a, axis=-1), w)), (2, 6), (2, 6)
        )

    def test_layer_norm(self):
        check_gradients(
            lambda x, g, b: ad.tsum(ad.mul(ad.layer_norm(x, g, b), x)), (3, 8), (8,), (8,),
            tol=1e-5,
        )

    def test_embedding(self):
        ids = np.array([[0, 2], [2, 1]])
        check_gradients(lambda w: ad.tsum(ad.mul(ad.embedding(w, ids), 3.0)), (4, 5))

    def test_gather_last(self):
        ids = np.array([[0, 3], [2, 1]])
        check_gradients(lambda a: ad.tsum(ad.gather_last(a, ids)), (2, 2, 4))


class TestGraphMechanics:
    def test_grad_accumulates_over_reuse(self):
        x = Tensor(np.array([2.0]), requires_grad=True)
        y = ad.add(ad.mul(x, x), ad.mul(x, 3.0))  # x^2 + 3x
        ad.tsum(y).backward()
        assert x.grad[0] == pytest.approx(2 * 2.0 + 3.0)

    def test_no_grad_into_constants(self):
        x = Tensor(np.ones(3), requires_grad=True)
        c = Tensor(np.ones(3))
        ad.tsum(ad.mul(x, c)).backward()
        assert c.grad is None

    def test_backward_requires_scalar(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with pytest.raises(ValueError):
            ad.mul(x, 2.0).backward()

    def test_diamond_graph(self):
        x = Tensor(np.array([3.0]), requires_grad=True)
        a = ad.mul(x, 2.0)
        b = ad.mul(x, 5.0)
        ad.tsum(ad.mul(a, b)).backward()  # 10 x^2 -> 20 x
        assert x.grad[0] == pytest.approx(60.0)

    def test_dropout_zero_rate_is_identity(self):
        x = Tensor(np.ones((2, 2)), requires_grad=True)
        assert ad.dropout(x, 0.0, np.random.default_rng(0)) is x

    def test_dropout_scales_surviving_entries(self):
        rng = np.random.default_rng(5)
        x = Tensor(np.ones((1000,)))
        out = ad.dropout(x, 0.25, rng).data
        assert set(np.unique(out)).issubset({0.0, 1.0 / 0.75})
        assert abs(out.mean() - 1.0) < 0.1
