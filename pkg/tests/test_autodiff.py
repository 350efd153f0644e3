"""Engine-level checks: every primitive's gradient against finite
differences, broadcasting rules, and optimizer behavior."""

import numpy as np
import pytest

from mabsa.autodiff import AdamW, Tensor, concat, parameter

from helpers import assert_grad_close, central_difference


def scalarize(t):
    return (t * t).sum()


class TestPrimitiveGradients:
    @pytest.mark.parametrize("build", [
        lambda a, b: a + b,
        lambda a, b: a - b,
        lambda a, b: a * b,
        lambda a, b: a @ b.transpose(),
        lambda a, b: (a @ b.transpose()).relu(),
        lambda a, b: a.softmax(axis=-1) + b,
        lambda a, b: a.log_softmax(axis=-1) * b,
        lambda a, b: (a * a + 0.5).log() + b.exp(),
        lambda a, b: concat([a, b], axis=0),
        lambda a, b: a.reshape(6, 2) @ b.reshape(2, 6),
        lambda a, b: a[0:2, :] + b[1:3, :],
        lambda a, b: a.sum(axis=0) * b.mean(axis=0),
    ])
    def test_against_finite_differences(self, build):
        rng = np.random.default_rng(11)
        a = parameter(rng.normal(size=(3, 4)))
        b = parameter(rng.normal(size=(3, 4)))

        out = scalarize(build(a, b))
        out.backward()

        def loss():
            return float(scalarize(build(a, b)).data)

        for p, name in ((a, "a"), (b, "b")):
            numeric = central_difference(loss, p)
            analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
            assert_grad_close(analytic, numeric, name)

    def test_broadcast_bias_add(self):
        rng = np.random.default_rng(5)
        w = parameter(rng.normal(size=(4, 3)))
        bias = parameter(rng.normal(size=(3,)))
        x = Tensor(rng.normal(size=(5, 4)))

        out = ((x @ w + bias) * (x @ w + bias)).sum()
        out.backward()

        def loss():
            h = x @ w + bias
            return float(((h * h).sum()).data)

        assert_grad_close(bias.grad, central_difference(loss, bias), "bias")
        assert_grad_close(w.grad, central_difference(loss, w), "w")

    def test_batched_matmul_gradient(self):
        rng = np.random.default_rng(7)
        q = parameter(rng.normal(size=(2, 3, 4)))
        k = parameter(rng.normal(size=(2, 4, 3)))

        out = scalarize((q @ k).softmax(axis=-1))
        out.backward()

        def loss():
            return float(scalarize((q @ k).softmax(axis=-1)).data)

        assert_grad_close(q.grad, central_difference(loss, q), "q")
        assert_grad_close(k.grad, central_difference(loss, k), "k")

    def test_gather_rows_accumulates_duplicates(self):
        v = parameter(np.arange(12.0).reshape(4, 3))
        rows = np.array([1, 1, 3])
        out = v[rows].sum()
        out.backward()
        expected = np.zeros((4, 3))
        expected[1] = 2.0
        expected[3] = 1.0
        np.testing.assert_array_equal(v.grad, expected)

    def test_detach_blocks_gradient(self):
        a = parameter(np.ones((2, 2)))
        out = (a.detach() * a).sum()
        out.backward()
        np.testing.assert_array_equal(a.grad, np.ones((2, 2)))


class TestTensorBasics:
    def test_softmax_rows_sum_to_one(self):
        rng = np.random.default_rng(3)
        x = Tensor(rng.normal(size=(6, 5)) * 10)
        rows = x.softmax(axis=-1).data.sum(axis=-1)
        np.testing.assert_allclose(rows, 1.0, atol=1e-12)

    def test_backward_requires_scalar(self):
        with pytest.raises(ValueError):
            Tensor(np.ones(3), requires_grad=True).backward()

    def test_grad_accumulates_across_backwards(self):
        a = parameter(np.array([2.0]))
        (a * 3.0).sum().backward()
        (a * 3.0).sum().backward()
        np.testing.assert_allclose(a.grad, [6.0])


class TestAdamW:
    def test_minimizes_quadratic(self):
        x = parameter(np.array([5.0, -3.0]))
        opt = AdamW({"x": x}, lr=0.1)
        for _ in range(400):
            opt.zero_grad()
            (x * x).sum().backward()
            opt.step()
        assert np.abs(x.data).max() < 1e-3

    def test_weight_decay_is_decoupled(self):
        # with zero gradient the update is purely -lr * wd * x
        x = parameter(np.array([1.0]))
        opt = AdamW({"x": x}, lr=0.5, weight_decay=0.1)
        opt.zero_grad()
        x.grad = np.array([0.0])
        opt.step()
        np.testing.assert_allclose(x.data, [1.0 - 0.5 * 0.1 * 1.0])

    def test_state_roundtrip(self):
        rng = np.random.default_rng(0)
        x = parameter(rng.normal(size=(3,)))
        opt = AdamW({"x": x}, lr=0.05)
        for _ in range(3):
            opt.zero_grad()
            (x * x).sum().backward()
            opt.step()
        saved = {k: v.copy() for k, v in opt.state_arrays().items()}

        y = parameter(x.data.copy())
        opt2 = AdamW({"x": y}, lr=0.05)
        opt2.load_state_arrays(saved)
        for o in (opt, opt2):
            o.zero_grad()
        (x * x).sum().backward()
        (y * y).sum().backward()
        opt.step()
        opt2.step()
        np.testing.assert_array_equal(x.data, y.data)
