"""Tensor core: softmax, conv, loss, Adam, and the gradient checker itself."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from serlab.errors import NumericsError, ShapeError
from serlab.nn import (Adam, AdamState, Tensor, adam_step, conv2d,
                       cross_entropy_loss, finite_difference_check, matmul,
                       max_pool2d, softmax)

# frozen from a 40-digit evaluation of exp(k)/sum(exp([1,2,3]))
SOFTMAX_123 = np.array([0.09003057317038045800,
                        0.24472847105479765247,
                        0.66524095577482188953])
LN2 = 0.69314718055994530942


class TestSoftmax:
    def test_symmetry(self):
        y = softmax(Tensor([0.0, 0.0]), axis=0)
        assert np.allclose(y.data, [0.5, 0.5], atol=0)

    def test_large_inputs_do_not_overflow(self):
        y = softmax(Tensor([1000.0, 1000.0, 1000.0]), axis=0)
        assert np.isfinite(y.data).all()
        assert np.allclose(y.data, 1.0 / 3.0, atol=1e-15)

    def test_against_extended_precision_oracle(self):
        y = softmax(Tensor([1.0, 2.0, 3.0]), axis=0)
        assert np.allclose(y.data, SOFTMAX_123, atol=1e-15)

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(0)
        x = Tensor(rng.normal(size=(4, 7)) * 10)
        y = softmax(x, axis=1)
        assert np.allclose(y.data.sum(axis=1), 1.0, atol=1e-9)
        assert (y.data > 0).all()

    def test_rejects_non_finite(self):
        with pytest.raises(NumericsError):
            softmax(Tensor([np.nan, 1.0]), axis=0)

    def test_axis_out_of_range(self):
        with pytest.raises(ShapeError):
            softmax(Tensor([1.0, 2.0]), axis=3)

    @given(st.lists(st.floats(-50, 50), min_size=2, max_size=8),
           st.floats(-100, 100))
    @settings(max_examples=50, deadline=None)
    def test_shift_invariance(self, values, c):
        x = np.array(values)
        a = softmax(Tensor(x), axis=0).data
        b = softmax(Tensor(x + c), axis=0).data
        assert np.allclose(a, b, atol=1e-9)

    def test_gradient(self):
        rng = np.random.default_rng(1)
        p = Tensor(rng.normal(size=(2, 5)), requires_grad=True)
        w = rng.normal(size=(2, 5))

        def loss():
            return (softmax(p, axis=1) * Tensor(w)).sum()

        report = finite_difference_check(loss, {"p": p})
        assert report.passed, str(report)


def _naive_conv(x, w, b, stride, pad):
    cin, h, wd = x.shape
    cout, _, k, _ = w.shape
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    ho = (h + 2 * pad - k) // stride + 1
    wo = (wd + 2 * pad - k) // stride + 1
    out = np.zeros((cout, ho, wo))
    for o in range(cout):
        for i in range(ho):
            for j in range(wo):
                patch = xp[:, i * stride:i * stride + k,
                           j * stride:j * stride + k]
                out[o, i, j] = (patch * w[o]).sum() + b[o]
    return out


class TestConv2d:
    def test_identity_kernel(self):
        x = Tensor(np.random.default_rng(2).normal(size=(1, 1, 6, 6)))
        w = Tensor(np.ones((1, 1, 1, 1)))
        b = Tensor(np.zeros(1))
        y = conv2d(x, w, b, stride=1, padding=0)
        assert np.array_equal(y.data, x.data)

    def test_output_size_arithmetic(self):
        x = Tensor(np.zeros((1, 3, 224, 224)))
        w = Tensor(np.zeros((4, 3, 7, 7)))
        y = conv2d(x, w, None, stride=2, padding=3)
        assert y.shape == (1, 4, 112, 112)

    def test_against_naive_loops(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(1, 5, 5))
        w = rng.normal(size=(2, 1, 3, 3))
        b = rng.normal(size=2)
        got = conv2d(Tensor(x[None]), Tensor(w), Tensor(b),
                     stride=1, padding=0).data[0]
        want = _naive_conv(x, w, b, 1, 0)
        assert np.allclose(got, want, atol=1e-12)

    @pytest.mark.parametrize("stride,pad", [(1, 0), (1, 1), (2, 1), (2, 3)])
    def test_strided_padded_against_naive(self, stride, pad):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(3, 9, 8))
        w = rng.normal(size=(2, 3, 3, 3))
        b = rng.normal(size=2)
        got = conv2d(Tensor(x[None]), Tensor(w), Tensor(b),
                     stride=stride, padding=pad).data[0]
        want = _naive_conv(x, w, b, stride, pad)
        assert np.allclose(got, want, atol=1e-12)

    def test_kernel_too_large(self):
        with pytest.raises(ShapeError):
            conv2d(Tensor(np.zeros((1, 1, 3, 3))),
                   Tensor(np.zeros((1, 1, 5, 5))), None)

    def test_gradients(self):
        rng = np.random.default_rng(5)
        x = Tensor(rng.normal(size=(2, 2, 5, 5)), requires_grad=True)
        w = Tensor(rng.normal(size=(3, 2, 3, 3)), requires_grad=True)
        b = Tensor(rng.normal(size=3), requires_grad=True)
        m = rng.normal(size=(2, 3, 3, 3))

        def loss():
            return (conv2d(x, w, b, stride=2, padding=1) * Tensor(m)).sum()

        report = finite_difference_check(loss, {"x": x, "w": w, "b": b})
        assert report.passed, str(report)


class TestMaxPool:
    def test_matches_manual_windows(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(1, 1, 6, 6))
        y = max_pool2d(Tensor(x), kernel=2, stride=2, padding=0).data
        want = x.reshape(1, 1, 3, 2, 3, 2).max(axis=(3, 5))
        assert np.array_equal(y, want)

    def test_gradient(self):
        rng = np.random.default_rng(7)
        x = Tensor(rng.normal(size=(1, 2, 6, 6)), requires_grad=True)
        m = rng.normal(size=(1, 2, 3, 3))

        def loss():
            return (max_pool2d(x, 3, 2, 1) * Tensor(m)).sum()

        report = finite_difference_check(loss, {"x": x})
        assert report.passed, str(report)


class TestCrossEntropy:
    def test_uniform_logits_give_ln2(self):
        loss = cross_entropy_loss(Tensor([[0.0, 0.0]]), [1])
        assert abs(loss.item() - LN2) < 1e-15

    def test_dominant_logit_drives_loss_to_zero(self):
        loss = cross_entropy_loss(Tensor([[40.0, 0.0, 0.0]]), [0])
        assert loss.item() < 1e-12

    def test_against_composed_oracle(self):
        rng = np.random.default_rng(8)
        logits = rng.normal(size=(4, 3)) * 3
        targets = np.array([0, 2, 1, 1])
        got = cross_entropy_loss(Tensor(logits), targets).item()
        probs = softmax(Tensor(logits), axis=1).data
        want = -np.log(probs[np.arange(4), targets]).mean()
        assert abs(got - want) < 1e-12

    def test_out_of_range_target(self):
        with pytest.raises(IndexError):
            cross_entropy_loss(Tensor([[0.0, 0.0]]), [2])

    def test_gradient(self):
        rng = np.random.default_rng(9)
        p = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
        targets = np.array([1, 3, 0])

        def loss():
            return cross_entropy_loss(p, targets)

        report = finite_difference_check(loss, {"logits": p})
        assert report.passed, str(report)


class TestAdam:
    def test_zero_gradient_is_identity(self):
        p = {"w": np.array([1.0, -2.0, 3.0])}
        before = p["w"].copy()
        adam_step(p, {"w": np.zeros(3)}, AdamState(lr=0.1))
        # v stays zero, so the update is exactly zero
        assert np.array_equal(p["w"], before)

    def test_missing_gradient_is_identity(self):
        p = {"w": np.array([1.0, 2.0])}
        before = p["w"].copy()
        adam_step(p, {}, AdamState(lr=0.1))
        assert np.array_equal(p["w"], before)

    def test_first_step_magnitude(self):
        # hand evaluation at t=1, g=1: m_hat = v_hat = 1, update = lr/(1+eps)
        state = AdamState(lr=0.1)
        p = {"w": np.array([0.0])}
        adam_step(p, {"w": np.array([1.0])}, state)
        assert state.step == 1
        expected = -0.1 / (1.0 + state.eps)
        assert abs(p["w"][0] - expected) < 1e-15
        assert abs(abs(p["w"][0]) - 0.1) < 1e-8

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            adam_step({"w": np.zeros(3)}, {"w": np.zeros(4)}, AdamState())

    def test_two_seeded_runs_are_bitwise_identical(self):
        def run():
            rng = np.random.default_rng(1234)
            w = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
            opt = Adam({"w": w}, lr=1e-2)
            x = rng.normal(size=(8, 4))
            t = rng.integers(0, 2, size=8)
            for _ in range(20):
                opt.zero_grad()
                loss = cross_entropy_loss(matmul(Tensor(x), w), t)
                loss.backward()
                opt.step()
            return w.data.copy()

        assert np.array_equal(run(), run())


class TestFiniteDifferenceCheck:
    def test_quadratic_is_exact(self):
        p = Tensor(np.array([1.0, -2.0, 0.5]), requires_grad=True)

        def loss():
            return (p * p).sum() * Tensor(0.5)

        report = finite_difference_check(loss, {"p": p}, h=1e-5)
        assert report.max_error < 1e-8

    def test_corrupted_gradient_is_reported(self):
        # doubling the analytic gradient gives |2g-g|/max(|2g|,|g|) = 0.5
        p = Tensor(np.array([1.5]), requires_grad=True)

        class Doubled(Tensor):
            pass

        def loss():
            out = (p * p).sum() * Tensor(0.5)
            inner = out._backward

            def corrupt(g):
                inner(2.0 * g)

            if out._backward is not None:
                out._backward = corrupt
            return out

        report = finite_difference_check(loss, {"p": p})
        assert not report.passed
        assert abs(report.max_error - 0.5) < 1e-6

    def test_flat_loss_reports_zero(self):
        p = Tensor(np.array([3.0]), requires_grad=True)

        def loss():
            return (p * Tensor(0.0)).sum()

        report = finite_difference_check(loss, {"p": p})
        assert report.max_error == 0.0


class TestTensorBasics:
    def test_shape_data_consistency(self):
        t = Tensor(np.arange(6.0).reshape(2, 3))
        assert t.size == 6 and t.shape == (2, 3)

    def test_matmul_rejects_mismatch(self):
        with pytest.raises(ShapeError):
            matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 2))))

    def test_broadcast_add_gradient(self):
        a = Tensor(np.ones((3, 4)), requires_grad=True)
        b = Tensor(np.ones(4), requires_grad=True)
        (a + b).sum().backward()
        assert np.array_equal(b.grad, np.full(4, 3.0))
        assert np.array_equal(a.grad, np.ones((3, 4)))

    def test_batched_matmul_gradient(self):
        rng = np.random.default_rng(10)
        a = Tensor(rng.normal(size=(2, 3, 4)), requires_grad=True)
        b = Tensor(rng.normal(size=(2, 4, 5)), requires_grad=True)
        m = rng.normal(size=(2, 3, 5))

        def loss():
            return (matmul(a, b) * Tensor(m)).sum()

        report = finite_difference_check(loss, {"a": a, "b": b})
        assert report.passed, str(report)
