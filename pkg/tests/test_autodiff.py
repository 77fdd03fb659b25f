import math

import numpy as np
import pytest

from diffsched.autodiff import Tape


def central_diff(f, x, eps=1e-5):
    """Central finite differences of a scalar function of a vector."""
    grad = np.zeros_like(x)
    for i in range(len(x)):
        hi, lo = x.copy(), x.copy()
        hi[i] += eps
        lo[i] -= eps
        grad[i] = (f(hi) - f(lo)) / (2 * eps)
    return grad


def rel_err(a, b):
    return np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b)))


class TestLeaves:
    def test_constant_gets_no_gradient(self):
        tape = Tape()
        c = tape.constant([1.0, 2.0])
        p = tape.param([3.0, 4.0])
        grads = tape.backward(tape.sum(tape.mul(c, p)))
        assert list(grads) == [p.idx]
        np.testing.assert_array_equal(grads[p.idx], [1.0, 2.0])

    def test_identity_gradient(self):
        tape = Tape()
        x = tape.param([1.0])
        grads = tape.backward(x)
        np.testing.assert_array_equal(grads[x.idx], [1.0])

    def test_param_reuse_sums(self):
        tape = Tape()
        x = tape.param([1.0])
        grads = tape.backward(tape.add(x, x))
        np.testing.assert_array_equal(grads[x.idx], [2.0])


class TestElementwise:
    def test_mul_forward(self):
        tape = Tape()
        out = tape.mul(tape.constant([2.0, 3.0]), tape.constant([4.0, 5.0]))
        np.testing.assert_array_equal(out.value, [8.0, 15.0])

    def test_square_gradient(self):
        tape = Tape()
        x = tape.param([3.0])
        grads = tape.backward(tape.mul(x, x))
        np.testing.assert_allclose(grads[x.idx], [6.0])

    def test_log_exp_forward(self):
        tape = Tape()
        np.testing.assert_array_equal(tape.log(tape.constant([1.0])).value, [0.0])
        np.testing.assert_array_equal(tape.exp(tape.constant([0.0])).value, [1.0])

    def test_log_gradient(self):
        tape = Tape()
        x = tape.param([2.0])
        grads = tape.backward(tape.log(x))
        np.testing.assert_allclose(grads[x.idx], [0.5])

    def test_log_rejects_nonpositive_without_floor(self):
        tape = Tape()
        with pytest.raises(ValueError):
            tape.log(tape.constant([0.0]))

    def test_log_floor_clamps_with_zero_adjoint(self):
        tape = Tape()
        x = tape.param([0.0, 1.0])
        grads = tape.backward(tape.sum(tape.log(x, floor=1e-30)))
        np.testing.assert_array_equal(grads[x.idx], [0.0, 1.0])

    def test_div_forward_and_gradient(self):
        tape = Tape()
        x = tape.param([6.0])
        y = tape.param([3.0])
        out = tape.div(x, y)
        np.testing.assert_array_equal(out.value, [2.0])
        grads = tape.backward(out)
        np.testing.assert_allclose(grads[x.idx], [1.0 / 3.0])
        np.testing.assert_allclose(grads[y.idx], [-2.0 / 3.0])

    def test_div_by_zero(self):
        tape = Tape()
        with pytest.raises(ZeroDivisionError):
            tape.div(tape.constant([1.0]), tape.constant([0.0]))

    def test_shape_mismatch(self):
        tape = Tape()
        with pytest.raises(ValueError):
            tape.add(tape.constant([1.0, 2.0]), tape.constant([1.0, 2.0, 3.0]))

    def test_scalar_broadcast(self):
        tape = Tape()
        x = tape.param([1.0, 2.0, 3.0])
        grads = tape.backward(tape.sum(tape.mul(x, tape.constant([2.0]))))
        np.testing.assert_array_equal(grads[x.idx], [2.0, 2.0, 2.0])

    def test_mul_finite_difference_fuzz(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            a = rng.uniform(0.5, 2.0, size=4)
            b = rng.uniform(0.5, 2.0, size=4)

            def f(x, b=b):
                t = Tape()
                return float(t.sum(t.mul(t.mul(t.param(x), t.constant(b)), t.param(x))).value[0])

            tape = Tape()
            xv = tape.param(a)
            grads = tape.backward(tape.sum(tape.mul(tape.mul(xv, tape.constant(b)), xv)))
            assert rel_err(grads[xv.idx], central_diff(f, a)) < 1e-6


class TestReductions:
    def test_sum(self):
        tape = Tape()
        np.testing.assert_array_equal(tape.sum(tape.constant([1.0, 2.0, 3.0])).value, [6.0])

    def test_dot_extracts_stage_index(self):
        tape = Tape()
        out = tape.dot(tape.constant([0.0, 1.0, 0.0]), [0.0, 1.0, 2.0])
        np.testing.assert_array_equal(out.value, [1.0])

    def test_sum_gradient_all_ones(self):
        tape = Tape()
        x = tape.param([5.0, -1.0, 2.0])
        grads = tape.backward(tape.sum(x))
        np.testing.assert_array_equal(grads[x.idx], [1.0, 1.0, 1.0])

    def test_dot_gradient_is_weights(self):
        tape = Tape()
        x = tape.param([5.0, -1.0])
        grads = tape.backward(tape.dot(x, [2.0, 7.0]))
        np.testing.assert_array_equal(grads[x.idx], [2.0, 7.0])

    def test_dot_length_mismatch(self):
        tape = Tape()
        with pytest.raises(ValueError):
            tape.dot(tape.constant([1.0]), [1.0, 2.0])


class TestCumsum:
    def test_forward(self):
        tape = Tape()
        np.testing.assert_array_equal(tape.cumsum(tape.constant([0.0, 1.0, 0.0])).value, [0.0, 1.0, 1.0])
        np.testing.assert_array_equal(tape.cumsum(tape.constant([1.0, 0.0, 0.0])).value, [1.0, 1.0, 1.0])

    def test_adjoint_is_reversed_cumsum(self):
        rng = np.random.default_rng(5)
        x0 = rng.normal(size=5)
        w = rng.normal(size=5)
        tape = Tape()
        x = tape.param(x0)
        grads = tape.backward(tape.dot(tape.cumsum(x), w))
        np.testing.assert_array_equal(grads[x.idx], np.cumsum(w[::-1])[::-1])

    def test_finite_difference(self):
        rng = np.random.default_rng(9)
        x0 = rng.normal(size=6)
        w = rng.normal(size=6)

        def f(x):
            t = Tape()
            return float(t.dot(t.cumsum(t.param(x)), w).value[0])

        tape = Tape()
        x = tape.param(x0)
        grads = tape.backward(tape.dot(tape.cumsum(x), w))
        assert rel_err(grads[x.idx], central_diff(f, x0)) < 1e-6


class TestSoftmax:
    def test_uniform_on_equal_logits(self):
        tape = Tape()
        y = tape.softmax(tape.constant([0.0, 0.0, 0.0]), 1.0)
        np.testing.assert_allclose(y.value, [1 / 3] * 3)

    def test_low_temperature_concentrates(self):
        tape = Tape()
        y = tape.softmax(tape.constant([0.0, 1.0, 0.0]), 0.01)
        assert y.value.max() > 0.99 and y.value.argmax() == 1

    def test_simplex_invariants(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            tape = Tape()
            y = tape.softmax(tape.constant(rng.normal(scale=2, size=6)), float(rng.uniform(0.3, 2)))
            assert abs(y.value.sum() - 1.0) < 1e-12
            assert np.all(y.value > 0) and np.all(y.value < 1)

    def test_shift_changes_value_not_gradient_path(self):
        tape = Tape()
        x = tape.param([0.0, 0.0])
        y = tape.softmax(x, 1.0, shift=np.array([1.0, 0.0]))
        expected = np.exp([1.0, 0.0]) / np.exp([1.0, 0.0]).sum()
        np.testing.assert_allclose(y.value, expected)

    def test_finite_difference(self):
        rng = np.random.default_rng(17)
        for _ in range(10):
            x0 = rng.normal(size=5)
            w = rng.normal(size=5)
            tau = float(rng.uniform(0.2, 2.0))

            def f(x, tau=tau, w=w):
                t = Tape()
                return float(t.dot(t.softmax(t.param(x), tau), w).value[0])

            tape = Tape()
            x = tape.param(x0)
            grads = tape.backward(tape.dot(tape.softmax(x, tau), w))
            assert rel_err(grads[x.idx], central_diff(f, x0)) < 1e-6

    def test_nonpositive_tau(self):
        tape = Tape()
        with pytest.raises(ValueError):
            tape.softmax(tape.constant([0.0]), 0.0)


class TestStraightThrough:
    def test_argmax(self):
        tape = Tape()
        out = tape.straight_through_onehot(tape.constant([0.1, 0.7, 0.2]))
        np.testing.assert_array_equal(out.value, [0.0, 1.0, 0.0])

    def test_first_index_tie_break(self):
        tape = Tape()
        out = tape.straight_through_onehot(tape.constant([0.5, 0.5]))
        np.testing.assert_array_equal(out.value, [1.0, 0.0])

    def test_identity_adjoint(self):
        tape = Tape()
        x = tape.param([0.1, 0.7, 0.2])
        w = [3.0, 5.0, 7.0]
        grads = tape.backward(tape.dot(tape.straight_through_onehot(x), w))
        np.testing.assert_array_equal(grads[x.idx], w)

    def test_rejects_all_nonpositive(self):
        tape = Tape()
        with pytest.raises(ValueError):
            tape.straight_through_onehot(tape.constant([0.0, 0.0]))

    def test_rejects_non_finite(self):
        tape = Tape()
        with pytest.raises(ValueError):
            tape.straight_through_onehot(tape.constant([np.nan, 1.0]))


class TestBackward:
    def test_sum_of_squares(self):
        tape = Tape()
        x = tape.param([1.0, 2.0])
        grads = tape.backward(tape.sum(tape.mul(x, x)))
        np.testing.assert_array_equal(grads[x.idx], [2.0, 4.0])

    def test_constant_only_expression(self):
        tape = Tape()
        out = tape.sum(tape.constant([1.0, 2.0]))
        assert tape.backward(out) == {}

    def test_non_scalar_root_rejected(self):
        tape = Tape()
        x = tape.param([1.0, 2.0])
        with pytest.raises(ValueError):
            tape.backward(x)

    def test_unreached_param_gets_zeros(self):
        tape = Tape()
        x = tape.param([1.0, 2.0])
        y = tape.param([3.0])
        grads = tape.backward(tape.sum(y))
        np.testing.assert_array_equal(grads[x.idx], [0.0, 0.0])

    def test_composite_expression_finite_difference(self):
        # entropy-style composite: -sum(q * log(q)) with q from a softmax
        rng = np.random.default_rng(19)
        for _ in range(10):
            x0 = rng.normal(size=4)

            def build(t, x):
                q = t.softmax(t.param(x), 0.7)
                return t.mul(t.sum(t.mul(q, t.log(q))), t.constant([-1.0]))

            def f(x):
                return float(build(Tape(), x).value[0])

            tape = Tape()
            out = build(tape, x0)
            grads = tape.backward(out)
            assert rel_err(grads[tape.param_idx[0]], central_diff(f, x0)) < 1e-4

    def test_determinism(self):
        def run():
            tape = Tape()
            x = tape.param([0.3, -1.2, 2.0])
            y = tape.softmax(x, 0.5)
            out = tape.sum(tape.mul(y, tape.cumsum(y)))
            return out.value.copy(), tape.backward(out)[x.idx].copy()

        v1, g1 = run()
        v2, g2 = run()
        assert np.array_equal(v1, v2) and np.array_equal(g1, g2)
