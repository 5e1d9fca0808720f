import numpy as np
import pytest
from hypothesis import given, strategies as st

from mlbsim.nn import Adam, Mlp, glorot_uniform, huber, huber_grad


def rng(seed=0):
    return np.random.Generator(np.random.PCG64(seed))


class TestInit:
    def test_bound_respected(self):
        w = glorot_uniform(30, 50, rng(1))
        limit = np.sqrt(6.0 / 80.0)
        assert w.shape == (30, 50)
        assert np.all(np.abs(w) <= limit)

    def test_deterministic_per_seed(self):
        np.testing.assert_array_equal(glorot_uniform(4, 4, rng(9)),
                                      glorot_uniform(4, 4, rng(9)))

    def test_biases_start_at_zero(self):
        net = Mlp([3, 5, 2], rng())
        assert all(np.all(b == 0.0) for b in net.biases)

    def test_rejects_degenerate_shape(self):
        with pytest.raises(ValueError):
            Mlp([4])


class TestForward:
    def test_zero_parameters_zero_output(self):
        net = Mlp([4, 8, 3], rng())
        for w in net.weights:
            w[:] = 0.0
        out = net.forward(np.ones(4))
        np.testing.assert_array_equal(out, np.zeros(3))

    def test_identity_single_layer(self):
        net = Mlp([5, 5], rng())
        net.weights[0][:] = np.eye(5)
        x = np.array([0.3, -1.2, 4.0, 0.0, -7.5])
        np.testing.assert_allclose(net.forward(x), x, atol=0)

    def test_matches_independent_arithmetic(self):
        net = Mlp([6, 8, 8, 10], rng(5))
        x = rng(6).normal(size=6)
        h = x.copy()
        for i, (w, b) in enumerate(zip(net.weights, net.biases)):
            h = h @ w + b
            if i < len(net.weights) - 1:
                h = np.where(h > 0, h, 0.0)
        np.testing.assert_allclose(net.forward(x), h, atol=1e-12)

    def test_batch_rows_match_single_calls(self):
        net = Mlp([4, 6, 2], rng(2))
        xs = rng(3).normal(size=(7, 4))
        batch = net.forward(xs)
        for i in range(7):
            np.testing.assert_allclose(batch[i], net.forward(xs[i]), atol=1e-15)

    def test_rejects_wrong_width(self):
        net = Mlp([4, 2], rng())
        with pytest.raises(ValueError):
            net.forward(np.zeros(5))

    def test_copy_is_detached(self):
        net = Mlp([3, 3], rng())
        clone = net.copy()
        net.weights[0][0, 0] += 1.0
        assert clone.weights[0][0, 0] != net.weights[0][0, 0]


class TestHuber:
    def test_zero_error(self):
        assert huber(0.0) == 0.0

    def test_quadratic_region(self):
        assert huber(0.5) == pytest.approx(0.125)

    def test_linear_region(self):
        assert huber(2.0) == pytest.approx(1.5)

    def test_continuous_at_knee(self):
        assert huber(1.0) == pytest.approx(huber(1.0 + 1e-12), abs=1e-9)

    @given(st.floats(-100, 100), st.floats(0.1, 5))
    def test_symmetric_and_nonnegative(self, e, delta):
        assert huber(e, delta) == pytest.approx(huber(-e, delta), rel=1e-12)
        assert huber(e, delta) >= 0.0

    @given(st.floats(-10, 10))
    def test_gradient_is_clipped_error(self, e):
        assert huber_grad(e) == pytest.approx(max(-1.0, min(1.0, e)))

    def test_vector_form(self):
        out = huber(np.array([0.0, 0.5, 2.0]))
        np.testing.assert_allclose(out, [0.0, 0.125, 1.5])


def batch_huber_loss(net, xs, targets, actions):
    q = net.forward(xs)
    taken = q[np.arange(len(actions)), actions]
    return float(np.mean(huber(targets - taken)))


def analytic_grads(net, xs, targets, actions):
    q, acts = net.forward_cache(xs)
    taken = q[np.arange(len(actions)), actions]
    td = targets - taken
    grad_out = np.zeros_like(q)
    grad_out[np.arange(len(actions)), actions] = -huber_grad(td) / len(actions)
    return net.backward(acts, grad_out)


class TestBackward:
    def test_gradients_match_finite_differences(self):
        net = Mlp([5, 6, 4], rng(17))
        xs = rng(18).normal(size=(8, 5))
        targets = rng(19).normal(size=8)
        actions = rng(20).integers(0, 4, size=8)
        grads = analytic_grads(net, xs, targets, actions)

        eps = 1e-5
        worst = 0.0
        params = net.parameters()
        flat_grads = []
        for dw, db in grads:
            flat_grads.extend([dw, db])
        for p, g in zip(params, flat_grads):
            it = np.nditer(p, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = p[idx]
                p[idx] = orig + eps
                up = batch_huber_loss(net, xs, targets, actions)
                p[idx] = orig - eps
                down = batch_huber_loss(net, xs, targets, actions)
                p[idx] = orig
                numeric = (up - down) / (2 * eps)
                denom = max(abs(numeric), abs(g[idx]), 1e-8)
                worst = max(worst, abs(numeric - g[idx]) / denom)
        assert worst < 1e-4

    def test_zero_output_grad_zero_param_grads(self):
        net = Mlp([3, 4, 2], rng(1))
        _, acts = net.forward_cache(np.ones((2, 3)))
        grads = net.backward(acts, np.zeros((2, 2)))
        for dw, db in grads:
            assert np.all(dw == 0.0)
            assert np.all(db == 0.0)


class TestAdam:
    def test_scalar_recurrence_oracle(self):
        p = np.array([1.0])
        opt = Adam([p], lr=1e-3)
        grads = [0.5, -0.2, 0.1]

        # plain-Python re-implementation of the update rule
        ref_p, m, v = 1.0, 0.0, 0.0
        for t, g in enumerate(grads, start=1):
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            mhat = m / (1 - 0.9 ** t)
            vhat = v / (1 - 0.999 ** t)
            ref_p -= 1e-3 * mhat / (np.sqrt(vhat) + 1e-8)
            opt.step([p], [np.array([g])])
            assert p[0] == pytest.approx(ref_p, abs=1e-10)

    def test_first_step_size_is_lr(self):
        # bias correction makes the very first step lr-sized regardless of
        # gradient magnitude (up to eps)
        for g in (1e-4, 1.0, 250.0):
            p = np.array([0.0])
            Adam([p], lr=1e-3).step([p], [np.array([g])])
            assert abs(p[0]) == pytest.approx(1e-3, rel=1e-4)

    def test_count_mismatch_rejected(self):
        p = np.array([0.0])
        opt = Adam([p])
        with pytest.raises(ValueError):
            opt.step([p], [np.zeros(1), np.zeros(1)])

    def test_updates_in_place(self):
        p = np.zeros(3)
        alias = p
        Adam([p]).step([p], [np.ones(3)])
        assert alias is p
        assert np.all(alias != 0.0)
