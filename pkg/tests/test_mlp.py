"""Network forward/backward against hand computations and finite differences."""

import numpy as np
import pytest

from subnetrl import mlp
from subnetrl.mlp import AdamState, MlpSpec


def finite_difference_grad(params, spec, x, upstream, h=1e-5):
    """Central differences of f(p) = upstream . forward(p, x)."""
    grad = np.zeros_like(params)
    for i in range(len(params)):
        p_hi = params.copy()
        p_hi[i] += h
        p_lo = params.copy()
        p_lo[i] -= h
        f_hi = float(np.sum(upstream * mlp.forward(p_hi, spec, x)))
        f_lo = float(np.sum(upstream * mlp.forward(p_lo, spec, x)))
        grad[i] = (f_hi - f_lo) / (2.0 * h)
    return grad


def relative_gap(a, b, floor=1e-3):
    return np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor))


def sample_net(rng, sizes, activation, head):
    """Random net and probe input; for relu, keep pre-activations away from
    the kink so central differences stay valid."""
    spec = MlpSpec(sizes, activation, head)
    for _ in range(50):
        params = rng.normal(scale=0.7, size=spec.num_params)
        x = rng.normal(size=sizes[0])
        _, (pre, _, _) = mlp.forward_cached(params, spec, x)
        if activation != "relu" or min(np.abs(z).min() for z in pre) > 1e-3:
            return spec, params, x
    raise AssertionError("could not sample a kink-free relu net")


class TestInit:
    def test_deterministic(self):
        spec = MlpSpec((4, 8, 3))
        assert np.array_equal(mlp.init_params(spec, 7), mlp.init_params(spec, 7))
        assert not np.array_equal(mlp.init_params(spec, 7), mlp.init_params(spec, 8))

    def test_biases_zero(self):
        spec = MlpSpec((4, 8, 3))
        layers = mlp.unflatten(mlp.init_params(spec, 0), spec)
        for _, b in layers:
            assert np.all(b == 0.0)

    def test_he_std(self):
        # He-uniform limit sqrt(6/fan_in) has std sqrt(2/fan_in)
        spec = MlpSpec((100, 100, 1), activation="relu")
        w = mlp.unflatten(mlp.init_params(spec, 3), spec)[0][0]
        assert w.size == 10_000
        expected = np.sqrt(2.0 / 100)
        assert abs(w.std() - expected) / expected < 0.2


class TestForward:
    def test_hand_computed_2_2_1(self):
        # x=[1,2]; W1=[[1,-1],[0.5,2]] b1=0 relu -> [0, 4.5]; W2=[[1,1]] b2=0.5 -> 5.0
        spec = MlpSpec((2, 2, 1), activation="relu", output_head="linear")
        params = np.zeros(spec.num_params)
        layers = mlp.unflatten(params, spec)
        layers[0][0][:] = [[1.0, -1.0], [0.5, 2.0]]
        layers[1][0][:] = [[1.0, 1.0]]
        layers[1][1][:] = [0.5]
        out = mlp.forward(params, spec, np.array([1.0, 2.0]))
        assert out.shape == (1,)
        assert out[0] == pytest.approx(5.0, abs=1e-12)

    def test_zero_params_linear_head(self):
        spec = MlpSpec((3, 5, 2))
        out = mlp.forward(np.zeros(spec.num_params), spec, np.ones(3))
        assert np.all(out == 0.0)

    def test_softmax_sums_to_one(self):
        spec = MlpSpec((3, 8, 4), output_head="softmax")
        rng = np.random.default_rng(0)
        params = rng.normal(size=spec.num_params)
        out = mlp.forward(params, spec, rng.normal(size=(16, 3)))
        assert out.shape == (16, 4)
        assert np.allclose(out.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(out > 0)

    def test_shape_mismatch(self):
        spec = MlpSpec((3, 4, 2))
        with pytest.raises(ValueError):
            mlp.forward(np.zeros(spec.num_params), spec, np.ones(5))


class TestBackward:
    def test_zero_upstream(self):
        spec = MlpSpec((4, 6, 3))
        params = mlp.init_params(spec, 1)
        g = mlp.backward(params, spec, np.ones(4), np.zeros(3))
        assert np.all(g == 0.0)

    def test_finite_difference_4_8_3(self):
        rng = np.random.default_rng(11)
        spec, params, x = sample_net(rng, (4, 8, 3), "relu", "linear")
        upstream = rng.normal(size=3)
        ga = mlp.backward(params, spec, x, upstream)
        gn = finite_difference_grad(params, spec, x, upstream)
        assert relative_gap(ga, gn) < 1e-4

    @pytest.mark.parametrize("head", ["linear", "softmax"])
    def test_finite_difference_tanh(self, head):
        rng = np.random.default_rng(5)
        spec, params, x = sample_net(rng, (3, 7, 5, 2), "tanh", head)
        upstream = rng.normal(size=2)
        ga = mlp.backward(params, spec, x, upstream)
        gn = finite_difference_grad(params, spec, x, upstream)
        assert relative_gap(ga, gn) < 1e-4

    def test_batch_grad_is_sum_of_per_sample(self):
        rng = np.random.default_rng(3)
        spec = MlpSpec((4, 6, 2), activation="tanh")
        params = rng.normal(size=spec.num_params)
        xs = rng.normal(size=(5, 4))
        ups = rng.normal(size=(5, 2))
        whole = mlp.backward(params, spec, xs, ups)
        parts = sum(mlp.backward(params, spec, xs[i], ups[i]) for i in range(5))
        assert np.allclose(whole, parts, atol=1e-12)

    def test_softmax_cross_entropy_identity(self):
        # dCE/dz = p - onehot; with upstream = -onehot/p, backward through the
        # softmax head must reproduce the same parameter gradient
        rng = np.random.default_rng(9)
        spec = MlpSpec((4, 6, 3), activation="tanh", output_head="softmax")
        params = rng.normal(size=spec.num_params)
        x = rng.normal(size=4)
        target = 1
        p = mlp.forward(params, spec, x)

        upstream = np.zeros(3)
        upstream[target] = -1.0 / p[target]  # d(-log p_t)/dp
        grad_via_softmax = mlp.backward(params, spec, x, upstream)

        lin_spec = MlpSpec((4, 6, 3), activation="tanh", output_head="linear")
        grad_via_logits = mlp.backward(params, lin_spec, x, p - np.eye(3)[target])
        assert np.allclose(grad_via_softmax, grad_via_logits, atol=1e-10)


class TestOptimizer:
    def test_sgd_exact_step(self):
        params = np.array([1.0, -2.0, 3.0])
        grad = np.array([0.5, 0.5, -1.0])
        state = AdamState(learning_rate=0.1, method="sgd")
        new, _ = mlp.adam_step(params, grad, state)
        assert np.allclose(new, params - 0.1 * grad, atol=1e-15)

    def test_sgd_zero_grad_fixed_point(self):
        params = np.array([1.0, 2.0])
        state = AdamState(learning_rate=0.1, method="sgd")
        new, _ = mlp.adam_step(params, np.zeros(2), state)
        assert np.array_equal(new, params)

    def test_adam_converges_on_quadratic(self):
        # f(t) = t^2, grad 2t, from t=1 at lr 0.05
        theta = np.array([1.0])
        state = AdamState(learning_rate=0.05)
        for _ in range(500):
            theta, state = mlp.adam_step(theta, 2.0 * theta, state)
        assert abs(theta[0]) < 1e-3


class TestPolyak:
    def test_hard_copy(self):
        t = np.array([1.0, 2.0])
        o = np.array([3.0, 4.0])
        assert np.array_equal(mlp.polyak_update(t, o, 1.0), o)

    def test_midpoint(self):
        assert mlp.polyak_update(np.zeros(1), np.full(1, 2.0), 0.5)[0] == 1.0

    def test_geometric_convergence(self):
        t = np.array([0.0])
        o = np.array([1.0])
        for i in range(1, 30):
            t = mlp.polyak_update(t, o, 0.1)
            assert abs(t[0] - (1.0 - 0.9**i)) < 1e-12

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            mlp.polyak_update(np.zeros(2), np.zeros(3), 0.5)


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        spec = MlpSpec((5, 16, 16, 3), activation="tanh", output_head="softmax")
        params = np.random.default_rng(4).normal(size=spec.num_params)
        path = tmp_path / "w.bin"
        mlp.save_weights(path, spec, params)
        spec2, params2 = mlp.load_weights(path)
        assert spec2 == spec
        assert params2.tobytes() == params.tobytes()

    def test_truncated_payload_rejected(self, tmp_path):
        spec = MlpSpec((3, 4, 2))
        path = tmp_path / "w.bin"
        mlp.save_weights(path, spec, mlp.init_params(spec, 0))
        data = path.read_bytes()
        path.write_bytes(data[:-8])
        with pytest.raises(ValueError):
            mlp.load_weights(path)

    def test_bad_spec(self):
        with pytest.raises(ValueError):
            MlpSpec((4,))
        with pytest.raises(ValueError):
            MlpSpec((4, 0, 2))
        with pytest.raises(ValueError):
            MlpSpec((4, 2), activation="gelu")
