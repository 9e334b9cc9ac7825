import math

import numpy as np
import pytest

from pujoint import losses, nn
from pujoint.errors import FormatError, NumericError, ShapeError

from conftest import fd_gradient, flatten_grads, flatten_params, max_relative_error


def linear_model(w, b=0.0):
    w = np.asarray(w, dtype=float).reshape(-1, 1)
    return nn.MLPModel((w.shape[0], 1), [w], [np.array([float(b)])])


class TestForward:
    def test_zero_model_outputs_half(self):
        model = nn.MLPModel(
            (3, 4, 1),
            [np.zeros((3, 4)), np.zeros((4, 1))],
            [np.zeros(4), np.zeros(1)],
        )
        out = nn.forward(model, np.random.default_rng(0).normal(size=(7, 3)))
        assert np.allclose(out, 0.5)

    def test_orthogonal_input_gives_half(self):
        model = linear_model([1.0, 0.0])
        assert nn.forward(model, np.array([[0.0, 5.0]]))[0] == pytest.approx(0.5)

    def test_logistic_of_two(self):
        model = linear_model([1.0])
        # oracle: 1 / (1 + e^-2)
        assert nn.forward(model, np.array([[2.0]]))[0] == pytest.approx(0.8807970779778823, rel=1e-12)

    def test_outputs_strictly_inside_unit_interval(self):
        model = linear_model([1.0], b=0.0)
        x = np.array([[-1e4], [-50.0], [0.0], [50.0], [1e4]])
        out = nn.forward(model, x)
        assert np.all(out > 0.0) and np.all(out < 1.0)

    def test_dimension_mismatch(self):
        model = nn.init_mlp((3, 2, 1), seed=0)
        with pytest.raises(ShapeError):
            nn.forward(model, np.zeros((4, 5)))
        with pytest.raises(ShapeError):
            nn.forward(model, np.zeros(3))

    def test_deterministic(self):
        model = nn.init_mlp((4, 8, 1), seed=5)
        x = np.random.default_rng(2).normal(size=(10, 4))
        assert np.array_equal(nn.forward(model, x), nn.forward(model, x))


class TestBackward:
    def test_zero_upstream_gives_zero_gradient(self):
        model = nn.init_mlp((3, 5, 1), seed=1)
        x = np.random.default_rng(3).normal(size=(6, 3))
        grads = nn.backward(model, x, np.zeros(6))
        assert all(np.all(g == 0) for g in grads.weights + grads.biases)

    def test_single_layer_hand_chain_rule(self):
        # loss = sigma(x) for one sample: dL/dw = sigma(1-sigma) * x, dL/db likewise
        model = linear_model([0.7, -0.4], b=0.2)
        x = np.array([[1.5, -2.0]])
        s = nn.forward(model, x)[0]
        grads = nn.backward(model, x, np.ones(1))
        expected_w = s * (1 - s) * x[0]
        assert np.allclose(grads.weights[0].ravel(), expected_w, rtol=1e-12)
        assert grads.biases[0][0] == pytest.approx(s * (1 - s), rel=1e-12)

    def test_upstream_length_checked(self):
        model = nn.init_mlp((2, 1), seed=0)
        with pytest.raises(ShapeError):
            nn.backward(model, np.zeros((3, 2)), np.zeros(4))

    @pytest.mark.parametrize("sizes,activation", [
        ((2, 1), "relu"),
        ((3, 8, 1), "relu"),
        ((4, 16, 8, 1), "relu"),
        ((3, 8, 1), "tanh"),
    ])
    def test_matches_finite_differences(self, sizes, activation):
        model = nn.init_mlp(sizes, seed=11, hidden_activation=activation)
        rng = np.random.default_rng(7)
        x = rng.normal(size=(9, sizes[0]))
        weights = rng.normal(size=9)

        def scalar(m):
            return float(weights @ nn.forward(m, x))

        analytic = flatten_grads(nn.backward(model, x, weights))
        numeric = fd_gradient(model, scalar, step=1e-5)
        assert max_relative_error(analytic, numeric) < 1e-4


class TestAmsGrad:
    def test_zero_gradient_keeps_parameters(self):
        model = nn.init_mlp((2, 4, 1), seed=3)
        before = flatten_params(model).copy()
        opt = nn.AmsGrad(model, lr=0.1)
        zero = nn.Gradients([np.zeros_like(w) for w in model.weights],
                            [np.zeros_like(b) for b in model.biases])
        opt.step(model, zero)
        assert opt.step_count == 1
        assert np.array_equal(flatten_params(model), before)

    def test_constant_gradient_moves_monotonically(self):
        model = linear_model([0.0])
        opt = nn.AmsGrad(model, lr=0.01)
        g = nn.Gradients([np.array([[2.5]])], [np.array([-1.0])])
        w_path, b_path = [model.weights[0][0, 0]], [model.biases[0][0]]
        for _ in range(100):
            opt.step(model, g)
            w_path.append(model.weights[0][0, 0])
            b_path.append(model.biases[0][0])
        assert all(b < a for a, b in zip(w_path, w_path[1:]))  # against +grad
        assert all(b > a for a, b in zip(b_path, b_path[1:]))  # against -grad

    def test_max_second_moment_never_decreases(self, rng):
        model = nn.init_mlp((3, 4, 1), seed=0)
        opt = nn.AmsGrad(model, lr=0.01)
        prev = opt.max_second_moments
        for _ in range(25):
            g = nn.Gradients([rng.normal(size=w.shape) * rng.uniform(0, 3) for w in model.weights],
                             [rng.normal(size=b.shape) for b in model.biases])
            opt.step(model, g)
            cur = opt.max_second_moments
            for a, b in zip(prev, cur):
                assert np.all(b >= a)
            prev = cur

    def test_nonfinite_gradient_aborts(self):
        model = nn.init_mlp((2, 1), seed=0)
        opt = nn.AmsGrad(model, lr=0.01)
        bad = nn.Gradients([np.array([[np.nan], [1.0]])], [np.zeros(1)])
        with pytest.raises(NumericError):
            opt.step(model, bad)

    def test_shape_mismatch_rejected(self):
        model = nn.init_mlp((2, 1), seed=0)
        opt = nn.AmsGrad(model, lr=0.01)
        with pytest.raises(ShapeError):
            opt.step(model, nn.Gradients([np.zeros((3, 1))], [np.zeros(1)]))

    def test_identical_seeds_identical_trajectory(self):
        def run():
            model = nn.init_mlp((3, 6, 1), seed=42)
            opt = nn.AmsGrad(model, lr=0.02)
            data_rng = np.random.default_rng(9)
            x = data_rng.normal(size=(12, 3))
            for _ in range(20):
                sigma = nn.forward(model, x)
                risk = losses.upu_risk(sigma[:4], sigma[4:], 0.4)
                grads = nn.backward(model, x, np.concatenate([risk.grad_p, risk.grad_u]))
                opt.step(model, grads)
            return flatten_params(model)

        assert np.array_equal(run(), run())


class TestModelConstruction:
    def test_output_width_must_be_one(self):
        with pytest.raises(ValueError):
            nn.init_mlp((3, 4, 2), seed=0)

    def test_init_scale_and_seeding(self):
        m1 = nn.init_mlp((9, 16, 1), seed=8)
        m2 = nn.init_mlp((9, 16, 1), seed=8)
        m3 = nn.init_mlp((9, 16, 1), seed=9)
        assert np.array_equal(m1.weights[0], m2.weights[0])
        assert not np.array_equal(m1.weights[0], m3.weights[0])
        assert np.max(np.abs(m1.weights[0])) <= 1.0 / math.sqrt(9)
        assert np.max(np.abs(m1.weights[1])) <= 1.0 / math.sqrt(16)
        assert all(np.all(b == 0) for b in m1.biases)

    def test_inconsistent_layer_shapes_rejected(self):
        with pytest.raises(ShapeError):
            nn.MLPModel((2, 3, 1), [np.zeros((2, 3)), np.zeros((2, 1))],
                        [np.zeros(3), np.zeros(1)])

    def test_copy_is_independent(self):
        m = nn.init_mlp((2, 3, 1), seed=0)
        c = m.copy()
        c.weights[0][0, 0] += 1.0
        assert m.weights[0][0, 0] != c.weights[0][0, 0]


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        model = nn.init_mlp((5, 7, 3, 1), seed=13, hidden_activation="tanh")
        path = tmp_path / "model.npz"
        nn.save_checkpoint(model, path)
        loaded = nn.load_checkpoint(path)
        assert loaded.layer_sizes == model.layer_sizes
        assert loaded.hidden_activation == "tanh"
        for a, b in zip(model.weights + model.biases, loaded.weights + loaded.biases):
            assert np.array_equal(a, b) and a.dtype == b.dtype

    def test_bad_file_raises_format_error(self, tmp_path):
        path = tmp_path / "junk.npz"
        path.write_bytes(b"not a checkpoint")
        with pytest.raises(FormatError):
            nn.load_checkpoint(path)

    def test_missing_version_rejected(self, tmp_path):
        path = tmp_path / "noversion.npz"
        np.savez(path, layer_sizes=np.array([2, 1]))
        with pytest.raises(FormatError):
            nn.load_checkpoint(path)
