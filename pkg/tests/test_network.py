from datetime import date

import numpy as np
import pytest

from hotelwatt.dataset import SyntheticParams, generate_synthetic
from hotelwatt.errors import ArgumentError, FormatError, ShapeError, TrainingError
from hotelwatt.features import (
    FeatureMatrix,
    FeatureSpec,
    NormalizationParams,
    apply_normalization,
    build_features,
    fit_normalization,
)
from hotelwatt.network import (
    LayerParams,
    NetworkParams,
    TrainConfig,
    forward,
    forward_batch,
    gradients,
    init_params,
    layer_forward,
    load_model,
    mse,
    predict,
    relu,
    save_model,
    train,
)


def _identity_chain(value=1.0):
    """Width-1 network whose four layers multiply by `value` with zero bias."""
    layers = tuple(
        LayerParams(weights=np.array([[value]]), biases=np.array([0.0])) for _ in range(4)
    )
    return NetworkParams(input_dim=1, hidden_sizes=(1, 1, 1), layers=layers)


def _zero_network(input_dim=2, hidden=(3, 3, 3)):
    dims = (input_dim, *hidden, 1)
    layers = tuple(
        LayerParams(weights=np.zeros((dims[i + 1], dims[i])), biases=np.zeros(dims[i + 1]))
        for i in range(4)
    )
    return NetworkParams(input_dim=input_dim, hidden_sizes=hidden, layers=layers)


def random_network(rng, input_dim, hidden):
    """Random weights AND biases: keeps pre-activations off the ReLU kink,
    where the subgradient convention and finite differences disagree."""
    dims = (input_dim, *hidden, 1)
    layers = tuple(
        LayerParams(
            weights=rng.normal(size=(dims[i + 1], dims[i])),
            biases=rng.normal(size=dims[i + 1]),
        )
        for i in range(4)
    )
    return NetworkParams(input_dim=input_dim, hidden_sizes=tuple(hidden), layers=layers)


def finite_difference_gradients(network, x, y, eps=1e-5):
    """Central-difference oracle, independent of the analytic pass."""

    def loss_with(layer_idx, attr, index, delta):
        layers = []
        for i, layer in enumerate(network.layers):
            w = layer.weights.copy()
            b = layer.biases.copy()
            if i == layer_idx:
                if attr == "w":
                    w[index] += delta
                else:
                    b[index] += delta
            layers.append(LayerParams(w, b))
        perturbed = NetworkParams(network.input_dim, network.hidden_sizes, tuple(layers))
        return mse(forward_batch(perturbed, x), y)

    grads = []
    for layer_idx, layer in enumerate(network.layers):
        dw = np.zeros_like(layer.weights)
        for index in np.ndindex(layer.weights.shape):
            up = loss_with(layer_idx, "w", index, eps)
            down = loss_with(layer_idx, "w", index, -eps)
            dw[index] = (up - down) / (2 * eps)
        db = np.zeros_like(layer.biases)
        for index in np.ndindex(layer.biases.shape):
            up = loss_with(layer_idx, "b", index, eps)
            down = loss_with(layer_idx, "b", index, -eps)
            db[index] = (up - down) / (2 * eps)
        grads.append((dw, db))
    return grads


def max_relative_error(analytic, numeric):
    worst = 0.0
    for (aw, ab), (nw, nb) in zip(analytic, numeric):
        for a, n in ((aw, nw), (ab, nb)):
            denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)
            worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


class TestRelu:
    @pytest.mark.parametrize("value,expected", [(-1.0, 0.0), (2.0, 2.0), (0.0, 0.0)])
    def test_branches(self, value, expected):
        assert relu(value) == expected


class TestLayerForward:
    def test_zero_weights_give_relu_of_bias(self):
        layer = LayerParams(weights=np.zeros((3, 2)), biases=np.array([1.0, -2.0, 0.5]))
        out = layer_forward([4.0, 5.0], layer, "relu")
        assert out.tolist() == [1.0, 0.0, 0.5]

    def test_hand_computed_dot_product(self):
        layer = LayerParams(weights=np.array([[0.5, 0.25]]), biases=np.array([-0.5]))
        assert layer_forward([1.0, 2.0], layer, "relu").tolist() == [0.5]

    def test_negative_preactivation_clips_to_zero(self):
        layer = LayerParams(weights=np.array([[0.5, 0.25]]), biases=np.array([-2.0]))
        assert layer_forward([1.0, 2.0], layer, "relu").tolist() == [0.0]

    def test_identity_activation_keeps_sign(self):
        layer = LayerParams(weights=np.array([[0.5, 0.25]]), biases=np.array([-2.0]))
        assert layer_forward([1.0, 2.0], layer, "identity").tolist() == [-1.0]

    def test_dimension_mismatch(self):
        layer = LayerParams(weights=np.zeros((1, 2)), biases=np.zeros(1))
        with pytest.raises(ShapeError):
            layer_forward([1.0, 2.0, 3.0], layer)


class TestForward:
    def test_zero_network_outputs_zero(self):
        net = _zero_network()
        assert forward(net, [3.0, -1.0]) == 0.0

    def test_width_one_identity_chain_passes_value_through(self):
        assert forward(_identity_chain(), [0.3]) == pytest.approx(0.3, abs=1e-15)

    def test_forward_is_deterministic(self):
        net = init_params(3, (4, 3, 2), seed=5)
        x = [0.1, 0.5, 0.9]
        assert forward(net, x) == forward(net, x)

    def test_positive_homogeneity_single_hidden_layer(self):
        # one ReLU layer + linear output, zero biases: f(a*x) = a*f(x) for a > 0
        rng = np.random.default_rng(17)
        hidden = LayerParams(weights=rng.normal(size=(6, 3)), biases=np.zeros(6))
        out = LayerParams(weights=rng.normal(size=(1, 6)), biases=np.zeros(1))
        x = rng.normal(size=3)
        base = layer_forward(layer_forward(x, hidden, "relu"), out, "identity")[0]
        for alpha in (0.5, 2.0, 7.3):
            scaled = layer_forward(layer_forward(alpha * x, hidden, "relu"), out, "identity")[0]
            assert scaled == pytest.approx(alpha * base, rel=1e-12)


class TestMse:
    def test_identical_vectors(self):
        assert mse([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_hand_computed(self):
        assert mse([0.0, 0.0], [3.0, 4.0]) == 12.5

    def test_single_element(self):
        assert mse([1.0], [3.0]) == 4.0

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            mse([1.0], [1.0, 2.0])

    def test_nonnegative_and_zero_iff_equal(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            a = rng.normal(size=8)
            b = rng.normal(size=8)
            assert mse(a, b) >= 0.0
            assert (mse(a, b) == 0.0) == bool(np.array_equal(a, b))


class TestGradients:
    def test_zero_error_batch_has_zero_gradients(self):
        net = _zero_network()
        x = np.array([[1.0, 2.0], [0.5, -1.0]])
        y = np.zeros(2)  # zero network predicts 0 exactly
        for dw, db in gradients(net, x, y):
            assert not dw.any()
            assert not db.any()

    def test_width_one_chain_output_weight_gradient(self):
        # single sample: d(mse)/d(w_out) = 2 * (pred - y) * previous activation
        net = _identity_chain(value=0.8)
        x = np.array([[0.7]])
        y = np.array([0.1])
        pred = forward(net, x[0])
        prev_activation = 0.7 * 0.8**3
        expected = 2.0 * (pred - y[0]) * prev_activation
        dw_out = gradients(net, x, y)[3][0]
        assert dw_out[0, 0] == pytest.approx(expected, rel=1e-12)

    def test_matches_finite_differences_on_random_networks(self):
        rng = np.random.default_rng(2024)
        for _ in range(5):
            input_dim = int(rng.integers(1, 5))
            hidden = (int(rng.integers(1, 6)), int(rng.integers(1, 5)), int(rng.integers(1, 4)))
            net = random_network(rng, input_dim, hidden)
            n = int(rng.integers(1, 9))
            x = rng.normal(size=(n, input_dim))
            y = rng.normal(size=n)
            analytic = gradients(net, x, y)
            numeric = finite_difference_gradients(net, x, y)
            assert max_relative_error(analytic, numeric) < 1e-4

    def test_shape_validation(self):
        net = _zero_network()
        with pytest.raises(ShapeError):
            gradients(net, np.zeros((2, 3)), np.zeros(2))


class TestInit:
    def test_same_seed_identical(self):
        a = init_params(3, (4, 4, 4), seed=9)
        b = init_params(3, (4, 4, 4), seed=9)
        for la, lb in zip(a.layers, b.layers):
            assert np.array_equal(la.weights, lb.weights)
            assert np.array_equal(la.biases, lb.biases)

    def test_biases_start_at_zero(self):
        net = init_params(3, (4, 4, 4), seed=1)
        assert all(not layer.biases.any() for layer in net.layers)

    def test_different_seeds_differ(self):
        a = init_params(3, (4, 4, 4), seed=1)
        b = init_params(3, (4, 4, 4), seed=2)
        assert not np.array_equal(a.layers[0].weights, b.layers[0].weights)

    def test_uniform_small_scheme_bounded(self):
        net = init_params(3, (4, 4, 4), scheme="uniform-small", seed=1)
        for layer in net.layers:
            assert np.all(np.abs(layer.weights) <= 0.05)

    def test_unknown_scheme_rejected(self):
        with pytest.raises(ArgumentError):
            init_params(3, (4, 4, 4), scheme="xavier")


def _synthetic_matrix(noise_std=0.0, days=365, seed=3):
    ds = generate_synthetic(days, SyntheticParams(noise_std=noise_std), seed=seed)
    spec = FeatureSpec(selected_features=("RDD", "temp_mean"))
    matrix = build_features(ds, spec)
    norm = fit_normalization(matrix)
    return apply_normalization(matrix, norm), norm, matrix


class TestTrain:
    def test_noise_free_linear_target_fits_below_1e3(self):
        scaled, _, _ = _synthetic_matrix()
        config = TrainConfig(epochs=500, early_stop_patience=None, seed=1)
        result = train(init_params(2, (8, 8, 8), "he", 1), scaled, config)
        assert result.loss_history[-1] < 1e-3
        assert result.epochs_run == 500
        assert len(result.loss_history) == 500

    def test_huge_learning_rate_diverges_with_epoch_in_message(self):
        scaled, _, _ = _synthetic_matrix(days=60)
        config = TrainConfig(learning_rate=1e6, epochs=20, seed=0)
        with pytest.raises(TrainingError, match="epoch"):
            train(init_params(2, (8, 8, 8), "he", 0), scaled, config)

    def test_identical_config_and_seed_is_bitwise_identical(self):
        scaled, _, _ = _synthetic_matrix(days=90)
        config = TrainConfig(epochs=40, seed=11)
        runs = [train(init_params(2, (4, 4, 4), "he", 11), scaled, config) for _ in range(2)]
        assert runs[0].loss_history == runs[1].loss_history
        for la, lb in zip(runs[0].params.layers, runs[1].params.layers):
            assert np.array_equal(la.weights, lb.weights)
            assert np.array_equal(la.biases, lb.biases)

    def test_vanishing_learning_rate_changes_nothing(self):
        scaled, _, _ = _synthetic_matrix(days=60)
        init = init_params(2, (4, 4, 4), "he", 7)
        config = TrainConfig(learning_rate=1e-30, epochs=15, early_stop_patience=None, seed=7)
        result = train(init, scaled, config)
        assert max(result.loss_history) - min(result.loss_history) < 1e-12
        for trained, original in zip(result.params.layers, init.layers):
            np.testing.assert_allclose(trained.weights, original.weights, atol=1e-12)

    def test_early_stopping_stops_before_epoch_budget(self):
        scaled, _, _ = _synthetic_matrix(days=365)
        config = TrainConfig(epochs=2000, early_stop_patience=20, seed=0)
        result = train(init_params(2, (8, 8, 8), "he", 0), scaled, config)
        assert result.epochs_run < 2000
        assert len(result.loss_history) == result.epochs_run

    def test_train_does_not_mutate_initial_params(self):
        scaled, _, _ = _synthetic_matrix(days=60)
        init = init_params(2, (4, 4, 4), "he", 5)
        before = [layer.weights.copy() for layer in init.layers]
        train(init, scaled, TrainConfig(epochs=5, seed=5))
        for layer, original in zip(init.layers, before):
            assert np.array_equal(layer.weights, original)


class TestPredict:
    def test_zero_network_predicts_target_minimum(self):
        net = _zero_network(input_dim=1)
        norm = NormalizationParams(("a",), np.array([0.0]), np.array([1.0]), 100.0, 200.0)
        matrix = FeatureMatrix(
            dates=(date(2011, 1, 1), date(2011, 1, 2)),
            feature_names=("a",),
            features=np.array([[0.2], [0.9]]),
            target=np.array([0.0, 0.0]),
        )
        assert predict(net, matrix, norm).tolist() == [100.0, 100.0]

    def test_trained_model_matches_targets_within_one_percent(self):
        scaled, norm, raw = _synthetic_matrix()
        config = TrainConfig(epochs=500, early_stop_patience=None, seed=1)
        result = train(init_params(2, (8, 8, 8), "he", 1), scaled, config)
        predictions = predict(result.params, scaled, norm)
        assert np.all(np.abs(predictions - raw.target) / raw.target < 0.01)

    def test_single_row_matrix(self):
        net = init_params(2, (3, 3, 3), seed=0)
        norm = NormalizationParams(("a", "b"), np.zeros(2), np.ones(2), 0.0, 1.0)
        matrix = FeatureMatrix(
            dates=(date(2011, 1, 1),), feature_names=("a", "b"),
            features=np.array([[0.1, 0.2]]), target=np.array([0.5]),
        )
        assert predict(net, matrix, norm).shape == (1,)


class TestModelDocument:
    def _bundle_parts(self):
        scaled, norm, _ = _synthetic_matrix(days=60)
        spec = FeatureSpec(selected_features=("RDD", "temp_mean"))
        config = TrainConfig(epochs=5, seed=2)
        result = train(init_params(2, (4, 3, 2), "he", 2), scaled, config)
        return result.params, norm, spec, config

    def test_round_trip_is_bit_exact(self):
        network, norm, spec, config = self._bundle_parts()
        bundle = load_model(save_model(network, norm, spec, config))
        assert bundle.feature_spec == spec
        assert bundle.train_config == config
        assert bundle.network.hidden_sizes == network.hidden_sizes
        for loaded, original in zip(bundle.network.layers, network.layers):
            assert np.array_equal(loaded.weights, original.weights)
            assert np.array_equal(loaded.biases, original.biases)
        assert np.array_equal(bundle.normalization.feature_min, norm.feature_min)
        assert bundle.normalization.target_max == norm.target_max

    def test_save_is_deterministic_text(self):
        network, norm, spec, config = self._bundle_parts()
        assert save_model(network, norm, spec, config) == save_model(network, norm, spec, config)

    def test_tampered_dimension_rejected(self):
        network, norm, spec, config = self._bundle_parts()
        text = save_model(network, norm, spec, config).replace('"input_dim": 2', '"input_dim": 5')
        with pytest.raises(FormatError):
            load_model(text)

    def test_unknown_version_names_supported(self):
        network, norm, spec, config = self._bundle_parts()
        text = save_model(network, norm, spec, config).replace('"version": 1', '"version": 99')
        with pytest.raises(FormatError, match="supported versions: 1"):
            load_model(text)

    def test_garbage_document_rejected(self):
        with pytest.raises(FormatError):
            load_model("not json at all {")
