"""Feedforward regressor with three hidden ReLU layers and a linear output.

Each unit computes ``f(weights . inputs + bias)``; hidden units use ReLU,
the single output unit is linear so normalized targets near zero stay
reachable. Training is mini-batch gradient descent with momentum on the
mean squared error. All accumulation runs in float64 with a fixed index
order, so a fixed seed gives bitwise-reproducible results.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict
from typing import Sequence

import numpy as np

from .errors import ArgumentError, FormatError, ShapeError, TrainingError
from .features import FeatureSpec, NormalizationParams, FeatureMatrix, denormalize_target

MODEL_VERSION = 1
INIT_SCHEMES = ("he", "uniform-small")
#: fraction of training rows held out (chronological tail) for early stopping
EARLY_STOP_TAIL = 0.1


def relu(v: float) -> float:
    """Rectified linear activation: v for v >= 0, else 0."""
    return v if v >= 0 else 0.0


@dataclass(frozen=True, eq=False)
class LayerParams:
    """Dense layer: weights are (out_dim, in_dim), biases (out_dim,)."""

    weights: np.ndarray
    biases: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        object.__setattr__(self, "biases", np.asarray(self.biases, dtype=float))
        if self.weights.ndim != 2 or self.biases.shape != (self.weights.shape[0],):
            raise ShapeError(
                f"layer shapes inconsistent: weights {self.weights.shape}, "
                f"biases {self.biases.shape}"
            )
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.biases))):
            raise ArgumentError("layer parameters must be finite")

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True, eq=False)
class NetworkParams:
    """Parameter set for the input -> h1 -> h2 -> h3 -> 1 chain."""

    input_dim: int
    hidden_sizes: tuple[int, int, int]
    layers: tuple[LayerParams, LayerParams, LayerParams, LayerParams]

    def __post_init__(self):
        if len(self.hidden_sizes) != 3 or any(h < 1 for h in self.hidden_sizes):
            raise ArgumentError(f"hidden_sizes must be three counts >= 1, got {self.hidden_sizes}")
        expected = (self.input_dim, *self.hidden_sizes, 1)
        for i, layer in enumerate(self.layers):
            if (layer.in_dim, layer.out_dim) != (expected[i], expected[i + 1]):
                raise ShapeError(
                    f"layer {i} is {layer.out_dim}x{layer.in_dim}, expected "
                    f"{expected[i + 1]}x{expected[i]}"
                )


@dataclass(frozen=True)
class TrainConfig:
    """Every knob of the iterative fit; defaults are the package defaults."""

    learning_rate: float = 0.01
    epochs: int = 2000
    batch_size: int = 32
    seed: int = 0
    init_scheme: str = "he"
    momentum: float = 0.9
    early_stop_patience: int | None = 50
    shuffle_each_epoch: bool = True

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ArgumentError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs < 1:
            raise ArgumentError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ArgumentError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 <= self.momentum < 1.0:
            raise ArgumentError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.init_scheme not in INIT_SCHEMES:
            raise ArgumentError(
                f"unknown init_scheme {self.init_scheme!r}, expected one of {INIT_SCHEMES}"
            )
        if self.early_stop_patience is not None and self.early_stop_patience < 1:
            raise ArgumentError("early_stop_patience must be >= 1 or None")


@dataclass(frozen=True, eq=False)
class TrainResult:
    params: NetworkParams
    loss_history: tuple[float, ...]
    epochs_run: int


def layer_forward(inputs, layer: LayerParams, activation: str = "relu") -> np.ndarray:
    """One dense layer on a single input vector."""
    inputs = np.asarray(inputs, dtype=float)
    if inputs.shape != (layer.in_dim,):
        raise ShapeError(f"layer expects {layer.in_dim} inputs, got shape {inputs.shape}")
    z = layer.weights @ inputs + layer.biases
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "identity":
        return z
    raise ArgumentError(f"unknown activation {activation!r}")


def forward_batch(network: NetworkParams, inputs: np.ndarray) -> np.ndarray:
    """Predictions (normalized units) for a whole (n, input_dim) block."""
    a = np.asarray(inputs, dtype=float)
    if a.ndim != 2 or a.shape[1] != network.input_dim:
        raise ShapeError(
            f"network expects (n, {network.input_dim}) inputs, got shape {a.shape}"
        )
    return _forward_arrays(
        [l.weights for l in network.layers], [l.biases for l in network.layers], a
    )


def forward(network: NetworkParams, x) -> float:
    """Prediction (normalized units) for one feature vector."""
    x = np.asarray(x, dtype=float)
    if x.shape != (network.input_dim,):
        raise ShapeError(f"network expects {network.input_dim} inputs, got shape {x.shape}")
    return float(forward_batch(network, x[np.newaxis, :])[0])


def mse(predictions, targets) -> float:
    predictions = np.asarray(predictions, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if predictions.shape != targets.shape or predictions.ndim != 1 or len(predictions) == 0:
        raise ShapeError(
            f"mse needs equal-length nonempty vectors, got {predictions.shape} and {targets.shape}"
        )
    diff = predictions - targets
    return float(np.dot(diff, diff) / len(diff))


def _forward_arrays(weights: list[np.ndarray], biases: list[np.ndarray], x: np.ndarray) -> np.ndarray:
    a = x
    for w, b in zip(weights[:-1], biases[:-1]):
        a = np.maximum(a @ w.T + b, 0.0)
    return (a @ weights[-1].T + biases[-1])[:, 0]


def _gradient_arrays(
    weights: list[np.ndarray],
    biases: list[np.ndarray],
    x: np.ndarray,
    y: np.ndarray,
) -> list[tuple[np.ndarray, np.ndarray]]:
    n = len(y)
    activations = [x]
    pre_acts = []
    a = x
    for w, b in zip(weights[:-1], biases[:-1]):
        z = a @ w.T + b
        pre_acts.append(z)
        a = np.maximum(z, 0.0)
        activations.append(a)
    predictions = (a @ weights[-1].T + biases[-1])[:, 0]

    # dL/dz for the linear output unit
    delta = ((2.0 / n) * (predictions - y))[:, np.newaxis]

    reversed_grads = []
    for i in range(3, -1, -1):
        reversed_grads.append((delta.T @ activations[i], delta.sum(axis=0)))
        if i > 0:
            delta = (delta @ weights[i]) * (pre_acts[i - 1] > 0)
    return reversed_grads[::-1]


def gradients(network: NetworkParams, batch_inputs, batch_targets) -> list[tuple[np.ndarray, np.ndarray]]:
    """Exact gradients of the batch MSE for every weight and bias.

    Reverse-mode pass; the ReLU subgradient at exactly 0 is taken as 0.
    Returns one (d_weights, d_biases) pair per layer, input side first.
    """
    x = np.asarray(batch_inputs, dtype=float)
    y = np.asarray(batch_targets, dtype=float)
    if x.ndim != 2 or x.shape[1] != network.input_dim or y.shape != (x.shape[0],) or len(y) == 0:
        raise ShapeError(
            f"gradients need (n, {network.input_dim}) inputs and (n,) targets, "
            f"got {x.shape} and {y.shape}"
        )
    return _gradient_arrays(
        [l.weights for l in network.layers], [l.biases for l in network.layers], x, y
    )


def init_params(
    input_dim: int,
    hidden_sizes: Sequence[int],
    scheme: str = "he",
    seed: int = 0,
) -> NetworkParams:
    """Seed-deterministic initialization; biases start at exactly 0."""
    if input_dim < 1:
        raise ArgumentError(f"input_dim must be >= 1, got {input_dim}")
    hidden = tuple(int(h) for h in hidden_sizes)
    if len(hidden) != 3 or any(h < 1 for h in hidden):
        raise ArgumentError(f"hidden_sizes must be three counts >= 1, got {hidden_sizes}")
    if scheme not in INIT_SCHEMES:
        raise ArgumentError(f"unknown init scheme {scheme!r}, expected one of {INIT_SCHEMES}")

    rng = np.random.default_rng(seed)
    dims = (input_dim, *hidden, 1)
    layers = []
    for in_dim, out_dim in zip(dims, dims[1:]):
        if scheme == "he":
            weights = rng.normal(0.0, math.sqrt(2.0 / in_dim), size=(out_dim, in_dim))
        else:
            weights = rng.uniform(-0.05, 0.05, size=(out_dim, in_dim))
        layers.append(LayerParams(weights=weights, biases=np.zeros(out_dim)))
    return NetworkParams(input_dim=input_dim, hidden_sizes=hidden, layers=tuple(layers))


def train(init: NetworkParams, train_matrix: FeatureMatrix, config: TrainConfig) -> TrainResult:
    """Mini-batch gradient descent with momentum on normalized rows.

    When early stopping is enabled the chronological tail of the rows
    (EARLY_STOP_TAIL) is held out as a validation set and the best
    parameters seen on it are returned; otherwise the final parameters.
    Raises TrainingError naming the epoch if the loss turns non-finite.
    """
    if train_matrix.features.shape[1] != init.input_dim:
        raise ShapeError(
            f"matrix has {train_matrix.features.shape[1]} columns, network expects {init.input_dim}"
        )
    x_all = train_matrix.features
    y_all = train_matrix.target
    n = len(y_all)

    val_n = int(math.floor(n * EARLY_STOP_TAIL))
    use_early_stop = config.early_stop_patience is not None and val_n >= 1 and n - val_n >= 1
    fit_n = n - val_n if use_early_stop else n
    x_fit, y_fit = x_all[:fit_n], y_all[:fit_n]

    weights = [l.weights.copy() for l in init.layers]
    biases = [l.biases.copy() for l in init.layers]
    vel_w = [np.zeros_like(w) for w in weights]
    vel_b = [np.zeros_like(b) for b in biases]

    def snapshot() -> tuple[list[np.ndarray], list[np.ndarray]]:
        return [w.copy() for w in weights], [b.copy() for b in biases]

    rng = np.random.default_rng(config.seed)
    loss_history: list[float] = []
    best_val = math.inf
    best_snapshot = None
    stale = 0
    epochs_run = 0

    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, config.epochs + 1):
            order = rng.permutation(fit_n) if config.shuffle_each_epoch else np.arange(fit_n)
            for start in range(0, fit_n, config.batch_size):
                batch = order[start : start + config.batch_size]
                grads = _gradient_arrays(weights, biases, x_fit[batch], y_fit[batch])
                for i, (dw, db) in enumerate(grads):
                    vel_w[i] = config.momentum * vel_w[i] - config.learning_rate * dw
                    vel_b[i] = config.momentum * vel_b[i] - config.learning_rate * db
                    weights[i] = weights[i] + vel_w[i]
                    biases[i] = biases[i] + vel_b[i]

            epoch_loss = float(np.mean((_forward_arrays(weights, biases, x_all) - y_all) ** 2))
            loss_history.append(epoch_loss)
            epochs_run = epoch
            if not math.isfinite(epoch_loss):
                raise TrainingError(f"training diverged at epoch {epoch} (loss is non-finite)")

            if use_early_stop:
                residual = _forward_arrays(weights, biases, x_all[fit_n:]) - y_all[fit_n:]
                val_loss = float(np.mean(residual**2))
                if val_loss < best_val:
                    best_val = val_loss
                    best_snapshot = snapshot()
                    stale = 0
                else:
                    stale += 1
                    if stale >= config.early_stop_patience:
                        break

    if use_early_stop and best_snapshot is not None:
        weights, biases = best_snapshot
    final = NetworkParams(
        input_dim=init.input_dim,
        hidden_sizes=init.hidden_sizes,
        layers=tuple(LayerParams(w.copy(), b.copy()) for w, b in zip(weights, biases)),
    )
    return TrainResult(params=final, loss_history=tuple(loss_history), epochs_run=epochs_run)


def predict(network: NetworkParams, matrix: FeatureMatrix, norm: NormalizationParams) -> np.ndarray:
    """Per-row forward pass, denormalized back to kWh."""
    return denormalize_target(forward_batch(network, matrix.features), norm)


@dataclass(frozen=True)
class ModelBundle:
    """Everything needed to reproduce predictions from raw daily records."""

    network: NetworkParams
    normalization: NormalizationParams
    feature_spec: FeatureSpec
    train_config: TrainConfig


def save_model(
    network: NetworkParams,
    norm: NormalizationParams,
    spec: FeatureSpec,
    train_config: TrainConfig,
) -> str:
    """Serialize a model to a JSON document with bit-exact float round-trip."""
    doc = {
        "version": MODEL_VERSION,
        "input_dim": network.input_dim,
        "hidden_sizes": list(network.hidden_sizes),
        "feature_spec": {
            "selected_features": list(spec.selected_features),
            "base_temp_c": spec.base_temp_c,
            "clip_negative_cdd": spec.clip_negative_cdd,
        },
        "normalization": {
            "feature_names": list(norm.feature_names),
            "feature_min": [float(v) for v in norm.feature_min],
            "feature_max": [float(v) for v in norm.feature_max],
            "target_min": norm.target_min,
            "target_max": norm.target_max,
        },
        "layers": [
            {
                "weights": [[float(v) for v in row] for row in layer.weights],
                "biases": [float(v) for v in layer.biases],
            }
            for layer in network.layers
        ],
        "train_config": asdict(train_config),
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def load_model(document: str) -> ModelBundle:
    """Parse and validate a model document produced by :func:`save_model`."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise FormatError(f"model document is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise FormatError("model document must be a JSON object")
    version = doc.get("version")
    if version != MODEL_VERSION:
        raise FormatError(
            f"unsupported model version {version!r}; supported versions: {MODEL_VERSION}"
        )
    try:
        spec = FeatureSpec(
            selected_features=tuple(doc["feature_spec"]["selected_features"]),
            base_temp_c=float(doc["feature_spec"]["base_temp_c"]),
            clip_negative_cdd=bool(doc["feature_spec"]["clip_negative_cdd"]),
        )
        norm = NormalizationParams(
            feature_names=tuple(doc["normalization"]["feature_names"]),
            feature_min=np.asarray(doc["normalization"]["feature_min"], dtype=float),
            feature_max=np.asarray(doc["normalization"]["feature_max"], dtype=float),
            target_min=float(doc["normalization"]["target_min"]),
            target_max=float(doc["normalization"]["target_max"]),
        )
        layers = tuple(
            LayerParams(
                weights=np.asarray(entry["weights"], dtype=float),
                biases=np.asarray(entry["biases"], dtype=float),
            )
            for entry in doc["layers"]
        )
        if len(layers) != 4:
            raise FormatError(f"expected 4 layers, found {len(layers)}")
        network = NetworkParams(
            input_dim=int(doc["input_dim"]),
            hidden_sizes=tuple(int(h) for h in doc["hidden_sizes"]),
            layers=layers,
        )
        raw_config = dict(doc["train_config"])
        patience = raw_config.get("early_stop_patience")
        config = TrainConfig(
            learning_rate=float(raw_config["learning_rate"]),
            epochs=int(raw_config["epochs"]),
            batch_size=int(raw_config["batch_size"]),
            seed=int(raw_config["seed"]),
            init_scheme=str(raw_config["init_scheme"]),
            momentum=float(raw_config["momentum"]),
            early_stop_patience=None if patience is None else int(patience),
            shuffle_each_epoch=bool(raw_config["shuffle_each_epoch"]),
        )
    except FormatError:
        raise
    except (KeyError, TypeError, ValueError, ShapeError, ArgumentError) as exc:
        raise FormatError(f"malformed model document: {exc}") from None
    if tuple(norm.feature_names) != tuple(spec.selected_features):
        raise FormatError("normalization columns do not match the feature spec")
    return ModelBundle(network=network, normalization=norm, feature_spec=spec, train_config=config)
