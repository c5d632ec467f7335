"""Accuracy metrics, hidden-width search, and report assembly.

Fit accuracy is RMSE on the training split, forecast accuracy is MAPE on
the held-out split; both are computed on denormalized kWh values. The
width search ranks trials by validation MSE on the chronological tail of
the training rows, never touching the test split.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from datetime import date as Date
from typing import Mapping

import numpy as np

from .dataset import Dataset
from .errors import ArgumentError, MetricDomainError, SearchError, ShapeError, TrainingError, UndefinedCorrelationError
from .features import FeatureMatrix, apply_normalization, build_features, pearson
from .network import (
    ModelBundle,
    TrainConfig,
    TrainResult,
    forward_batch,
    init_params,
    predict,
    train,
)

DEFAULT_WIDTH_CANDIDATES = (8, 16, 32, 64, 128, 256)
DEFAULT_SEARCH_TRIALS = 30
#: chronological tail of the training rows used to rank search trials
SEARCH_VALIDATION_TAIL = 0.1


def rmse(predictions, actuals) -> float:
    """Root mean squared error, same units as the inputs (kWh)."""
    predictions = np.asarray(predictions, dtype=float)
    actuals = np.asarray(actuals, dtype=float)
    if predictions.shape != actuals.shape or predictions.ndim != 1 or len(predictions) == 0:
        raise ShapeError(
            f"rmse needs equal-length nonempty vectors, got {predictions.shape} and {actuals.shape}"
        )
    diff = predictions - actuals
    return math.sqrt(float(np.dot(diff, diff) / len(diff)))


def mape(predictions, actuals) -> float:
    """Mean absolute percentage error, in percent; actuals must be positive."""
    predictions = np.asarray(predictions, dtype=float)
    actuals = np.asarray(actuals, dtype=float)
    if predictions.shape != actuals.shape or predictions.ndim != 1 or len(predictions) == 0:
        raise ShapeError(
            f"mape needs equal-length nonempty vectors, got {predictions.shape} and {actuals.shape}"
        )
    if np.any(actuals <= 0):
        raise MetricDomainError("mape is undefined for nonpositive actuals (energy must be > 0)")
    return 100.0 * float(np.mean(np.abs(predictions - actuals) / actuals))


@dataclass(frozen=True)
class SearchSpace:
    """Width candidates per hidden layer plus the shared training config.

    ``trials=None`` enumerates the full cartesian product; otherwise that
    many combinations are sampled (with replacement) from the candidates.
    """

    candidates: tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]]
    base_config: TrainConfig
    trials: int | None = None
    seed: int = 0

    def __post_init__(self):
        if len(self.candidates) != 3 or any(len(c) == 0 for c in self.candidates):
            raise ArgumentError("need a nonempty width candidate list for each hidden layer")
        for c in self.candidates:
            if any(w < 1 for w in c):
                raise ArgumentError(f"widths must be >= 1, got {c}")
        if self.trials is not None and self.trials < 1:
            raise ArgumentError(f"trials must be >= 1, got {self.trials}")


@dataclass(frozen=True)
class TrialRecord:
    hidden_sizes: tuple[int, int, int]
    val_mse: float
    seed: int
    rank: int


@dataclass(frozen=True, eq=False)
class SearchResult:
    trials: tuple[TrialRecord, ...]  # rank order
    best: TrainResult  # retrained on the full training rows
    best_widths: tuple[int, int, int]


def _trial_seed(space_seed: int, index: int) -> int:
    # stable arithmetic derivation so reruns and workers agree
    return (space_seed * 1_000_003 + index) % (2**31 - 1)


def _run_trial(payload) -> tuple[int, float]:
    index, widths, seed, config, fit_matrix, val_matrix = payload
    config = replace(config, seed=seed)
    net = init_params(fit_matrix.features.shape[1], widths, config.init_scheme, seed)
    try:
        result = train(net, fit_matrix, config)
    except TrainingError:
        return index, math.inf
    residual = forward_batch(result.params, val_matrix.features) - val_matrix.target
    return index, float(np.mean(residual**2))


def search(
    space: SearchSpace,
    train_matrix: FeatureMatrix,
    val_fraction: float = SEARCH_VALIDATION_TAIL,
    jobs: int = 1,
) -> SearchResult:
    """Rank width combinations by validation MSE and retrain the winner.

    Every trial derives its seed from (space.seed, trial index), so the
    ranking is reproducible and independent of worker scheduling. Ties are
    broken by lexicographically smaller widths. Diverged trials rank last
    with an infinite validation MSE; if all of them diverge the search
    fails.
    """
    n = len(train_matrix)
    val_n = max(1, int(math.floor(n * val_fraction)))
    if n - val_n < 1:
        raise ArgumentError(f"training matrix with {n} rows is too small to validate a search")
    fit_matrix = train_matrix.rows(slice(0, n - val_n))
    val_matrix = train_matrix.rows(slice(n - val_n, n))

    if space.trials is None:
        combos = [tuple(c) for c in itertools.product(*space.candidates)]
    else:
        rng = np.random.default_rng(space.seed)
        combos = [
            tuple(int(options[rng.integers(len(options))]) for options in space.candidates)
            for _ in range(space.trials)
        ]

    payloads = [
        (i, widths, _trial_seed(space.seed, i), space.base_config, fit_matrix, val_matrix)
        for i, widths in enumerate(combos)
    ]
    scores: dict[int, float] = {}
    if jobs > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for index, val_mse in pool.map(_run_trial, payloads):
                scores[index] = val_mse
    else:
        for payload in payloads:
            index, val_mse = _run_trial(payload)
            scores[index] = val_mse

    if all(math.isinf(v) for v in scores.values()):
        raise SearchError("every search trial diverged")

    order = sorted(range(len(combos)), key=lambda i: (scores[i], combos[i]))
    trials = tuple(
        TrialRecord(
            hidden_sizes=combos[i],
            val_mse=scores[i],
            seed=_trial_seed(space.seed, i),
            rank=rank,
        )
        for rank, i in enumerate(order, start=1)
    )

    best = trials[0]
    best_config = replace(space.base_config, seed=best.seed)
    best_init = init_params(
        train_matrix.features.shape[1], best.hidden_sizes, best_config.init_scheme, best.seed
    )
    retrained = train(best_init, train_matrix, best_config)
    return SearchResult(trials=trials, best=retrained, best_widths=best.hidden_sizes)


def trials_to_csv(trials) -> str:
    """Trial log export: h1,h2,h3,val_mse,seed,rank."""
    lines = ["h1,h2,h3,val_mse,seed,rank"]
    for t in trials:
        h1, h2, h3 = t.hidden_sizes
        lines.append(f"{h1},{h2},{h3},{repr(float(t.val_mse))},{t.seed},{t.rank}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class EvalReport:
    """Fit/forecast accuracy plus the correlation table for one model."""

    hotel_id: str
    hidden_sizes: tuple[int, int, int]
    fit_rmse_kwh: float
    forecast_mape_pct: float
    correlations: Mapping[str, float | None]  # None where undefined
    base_temp_c: float
    feature_names: tuple[str, ...]
    train_config: TrainConfig
    train_start: Date
    train_end: Date
    test_start: Date
    test_end: Date

    def __post_init__(self):
        if self.fit_rmse_kwh < 0 or self.forecast_mape_pct < 0:
            raise ArgumentError("accuracy metrics cannot be negative")


def evaluate(bundle: ModelBundle, train_ds: Dataset, test_ds: Dataset) -> EvalReport:
    """Score a model: RMSE on the train split, MAPE on the test split.

    The correlation table covers every model feature against energy over
    the union of both splits.
    """
    spec = bundle.feature_spec
    fm_train = build_features(train_ds, spec)
    fm_test = build_features(test_ds, spec)
    pred_train = predict(bundle.network, apply_normalization(fm_train, bundle.normalization), bundle.normalization)
    pred_test = predict(bundle.network, apply_normalization(fm_test, bundle.normalization), bundle.normalization)

    all_features = np.vstack([fm_train.features, fm_test.features])
    all_energy = np.concatenate([fm_train.target, fm_test.target])
    correlations: dict[str, float | None] = {}
    for j, name in enumerate(spec.selected_features):
        try:
            correlations[name] = pearson(all_features[:, j], all_energy)
        except UndefinedCorrelationError:
            correlations[name] = None

    return EvalReport(
        hotel_id=train_ds.hotel_id,
        hidden_sizes=bundle.network.hidden_sizes,
        fit_rmse_kwh=rmse(pred_train, fm_train.target),
        forecast_mape_pct=mape(pred_test, fm_test.target),
        correlations=correlations,
        base_temp_c=spec.base_temp_c,
        feature_names=spec.selected_features,
        train_config=bundle.train_config,
        train_start=train_ds.records[0].date,
        train_end=train_ds.records[-1].date,
        test_start=test_ds.records[0].date,
        test_end=test_ds.records[-1].date,
    )


def report_to_dict(report: EvalReport) -> dict:
    """JSON-ready view of a report (dates ISO, config expanded)."""
    from dataclasses import asdict

    return {
        "hotel_id": report.hotel_id,
        "hidden_sizes": list(report.hidden_sizes),
        "fit_rmse_kwh": report.fit_rmse_kwh,
        "forecast_mape_pct": report.forecast_mape_pct,
        "correlations": dict(report.correlations),
        "base_temp_c": report.base_temp_c,
        "features": list(report.feature_names),
        "train_config": asdict(report.train_config),
        "train_range": [report.train_start.isoformat(), report.train_end.isoformat()],
        "test_range": [report.test_start.isoformat(), report.test_end.isoformat()],
    }
