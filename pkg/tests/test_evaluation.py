import math

import numpy as np
import pytest

from hotelwatt.dataset import SyntheticParams, chronological_split, generate_synthetic
from hotelwatt.errors import ArgumentError, MetricDomainError, SearchError, ShapeError
from hotelwatt.evaluation import (
    EvalReport,
    SearchSpace,
    evaluate,
    mape,
    rmse,
    search,
    trials_to_csv,
)
from hotelwatt.features import FeatureSpec, apply_normalization, build_features, fit_normalization
from hotelwatt.network import ModelBundle, TrainConfig, init_params, train

SPEC = FeatureSpec(selected_features=("RDD", "temp_mean"))

# quick settings for search trials; accuracy is irrelevant to ranking contracts
FAST = TrainConfig(epochs=15, early_stop_patience=None, seed=0)


def _normalized_training(days=90, noise_std=0.0, seed=3):
    ds = generate_synthetic(days, SyntheticParams(noise_std=noise_std), seed=seed)
    matrix = build_features(ds, SPEC)
    norm = fit_normalization(matrix)
    return apply_normalization(matrix, norm), norm, ds


class TestRmse:
    def test_identical_vectors(self):
        assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_hand_computed(self):
        assert rmse([0.0, 0.0], [3.0, 4.0]) == pytest.approx(math.sqrt(12.5), abs=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            a, b = rng.normal(size=(2, 9))
            assert rmse(a, b) == rmse(b, a)

    def test_translation_invariance(self):
        rng = np.random.default_rng(2)
        a, b = rng.normal(size=(2, 9))
        for shift in (-17.5, 0.25, 1000.0):
            assert rmse(a + shift, b + shift) == pytest.approx(rmse(a, b), abs=1e-9)

    def test_squared_rmse_equals_mse(self):
        from hotelwatt.network import mse

        rng = np.random.default_rng(3)
        for _ in range(100):
            a = rng.uniform(100, 9000, size=12)
            b = rng.uniform(100, 9000, size=12)
            assert rmse(a, b) ** 2 == pytest.approx(mse(a, b), abs=1e-12 * mse(a, b) + 1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            rmse([1.0], [1.0, 2.0])


class TestMape:
    def test_identical_vectors(self):
        assert mape([100.0, 200.0], [100.0, 200.0]) == 0.0

    def test_hand_computed(self):
        assert mape([110.0, 190.0], [100.0, 200.0]) == pytest.approx(7.5, abs=1e-12)

    def test_nonpositive_actual_rejected(self):
        with pytest.raises(MetricDomainError):
            mape([1.0, 2.0], [0.0, 2.0])
        with pytest.raises(MetricDomainError):
            mape([1.0, 2.0], [-5.0, 2.0])

    def test_not_symmetric(self):
        rng = np.random.default_rng(4)
        asymmetric = 0
        for _ in range(20):
            a = rng.uniform(50, 500, size=7)
            b = rng.uniform(50, 500, size=7)
            if mape(a, b) != mape(b, a):
                asymmetric += 1
        assert asymmetric > 15


class TestSearch:
    def test_exhaustive_two_candidates(self):
        scaled, _, _ = _normalized_training()
        space = SearchSpace(candidates=((1, 2), (1,), (1,)), base_config=FAST, trials=None)
        result = search(space, scaled)
        assert len(result.trials) == 2
        assert sorted(t.rank for t in result.trials) == [1, 2]

    def test_exhaustive_visits_full_product(self):
        scaled, _, _ = _normalized_training()
        space = SearchSpace(candidates=((1, 2), (1, 2), (1, 2)), base_config=FAST, trials=None)
        result = search(space, scaled)
        assert len(result.trials) == 8
        assert {t.hidden_sizes for t in result.trials} == {
            (a, b, c) for a in (1, 2) for b in (1, 2) for c in (1, 2)
        }

    def test_ranking_is_total_order(self):
        scaled, _, _ = _normalized_training()
        space = SearchSpace(candidates=((1, 2, 3), (1, 2), (1,)), base_config=FAST, trials=None)
        trials = search(space, scaled).trials
        assert [t.rank for t in trials] == list(range(1, len(trials) + 1))
        for earlier, later in zip(trials, trials[1:]):
            assert (earlier.val_mse, earlier.hidden_sizes) <= (later.val_mse, later.hidden_sizes)

    def test_same_seed_reruns_identically(self):
        scaled, _, _ = _normalized_training()
        space = SearchSpace(candidates=((1, 2, 4), (2, 3), (1, 2)), base_config=FAST, trials=5, seed=9)
        first = search(space, scaled)
        second = search(space, scaled)
        assert first.trials == second.trials
        assert first.best_widths == second.best_widths

    def test_random_search_runs_requested_trials(self):
        scaled, _, _ = _normalized_training()
        space = SearchSpace(candidates=((1, 2, 4), (2, 3), (1, 2)), base_config=FAST, trials=6, seed=1)
        assert len(search(space, scaled).trials) == 6

    def test_parallel_matches_serial(self):
        scaled, _, _ = _normalized_training()
        space = SearchSpace(candidates=((1, 2), (1,), (1, 2)), base_config=FAST, trials=None)
        assert search(space, scaled, jobs=1).trials == search(space, scaled, jobs=2).trials

    def test_all_diverged_raises_search_error(self):
        scaled, _, _ = _normalized_training()
        blowup = TrainConfig(learning_rate=1e9, epochs=10, early_stop_patience=None)
        space = SearchSpace(candidates=((2,), (2,), (2,)), base_config=blowup, trials=None)
        with pytest.raises(SearchError):
            search(space, scaled)

    def test_empty_candidate_list_rejected(self):
        with pytest.raises(ArgumentError):
            SearchSpace(candidates=((), (1,), (1,)), base_config=FAST)

    def test_zero_trials_rejected(self):
        with pytest.raises(ArgumentError):
            SearchSpace(candidates=((1,), (1,), (1,)), base_config=FAST, trials=0)

    def test_tie_break_is_lexicographic(self):
        # identical val MSE happens when the seed and data coincide; emulate by
        # checking the sort key directly on a crafted score table
        combos = [(2, 1, 1), (1, 2, 1), (1, 1, 2)]
        scores = {0: 0.5, 1: 0.5, 2: 0.5}
        order = sorted(range(3), key=lambda i: (scores[i], combos[i]))
        assert [combos[i] for i in order] == [(1, 1, 2), (1, 2, 1), (2, 1, 1)]

    def test_trial_log_csv_layout(self):
        scaled, _, _ = _normalized_training()
        space = SearchSpace(candidates=((1, 2), (1,), (1,)), base_config=FAST, trials=None)
        text = trials_to_csv(search(space, scaled).trials)
        lines = text.strip().split("\n")
        assert lines[0] == "h1,h2,h3,val_mse,seed,rank"
        assert len(lines) == 3


class TestEvaluate:
    def _trained_bundle(self, scaled, norm):
        config = TrainConfig(epochs=500, early_stop_patience=None, seed=1)
        result = train(init_params(2, (8, 8, 8), "he", 1), scaled, config)
        return ModelBundle(result.params, norm, SPEC, config)

    def test_near_perfect_model_on_noise_free_data(self):
        ds = generate_synthetic(200, SyntheticParams(noise_std=0.0), seed=5)
        train_ds, test_ds = chronological_split(ds, 0.9)
        fm_train = build_features(train_ds, SPEC)
        norm = fit_normalization(fm_train)
        bundle = self._trained_bundle(apply_normalization(fm_train, norm), norm)
        report = evaluate(bundle, train_ds, test_ds)
        assert report.fit_rmse_kwh < 0.01 * fm_train.target.mean()
        assert report.forecast_mape_pct < 1.0
        assert set(report.correlations) == {"RDD", "temp_mean"}
        assert report.hidden_sizes == (8, 8, 8)
        assert report.train_end < report.test_start

    def test_report_is_reproducible(self):
        ds = generate_synthetic(120, SyntheticParams(), seed=6)
        train_ds, test_ds = chronological_split(ds, 0.9)
        fm_train = build_features(train_ds, SPEC)
        norm = fit_normalization(fm_train)
        bundle = self._trained_bundle(apply_normalization(fm_train, norm), norm)
        assert evaluate(bundle, train_ds, test_ds) == evaluate(bundle, train_ds, test_ds)

    def test_negative_metrics_rejected(self):
        with pytest.raises(ArgumentError):
            EvalReport(
                hotel_id="h", hidden_sizes=(1, 1, 1), fit_rmse_kwh=-1.0,
                forecast_mape_pct=0.0, correlations={}, base_temp_c=24.0,
                feature_names=("RDD",), train_config=FAST,
                train_start=None, train_end=None, test_start=None, test_end=None,
            )
