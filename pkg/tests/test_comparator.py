"""Tests for the pairwise comparator: forward pass, loss, gradients, training."""

import math

import numpy as np
import pytest

from picniq.comparator import (
    AdamOptimizer,
    ComparatorModel,
    TrainBatch,
    backward,
    batch_loss,
    evaluate_loss,
    forward,
    grad_check,
    hub_affine,
    hub_response,
    load_checkpoint,
    loss_weighted_bce,
    predict_pairs,
    save_checkpoint,
    train,
)
from picniq.comparison_matrix import to_pair_records
from picniq.errors import DimensionMismatchError, EmptyTrainingSetError, MissingFeaturesError
from picniq.models.configs import ComparatorConfig, ObserverConfig, TrainConfig
from picniq.models.matrix import ItemSet, PairRecord
from picniq.observer import make_design, make_features, sample_true_scores, simulate_matrix


def _random_records(items: ItemSet, count: int, rng) -> list:
    index = items.ids
    records = []
    pairs = set()
    while len(records) < count:
        i, j = (int(x) for x in rng.choice(len(index), size=2, replace=False))
        if (i, j) in pairs:
            continue
        pairs.add((i, j))
        n = int(rng.integers(1, 8))
        wins = int(rng.integers(0, n + 1))
        records.append(PairRecord.from_wins(i, j, wins, n - wins, index[i], index[j]))
    return records


def _separable_task(seed: int = 0, n: int = 12, dim: int = 4):
    truth = sample_true_scores(n, 1.0, seed)
    items = make_features(truth, dim=dim, noise=0.05, seed=seed)
    matrix = simulate_matrix(truth, make_design("full", n, k=10), ObserverConfig(rng_seed=seed))
    return items, to_pair_records(matrix, seed)


class TestForward:

    def test_antisymmetry(self):
        worst = 0.0
        for seed in range(200):
            rng = np.random.default_rng(seed)
            dim = int(rng.integers(1, 6))
            config = ComparatorConfig(
                hidden_dims=[int(w) for w in rng.integers(1, 8, size=rng.integers(0, 3))],
                embedding_dim=int(rng.integers(1, 6)),
            )
            model = ComparatorModel.initialize(dim, config, seed=seed)
            items = ItemSet.from_arrays([f"x{k}" for k in range(10)], rng.normal(size=(10, dim)) * 3)
            pairs = [(i, j) for i in range(10) for j in range(10) if i < j][:50]
            forward_p = predict_pairs(model, items, pairs)
            reverse_p = predict_pairs(model, items, [(j, i) for i, j in pairs])
            worst = max(worst, float(np.max(np.abs(forward_p + reverse_p - 1.0))))
        assert worst <= 1e-12

    def test_identical_items_are_a_coin_flip(self, make_model):
        model = make_model()
        x = np.array([0.3, -1.0, 2.0, 0.5])
        assert forward(model, x, x) == 0.5

    def test_hub_bias_never_reaches_output(self, make_model, make_items):
        model = make_model()
        items = make_items(n=5)
        pairs = [(0, 1), (2, 4), (3, 0)]
        before = predict_pairs(model, items, pairs)
        model.hub_bias[0] = 7.5
        np.testing.assert_array_equal(predict_pairs(model, items, pairs), before)

    def test_hub_is_the_odd_part_of_its_affine_map(self, make_model, rng):
        model = make_model(embedding=3)
        model.hub_bias[0] = -2.25
        difference = rng.normal(size=(20, 3)) * 4
        response = hub_response(model, difference)
        expected = 0.5 * (hub_affine(model, difference) - hub_affine(model, -difference))
        np.testing.assert_allclose(response, expected, rtol=0, atol=1e-12)
        np.testing.assert_array_equal(hub_response(model, -difference), -response)

    def test_hub_reads_its_bias(self, make_model):
        model = make_model(embedding=3)
        model.hub_bias[0] = np.nan
        assert np.isnan(hub_response(model, np.ones(3)))

    def test_output_stays_inside_open_interval(self):
        model = ComparatorModel(layers=[], hub_weight=[100.0], hub_bias=[0.0], feature_dim=1)
        p = forward(model, np.array([1.0]), np.array([0.0]))
        assert 0.0 < p < 1.0
        items = ItemSet.from_arrays(["a", "b"], np.array([[1.0], [0.0]]))
        both = predict_pairs(model, items, [(0, 1), (1, 0)])
        assert np.all((both > 0.0) & (both < 1.0))
        assert both.sum() == pytest.approx(1.0, abs=1e-12)

    def test_forward_matches_predict_pairs(self, make_model, make_items):
        model = make_model()
        items = make_items(n=4)
        features = items.feature_matrix()
        assert forward(model, features[1], features[3]) == pytest.approx(
            predict_pairs(model, items, [(1, 3)])[0], abs=1e-15
        )

    def test_wrong_feature_dimension(self, make_model):
        model = make_model(feature_dim=4)
        with pytest.raises(DimensionMismatchError):
            forward(model, np.zeros(4), np.zeros(3))

    def test_inconsistent_model_is_rejected(self, make_model):
        model = make_model(embedding=3)
        with pytest.raises(ValueError):
            ComparatorModel(
                layers=model.layers, hub_weight=np.zeros(5), hub_bias=np.zeros(1), feature_dim=4
            )


class TestLoss:

    def test_single_record_fixture(self):
        record = PairRecord.from_wins(0, 1, 4.0, 1.0, "a", "b")
        assert loss_weighted_bce([0.8], [record]) == pytest.approx(0.500402, abs=1e-6)
        expected = -(0.8 * math.log(0.8) + 0.2 * math.log(0.2))
        assert loss_weighted_bce([0.8], [record]) == pytest.approx(expected, abs=1e-15)

    def test_doubling_counts_keeps_loss(self, make_model, make_items, rng):
        model = make_model()
        items = make_items(n=6)
        records = _random_records(items, 8, rng)
        doubled = [PairRecord.from_wins(r.i, r.j, 2 * r.wins_i, 2 * r.wins_j, r.id_i, r.id_j) for r in records]
        a = batch_loss(model, TrainBatch.build(records, items))
        b = batch_loss(model, TrainBatch.build(doubled, items))
        assert abs(a - b) <= 1e-12

    def test_certain_predictions_stay_finite(self):
        record = PairRecord.from_wins(0, 1, 0.0, 3.0, "a", "b")
        assert math.isfinite(loss_weighted_bce([1.0], [record]))

    def test_length_mismatch(self):
        record = PairRecord.from_wins(0, 1, 1.0, 1.0, "a", "b")
        with pytest.raises(ValueError):
            loss_weighted_bce([0.5, 0.5], [record])


class TestGradients:

    @pytest.mark.parametrize("seed", range(10))
    def test_analytic_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        model = ComparatorModel.initialize(4, ComparatorConfig(hidden_dims=[6, 5], embedding_dim=3), seed=seed)
        items = ItemSet.from_arrays([f"x{k}" for k in range(7)], rng.normal(size=(7, 4)))
        batch = TrainBatch.build(_random_records(items, 10, rng), items)
        assert grad_check(model, batch, epsilon=1e-5) <= 1e-5

    def test_corrupted_gradient_is_detected(self, make_model, make_items, rng):
        model = make_model()
        items = make_items(n=6)
        batch = TrainBatch.build(_random_records(items, 10, rng), items)
        gradient = backward(model, batch)
        gradient["backbone.0.weight"] = gradient["backbone.0.weight"] * 1.5 + 0.01
        assert grad_check(model, batch, gradient=gradient) > 1e-3

    def test_hub_only_model_with_zero_gradients(self):
        model = ComparatorModel(layers=[], hub_weight=np.zeros(3), hub_bias=np.zeros(1), feature_dim=3)
        items = ItemSet.from_arrays(["a", "b"], np.array([[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]]))
        batch = TrainBatch.build([PairRecord.from_wins(0, 1, 2.0, 2.0, "a", "b")], items)
        error = grad_check(model, batch)
        assert math.isfinite(error)
        assert error == 0.0

    def test_stationary_when_targets_match_predictions(self, make_model, make_items):
        model = make_model()
        items = make_items(n=5)
        pairs = [(0, 1), (1, 2), (3, 4), (4, 0)]
        predicted = predict_pairs(model, items, pairs)
        records = [
            PairRecord.from_wins(i, j, 6.0 * p, 6.0 * (1.0 - p), items.ids[i], items.ids[j])
            for (i, j), p in zip(pairs, predicted)
        ]
        gradients = backward(model, TrainBatch.build(records, items))
        total = math.sqrt(sum(float(np.sum(g * g)) for g in gradients.values()))
        assert total <= 1e-10

    def test_item_cache_does_not_change_gradients(self, make_model, make_items, rng):
        model = make_model()
        items = make_items(n=5)
        records = _random_records(items, 12, rng)
        cached = TrainBatch.build(records, items, use_cache=True)
        uncached = TrainBatch.build(records, items, use_cache=False)
        assert len(cached.item_ids) <= 5
        assert len(uncached.item_ids) == 24
        a, b = backward(model, cached), backward(model, uncached)
        for name in a:
            np.testing.assert_allclose(a[name], b[name], rtol=1e-12, atol=1e-15)

    def test_comparison_count_weights_gradient(self, make_model, make_items):
        model = make_model()
        items = make_items(n=3)
        single = PairRecord.from_wins(0, 1, 0.75, 0.25, "x0", "x1")
        double = PairRecord.from_wins(0, 1, 1.5, 0.5, "x0", "x1")
        a = backward(model, TrainBatch.build([single], items), normalizer=10.0)
        b = backward(model, TrainBatch.build([double], items), normalizer=10.0)
        for name in a:
            np.testing.assert_allclose(b[name], 2.0 * a[name], rtol=1e-12, atol=1e-18)

    def test_missing_features(self, make_items):
        items = make_items(n=2)
        record = PairRecord.from_wins(0, 1, 1.0, 1.0, "x0", "ghost")
        with pytest.raises(MissingFeaturesError):
            TrainBatch.build([record], items)


class TestOptimizer:

    def test_groups_and_decay(self, make_model):
        model = make_model()
        optimizer = AdamOptimizer(1e-3, 1e-2)
        before = model.clone()
        gradients = {name: np.ones_like(param) for name, param in model.named_parameters()}
        optimizer.step(model, gradients)
        # the first bias-corrected Adam step moves every coordinate by ~lr
        np.testing.assert_allclose(before.hub_weight - model.hub_weight, 1e-2, rtol=1e-6)
        np.testing.assert_allclose(before.layers[0].weight - model.layers[0].weight, 1e-3, rtol=1e-6)
        optimizer.decay(0.5)
        assert optimizer.learning_rates == {"backbone": 5e-4, "hub": 5e-3}


class TestTraining:

    def test_loss_decreases_on_separable_task(self):
        items, records = _separable_task()
        model = ComparatorModel.initialize(4, ComparatorConfig(hidden_dims=[8], embedding_dim=4), seed=0)
        config = TrainConfig(epochs=15, batch_size=len(records), min_comparisons_threshold=0.0, decay=0.9)
        trained, history = train(model, records, items, config)
        assert len(history) == 15
        assert np.all(np.diff(history) <= 1e-12)
        assert history[-1] < evaluate_loss(model, records, items)

    def test_input_model_is_untouched(self):
        items, records = _separable_task(seed=1)
        model = ComparatorModel.initialize(4, ComparatorConfig(hidden_dims=[4], embedding_dim=2), seed=1)
        snapshot = model.clone()
        train(model, records, items, TrainConfig(epochs=2))
        np.testing.assert_array_equal(model.hub_weight, snapshot.hub_weight)

    def test_training_is_deterministic(self):
        items, records = _separable_task(seed=2)
        model = ComparatorModel.initialize(4, ComparatorConfig(hidden_dims=[4], embedding_dim=2), seed=2)
        config = TrainConfig(epochs=3, batch_size=7, seed=5)
        a, history_a = train(model, records, items, config)
        b, history_b = train(model, records, items, config)
        assert history_a == history_b
        np.testing.assert_array_equal(a.layers[0].weight, b.layers[0].weight)

    def test_record_orientation_does_not_matter(self):
        items, records = _separable_task(seed=3)
        model = ComparatorModel.initialize(4, ComparatorConfig(hidden_dims=[5], embedding_dim=3), seed=3)
        config = TrainConfig(epochs=4, batch_size=9, seed=3)
        _, history = train(model, records, items, config)
        _, flipped_history = train(model, [r.flipped() for r in records], items, config)
        np.testing.assert_allclose(flipped_history, history, rtol=1e-9)

    def test_cache_does_not_change_training(self):
        items, records = _separable_task(seed=4)
        model = ComparatorModel.initialize(4, ComparatorConfig(hidden_dims=[5], embedding_dim=3), seed=4)
        _, cached = train(model, records, items, TrainConfig(epochs=3, use_item_cache=True))
        _, uncached = train(model, records, items, TrainConfig(epochs=3, use_item_cache=False))
        np.testing.assert_allclose(cached, uncached, rtol=1e-9)

    def test_threshold_can_empty_the_training_set(self):
        items, records = _separable_task(seed=5)
        model = ComparatorModel.initialize(4, seed=5)
        with pytest.raises(EmptyTrainingSetError):
            train(model, records, items, TrainConfig(min_comparisons_threshold=100.0))


class TestCheckpoint:

    def test_save_and_load_predict_identically(self, tmp_path, make_model, make_items):
        model = make_model()
        items = make_items(n=5)
        pairs = [(0, 1), (2, 3), (4, 1)]
        save_checkpoint(model, tmp_path / "model.json", TrainConfig())
        loaded = load_checkpoint(tmp_path / "model.json")
        np.testing.assert_array_equal(predict_pairs(loaded, items, pairs), predict_pairs(model, items, pairs))
        assert loaded.config == model.config

    def test_wrong_format(self, tmp_path):
        (tmp_path / "model.json").write_text('{"format": "something-else"}')
        with pytest.raises(ValueError):
            load_checkpoint(tmp_path / "model.json")
