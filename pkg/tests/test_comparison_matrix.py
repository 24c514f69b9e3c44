"""Tests for comparison matrices, their file format and scene inputs."""

import numpy as np
import pytest

from picniq.comparison_matrix import (
    connected_components,
    dumps_matrix,
    empirical_probability,
    load_matrix,
    loads_matrix,
    probability_histogram,
    save_matrix,
    summarize,
    threshold_filter,
    to_pair_records,
    validate,
    with_prior,
)
from picniq.errors import (
    DuplicatePairError,
    FeatureFormatError,
    MatrixFormatError,
    MissingFeaturesError,
    UnknownItemError,
)
from picniq.models.matrix import ComparisonMatrix, ItemSet, PairRecord
from picniq.scenes import load_features, load_manifest, resolve, save_features


class TestValidate:

    def test_valid_matrix_has_no_violations(self, three_item_matrix):
        assert validate(three_item_matrix) == []

    def test_nonzero_diagonal_is_reported_with_index(self):
        counts = np.zeros((3, 3))
        counts[1, 1] = 2.0
        violations = validate(ComparisonMatrix(item_ids=("a", "b", "c"), counts=counts))
        assert len(violations) == 1
        assert "nonzero diagonal at (1,1)" in violations[0]

    def test_negative_count_is_reported(self):
        counts = np.zeros((2, 2))
        counts[0, 1] = -1.0
        violations = validate(ComparisonMatrix(item_ids=("a", "b"), counts=counts))
        assert any("negative count at (0,1)" in v for v in violations)

    def test_dimension_mismatch(self):
        matrix = ComparisonMatrix(item_ids=("a", "b", "c"), counts=np.zeros((2, 2)))
        assert validate(matrix)[0].startswith("dimension mismatch")

    def test_all_zero_matrix_is_valid(self):
        assert validate(ComparisonMatrix.zeros(["a", "b", "c", "d"])) == []

    def test_counts_are_read_only(self, three_item_matrix):
        with pytest.raises(ValueError):
            three_item_matrix.counts[0, 1] = 5.0


class TestEmpiricalProbability:

    def test_ratio_of_wins(self, three_item_matrix):
        assert empirical_probability(three_item_matrix, 0, 1) == pytest.approx(0.75)
        assert empirical_probability(three_item_matrix, 1, 0) == pytest.approx(0.25)

    def test_unobserved_pair_is_undefined(self, three_item_matrix):
        assert empirical_probability(three_item_matrix, 0, 2) is None

    def test_complement_is_exact(self, rng):
        counts = rng.uniform(0.1, 10.0, size=(6, 6))
        np.fill_diagonal(counts, 0.0)
        matrix = ComparisonMatrix(item_ids=tuple("abcdef"), counts=counts)
        for i in range(6):
            for j in range(6):
                if i != j:
                    total = empirical_probability(matrix, i, j) + empirical_probability(matrix, j, i)
                    assert total == 1.0

    def test_bad_indices(self, three_item_matrix):
        with pytest.raises(IndexError):
            empirical_probability(three_item_matrix, 0, 3)
        with pytest.raises(ValueError):
            empirical_probability(three_item_matrix, 1, 1)


class TestThreshold:

    def test_pairs_below_threshold_are_zeroed(self, three_item_matrix):
        filtered = threshold_filter(three_item_matrix, 4.0)
        assert filtered.counts[0, 1] == 3.0
        assert filtered.counts[1, 2] == 2.0
        assert filtered.observed_pairs() == [(0, 1), (1, 2)]

        filtered = threshold_filter(three_item_matrix, 4.5)
        assert filtered.total_comparisons() == 0.0

    def test_equal_to_threshold_is_kept(self):
        counts = np.array([[0.0, 1.0], [1.0, 0.0]])
        matrix = ComparisonMatrix(item_ids=("a", "b"), counts=counts)
        assert threshold_filter(matrix, 2.0).total_comparisons() == 2.0

    def test_zero_threshold_is_identity(self, three_item_matrix):
        np.testing.assert_array_equal(threshold_filter(three_item_matrix, 0.0).counts, three_item_matrix.counts)

    def test_negative_threshold_rejected(self, three_item_matrix):
        with pytest.raises(ValueError):
            threshold_filter(three_item_matrix, -1.0)


class TestPrior:

    def test_pseudocount_only_on_observed_pairs(self, three_item_matrix):
        smoothed = with_prior(three_item_matrix, 0.5)
        assert smoothed.counts[0, 1] == 3.5
        assert smoothed.counts[1, 0] == 1.5
        assert smoothed.counts[0, 2] == 0.0
        assert smoothed.counts[2, 0] == 0.0


class TestPairRecords:

    def test_one_record_per_observed_pair(self, three_item_matrix):
        records = to_pair_records(three_item_matrix, order_seed=0)
        assert len(records) == 2
        assert {frozenset((r.id_i, r.id_j)) for r in records} == {frozenset("AB"), frozenset("BC")}

    def test_unordered_pairs_do_not_depend_on_seed(self, rng):
        counts = rng.integers(0, 4, size=(8, 8)).astype(float)
        np.fill_diagonal(counts, 0.0)
        matrix = ComparisonMatrix(item_ids=tuple(f"i{k}" for k in range(8)), counts=counts)
        reference = {frozenset((r.i, r.j)) for r in to_pair_records(matrix, 0)}
        for seed in range(1, 6):
            assert {frozenset((r.i, r.j)) for r in to_pair_records(matrix, seed)} == reference

    def test_orientation_is_deterministic_and_consistent(self, three_item_matrix):
        first = to_pair_records(three_item_matrix, 7)
        second = to_pair_records(three_item_matrix, 7)
        assert first == second
        for record in first:
            assert record.p_ij == pytest.approx(record.wins_i / record.n_ij)
            assert record.wins_i == three_item_matrix.counts[record.i, record.j]

    def test_flipped_record(self):
        record = PairRecord.from_wins(0, 1, 4.0, 1.0, "a", "b")
        flipped = record.flipped()
        assert (flipped.id_i, flipped.id_j) == ("b", "a")
        assert flipped.p_ij == pytest.approx(0.2)
        assert flipped.n_ij == 5.0


class TestHistogramAndSummary:

    def test_probability_histogram_counts_endpoints(self):
        counts = np.array([
            [0.0, 5.0, 0.0, 1.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
        ])
        matrix = ComparisonMatrix(item_ids=tuple("abcd"), counts=counts)
        hist = probability_histogram(matrix, 4)
        # p(a,b) = 1.0, p(a,d) = 0.5, p(b,c) = 0.5
        np.testing.assert_array_equal(hist, [0, 0, 2, 1])
        assert hist.sum() == len(matrix.observed_pairs())

    def test_components(self, three_item_matrix):
        assert connected_components(three_item_matrix) == [["A", "B", "C"]]
        split = ComparisonMatrix(
            item_ids=tuple("abcd"),
            counts=np.array([
                [0.0, 1.0, 0.0, 0.0],
                [1.0, 0.0, 0.0, 0.0],
                [0.0, 0.0, 0.0, 2.0],
                [0.0, 0.0, 0.0, 0.0],
            ]),
        )
        assert connected_components(split) == [["a", "b"], ["c", "d"]]

    def test_summary(self):
        counts = np.array([
            [0.0, 2.0, 3.0],
            [0.0, 0.0, 1.0],
            [1.0, 1.0, 0.0],
        ])
        summary = summarize(ComparisonMatrix(item_ids=tuple("abc"), counts=counts))
        assert summary.observed_pairs == 3
        assert summary.density == 1.0
        assert summary.total_comparisons == 8.0
        assert summary.forced_choice_fraction == pytest.approx(1 / 3)
        assert summary.neighbor_fraction == pytest.approx(2 / 3)
        assert summary.components == 1


class TestMatrixFile:

    def test_save_and_load(self, tmp_path, three_item_matrix):
        path = tmp_path / "m.csv"
        save_matrix(three_item_matrix, path)
        loaded = load_matrix(path)
        assert loaded.item_ids == three_item_matrix.item_ids
        np.testing.assert_array_equal(loaded.counts, three_item_matrix.counts)

    def test_fractional_counts_survive_exactly(self):
        counts = np.zeros((2, 2))
        counts[0, 1], counts[1, 0] = 30 * 0.73, 30 * (1 - 0.73)
        matrix = ComparisonMatrix(item_ids=("a", "b"), counts=counts)
        np.testing.assert_array_equal(loads_matrix(dumps_matrix(matrix)).counts, counts)

    def test_format_line(self, three_item_matrix):
        assert dumps_matrix(three_item_matrix).splitlines()[0] == "# format: picniq-matrix/1"

    def test_unknown_id_names_line(self):
        text = "# format: picniq-matrix/1\n# items: a,b\na,b,1,0\na,z,1,1\n"
        with pytest.raises(UnknownItemError) as excinfo:
            loads_matrix(text)
        assert excinfo.value.line == 4
        assert "line 4" in str(excinfo.value)

    def test_duplicate_pair(self):
        text = "# items: a,b\na,b,1,0\nb,a,2,2\n"
        with pytest.raises(DuplicatePairError) as excinfo:
            loads_matrix(text)
        assert excinfo.value.line == 3

    def test_negative_count(self):
        with pytest.raises(MatrixFormatError):
            loads_matrix("# items: a,b\na,b,-1,0\n")

    def test_missing_header(self):
        with pytest.raises(MatrixFormatError):
            loads_matrix("a,b,1,0\n")

    def test_invalid_matrix_is_not_saved(self, tmp_path):
        counts = np.eye(2)
        with pytest.raises(MatrixFormatError):
            save_matrix(ComparisonMatrix(item_ids=("a", "b"), counts=counts), tmp_path / "bad.csv")


class TestScenes:

    def test_features_round_trip(self, tmp_path, make_items):
        items = make_items(n=4, dim=3)
        path = tmp_path / "features.csv"
        save_features(items, path)
        loaded = load_features(path)
        assert loaded.ids == items.ids
        np.testing.assert_array_equal(loaded.feature_matrix(), items.feature_matrix())

    def test_duplicate_feature_ids_are_a_data_error(self, tmp_path):
        path = tmp_path / "features.csv"
        path.write_text("id,f1\na,1.0\nb,2.0\na,3.0\n")
        with pytest.raises(FeatureFormatError, match="'a'"):
            load_features(path)

    @pytest.mark.parametrize("value", ["nan", "inf", ""])
    def test_non_finite_features_are_a_data_error(self, tmp_path, value):
        path = tmp_path / "features.csv"
        path.write_text(f"id,f1,f2\na,1.0,2.0\nb,{value},0.5\n")
        with pytest.raises(FeatureFormatError, match="'b'"):
            load_features(path)

    def test_missing_features(self):
        items = ItemSet.from_arrays(["a", "b"])
        with pytest.raises(MissingFeaturesError):
            items.feature_matrix()

    def test_mixed_dimensions_rejected(self):
        with pytest.raises(ValueError):
            ItemSet.model_validate({"items": [
                {"id": "a", "features": [1.0, 2.0]},
                {"id": "b", "features": [1.0]},
            ]})

    def test_manifest_paths_resolve_against_manifest_dir(self, tmp_path):
        (tmp_path / "manifest.json").write_text(
            '{"s1": {"features": "s1.csv", "attributes": {"quality": "s1_q.csv"}}}'
        )
        manifest, base = load_manifest(tmp_path / "manifest.json")
        assert manifest.scenes() == ["s1"]
        assert resolve(base, manifest.root["s1"].attributes["quality"]) == tmp_path / "s1_q.csv"

    def test_manifest_rejects_unknown_keys(self, tmp_path):
        (tmp_path / "manifest.json").write_text('{"s1": {"features": "s1.csv", "colour": "red"}}')
        with pytest.raises(ValueError):
            load_manifest(tmp_path / "manifest.json")
