"""Tests for evaluation metrics, aggregation and calibration."""

import itertools
import json
import math

import numpy as np
import pandas as pd
import pytest

from picniq.errors import IdMismatchError, SceneMismatchError
from picniq.metrics import (
    aggregate,
    build_report,
    calibration,
    format_aggregate,
    krcc,
    mae_aligned,
    plcc,
    save_calibration,
    save_report,
    srcc,
)
from picniq.models.scores import JodScale


def _brute_ranks(x):
    n = len(x)
    return np.array([
        1 + sum(x[j] < x[i] for j in range(n)) + 0.5 * sum(x[j] == x[i] for j in range(n) if j != i)
        for i in range(n)
    ], dtype=float)


def _brute_spearman(x, y):
    rx, ry = _brute_ranks(x), _brute_ranks(y)
    rx, ry = rx - rx.mean(), ry - ry.mean()
    return float(rx @ ry / math.sqrt((rx @ rx) * (ry @ ry)))


def _brute_tau_b(x, y):
    concordant = discordant = tied_x = tied_y = 0
    for i, j in itertools.combinations(range(len(x)), 2):
        dx, dy = np.sign(x[i] - x[j]), np.sign(y[i] - y[j])
        if dx == 0:
            tied_x += 1
        if dy == 0:
            tied_y += 1
        if dx * dy > 0:
            concordant += 1
        elif dx * dy < 0:
            discordant += 1
    pairs = len(x) * (len(x) - 1) // 2
    return (concordant - discordant) / math.sqrt((pairs - tied_x) * (pairs - tied_y))


class TestCorrelations:

    def test_match_definitional_oracles(self):
        checked = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(2, 11))
            x = rng.integers(0, 5, size=n).astype(float)
            y = rng.integers(0, 5, size=n).astype(float)
            if np.ptp(x) == 0 or np.ptp(y) == 0:
                assert srcc(x, y) is None and krcc(x, y) is None
                continue
            assert srcc(x, y) == pytest.approx(_brute_spearman(x, y), abs=1e-12)
            assert krcc(x, y) == pytest.approx(_brute_tau_b(x, y), abs=1e-12)
            checked += 1
        assert checked > 50

    def test_perfect_and_reversed(self):
        x = [0.1, 0.5, 0.2, 0.9]
        assert srcc(x, x) == pytest.approx(1.0)
        assert krcc(x, [-v for v in x]) == pytest.approx(-1.0)
        assert plcc(x, [2 * v + 1 for v in x]) == pytest.approx(1.0)

    def test_constant_input_is_degenerate(self):
        assert plcc([1.0, 1.0, 1.0], [0.0, 1.0, 2.0]) is None
        assert srcc([0.0, 1.0, 2.0], [3.0, 3.0, 3.0]) is None

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            srcc([1.0], [2.0])
        with pytest.raises(ValueError):
            plcc([1.0, 2.0], [1.0, 2.0, 3.0])


class TestMaeAndAggregate:

    def test_mae_ignores_offset(self):
        reference = JodScale(item_ids=("a", "b", "c"), scores=[2.0, 3.0, 4.0], convention="aligned")
        predicted = JodScale.centered(["c", "a", "b"], np.array([1.0, -1.0, 0.0]))
        assert mae_aligned(predicted, reference) == pytest.approx(0.0, abs=1e-12)
        shifted = JodScale.centered(["a", "b", "c"], np.array([-1.5, 0.0, 1.5]))
        assert mae_aligned(shifted, reference) == pytest.approx(1.0 / 3.0)

    def test_mae_needs_same_items(self):
        with pytest.raises(IdMismatchError):
            mae_aligned(JodScale.centered(["a", "b"], np.zeros(2)), JodScale.centered(["a", "c"], np.zeros(2)))

    def test_lower_median(self):
        result = aggregate([4.0, 1.0, 3.0, 2.0])
        assert result.median == 2.0
        assert result.mean == 2.5
        assert result.moe == pytest.approx(1.96 * np.std([1, 2, 3, 4], ddof=1) / 2.0)
        assert result.count == 4
        assert not result.degenerate

    def test_single_value_is_degenerate(self):
        result = aggregate([0.7])
        assert result.degenerate
        assert result.moe == 0.0
        assert result.median == 0.7

    def test_empty(self):
        with pytest.raises(ValueError):
            aggregate([])

    def test_format(self):
        assert format_aggregate(aggregate([1.0, 2.0, 3.0])) == "2.000 (2.000 ± 1.132)"
        assert format_aggregate(None) == "n/a"


class TestCalibration:

    def test_perfect_predictions_fall_inside_their_bins(self, rng):
        p = rng.uniform(0.0, 1.0, size=500)
        histogram = calibration(p, p)
        assert len(histogram.bins) == 6
        assert sum(cell.count for cell in histogram.bins) == 500
        for cell in histogram.bins:
            if cell.count:
                assert cell.edge_lo <= cell.mean_pred <= cell.edge_hi
            assert sum(cell.histogram) == cell.count

    def test_edges_are_half_open_with_closed_last_bin(self):
        histogram = calibration([0.0, 0.5, 1.0], [0.0, 0.5, 1.0], bins=2)
        assert [cell.count for cell in histogram.bins] == [1, 2]

    def test_empty_bins_have_no_mean(self):
        histogram = calibration([0.9], [0.95])
        assert histogram.bins[0].mean_pred is None
        assert histogram.bins[-1].mean_pred == 0.9

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            calibration([1.2], [0.5])

    def test_save_calibration(self, tmp_path):
        save_calibration(calibration([0.2, 0.8], [0.1, 0.9]), tmp_path / "cal.csv")
        lines = (tmp_path / "cal.csv").read_text().splitlines()
        assert lines[0] == "# format: picniq-calibration/1"
        frame = pd.read_csv(tmp_path / "cal.csv", comment="#")
        assert list(frame.columns) == ["bin", "edge_lo", "edge_hi", "count", "mean_pred"]
        assert frame["count"].sum() == 2


class TestReport:

    def _scenes(self):
        truth = {
            "s2": JodScale.centered(["a", "b", "c"], np.array([1.0, 0.0, -1.0])),
            "s1": JodScale.centered(["x", "y", "z"], np.array([0.5, -0.5, 0.0])),
        }
        pred = {
            "s1": JodScale.centered(["x", "y", "z"], np.array([0.4, -0.6, 0.1])),
            "s2": JodScale.centered(["a", "b", "c"], np.array([0.8, 0.1, -0.9])),
        }
        return pred, truth

    def test_report_is_sorted_and_complete(self):
        pred, truth = self._scenes()
        report = build_report(pred, truth)
        assert list(report.per_scene) == ["s1", "s2"]
        assert report.per_scene["s1"].srcc == pytest.approx(1.0)
        assert report.aggregates["srcc"].count == 2
        assert set(report.aggregates) == {"srcc", "plcc", "krcc", "mae", "corr_mean"}

    def test_scene_mismatch_names_both_sides(self):
        pred, truth = self._scenes()
        del pred["s1"]
        truth["s3"] = truth["s2"]
        with pytest.raises(SceneMismatchError) as excinfo:
            build_report(pred, truth)
        assert excinfo.value.missing_in_pred == ["s1", "s3"]
        assert excinfo.value.missing_in_truth == []

    def test_degenerate_scene_is_excluded(self, caplog):
        pred, truth = self._scenes()
        pred["s1"] = JodScale.centered(["x", "y", "z"], np.zeros(3))
        report = build_report(pred, truth)
        assert report.per_scene["s1"].srcc is None
        assert report.aggregates["srcc"].count == 1
        assert report.aggregates["srcc"].degenerate
        assert "degenerate" in caplog.text

    def test_save_report(self, tmp_path):
        pred, truth = self._scenes()
        csv_path = save_report(build_report(pred, truth), tmp_path / "report.json")
        payload = json.loads((tmp_path / "report.json").read_text())
        assert payload["format"] == "picniq-report/1"
        frame = pd.read_csv(csv_path, comment="#")
        assert len(frame) == 2 * 5
