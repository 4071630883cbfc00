from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from indoorloc.metrics import (
    accuracy, central_band, error_stats, euclidean_errors, nearest_rank, stats_from_errors,
)
from oracles import sorted_nearest_rank


def test_bands_match_sort_oracle_10000():
    err = np.random.default_rng(0).gamma(2.0, 0.4, 10_000)
    rep = stats_from_errors(err)
    assert abs(rep.p75_box[0] - sorted_nearest_rank(err, 1, 8)) < 1e-12
    assert abs(rep.p75_box[1] - sorted_nearest_rank(err, 7, 8)) < 1e-12
    assert abs(rep.p95_whisker[0] - sorted_nearest_rank(err, 1, 40)) < 1e-12
    assert abs(rep.p95_whisker[1] - sorted_nearest_rank(err, 39, 40)) < 1e-12
    assert abs(rep.median_err_m - sorted_nearest_rank(err, 1, 2)) < 1e-12
    assert rep.max_err_m == err.max() and rep.n_samples == 10_000
    assert abs(rep.mean_err_m - err.mean()) < 1e-12


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 100), min_size=1, max_size=60), st.integers(0, 40))
def test_nearest_rank_property(values, k):
    s = np.sort(values)
    assert nearest_rank(s, Fraction(k, 40)) == sorted_nearest_rank(values, k, 40)


def test_nearest_rank_small_cases():
    s = np.arange(1.0, 9.0)        # 8 values
    assert central_band(s, Fraction(3, 4)) == (1.0, 7.0)
    assert nearest_rank(s, 0) == 1.0 and nearest_rank(s, 1) == 8.0
    with pytest.raises(ValueError):
        nearest_rank(s, Fraction(3, 2))
    with pytest.raises(ValueError):
        nearest_rank(np.array([]), 0.5)


def test_errors_and_accuracy():
    pred = np.array([[0.0, 0.0], [3.0, 4.0], [0.59, 0.0], [0.6, 0.0]])
    truth = np.zeros((4, 2))
    np.testing.assert_allclose(euclidean_errors(pred, truth), [0, 5, 0.59, 0.6])
    assert accuracy(pred, truth) == 0.5
    rep = error_stats(pred, truth, label="a")
    assert rep.accuracy == 0.5 and rep.label == "a"
    row = rep.as_row()
    assert row["max_err_m"] == 5.0 and row["p95_high_m"] == 5.0
    with pytest.raises(ValueError):
        euclidean_errors(np.zeros((2, 2)), np.zeros((3, 2)))
