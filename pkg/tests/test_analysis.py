"""Rank correlation, study joins, front extraction, CSV ingestion."""

from __future__ import annotations

import math

import numpy as np
import pytest

from rwenas.analysis import (
    average_ranks,
    correlation_study,
    extract_front,
    read_scores_csv,
    spearman,
)
from rwenas.errors import DegenerateInput, LengthMismatch, MissingGroundTruth
from rwenas.moea import GenerationSnapshot, IndividualRecord, SearchHistory


def brute_spearman_distinct(xs, ys):
    # classic d^2 formula; valid only when each input has no ties
    n = len(xs)
    rank = lambda vs: {v: i + 1 for i, v in enumerate(sorted(vs))}
    rx, ry = rank(xs), rank(ys)
    d2 = sum((rx[x] - ry[y]) ** 2 for x, y in zip(xs, ys))
    return 1.0 - 6.0 * d2 / (n * (n * n - 1))


def test_average_ranks_basic():
    np.testing.assert_array_equal(average_ranks([10, 20, 30]), [1, 2, 3])
    np.testing.assert_array_equal(average_ranks([30, 10, 20]), [3, 1, 2])


def test_average_ranks_ties_share_mean_position():
    np.testing.assert_array_equal(average_ranks([1, 2, 2, 3]), [1, 2.5, 2.5, 4])
    np.testing.assert_array_equal(average_ranks([5, 5, 5]), [2, 2, 2])
    np.testing.assert_array_equal(
        average_ranks([4, 1, 4, 4, 9]), [3, 1, 3, 3, 5]
    )


def test_spearman_perfect_and_reversed():
    assert spearman([1, 2, 3, 4], [10, 20, 30, 40]) == pytest.approx(1.0)
    assert spearman([1, 2, 3, 4], [40, 30, 20, 10]) == pytest.approx(-1.0)


def test_spearman_worked_example():
    # d = (1,1,1,1,0), sum d^2 = 4, rho = 1 - 24/120
    assert spearman([1, 2, 3, 4, 5], [2, 1, 4, 3, 5]) == pytest.approx(0.8, abs=1e-12)


def test_spearman_tied_worked_example():
    # ranks (1, 2.5, 2.5, 4) vs (1, 2, 3, 4): rho = 4.5 / sqrt(4.5 * 5)
    expected = 3.0 / math.sqrt(10.0)
    assert spearman([1, 2, 2, 3], [1, 2, 3, 4]) == pytest.approx(expected, abs=1e-12)


def test_spearman_matches_distinct_value_formula():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n = int(rng.integers(3, 30))
        xs = rng.permutation(n).tolist()
        ys = rng.permutation(n).tolist()
        assert spearman(xs, ys) == pytest.approx(
            brute_spearman_distinct(xs, ys), abs=1e-12
        )


def test_spearman_matches_pearson_of_ranks_with_ties():
    rng = np.random.default_rng(1)
    for _ in range(30):
        xs = rng.integers(0, 5, size=20).astype(float)
        ys = rng.integers(0, 5, size=20).astype(float)
        if np.all(xs == xs[0]) or np.all(ys == ys[0]):
            continue
        expected = np.corrcoef(average_ranks(xs), average_ranks(ys))[0, 1]
        assert spearman(xs, ys) == pytest.approx(float(expected), abs=1e-12)


def test_spearman_invariant_under_monotone_transform():
    xs = [0.3, 1.9, 0.7, 2.5, 1.1]
    ys = [5.0, 2.0, 9.0, 1.0, 4.0]
    base = spearman(xs, ys)
    assert spearman(xs, [math.exp(y) for y in ys]) == pytest.approx(base, abs=1e-12)
    assert spearman([100 * x - 3 for x in xs], ys) == pytest.approx(base, abs=1e-12)


def test_spearman_input_validation():
    with pytest.raises(LengthMismatch) as err:
        spearman([1, 2, 3], [1, 2])
    assert err.value.left == 3 and err.value.right == 2
    with pytest.raises(DegenerateInput):
        spearman([1], [2])
    with pytest.raises(DegenerateInput):
        spearman([1, float("nan"), 3], [1, 2, 3])
    with pytest.raises(DegenerateInput):
        spearman([1, 2, 3], [1, float("inf"), 3])
    with pytest.raises(DegenerateInput):
        spearman([2, 2, 2], [1, 2, 3])
    with pytest.raises(DegenerateInput):
        spearman([[1, 2]], [[3, 4]])


def test_correlation_study_joins_by_id():
    predictions = {"b": 0.3, "a": 0.1, "c": 0.2}
    truth = {"a": 0.15, "b": 0.35, "c": 0.25, "d": 0.99}
    report = correlation_study(predictions, truth, truth_provenance="bench-v1")
    assert report.n == 3
    assert report.rho == pytest.approx(1.0)
    assert report.truth_provenance == "bench-v1"
    # pair order follows the predictions mapping, extra truth ignored
    assert [p.id for p in report.pairs] == ["b", "a", "c"]
    assert report.pairs[0].ground_truth == pytest.approx(0.35)
    d = report.as_dict()
    assert d["n"] == 3 and len(d["pairs"]) == 3
    assert d["pairs"][1] == {"id": "a", "predicted": 0.1, "ground_truth": 0.15}


def test_correlation_study_missing_ids_sorted():
    with pytest.raises(MissingGroundTruth) as err:
        correlation_study({"z": 1.0, "a": 2.0, "m": 3.0}, {"m": 0.5})
    assert err.value.ids == ["a", "z"]


def test_correlation_study_rejects_non_finite():
    with pytest.raises(DegenerateInput):
        correlation_study({"a": 1.0, "b": float("nan")}, {"a": 1.0, "b": 2.0})


def _record(genome_tag, error, flops, rank):
    genome = tuple([genome_tag] * 40)
    return IndividualRecord(
        genome=genome, error=error, flops=flops, rank=rank, crowding=0.0
    )


def test_extract_front_dedups_and_sorts():
    final = GenerationSnapshot(
        generation=2,
        individuals=(
            _record(1, 0.30, 500.0, 0),
            _record(2, 0.10, 900.0, 0),
            _record(3, 0.30, 500.0, 0),  # duplicate objectives, later genome
            _record(4, 0.50, 100.0, 0),
            _record(5, 0.60, 9999.0, 1),  # dominated, excluded
        ),
        evaluations=5,
        cache_hits=0,
    )
    earlier = GenerationSnapshot(
        generation=0,
        individuals=(_record(9, 0.01, 1.0, 0),),
        evaluations=1,
        cache_hits=0,
    )
    history = SearchHistory(snapshots=[earlier, final], elapsed_s=0.0)
    front = extract_front(history)
    assert [(e[1], e[2]) for e in front] == [(0.50, 100.0), (0.30, 500.0), (0.10, 900.0)]
    # first occurrence wins the dedup
    assert front[1][0] == tuple([1] * 40)
    assert all(len(e[0]) == 40 for e in front)


def test_read_scores_csv_round_trip(tmp_path):
    path = tmp_path / "scores.csv"
    path.write_text("id,error\na,0.5\nb,0.25\n c , 0.125\n")
    scores = read_scores_csv(str(path))
    assert scores == {"a": 0.5, "b": 0.25, "c": 0.125}
    assert list(scores) == ["a", "b", "c"]


def test_read_scores_csv_skips_blank_lines(tmp_path):
    path = tmp_path / "scores.csv"
    path.write_text("id,score\na,1\n\nb,2\n")
    assert read_scores_csv(str(path)) == {"a": 1.0, "b": 2.0}


@pytest.mark.parametrize(
    "body,fragment",
    [
        ("", "empty file"),
        ("name,score\na,1\n", "expected header"),
        ("id\n", "expected header"),
        ("id,score\na,1\na,2\n", "duplicate id"),
        ("id,score\na,1,extra\n", "two columns"),
        ("id,score\na,oops\n", "not a number"),
        ("id,score\n", "no data rows"),
    ],
)
def test_read_scores_csv_rejects_malformed(tmp_path, body, fragment):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(DegenerateInput) as err:
        read_scores_csv(str(path))
    assert fragment in str(err.value)
