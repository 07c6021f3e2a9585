"""Rank-correlation study tools and Pareto-front extraction.

The rank correlation is Pearson correlation applied to average ranks:
tied values share the mean of the positions they occupy.  With n
distinct values this reduces to 1 - 6*sum(d^2)/(n(n^2-1)).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import DegenerateInput, LengthMismatch, MissingGroundTruth
from .moea import SearchHistory


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks; ties receive the mean of their occupied positions."""
    arr = np.asarray(values, dtype=np.float64)
    order = np.argsort(arr, kind="mergesort")
    ranks = np.empty(len(arr), dtype=np.float64)
    i = 0
    while i < len(arr):
        j = i
        while j + 1 < len(arr) and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Rank correlation in [-1, 1] with average-rank tie handling."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1:
        raise DegenerateInput("inputs must be one-dimensional")
    if len(x) != len(y):
        raise LengthMismatch(len(x), len(y))
    if len(x) < 2:
        raise DegenerateInput("need at least two pairs")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DegenerateInput("inputs must be finite")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise DegenerateInput("constant input has no rank ordering")
    rx = average_ranks(x) - average_ranks(x).mean()
    ry = average_ranks(y) - average_ranks(y).mean()
    return float((rx * ry).sum() / math.sqrt((rx * rx).sum() * (ry * ry).sum()))


@dataclass(frozen=True)
class ScorePair:
    id: str
    predicted: float
    ground_truth: float


@dataclass(frozen=True)
class StudyReport:
    rho: float
    n: int
    pairs: tuple[ScorePair, ...]
    truth_provenance: str

    def as_dict(self) -> dict:
        return {
            "rho": self.rho,
            "n": self.n,
            "truth_provenance": self.truth_provenance,
            "pairs": [
                {"id": p.id, "predicted": p.predicted, "ground_truth": p.ground_truth}
                for p in self.pairs
            ],
        }


def correlation_study(
    predictions: Mapping[str, float],
    truth: Mapping[str, float],
    truth_provenance: str = "",
) -> StudyReport:
    """Join predictions to ground truth by id and correlate the ranks.

    Every prediction id must have a ground-truth entry; extra truth
    entries are ignored.  Pair order follows the predictions mapping.
    """
    missing = sorted(k for k in predictions if k not in truth)
    if missing:
        raise MissingGroundTruth(missing)
    pairs = tuple(
        ScorePair(id=k, predicted=float(v), ground_truth=float(truth[k]))
        for k, v in predictions.items()
    )
    for p in pairs:
        if not (math.isfinite(p.predicted) and math.isfinite(p.ground_truth)):
            raise DegenerateInput(f"non-finite score for id {p.id!r}")
    rho = spearman([p.predicted for p in pairs], [p.ground_truth for p in pairs])
    return StudyReport(rho=rho, n=len(pairs), pairs=pairs, truth_provenance=truth_provenance)


def extract_front(history: SearchHistory) -> list[tuple[tuple[int, ...], float, float]]:
    """Final-generation rank-0 set as (genome, error, flops) tuples.

    Duplicate objective pairs are dropped (first occurrence wins) and
    the result is sorted by ascending flops, then error.
    """
    seen: set[tuple[float, float]] = set()
    entries = []
    for record in history.final().front():
        key = (record.error, record.flops)
        if key in seen:
            continue
        seen.add(key)
        entries.append((record.genome, record.error, record.flops))
    entries.sort(key=lambda e: (e[2], e[1]))
    return entries


def read_scores_csv(path: str) -> dict[str, float]:
    """Two-column CSV (header `id,<score>`) to an ordered id->score map."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DegenerateInput(f"{path}: empty file") from None
        if len(header) != 2 or header[0].strip() != "id":
            raise DegenerateInput(
                f"{path}: expected header 'id,<score>', got {','.join(header)!r}"
            )
        out: dict[str, float] = {}
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise DegenerateInput(f"{path}:{line_no}: expected two columns")
            key = row[0].strip()
            if key in out:
                raise DegenerateInput(f"{path}:{line_no}: duplicate id {key!r}")
            try:
                out[key] = float(row[1])
            except ValueError:
                raise DegenerateInput(
                    f"{path}:{line_no}: {row[1]!r} is not a number"
                ) from None
    if not out:
        raise DegenerateInput(f"{path}: no data rows")
    return out
