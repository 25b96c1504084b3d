"""Evaluation metrics: ROC-AUC, mapped classification accuracy, z-scored traces."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from .errors import ConfigurationError, InvalidInputError


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing the mean of their positions."""
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    # boundaries of runs of equal values
    starts = np.flatnonzero(np.r_[True, sorted_vals[1:] != sorted_vals[:-1]])
    ends = np.r_[starts[1:], sorted_vals.size]
    run_rank = (starts + ends + 1) / 2.0
    ranks = np.empty(values.size)
    ranks[order] = np.repeat(run_rank, ends - starts)
    return ranks


def auc(scores: Sequence[float], is_anomalous: Sequence[bool]) -> float:
    """P(score_anomalous > score_normal) + 0.5 P(equal), via rank sums."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(is_anomalous, dtype=bool)
    if s.shape != y.shape or s.ndim != 1:
        raise InvalidInputError("scores and labels must be 1-D and equal length")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise InvalidInputError("AUC needs at least one normal and one anomalous sample")
    if not np.all(np.isfinite(s)):
        raise InvalidInputError("scores must be finite")
    ranks = _average_ranks(s)
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def greedy_instance_mapping(
    instance_ids: Sequence[int], truth: Sequence[Hashable]
) -> dict[int, Hashable]:
    """Map each instance to the class it most often wins on (ties: first seen).

    Several instances may map to the same class.
    """
    if len(instance_ids) != len(truth):
        raise InvalidInputError("instance ids and truth must have equal length")
    votes: dict[int, Counter] = {}
    for k, c in zip(instance_ids, truth):
        votes.setdefault(int(k), Counter())[c] += 1
    return {k: cnt.most_common(1)[0][0] for k, cnt in votes.items()}


@dataclass(frozen=True)
class AccuracyReport:
    accuracy: float
    n_eval: int
    n_unmapped: int


def classification_accuracy(
    predicted_k: Sequence[int],
    truth: Sequence[Hashable],
    mapping: dict[int, Hashable] | None = None,
) -> AccuracyReport:
    """Fraction of samples whose mapped instance equals the true class.

    Without a mapping, instance ids are compared to the truth directly.
    Instances missing from the mapping count as errors.
    """
    if len(predicted_k) != len(truth):
        raise InvalidInputError("predictions and truth must have equal length")
    if len(truth) == 0:
        raise InvalidInputError("nothing to score")
    hits = 0
    unmapped = 0
    for k, c in zip(predicted_k, truth):
        if mapping is None:
            hits += int(k == c)
            continue
        if int(k) not in mapping:
            unmapped += 1
            continue
        hits += int(mapping[int(k)] == c)
    return AccuracyReport(hits / len(truth), len(truth), unmapped)


def standardized_loss(traces: np.ndarray, reference_len: int | None = None) -> np.ndarray:
    """Z-score each instance's loss trace against its own reference segment.

    ``traces`` is (T,) for one instance or (K, T) for K instances; the first
    ``reference_len`` samples (default: all) supply mean and std.
    """
    arr = np.asarray(traces, dtype=np.float64)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[1] < 2:
        raise InvalidInputError("trace needs at least two samples")
    ref_len = arr.shape[1] if reference_len is None else reference_len
    if ref_len < 2 or ref_len > arr.shape[1]:
        raise InvalidInputError(f"reference_len must be in [2, {arr.shape[1]}]")
    ref = arr[:, :ref_len]
    mu = ref.mean(axis=1, keepdims=True)
    sd = ref.std(axis=1, keepdims=True)
    if np.any(sd == 0):
        raise ConfigurationError(
            "reference segment has zero variance; use a longer reference segment"
        )
    out = (arr - mu) / sd
    return out[0] if single else out
