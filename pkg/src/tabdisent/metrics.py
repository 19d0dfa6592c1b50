"""Threshold-free detection metrics, computed exactly.

auc_roc is the Mann-Whitney statistic (single sort, midranks for ties):
the probability a random anomaly outscores a random normal, ties worth
half. auc_pr is average precision with tied scores collapsed into one
threshold block, the non-interpolating estimator.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, ShapeMismatchError


def _checked(scores, labels):
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).reshape(-1)
    if s.shape != y.shape:
        raise ShapeMismatchError(f"{s.size} scores vs {y.size} labels")
    if not np.isin(y, (0, 1)).all():
        raise DegenerateInputError("labels must be 0/1")
    y = y.astype(np.int64)
    if y.sum() in (0, y.size):
        raise DegenerateInputError("need both classes to rank against each other")
    return s, y


def _midranks(values):
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    new_group = np.r_[True, sorted_vals[1:] != sorted_vals[:-1]]
    group_id = np.cumsum(new_group) - 1
    counts = np.bincount(group_id)
    starts = np.r_[0, np.cumsum(counts)[:-1]]
    mean_rank = starts + (counts - 1) / 2.0 + 1.0
    ranks = np.empty_like(values)
    ranks[order] = mean_rank[group_id]
    return ranks


def auc_roc(scores, labels):
    """P(anomaly score > normal score) + P(tie)/2."""
    s, y = _checked(scores, labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    ranks = _midranks(s)
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auc_pr(scores, labels):
    """Average precision over descending-score threshold blocks."""
    s, y = _checked(scores, labels)
    n_pos = int(y.sum())
    order = np.argsort(-s, kind="mergesort")
    y_sorted = y[order]
    s_sorted = s[order]
    block_end = np.flatnonzero(np.r_[s_sorted[1:] != s_sorted[:-1], True])
    tp = np.cumsum(y_sorted)[block_end].astype(np.float64)
    predicted = block_end + 1.0
    precision = tp / predicted
    tp_prev = np.r_[0.0, tp[:-1]]
    return float(((tp - tp_prev) / n_pos * precision).sum())


@dataclass
class ScoreReport:
    """One trial's scores, labels and both metric values."""

    scores: np.ndarray
    labels: np.ndarray
    auc_pr: float
    auc_roc: float
    trial_seed: int


def make_report(scores, labels, trial_seed=0):
    s, y = _checked(scores, labels)
    return ScoreReport(
        scores=s,
        labels=y,
        auc_pr=auc_pr(s, y),
        auc_roc=auc_roc(s, y),
        trial_seed=trial_seed,
    )


def aggregate_trials(reports):
    """Arithmetic mean and population std of each metric across trials."""
    if not reports:
        raise DegenerateInputError("aggregate_trials needs at least one report")
    out = {}
    for metric in ("auc_pr", "auc_roc"):
        vals = np.array([getattr(r, metric) for r in reports], dtype=np.float64)
        out[f"{metric}_mean"] = float(vals.mean())
        out[f"{metric}_std"] = float(vals.std())
    return out
