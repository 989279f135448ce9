"""Anomaly scoring and ranking metrics.

AUROC uses the rank-sum formulation with midranks for ties, which equals the
probability that a random anomaly outscores a random normal plus half the
probability of a tie. AUPRC is average precision with descending-score
ordering; tied scores keep their input order (stable sort), which is the
documented tie rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .exceptions import InputError, UndefinedMetricError
from .model import ForwardState


@dataclass(frozen=True)
class ScoreTable:
    """Per-node anomaly scores with ground-truth labels, one row per test node."""

    node_ids: np.ndarray
    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if not (self.node_ids.shape == self.scores.shape == self.labels.shape):
            raise InputError("node_ids, scores and labels must align")
        for arr in (self.node_ids, self.scores, self.labels):
            arr.setflags(write=False)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("node_id,score,label\n")
            for i, s, y in zip(self.node_ids, self.scores, self.labels):
                fh.write(f"{i},{s:.17g},{y}\n")


def anomaly_scores(state: ForwardState, test_nodes, labels) -> ScoreTable:
    """Score test nodes by mean squared distance to both view centers.

    score(i) = 0.5 * (||h_ccr(i) - c_ccr||^2 + ||h_cwr(i) - c_cwr||^2).
    Scores are nonnegative and each node's score depends only on its own
    rows, so any subset of nodes can be scored consistently.
    """
    test = np.asarray(test_nodes, dtype=np.int64)
    labels = np.asarray(labels)
    h_ccr = ad.value_of(state.h_ccr)
    h_cwr = ad.value_of(state.h_cwr)
    if test.size and (test.min() < 0 or test.max() >= h_ccr.shape[0]):
        raise InputError("test node ids out of range")
    d_ccr = h_ccr[test] - state.c_ccr
    d_cwr = h_cwr[test] - state.c_cwr
    scores = 0.5 * ((d_ccr * d_ccr).sum(axis=1) + (d_cwr * d_cwr).sum(axis=1))
    return ScoreTable(node_ids=test, scores=scores,
                      labels=labels[test].astype(np.int64))


def _validate_metric_inputs(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.ndim != 1 or scores.shape != labels.shape:
        raise InputError("scores and labels must be 1-D and aligned")
    if scores.size == 0:
        raise UndefinedMetricError("metric undefined on empty input")
    if not np.isfinite(scores).all():
        raise InputError("scores contain non-finite values")
    if not np.isin(labels, (0, 1)).all():
        raise InputError("labels must be 0 or 1")
    return scores, labels.astype(np.int64)


def _midranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with tied values sharing the average of their ranks."""
    order = np.argsort(x, kind="mergesort")
    ranked = x[order]
    bounds = np.flatnonzero(np.r_[True, ranked[1:] != ranked[:-1], True])
    ranks = np.empty(x.size, dtype=np.float64)
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        ranks[order[lo:hi]] = 0.5 * (lo + hi + 1)
    return ranks


def auroc(scores, labels) -> float:
    """Area under the ROC curve via the midrank rank-sum statistic."""
    scores, labels = _validate_metric_inputs(scores, labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUROC undefined: only one class present")
    ranks = _midranks(scores)
    rank_sum = ranks[labels == 1].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def auprc(scores, labels) -> float:
    """Average precision over the descending-score ranking.

    Ties keep their input order (stable sort). Equals the mean, over
    positives, of the precision at each positive's rank.
    """
    scores, labels = _validate_metric_inputs(scores, labels)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise UndefinedMetricError("AUPRC undefined: no positive labels")
    order = np.argsort(-scores, kind="mergesort")
    hits = labels[order]
    # plain left-to-right accumulation keeps the result reproducible
    total = 0.0
    seen = 0
    for rank, hit in enumerate(hits, start=1):
        if hit:
            seen += 1
            total += seen / rank
    return total / n_pos
