"""Attack metrics: AUC, median-threshold accuracy, precision curves, subgroups, utility."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .data import Dataset
from .errors import DegenerateLabelsError, DimensionError, ParameterError, SchemaError, SizeError
from .numcore import FLOAT, SeededRng


def _prepare(scores, labels, group=None):
    s = np.asarray(getattr(scores, "scores", scores), dtype=FLOAT).ravel()
    y = np.asarray(labels).ravel().astype(int)
    if s.size != y.size:
        raise DimensionError(f"{s.size} scores but {y.size} labels")
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == y.size:
        where = f" in group {group!r}" if group else ""
        raise DegenerateLabelsError(f"both members and non-members are required{where}", group)
    return s, y


def auc(scores, labels) -> float:
    """Probability a member outscores a non-member; ties count one half."""
    s, y = _prepare(scores, labels)
    ranks = rankdata(s, method="average")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    # twice the Mann-Whitney U is an integer, so this is exact
    twice_u = int(round(2.0 * ranks[y == 1].sum())) - n_pos * (n_pos + 1)
    return (twice_u / 2) / (n_pos * n_neg)


def auc_bruteforce(scores, labels) -> float:
    s, y = _prepare(scores, labels)
    pos, neg = s[y == 1], s[y == 0]
    wins = ties = 0
    for a in pos:
        for b in neg:
            if a > b:
                wins += 1
            elif a == b:
                ties += 1
    return (wins + ties / 2) / (len(pos) * len(neg))


def median_threshold(scores) -> float:
    return float(np.median(np.asarray(getattr(scores, "scores", scores), dtype=FLOAT)))


def accuracy_at_median(scores, labels) -> float:
    """Accuracy of predicting membership iff score > median score."""
    s, y = _prepare(scores, labels)
    tau = float(np.median(s))
    return float(np.mean((s > tau).astype(int) == y))


@dataclass(frozen=True)
class PrecisionCurve:
    q: np.ndarray
    precision: np.ndarray

    def rows(self):
        return [(float(a), float(b)) for a, b in zip(self.q, self.precision)]


DEFAULT_Q_GRID = (0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)


def top_count(q: float, n: int) -> int:
    # tolerance absorbs products such as 0.2 * 200 = 40.000000000000007
    return max(1, math.ceil(q * n - 1e-9))


def precision_quantile_curve(scores, labels, q_grid=DEFAULT_Q_GRID) -> PrecisionCurve:
    """Membership rate among the top ``ceil(q * n)`` scores, ties in input order."""
    q_grid = np.asarray(q_grid, dtype=FLOAT).ravel()
    if q_grid.size == 0:
        raise ParameterError("q grid is empty")
    if np.any(q_grid <= 0) or np.any(q_grid > 1):
        raise ParameterError("q values must lie in (0, 1]")
    s, y = _prepare(scores, labels)
    order = np.argsort(-s, kind="stable")
    hits = np.cumsum(y[order])
    prec = np.array([hits[top_count(q, s.size) - 1] / top_count(q, s.size) for q in q_grid])
    return PrecisionCurve(q_grid, prec)


@dataclass(frozen=True)
class GroupMetrics:
    auc: float
    accuracy: float
    n: int


def subgroup_report(scores, labels, mask) -> dict:
    """AUC/accuracy on the minority (mask 1) and majority (mask 0) rows.

    Accuracy keeps the global median threshold, so the size-weighted mean of
    the two group accuracies equals the global accuracy.
    """
    s, y = _prepare(scores, labels)
    m = np.asarray(getattr(mask, "mask", mask)).ravel().astype(bool)
    if m.size != s.size:
        raise DimensionError("mask length differs from test-set size")
    tau = float(np.median(s))
    out = {}
    for name, rows in (("minority", m), ("majority", ~m)):
        s_g, y_g = _prepare(s[rows], y[rows], group=name)
        out[name] = GroupMetrics(auc(s_g, y_g), fixed_threshold_accuracy(s_g, y_g, tau), int(rows.sum()))
    out["gap_auc"] = out["minority"].auc - out["majority"].auc
    out["gap_accuracy"] = out["minority"].accuracy - out["majority"].accuracy
    return out


def fixed_threshold_accuracy(scores, labels, tau: float) -> float:
    s = np.asarray(getattr(scores, "scores", scores), dtype=FLOAT).ravel()
    return float(np.mean((s > tau).astype(int) == np.asarray(labels).ravel()))


def w1_equal_size(a, b) -> float:
    a = np.sort(np.asarray(a, dtype=FLOAT))
    b = np.sort(np.asarray(b, dtype=FLOAT))
    if a.size != b.size:
        raise SizeError("sorted coupling needs equal-size samples")
    return float(np.mean(np.abs(a - b)))


def wasserstein_utility(d_syn: Dataset, d_holdout: Dataset, rng: SeededRng | None = None) -> float:
    """Mean over features of the 1-D Wasserstein-1 distance.

    The larger set is subsampled without replacement to the size of the
    smaller one before the sorted coupling.
    """
    if d_syn.schema.names != d_holdout.schema.names:
        raise SchemaError("synthetic and hold-out schemas differ")
    if d_syn.n_rows == 0 or d_holdout.n_rows == 0:
        raise SizeError("wasserstein_utility needs non-empty sets")
    a, b = d_syn.values, d_holdout.values
    if len(a) != len(b):
        rng = rng or SeededRng(0)
        if len(a) > len(b):
            a = a[np.sort(rng.sample_without_replacement(len(a), len(b)))]
        else:
            b = b[np.sort(rng.sample_without_replacement(len(b), len(a)))]
    return float(np.mean([w1_equal_size(a[:, j], b[:, j]) for j in range(a.shape[1])]))
