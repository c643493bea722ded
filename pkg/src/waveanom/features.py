"""Feature scoring and ranking, window augmentation, length normalization.

Scorers:
  mi_gain        mixed continuous/discrete mutual information via a k-NN
                 entropy estimator (digamma identity over neighbour counts)
  chi_square     Pearson chi-square over an equal-frequency binning
  fisher_score   between-class over within-class variance ratio
  pearson_corr   sample correlation against a numeric target

All scorers are deterministic given the data. Ranking is descending by
score with ties kept in column order.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError
from .special import chi2_sf

log = logging.getLogger(__name__)

_EULER_GAMMA = 0.5772156649015329


@dataclass
class FeatureMatrix:
    """Column-named float matrix with one class label per row."""

    column_names: list[str]
    values: np.ndarray  # (rows, columns) float64
    labels: np.ndarray  # (rows,) integer class ids
    class_names: list[str] = field(default_factory=list)
    group_ids: np.ndarray | None = None  # per-row patient/segment id
    row_ids: np.ndarray | None = None    # stable per-row identity for leakage checks

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.labels = np.asarray(self.labels)
        if self.values.ndim != 2:
            raise DataError("values must be 2-D")
        if len(self.column_names) != self.values.shape[1]:
            raise DataError("column_names length != column count")
        if len(set(self.column_names)) != len(self.column_names):
            raise DataError("column names must be unique")
        if len(self.labels) != self.values.shape[0]:
            raise DataError("labels length != row count")
        if self.group_ids is not None and len(self.group_ids) != self.values.shape[0]:
            raise DataError("group_ids length != row count")
        if self.row_ids is None:
            self.row_ids = np.arange(self.values.shape[0], dtype=np.int64)
        elif len(self.row_ids) != self.values.shape[0]:
            raise DataError("row_ids length != row count")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.column_names.index(name)]

    def select(self, names: list[str]) -> "FeatureMatrix":
        idx = [self.column_names.index(n) for n in names]
        return replace(self, column_names=list(names), values=self.values[:, idx])

    def take_rows(self, rows) -> "FeatureMatrix":
        rows = np.asarray(rows)
        return replace(
            self, values=self.values[rows], labels=self.labels[rows],
            group_ids=None if self.group_ids is None else self.group_ids[rows],
            row_ids=self.row_ids[rows])


@dataclass
class FeatureScore:
    name: str
    method: str
    score: float
    p_value: float | None = None


def _digamma_int(n: np.ndarray) -> np.ndarray:
    """Digamma at positive integers: psi(n) = -gamma + H_{n-1}."""
    n = np.asarray(n, dtype=np.int64)
    top = int(n.max())
    harmonic = np.concatenate([[0.0], np.cumsum(1.0 / np.arange(1, top))])
    return -_EULER_GAMMA + harmonic[n - 1]


def mi_gain(x, y, k: int = 3) -> float:
    """Mutual information (nats) between continuous x and discrete labels y.

    k-NN entropy estimator for the mixed case: for each point, the distance
    to its k-th nearest same-class neighbour sets a radius, and the count of
    all-class neighbours inside that radius enters a digamma identity.
    Clamped at zero; tiny negatives are estimator noise.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    if np.ptp(x) == 0.0:
        return 0.0  # constant column carries no information (constant y included)
    if len(np.unique(y)) < 2:
        raise DataError("mi_gain needs at least 2 label values")
    if len(x) < 20:
        raise DataError(f"mi_gain needs n >= 20, got {len(x)}")

    # drop singleton classes: no same-class neighbour exists
    keep = np.ones(len(x), dtype=bool)
    for label, count in zip(*np.unique(y, return_counts=True)):
        if count < 2:
            keep &= y != label
    x, y = x[keep], y[keep]
    n = len(x)
    if n < 20 or len(np.unique(y)) < 2:
        raise DataError("too few usable points after dropping singleton classes")

    dist = np.abs(x[:, None] - x[None, :])
    np.fill_diagonal(dist, np.inf)
    class_count = np.empty(n, dtype=np.int64)
    k_used = np.empty(n, dtype=np.int64)
    m_inside = np.empty(n, dtype=np.int64)
    for label in np.unique(y):
        members = np.flatnonzero(y == label)
        class_count[members] = len(members)
        kc = min(k, len(members) - 1)
        k_used[members] = kc
        same = dist[np.ix_(members, members)]
        radius = np.sort(same, axis=1)[:, kc - 1]
        m_inside[members] = (dist[members] < radius[:, None]).sum(axis=1)

    mi = (_digamma_int(np.full(n, n)).mean()
          + _digamma_int(k_used).mean()
          - _digamma_int(class_count).mean()
          - _digamma_int(m_inside + 1).mean())
    return max(float(mi), 0.0)


def chi_square(x, y, bins: int = 10):
    """(statistic, p) over an equal-frequency binning of x against labels y."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    edges = np.unique(np.quantile(x, np.linspace(0.0, 1.0, bins + 1)))
    if len(edges) < 3:
        raise DataError("fewer than 2 bins remain after merging duplicate edges")
    cell = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, len(edges) - 2)
    classes = np.unique(y)
    if len(classes) < 2:
        raise DataError("chi_square needs at least 2 label values")
    table = np.zeros((len(edges) - 1, len(classes)))
    for j, c in enumerate(classes):
        counts = np.bincount(cell[y == c], minlength=len(edges) - 1)
        table[:, j] = counts
    table = table[table.sum(axis=1) > 0]  # merging left an empty bin: drop it
    if table.shape[0] < 2:
        raise DataError("fewer than 2 bins remain after merging")
    n = table.sum()
    expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / n
    stat = float(((table - expected) ** 2 / expected).sum())
    df = (table.shape[0] - 1) * (table.shape[1] - 1)
    return stat, chi2_sf(stat, df)


def fisher_score(x, y) -> float:
    """sum_c n_c (mu_c - mu)^2 / sum_c n_c var_c, with per-class population variance."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    classes = np.unique(y)
    if len(classes) < 2:
        raise DataError("fisher_score needs at least 2 classes")
    mu = x.mean()
    between = 0.0
    within = 0.0
    for c in classes:
        xs = x[y == c]
        if len(xs) < 2:
            raise DataError("fisher_score needs >= 2 samples per class")
        between += len(xs) * (xs.mean() - mu) ** 2
        within += len(xs) * xs.var()
    if within == 0.0:
        return float("inf")  # perfectly separated sentinel: ranks first
    return float(between / within)


def pearson_corr(x, y_numeric) -> float:
    """Sample Pearson correlation in [-1, 1]."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y_numeric, dtype=np.float64)
    if np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        raise DataError("pearson correlation is undefined for constant input")
    xc = x - x.mean()
    yc = y - y.mean()
    r = float((xc * yc).sum() / np.sqrt((xc * xc).sum() * (yc * yc).sum()))
    return min(1.0, max(-1.0, r))


_METHODS = ("mi", "chi2", "fisher", "pearson")


def rank_features(matrix: FeatureMatrix, method: str = "mi", mi_k: int = 3) -> list[FeatureScore]:
    """Score every column; descending by score, ties stable in column order."""
    if method not in _METHODS:
        raise DataError(f"unknown ranking method {method!r}")
    if matrix.n_rows == 0:
        raise DataError("empty matrix")
    scores = []
    for name in matrix.column_names:
        col = matrix.column(name)
        p = None
        if method == "mi":
            s = mi_gain(col, matrix.labels, k=mi_k)
        elif method == "chi2":
            s, p = chi_square(col, matrix.labels)
        elif method == "fisher":
            s = fisher_score(col, matrix.labels)
        else:
            s = abs(pearson_corr(col, matrix.labels.astype(np.float64)))
        scores.append(FeatureScore(name=name, method=method, score=s, p_value=p))
    order = sorted(range(len(scores)), key=lambda i: (-scores[i].score, i))
    return [scores[i] for i in order]


def augment_previous(matrix: FeatureMatrix, n: int) -> FeatureMatrix:
    """Append the previous 1..n records' features within each group.

    Row t gains columns <name>_prev1 .. <name>_prevn holding rows t-1 .. t-n
    of its own group; the first n rows of each group are dropped, and groups
    shorter than n+1 are dropped entirely (logged as a warning count).
    """
    if n == 0:
        return matrix
    if n not in (1, 2, 3):
        raise DataError(f"previous-window depth must be 0..3, got {n}")
    groups = (matrix.group_ids if matrix.group_ids is not None
              else np.zeros(matrix.n_rows, dtype=np.int64))
    names = list(matrix.column_names)
    for i in range(1, n + 1):
        names += [f"{c}_prev{i}" for c in matrix.column_names]

    blocks, labels, gids, rids = [], [], [], []
    dropped = 0
    for g in _unique_in_order(groups):
        rows = np.flatnonzero(groups == g)
        if len(rows) < n + 1:
            dropped += 1
            continue
        vals = matrix.values[rows]
        stacked = [vals[n:]]
        for i in range(1, n + 1):
            stacked.append(vals[n - i:len(vals) - i])
        blocks.append(np.hstack(stacked))
        labels.append(matrix.labels[rows[n:]])
        gids.append(groups[rows[n:]])
        rids.append(matrix.row_ids[rows[n:]])
    if dropped:
        log.warning("augment_previous dropped %d group(s) shorter than %d rows", dropped, n + 1)
    if not blocks:
        raise DataError(f"no group has at least {n + 1} rows")
    return FeatureMatrix(
        column_names=names, values=np.vstack(blocks),
        labels=np.concatenate(labels), class_names=list(matrix.class_names),
        group_ids=np.concatenate(gids), row_ids=np.concatenate(rids))


def _unique_in_order(values):
    seen = set()
    out = []
    for v in values.tolist():
        if v not in seen:
            seen.add(v)
            out.append(v)
    return out


def normalize_length(signal, target: int = 144, mode: str = "truncate") -> np.ndarray:
    """Fix a 1-D signal to `target` samples.

    Short signals are right-padded with zeros. Long signals keep their first
    `target` samples, or are uniformly subsampled with mode='subsample'.
    """
    signal = np.asarray(signal, dtype=np.float64)
    if signal.size == 0:
        raise DataError("empty signal")
    if signal.size == target:
        return signal.copy()
    if signal.size < target:
        return np.concatenate([signal, np.zeros(target - signal.size)])
    if mode == "truncate":
        return signal[:target].copy()
    if mode == "subsample":
        idx = np.round(np.linspace(0, signal.size - 1, target)).astype(np.int64)
        return signal[idx].copy()
    raise DataError(f"unknown length mode {mode!r}")


def standardize(values: np.ndarray):
    """Per-column zero mean / unit variance; constant columns map to zero.

    Returns (standardized, mean, std) where std is 1.0 for constant columns
    so destandardize() restores the original values.
    """
    values = np.asarray(values, dtype=np.float64)
    mu = values.mean(axis=0)
    sigma = values.std(axis=0)
    safe = np.where(sigma == 0.0, 1.0, sigma)
    return (values - mu) / safe, mu, safe


def destandardize(standardized: np.ndarray, mu: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    return standardized * sigma + mu
