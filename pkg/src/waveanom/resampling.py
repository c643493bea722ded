"""Exact k-nearest-neighbour search, SMOTE, and Borderline-SMOTE.

Distances are Euclidean on raw feature values; standardize first if the
columns live on different scales (features.standardize). All functions are
pure over their inputs plus an explicit seeded generator, so a fixed seed
gives bit-identical output. Original points are never modified or deleted:
resampling only appends synthetic minority points.

Borderline-SMOTE first places each minority point into one of three
categories by looking at its m nearest neighbours in the full dataset
(m' of which are majority):

    m' == m          noise   (ignored entirely)
    m/2 <= m' < m    danger  (borderline; the only seeding points)
    m' <  m/2        safe

Synthetic points are interpolated from danger points towards their k nearest
non-noise minority neighbours until the requested class ratio is reached.
"""
from __future__ import annotations

from enum import Enum

import numpy as np

from .errors import DataError


class MinorityCategory(Enum):
    NOISE = "noise"
    DANGER = "danger"
    SAFE = "safe"


class NoDangerPointsError(DataError):
    """No borderline minority points exist; callers may fall back to SMOTE."""


def knn(points, query, k: int, exclude: int | None = None) -> np.ndarray:
    """Indices of the k nearest points to `query`, ascending by distance.

    Ties break towards the lower index. `exclude` skips one index, for
    queries that are themselves dataset members.
    """
    points = np.asarray(points, dtype=np.float64)
    query = np.asarray(query, dtype=np.float64)
    available = len(points) - (1 if exclude is not None else 0)
    if not 1 <= k <= available:
        raise DataError(f"k={k} out of range for {available} candidate points")
    d = np.sqrt(((points - query) ** 2).sum(axis=1))
    if exclude is not None:
        d[exclude] = np.inf
    order = np.argsort(d, kind="stable")
    return order[:k]


def smote(minority, k: int, amount: int, rng: np.random.Generator) -> np.ndarray:
    """Plain SMOTE: `amount` synthetic points per minority point.

    Each synthetic point is p + u * (q - p) with q one of p's k nearest
    minority neighbours and u ~ Uniform[0, 1].
    """
    minority = np.asarray(minority, dtype=np.float64)
    if len(minority) <= k:
        raise DataError(f"SMOTE needs more than k={k} minority points, got {len(minority)}")
    out = []
    for i, p in enumerate(minority):
        neighbours = knn(minority, p, k, exclude=i)
        for _ in range(amount):
            q = minority[neighbours[rng.integers(0, k)]]
            u = rng.uniform(0.0, 1.0)
            out.append(p + u * (q - p))
    return np.array(out) if out else np.empty((0, minority.shape[1]))


def bsmote_categorize(x, y, minority_label, m: int) -> list[MinorityCategory]:
    """Three-way categorization of every minority point, in dataset order."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    labels = set(np.unique(y).tolist())
    if len(labels) < 2:
        raise DataError("categorization needs both classes present")
    if m > len(x) - 1:
        raise DataError(f"m={m} exceeds dataset size {len(x)} - 1")
    out = []
    for i in np.flatnonzero(y == minority_label):
        neighbours = knn(x, x[i], m, exclude=int(i))
        majority_count = int((y[neighbours] != minority_label).sum())
        if majority_count == m:
            out.append(MinorityCategory.NOISE)
        elif majority_count >= m / 2:
            out.append(MinorityCategory.DANGER)
        else:
            out.append(MinorityCategory.SAFE)
    return out


def bsmote_resample(x, y, minority_label, k: int = 5, m: int = 10,
                    target_ratio: float = 1.0, rng: np.random.Generator | None = None):
    """Append synthetic minority points until minority == target_ratio * majority.

    Seeds are danger points only; interpolation targets are their k nearest
    non-noise minority neighbours. The synthetic quota is dealt round-robin
    over the danger points in dataset order. Returns (x_out, y_out,
    synthetic_count); the first len(x) rows are the originals, untouched.
    """
    if rng is None:
        rng = np.random.default_rng()
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    minority_idx = np.flatnonzero(y == minority_label)
    majority_count = len(y) - len(minority_idx)
    needed = int(round(target_ratio * majority_count)) - len(minority_idx)
    if needed <= 0:
        return x.copy(), y.copy(), 0

    categories = bsmote_categorize(x, y, minority_label, m)
    danger = [int(i) for i, c in zip(minority_idx, categories) if c is MinorityCategory.DANGER]
    if not danger:
        raise NoDangerPointsError(
            "no danger (borderline) minority points; plain SMOTE is the fallback")
    usable = np.array([int(i) for i, c in zip(minority_idx, categories)
                       if c is not MinorityCategory.NOISE])
    pool = x[usable]
    k_eff = min(k, len(usable) - 1)
    if k_eff < 1:
        raise DataError("not enough non-noise minority points to interpolate")

    synthetic = np.empty((needed, x.shape[1]))
    for j in range(needed):
        seed_idx = danger[j % len(danger)]
        pos_in_pool = int(np.flatnonzero(usable == seed_idx)[0])
        neighbours = knn(pool, x[seed_idx], k_eff, exclude=pos_in_pool)
        q = pool[neighbours[rng.integers(0, k_eff)]]
        u = rng.uniform(0.0, 1.0)
        synthetic[j] = x[seed_idx] + u * (q - x[seed_idx])

    x_out = np.vstack([x, synthetic])
    y_out = np.concatenate([y, np.full(needed, minority_label, dtype=y.dtype)])
    return x_out, y_out, needed
