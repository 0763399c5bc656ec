"""Shapley-value attribution of fused signals to the five strategies.

The explained function is the raw weighted mean m, not the rounded level: a
step function would hand out unstable attributions, so the quantized
decision is reported alongside instead.  Absent features are integrated out
interventionally against a background set built by k-means over the observed
strategy rows (centroids snapped back to valid signal levels, clusters
weighted by their share of the data).

Two attribution routes are provided and must agree: direct enumeration of
all 2^5 coalitions, and the kernel-weighted least-squares estimator over the
30 proper non-trivial coalitions with both endpoint constraints enforced.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ensemble import quantize_mean
from .signals import LEVEL_MAX, LEVEL_MIN, STRATEGY_COLUMNS

N_FEATURES = len(STRATEGY_COLUMNS)
DEFAULT_K = 50
_FULL_MASK = (1 << N_FEATURES) - 1


@dataclass(frozen=True)
class BackgroundSet:
    """Representative strategy rows with cluster-mass weights (sum 1)."""

    rows: np.ndarray           # (m, 5) int64, valid signal levels
    weights: np.ndarray        # (m,) positive, sums to 1
    centroids: np.ndarray      # (m, 5) float, pre-rounding Lloyd centroids
    inertia_history: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.rows.ndim != 2 or self.rows.shape[1] != N_FEATURES:
            raise ValueError("rows must be (m, 5)")
        if self.weights.shape != (self.rows.shape[0],):
            raise ValueError("weights must align with rows")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")
        if abs(float(self.weights.sum()) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        if np.any((self.rows < LEVEL_MIN) | (self.rows > LEVEL_MAX)):
            raise ValueError("background rows outside the signal-level domain")


def _round_to_levels(x: np.ndarray) -> np.ndarray:
    """Nearest signal level, ties away from zero."""
    mag = np.floor(np.abs(x) + 0.5)
    return np.clip(np.sign(x) * mag, LEVEL_MIN, LEVEL_MAX).astype(np.int64)


def kmeans(points, k: int, max_iter: int = 100, seed: int = 0) -> BackgroundSet:
    """Seeded Lloyd clustering over signal rows.

    Initial centroids are drawn without replacement from the *distinct*
    points (so no two start identical); assignment ties go to the lowest
    cluster index.  A cluster that empties out keeps its centroid during the
    iterations and is dropped from the final set, which keeps every returned
    weight positive.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != N_FEATURES:
        raise ValueError("points must be (n, 5)")
    distinct = np.unique(pts, axis=0)
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > len(distinct):
        raise ValueError(f"k={k} exceeds the {len(distinct)} distinct points")

    rng = np.random.default_rng(seed)
    centroids = distinct[rng.choice(len(distinct), size=k, replace=False)]
    labels = np.zeros(len(pts), dtype=np.int64)
    history: list[float] = []
    for _ in range(max_iter):
        d2 = ((pts[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_labels = d2.argmin(axis=1)
        new_centroids = centroids.copy()
        for j in range(k):
            members = pts[new_labels == j]
            if len(members):
                new_centroids[j] = members.mean(axis=0)
        history.append(float(((pts - new_centroids[new_labels]) ** 2).sum()))
        converged = np.array_equal(new_centroids, centroids) and np.array_equal(new_labels, labels)
        labels, centroids = new_labels, new_centroids
        if converged:
            break

    sizes = np.bincount(labels, minlength=k)
    keep = sizes > 0
    return BackgroundSet(
        rows=_round_to_levels(centroids[keep]),
        weights=sizes[keep] / len(pts),
        centroids=centroids[keep],
        inertia_history=tuple(history),
    )


def build_background(matrix_levels, k: int = DEFAULT_K, seed: int = 0) -> BackgroundSet:
    """Background for a strategy matrix, clamping k to the distinct-row count.

    The signal space is discrete, so a series can easily expose fewer than k
    distinct rows; asking for more clusters than that is not an error here.
    """
    pts = np.asarray(matrix_levels, dtype=np.float64)
    n_distinct = len(np.unique(pts, axis=0))
    return kmeans(pts, k=min(k, n_distinct), seed=seed)


def masked_value(f, x, subset, bg: BackgroundSet) -> float:
    """Expected model output with the features in ``subset`` pinned to x.

    The remaining coordinates range over the background rows, weighted by
    cluster mass.  ``f`` maps an (n, 5) array to an (n,) array of outputs.
    """
    x = np.asarray(x, dtype=np.float64)
    subset = sorted(set(int(i) for i in subset))
    if subset and (subset[0] < 0 or subset[-1] >= N_FEATURES):
        raise ValueError("subset indices must lie in 0..4")
    if len(subset) == N_FEATURES:
        return float(np.asarray(f(x[None, :]))[0])
    hybrids = bg.rows.astype(np.float64).copy()
    hybrids[:, subset] = x[subset]
    return float(bg.weights @ np.asarray(f(hybrids)))


@dataclass(frozen=True)
class ShapAttribution:
    """Per-strategy contributions phi with base_value + sum(phi) == fx."""

    phi: np.ndarray    # (5,)
    base_value: float  # expected model output over the background
    fx: float          # raw fused value at the instance (pre-quantization)

    def __post_init__(self) -> None:
        if self.phi.shape != (N_FEATURES,):
            raise ValueError("phi must have 5 entries")

    @property
    def efficiency_gap(self) -> float:
        return abs(float(self.phi.sum()) + self.base_value - self.fx)

    @property
    def decision(self) -> int:
        return quantize_mean(self.fx)


def _coalition_values(f, x, bg: BackgroundSet) -> np.ndarray:
    """Masked value for every coalition bitmask 0..31 in one model call."""
    x = np.asarray(x, dtype=np.float64)
    m = len(bg.rows)
    base_rows = bg.rows.astype(np.float64)
    stacked = np.empty((_FULL_MASK + 1, m, N_FEATURES), dtype=np.float64)
    for mask in range(_FULL_MASK + 1):
        block = base_rows.copy()
        for i in range(N_FEATURES):
            if mask >> i & 1:
                block[:, i] = x[i]
        stacked[mask] = block
    outputs = np.asarray(f(stacked.reshape(-1, N_FEATURES))).reshape(_FULL_MASK + 1, m)
    values = outputs @ bg.weights
    values[_FULL_MASK] = float(np.asarray(f(x[None, :]))[0])  # pin v(full) = f(x)
    return values


_SUBSET_WEIGHT = tuple(
    math.factorial(s) * math.factorial(N_FEATURES - s - 1) / math.factorial(N_FEATURES)
    for s in range(N_FEATURES)
)


def exact_shapley(f, x, bg: BackgroundSet) -> ShapAttribution:
    """Shapley values by direct enumeration of all 2^5 coalitions."""
    v = _coalition_values(f, x, bg)
    phi = np.zeros(N_FEATURES)
    for i in range(N_FEATURES):
        bit = 1 << i
        for mask in range(_FULL_MASK + 1):
            if mask & bit:
                continue
            size = bin(mask).count("1")
            phi[i] += _SUBSET_WEIGHT[size] * (v[mask | bit] - v[mask])
    return ShapAttribution(phi=phi, base_value=float(v[0]), fx=float(v[_FULL_MASK]))


def _kernel_weight(size: int) -> float:
    return (N_FEATURES - 1) / (
        math.comb(N_FEATURES, size) * size * (N_FEATURES - size)
    )


def kernel_shap(f, x, bg: BackgroundSet) -> ShapAttribution:
    """Shapley values via the kernel-weighted least-squares formulation.

    With all 30 proper non-trivial coalitions enumerated this is exact, so it
    must agree with :func:`exact_shapley` to numerical precision.  The two
    trivial coalitions enter as constraints: the empty set fixes the
    intercept at the base value and the full set fixes sum(phi) = fx - base.
    """
    v = _coalition_values(f, x, bg)
    base = float(v[0])
    fx = float(v[_FULL_MASK])
    masks = [m for m in range(1, _FULL_MASK)]
    Z = np.array([[m >> i & 1 for i in range(N_FEATURES)] for m in masks], dtype=np.float64)
    y = v[masks] - base
    wts = np.array([_kernel_weight(int(z.sum())) for z in Z])

    # eliminate the last coefficient through the sum constraint
    excess = fx - base
    Zr = Z[:, :-1] - Z[:, -1:]
    yr = y - Z[:, -1] * excess
    A = Zr.T @ (wts[:, None] * Zr)
    b = Zr.T @ (wts * yr)
    try:
        head = np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        head = np.linalg.lstsq(A, b, rcond=None)[0]
    phi = np.concatenate([head, [excess - head.sum()]])
    return ShapAttribution(phi=phi, base_value=base, fx=fx)


@dataclass(frozen=True)
class ImportanceSummary:
    """Mean |phi| per strategy, ranked descending (ties keep column order)."""

    mean_abs_phi: np.ndarray
    ranking: tuple[str, ...]


def summarize(attributions) -> ImportanceSummary:
    attributions = list(attributions)
    if not attributions:
        raise ValueError("no attributions to summarize")
    stacked = np.stack([np.abs(a.phi) for a in attributions])
    mean_abs = stacked.mean(axis=0)
    order = np.argsort(-mean_abs, kind="stable")
    return ImportanceSummary(
        mean_abs_phi=mean_abs,
        ranking=tuple(STRATEGY_COLUMNS[i] for i in order),
    )


def force_plot_data(attr: ShapAttribution, x, labels=STRATEGY_COLUMNS) -> dict:
    """Plot-ready record for one instance: contributions sorted by |phi|."""
    x = [int(v) for v in x]
    if len(x) != N_FEATURES or len(labels) != N_FEATURES:
        raise ValueError("instance and labels must have 5 entries")
    order = np.argsort(-np.abs(attr.phi), kind="stable")
    return {
        "base_value": float(attr.base_value),
        "fx": float(attr.fx),
        "decision": attr.decision,
        "features": [
            {"name": labels[i], "level": x[i], "phi": float(attr.phi[i])}
            for i in order
        ],
    }
