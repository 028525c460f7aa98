"""Subcluster decomposition of selected features.

Selected columns of each modality are clustered by complete-linkage
agglomeration under that modality's own distance (scaled Euclidean or
correlation distance between feature columns), and every cross-modality
cluster pair is scored by its unregularized canonical correlation.

Inter-cluster distance is the maximum pairwise distance; merge ties break
deterministically toward the pair with the lexicographically smallest
(min member index, min member index) key.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from hdpaired.distances import METRICS, DistanceMatrix, d_x, d_y


@dataclass(frozen=True)
class FeatureClustering:
    """Cluster labels (1..k) for the selected feature columns."""

    feature_indices: np.ndarray
    labels: np.ndarray
    k: int
    metric_tag: str
    linkage: str = "complete"

    def __post_init__(self):
        if len(self.feature_indices) != len(self.labels):
            raise ValueError("one label per selected feature required")
        present = set(int(l) for l in self.labels)
        if not present <= set(range(1, self.k + 1)):
            raise ValueError(f"labels must lie in 1..{self.k}, got {sorted(present)}")

    def members(self, label: int) -> np.ndarray:
        """Positions (within the selected-column matrix) carrying `label`."""
        return np.flatnonzero(self.labels == label)


@dataclass(frozen=True)
class SubclusterPairRanking:
    """All nonempty cluster pairs sorted by descending canonical correlation."""

    pairs: tuple[tuple[int, int, float], ...]
    top_k_reported: int = 3
    skipped: tuple[tuple[int, int, str], ...] = ()

    def __post_init__(self):
        corrs = [c for _, _, c in self.pairs]
        if any(corrs[i] < corrs[i + 1] for i in range(len(corrs) - 1)):
            raise ValueError("pairs must be sorted by descending correlation")

    @property
    def top(self) -> tuple[tuple[int, int, float], ...]:
        return self.pairs[: self.top_k_reported]


def feature_distance_matrix(
    data: np.ndarray, feature_indices: np.ndarray, metric_tag: str
) -> DistanceMatrix:
    """Distances between feature COLUMNS across the (training) rows.

    The scaled Euclidean distance divides by the column length (the number
    of rows here); the correlation distance is unchanged.
    """
    data = np.asarray(data, dtype=float)
    feature_indices = np.asarray(feature_indices, dtype=int)
    if feature_indices.size < 2:
        raise ValueError("need at least 2 selected features to cluster")
    cols = data[:, feature_indices].T  # one row per feature
    if metric_tag == "scaled_euclidean":
        fn = d_x
    elif metric_tag == "euclidean":
        fn = lambda a, b: d_x(a, b) * a.size
    elif metric_tag == "pearson_correlation_distance":
        fn = d_y
    else:
        raise ValueError(f"unknown metric_tag {metric_tag!r}; expected one of {METRICS}")
    f = cols.shape[0]
    out = np.zeros((f, f))
    for i in range(f - 1):
        for j in range(i + 1, f):
            out[i, j] = out[j, i] = fn(cols[i], cols[j])
    labels = tuple(str(int(i)) for i in feature_indices)
    return DistanceMatrix(out, metric_tag, labels)


def complete_linkage_merges(d: np.ndarray) -> list[tuple[int, int, float]]:
    """Full complete-linkage merge sequence down to a single cluster.

    Each merge is recorded as (a, b, height) where a < b are the minimum
    member indices of the two merged clusters.  Heights are exact maxima of
    original pairwise distances (Lance-Williams max update), so they can be
    compared exactly against a recomputation from scratch.
    """
    d = np.asarray(d, dtype=float)
    f = d.shape[0]
    if d.ndim != 2 or d.shape[1] != f:
        raise ValueError(f"square distance matrix required, got {d.shape}")
    work = d.copy()
    np.fill_diagonal(work, np.inf)
    alive = np.ones(f, dtype=bool)
    min_member = np.arange(f)
    merges: list[tuple[int, int, float]] = []
    for _ in range(f - 1):
        sub = np.where(alive[:, None] & alive[None, :], work, np.inf)
        height = sub.min()
        rows, cols = np.nonzero(sub == height)
        best_key = None
        best_pair = None
        for r, s in zip(rows, cols):
            if r >= s:
                continue
            key = (min(min_member[r], min_member[s]), max(min_member[r], min_member[s]))
            if best_key is None or key < best_key:
                best_key = key
                best_pair = (int(r), int(s))
        r, s = best_pair
        merges.append((best_key[0], best_key[1], float(height)))
        np.maximum(work[r], work[s], out=work[r])
        work[:, r] = work[r]
        work[r, r] = np.inf
        alive[s] = False
        min_member[r] = best_key[0]
    return merges


def complete_linkage(d: DistanceMatrix, k: int) -> FeatureClustering:
    """Agglomerate down to k clusters; labels 1..k ordered by min member index."""
    f = d.n_subjects
    if not 1 <= k <= f:
        raise ValueError(f"k={k} out of range for {f} features")
    merges = complete_linkage_merges(d.data)[: f - k]
    parent = np.arange(f)

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b, _ in merges:
        ra, rb = find(a), find(b)
        # Root at the smaller min-member index so roots stay canonical.
        lo, hi = min(ra, rb), max(ra, rb)
        parent[hi] = lo
    roots = sorted({find(i) for i in range(f)})
    label_of_root = {r: i + 1 for i, r in enumerate(roots)}
    labels = np.array([label_of_root[find(i)] for i in range(f)])
    return FeatureClustering(
        feature_indices=np.array([int(s) for s in d.subject_ids]),
        labels=labels,
        k=k,
        metric_tag=d.metric_tag,
    )


def _orthonormal_basis(block: np.ndarray, rel_tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis of the centered column space, truncating singular
    values below rel_tol * max (rank-deficient blocks are common when
    cluster sizes exceed the number of rows)."""
    centered = block - block.mean(axis=0)
    u, s, _ = np.linalg.svd(centered, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.empty((block.shape[0], 0))
    keep = s > rel_tol * s[0]
    return u[:, keep]


def subcluster_cca(
    x_sel: np.ndarray,
    y_sel: np.ndarray,
    cx: FeatureClustering,
    cy: FeatureClustering,
    top_k: int = 3,
) -> SubclusterPairRanking:
    """Rank all (x-cluster, y-cluster) pairs by unregularized canonical
    correlation (score-norm constraints only).

    The correlation is the top singular value of Qx^T Qy, with Qx, Qy
    truncated orthonormal bases of the centered within-cluster columns.
    Pairs where either block has no usable directions are skipped with a
    note.
    """
    x_sel = np.asarray(x_sel, dtype=float)
    y_sel = np.asarray(y_sel, dtype=float)
    if x_sel.shape[0] != y_sel.shape[0]:
        raise ValueError(f"row mismatch: {x_sel.shape[0]} vs {y_sel.shape[0]}")
    if x_sel.shape[1] != len(cx.labels) or y_sel.shape[1] != len(cy.labels):
        raise ValueError("clustering labels do not match selected-column matrices")
    bases_x = {a: _orthonormal_basis(x_sel[:, cx.members(a)]) for a in range(1, cx.k + 1)}
    bases_y = {b: _orthonormal_basis(y_sel[:, cy.members(b)]) for b in range(1, cy.k + 1)}
    scored: list[tuple[int, int, float]] = []
    skipped: list[tuple[int, int, str]] = []
    for a in range(1, cx.k + 1):
        for b in range(1, cy.k + 1):
            qa, qb = bases_x[a], bases_y[b]
            if qa.shape[1] == 0 or qb.shape[1] == 0:
                skipped.append((a, b, "no usable directions (empty or constant block)"))
                continue
            s = np.linalg.svd(qa.T @ qb, compute_uv=False)
            corr = float(min(s[0], 1.0)) if s.size else 0.0
            scored.append((a, b, corr))
    scored.sort(key=lambda t: (-t[2], t[0], t[1]))
    return SubclusterPairRanking(pairs=tuple(scored), top_k_reported=top_k, skipped=tuple(skipped))
