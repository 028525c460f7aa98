"""Statistical inference on distance-based correlations.

The core statistic is the Pearson correlation between the upper triangles
of two inter-subject distance matrices.  Inference paths:

* one-sided permutation test (permute subjects of one matrix only),
* unbiased distance-correlation t-test on U-centered Euclidean distances,
* subsampling (without replacement) confidence intervals,
* a bootstrap replicate distribution, kept as a demonstrator of why
  sampling WITH replacement biases this statistic upward (duplicate
  subjects zero out distance entries).

Replicate streams are keyed by (seed, stream, replicate index), so results
are identical across runs and worker counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.stats

from hdpaired._util import (
    STREAM_BOOTSTRAP,
    STREAM_PERMUTATION,
    STREAM_SUBSAMPLE,
    parallel_map,
    replicate_rng,
)
from hdpaired.distances import DistanceMatrix, distance_matrix, upper_triangle
from hdpaired.matrixio import FeatureMatrix


def _check_same_subjects(dx: DistanceMatrix, dy: DistanceMatrix) -> int:
    if dx.subject_ids != dy.subject_ids:
        raise ValueError("distance matrices must share the same subjects in the same order")
    return dx.n_subjects


def distance_pair_correlation(dx: DistanceMatrix, dy: DistanceMatrix) -> float:
    """Pearson correlation over the n(n-1)/2 upper-triangle pairs (i < j).

    Sums use exactly-rounded accumulation (math.fsum), which makes the value
    invariant under a joint relabeling of subjects applied to both matrices:
    the pair multiset is unchanged, so the correctly rounded sums are equal.
    """
    n = _check_same_subjects(dx, dy)
    if n < 3:
        raise ValueError(f"need at least 3 subjects, got {n}")
    tx = upper_triangle(dx)
    ty = upper_triangle(dy)
    k = tx.size
    mx = math.fsum(tx) / k
    my = math.fsum(ty) / k
    cx = tx - mx
    cy = ty - my
    ssx = math.fsum(cx * cx)
    ssy = math.fsum(cy * cy)
    if ssx == 0.0 or ssy == 0.0:
        raise ValueError("constant distance triangle; correlation undefined")
    return math.fsum(cx * cy) / math.sqrt(ssx * ssy)


@dataclass(frozen=True)
class PermutationResult:
    """Observed statistic, null replicates and the one-sided p-value.

    p_value is the plain proportion of replicates >= observed;
    p_value_smoothed is the add-one variant (1 + count) / (1 + B), which
    never returns exactly zero.
    """

    observed: float
    n_permutations: int
    null_samples: np.ndarray
    p_value: float
    p_value_smoothed: float
    seed: int

    def __post_init__(self):
        if not -1.0 - 1e-12 <= self.observed <= 1.0 + 1e-12:
            raise ValueError(f"observed statistic {self.observed} outside [-1, 1]")
        if len(self.null_samples) != self.n_permutations:
            raise ValueError("null sample count does not match n_permutations")
        count = int(np.sum(np.asarray(self.null_samples) >= self.observed))
        if self.p_value != count / self.n_permutations:
            raise ValueError("p_value inconsistent with null samples")


def permutation_test(
    dx: DistanceMatrix,
    dy: DistanceMatrix,
    b: int = 10_000,
    seed: int = 0,
    threads: int = 1,
    mantel_joint: bool = False,
) -> PermutationResult:
    """One-sided permutation test of positive distance-pair correlation.

    Each replicate draws a uniform subject permutation and applies it to the
    rows/columns of dx only (the feature dimension is never permuted).
    Because a subject permutation leaves the multiset of upper-triangle
    distances invariant, the centered sum of squares of dx is the same for
    every replicate and is computed once.

    mantel_joint=True additionally permutes dy with an independent
    permutation each replicate (the classical joint-permutation variant).
    By relabeling invariance this samples the same null distribution; it is
    provided for comparison only and is not the supported inference path.
    """
    n = _check_same_subjects(dx, dy)
    if b < 1:
        raise ValueError(f"need at least 1 permutation, got {b}")
    if n < 3:
        raise ValueError(f"need at least 3 subjects, got {n}")
    iu, ju = np.triu_indices(n, 1)
    tx = dx.data[iu, ju]
    ty = dy.data[iu, ju]
    mx = tx.mean()
    my = ty.mean()
    cy = ty - my
    ssx = float(((tx - mx) ** 2).sum())
    ssy = float((cy**2).sum())
    if ssx == 0.0 or ssy == 0.0:
        raise ValueError("constant distance triangle; correlation undefined")
    denom = math.sqrt(ssx * ssy)
    dxd = dx.data
    dyd = dy.data

    def stat(px: np.ndarray, pcy: np.ndarray) -> float:
        return float((px - px.mean()) @ pcy) / denom

    observed = stat(tx, cy)

    def one(i: int) -> float:
        rng = replicate_rng(seed, STREAM_PERMUTATION, i)
        sigma = rng.permutation(n)
        px = dxd[sigma[iu], sigma[ju]]
        if mantel_joint:
            tau = rng.permutation(n)
            py = dyd[tau[iu], tau[ju]]
            return stat(px, py - py.mean())
        return stat(px, cy)

    null = np.array(parallel_map(one, range(b), threads))
    count = int(np.sum(null >= observed))
    return PermutationResult(
        observed=observed,
        n_permutations=b,
        null_samples=null,
        p_value=count / b,
        p_value_smoothed=(1 + count) / (1 + b),
        seed=seed,
    )


def rank_correlations(dx: DistanceMatrix, dy: DistanceMatrix) -> tuple[float, float]:
    """Spearman's rho (average-rank ties) and Kendall's tau-b over the triangles."""
    _check_same_subjects(dx, dy)
    tx = upper_triangle(dx)
    ty = upper_triangle(dy)
    if tx.size < 2 or np.all(tx == tx[0]) or np.all(ty == ty[0]):
        raise ValueError("constant distance triangle; rank correlation undefined")
    rho = scipy.stats.spearmanr(tx, ty).statistic
    tau = scipy.stats.kendalltau(tx, ty).statistic
    return float(rho), float(tau)


def ucenter(d: DistanceMatrix | np.ndarray) -> np.ndarray:
    """U-centering: the modified double-centering behind the unbiased estimator.

    For i != j:
        u_ij = d_ij - row_i/(n-2) - col_j/(n-2) + grand/((n-1)(n-2))
    and u_ii = 0.  Off-diagonal row sums of the result are zero.
    """
    a = d.data if isinstance(d, DistanceMatrix) else np.asarray(d, dtype=float)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise ValueError(f"square matrix required, got {a.shape}")
    if n < 4:
        raise ValueError(f"U-centering requires n >= 4, got {n}")
    rows = a.sum(axis=1)
    cols = a.sum(axis=0)
    grand = a.sum()
    u = a - rows[:, None] / (n - 2) - cols[None, :] / (n - 2) + grand / ((n - 1) * (n - 2))
    np.fill_diagonal(u, 0.0)
    return u


@dataclass(frozen=True)
class DcorResult:
    """Bias-corrected distance correlation and its t-test."""

    bias_corrected_r: float
    t_statistic: float
    degrees_of_freedom: int
    p_value: float

    def __post_init__(self):
        if self.degrees_of_freedom < 1:
            raise ValueError("t-test needs degrees of freedom >= 1 (n >= 4)")
        if not -1.0 - 1e-9 <= self.bias_corrected_r <= 1.0 + 1e-9:
            raise ValueError(f"bias-corrected r {self.bias_corrected_r} outside [-1, 1]")


def dcor_ttest(x: FeatureMatrix, y: FeatureMatrix) -> DcorResult:
    """Unbiased distance-correlation t-test on Euclidean distances.

    Builds Euclidean distance matrices for both modalities, U-centers them,
    and forms r = <Ux, Uy> / sqrt(<Ux,Ux><Uy,Uy>) with
    <A,B> = sum_{i!=j} A_ij B_ij / (n(n-3)).  Under independence
    t = sqrt(v-1) r / sqrt(1-r^2), v = n(n-3)/2, follows a Student-t with
    v-1 degrees of freedom; the p-value is the upper tail.
    """
    if x.subject_ids != y.subject_ids:
        raise ValueError("matrices must be row-aligned over the same subjects")
    n = x.n_subjects
    if n < 4:
        raise ValueError(f"dCor t-test requires n >= 4, got {n}")
    ux = ucenter(distance_matrix(x, "euclidean"))
    uy = ucenter(distance_matrix(y, "euclidean"))
    scale = n * (n - 3)
    vxy = float((ux * uy).sum()) / scale
    vx = float((ux * ux).sum()) / scale
    vy = float((uy * uy).sum()) / scale
    if vx <= 0.0 or vy <= 0.0:
        raise ValueError("degenerate U-centered matrix (constant features)")
    r = vxy / math.sqrt(vx * vy)
    v = n * (n - 3) // 2
    rc = min(max(r, -1.0), 1.0)
    if abs(rc) == 1.0:
        t = math.inf if rc > 0 else -math.inf
    else:
        t = math.sqrt(v - 1) * rc / math.sqrt(1.0 - rc * rc)
    p = float(scipy.stats.t.sf(t, df=v - 1))
    return DcorResult(bias_corrected_r=r, t_statistic=t, degrees_of_freedom=v - 1, p_value=p)


@dataclass(frozen=True)
class ConfidenceInterval:
    """Subsampling confidence interval for the distance-pair correlation.

    `replicates` holds the per-subsample statistics when the interval was
    built with keep_replicates=True (NaN for degenerate draws).
    """

    point_estimate: float
    lower: float
    upper: float
    level: float
    subsample_ratio: float
    n_subsamples: int
    method: str
    n_degenerate: int = 0
    replicates: np.ndarray | None = None

    def __post_init__(self):
        if not 0.0 < self.level < 1.0:
            raise ValueError(f"level must be in (0, 1), got {self.level}")
        if self.method not in ("root", "percentile"):
            raise ValueError(f"method must be 'root' or 'percentile', got {self.method!r}")
        if self.lower > self.upper:
            raise ValueError("lower bound above upper bound")


def _triangle_corr_fast(tx: np.ndarray, ty: np.ndarray) -> float:
    cx = tx - tx.mean()
    cy = ty - ty.mean()
    ssx = float(cx @ cx)
    ssy = float(cy @ cy)
    if ssx == 0.0 or ssy == 0.0:
        return math.nan
    return float(cx @ cy) / math.sqrt(ssx * ssy)


def _paired_distances(
    x: FeatureMatrix, y: FeatureMatrix, metric_x: str, metric_y: str
) -> tuple[DistanceMatrix, DistanceMatrix]:
    if x.subject_ids != y.subject_ids:
        raise ValueError("matrices must be row-aligned over the same subjects")
    return distance_matrix(x, metric_x), distance_matrix(y, metric_y)


def subsample_ci(
    x: FeatureMatrix,
    y: FeatureMatrix,
    ratio: float = 0.135,
    b: int = 10_000,
    level: float = 0.95,
    seed: int = 0,
    method: str = "root",
    metric_x: str = "scaled_euclidean",
    metric_y: str = "pearson_correlation_distance",
    threads: int = 1,
    keep_replicates: bool = False,
) -> ConfidenceInterval:
    """Confidence interval from b subsamples of size round(ratio * n).

    Subsamples are drawn without replacement; the statistic is recomputed on
    each subset (both metrics are pairwise, so the subset's distance matrix
    is exactly the corresponding submatrix of the full one).

    method="root" (default) inverts the subsampling root: with quantiles q
    of sqrt(m) * (theta_m - theta_n), the interval is
    [theta_n - q_hi / sqrt(n), theta_n - q_lo / sqrt(n)].
    method="percentile" returns raw (alpha/2, 1-alpha/2) replicate quantiles.
    """
    n = x.n_subjects
    m = round(ratio * n)
    if m < 4:
        raise ValueError(f"subsample size round({ratio} * {n}) = {m} < 4")
    if m > n:
        raise ValueError(f"subsample size {m} exceeds n = {n}")
    if b < 2:
        raise ValueError(f"need at least 2 subsamples, got {b}")
    dx, dy = _paired_distances(x, y, metric_x, metric_y)
    observed = distance_pair_correlation(dx, dy)
    im, jm = np.triu_indices(m, 1)
    dxd, dyd = dx.data, dy.data

    def one(i: int) -> float:
        rng = replicate_rng(seed, STREAM_SUBSAMPLE, i)
        idx = rng.choice(n, size=m, replace=False)
        return _triangle_corr_fast(dxd[idx[im], idx[jm]], dyd[idx[im], idx[jm]])

    stats = np.array(parallel_map(one, range(b), threads))
    valid = stats[~np.isnan(stats)]
    n_degenerate = int(b - valid.size)
    if valid.size < 2:
        raise ValueError("all subsample replicates degenerate")
    alpha = 1.0 - level
    if method == "root":
        roots = math.sqrt(m) * (valid - observed)
        q_lo, q_hi = np.quantile(roots, [alpha / 2, 1 - alpha / 2])
        lower = observed - q_hi / math.sqrt(n)
        upper = observed - q_lo / math.sqrt(n)
    elif method == "percentile":
        lower, upper = np.quantile(valid, [alpha / 2, 1 - alpha / 2])
    else:
        raise ValueError(f"method must be 'root' or 'percentile', got {method!r}")
    return ConfidenceInterval(
        point_estimate=observed,
        lower=float(lower),
        upper=float(upper),
        level=level,
        subsample_ratio=ratio,
        n_subsamples=b,
        method=method,
        n_degenerate=n_degenerate,
        replicates=stats if keep_replicates else None,
    )


@dataclass(frozen=True)
class BootstrapResult:
    """Bootstrap replicate statistics; degenerate replicates recorded as NaN."""

    replicates: np.ndarray
    observed: float
    seed: int

    @property
    def n_missing(self) -> int:
        return int(np.isnan(self.replicates).sum())

    @property
    def valid(self) -> np.ndarray:
        return self.replicates[~np.isnan(self.replicates)]


def bootstrap_distribution(
    x: FeatureMatrix,
    y: FeatureMatrix,
    b: int = 10_000,
    seed: int = 0,
    metric_x: str = "scaled_euclidean",
    metric_y: str = "pearson_correlation_distance",
    threads: int = 1,
) -> BootstrapResult:
    """Replicate statistics over b size-n resamples drawn WITH replacement.

    Any duplicated subject contributes zero off-diagonal distances, which
    biases the replicate distribution upward relative to the observed
    statistic; this function exists to demonstrate that failure mode, not
    as an inference path.  Replicates whose distance triangle is constant
    are recorded as NaN and counted via n_missing.
    """
    n = x.n_subjects
    if n < 4:
        raise ValueError(f"need n >= 4, got {n}")
    if b < 1:
        raise ValueError(f"need at least 1 resample, got {b}")
    dx, dy = _paired_distances(x, y, metric_x, metric_y)
    observed = distance_pair_correlation(dx, dy)
    iu, ju = np.triu_indices(n, 1)
    dxd, dyd = dx.data, dy.data

    def one(i: int) -> float:
        rng = replicate_rng(seed, STREAM_BOOTSTRAP, i)
        idx = rng.choice(n, size=n, replace=True)
        return _triangle_corr_fast(dxd[idx[iu], idx[ju]], dyd[idx[iu], idx[ju]])

    reps = np.array(parallel_map(one, range(b), threads))
    return BootstrapResult(replicates=reps, observed=observed, seed=seed)
