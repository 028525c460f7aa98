"""Train/test split, k-fold cross-validated sparsity-grid search, held-out
evaluation.

Leakage rules: per-fold standardization statistics are fitted on the
fit-set rows only and applied, frozen, to the validation fold; the held-out
test set never influences any fit.  After standardization each matrix is
divided by its top singular value before entering the solver.  Under that
scaling ||X u|| <= ||u||, so the score-norm cap is implied by the unit l2
ball, the l2 bound (default 1) is the operative normalization, and the
useful l1 range is exactly [1, sqrt(dim)].  Score correlations are
invariant to the common scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from hdpaired._util import STREAM_KFOLD, STREAM_SPLIT, parallel_map, replicate_rng
from hdpaired.matrixio import ColumnStandardizer
from hdpaired.scca import AlignmentPair, SccaParams, SccaSolver, canonical_correlation, project


def train_test_split(n: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Random 5:1 partition of n subjects: |train| = ceil(5n/6).

    Returns sorted index arrays (train, test); deterministic per seed.
    """
    if n < 12:
        raise ValueError(f"need n >= 12 subjects to split 5:1, got {n}")
    n_train = (5 * n + 5) // 6
    perm = replicate_rng(seed, STREAM_SPLIT).permutation(n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def kfold_partition(indices: np.ndarray, k: int, seed: int = 0) -> list[np.ndarray]:
    """Shuffle indices and split into k folds whose sizes differ by at most 1."""
    indices = np.asarray(indices)
    if k < 1 or k > indices.size:
        raise ValueError(f"k={k} out of range for {indices.size} indices")
    perm = replicate_rng(seed, STREAM_KFOLD).permutation(indices)
    return [np.sort(fold) for fold in np.array_split(perm, k)]


def default_grid(
    p: int, q: int, cells: int = 8, max_iters: int = 200, tol: float = 1e-6
) -> list[SccaParams]:
    """Log-spaced (c1, c2) grid over [1, sqrt(dim)] x [1, sqrt(dim)].

    [1, sqrt(dim)] is the feasible l1 range for a unit-l2-norm vector, which
    is the operative scale once columns have unit norm.
    """
    c1s = np.logspace(0.0, 0.5 * math.log10(p), cells)
    c2s = np.logspace(0.0, 0.5 * math.log10(q), cells)
    return [
        SccaParams(c1=float(c1), c2=float(c2), max_iters=max_iters, tol=tol)
        for c1 in c1s
        for c2 in c2s
    ]


@dataclass(frozen=True)
class FittedSccaModel:
    """An alignment fit together with the training-time column transforms.

    u/v live in the kept-column space of the respective standardizers;
    u_full/v_full map them back to original column indices (zeros at
    dropped columns).  scale_x/scale_y are the reciprocal top singular
    values of the standardized training matrices.
    """

    fit: AlignmentPair
    x_standardizer: ColumnStandardizer
    y_standardizer: ColumnStandardizer
    scale_x: float
    scale_y: float

    def transform_x(self, x: np.ndarray) -> np.ndarray:
        return self.x_standardizer.apply(x) * self.scale_x

    def transform_y(self, y: np.ndarray) -> np.ndarray:
        return self.y_standardizer.apply(y) * self.scale_y

    def scores(self, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return project(self.transform_x(x), self.fit.u), project(self.transform_y(y), self.fit.v)

    @property
    def u_full(self) -> np.ndarray:
        out = np.zeros(self.x_standardizer.n_columns)
        out[self.x_standardizer.kept] = self.fit.u
        return out

    @property
    def v_full(self) -> np.ndarray:
        out = np.zeros(self.y_standardizer.n_columns)
        out[self.y_standardizer.kept] = self.fit.v
        return out

    @property
    def support_u(self) -> np.ndarray:
        """Nonzero u entries as original column indices."""
        return self.x_standardizer.kept[self.fit.support_u]

    @property
    def support_v(self) -> np.ndarray:
        return self.y_standardizer.kept[self.fit.support_v]


@dataclass(frozen=True)
class CvReport:
    """Cross-validation surface and the selected fit's summary."""

    grid: tuple[tuple[float, float], ...]
    fold_correlations: np.ndarray
    mean_validation: np.ndarray
    selected: tuple[float, float]
    selected_index: int
    train_correlation: float
    test_correlation: float | None
    seed: int
    model: FittedSccaModel


def spectral_scale(standardized: np.ndarray) -> float:
    """Reciprocal of the top singular value (1.0 for an all-zero matrix)."""
    top = float(np.linalg.svd(standardized, compute_uv=False)[0])
    return 1.0 / top if top > 0 else 1.0


def _fit_transforms(x_fit: np.ndarray, y_fit: np.ndarray):
    sx = ColumnStandardizer.fit(x_fit)
    sy = ColumnStandardizer.fit(y_fit)
    scale_x = spectral_scale(sx.apply(x_fit))
    scale_y = spectral_scale(sy.apply(y_fit))
    return sx, sy, scale_x, scale_y


def _safe_correlation(sx: np.ndarray, sy: np.ndarray) -> float:
    try:
        return canonical_correlation(sx, sy)
    except ValueError:
        return math.nan


def cv_grid_search(
    x: np.ndarray,
    y: np.ndarray,
    grid: list[SccaParams],
    k: int = 5,
    seed: int = 0,
    x_test: np.ndarray | None = None,
    y_test: np.ndarray | None = None,
    init: str = "svd",
    threads: int = 1,
) -> CvReport:
    """Grid search over sparsity parameters by k-fold cross-validation.

    For every grid cell and every held-out fold: standardize on the k-1
    fit folds only, fit, project the validation fold with the frozen
    transform, and record the validation canonical correlation.  The cell
    with the largest fold-mean wins (ties break toward smaller c1 + c2,
    then grid order); the model is refit on the full training set at the
    selected parameters.  Degenerate fold fits record NaN and are excluded
    from the cell mean.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"row mismatch: {x.shape[0]} vs {y.shape[0]}")
    if not grid:
        raise ValueError("empty parameter grid")
    n = x.shape[0]
    folds = kfold_partition(np.arange(n), k, seed)
    fold_correlations = np.full((len(grid), k), math.nan)

    for fold_idx, val in enumerate(folds):
        fit_rows = np.setdiff1d(np.arange(n), val)
        sx, sy, scale_x, scale_y = _fit_transforms(x[fit_rows], y[fit_rows])
        solver = SccaSolver(sx.apply(x[fit_rows]) * scale_x, sy.apply(y[fit_rows]) * scale_y)
        xv = sx.apply(x[val]) * scale_x
        yv = sy.apply(y[val]) * scale_y

        def one_cell(params: SccaParams) -> float:
            fit = solver.fit(params, init=init, seed=seed)
            return _safe_correlation(project(xv, fit.u), project(yv, fit.v))

        fold_correlations[:, fold_idx] = parallel_map(one_cell, grid, threads)

    all_nan = np.all(np.isnan(fold_correlations), axis=1)
    mean_validation = np.full(len(grid), math.nan)
    if not np.all(all_nan):
        mean_validation[~all_nan] = np.nanmean(fold_correlations[~all_nan], axis=1)
    if np.all(np.isnan(mean_validation)):
        raise ValueError(
            "every grid cell degenerate; per-cell fold correlations: "
            + ", ".join(
                f"(c1={p.c1:g}, c2={p.c2:g}): {row.tolist()}"
                for p, row in zip(grid, fold_correlations)
            )
        )

    best = -math.inf
    selected_index = 0
    for i, params in enumerate(grid):
        m = mean_validation[i]
        if math.isnan(m):
            continue
        if m > best or (m == best and params.c1 + params.c2 < grid[selected_index].c1 + grid[selected_index].c2):
            best = m
            selected_index = i
    selected_params = grid[selected_index]

    # Refit on the full training set with transforms fitted on all rows.
    sx, sy, scale_x, scale_y = _fit_transforms(x, y)
    xs = sx.apply(x) * scale_x
    ys = sy.apply(y) * scale_y
    fit = SccaSolver(xs, ys).fit(selected_params, init=init, seed=seed)
    model = FittedSccaModel(
        fit=fit, x_standardizer=sx, y_standardizer=sy, scale_x=scale_x, scale_y=scale_y
    )
    train_correlation = _safe_correlation(project(xs, fit.u), project(ys, fit.v))

    test_correlation = None
    if x_test is not None and y_test is not None:
        test_correlation = evaluate_test(model, x_test, y_test)

    return CvReport(
        grid=tuple((p.c1, p.c2) for p in grid),
        fold_correlations=fold_correlations,
        mean_validation=mean_validation,
        selected=(selected_params.c1, selected_params.c2),
        selected_index=selected_index,
        train_correlation=train_correlation,
        test_correlation=test_correlation,
        seed=seed,
        model=model,
    )


def evaluate_test(model: FittedSccaModel, x_test: np.ndarray, y_test: np.ndarray) -> float:
    """Canonical correlation of held-out rows under the frozen training
    transforms; the test rows never touched standardization or the fit."""
    sx, sy = model.scores(np.asarray(x_test, dtype=float), np.asarray(y_test, dtype=float))
    return canonical_correlation(sx, sy)
