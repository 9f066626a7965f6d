"""Partition-comparison metrics and the PCA+GMM comparator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DataFormatError
from .mixture import FitConfig, MixtureFit, model_search


def canonicalize_labels(labels) -> tuple[np.ndarray, int]:
    """Relabel to dense 1..k integers in sorted-value order."""
    arr = np.asarray(labels).ravel()
    if arr.size == 0:
        raise ValueError("empty partition")
    uniques, inverse = np.unique(arr, return_inverse=True)
    return (inverse + 1).astype(np.int64), len(uniques)


def _contingency(a, b):
    la, ka = canonicalize_labels(a)
    lb, kb = canonicalize_labels(b)
    if la.size != lb.size:
        raise ValueError(f"partition lengths differ: {la.size} vs {lb.size}")
    table = np.zeros((ka, kb), dtype=np.int64)
    np.add.at(table, (la - 1, lb - 1), 1)
    return table


def adjusted_rand_index(a, b) -> float:
    """Chance-corrected pair-counting agreement of two partitions.

    1 for identical partitions (up to relabeling), about 0 for random ones;
    symmetric in its arguments.
    """
    table = _contingency(a, b)
    n = table.sum()
    if n < 2:
        raise ValueError("need at least two observations")

    def comb2(x):
        return x * (x - 1) / 2.0

    sum_cells = comb2(table.astype(np.float64)).sum()
    sum_rows = comb2(table.sum(axis=1).astype(np.float64)).sum()
    sum_cols = comb2(table.sum(axis=0).astype(np.float64)).sum()
    total = comb2(float(n))
    expected = sum_rows * sum_cols / total
    maximum = 0.5 * (sum_rows + sum_cols)
    if maximum == expected:
        return 1.0
    return float((sum_cells - expected) / (maximum - expected))


def confusion_matrix(truth, predicted) -> np.ndarray:
    """Counts with rows = truth classes, columns = predicted clusters."""
    return _contingency(truth, predicted)


def error_rate(truth, predicted) -> float:
    """Smallest misclassification fraction over cluster-to-class matchings.

    Exact optimum (equivalent to exhaustive search over label
    permutations); both partitions must have at most 10 classes.
    """
    table = _contingency(truth, predicted)
    kt, kp = table.shape
    if max(kt, kp) > 10:
        raise ValueError("error_rate supports at most 10 classes per partition")
    k = max(kt, kp)
    padded = np.zeros((k, k), dtype=np.int64)
    padded[:kt, :kp] = table
    rows, cols = linear_sum_assignment(padded, maximize=True)
    matched = padded[rows, cols].sum()
    n = table.sum()
    return float((n - matched) / n)


def correlation_pca(X) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """PCA of the correlation matrix (i.e. on standardized variables).

    Returns (eigenvalues, loadings, scores); loadings columns are the
    orthonormal eigenvectors ordered by decreasing eigenvalue and
    ``scores = X_standardized @ loadings``.
    """
    X = np.asarray(X, dtype=np.float64)
    sd = X.std(axis=0)
    if np.any(sd == 0):
        cols = np.flatnonzero(sd == 0)
        raise DataFormatError(f"zero-variance column(s) {cols.tolist()} cannot be standardized")
    Xs = (X - X.mean(axis=0)) / sd
    corr = Xs.T @ Xs / X.shape[0]
    values, vectors = np.linalg.eigh(corr)
    order = np.argsort(values)[::-1]
    values, vectors = values[order], vectors[:, order]
    return values, vectors, Xs @ vectors


@dataclass(frozen=True)
class PcaGmmResult:
    fit: MixtureFit
    n_retained: int
    eigenvalues: np.ndarray
    scores: np.ndarray


def pca_gmm(
    X,
    g_range=(1, 9),
    models="all",
    config: FitConfig | None = None,
) -> PcaGmmResult:
    """The classical comparator: GMM on leading principal components.

    Components of the correlation matrix with eigenvalue above one are kept
    (Kaiser's rule; at least one component is always retained), and a BIC
    model search runs on their scores.
    """
    values, _, scores = correlation_pca(X)
    n_retained = max(int(np.sum(values > 1.0)), 1)
    result = model_search(scores[:, :n_retained], g_range, models, config)
    return PcaGmmResult(
        fit=result.best,
        n_retained=n_retained,
        eigenvalues=values,
        scores=scores[:, :n_retained],
    )
