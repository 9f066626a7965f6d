"""Estimation of the cluster-information subspace from a fitted mixture.

The directions come from a generalized eigendecomposition of a kernel matrix
built from two pieces: the between-cluster covariance of the component means
(location differences) and the weighted squared deviations of the component
covariances from their pooled average (scale/orientation differences).  Both
are taken relative to the marginal covariance of the data, so the estimated
directions are affine invariant and the projected variables are mutually
uncorrelated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, cholesky, solve_triangular
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import SingularCovarianceError
from .mixture import FitConfig, MixtureFit, model_search
from .models import is_equal_covariance

#: Relative eigenvalue cutoff below which directions carry no usable signal.
DEFAULT_EIG_THRESHOLD = 1e-8

#: Condition number beyond which the marginal covariance is treated as singular.
_MAX_CONDITION = 1e12


@dataclass(frozen=True)
class KernelSet:
    """The kernel matrices entering the eigenproblem.

    ``combined = means_kernel @ inv(total_cov) @ means_kernel + covar_kernel``
    up to symmetrization.  For equal-covariance models ``covar_kernel`` is
    exactly zero, so ``combined`` spans the same subspace as ``means_kernel``.
    """

    means_kernel: np.ndarray  # between-cluster covariance of component means
    covar_kernel: np.ndarray  # spread of component covariances around the pool
    combined: np.ndarray
    total_cov: np.ndarray  # marginal covariance (MLE scale)
    pooled_cov: np.ndarray  # weighted average of component covariances


@dataclass(frozen=True)
class DrBasis:
    """Estimated directions, eigenvalues and their mean/variance split.

    ``raw_vectors`` are orthonormal in the total-covariance inner product;
    ``directions`` are the same vectors rescaled to unit Euclidean norm.
    ``eigenvalues[i] = mean_contrib[i] + var_contrib[i]``.
    """

    raw_vectors: np.ndarray  # (p, d)
    directions: np.ndarray  # (p, d), unit columns
    eigenvalues: np.ndarray  # (d,), decreasing positives
    mean_contrib: np.ndarray
    var_contrib: np.ndarray

    @property
    def d(self) -> int:
        return self.raw_vectors.shape[1]

    @property
    def n_features(self) -> int:
        return self.raw_vectors.shape[0]


def between_cluster_cov(weights, means, grand_mean=None) -> np.ndarray:
    """Weighted covariance of the component means around the grand mean."""
    weights = np.asarray(weights, dtype=np.float64)
    means = np.asarray(means, dtype=np.float64)
    if grand_mean is None:
        grand_mean = weights @ means
    centered = means - grand_mean[None, :]
    out = (centered * weights[:, None]).T @ centered
    return 0.5 * (out + out.T)


def covariance_variation(weights, covariances, total_cov) -> np.ndarray:
    """Weighted spread of component covariances around their pooled average.

    ``sum_g pi_g (Sigma_g - pooled) inv(total_cov) (Sigma_g - pooled)``,
    evaluated with a Cholesky solve of ``total_cov``.
    """
    weights = np.asarray(weights, dtype=np.float64)
    covariances = np.asarray(covariances, dtype=np.float64)
    pooled = np.einsum("g,gij->ij", weights, covariances)
    dev = covariances - pooled[None, :, :]
    if not np.any(dev):
        return np.zeros_like(pooled)
    solve = _spd_solver(total_cov)
    out = np.zeros_like(pooled)
    for g in range(len(weights)):
        out += weights[g] * dev[g] @ solve(dev[g])
    return 0.5 * (out + out.T)


def combined_kernel(means_kernel, covar_kernel, total_cov) -> np.ndarray:
    """Kernel mixing location and scale information."""
    means_kernel = np.asarray(means_kernel, dtype=np.float64)
    solve = _spd_solver(total_cov)
    out = means_kernel @ solve(means_kernel) + covar_kernel
    return 0.5 * (out + out.T)


def _spd_solver(total_cov):
    """Returns x -> inv(total_cov) @ x, failing loudly on bad matrices."""
    sigma = np.asarray(total_cov, dtype=np.float64)
    _check_condition(sigma)
    try:
        factor = cho_factor(sigma, lower=True)
    except np.linalg.LinAlgError as err:
        raise SingularCovarianceError(f"covariance is not positive definite: {err}")
    return lambda rhs: cho_solve(factor, rhs)


def _check_condition(sigma: np.ndarray) -> None:
    svals = np.linalg.svd(sigma, compute_uv=False)
    if svals[-1] <= 0 or svals[0] / svals[-1] > _MAX_CONDITION:
        raise SingularCovarianceError(
            "marginal covariance is singular or nearly so "
            f"(condition number > {_MAX_CONDITION:.0e}); remove constant or "
            "collinear variables before estimating directions"
        )


def total_covariance(X) -> np.ndarray:
    """MLE (divide by n) covariance of the data about its column means."""
    X = np.asarray(X, dtype=np.float64)
    centered = X - X.mean(axis=0)
    return centered.T @ centered / X.shape[0]


def build_kernels(fit: MixtureFit, X=None, total_cov=None) -> KernelSet:
    """Assemble all kernel matrices for a fitted mixture.

    The marginal covariance defaults to the MLE covariance of ``X``; it can
    be passed directly (e.g. the mixture-implied covariance for population
    calculations).
    """
    if total_cov is None:
        if X is None:
            raise ValueError("either X or total_cov is required")
        total_cov = total_covariance(X)
    total_cov = np.asarray(total_cov, dtype=np.float64)
    m1 = between_cluster_cov(fit.weights, fit.means)
    m2 = covariance_variation(fit.weights, fit.covariances, total_cov)
    pooled = np.einsum("g,gij->ij", fit.weights, fit.covariances)
    combined = combined_kernel(m1, m2, total_cov)
    return KernelSet(
        means_kernel=m1,
        covar_kernel=m2,
        combined=combined,
        total_cov=total_cov,
        pooled_cov=pooled,
    )


def _fix_column_signs(V: np.ndarray) -> np.ndarray:
    """Flip columns so the largest-magnitude coefficient is positive."""
    if V.size == 0:
        return V
    idx = np.abs(V).argmax(axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs[None, :]


def generalized_eigendecomp(
    kernel,
    total_cov,
    eig_threshold: float = DEFAULT_EIG_THRESHOLD,
    max_dim: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Solve ``kernel v = l total_cov v`` for a symmetric PSD kernel.

    Reduces to a standard symmetric problem through the Cholesky factor of
    ``total_cov``.  Returns ``(eigenvalues, vectors)`` with eigenvalues
    sorted decreasing, vectors orthonormal under the ``total_cov`` inner
    product and deterministic column signs.  Only eigenvalues above
    ``eig_threshold`` relative to the largest are retained, up to
    ``max_dim`` columns.
    """
    kernel = np.asarray(kernel, dtype=np.float64)
    sigma = np.asarray(total_cov, dtype=np.float64)
    _check_condition(sigma)
    try:
        L = cholesky(sigma, lower=True)
    except np.linalg.LinAlgError as err:
        raise SingularCovarianceError(f"Cholesky of covariance failed: {err}")
    # standard symmetric problem on L^-1 K L^-T
    half = solve_triangular(L, kernel, lower=True)
    reduced = solve_triangular(L, half.T, lower=True)
    reduced = 0.5 * (reduced + reduced.T)
    values, Q = np.linalg.eigh(reduced)
    order = np.argsort(values)[::-1]
    values = values[order]
    Q = Q[:, order]
    vectors = solve_triangular(L, Q, lower=True, trans="T")

    if values.size and values[0] > 0:
        keep = int(np.sum(values > eig_threshold * values[0]))
    else:
        keep = 0
    if max_dim is not None:
        keep = min(keep, max_dim)
    return values[:keep], _fix_column_signs(vectors[:, :keep])


def eigenvalue_contributions(V, kernels: KernelSet) -> tuple[np.ndarray, np.ndarray]:
    """Split each eigenvalue into its mean- and variance-driven parts.

    The parts are the diagonals of ``V' K1 inv(Sigma) K1 V`` and
    ``V' K2 V``; their sum reproduces the eigenvalues of the combined
    kernel exactly.
    """
    V = np.asarray(V, dtype=np.float64)
    m1v = kernels.means_kernel @ V
    solve = _spd_solver(kernels.total_cov)
    mean_part = np.einsum("pd,pd->d", m1v, solve(m1v))
    var_part = np.einsum("pd,pd->d", V, kernels.covar_kernel @ V)
    return mean_part, var_part


def estimate_directions(
    fit: MixtureFit,
    X=None,
    total_cov=None,
    eig_threshold: float = DEFAULT_EIG_THRESHOLD,
) -> DrBasis:
    """Directions of the cluster-information subspace for a fitted mixture.

    For equal-covariance models the dimension is capped at
    ``min(p, G - 1)``; otherwise up to ``p`` directions can be retained.
    """
    kernels = build_kernels(fit, X=X, total_cov=total_cov)
    p = kernels.total_cov.shape[0]
    max_dim = min(p, fit.n_components - 1) if is_equal_covariance(fit.model) else p
    values, vectors = generalized_eigendecomp(
        kernels.combined, kernels.total_cov, eig_threshold, max_dim
    )
    mean_part, var_part = eigenvalue_contributions(vectors, kernels)
    norms = np.linalg.norm(vectors, axis=0)
    directions = vectors / np.where(norms > 0, norms, 1.0)[None, :]
    return DrBasis(
        raw_vectors=vectors,
        directions=directions,
        eigenvalues=values,
        mean_contrib=mean_part,
        var_contrib=var_part,
    )


def project_data(X, basis: DrBasis, k: int | None = None) -> np.ndarray:
    """Project rows of ``X`` on the first ``k`` unit-norm directions."""
    X = np.asarray(X, dtype=np.float64)
    k = basis.d if k is None else int(k)
    if k > basis.d:
        raise ValueError(f"requested {k} directions, basis has {basis.d}")
    if X.shape[1] != basis.n_features:
        raise ValueError(
            f"data has {X.shape[1]} columns, basis expects {basis.n_features}"
        )
    return X @ basis.directions[:, :k]


def project_params(
    fit: MixtureFit, basis: DrBasis, k: int | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Component means and covariances expressed in the projected coordinates."""
    k = basis.d if k is None else int(k)
    if k > basis.d:
        raise ValueError(f"requested {k} directions, basis has {basis.d}")
    beta = basis.directions[:, :k]
    means = fit.means @ beta
    covs = np.einsum("pk,gpq,ql->gkl", beta, fit.covariances, beta)
    covs = 0.5 * (covs + np.swapaxes(covs, 1, 2))
    return means, covs


@dataclass(frozen=True)
class GridDensity:
    """Mixture density and MAP component over a 2-d grid of points."""

    x: np.ndarray  # (nx,)
    y: np.ndarray  # (ny,)
    density: np.ndarray  # (ny, nx)
    labels: np.ndarray  # (ny, nx), 1-based MAP component


def density_grid(weights, means, covariances, x, y) -> GridDensity:
    """Evaluate a 2-d mixture on the grid ``{(x_i, y_j)}`` exactly.

    ``means`` is (G, 2) and ``covariances`` (G, 2, 2), typically from
    :func:`project_params` with ``k=2``.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size == 0 or y.size == 0:
        raise ValueError("empty grid")
    weights = np.asarray(weights, dtype=np.float64)
    means = np.asarray(means, dtype=np.float64)
    covariances = np.asarray(covariances, dtype=np.float64)
    if means.shape[1] != 2:
        raise ValueError("density_grid requires a 2-d projection")
    xx, yy = np.meshgrid(x, y)
    points = np.column_stack([xx.ravel(), yy.ravel()])
    from .mixture import _log_component_density  # shared density kernel

    logp = _log_component_density(points, means, covariances) + np.log(weights)
    top = logp.max(axis=1)
    density = np.exp(top) * np.exp(logp - top[:, None]).sum(axis=1)
    labels = logp.argmax(axis=1) + 1
    return GridDensity(
        x=x,
        y=y,
        density=density.reshape(yy.shape),
        labels=labels.reshape(yy.shape).astype(np.int64),
    )


class GMMDR(BaseEstimator, TransformerMixin):
    """Cluster-information dimension reduction as an sklearn transformer.

    Fits a Gaussian mixture by BIC search, then estimates the directions
    that capture the variation in component means and covariances.
    ``transform`` maps data onto the unit-norm directions, giving mutually
    uncorrelated variables ordered by the attached eigenvalues.

    Parameters mirror :class:`gmmdr.mixture.GaussianMixture`; a prefit
    ``MixtureFit`` can be supplied through ``mixture`` to skip the search.
    """

    def __init__(
        self,
        n_components=(1, 9),
        models="all",
        eig_threshold: float = DEFAULT_EIG_THRESHOLD,
        mixture: MixtureFit | None = None,
        max_iter: int = 500,
        tol: float = 1e-8,
        init: str = "kmeans",
        restarts: int = 1,
        random_state: int = 0,
    ):
        self.n_components = n_components
        self.models = models
        self.eig_threshold = eig_threshold
        self.mixture = mixture
        self.max_iter = max_iter
        self.tol = tol
        self.init = init
        self.restarts = restarts
        self.random_state = random_state

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=np.float64)
        if self.mixture is not None:
            self.mixture_ = self.mixture
        else:
            config = FitConfig(
                max_iter=self.max_iter,
                rel_tol=self.tol,
                init=self.init,
                restarts=self.restarts,
                seed=self.random_state,
            )
            self.mixture_ = model_search(X, self.n_components, self.models, config).best
        self.basis_ = estimate_directions(self.mixture_, X, eig_threshold=self.eig_threshold)
        self.directions_ = self.basis_.directions
        self.raw_vectors_ = self.basis_.raw_vectors
        self.eigenvalues_ = self.basis_.eigenvalues
        self.mean_contrib_ = self.basis_.mean_contrib
        self.var_contrib_ = self.basis_.var_contrib
        self.n_directions_ = self.basis_.d
        return self

    def transform(self, X, k: int | None = None):
        return project_data(X, self.basis_, k)
