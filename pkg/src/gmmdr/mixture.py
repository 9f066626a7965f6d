"""EM fitting of Gaussian mixtures under parsimonious covariance families.

The maximum-likelihood updates for the structured families follow the
classical closed forms (with short fixed-point iterations for VEI, EEV's
companion VEV); model choice is by BIC on the ``2*loglik - nu*log(n)`` scale,
so larger is better.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from sklearn.base import BaseEstimator, ClusterMixin

from . import _emcore
from .errors import (
    AllFitsFailedError,
    DegenerateComponentError,
    GmmdrError,
    InvalidModelError,
)
from .models import check_model, count_params, model_names

_LOG_2PI = math.log(2.0 * math.pi)

INIT_METHODS = ("kmeans", "random", "hierarchical")

# Fixed-point settings for the families without a one-shot M-step.
_INNER_MAX_ITER = 20
_INNER_TOL = 1e-8


@dataclass(frozen=True)
class FitConfig:
    """Knobs controlling a single EM fit.

    ``restarts`` counts total initializations: the first uses ``init``, the
    remaining ones draw random responsibilities.  ``variance_floor`` scales
    the average per-column data variance to get the smallest admissible
    covariance eigenvalue.
    """

    max_iter: int = 500
    rel_tol: float = 1e-8
    init: str = "kmeans"
    restarts: int = 1
    seed: int = 0
    variance_floor: float = 1e-8

    def __post_init__(self) -> None:
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be > 0")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.init not in INIT_METHODS:
            raise ValueError(f"init must be one of {INIT_METHODS}, got {self.init!r}")


@dataclass(frozen=True)
class MixtureFit:
    """A fitted Gaussian mixture.

    ``covariances`` is stored as a dense (G, p, p) stack regardless of the
    family; the structural constraints hold inside this representation.
    ``bic`` is ``2*loglik - nparams*log(n)``.
    """

    model: str
    n_components: int
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    loglik: float
    nparams: int
    bic: float
    responsibilities: np.ndarray
    converged: bool
    iterations: int
    loglik_path: np.ndarray = field(repr=False, default=None)

    @property
    def n_features(self) -> int:
        return self.means.shape[1]

    @property
    def n_observations(self) -> int:
        return self.responsibilities.shape[0]

    @classmethod
    def from_parameters(cls, model, weights, means, covariances) -> "MixtureFit":
        """Wrap known population parameters (no data, no likelihood)."""
        weights = np.asarray(weights, dtype=np.float64)
        means = np.asarray(means, dtype=np.float64)
        covariances = np.asarray(covariances, dtype=np.float64)
        G, p = means.shape
        return cls(
            model=model,
            n_components=G,
            weights=weights,
            means=means,
            covariances=covariances,
            loglik=float("nan"),
            nparams=count_params(model, p, G),
            bic=float("nan"),
            responsibilities=np.zeros((0, G)),
            converged=True,
            iterations=0,
        )


@dataclass(frozen=True)
class FitFailure:
    model: str
    n_components: int
    reason: str


@dataclass(frozen=True)
class SearchResult:
    """Outcome of a (model, G) grid search, ranked by BIC (largest first)."""

    fits: list[MixtureFit]
    failures: list[FitFailure]

    @property
    def best(self) -> MixtureFit:
        return self.fits[0]

    def bic_table(self) -> dict[tuple[str, int], float]:
        return {(f.model, f.n_components): f.bic for f in self.fits}


def bic(loglik: float, nparams: int, n: int) -> float:
    """BIC on the ``2*loglik - nu*log(n)`` scale (larger is better)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return 2.0 * float(loglik) - float(nparams) * math.log(n)


def _as_data_matrix(data) -> np.ndarray:
    X = np.asarray(data, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise ValueError(f"data must be a nonempty 2-d array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("data contains non-finite entries")
    return X


# ---------------------------------------------------------------------------
# log-density and E-step


def _log_component_density(X, means, covariances):
    """Log N(x | mu_g, Sigma_g) for every observation/component, shape (n, G)."""
    n, p = X.shape
    if p == 1:
        var = covariances[:, 0, 0]  # (G,)
        d2 = (X - means[:, 0][None, :]) ** 2  # (n, G)
        return -0.5 * (_LOG_2PI + np.log(var)[None, :] + d2 / var[None, :])
    chol = np.linalg.cholesky(covariances)  # (G, p, p)
    chol_inv = np.linalg.inv(chol)
    diff = X[None, :, :] - means[:, None, :]  # (G, n, p)
    y = diff @ chol_inv.transpose(0, 2, 1)  # rows y_n = L^-1 (x_n - mu)
    mahal = np.einsum("gni,gni->gn", y, y)
    half_logdet = np.log(np.diagonal(chol, axis1=1, axis2=2)).sum(axis=1)  # (G,)
    return (-0.5 * (p * _LOG_2PI + mahal) - half_logdet[:, None]).T


def _e_step(X, weights, means, covariances):
    """Returns (loglik, responsibilities)."""
    logp = _log_component_density(X, means, covariances)
    logp += np.log(weights)[None, :]
    top = logp.max(axis=1)
    resp = np.exp(logp - top[:, None])
    total = resp.sum(axis=1)
    resp /= total[:, None]
    loglik = float((np.log(total) + top).sum())
    return loglik, resp


# ---------------------------------------------------------------------------
# M-step


def _scatter_matrices(X, resp, means):
    """Weighted within-component scatter W_g, shape (G, p, p)."""
    diff = X[None, :, :] - means[:, None, :]  # (G, n, p)
    weighted = diff * resp.T[:, :, None]
    return weighted.transpose(0, 2, 1) @ diff


def _normalized_shape(diag_values):
    """Scale a positive vector to unit product (a diagonal shape matrix)."""
    logs = np.log(diag_values)
    return np.exp(logs - logs.mean())


def _eigh_descending(mats):
    """Batched symmetric eigendecomposition, eigenvalues sorted descending."""
    vals, vecs = np.linalg.eigh(mats)
    return vals[..., ::-1], vecs[..., ::-1]


def _covariances_from_diag(diag_per_g):
    G, p = diag_per_g.shape
    covs = np.zeros((G, p, p))
    covs[:, np.arange(p), np.arange(p)] = diag_per_g
    return covs


def _mstep_covariances(model, X, resp, nk, means, floor, shape_hint=None):
    """Family-constrained covariance update.

    Returns (covariances, shape_hint, min_eig) where the hint warm-starts the
    fixed-point families on the next iteration and ``min_eig`` is the
    smallest structural eigenvalue before flooring.  The variance ``floor``
    is enforced in a family-preserving way (volumes are scaled up, never
    individual eigenvalues clipped out of structure).
    """
    n, p = X.shape
    G = nk.shape[0]
    W = _scatter_matrices(X, resp, means)

    if model in ("E", "EII"):
        lam = np.trace(W.sum(axis=0)) / (n * p)
        covs = np.broadcast_to(max(lam, floor) * np.eye(p), (G, p, p)).copy()
        return covs, None, lam

    if model in ("V", "VII"):
        lam_g = np.trace(W, axis1=1, axis2=2) / (nk * p)
        covs = np.maximum(lam_g, floor)[:, None, None] * np.eye(p)[None, :, :]
        return covs, None, float(lam_g.min())

    if model == "EEI":
        diag = np.diagonal(W.sum(axis=0)) / n
        floored = np.broadcast_to(np.maximum(diag, floor), (G, p)).copy()
        return _covariances_from_diag(floored), None, float(diag.min())

    if model == "VEI":
        W_diag = np.diagonal(W, axis1=1, axis2=2)  # (G, p)
        shape = shape_hint if shape_hint is not None else _normalized_shape(
            np.maximum(W_diag.sum(axis=0), 1e-300)
        )
        lam_g = np.full(G, np.nan)
        for _ in range(_INNER_MAX_ITER):
            lam_new = np.maximum((W_diag / shape[None, :]).sum(axis=1) / (p * nk), 1e-300)
            pooled = (W_diag / lam_new[:, None]).sum(axis=0)
            shape_new = _normalized_shape(np.maximum(pooled, 1e-300))
            done = np.all(np.abs(lam_new - lam_g) <= _INNER_TOL * (1 + np.abs(lam_new)))
            lam_g, shape = lam_new, shape_new
            if done:
                break
        min_eig = float(lam_g.min() * shape.min())
        lam_g = np.maximum(lam_g, floor / shape.min())
        return _covariances_from_diag(lam_g[:, None] * shape[None, :]), shape, min_eig

    if model == "EEE":
        S = W.sum(axis=0) / n
        S = 0.5 * (S + S.T)
        vals, vecs = np.linalg.eigh(S)
        min_eig = float(vals.min())
        if min_eig < floor:
            S = (vecs * np.maximum(vals, floor)) @ vecs.T
            S = 0.5 * (S + S.T)
        return np.broadcast_to(S, (G, p, p)).copy(), None, min_eig

    if model == "EEV":
        omega, rot = _eigh_descending(0.5 * (W + np.swapaxes(W, 1, 2)))
        omega = np.maximum(omega, 0.0)
        comb = omega.sum(axis=0) / n  # diagonal lambda * A
        min_eig = float(comb.min())
        comb = np.maximum(comb, floor)
        covs = np.einsum("gik,k,gjk->gij", rot, comb, rot)
        return 0.5 * (covs + np.swapaxes(covs, 1, 2)), None, min_eig

    if model == "VEV":
        omega, rot = _eigh_descending(0.5 * (W + np.swapaxes(W, 1, 2)))
        omega = np.maximum(omega, 1e-300)
        shape = shape_hint if shape_hint is not None else _normalized_shape(
            omega.sum(axis=0)
        )
        lam_g = np.full(G, np.nan)
        for _ in range(_INNER_MAX_ITER):
            lam_new = np.maximum((omega / shape[None, :]).sum(axis=1) / (p * nk), 1e-300)
            pooled = (omega / lam_new[:, None]).sum(axis=0)
            shape_new = _normalized_shape(np.maximum(pooled, 1e-300))
            done = np.all(np.abs(lam_new - lam_g) <= _INNER_TOL * (1 + np.abs(lam_new)))
            lam_g, shape = lam_new, shape_new
            if done:
                break
        min_eig = float(lam_g.min() * shape.min())
        lam_g = np.maximum(lam_g, floor / shape.min())
        diag = lam_g[:, None] * shape[None, :]
        covs = np.einsum("gik,gk,gjk->gij", rot, diag, rot)
        return 0.5 * (covs + np.swapaxes(covs, 1, 2)), shape, min_eig

    if model == "VVV":
        covs = W / nk[:, None, None]
        covs = 0.5 * (covs + np.swapaxes(covs, 1, 2))
        vals, vecs = np.linalg.eigh(covs)
        min_eig = float(vals.min())
        if min_eig < floor:
            covs = np.einsum(
                "gik,gk,gjk->gij", vecs, np.maximum(vals, floor), vecs
            )
            covs = 0.5 * (covs + np.swapaxes(covs, 1, 2))
        return covs, None, min_eig

    raise InvalidModelError(f"unknown model code {model!r}")  # pragma: no cover


def _m_step(model, X, resp, floor, shape_hint=None):
    """Full M-step; raises DegenerateComponentError on weight collapse."""
    n, p = X.shape
    nk = resp.sum(axis=0)
    if nk.min() < 0.5:  # weight below 1/(2n)
        g = int(nk.argmin())
        raise DegenerateComponentError(
            f"component {g + 1} collapsed: weight {nk.min() / n:.3e} < 1/(2n)"
        )
    weights = nk / n
    means = (resp.T @ X) / nk[:, None]
    if p == 1:
        d2 = (X - means[:, 0][None, :]) ** 2  # (n, G)
        if model in ("E", "EII", "EEI", "EEE"):
            var = np.full(nk.shape[0], (resp * d2).sum() / n)
        else:
            var = (resp * d2).sum(axis=0) / nk
        min_eig = float(var.min())
        covs = np.maximum(var, floor).reshape(-1, 1, 1)
        return weights, means, covs, None, min_eig
    covs, hint, min_eig = _mstep_covariances(model, X, resp, nk, means, floor, shape_hint)
    if not (np.all(np.isfinite(covs)) and np.all(np.isfinite(means))):
        raise DegenerateComponentError(
            "covariance update produced non-finite values and could not be restored"
        )
    return weights, means, covs, hint, min_eig


# ---------------------------------------------------------------------------
# initialization


def _kmeans_labels(X, G, rng, n_iter=10):
    n = X.shape[0]
    centers = X[rng.choice(n, size=G, replace=False)].copy()
    return _emcore.lloyd(X, centers, n_iter)


def _hierarchical_labels(X, G, rng, max_points=1500):
    n = X.shape[0]
    if n > max_points:
        idx = rng.choice(n, size=max_points, replace=False)
        sub = X[idx]
        sub_labels = fcluster(linkage(sub, method="ward"), G, criterion="maxclust") - 1
        centers = np.vstack([sub[sub_labels == g].mean(axis=0) for g in range(G)])
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        return d2.argmin(axis=1)
    return fcluster(linkage(X, method="ward"), G, criterion="maxclust") - 1


def _initial_responsibilities(X, G, method, rng):
    n = X.shape[0]
    if method == "random":
        resp = rng.uniform(size=(n, G)) + 1e-3
        return resp / resp.sum(axis=1, keepdims=True)
    if method == "kmeans":
        labels = _kmeans_labels(X, G, rng)
    elif method == "hierarchical":
        labels = _hierarchical_labels(X, G, rng)
    else:  # pragma: no cover - guarded by FitConfig
        raise ValueError(f"unknown init method {method!r}")
    resp = np.zeros((n, G))
    resp[np.arange(n), labels] = 1.0
    return resp


# ---------------------------------------------------------------------------
# EM driver


def _variance_floor(X, config):
    scale = config.variance_floor * float(np.var(X, axis=0).mean())
    return max(scale, np.finfo(np.float64).tiny)


def _run_em(X, n_components, model, config, resp0, floor):
    """Dispatch one EM run to the compiled kernel (or the numpy reference)."""
    if _emcore.kernel_available():
        try:
            (weights, means, covs, resp, path, n_path, converged, iterations, status) = (
                _emcore.run_em(X, resp0, model, config.max_iter, config.rel_tol, floor)
            )
        except np.linalg.LinAlgError as err:
            raise DegenerateComponentError(f"covariance factorization failed: {err}")
        if status == _emcore.STATUS_WEIGHT_COLLAPSE:
            raise DegenerateComponentError("component weight collapsed below 1/(2n)")
        if status == _emcore.STATUS_FLOOR:
            raise DegenerateComponentError(
                "covariance eigenvalue stayed below the variance floor "
                "and could not be restored"
            )
        if status == _emcore.STATUS_NONFINITE:
            raise DegenerateComponentError("log-likelihood became non-finite")
        if status == _emcore.STATUS_SINGULAR_G1:
            raise DegenerateComponentError("single-component covariance is singular")
        path = path[:n_path].copy()
        return weights, means, covs, resp, float(path[-1]), path, converged, iterations
    return _run_em_numpy(X, n_components, model, config, resp0, floor)


def _run_em_numpy(X, n_components, model, config, resp0, floor):
    weights, means, covs, hint, min_eig = _m_step(model, X, resp0, floor)
    strikes = 1 if min_eig < floor else 0
    if strikes and n_components == 1:
        raise DegenerateComponentError(
            f"single-component covariance is singular (min eigenvalue {min_eig:.3e})"
        )
    path = []
    prev = -np.inf
    converged = False
    iterations = 0
    resp = resp0
    for it in range(config.max_iter + 1):
        loglik, resp = _e_step(X, weights, means, covs)
        if not np.isfinite(loglik):
            raise DegenerateComponentError("log-likelihood became non-finite")
        path.append(loglik)
        iterations = it
        if it > 0 and abs(loglik - prev) <= config.rel_tol * (1.0 + abs(loglik)):
            converged = True
            break
        if it == config.max_iter or n_components == 1:
            converged = n_components == 1
            break
        prev = loglik
        weights, means, covs, hint, min_eig = _m_step(model, X, resp, floor, hint)
        if min_eig < floor:
            strikes += 1
            if strikes >= 2:
                raise DegenerateComponentError(
                    f"covariance eigenvalue stayed below the variance floor "
                    f"({min_eig:.3e} < {floor:.3e}) and could not be restored"
                )
        else:
            strikes = 0
    return weights, means, covs, resp, float(path[-1]), np.asarray(path), converged, iterations


def _restart_seed(seed: int, restart: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=[seed & 0xFFFFFFFFFFFFFFFF, restart]))


def em_fit(data, n_components: int, model: str, config: FitConfig | None = None) -> MixtureFit:
    """Fit a ``model``-family Gaussian mixture with ``n_components`` components.

    Runs ``config.restarts`` initializations (the first by ``config.init``,
    the rest from random responsibilities) and keeps the best log-likelihood.
    Non-convergence within ``max_iter`` is reported through the ``converged``
    flag, not an error; a collapsed component is an error only if every
    restart collapses.
    """
    config = config or FitConfig()
    X = _as_data_matrix(data)
    n, p = X.shape
    G = int(n_components)
    check_model(model, p)
    if G < 1:
        raise ValueError("n_components must be >= 1")
    if n <= G:
        raise ValueError(f"need more observations than components (n={n}, G={G})")

    floor = _variance_floor(X, config)
    best = None
    last_error: DegenerateComponentError | None = None
    n_restarts = 1 if G == 1 else config.restarts
    for restart in range(n_restarts):
        rng = _restart_seed(config.seed, restart)
        method = config.init if restart == 0 else "random"
        if G == 1:
            resp0 = np.ones((n, 1))
        else:
            resp0 = _initial_responsibilities(X, G, method, rng)
        try:
            result = _run_em(X, G, model, config, resp0, floor)
        except DegenerateComponentError as err:
            last_error = err
            continue
        if best is None or result[4] > best[4]:
            best = result
    if best is None:
        assert last_error is not None
        raise last_error

    weights, means, covs, resp, loglik, path, converged, iterations = best
    nparams = count_params(model, p, G)
    return MixtureFit(
        model=model,
        n_components=G,
        weights=weights,
        means=means,
        covariances=covs,
        loglik=loglik,
        nparams=nparams,
        bic=bic(loglik, nparams, n),
        responsibilities=resp,
        converged=converged,
        iterations=iterations,
        loglik_path=path,
    )


def _normalize_g_range(g_range) -> list[int]:
    if isinstance(g_range, int):
        values = [g_range]
    elif isinstance(g_range, tuple) and len(g_range) == 2 and all(
        isinstance(v, (int, np.integer)) for v in g_range
    ):
        values = list(range(int(g_range[0]), int(g_range[1]) + 1))
    else:
        values = [int(g) for g in g_range]
    if not values or min(values) < 1:
        raise ValueError(f"invalid component range {g_range!r}")
    return sorted(set(values))


def _task_seed(seed: int, g: int, model_index: int) -> int:
    ss = np.random.SeedSequence(entropy=[seed & 0xFFFFFFFFFFFFFFFF, g, model_index])
    state = ss.generate_state(2, dtype=np.uint32)
    return int(state[0]) << 32 | int(state[1])


def model_search(
    data,
    g_range,
    models: Iterable[str] | str | None = None,
    config: FitConfig | None = None,
) -> SearchResult:
    """Fit every (G, model) pair and rank results by BIC (largest first).

    Ties prefer fewer components, then fewer parameters.  Failed fits are
    recorded with their reason instead of being dropped; if nothing fits an
    AllFitsFailedError is raised.  Each task derives its own RNG stream from
    (seed, G, model) so results do not depend on evaluation order.
    """
    config = config or FitConfig()
    X = _as_data_matrix(data)
    p = X.shape[1]
    if models is None or models == "all":
        model_list = list(model_names(p))
    elif isinstance(models, str):
        model_list = [models]
    else:
        model_list = list(models)
    if not model_list:
        raise ValueError("empty model set")
    g_values = _normalize_g_range(g_range)

    fits: list[MixtureFit] = []
    failures: list[FitFailure] = []
    for mi, model in enumerate(model_list):
        for g in g_values:
            task_config = replace(config, seed=_task_seed(config.seed, g, mi))
            try:
                fit = em_fit(X, g, model, task_config)
            except (GmmdrError, ValueError) as err:
                failures.append(FitFailure(str(model), g, str(err)))
                continue
            if not np.isfinite(fit.bic):
                failures.append(FitFailure(str(model), g, "non-finite BIC"))
                continue
            fits.append(fit)
    fits.sort(key=lambda f: (-f.bic, f.n_components, f.nparams))
    if not fits:
        raise AllFitsFailedError(
            "all (model, G) fits failed: "
            + "; ".join(f"{f.model}/G={f.n_components}: {f.reason}" for f in failures[:5])
        )
    return SearchResult(fits=fits, failures=failures)


def map_classify(fit: MixtureFit, data) -> tuple[np.ndarray, np.ndarray]:
    """MAP labels (1-based) and uncertainties ``1 - max_g posterior``.

    Ties break toward the lowest component index.
    """
    X = _as_data_matrix(data)
    if X.shape[1] != fit.n_features:
        raise ValueError(
            f"data has {X.shape[1]} columns, fit expects {fit.n_features}"
        )
    _, resp = _e_step(X, fit.weights, fit.means, fit.covariances)
    labels = resp.argmax(axis=1) + 1
    uncertainty = 1.0 - resp.max(axis=1)
    if fit.n_components == 1:
        uncertainty = np.zeros_like(uncertainty)
    return labels.astype(np.int64), uncertainty


def entropy(responsibilities) -> float:
    """Cluster-overlap entropy ``-sum_ig t_ig log t_ig`` (0 log 0 := 0)."""
    resp = np.asarray(responsibilities, dtype=np.float64)
    if resp.ndim != 2:
        raise ValueError("responsibilities must be a 2-d array")
    row_sums = resp.sum(axis=1)
    if np.abs(row_sums - 1.0).max() > 1e-8:
        raise ValueError("responsibility rows must sum to 1 within 1e-8")
    terms = np.where(resp > 0, resp * np.log(np.where(resp > 0, resp, 1.0)), 0.0)
    return float(max(-terms.sum(), 0.0))


class GaussianMixture(BaseEstimator, ClusterMixin):
    """Model-based clustering by BIC over parsimonious covariance families.

    Parameters
    ----------
    n_components : int or (min, max) tuple, default (1, 9)
        Number of mixture components, or an inclusive search range.
    models : "all", str or sequence of codes, default "all"
        Covariance families to consider (see :mod:`gmmdr.models`).
    restarts : int
        EM initializations per (model, G); first uses ``init``, the rest
        random responsibilities.
    random_state : int
        Seed for all initializations; fits are deterministic given it.

    Attributes (after ``fit``)
    --------------------------
    fit_ : MixtureFit for the best BIC model.
    search_ : full SearchResult including failures.
    labels_ : 1-based MAP component labels of the training data.
    """

    def __init__(
        self,
        n_components=(1, 9),
        models="all",
        max_iter: int = 500,
        tol: float = 1e-8,
        init: str = "kmeans",
        restarts: int = 1,
        variance_floor: float = 1e-8,
        random_state: int = 0,
    ):
        self.n_components = n_components
        self.models = models
        self.max_iter = max_iter
        self.tol = tol
        self.init = init
        self.restarts = restarts
        self.variance_floor = variance_floor
        self.random_state = random_state

    def _fit_config(self) -> FitConfig:
        return FitConfig(
            max_iter=self.max_iter,
            rel_tol=self.tol,
            init=self.init,
            restarts=self.restarts,
            seed=self.random_state,
            variance_floor=self.variance_floor,
        )

    def fit(self, X, y=None):
        X = _as_data_matrix(X)
        self.search_ = model_search(X, self.n_components, self.models, self._fit_config())
        self.fit_ = self.search_.best
        self.model_ = self.fit_.model
        self.n_components_ = self.fit_.n_components
        self.weights_ = self.fit_.weights
        self.means_ = self.fit_.means
        self.covariances_ = self.fit_.covariances
        self.loglik_ = self.fit_.loglik
        self.bic_ = self.fit_.bic
        self.converged_ = self.fit_.converged
        self.n_iter_ = self.fit_.iterations
        self.responsibilities_ = self.fit_.responsibilities
        self.labels_, self.uncertainty_ = map_classify(self.fit_, X)
        return self

    def predict(self, X):
        labels, _ = map_classify(self.fit_, X)
        return labels

    def predict_proba(self, X):
        X = _as_data_matrix(X)
        _, resp = _e_step(X, self.fit_.weights, self.fit_.means, self.fit_.covariances)
        return resp

    def score(self, X, y=None):
        X = _as_data_matrix(X)
        loglik, _ = _e_step(X, self.fit_.weights, self.fit_.means, self.fit_.covariances)
        return loglik / X.shape[0]
