"""Greedy BIC-based subset selection of projected variables.

A candidate variable earns its place when the best clustering model on the
enlarged set beats "no extra clustering": the best model on the current set
plus a Gaussian regression of the candidate on it.  Because the projected
variables are uncorrelated, that regression BIC has a closed form in the
candidate's variance alone, and the search needs no backward steps.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin

from .errors import AllFitsFailedError
from .mixture import FitConfig, MixtureFit, entropy, map_classify, model_search
from .models import is_equal_covariance
from .subspace import (
    DEFAULT_EIG_THRESHOLD,
    DrBasis,
    estimate_directions,
    project_data,
)

#: EM tolerance used inside the greedy search; matches the looser tolerance
#: production mixture software uses for model scans (the decisions only need
#: BIC values resolved to well under one unit).
SEARCH_FIT_CONFIG = FitConfig(rel_tol=1e-5)

SELECTION_MODES = ("bic", "entropy")


@dataclass(frozen=True)
class SelectionConfig:
    """Settings of the subset search.

    ``fixed_model`` freezes (model code, G) instead of searching both; in
    that case candidates enter in eigenvalue order.  ``mode="entropy"``
    switches to prefix selection by the cluster-overlap entropy of the
    refit, useful when BIC retains too many directions in high dimension.
    """

    max_g: int = 9
    models: object = "all"
    fixed_model: tuple[str, int] | None = None
    fit: FitConfig = SEARCH_FIT_CONFIG
    mode: str = "bic"

    def __post_init__(self) -> None:
        if self.max_g < 1:
            raise ValueError("max_g must be >= 1")
        if self.mode not in SELECTION_MODES:
            raise ValueError(f"mode must be one of {SELECTION_MODES}")


@dataclass(frozen=True)
class SelectionStep:
    candidate: int
    bic_clustering: float
    bic_no_clustering: float
    bic_difference: float
    accepted: bool
    model: str
    n_components: int


@dataclass(frozen=True)
class SelectionTrace:
    """Record of one greedy search: per-step values and the final subset.

    ``selected`` lists 0-based column indices in acceptance order.
    ``stop_reason`` is "negative-diff" or "all-included".
    """

    steps: list[SelectionStep]
    selected: list[int]
    stop_reason: str
    final_fit: MixtureFit | None = field(repr=False, default=None)


def bic_reg(feature, q: int) -> float:
    """Closed-form regression BIC of a variable on ``q - 1`` uncorrelated ones.

    With uncorrelated, centered regressors the OLS slopes vanish, so only the
    candidate's MLE variance enters:
    ``-n log(2 pi) - n log(sigma^2) - n - (q + 1) log(n)``.
    """
    z = np.asarray(feature, dtype=np.float64).ravel()
    n = z.size
    if n < 2:
        raise ValueError("need at least two observations")
    if q < 1:
        raise ValueError("q must be >= 1")
    sigma2 = float(np.var(z))
    if sigma2 <= 0:
        raise ValueError("zero-variance feature has no regression BIC")
    return -n * math.log(2 * math.pi) - n * math.log(sigma2) - n - (q + 1) * math.log(n)


def _univariate_models(models) -> list[str]:
    """Map multivariate codes onto the univariate pair {E, V}."""
    if models is None or models == "all":
        return ["E", "V"]
    if isinstance(models, str):
        models = [models]
    mapped = []
    for m in models:
        code = "E" if is_equal_covariance(m) else "V"
        if code not in mapped:
            mapped.append(code)
    return mapped


def _clustering_search(Z, config: SelectionConfig):
    """Best clustering fit over the configured models and component counts."""
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    if Z.shape[0] == 1:
        Z = Z.T
    q = Z.shape[1]
    if config.fixed_model is not None:
        model, g = config.fixed_model
        if q == 1:
            model = _univariate_models([model])[0]
        return model_search(Z, [g], [model], config.fit)
    models = _univariate_models(config.models) if q == 1 else config.models
    return model_search(Z, (1, config.max_g), models, config.fit)


def bic_difference(
    Z,
    selected: list[int],
    candidate: int,
    config: SelectionConfig | None = None,
    bic_selected: float | None = None,
) -> tuple[float, MixtureFit]:
    """BIC evidence for the candidate adding clustering information.

    Computes ``BIC_best_clustering(selected + candidate)`` minus the
    no-extra-clustering reference ``BIC_best_clustering(selected) +
    bic_reg(candidate, q)``.  ``bic_selected`` can pass a precomputed value
    for the current set (it is recomputed when omitted).
    """
    config = config or SelectionConfig()
    Z = np.asarray(Z, dtype=np.float64)
    if candidate in selected:
        raise ValueError("candidate already selected")
    subset = sorted(selected) + [candidate]
    q = len(subset)
    result = _clustering_search(Z[:, subset], config)
    fit = result.best
    if selected:
        if bic_selected is None:
            bic_selected = _clustering_search(Z[:, sorted(selected)], config).best.bic
        reference = bic_selected + bic_reg(Z[:, candidate], q)
    else:
        reference = bic_reg(Z[:, candidate], q)
        if fit.n_components == 1:
            # the single-component BIC and the closed-form regression BIC
            # are the same quantity; return the exact tie
            return 0.0, fit
    return fit.bic - reference, fit


def greedy_select(Z, config: SelectionConfig | None = None) -> SelectionTrace:
    """Forward-only greedy subset search over the columns of ``Z``.

    Starts from the single best column and keeps adding the argmax
    BIC-difference candidate until the best difference turns non-positive
    or everything is included.  Columns are assumed uncorrelated (a warning
    is emitted otherwise); ties in the argmax go to the lower column index,
    which is the larger-eigenvalue direction when columns are in eigenvalue
    order.
    """
    config = config or SelectionConfig()
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    if Z.shape[0] == 1:
        Z = Z.T
    d = Z.shape[1]
    if d < 1:
        raise ValueError("need at least one candidate column")
    if d > 1:
        with np.errstate(invalid="ignore"):
            corr = np.corrcoef(Z.T)
        off = np.abs(corr - np.diag(np.diag(corr)))
        if np.nanmax(off) > 1e-6:
            warnings.warn(
                f"candidate columns are correlated (max |corr| = {np.nanmax(off):.2e}); "
                "the closed-form regression BIC assumes uncorrelated columns",
                stacklevel=2,
            )

    steps: list[SelectionStep] = []
    selected: list[int] = []
    remaining = list(range(d))
    bic_selected: float | None = None
    final_fit: MixtureFit | None = None

    while remaining:
        best = None
        for cand in remaining:
            diff, fit = bic_difference(Z, selected, cand, config, bic_selected)
            if best is None or diff > best[0]:
                best = (diff, cand, fit)
        diff, cand, fit = best
        if abs(diff) < 1e-6:
            # when the best clustering model degenerates to "no clustering",
            # both criteria coincide mathematically; clamp the float residue
            # so the tie rejects deterministically
            diff = 0.0
        q = len(selected) + 1
        reference = fit.bic - diff
        accepted = diff > 0
        steps.append(
            SelectionStep(
                candidate=cand,
                bic_clustering=fit.bic,
                bic_no_clustering=reference,
                bic_difference=diff,
                accepted=accepted,
                model=fit.model,
                n_components=fit.n_components,
            )
        )
        if not accepted:
            return SelectionTrace(steps, selected, "negative-diff", final_fit)
        selected.append(cand)
        remaining.remove(cand)
        bic_selected = fit.bic
        final_fit = fit
    return SelectionTrace(steps, selected, "all-included", final_fit)


@dataclass(frozen=True)
class EntropyRecord:
    n_directions: int
    model: str
    n_components: int
    entropy: float


def entropy_prefix_select(
    Z, config: SelectionConfig | None = None
) -> tuple[list[int], list[EntropyRecord], MixtureFit]:
    """Retain the direction prefix whose refit has least cluster overlap.

    Fits on ``Z[:, :k]`` for each prefix length and picks the smallest
    entropy among fits with at least two components (single-component fits
    have zero entropy trivially); ties prefer the shorter prefix.
    """
    config = config or SelectionConfig()
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    if Z.shape[0] == 1:
        Z = Z.T
    d = Z.shape[1]
    records = []
    fits = []
    for k in range(1, d + 1):
        fit = _clustering_search(Z[:, :k], config).best
        fits.append(fit)
        records.append(
            EntropyRecord(k, fit.model, fit.n_components, entropy(fit.responsibilities))
        )
    informative = [r for r in records if r.n_components > 1]
    pool = informative if informative else records
    best = min(pool, key=lambda r: (r.entropy, r.n_directions))
    k = best.n_directions
    return list(range(k)), records, fits[k - 1]


@dataclass(frozen=True)
class PipelineIteration:
    n_candidates: int
    n_selected: int
    model: str
    n_components: int
    bic: float


@dataclass(frozen=True)
class PipelineResult:
    """Final model of the iterated estimate/project/select loop.

    ``basis`` is expressed in original-variable coordinates (the per-pass
    projections composed), so ``data @ basis.directions`` reproduces the
    variables the final mixture was fitted on.
    """

    fit: MixtureFit
    basis: DrBasis
    variables: np.ndarray
    labels: np.ndarray
    uncertainty: np.ndarray
    history: list[PipelineIteration]
    traces: list[SelectionTrace]
    converged: bool


def _compose_basis(chain: np.ndarray | None, basis: DrBasis, keep: list[int]) -> DrBasis:
    """Express a basis of projected variables in original coordinates."""
    raw = basis.raw_vectors[:, keep]
    if chain is not None:
        raw = chain @ raw
    norms = np.linalg.norm(raw, axis=0)
    directions = raw / np.where(norms > 0, norms, 1.0)[None, :]
    return DrBasis(
        raw_vectors=raw,
        directions=directions,
        eigenvalues=basis.eigenvalues[keep],
        mean_contrib=basis.mean_contrib[keep],
        var_contrib=basis.var_contrib[keep],
    )


def gmmdr_pipeline(
    data,
    fit_config: FitConfig | None = None,
    selection: SelectionConfig | None = None,
    g_range=(1, 9),
    models="all",
    eig_threshold: float = DEFAULT_EIG_THRESHOLD,
    max_outer: int = 10,
) -> PipelineResult:
    """Iterate fit -> estimate directions -> select -> refit until stable.

    Stops when a pass drops no directions (``converged=True``) or after
    ``max_outer`` passes (best-so-far returned with ``converged=False``).
    The candidate count is non-increasing across passes.  If no direction
    carries clustering information the single-component fit on the current
    variables is returned with an empty basis.
    """
    fit_config = fit_config or FitConfig()
    selection = selection or SelectionConfig()
    X = np.asarray(data, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]

    fit = model_search(X, g_range, models, fit_config).best
    current = X
    chain: np.ndarray | None = None
    history: list[PipelineIteration] = []
    traces: list[SelectionTrace] = []
    converged = False
    basis_out: DrBasis | None = None

    for _ in range(max_outer):
        basis = estimate_directions(fit, current, eig_threshold=eig_threshold)
        d = basis.d
        if d == 0:
            basis_out = _compose_basis(chain, basis, [])
            converged = True
            break
        Z = project_data(current, basis)
        if selection.mode == "entropy":
            keep, _, _ = entropy_prefix_select(Z, selection)
            trace = None
        else:
            trace = greedy_select(Z, selection)
            traces.append(trace)
            keep = sorted(trace.selected)
        if not keep:
            # nothing informative: final model is the single-component fit
            fit = model_search(current, [1], models, fit_config).best
            basis_out = _compose_basis(chain, basis, [])
            converged = True
            break
        refit = model_search(Z[:, keep], g_range, models, fit_config).best
        history.append(
            PipelineIteration(
                n_candidates=d,
                n_selected=len(keep),
                model=refit.model,
                n_components=refit.n_components,
                bic=refit.bic,
            )
        )
        basis_out = _compose_basis(chain, basis, keep)
        chain = basis_out.directions
        current = Z[:, keep]
        fit = refit
        if len(keep) == d:
            converged = True
            break

    assert basis_out is not None
    if basis_out.d > 0:
        labels, uncertainty = map_classify(fit, current)
        variables = current
    else:
        n = X.shape[0]
        labels = np.ones(n, dtype=np.int64)
        uncertainty = np.zeros(n)
        variables = np.empty((n, 0))
    return PipelineResult(
        fit=fit,
        basis=basis_out,
        variables=variables,
        labels=labels,
        uncertainty=uncertainty,
        history=history,
        traces=traces,
        converged=converged,
    )


class GMMDRPipeline(BaseEstimator, ClusterMixin):
    """Clustering on selected dimension-reduction variables (sklearn API).

    Runs the full loop: BIC model search, direction estimation, greedy (or
    entropy-prefix) direction selection, refit, iterated to stability.
    ``labels_`` holds 1-based MAP labels of the training data; ``predict``
    projects new data through the composed basis and classifies it with the
    final mixture.
    """

    def __init__(
        self,
        n_components=(1, 9),
        models="all",
        selection_max_g: int = 9,
        selection_models="all",
        selection_mode: str = "bic",
        fixed_model: tuple[str, int] | None = None,
        eig_threshold: float = DEFAULT_EIG_THRESHOLD,
        max_iter: int = 500,
        tol: float = 1e-8,
        init: str = "kmeans",
        restarts: int = 1,
        selection_tol: float = 1e-5,
        max_outer: int = 10,
        random_state: int = 0,
    ):
        self.n_components = n_components
        self.models = models
        self.selection_max_g = selection_max_g
        self.selection_models = selection_models
        self.selection_mode = selection_mode
        self.fixed_model = fixed_model
        self.eig_threshold = eig_threshold
        self.max_iter = max_iter
        self.tol = tol
        self.init = init
        self.restarts = restarts
        self.selection_tol = selection_tol
        self.max_outer = max_outer
        self.random_state = random_state

    def fit(self, X, y=None):
        fit_config = FitConfig(
            max_iter=self.max_iter,
            rel_tol=self.tol,
            init=self.init,
            restarts=self.restarts,
            seed=self.random_state,
        )
        selection = SelectionConfig(
            max_g=self.selection_max_g,
            models=self.selection_models,
            fixed_model=self.fixed_model,
            fit=FitConfig(
                rel_tol=self.selection_tol,
                init=self.init,
                restarts=1,
                seed=self.random_state,
            ),
            mode=self.selection_mode,
        )
        self.result_ = gmmdr_pipeline(
            X,
            fit_config=fit_config,
            selection=selection,
            g_range=self.n_components,
            models=self.models,
            eig_threshold=self.eig_threshold,
            max_outer=self.max_outer,
        )
        self.mixture_ = self.result_.fit
        self.basis_ = self.result_.basis
        self.directions_ = self.basis_.directions
        self.eigenvalues_ = self.basis_.eigenvalues
        self.n_directions_ = self.basis_.d
        self.model_ = self.mixture_.model
        self.n_components_ = self.mixture_.n_components
        self.bic_ = self.mixture_.bic
        self.labels_ = self.result_.labels
        self.uncertainty_ = self.result_.uncertainty
        return self

    def transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        return X @ self.basis_.directions

    def predict(self, X):
        if self.basis_.d == 0:
            return np.ones(np.asarray(X).shape[0], dtype=np.int64)
        labels, _ = map_classify(self.mixture_, self.transform(X))
        return labels
