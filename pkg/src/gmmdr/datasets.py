"""Seeded synthetic benchmark generators and bundled example data.

All generators draw through ``numpy.random.default_rng`` (PCG64) from the
spec's seed, so a (spec, seed) pair reproduces a dataset bit for bit.
Multivariate normals are sampled as ``mu + L z`` with ``L`` the Cholesky
factor; every covariance parameter is validated positive definite before
sampling.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

SCENARIO_BASES = ("chang15", "synthetic_vvv", "model1_eee", "model2_vev", "model3_vvv")
AUGMENTATIONS = ("none", "noise", "noise+redundant")

#: Correlations of the redundant variables with their paired clustering variables.
REDUNDANT_CORRELATIONS = (0.9, 0.7, 0.5)

# --- three-cluster parameter sets ------------------------------------------

#: Overlapping clusters with unconstrained covariances (also the VVV base of
#: the benchmark scenarios).  The second covariance is compound-symmetric
#: with alternating off-diagonal signs; the same-signed variant is not
#: positive definite and cannot be sampled.
VVV_MEANS = np.array([[0.0, 0.0, 0.0], [4.0, -2.0, 6.0], [-2.0, -4.0, 2.0]])
VVV_COVARIANCES = np.array(
    [
        [[1.0, 0.9, 0.9], [0.9, 1.0, 0.9], [0.9, 0.9, 1.0]],
        [[2.0, -1.8, 1.8], [-1.8, 2.0, -1.8], [1.8, -1.8, 2.0]],
        [[0.5, 0.0, 0.0], [0.0, 0.5, 0.0], [0.0, 0.0, 0.5]],
    ]
)

#: Common-covariance (EEE) scenario.
EEE_MEANS = np.array([[0.0, 0.0, 0.0], [0.0, 2.0, 2.0], [2.0, -2.0, -2.0]])
EEE_COVARIANCE = np.array([[2.0, 0.7, 0.8], [0.7, 0.5, 0.3], [0.8, 0.3, 1.0]])

#: Constant-shape (VEV) scenario: scale * D_g * shape * D_g^T with the
#: matrices below used exactly as printed (they are full rank, which is all
#: positive definiteness needs here).
VEV_MEANS = VVV_MEANS
VEV_SCALES = np.array([0.2, 0.5, 0.8])
VEV_SHAPE = np.diag([1.0, 2.0, 3.0])
VEV_ORIENTATIONS = np.array(
    [
        [[1.0, 0.6, 0.6], [0.6, 1.0, 0.6], [0.6, 0.6, 1.0]],
        [[2.0, -1.2, 1.2], [-1.2, 2.0, -1.2], [1.2, -1.2, 2.0]],
        [[0.5, 0.0, 0.0], [0.0, 0.5, 0.0], [0.0, 0.0, 0.5]],
    ]
)


def _vev_covariances() -> np.ndarray:
    covs = np.array(
        [
            lam * D @ VEV_SHAPE @ D.T
            for lam, D in zip(VEV_SCALES, VEV_ORIENTATIONS)
        ]
    )
    return covs


def _check_spd(cov: np.ndarray, name: str) -> np.ndarray:
    cov = np.asarray(cov, dtype=np.float64)
    if not np.allclose(cov, cov.T, atol=1e-12):
        raise ValueError(f"{name} is not symmetric")
    if np.linalg.eigvalsh(cov).min() <= 0:
        raise ValueError(f"{name} is not positive definite")
    return cov


@dataclass(frozen=True)
class ScenarioSpec:
    """Declarative description of one synthetic-data scheme.

    Exactly one of ``n_per_cluster`` (balanced, exact counts) or ``n_total``
    (sizes drawn from ``priors``) must be set for the three-cluster bases;
    ``chang15`` uses ``n_total``.  ``highdim_k`` scales the
    clustering/redundant/noise layout to ``{3k | 3k | 4k}`` columns and only
    applies to ``model2_vev`` with the redundant augmentation.
    """

    base: str
    n_per_cluster: int | None = None
    n_total: int | None = None
    priors: tuple[float, ...] | None = None
    augmentation: str = "none"
    highdim_k: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.base not in SCENARIO_BASES:
            raise ValueError(f"unknown base {self.base!r}; choose from {SCENARIO_BASES}")
        if self.augmentation not in AUGMENTATIONS:
            raise ValueError(f"unknown augmentation {self.augmentation!r}")
        if self.highdim_k < 1:
            raise ValueError("highdim_k must be >= 1")
        if self.highdim_k > 1 and (
            self.base != "model2_vev" or self.augmentation != "noise+redundant"
        ):
            raise ValueError(
                "highdim_k > 1 applies only to model2_vev with noise+redundant"
            )
        if self.base == "chang15":
            if self.n_total is None or self.augmentation != "none":
                raise ValueError("chang15 takes n_total and no augmentation")
        else:
            if (self.n_per_cluster is None) == (self.n_total is None):
                raise ValueError("set exactly one of n_per_cluster or n_total")
        if self.priors is not None:
            pr = np.asarray(self.priors, dtype=np.float64)
            if pr.ndim != 1 or np.any(pr < 0) or abs(pr.sum() - 1.0) > 1e-12:
                raise ValueError("priors must be a probability vector summing to 1")
            if self.n_per_cluster is not None and not np.allclose(pr, pr[0]):
                raise ValueError("n_per_cluster implies equal priors")


@dataclass(frozen=True)
class LabeledDataset:
    """Generated data with its true component labels (1-based)."""

    data: np.ndarray
    labels: np.ndarray
    clustering_columns: tuple[int, ...]
    spec: ScenarioSpec | None = field(default=None, repr=False)

    @property
    def n_features(self) -> int:
        return self.data.shape[1]


def chang_covariance() -> np.ndarray:
    """15x15 covariance with unit variances and -0.13 f_i f_j off-diagonals."""
    f = np.concatenate([np.full(8, -0.9), np.full(7, 0.5)])
    cov = -0.13 * np.outer(f, f)
    np.fill_diagonal(cov, 1.0)
    return cov


def chang_shift_vector() -> np.ndarray:
    """The per-coordinate shift 0.95 - 0.05 i for i = 1..15."""
    return 0.95 - 0.05 * np.arange(1, 16)


def gen_chang(n: int, seed: int = 0) -> LabeledDataset:
    """Two-group 15-dimensional data on which leading PCs carry no signal.

    ``X = 0.5 d + d Y + Z`` with ``Y ~ Bernoulli(0.2)`` shared across all
    coordinates of an observation and ``Z`` centered Gaussian noise with
    two correlation blocks.  Labels are ``Y + 1``.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    rng = np.random.default_rng(seed)
    d = chang_shift_vector()
    cov = _check_spd(chang_covariance(), "chang covariance")
    y = (rng.uniform(size=n) < 0.2).astype(np.int64)
    L = np.linalg.cholesky(cov)
    z = rng.standard_normal((n, 15)) @ L.T
    X = 0.5 * d[None, :] + d[None, :] * y[:, None] + z
    spec = ScenarioSpec(base="chang15", n_total=n, seed=seed)
    return LabeledDataset(X, y + 1, tuple(range(15)), spec)


def _three_cluster_params(base: str) -> tuple[np.ndarray, np.ndarray]:
    if base in ("synthetic_vvv", "model3_vvv"):
        means, covs = VVV_MEANS, VVV_COVARIANCES
    elif base == "model1_eee":
        means = EEE_MEANS
        covs = np.broadcast_to(EEE_COVARIANCE, (3, 3, 3)).copy()
    elif base == "model2_vev":
        means, covs = VEV_MEANS, _vev_covariances()
    else:  # pragma: no cover
        raise ValueError(f"no three-cluster parameters for base {base!r}")
    covs = np.array([_check_spd(c, f"{base} covariance {g + 1}") for g, c in enumerate(covs)])
    return np.asarray(means, dtype=np.float64), covs


def _draw_labels(spec: ScenarioSpec, n_components: int, rng) -> np.ndarray:
    if spec.n_per_cluster is not None:
        return np.repeat(np.arange(1, n_components + 1), spec.n_per_cluster)
    priors = (
        np.full(n_components, 1.0 / n_components)
        if spec.priors is None
        else np.asarray(spec.priors, dtype=np.float64)
    )
    return rng.choice(np.arange(1, n_components + 1), size=spec.n_total, p=priors)


def _population_moments(weights, means, covs):
    """Marginal mean and per-column variance implied by the mixture."""
    weights = np.asarray(weights, dtype=np.float64)
    m = weights @ means
    second = np.einsum("g,gj->j", weights, np.diagonal(covs, axis1=1, axis2=2) + means**2)
    return m, second - m**2


def gen_model(spec: ScenarioSpec) -> LabeledDataset:
    """Materialize a three-cluster scenario (with optional extra columns).

    Layouts: base = 3k clustering columns; ``noise`` adds 7 independent
    standard normal columns; ``noise+redundant`` adds 3k columns correlated
    (0.9/0.7/0.5, cycling) with their paired clustering columns plus 4k
    standard normal columns.
    """
    if spec.base == "chang15":
        return gen_chang(spec.n_total, spec.seed)
    means, covs = _three_cluster_params(spec.base)
    G = means.shape[0]
    k = spec.highdim_k
    rng = np.random.default_rng(spec.seed)
    labels = _draw_labels(spec, G, rng)
    n = labels.size

    chols = np.linalg.cholesky(covs)
    blocks = []
    for _ in range(k):
        raw = rng.standard_normal((n, 3))
        block = means[labels - 1] + np.einsum("nij,nj->ni", chols[labels - 1], raw)
        blocks.append(block)
    clustering = np.hstack(blocks)

    columns = [clustering]
    if spec.augmentation == "noise":
        columns.append(rng.standard_normal((n, 7)))
    elif spec.augmentation == "noise+redundant":
        priors = np.bincount(labels, minlength=G + 1)[1:] / n
        if spec.n_per_cluster is None and spec.priors is not None:
            priors = np.asarray(spec.priors, dtype=np.float64)
        elif spec.n_per_cluster is not None:
            priors = np.full(G, 1.0 / G)
        pop_mean, pop_var = _population_moments(priors, means, covs)
        redundant = np.empty((n, 3 * k))
        for j in range(3 * k):
            r = REDUNDANT_CORRELATIONS[j % 3]
            source = clustering[:, j]
            standardized = (source - pop_mean[j % 3]) / np.sqrt(pop_var[j % 3])
            redundant[:, j] = r * standardized + np.sqrt(1 - r * r) * rng.standard_normal(n)
        columns.append(redundant)
        columns.append(rng.standard_normal((n, 4 * k)))
    data = np.hstack(columns)
    return LabeledDataset(data, labels, tuple(range(3 * k)), spec)


def gen_synthetic_vvv(
    n_per_cluster: int, augmentation: str = "noise", seed: int = 0
) -> LabeledDataset:
    """The three-cluster, ten-variable example (3 signal + 7 noise columns)."""
    spec = ScenarioSpec(
        base="synthetic_vvv",
        n_per_cluster=n_per_cluster,
        augmentation=augmentation,
        seed=seed,
    )
    return gen_model(spec)


def generate(spec: ScenarioSpec) -> LabeledDataset:
    """Dispatch a ScenarioSpec to its generator."""
    return gen_model(spec)


# --- bundled example data ---------------------------------------------------


def _load_bundled_csv(name: str):
    path = resources.files("gmmdr.data").joinpath(name)
    if not path.is_file():
        raise FileNotFoundError(
            f"bundled dataset {name!r} is not present in this build; "
            "see README for the expected file layout"
        )
    with path.open("r", encoding="utf-8", newline="") as handle:
        rows = list(csv.reader(handle))
    header, body = rows[0], rows[1:]
    label_values = [row[0] for row in body]
    data = np.array([[float(v) for v in row[1:]] for row in body])
    levels = sorted(set(label_values))
    labels = np.array([levels.index(v) + 1 for v in label_values], dtype=np.int64)
    return data, labels, header[1:], levels


def load_wine():
    """The 178 x 13 chemical measurements of Italian wines, three cultivars.

    Returns (data, labels, feature_names); labels are 1 = Barolo,
    2 = Grignolino, 3 = Barbera.
    """
    data, labels, names, _ = _load_bundled_csv("wine.csv")
    return data, labels, names


def load_crabs():
    """200 rock crabs, 5 morphological measurements, 4 species-by-sex classes.

    Expects ``data/crabs.csv`` with columns class,FL,RW,CL,CW,BD where class
    is one of BF, BM, OF, OM.  Returns (data, labels, feature_names) with
    labels 1..4 in that class order.
    """
    data, labels, names, _ = _load_bundled_csv("crabs.csv")
    return data, labels, names
