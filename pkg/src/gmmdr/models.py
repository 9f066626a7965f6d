"""Covariance model codes and parameter counting.

Component covariances are parametrized through the eigenvalue decomposition
``Sigma_g = lambda_g * D_g * A_g * D_g^T`` where ``lambda_g`` (volume) is a
scalar, ``A_g`` (shape) is diagonal with unit determinant and ``D_g``
(orientation) is orthogonal.  A three-letter code says which of
volume/shape/orientation are Equal across components, Variable, or fixed to
the Identity:

=====  =======  ======  ============  ==================  ===============
code   volume   shape   orientation   covariance          free cov params
=====  =======  ======  ============  ==================  ===============
E      equal    --      --            sigma^2 (p = 1)     1
V      var.     --      --            sigma_g^2 (p = 1)   G
EII    equal    I       I             lambda I            1
VII    var.     I       I             lambda_g I          G
EEI    equal    equal   I             lambda A            p
VEI    var.     equal   I             lambda_g A          G + (p - 1)
EEE    equal    equal   equal         lambda D A D^T      p(p+1)/2
EEV    equal    equal   var.          lambda D_g A D_g^T  1 + (p-1) + G p(p-1)/2
VEV    var.     equal   var.          lambda_g D_g A D_g^T  G + (p-1) + G p(p-1)/2
VVV    var.     var.    var.          lambda_g D_g A_g D_g^T  G p(p+1)/2
=====  =======  ======  ============  ==================  ===============

A full mixture with G components on p variables additionally has ``G - 1``
free mixing proportions and ``G * p`` mean coordinates.
"""

from __future__ import annotations

from .errors import InvalidModelError

UNIVARIATE_MODELS: tuple[str, ...] = ("E", "V")
MULTIVARIATE_MODELS: tuple[str, ...] = (
    "EII",
    "VII",
    "EEI",
    "VEI",
    "EEE",
    "EEV",
    "VEV",
    "VVV",
)

#: Codes whose within-component covariance is identical across components.
EQUAL_COVARIANCE_MODELS: frozenset[str] = frozenset({"E", "EII", "EEI", "EEE"})


def model_names(p: int) -> tuple[str, ...]:
    """All model codes applicable to ``p``-dimensional data."""
    if p < 1:
        raise InvalidModelError(f"data dimension must be >= 1, got {p}")
    return UNIVARIATE_MODELS if p == 1 else MULTIVARIATE_MODELS


def check_model(model: str, p: int) -> str:
    """Validate a model code against the data dimension; returns the code."""
    if model not in UNIVARIATE_MODELS and model not in MULTIVARIATE_MODELS:
        raise InvalidModelError(f"unknown model code {model!r}")
    if model not in model_names(p):
        raise InvalidModelError(f"model {model!r} is not defined for p={p}")
    return model


def is_equal_covariance(model: str) -> bool:
    """True when the code constrains all component covariances to be equal."""
    if model not in UNIVARIATE_MODELS and model not in MULTIVARIATE_MODELS:
        raise InvalidModelError(f"unknown model code {model!r}")
    return model in EQUAL_COVARIANCE_MODELS


def covariance_param_count(model: str, p: int, n_components: int) -> int:
    """Number of free covariance parameters for a model code."""
    check_model(model, p)
    G = int(n_components)
    if G < 1:
        raise InvalidModelError(f"n_components must be >= 1, got {n_components}")
    full = p * (p + 1) // 2
    orient = p * (p - 1) // 2
    if model == "E" or model == "EII":
        return 1
    if model == "V" or model == "VII":
        return G
    if model == "EEI":
        return p
    if model == "VEI":
        return G + (p - 1)
    if model == "EEE":
        return full
    if model == "EEV":
        return 1 + (p - 1) + G * orient
    if model == "VEV":
        return G + (p - 1) + G * orient
    if model == "VVV":
        return G * full
    raise InvalidModelError(f"unknown model code {model!r}")  # pragma: no cover


def count_params(model: str, p: int, n_components: int) -> int:
    """Total free parameters: mixing weights, means and covariances."""
    G = int(n_components)
    if p < 1 or G < 1:
        raise InvalidModelError(f"invalid (p, G) = ({p}, {n_components})")
    return (G - 1) + G * p + covariance_param_count(model, p, G)
