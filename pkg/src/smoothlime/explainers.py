"""SmoothGrad, C-LIME (plain and ridge) and a Monte-Carlo estimate of their shared limit.

Every explainer draws its perturbations from ``N(x, sigma2 * I)`` with the
package generator. The ``*_from_samples`` variants take an explicit sample
matrix so two explanations can be computed on the same perturbations.
"""

import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_points, check_vector
from .exceptions import DimensionMismatch, NotSPD, RankDeficient
from .linalg import centered_scatter, norm, sample_covariance_with_scalar, spd_solve
from .sampling import PerturbationConfig, derive_seed, gaussian_perturbations

METHODS = ("smoothgrad", "clime", "clime_ridge", "oracle")


@dataclass
class AttributionVector:
    weights: np.ndarray
    method: str
    n: int
    seed: int
    x: np.ndarray = None
    sigma2: float = None

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("attribution weights must be finite")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")

    def to_dict(self):
        return {
            "method": self.method,
            "x": None if self.x is None else np.asarray(self.x).tolist(),
            "sigma2": self.sigma2,
            "n": int(self.n),
            "seed": int(self.seed),
            "weights": self.weights.tolist(),
        }

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc):
        x = doc.get("x")
        return cls(np.array(doc["weights"], dtype=np.float64), doc["method"], doc["n"],
                   doc["seed"], None if x is None else np.array(x, dtype=np.float64),
                   doc.get("sigma2"))


@dataclass
class SurrogateFit:
    weights: np.ndarray
    intercept: float
    residual_mse: float


def _labels(f, samples):
    y = np.asarray(f(samples), dtype=np.float64).reshape(-1)
    if y.shape[0] != samples.shape[0]:
        raise DimensionMismatch("function returned the wrong number of outputs")
    return y


def ols_fit(samples, labels, ridge=0.0):
    """Least-squares linear surrogate with an unpenalized intercept.

    Minimizes ``mean((labels - samples @ w - b)**2) + ridge * ||w||^2``. The
    intercept is eliminated by centering, which leaves the normal equations
    ``(S + ridge I) w = c`` with ``S`` the (1/n) centered scatter matrix and
    ``c`` the per-feature covariance with the labels.
    """
    samples = np.asarray(samples, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    n, d = samples.shape
    if ridge < 0:
        raise ValueError("ridge penalty must be >= 0")
    if ridge == 0 and n < d + 1:
        raise RankDeficient(
            f"{n} perturbations cannot determine {d} weights plus an intercept; "
            f"use n >= {d + 1} or a positive ridge penalty")
    if n < 2:
        w = np.zeros(d)
        return SurrogateFit(w, float(labels.mean()), 0.0)
    gram = centered_scatter(samples) + ridge * np.eye(d)
    cov = sample_covariance_with_scalar(samples, labels)
    try:
        w = spd_solve(gram, cov)
    except NotSPD as exc:
        raise RankDeficient(
            f"perturbation design is rank deficient ({exc}); increase n or use ridge") from exc
    intercept = float(labels.mean() - samples.mean(axis=0) @ w)
    resid = labels - samples @ w - intercept
    return SurrogateFit(w, intercept, float(np.mean(resid ** 2)))


def smoothgrad_from_samples(f, samples):
    """Mean input gradient of ``f`` over the rows of ``samples``."""
    G = np.asarray(f.gradient(samples), dtype=np.float64).reshape(samples.shape)
    return G.mean(axis=0)


def clime_from_samples(f, samples, ridge=0.0):
    return ols_fit(samples, _labels(f, samples), ridge).weights


def oracle_from_samples(f, samples, sigma2):
    """``sigma2**-1 * cov(a, f(a))`` over the sample."""
    return sample_covariance_with_scalar(samples, _labels(f, samples)) / sigma2


def _attribution(weights, method, cfg):
    return AttributionVector(weights, method, cfg.count, cfg.seed, cfg.center.copy(),
                             cfg.variance)


def smoothgrad(f, cfg):
    return _attribution(smoothgrad_from_samples(f, gaussian_perturbations(cfg)),
                        "smoothgrad", cfg)


def clime(f, cfg):
    if cfg.count < cfg.dim + 1:
        raise RankDeficient(
            f"C-LIME needs at least d + 1 = {cfg.dim + 1} perturbations, got {cfg.count}; "
            "increase n or use clime_ridge")
    return _attribution(clime_from_samples(f, gaussian_perturbations(cfg)), "clime", cfg)


def clime_ridge(f, cfg, lam):
    """C-LIME with penalty ``lam * ||w||^2``; ``lam = 0`` is plain C-LIME."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if lam == 0:
        return _attribution(clime(f, cfg).weights, "clime_ridge", cfg)
    return _attribution(clime_from_samples(f, gaussian_perturbations(cfg), lam),
                        "clime_ridge", cfg)


def expected_explanation_mc(f, x, sigma2, n_samples=10**6, seed=0):
    cfg = PerturbationConfig(x, sigma2, n_samples, seed)
    return _attribution(oracle_from_samples(f, gaussian_perturbations(cfg), sigma2),
                        "oracle", cfg)


def oracle_standard_error(f, x, sigma2, n_samples=10**6, seed=0):
    """Per-coordinate Monte-Carlo standard error of :func:`expected_explanation_mc`."""
    cfg = PerturbationConfig(x, sigma2, n_samples, seed)
    A = gaussian_perturbations(cfg)
    y = _labels(f, A)
    terms = (A - A.mean(axis=0)) * (y - y.mean())[:, None] / sigma2
    return terms.std(axis=0) / np.sqrt(n_samples)


def explanation_distance(a, b, kind="L1"):
    wa = a.weights if isinstance(a, AttributionVector) else np.asarray(a, dtype=np.float64)
    wb = b.weights if isinstance(b, AttributionVector) else np.asarray(b, dtype=np.float64)
    if wa.shape != wb.shape:
        raise DimensionMismatch(f"attribution shapes differ: {wa.shape} vs {wb.shape}")
    return norm(wa - wb, kind)


class _PerturbationExplainer(TransformerMixin, BaseEstimator):
    """Shared plumbing for the estimator-style explainers.

    ``transform(X)`` explains each row; row ``i`` uses the stream seed
    ``derive_seed(random_state, i)``.
    """

    method = None

    def fit(self, X=None, y=None):
        if self.model is None or not callable(self.model):
            raise ValueError("explainer needs a callable model")
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be > 0")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if X is not None:
            self.n_features_in_ = check_points(X)[0].shape[1]
        return self

    def _explain(self, cfg):
        raise NotImplementedError

    def explain(self, x, seed=None):
        x = check_vector(x)
        cfg = PerturbationConfig(x, self.sigma2, self.n_samples,
                                 self.random_state if seed is None else seed)
        return self._explain(cfg)

    def transform(self, X):
        X, _ = check_points(X)
        return np.vstack([
            self.explain(x, derive_seed(self.random_state, i)).weights
            for i, x in enumerate(X)
        ])


class SmoothGrad(_PerturbationExplainer):
    """Average input gradient over ``n_samples`` Gaussian perturbations.

    Parameters
    ----------
    model : callable with ``gradient``
        Function to explain, e.g. a trained :class:`~smoothlime.model.Mlp`.
    sigma2 : float
        Perturbation variance.
    n_samples : int
        Number of perturbations per explanation.
    random_state : int
        Base seed.
    """

    method = "smoothgrad"

    def __init__(self, model=None, sigma2=1.0, n_samples=1000, random_state=0):
        self.model = model
        self.sigma2 = sigma2
        self.n_samples = n_samples
        self.random_state = random_state

    def _explain(self, cfg):
        return smoothgrad(self.model, cfg)


class CLime(_PerturbationExplainer):
    """Unweighted linear surrogate fit on Gaussian perturbations; ``alpha`` adds a ridge penalty."""

    method = "clime"

    def __init__(self, model=None, sigma2=1.0, n_samples=1000, alpha=0.0, random_state=0):
        self.model = model
        self.sigma2 = sigma2
        self.n_samples = n_samples
        self.alpha = alpha
        self.random_state = random_state

    def _explain(self, cfg):
        if self.alpha > 0:
            return clime_ridge(self.model, cfg, self.alpha)
        return clime(self.model, cfg)


class ExpectedExplanation(_PerturbationExplainer):
    method = "oracle"

    def __init__(self, model=None, sigma2=1.0, n_samples=10**6, random_state=0):
        self.model = model
        self.sigma2 = sigma2
        self.n_samples = n_samples
        self.random_state = random_state

    def _explain(self, cfg):
        return expected_explanation_mc(self.model, cfg.center, cfg.variance, cfg.count,
                                       cfg.seed)
