"""Target distributions with gradient accounting.

A ``TargetModel`` bundles an unnormalized log density with its gradient and
counts gradient evaluations, one per evaluated point, so that runs can verify
their gradient budget in closed form.  All built-in targets accept a single
point of shape (d,) or a batch of shape (B, d).
"""

from __future__ import annotations

import threading
from typing import Callable, Optional

import numpy as np
from scipy.special import expit


class TargetModel:
    """A differentiable (log) target density on R^d.

    Args:
        dimension: Dimension d of the state space.
        log_density: Maps (d,) to a float, or (B, d) to (B,).
        grad_log_density: Maps (d,) to (d,), or (B, d) to (B, d).
        name: Short label used in reports.

    The gradient evaluation counter increments by the number of points in
    each ``grad_log_density`` call and is safe to bump from worker threads.
    """

    def __init__(self, dimension: int,
                 log_density: Callable[[np.ndarray], np.ndarray],
                 grad_log_density: Callable[[np.ndarray], np.ndarray],
                 name: str = "target"):
        if dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {dimension}")
        self.dimension = int(dimension)
        self.name = name
        self._log_density = log_density
        self._grad_log_density = grad_log_density
        self._n_grad = 0
        self._lock = threading.Lock()

    def log_density(self, x: np.ndarray):
        return self._log_density(np.asarray(x, dtype=float))

    def grad_log_density(self, x: np.ndarray):
        x = np.asarray(x, dtype=float)
        n_points = 1 if x.ndim == 1 else x.shape[0]
        with self._lock:
            self._n_grad += n_points
        return self._grad_log_density(x)

    @property
    def gradient_evaluations(self) -> int:
        return self._n_grad

    def reset_gradient_count(self):
        with self._lock:
            self._n_grad = 0

    def __repr__(self):
        return f"TargetModel(name={self.name!r}, dimension={self.dimension})"


def _as_batch(x: np.ndarray) -> tuple[np.ndarray, bool]:
    """Promotes (d,) to (1, d); returns the batch and whether input was flat."""
    if x.ndim == 1:
        return x[None, :], True
    return x, False


def correlated_gaussian_target(dimension: int,
                               mean=0.0,
                               variances=1.0,
                               correlation: float = 0.0,
                               name: str = "gaussian") -> TargetModel:
    """Gaussian target with marginal variances and a common pairwise correlation.

    The covariance is Sigma_ii = variances[i] and
    Sigma_ij = correlation * sigma_i * sigma_j for i != j, which is positive
    definite only for correlation in (-1/(d-1), 1).

    Args:
        dimension: Dimension d >= 1.
        mean: Scalar or length-d mean vector.
        variances: Scalar or length-d vector of positive marginal variances.
        correlation: Common correlation in (-1/(d-1), 1).

    Returns:
        A TargetModel carrying ``mean`` and ``covariance`` attributes.
    """
    d = int(dimension)
    mu = np.broadcast_to(np.asarray(mean, dtype=float), (d,)).copy()
    var = np.broadcast_to(np.asarray(variances, dtype=float), (d,)).copy()
    if np.any(var <= 0):
        raise ValueError("variances must be strictly positive")
    lo = -1.0 / (d - 1) if d > 1 else -1.0
    if not lo < correlation < 1.0:
        raise ValueError(
            f"correlation {correlation} is outside (-1/(d-1), 1) = ({lo:.6g}, 1) for d={d}")
    sd = np.sqrt(var)
    cov = correlation * np.outer(sd, sd)
    np.fill_diagonal(cov, var)
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise ValueError("covariance is not positive definite") from exc
    precision = np.linalg.inv(cov)
    precision = 0.5 * (precision + precision.T)
    log_norm = -0.5 * d * np.log(2.0 * np.pi) - np.sum(np.log(np.diag(chol)))

    def log_density(x):
        xb, flat = _as_batch(x)
        z = xb - mu
        q = np.einsum("bi,ij,bj->b", z, precision, z)
        out = log_norm - 0.5 * q
        return float(out[0]) if flat else out

    def grad_log_density(x):
        xb, flat = _as_batch(x)
        g = -(xb - mu) @ precision
        return g[0] if flat else g

    model = TargetModel(d, log_density, grad_log_density, name=name)
    model.mean = mu
    model.covariance = cov
    model.precision = precision
    return model


def neal_funnel_target(dimension: int, name: str = "funnel") -> TargetModel:
    """Funnel target: x1 ~ N(0, 1), x_i | x1 ~ N(0, exp(x1)) for i >= 2.

    The second argument of the conditional normal is its variance, so the
    marginal variance of each x_i with i >= 2 is E[exp(x1)] = exp(1/2).
    """
    d = int(dimension)
    if d < 2:
        raise ValueError(f"funnel needs dimension >= 2, got {d}")

    def log_density(x):
        xb, flat = _as_batch(x)
        x1 = xb[:, 0]
        rest = xb[:, 1:]
        ss = np.sum(rest * rest, axis=1)
        out = (-0.5 * np.log(2.0 * np.pi) - 0.5 * x1 * x1
               - 0.5 * (d - 1) * (np.log(2.0 * np.pi) + x1)
               - 0.5 * np.exp(-x1) * ss)
        return float(out[0]) if flat else out

    def grad_log_density(x):
        xb, flat = _as_batch(x)
        x1 = xb[:, 0]
        rest = xb[:, 1:]
        inv_v = np.exp(-x1)
        g = np.empty_like(xb)
        g[:, 0] = -x1 - 0.5 * (d - 1) + 0.5 * inv_v * np.sum(rest * rest, axis=1)
        g[:, 1:] = -rest * inv_v[:, None]
        return g[0] if flat else g

    return TargetModel(d, log_density, grad_log_density, name=name)


def synthetic_logistic_regression_target(n_observations: int,
                                         dimension: int,
                                         prior_sd: float = 1.0,
                                         data_seed: int = 0,
                                         name: str = "logistic") -> TargetModel:
    """Bayesian logistic regression posterior on a synthetic dataset.

    Features z_n are i.i.d. standard normal, the generating coefficient
    vector is drawn from the N(0, prior_sd^2 I) prior, and labels follow
    y_n ~ Bernoulli(sigmoid(z_n . beta)).  The same ``data_seed`` always
    regenerates the identical dataset.

    Returns:
        A TargetModel for the posterior over beta, carrying ``features``,
        ``labels`` and ``generating_coefficients`` attributes.
    """
    if n_observations < 1:
        raise ValueError(f"n_observations must be >= 1, got {n_observations}")
    if prior_sd <= 0:
        raise ValueError(f"prior_sd must be positive, got {prior_sd}")
    d = int(dimension)
    from .rng import RandomStream
    stream = RandomStream(data_seed, 0)
    features = stream.standard_normal((n_observations, d))
    beta_true = prior_sd * stream.standard_normal(d)
    labels = (stream.random(n_observations) < expit(features @ beta_true)).astype(float)
    prior_var = prior_sd * prior_sd
    prior_norm = -0.5 * d * np.log(2.0 * np.pi * prior_var)

    def log_density(beta):
        bb, flat = _as_batch(beta)
        logits = bb @ features.T
        # log p(y | s) = y s - log(1 + e^s), stable via logaddexp
        loglik = np.sum(labels * logits - np.logaddexp(0.0, logits), axis=1)
        log_prior = prior_norm - 0.5 * np.sum(bb * bb, axis=1) / prior_var
        out = loglik + log_prior
        return float(out[0]) if flat else out

    def grad_log_density(beta):
        bb, flat = _as_batch(beta)
        resid = labels - expit(bb @ features.T)
        g = resid @ features - bb / prior_var
        return g[0] if flat else g

    model = TargetModel(d, log_density, grad_log_density, name=name)
    model.features = features
    model.labels = labels
    model.generating_coefficients = beta_true
    return model
