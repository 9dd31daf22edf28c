"""Posterior approximations that chains are initialized from.

An ``Approximation`` is anything we can draw i.i.d. points from, together
with its own per-coordinate functionals (means, sds, quantiles).  Those
functionals are the initial side of every reported interval, so they use
closed forms where available and recorded fallbacks otherwise.
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np
from scipy.special import ndtri

from .rng import RandomStream
from .stats import sample_quantile


class Approximation:
    """A sampleable distribution with known per-coordinate functionals.

    Args:
        dimension: Dimension d.
        sampler: Maps a RandomStream to one point of shape (d,).
        means: Length-d vector of coordinate means.
        sds: Length-d vector of positive coordinate standard deviations.
        covariance: (d, d) covariance matrix used to build the preconditioner.
        quantile_fn: Optional ``(coordinate, p) -> float``.  When absent the
            runner falls back to initial-sample order statistics and records
            which path was taken.
    """

    def __init__(self, dimension: int,
                 sampler: Callable[[RandomStream], np.ndarray],
                 means: np.ndarray,
                 sds: np.ndarray,
                 covariance: np.ndarray,
                 quantile_fn: Optional[Callable[[int, float], float]] = None,
                 name: str = "approximation"):
        d = int(dimension)
        means = np.asarray(means, dtype=float)
        sds = np.asarray(sds, dtype=float)
        covariance = np.asarray(covariance, dtype=float)
        if means.shape != (d,) or sds.shape != (d,):
            raise ValueError(f"means and sds must have shape ({d},)")
        if covariance.shape != (d, d):
            raise ValueError(f"covariance must have shape ({d}, {d})")
        if np.any(sds <= 0) or not np.all(np.isfinite(sds)):
            raise ValueError("coordinate standard deviations must be positive and finite")
        self.dimension = d
        self.sampler = sampler
        self.means = means
        self.sds = sds
        self.covariance = covariance
        self.quantile_fn = quantile_fn
        self.name = name

    @property
    def has_quantiles(self) -> bool:
        return self.quantile_fn is not None

    def sample(self, stream: RandomStream) -> np.ndarray:
        x = np.asarray(self.sampler(stream), dtype=float)
        if x.shape != (self.dimension,):
            raise ValueError(f"sampler returned shape {x.shape}, expected ({self.dimension},)")
        return x

    def quantile(self, coordinate: int, p: float) -> float:
        if self.quantile_fn is None:
            raise ValueError(f"{self.name} has no quantile function")
        return float(self.quantile_fn(coordinate, p))

    def __repr__(self):
        return f"Approximation(name={self.name!r}, dimension={self.dimension})"


def mean_field_gaussian_approximation(means, sds, name: str = "mean_field") -> Approximation:
    """Independent Gaussian approximation with the given means and sds."""
    means = np.atleast_1d(np.asarray(means, dtype=float))
    sds = np.atleast_1d(np.asarray(sds, dtype=float))
    if means.shape != sds.shape or means.ndim != 1:
        raise ValueError("means and sds must be equal-length vectors")
    if np.any(sds <= 0):
        raise ValueError("sds must be strictly positive")
    d = means.size

    def sampler(stream: RandomStream) -> np.ndarray:
        return means + sds * stream.standard_normal(d)

    def quantile_fn(coordinate: int, p: float) -> float:
        return float(means[coordinate] + sds[coordinate] * ndtri(p))

    return Approximation(d, sampler, means, sds, np.diag(sds * sds),
                         quantile_fn=quantile_fn, name=name)


def kl_optimal_mean_field(target) -> Approximation:
    """The KL(q || pi)-optimal mean-field Gaussian fit to a Gaussian target.

    For a Gaussian target with covariance Sigma the optimizer matches the
    means and uses coordinate variances 1 / (Sigma^-1)_ii, which understates
    every marginal variance when coordinates are correlated.

    Args:
        target: A TargetModel carrying ``mean`` and ``covariance`` attributes
            (as built by ``correlated_gaussian_target``).
    """
    mean = getattr(target, "mean", None)
    cov = getattr(target, "covariance", None)
    if mean is None or cov is None:
        raise ValueError("kl_optimal_mean_field needs a Gaussian target with "
                         "known mean and covariance")
    precision = getattr(target, "precision", None)
    if precision is None:
        precision = np.linalg.inv(cov)
    variances = 1.0 / np.diag(precision)
    return mean_field_gaussian_approximation(mean, np.sqrt(variances),
                                             name="kl_optimal_mean_field")


def empirical_approximation(samples: np.ndarray, name: str = "empirical") -> Approximation:
    """Approximation backed by an existing sample matrix.

    Functionals are the sample's own statistics, the sampler bootstraps rows,
    and quantiles are lower order statistics.  The covariance uses the N - 1
    denominator with a diagonal fallback when there are too few rows for a
    full-rank estimate.

    Args:
        samples: (N, d) matrix with N >= 2 and no constant column.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError(f"need an (N, d) sample matrix with N >= 2, got shape {x.shape}")
    n, d = x.shape
    means = x.mean(axis=0)
    sds = x.std(axis=0, ddof=1)
    if np.any(sds == 0):
        bad = int(np.flatnonzero(sds == 0)[0])
        raise ValueError(f"samples are constant in coordinate {bad}; "
                         "an empirical approximation needs spread in every coordinate")
    if n <= d:
        cov = np.diag(sds * sds)
    else:
        cov = np.cov(x, rowvar=False).reshape(d, d)
        loading = 1e-8 * float(np.trace(cov)) / d
        for _ in range(8):
            try:
                np.linalg.cholesky(cov)
                break
            except np.linalg.LinAlgError:
                cov = cov + loading * np.eye(d)
                loading *= 10.0
        else:
            cov = np.diag(sds * sds)

    def sampler(stream: RandomStream) -> np.ndarray:
        return x[int(stream.integers(0, n))]

    def quantile_fn(coordinate: int, p: float) -> float:
        return sample_quantile(x[:, coordinate], p)

    return Approximation(d, sampler, means, sds, cov, quantile_fn=quantile_fn, name=name)


def approximation_from_sampler(sampler: Callable[[RandomStream], np.ndarray],
                               dimension: int,
                               stream: RandomStream,
                               n_draws: int = 100_000,
                               name: str = "sampled") -> Approximation:
    """Estimates an approximation's functionals by Monte Carlo.

    For black-box samplers without closed-form functionals: draws ``n_draws``
    points once, freezes the resulting empirical functionals, and keeps the
    original sampler for chain initialization.
    """
    if n_draws < 2:
        raise ValueError(f"n_draws must be >= 2, got {n_draws}")
    draws = np.stack([np.asarray(sampler(stream), dtype=float) for _ in range(n_draws)])
    base = empirical_approximation(draws, name=name)
    return Approximation(dimension, sampler, base.means, base.sds, base.covariance,
                         quantile_fn=base.quantile_fn, name=name)
