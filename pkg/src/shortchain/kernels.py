"""Metropolis-Hastings transition kernels sharing one fixed preconditioner.

Four proposal families are provided: random-walk, Langevin (MALA), the
skew-symmetric Barker proposal, and Hamiltonian dynamics with a leapfrog
integrator.  Each proposal is paired with its exact forward and reverse
log densities so the Metropolis-Hastings correction leaves any target
invariant; non-finite densities or gradients at the proposed point reject
the move instead of aborting the run.

All cores operate on batches of shape (B, d).  Single-chain wrappers draw
their randomness in a fixed order (position noise first, an acceptance
uniform last) so a batched ensemble consumes each chain's stream exactly
as the scalar path would.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import expit

from .rng import RandomStream

KERNEL_KINDS = ("rwmh", "mala", "barker", "hmc")

_LOG_2PI = math.log(2.0 * math.pi)


def _check_kind(kind: str):
    if kind not in KERNEL_KINDS:
        raise ValueError(f"unknown kernel kind {kind!r}, expected one of {KERNEL_KINDS}")


def _quiet():
    # proposals may legitimately wander into overflow territory; the
    # acceptance rule maps the resulting non-finite values to rejections
    return np.errstate(over="ignore", invalid="ignore", divide="ignore", under="ignore")


class Preconditioner:
    """A fixed symmetric positive definite matrix G with Cholesky factor C.

    G is taken from the approximation's covariance once per run and never
    adapted; only the scalar step size changes during a run.

    Args:
        matrix: (d, d) symmetric positive definite matrix.
    """

    def __init__(self, matrix: np.ndarray):
        G = np.asarray(matrix, dtype=float)
        if G.ndim != 2 or G.shape[0] != G.shape[1]:
            raise ValueError(f"preconditioner must be square, got shape {G.shape}")
        if not np.allclose(G, G.T, rtol=1e-10, atol=1e-12):
            raise ValueError("preconditioner must be symmetric")
        G = 0.5 * (G + G.T)
        try:
            C = np.linalg.cholesky(G)
        except np.linalg.LinAlgError as exc:
            raise ValueError("preconditioner must be positive definite; "
                             "got a matrix whose Cholesky factorization failed") from exc
        self.matrix = G
        self.cholesky = C
        self.inverse_cholesky = solve_triangular(C, np.eye(G.shape[0]), lower=True)
        self.log_det_cholesky = float(np.sum(np.log(np.diag(C))))
        self.diagonal = np.diag(G).copy()
        self.dimension = G.shape[0]

    @classmethod
    def identity(cls, dimension: int) -> "Preconditioner":
        return cls(np.eye(dimension))


@dataclass(frozen=True)
class ProposalOutcome:
    """A proposed point with the densities needed for the MH correction.

    For Hamiltonian proposals the correction uses the start and end
    Hamiltonians instead, and the directional densities are NaN.
    """
    proposal: np.ndarray
    forward_log_density: float
    reverse_log_density: float
    hamiltonian_start: Optional[float] = None
    hamiltonian_end: Optional[float] = None


def draw_step_noise(kind: str, dimension: int, stream: RandomStream):
    """Draws one MH step's randomness in the canonical order.

    Returns:
        ``(eps, sign_uniforms, accept_uniform)`` where ``sign_uniforms`` is
        None for every kernel except Barker.
    """
    _check_kind(kind)
    eps = stream.standard_normal(dimension)
    if kind == "barker":
        u = stream.random(dimension + 1)
        return eps, u[:dimension], float(u[dimension])
    return eps, None, float(stream.random())


def _gauss_const(dimension: int, step_size: float, pre: Preconditioner) -> float:
    # normalizing constant of N(., step_size * G)
    return -0.5 * dimension * (_LOG_2PI + math.log(step_size)) - pre.log_det_cholesky


def _rwmh_core(x, eps, step_size, pre):
    y = x + math.sqrt(step_size) * (eps @ pre.cholesky.T)
    logq = _gauss_const(x.shape[1], step_size, pre) - 0.5 * np.sum(eps * eps, axis=1)
    return y, logq, logq.copy()


def _mala_core(x, grad_x, eps, step_size, pre, grad_fn):
    G = pre.matrix
    const = _gauss_const(x.shape[1], step_size, pre)
    forward_mean = x + 0.5 * step_size * (grad_x @ G)
    y = forward_mean + math.sqrt(step_size) * (eps @ pre.cholesky.T)
    logq_fwd = const - 0.5 * np.sum(eps * eps, axis=1)
    grad_y = grad_fn(y)
    reverse_mean = y + 0.5 * step_size * (grad_y @ G)
    v = ((x - reverse_mean) @ pre.inverse_cholesky.T) / math.sqrt(step_size)
    logq_rev = const - 0.5 * np.sum(v * v, axis=1)
    return y, logq_fwd, logq_rev, grad_y


def _barker_increment_log_density(z, tau, c):
    """Log density of one whitened Barker increment vector z.

    The increment is drawn coordinate-wise as z_i = b_i w_i with
    w_i ~ N(0, tau_i^2) and P(b_i = +1) = sigmoid(w_i c_i), giving density
    2 N(z_i; 0, tau_i^2) sigmoid(z_i c_i) per coordinate.
    """
    log_mu = -0.5 * (_LOG_2PI + 2.0 * np.log(tau)) - 0.5 * (z / tau) ** 2
    return np.sum(math.log(2.0) + log_mu - np.logaddexp(0.0, -z * c), axis=-1)


def _barker_core(x, grad_x, eps, sign_uniforms, step_size, pre, grad_fn):
    # Unit whitened noise scaled by sqrt(h); the map through C^T then gives
    # the i-th coordinate of y - x scale sqrt(h G_ii) when G is diagonal,
    # matching the sqrt(h) C convention of the other kernels.
    tau = math.sqrt(step_size)
    w = eps * tau
    c_x = grad_x @ pre.cholesky.T
    prob_plus = expit(w * c_x)
    b = np.where(sign_uniforms < prob_plus, 1.0, -1.0)
    z = b * w
    y = x + z @ pre.cholesky
    logq_fwd = _barker_increment_log_density(z, tau, c_x) - pre.log_det_cholesky
    grad_y = grad_fn(y)
    c_y = grad_y @ pre.cholesky.T
    logq_rev = _barker_increment_log_density(-z, tau, c_y) - pre.log_det_cholesky
    return y, logq_fwd, logq_rev, grad_y


def leapfrog(position, momentum, step_size: float, n_steps: int,
             pre: Preconditioner, grad_fn: Callable):
    """Leapfrog integration of Hamiltonian dynamics with mass matrix G^-1.

    Each step is a half kick, a full drift through G, and a half kick; the
    integrator is time reversible and uses exactly ``n_steps + 1`` gradient
    evaluations (consecutive steps share the endpoint gradient).

    Args:
        position: (d,) or (B, d) positions.
        momentum: Matching momenta.
        step_size: Leapfrog step size h > 0.
        n_steps: Number of leapfrog steps L >= 1.
        pre: Preconditioner supplying G.
        grad_fn: Gradient of the log target.

    Returns:
        ``(position, momentum)`` after ``n_steps`` steps.
    """
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    x = np.atleast_2d(np.asarray(position, dtype=float)).copy()
    eta = np.atleast_2d(np.asarray(momentum, dtype=float)).copy()
    flat = np.asarray(position).ndim == 1
    G = pre.matrix
    with _quiet():
        g = np.atleast_2d(grad_fn(x))
        for _ in range(n_steps):
            eta = eta + 0.5 * step_size * g
            x = x + step_size * (eta @ G)
            g = np.atleast_2d(grad_fn(x))
            eta = eta + 0.5 * step_size * g
    if flat:
        return x[0], eta[0]
    return x, eta


def _kinetic_energy(eta, pre):
    return 0.5 * np.sum((eta @ pre.matrix) * eta, axis=1)


def _hmc_core(x, logpi_x, xi, step_size, n_steps, pre, log_density_fn, grad_fn):
    eta0 = xi @ pre.inverse_cholesky  # momentum ~ N(0, G^-1)
    h_start = -logpi_x + _kinetic_energy(eta0, pre)
    y, eta = leapfrog(x, eta0, step_size, n_steps, pre, grad_fn)
    logpi_y = log_density_fn(y)
    h_end = -logpi_y + _kinetic_energy(eta, pre)
    return y, h_start, h_end, logpi_y


def step_batch(kind: str, x, logpi_x, grad_x, eps, sign_uniforms, accept_uniforms,
               step_size: float, pre: Preconditioner, target, n_leapfrog: int = 10):
    """Advances a batch of chains one MH step with pre-drawn randomness.

    Args:
        kind: Kernel kind.
        x: (B, d) current states.
        logpi_x: (B,) current log densities.
        grad_x: (B, d) cached gradients at x (MALA/Barker), else None.
        eps: (B, d) standard normal draws.
        sign_uniforms: (B, d) uniforms (Barker only).
        accept_uniforms: (B,) acceptance uniforms.
        step_size: Current step size h > 0.
        pre: Preconditioner.
        target: TargetModel (its gradient counter tracks the budget).
        n_leapfrog: Leapfrog steps for HMC.

    Returns:
        ``(new_x, new_logpi, new_grad, alpha)``; ``new_grad`` is None unless
        the kernel caches gradients.
    """
    _check_kind(kind)
    if step_size <= 0 or not math.isfinite(step_size):
        raise ValueError(f"step_size must be positive and finite, got {step_size}")
    with _quiet():
        grad_y = None
        if kind == "rwmh":
            y, logq_fwd, logq_rev = _rwmh_core(x, eps, step_size, pre)
            logpi_y = target.log_density(y)
            log_ratio = (logpi_y - logpi_x) + (logq_rev - logq_fwd)
        elif kind == "mala":
            if grad_x is None:
                grad_x = target.grad_log_density(x)
            y, logq_fwd, logq_rev, grad_y = _mala_core(
                x, grad_x, eps, step_size, pre, target.grad_log_density)
            logpi_y = target.log_density(y)
            log_ratio = (logpi_y - logpi_x) + (logq_rev - logq_fwd)
        elif kind == "barker":
            if grad_x is None:
                grad_x = target.grad_log_density(x)
            y, logq_fwd, logq_rev, grad_y = _barker_core(
                x, grad_x, eps, sign_uniforms, step_size, pre, target.grad_log_density)
            logpi_y = target.log_density(y)
            log_ratio = (logpi_y - logpi_x) + (logq_rev - logq_fwd)
        else:
            y, h_start, h_end, logpi_y = _hmc_core(
                x, logpi_x, eps, step_size, n_leapfrog, pre,
                target.log_density, target.grad_log_density)
            log_ratio = h_start - h_end

        alpha = np.exp(np.minimum(log_ratio, 0.0))
        alpha = np.where(np.isnan(alpha), 0.0, alpha)
        # a proposal with any non-finite coordinate is never a valid move
        alpha = np.where(np.all(np.isfinite(y), axis=1), alpha, 0.0)
        accept = accept_uniforms < alpha

        new_x = np.where(accept[:, None], y, x)
        new_logpi = np.where(accept, logpi_y, logpi_x)
        new_grad = None
        if grad_y is not None:
            new_grad = np.where(accept[:, None], grad_y, grad_x)
    return new_x, new_logpi, new_grad, alpha


def rwmh_propose(x, step_size: float, pre: Preconditioner,
                 stream: RandomStream) -> ProposalOutcome:
    """Random-walk proposal y ~ N(x, h G); forward and reverse densities agree."""
    x = np.asarray(x, dtype=float)
    eps = stream.standard_normal(x.size)
    with _quiet():
        y, logq_fwd, logq_rev = _rwmh_core(x[None, :], eps[None, :], step_size, pre)
    return ProposalOutcome(y[0], float(logq_fwd[0]), float(logq_rev[0]))


def mala_propose(x, step_size: float, pre: Preconditioner,
                 grad_fn: Callable, stream: RandomStream) -> ProposalOutcome:
    """Langevin proposal y ~ N(x + (h/2) G grad(x), h G).

    The reverse density recenters on a fresh gradient at the proposed point.
    """
    x = np.asarray(x, dtype=float)
    eps = stream.standard_normal(x.size)
    with _quiet():
        grad_x = np.atleast_2d(grad_fn(x[None, :]))
        y, logq_fwd, logq_rev, _ = _mala_core(
            x[None, :], grad_x, eps[None, :], step_size, pre,
            lambda p: np.atleast_2d(grad_fn(p)))
    return ProposalOutcome(y[0], float(logq_fwd[0]), float(logq_rev[0]))


def barker_propose(x, step_size: float, pre: Preconditioner,
                   grad_fn: Callable, stream: RandomStream) -> ProposalOutcome:
    """Barker proposal: whitened increments with gradient-informed sign flips.

    The whitened increment draws w_i ~ N(0, h) and keeps its sign with
    probability sigmoid(w_i c_i(x)) where c(x) = C grad(x); the move is
    y = x + C^T z, so coordinate i of y - x has scale sqrt(h G_ii) for
    diagonal G.
    """
    x = np.asarray(x, dtype=float)
    d = x.size
    eps = stream.standard_normal(d)
    u = stream.random(d + 1)  # last entry reserved for the acceptance draw
    with _quiet():
        grad_x = np.atleast_2d(grad_fn(x[None, :]))
        y, logq_fwd, logq_rev, _ = _barker_core(
            x[None, :], grad_x, eps[None, :], u[None, :d], step_size, pre,
            lambda p: np.atleast_2d(grad_fn(p)))
    return ProposalOutcome(y[0], float(logq_fwd[0]), float(logq_rev[0]))


def hmc_propose(x, step_size: float, n_leapfrog: int, pre: Preconditioner,
                log_density_fn: Callable, grad_fn: Callable,
                stream: RandomStream) -> ProposalOutcome:
    """Hamiltonian proposal: fresh N(0, G^-1) momentum, L leapfrog steps.

    Consumes exactly ``n_leapfrog + 1`` gradient evaluations and carries the
    start and end Hamiltonians for the acceptance rule.
    """
    x = np.asarray(x, dtype=float)
    xi = stream.standard_normal(x.size)
    with _quiet():
        logpi_x = np.atleast_1d(log_density_fn(x[None, :]))
        y, h_start, h_end, _ = _hmc_core(
            x[None, :], logpi_x, xi[None, :], step_size, n_leapfrog, pre,
            lambda p: np.atleast_1d(log_density_fn(p)),
            lambda p: np.atleast_2d(grad_fn(p)))
    return ProposalOutcome(y[0], float("nan"), float("nan"),
                           hamiltonian_start=float(h_start[0]),
                           hamiltonian_end=float(h_end[0]))


def mh_acceptance_probability(outcome: ProposalOutcome,
                              log_pi_x: float, log_pi_y: float) -> float:
    """Metropolis-Hastings acceptance probability for a proposal outcome.

    Non-finite quantities at the proposed point give probability 0; a chain
    currently at a -inf density state accepts any finite proposal.
    """
    if outcome.hamiltonian_start is not None:
        log_ratio = outcome.hamiltonian_start - outcome.hamiltonian_end
    else:
        log_ratio = ((log_pi_y - log_pi_x)
                     + (outcome.reverse_log_density - outcome.forward_log_density))
    if math.isnan(log_ratio):
        return 0.0
    return float(math.exp(min(log_ratio, 0.0)))


def mh_step(kind: str, x, step_size: float, pre: Preconditioner, target,
            stream: RandomStream, n_leapfrog: int = 10):
    """One Metropolis-Hastings step of a single chain.

    Draws the proposal noise and the acceptance uniform from ``stream`` in
    the canonical order, so stepping chains one at a time consumes streams
    exactly as the batched ensemble does.

    Returns:
        ``(new_state, alpha)``.
    """
    x = np.asarray(x, dtype=float)
    eps, sign_u, accept_u = draw_step_noise(kind, x.size, stream)
    with _quiet():
        logpi_x = np.atleast_1d(target.log_density(x[None, :]))
    new_x, _, _, alpha = step_batch(
        kind, x[None, :], logpi_x, None, eps[None, :],
        None if sign_u is None else sign_u[None, :],
        np.array([accept_u]), step_size, pre, target, n_leapfrog)
    return new_x[0], float(alpha[0])
