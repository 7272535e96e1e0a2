"""Posterior predictive inference from chain draws.

The predictive regression function at a covariate point x averages the
cluster-specific regression lines with covariate-dependent weights

    w_k(x)  propto  p_k * sum_j p_{j|k} prod_l N(x_l; mu_kjl, tau_kjl),

so clusters whose covariate atoms sit near x dominate the prediction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .core import GibbsState
from .errors import DomainError, NumericalError

_LOG_2PI = math.log(2.0 * math.pi)


def _state_of(draw) -> GibbsState:
    """Accept either a ChainDraw or a bare GibbsState."""
    return getattr(draw, "state", draw)


def _as_points(x, p):
    X = np.atleast_2d(np.asarray(x, dtype=float))
    if X.ndim != 2 or X.shape[1] != p:
        raise DomainError(
            f"covariate points must have {p} columns, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise DomainError("covariate points must be finite")
    return X


def mixture_log_weights(draw, x) -> np.ndarray:
    """Unnormalized log w_k(x) for each point; shape (n_points, N)."""
    state = _state_of(draw)
    X = _as_points(x, state.psi_mu.shape[2])
    N, M, p = state.psi_mu.shape
    inv_tau = 1.0 / state.psi_tau                     # (N, M, p)
    flat_inv = inv_tau.reshape(N * M, p)
    flat_mu = state.psi_mu.reshape(N * M, p)
    quad = (X ** 2) @ flat_inv.T - 2.0 * X @ (flat_mu * flat_inv).T \
        + (flat_mu ** 2 * flat_inv).sum(axis=1)
    log_norm = -0.5 * (p * _LOG_2PI + np.log(state.psi_tau).sum(axis=2))
    log_fx = -0.5 * quad.reshape(-1, N, M) + log_norm  # (n_points, N, M)
    with np.errstate(divide="ignore"):
        log_pw = np.log(state.psi_w)                   # (N, M)
        log_theta = np.log(state.theta_w)              # (N,)
    return log_theta + logsumexp(log_fx + log_pw, axis=2)


def conditional_mean(draw, x) -> np.ndarray | float:
    """E(y | x, draw): weighted average of the cluster regression lines."""
    state = _state_of(draw)
    X = _as_points(x, state.psi_mu.shape[2])
    logw = mixture_log_weights(state, X)
    if not np.isfinite(logw.max(axis=1)).all():
        raise NumericalError("all mixture weights underflowed at a point")
    w = np.exp(logw - logw.max(axis=1, keepdims=True))
    w /= w.sum(axis=1, keepdims=True)
    Xs = np.column_stack([np.ones(X.shape[0]), X])
    means = Xs @ state.theta_beta.T                    # (n_points, N)
    out = (w * means).sum(axis=1)
    return float(out[0]) if np.asarray(x).ndim == 1 else out


def conditional_density(draw, x, y_grid) -> np.ndarray:
    """f(y | x, draw) evaluated on a grid of response values."""
    state = _state_of(draw)
    X = _as_points(x, state.psi_mu.shape[2])
    if X.shape[0] != 1:
        raise DomainError("conditional_density takes a single covariate point")
    y_grid = np.asarray(y_grid, dtype=float)
    logw = mixture_log_weights(state, X)[0]
    if not np.isfinite(logw.max()):
        raise NumericalError("all mixture weights underflowed at the point")
    logw = logw - logsumexp(logw)
    xs = np.concatenate([[1.0], X[0]])
    mean_k = state.theta_beta @ xs                     # (N,)
    log_fy = -0.5 * (_LOG_2PI + np.log(state.theta_tau)
                     + (y_grid[:, None] - mean_k) ** 2 / state.theta_tau)
    return np.exp(logsumexp(log_fy + logw, axis=1))


@dataclass(frozen=True)
class PredictiveSummary:
    """Posterior summary of the conditional mean at one covariate point."""

    mean: float
    q025: float
    q25: float
    q75: float
    q975: float

    @property
    def quantiles(self) -> dict:
        return {0.025: self.q025, 0.25: self.q25,
                0.75: self.q75, 0.975: self.q975}


def predictive_summary(chain, x) -> PredictiveSummary:
    """Summarize per-draw conditional means across a chain at point x."""
    vals = np.array([conditional_mean(d.state, x) for d in chain])
    if vals.size == 0:
        raise DomainError("chain is empty")
    q = np.quantile(vals, [0.025, 0.25, 0.75, 0.975])
    return PredictiveSummary(mean=float(vals.mean()), q025=float(q[0]),
                             q25=float(q[1]), q75=float(q[2]),
                             q975=float(q[3]))


def predictive_values(draws, X_eval) -> np.ndarray:
    """Per-draw conditional means at several points; shape (n_draws, m)."""
    X_eval = np.atleast_2d(np.asarray(X_eval, dtype=float))
    rows = [conditional_mean(d.state, X_eval) for d in draws]
    if not rows:
        raise DomainError("no draws supplied")
    return np.vstack(rows)


def prediction_errors(estimate, truth) -> tuple[float, float]:
    """(mean absolute error, mean squared error)."""
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimate.shape != truth.shape:
        raise DomainError("estimate and truth must have matching shapes")
    if estimate.size == 0:
        raise DomainError("need at least one prediction")
    diff = estimate - truth
    return float(np.abs(diff).mean()), float((diff ** 2).mean())
