"""Truncation error bounds and minimum-truncation selection.

The closed-form L1 bound on the marginal-density discrepancy between the
truncated and untruncated priors is

    4n [ e^{-(N-1)/a_theta} + e^{-(M-1)/a_psi} (1 - e^{-(N-1)/a_theta}) ],

a first-order approximation of the exact quantity
4 [1 - E{(sum_{k<N} p_k^theta sum_{j<M} p_{j|k}^psi)^n}], which is estimated
here by Monte Carlo over the stick-breaking weights (the atoms cancel).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

_MC_CHUNK = 50_000  # draws per vectorized shard


@dataclass(frozen=True)
class BoundQuery:
    """Inputs of a bound evaluation.

    alpha_psi is the common nested concentration, or the largest
    per-cluster one for the varying-concentration variant.
    """

    n: int
    N: int
    M: int
    alpha_theta: float
    alpha_psi: float

    def __post_init__(self):
        if self.n < 0:
            raise DomainError("n must be non-negative")
        if self.N < 2 or self.M < 2:
            raise DomainError("truncation levels must be >= 2")
        if not (self.alpha_theta > 0 and self.alpha_psi > 0):
            raise DomainError("concentration parameters must be positive")


@dataclass(frozen=True)
class BoundResult:
    bound: float
    theta_term: float
    psi_term: float


def l1_bound(q: BoundQuery) -> BoundResult:
    """Closed-form L1 truncation error bound.

    Strictly decreasing in N and M, exactly linear in n.
    """
    theta_term = math.exp(-(q.N - 1) / q.alpha_theta)
    psi_term = math.exp(-(q.M - 1) / q.alpha_psi)
    bound = 4.0 * q.n * (theta_term + psi_term * (1.0 - theta_term))
    return BoundResult(bound=bound, theta_term=theta_term, psi_term=psi_term)


def l1_bound_varying(n: int, N: int, M: int, alpha_theta: float,
                     alpha_psis) -> BoundResult:
    """Bound variant for per-cluster nested concentrations.

    Uses the largest supplied concentration, which upper-bounds the
    common-concentration formula at any individual value.
    """
    alpha_psis = np.asarray(alpha_psis, dtype=float)
    if alpha_psis.size == 0:
        raise DomainError("need at least one nested concentration")
    if not (alpha_psis > 0).all():
        raise DomainError("concentration parameters must be positive")
    q = BoundQuery(n=n, N=N, M=M, alpha_theta=alpha_theta,
                   alpha_psi=float(alpha_psis.max()))
    return l1_bound(q)


def exact_bound_mc(q: BoundQuery, draws: int,
                   rng: np.random.Generator) -> tuple[float, float]:
    """Monte-Carlo estimate of the exact L1 bound, with its standard error.

    Simulates the stick-breaking weights only: theta sticks are Beta(1, a)
    and the nested within-cluster mass below M is 1 - exp(-G / a_psi) with
    G ~ Gamma(M-1, 1), since the log tail product of Beta(a, 1) sticks is
    a scaled negative Gamma.
    """
    if draws < 1_000:
        raise DomainError("draws must be at least 1000")
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < draws:
        c = min(_MC_CHUNK, draws - done)
        V = rng.beta(1.0, q.alpha_theta, size=(c, q.N - 1))
        p = V.copy()
        p[:, 1:] *= np.cumprod(1.0 - V[:, :-1], axis=1)
        G = rng.gamma(q.M - 1, size=(c, q.N - 1))
        inner = 1.0 - np.exp(-G / q.alpha_psi)
        integrand = (p * inner).sum(axis=1) ** q.n
        total += integrand.sum()
        total_sq += (integrand ** 2).sum()
        done += c
    mean = total / draws
    var = max(total_sq / draws - mean ** 2, 0.0) / draws
    return 4.0 * (1.0 - mean), 4.0 * math.sqrt(var)


def min_truncation(n: int, alpha_theta: float, alpha_psi: float,
                   epsilon: float) -> tuple[int, int]:
    """Smallest (N, M) whose closed-form bound is below epsilon.

    Each term gets an epsilon/2 budget: N is the smallest integer >= 2 with
    4n exp{-(N-1)/a_theta} <= eps/2 and M likewise with a_psi. The
    (1 - theta term) factor is ignored during the search (it only shrinks
    the bound), and feasibility is re-checked with the full formula.
    """
    if not 0.0 < epsilon < 1.0:
        raise DomainError("epsilon must lie in (0, 1)")
    if n < 1:
        raise DomainError("n must be positive")

    def smallest(alpha):
        # 4n exp{-(k-1)/alpha} <= eps/2  <=>  k >= 1 + alpha*log(8n/eps)
        k = math.ceil(1.0 + alpha * math.log(8.0 * n / epsilon))
        # guard against float round-off at the boundary
        while k > 2 and 4.0 * n * math.exp(-(k - 2) / alpha) <= epsilon / 2.0:
            k -= 1
        while 4.0 * n * math.exp(-(k - 1) / alpha) > epsilon / 2.0:
            k += 1
        return max(k, 2)

    N, M = smallest(alpha_theta), smallest(alpha_psi)
    q = BoundQuery(n=n, N=N, M=M, alpha_theta=alpha_theta, alpha_psi=alpha_psi)
    assert l1_bound(q).bound <= epsilon
    return N, M


def estimate_concentrations(chain) -> tuple[float, float]:
    """Posterior means of alpha_theta and of max_k alpha_psi_k over a chain."""
    draws = list(chain)
    if not draws:
        raise DomainError("chain is empty")
    a_theta = float(np.mean([d.state.alpha_theta for d in draws]))
    a_psi_max = float(np.mean([np.max(d.state.alpha_psi) for d in draws]))
    return a_theta, a_psi_max
