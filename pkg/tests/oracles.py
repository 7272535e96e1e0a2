"""Independent reference implementations used as test oracles.

Everything here is written from first principles (closed-form conjugate
posteriors, marginal likelihoods, exhaustive partition enumeration) and
deliberately shares no code with the package under test.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.special import gammaln

from edpm.core import GibbsState, Truncation, occupancy_counts


# ---------------------------------------------------------------------------
# closed-form normal-inverse-gamma posteriors
# ---------------------------------------------------------------------------

def nig_regression_posterior(y, Xs, beta0, C, a, b):
    """Exact posterior for beta | tau ~ N(beta0, tau C^{-1}), tau ~ IG(a,b).

    Returns a dict with the posterior NIG parameters and the implied
    marginal moments of beta and tau.
    """
    y = np.asarray(y, float)
    Xs = np.asarray(Xs, float)
    A = Xs.T @ Xs + C
    mu = np.linalg.solve(A, Xs.T @ y + C @ beta0)
    a_star = a + y.size / 2.0
    b_star = b + 0.5 * (y @ y + beta0 @ C @ beta0 - mu @ A @ mu)
    tau_mean = b_star / (a_star - 1.0)
    tau_var = b_star ** 2 / ((a_star - 1.0) ** 2 * (a_star - 2.0))
    return {
        "A": A, "mu": mu, "a": a_star, "b": b_star,
        "beta_mean": mu,
        "beta_cov": tau_mean * np.linalg.inv(A),
        "tau_mean": tau_mean, "tau_var": tau_var,
    }


def nig_location_posterior(x, m, c, a, b):
    """Exact posterior for mu | tau ~ N(m, tau/c), tau ~ IG(a,b), scalar."""
    x = np.asarray(x, float)
    n = x.size
    c_star = n + c
    m_star = (x.sum() + c * m) / c_star
    a_star = a + n / 2.0
    b_star = b + 0.5 * (x @ x + c * m ** 2 - c_star * m_star ** 2)
    tau_mean = b_star / (a_star - 1.0)
    return {
        "m": m_star, "c": c_star, "a": a_star, "b": b_star,
        "mu_mean": m_star, "mu_var": tau_mean / c_star,
        "tau_mean": tau_mean,
        "tau_var": b_star ** 2 / ((a_star - 1.0) ** 2 * (a_star - 2.0)),
    }


def nig_regression_log_marginal(y, Xs, beta0, C, a, b):
    """log integral of N(y; Xs beta, tau I) under the NIG prior."""
    y = np.asarray(y, float)
    n = y.size
    post = nig_regression_posterior(y, Xs, beta0, C, a, b)
    _, logdet_C = np.linalg.slogdet(C)
    _, logdet_A = np.linalg.slogdet(post["A"])
    return (-0.5 * n * math.log(2.0 * math.pi)
            + 0.5 * (logdet_C - logdet_A)
            + a * math.log(b) - post["a"] * math.log(post["b"])
            + gammaln(post["a"]) - gammaln(a))


def nig_location_log_marginal(x, m, c, a, b):
    """log marginal of iid N(x; mu, tau) under the scalar NIG prior."""
    x = np.asarray(x, float)
    n = x.size
    post = nig_location_posterior(x, m, c, a, b)
    return (-0.5 * n * math.log(2.0 * math.pi)
            + 0.5 * (math.log(c) - math.log(post["c"]))
            + a * math.log(b) - post["a"] * math.log(post["b"])
            + gammaln(post["a"]) - gammaln(a))


# ---------------------------------------------------------------------------
# nested partition enumeration
# ---------------------------------------------------------------------------

def set_partitions(items):
    """All partitions of a list, each as a list of tuples."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [tuple([first]) + part[i]] + part[i + 1:]
        yield [(first,)] + part


def nested_partitions(n):
    """All nested partitions of range(n): outer blocks, each sub-partitioned.

    Returned in a canonical hashable form: a frozenset of outer blocks,
    each outer block a (members, frozenset-of-inner-blocks) pair.
    """
    out = []
    for outer in set_partitions(range(n)):
        inner_choices = [list(set_partitions(list(block))) for block in outer]
        for combo in itertools.product(*inner_choices):
            out.append(canonical_nested(
                [(block, sub) for block, sub in zip(outer, combo)]))
    return sorted(set(out))


def canonical_nested(blocks):
    return tuple(sorted(
        (tuple(sorted(block)),
         tuple(sorted(tuple(sorted(s)) for s in sub)))
        for block, sub in blocks))


def nested_partition_of_labels(K, J):
    """Canonical nested partition from 1-based label vectors."""
    outer = {}
    for i, (k, j) in enumerate(zip(K, J)):
        outer.setdefault(k, {}).setdefault(j, []).append(i)
    blocks = []
    for k, subs in outer.items():
        members = tuple(sorted(x for s in subs.values() for x in s))
        blocks.append((members, [tuple(sorted(s)) for s in subs.values()]))
    return canonical_nested(blocks)


def nested_crp_log_prior(partition, alpha_theta, alpha_psi):
    """log prior of a nested partition under the two-level urn scheme."""
    n = sum(len(b) for b, _ in partition)
    lp = (len(partition) * math.log(alpha_theta)
          + sum(gammaln(len(b)) for b, _ in partition)
          - sum(math.log(alpha_theta + i) for i in range(n)))
    for block, sub in partition:
        n_k = len(block)
        lp += (len(sub) * math.log(alpha_psi)
               + sum(gammaln(len(s)) for s in sub)
               - sum(math.log(alpha_psi + i) for i in range(n_k)))
    return lp


def nested_partition_posterior(data, hp, alpha_theta, alpha_psi):
    """Exhaustive posterior over nested partitions of a small dataset."""
    Xs = data.design_matrix()
    parts = nested_partitions(data.n)
    logs = []
    for part in parts:
        lp = nested_crp_log_prior(part, alpha_theta, alpha_psi)
        for block, sub in part:
            idx = list(block)
            lp += nig_regression_log_marginal(
                data.y[idx], Xs[idx], hp.beta0, hp.C_y, hp.a_y, hp.b_y)
            for s in sub:
                for l in range(data.p):
                    lp += nig_location_log_marginal(
                        data.X[list(s), l], hp.m[l], hp.c_x[l],
                        hp.a_x, hp.b_x)
        logs.append(lp)
    logs = np.array(logs)
    probs = np.exp(logs - logs.max())
    probs /= probs.sum()
    return dict(zip(parts, probs))


# ---------------------------------------------------------------------------
# MC utilities and state construction
# ---------------------------------------------------------------------------

def batch_means_stderr(x, batch_size=100):
    """Standard error of the mean of a correlated series via batch means."""
    x = np.asarray(x, float)
    n_batches = x.size // batch_size
    means = x[: n_batches * batch_size].reshape(n_batches, batch_size).mean(axis=1)
    return means.std(ddof=1) / math.sqrt(n_batches)


def sticks_from_weights(w):
    """Stick fractions reproducing the given probability vector."""
    w = np.asarray(w, float)
    V = np.empty_like(w)
    rem = 1.0
    for i in range(w.size - 1):
        V[i] = w[i] / rem if rem > 1e-12 else 1.0
        rem -= w[i]
    V[-1] = 1.0
    return np.clip(V, 0.0, 1.0)


def make_state(theta_w, psi_w, beta, tau_y, mu, tau_x, K, J,
               alpha_theta=1.0, alpha_psi=None):
    """Build a valid GibbsState from plain nested lists/arrays."""
    theta_w = np.asarray(theta_w, float)
    psi_w = np.asarray(psi_w, float)
    N, M = psi_w.shape
    mu = np.asarray(mu, float)
    if alpha_psi is None:
        alpha_psi = np.ones(N)
    state = GibbsState(
        trunc=Truncation(N, M),
        theta_V=sticks_from_weights(theta_w), theta_w=theta_w,
        psi_V=np.array([sticks_from_weights(r) for r in psi_w]), psi_w=psi_w,
        theta_beta=np.asarray(beta, float), theta_tau=np.asarray(tau_y, float),
        psi_mu=mu, psi_tau=np.asarray(tau_x, float),
        K=np.asarray(K, int), J=np.asarray(J, int),
        alpha_theta=float(alpha_theta), alpha_psi=np.asarray(alpha_psi, float),
    )
    state.validate()
    return state
