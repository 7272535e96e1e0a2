"""Marginal (Polya-urn) Gibbs sampler for the untruncated enriched mixture.

Cluster assignments move one observation at a time with auxiliary-atom
proposals for new clusters; atoms use the same conjugate posteriors as the
blocked sampler restricted to occupied clusters; concentrations use the
auxiliary-beta scheme for Dirichlet-process precisions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chains import Chain, ChainDraw
from .core import (
    Dataset,
    GibbsState,
    Hyperparameters,
    Truncation,
    draw_psi_from_base,
    draw_theta_from_base,
    sample_inverse_gamma,
)
from .errors import DomainError

_LOG_2PI = math.log(2.0 * math.pi)


class PsiCluster:
    """A covariate cluster nested in one regression cluster."""

    __slots__ = ("mu", "tau_x", "members", "log_fx")

    def __init__(self, mu, tau_x, members=None):
        self.mu = np.asarray(mu, dtype=float)
        self.tau_x = np.asarray(tau_x, dtype=float)
        self.members = set(members) if members else set()
        self.log_fx = None  # cached log f_x(x_i | psi) over all observations

    def refresh(self, X):
        self.log_fx = -0.5 * (
            self.tau_x.size * _LOG_2PI + np.log(self.tau_x).sum()
            + ((X - self.mu) ** 2 / self.tau_x).sum(axis=1))


class ThetaCluster:
    """A regression cluster together with its nested covariate clusters."""

    __slots__ = ("beta", "tau_y", "alpha_psi", "psi", "log_fy")

    def __init__(self, beta, tau_y, alpha_psi):
        self.beta = np.asarray(beta, dtype=float)
        self.tau_y = float(tau_y)
        self.alpha_psi = float(alpha_psi)
        self.psi: list[PsiCluster] = []
        self.log_fy = None  # cached log f_y(y_i | x_i, theta) over all obs

    @property
    def n(self) -> int:
        return sum(len(pc.members) for pc in self.psi)

    def refresh(self, Xs, y):
        resid = y - Xs @ self.beta
        self.log_fy = -0.5 * (_LOG_2PI + math.log(self.tau_y)
                              + resid ** 2 / self.tau_y)


@dataclass
class UrnState:
    """Occupied-cluster representation of the sampler state."""

    clusters: list = field(default_factory=list)
    alpha_theta: float = 1.0
    m_aux: int = 3

    @property
    def n(self) -> int:
        return sum(c.n for c in self.clusters)

    def labels(self) -> tuple[np.ndarray, np.ndarray]:
        """1-based (K, J) label vectors recovered from member sets."""
        K = np.zeros(self.n, dtype=int)
        J = np.zeros(self.n, dtype=int)
        for k, cl in enumerate(self.clusters, start=1):
            for j, pc in enumerate(cl.psi, start=1):
                for i in pc.members:
                    K[i], J[i] = k, j
        return K, J

    def check_consistent(self) -> None:
        seen = set()
        for cl in self.clusters:
            if not cl.psi:
                raise DomainError("empty theta-cluster retained")
            for pc in cl.psi:
                if not pc.members:
                    raise DomainError("empty psi-cluster retained")
                if pc.members & seen:
                    raise DomainError("observation in two clusters")
                seen |= pc.members
        if seen != set(range(self.n)):
            raise DomainError("labels do not cover all observations")

    def refresh_likelihoods(self, data: Dataset) -> None:
        Xs = data.design_matrix()
        for cl in self.clusters:
            cl.refresh(Xs, data.y)
            for pc in cl.psi:
                pc.refresh(data.X)


def init_urn_state(data: Dataset, hp: Hyperparameters,
                   rng: np.random.Generator, m_aux: int = 3) -> UrnState:
    """All observations in a single cluster pair with prior-drawn atoms."""
    if m_aux < 1:
        raise DomainError("m_aux must be at least 1")
    alpha_theta = float(rng.gamma(hp.eta_y1, 1.0 / hp.eta_y2))
    theta = draw_theta_from_base(hp, rng)
    psi = draw_psi_from_base(hp, rng)
    cl = ThetaCluster(theta.beta, theta.tau_y,
                      rng.gamma(hp.eta_x1, 1.0 / hp.eta_x2))
    pc = PsiCluster(psi.mu, psi.tau_x, members=range(data.n))
    cl.psi.append(pc)
    state = UrnState(clusters=[cl], alpha_theta=alpha_theta, m_aux=m_aux)
    state.refresh_likelihoods(data)
    return state


# ---------------------------------------------------------------------------
# assignment sweep
# ---------------------------------------------------------------------------

def pu_update_assignments(state: UrnState, data: Dataset,
                          hp: Hyperparameters,
                          rng: np.random.Generator) -> None:
    """One pass of single-observation reassignments with auxiliary atoms.

    When the observation leaves a singleton cluster, the vacated
    parameters serve as the first auxiliary at the matching level, the
    rest are fresh prior draws. Auxiliary atoms are drawn in one batch
    per observation and the candidate is picked by Gumbel-max, keeping
    the per-observation cost low.
    """
    Xs = data.design_matrix()
    m = state.m_aux
    p = data.p
    for i in range(data.n):
        # detach observation i, remembering vacated singleton parameters
        theta_singleton = None  # (ThetaCluster,) reused as first theta-aux
        psi_singleton = None    # (cluster index, PsiCluster) first psi-aux
        for k, cl in enumerate(state.clusters):
            hit = None
            for pc in cl.psi:
                if i in pc.members:
                    hit = pc
                    break
            if hit is None:
                continue
            hit.members.discard(i)
            if not hit.members:
                cl.psi.remove(hit)
                if not cl.psi:
                    state.clusters.remove(cl)
                    hit.members = set()
                    cl.psi.append(hit)  # keep pair intact for reuse
                    theta_singleton = cl
                else:
                    psi_singleton = (k, hit)
            break

        dt = len(state.clusters)
        n_aux = (dt + 1) * m  # per-cluster psi auxiliaries + theta-aux pairs

        # batch-draw auxiliary atoms from the base measure
        tau_aux = hp.b_x / rng.gamma(hp.a_x, size=(n_aux, p))
        mu_aux = hp.m + np.sqrt(tau_aux / hp.c_x) * \
            rng.standard_normal((n_aux, p))
        tau_y_aux = hp.b_y / rng.gamma(hp.a_y, size=m)
        zb = rng.standard_normal((m, p + 1))
        beta_aux = hp.beta0 + np.sqrt(tau_y_aux)[:, None] * \
            np.linalg.solve(hp._chol_C_y.T, zb.T).T
        alpha_aux = rng.gamma(hp.eta_x1, 1.0 / hp.eta_x2, size=m)

        if psi_singleton is not None:
            k0, old = psi_singleton
            mu_aux[k0 * m] = old.mu
            tau_aux[k0 * m] = old.tau_x
        if theta_singleton is not None:
            old_pc = theta_singleton.psi[0]
            beta_aux[0] = theta_singleton.beta
            tau_y_aux[0] = theta_singleton.tau_y
            alpha_aux[0] = theta_singleton.alpha_psi
            mu_aux[dt * m] = old_pc.mu
            tau_aux[dt * m] = old_pc.tau_x

        lfx_aux = -0.5 * (p * _LOG_2PI + np.log(tau_aux).sum(axis=1)
                          + ((data.X[i] - mu_aux) ** 2 / tau_aux).sum(axis=1))
        r_aux = data.y[i] - beta_aux @ Xs[i]
        lfy_aux = -0.5 * (_LOG_2PI + np.log(tau_y_aux)
                          + r_aux ** 2 / tau_y_aux)

        cand_log = []
        cand_action = []
        for k, cl in enumerate(state.clusters):
            n_k = cl.n
            log_fy_i = cl.log_fy[i]
            log_nk = math.log(n_k)
            log_denom = math.log(cl.alpha_psi + n_k)
            for j, pc in enumerate(cl.psi):
                cand_log.append(log_nk + math.log(len(pc.members))
                                - log_denom + log_fy_i + pc.log_fx[i])
                cand_action.append(("existing", k, j, None))
            # auxiliary psi atoms for this cluster
            base_w = log_nk + math.log(cl.alpha_psi / m) - log_denom + log_fy_i
            for t in range(m):
                row = k * m + t
                cand_log.append(base_w + lfx_aux[row])
                cand_action.append(("new_psi", k, None,
                                    (mu_aux[row], tau_aux[row])))
        # auxiliary theta clusters
        log_aux_w = math.log(state.alpha_theta / m)
        for s in range(m):
            row = dt * m + s
            cand_log.append(log_aux_w + lfy_aux[s] + lfx_aux[row])
            cand_action.append(("new_theta", None, None,
                                (beta_aux[s], tau_y_aux[s], alpha_aux[s],
                                 mu_aux[row], tau_aux[row])))

        logs = np.array(cand_log)
        gumbel = -np.log(-np.log(rng.random(logs.size)))
        choice = int(np.argmax(logs + gumbel))
        kind, k, j, payload = cand_action[choice]
        if kind == "existing":
            state.clusters[k].psi[j].members.add(i)
        elif kind == "new_psi":
            mu, tau_x = payload
            pc = PsiCluster(mu, tau_x, members=[i])
            pc.refresh(data.X)
            state.clusters[k].psi.append(pc)
        else:
            beta, tau_y, a_psi, mu, tau_x = payload
            cl = ThetaCluster(beta, tau_y, a_psi)
            cl.refresh(Xs, data.y)
            pc = PsiCluster(mu, tau_x, members=[i])
            pc.refresh(data.X)
            cl.psi.append(pc)
            state.clusters.append(cl)


# ---------------------------------------------------------------------------
# parameter and concentration updates
# ---------------------------------------------------------------------------

def pu_update_cluster_params(state: UrnState, data: Dataset,
                             hp: Hyperparameters,
                             rng: np.random.Generator) -> None:
    """Conjugate atom updates restricted to occupied clusters."""
    Xs = data.design_matrix()
    p = data.p
    for cl in state.clusters:
        members = sorted(set().union(*(pc.members for pc in cl.psi)))
        Xk = Xs[members]
        yk = data.y[members]
        A = Xk.T @ Xk + hp.C_y
        mean = np.linalg.solve(A, Xk.T @ yk + hp.C_y @ hp.beta0)
        L = np.linalg.cholesky(A)
        z = rng.standard_normal(p + 1)
        cl.beta = mean + math.sqrt(cl.tau_y) * np.linalg.solve(L.T, z)
        resid = yk - Xk @ cl.beta
        dev = cl.beta - hp.beta0
        rate = hp.b_y + 0.5 * (resid @ resid + dev @ hp.C_y @ dev)
        cl.tau_y = float(sample_inverse_gamma(
            rng, hp.a_y + 0.5 * (len(members) + p + 1), rate))
        cl.refresh(Xs, data.y)
        for pc in cl.psi:
            mem = sorted(pc.members)
            Xm = data.X[mem]
            n_kj = len(mem)
            c_n = n_kj + hp.c_x
            post_mean = (Xm.sum(axis=0) + hp.c_x * hp.m) / c_n
            pc.mu = post_mean + np.sqrt(pc.tau_x / c_n) * rng.standard_normal(p)
            ss = ((Xm - pc.mu) ** 2).sum(axis=0)
            rate = hp.b_x + 0.5 * (ss + hp.c_x * (pc.mu - hp.m) ** 2)
            pc.tau_x = sample_inverse_gamma(rng, hp.a_x + 0.5 * (n_kj + 1), rate)
            pc.refresh(data.X)


def concentration_gibbs_step(alpha: float, n_obs: int, n_clusters: int,
                             shape: float, rate: float,
                             rng: np.random.Generator) -> float:
    """Auxiliary-beta update for a DP concentration with a Gamma prior."""
    eta = rng.beta(alpha + 1.0, n_obs)
    post_rate = rate - math.log(eta)
    odds = (shape + n_clusters - 1.0) / (n_obs * post_rate)
    if rng.random() < odds / (1.0 + odds):
        return float(rng.gamma(shape + n_clusters, 1.0 / post_rate))
    return float(rng.gamma(shape + n_clusters - 1.0, 1.0 / post_rate))


def pu_update_concentrations(state: UrnState, hp: Hyperparameters,
                             rng: np.random.Generator) -> None:
    state.alpha_theta = concentration_gibbs_step(
        state.alpha_theta, state.n, len(state.clusters),
        hp.eta_y1, hp.eta_y2, rng)
    for cl in state.clusters:
        cl.alpha_psi = concentration_gibbs_step(
            cl.alpha_psi, cl.n, len(cl.psi), hp.eta_x1, hp.eta_x2, rng)


def pu_sweep(state: UrnState, data: Dataset, hp: Hyperparameters,
             rng: np.random.Generator) -> None:
    pu_update_assignments(state, data, hp, rng)
    pu_update_cluster_params(state, data, hp, rng)
    pu_update_concentrations(state, hp, rng)


# ---------------------------------------------------------------------------
# snapshots and chain orchestration
# ---------------------------------------------------------------------------

def _implied_sticks(w: np.ndarray) -> np.ndarray:
    """Stick fractions whose product formula reproduces `w`."""
    V = np.empty_like(w)
    rem = 1.0
    for j in range(w.size - 1):
        V[j] = min(w[j] / rem, 1.0) if rem > 1e-300 else 1.0
        rem -= w[j]
    V[-1] = 1.0
    return V


def urn_snapshot(state: UrnState, data: Dataset, hp: Hyperparameters,
                 rng: np.random.Generator) -> GibbsState:
    """Rectangular snapshot of the urn state for shared inference code.

    Occupied clusters carry their urn predictive weights n/(alpha+n); one
    extra slot at each level carries the new-cluster mass with
    base-measure atoms. Unused grid cells get zero weight.
    """
    p = data.p
    d_theta = len(state.clusters)
    N = d_theta + 1
    M = max(max((len(cl.psi) for cl in state.clusters), default=1) + 1, 2)
    n = state.n

    theta_w = np.zeros(N)
    theta_beta = np.zeros((N, p + 1))
    theta_tau = np.ones(N)
    psi_w = np.zeros((N, M))
    psi_mu = np.zeros((N, M, p))
    psi_tau = np.ones((N, M, p))
    alpha_psi = np.zeros(N)

    denom = state.alpha_theta + n
    for k, cl in enumerate(state.clusters):
        theta_w[k] = cl.n / denom
        theta_beta[k] = cl.beta
        theta_tau[k] = cl.tau_y
        alpha_psi[k] = cl.alpha_psi
        nested_denom = cl.alpha_psi + cl.n
        fresh = draw_psi_from_base(hp, rng)
        psi_mu[k, :] = fresh.mu
        psi_tau[k, :] = fresh.tau_x
        for j, pc in enumerate(cl.psi):
            psi_w[k, j] = len(pc.members) / nested_denom
            psi_mu[k, j] = pc.mu
            psi_tau[k, j] = pc.tau_x
        psi_w[k, len(cl.psi)] = cl.alpha_psi / nested_denom

    # new-cluster slot
    th = draw_theta_from_base(hp, rng)
    ps = draw_psi_from_base(hp, rng)
    theta_w[-1] = state.alpha_theta / denom
    theta_beta[-1] = th.beta
    theta_tau[-1] = th.tau_y
    alpha_psi[-1] = float(rng.gamma(hp.eta_x1, 1.0 / hp.eta_x2))
    psi_mu[-1, :] = ps.mu
    psi_tau[-1, :] = ps.tau_x
    psi_w[-1, 0] = 1.0

    K, J = state.labels()
    return GibbsState(
        trunc=Truncation(N, M),
        theta_V=_implied_sticks(theta_w), theta_w=theta_w,
        psi_V=np.array([_implied_sticks(row) for row in psi_w]), psi_w=psi_w,
        theta_beta=theta_beta, theta_tau=theta_tau,
        psi_mu=psi_mu, psi_tau=psi_tau,
        K=K, J=J, alpha_theta=state.alpha_theta, alpha_psi=alpha_psi,
    )


def iter_pu_chain(data: Dataset, hp: Hyperparameters, cfg,
                  rng: np.random.Generator | None = None, m_aux: int = 3):
    """Generate thinned post-burn-in urn draws (cfg is a ChainConfig;
    its truncation settings are ignored)."""
    if rng is None:
        rng = np.random.default_rng(
            np.random.SeedSequence([int(cfg.seed) & (2 ** 63 - 1), 0]))
    state = init_urn_state(data, hp, rng, m_aux=m_aux)
    for b in range(1, cfg.iterations + 1):
        pu_sweep(state, data, hp, rng)
        if b > cfg.burn_in and (b - cfg.burn_in - 1) % cfg.thin == 0:
            yield ChainDraw(iter=b, state=urn_snapshot(state, data, hp, rng),
                            representation="urn")


def run_pu_chain(data: Dataset, hp: Hyperparameters, cfg,
                 rng: np.random.Generator | None = None,
                 m_aux: int = 3) -> Chain:
    chain = Chain()
    for draw in iter_pu_chain(data, hp, cfg, rng=rng, m_aux=m_aux):
        chain.append(draw)
    return chain


def pu_sample_dataset(state: UrnState, data: Dataset,
                      rng: np.random.Generator) -> Dataset:
    """Regenerate (y, X) from the current atoms holding labels fixed."""
    n, p = data.n, data.p
    X = np.empty((n, p))
    y = np.empty(n)
    for cl in state.clusters:
        for pc in cl.psi:
            for i in pc.members:
                X[i] = pc.mu + np.sqrt(pc.tau_x) * rng.standard_normal(p)
                xs = np.concatenate([[1.0], X[i]])
                y[i] = xs @ cl.beta + math.sqrt(cl.tau_y) * rng.standard_normal()
    return Dataset(y=y, X=X)
