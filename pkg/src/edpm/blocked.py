"""Blocked Gibbs sampler for the truncated enriched mixture of normals.

One sweep updates, in order: regression atoms, covariate atoms, cluster
assignments, both stick-weight families, and both concentration
parameters. All conditionals are closed-form conjugate draws.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .bounds import estimate_concentrations, min_truncation
from .chains import Chain, ChainDraw
from .core import (
    Dataset,
    GibbsState,
    Hyperparameters,
    Truncation,
    draw_psi_from_base,
    draw_theta_from_base,
    occupancy_counts,
    sample_inverse_gamma,
    stick_break,
)
from .errors import DomainError, NumericalError

LOG_GUARD = 1e-15  # clamp for 1 - V before taking logs


@dataclass(frozen=True)
class ChainConfig:
    """Run-length, truncation and reproducibility settings for one chain.

    When trunc is None the truncation is resolved automatically: a pilot
    run at (N=10, M=50) estimates the concentration parameters and the
    minimum truncation meeting auto_epsilon is used for the main run.
    """

    iterations: int = 100_000
    burn_in: int = 20_000
    thin: int = 1
    seed: int = 0
    trunc: Truncation | None = None
    auto_epsilon: float = 0.01
    init_policy: str = "prior"  # "prior" or "single"
    pilot_iterations: int = 10_000
    pilot_burn_in: int = 2_000

    def __post_init__(self):
        if self.iterations < 1:
            raise DomainError("iterations must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise DomainError("burn_in must satisfy 0 <= burn_in < iterations")
        if self.thin < 1:
            raise DomainError("thin must be positive")
        if self.init_policy not in ("prior", "single"):
            raise DomainError("init_policy must be 'prior' or 'single'")


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------

def init_state(data: Dataset, hp: Hyperparameters, trunc: Truncation,
               rng: np.random.Generator, init_policy: str = "prior") -> GibbsState:
    """Prior-draw initialization of the full sampler state."""
    N, M, p = trunc.N, trunc.M, data.p
    alpha_theta = float(rng.gamma(hp.eta_y1, 1.0 / hp.eta_y2))
    if hp.alpha_psi_shared:
        alpha_psi = np.full(N, rng.gamma(hp.eta_x1, 1.0 / hp.eta_x2))
    else:
        alpha_psi = rng.gamma(hp.eta_x1, 1.0 / hp.eta_x2, size=N)

    theta_V = np.append(rng.beta(1.0, alpha_theta, size=N - 1), 1.0)
    psi_V = np.column_stack([
        rng.beta(1.0, alpha_psi[:, None], size=(N, M - 1)), np.ones(N)])
    theta_w = stick_break(theta_V)
    psi_w = np.array([stick_break(v) for v in psi_V])

    theta_beta = np.empty((N, p + 1))
    theta_tau = np.empty(N)
    for k in range(N):
        atom = draw_theta_from_base(hp, rng)
        theta_beta[k], theta_tau[k] = atom.beta, atom.tau_y
    psi_mu = np.empty((N, M, p))
    psi_tau = np.empty((N, M, p))
    for k in range(N):
        for j in range(M):
            atom = draw_psi_from_base(hp, rng)
            psi_mu[k, j], psi_tau[k, j] = atom.mu, atom.tau_x

    state = GibbsState(
        trunc=trunc, theta_V=theta_V, theta_w=theta_w, psi_V=psi_V,
        psi_w=psi_w, theta_beta=theta_beta, theta_tau=theta_tau,
        psi_mu=psi_mu, psi_tau=psi_tau,
        K=np.ones(data.n, dtype=int), J=np.ones(data.n, dtype=int),
        alpha_theta=alpha_theta, alpha_psi=alpha_psi,
    )
    if init_policy == "prior":
        state.K, state.J = update_assignments(state, data, rng)
    return state


# ---------------------------------------------------------------------------
# conditional updates
# ---------------------------------------------------------------------------

def update_regression_atoms(state: GibbsState, data: Dataset,
                            hp: Hyperparameters,
                            rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Conjugate update of (beta_k, tau_yk) for every theta-cluster.

    Occupied clusters: beta | tau from the normal-inverse-gamma regression
    conditional, then tau | beta including the prior quadratic term. Empty
    clusters are refreshed from the base measure.
    """
    N, p = state.trunc.N, data.p
    Xs = data.design_matrix()
    beta_new = np.empty((N, p + 1))
    tau_new = np.empty(N)
    for k in range(N):
        members = state.K == k + 1
        n_k = int(members.sum())
        if n_k == 0:
            atom = draw_theta_from_base(hp, rng)
            beta_new[k], tau_new[k] = atom.beta, atom.tau_y
            continue
        Xk = Xs[members]
        yk = data.y[members]
        A = Xk.T @ Xk + hp.C_y
        try:
            L = np.linalg.cholesky(A)
        except np.linalg.LinAlgError:
            raise NumericalError("singular regression precision matrix") from None
        mean = np.linalg.solve(A, Xk.T @ yk + hp.C_y @ hp.beta0)
        z = rng.standard_normal(p + 1)
        beta = mean + np.sqrt(state.theta_tau[k]) * np.linalg.solve(L.T, z)
        resid = yk - Xk @ beta
        dev = beta - hp.beta0
        rate = hp.b_y + 0.5 * (resid @ resid + dev @ hp.C_y @ dev)
        tau = float(sample_inverse_gamma(
            rng, hp.a_y + 0.5 * (n_k + p + 1), rate))
        beta_new[k], tau_new[k] = beta, tau
    return beta_new, tau_new


def update_covariate_atoms(state: GibbsState, data: Dataset,
                           hp: Hyperparameters,
                           rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Conjugate update of (mu, tau_x) for every (theta, psi) cell and
    covariate, vectorized over the whole grid.

    Empty cells are refreshed from the base measure; the random-draw
    pattern is shape-only so runs stay reproducible.
    """
    N, M, p = state.trunc.N, state.trunc.M, data.p
    idx = (state.K - 1) * M + (state.J - 1)
    counts = np.bincount(idx, minlength=N * M).astype(float)
    S = np.zeros((N * M, p))
    SS = np.zeros((N * M, p))
    np.add.at(S, idx, data.X)
    np.add.at(SS, idx, data.X ** 2)
    n_cell = counts.reshape(N, M, 1)
    S = S.reshape(N, M, p)
    SS = SS.reshape(N, M, p)

    empty = n_cell == 0
    z = rng.standard_normal((N, M, p))
    tau_prior = sample_inverse_gamma(rng, hp.a_x, hp.b_x, size=(N, M, p))

    c_n = n_cell + hp.c_x
    post_mean = (S + hp.c_x * hp.m) / c_n
    mu_occ = post_mean + np.sqrt(state.psi_tau / c_n) * z
    mu_emp = hp.m + np.sqrt(tau_prior / hp.c_x) * z
    mu = np.where(empty, mu_emp, mu_occ)

    ss_resid = SS - 2.0 * mu * S + n_cell * mu ** 2
    rate = hp.b_x + 0.5 * (ss_resid + hp.c_x * (mu - hp.m) ** 2)
    shape = hp.a_x + 0.5 * (n_cell + 1.0)
    tau_occ = rate / rng.gamma(shape * np.ones((N, M, p)))
    tau = np.where(empty, tau_prior, tau_occ)
    return mu, tau


def assignment_log_masses(state: GibbsState, data: Dataset) -> np.ndarray:
    """Unnormalized log assignment masses, shape (n, N, M)."""
    N, M = state.trunc.N, state.trunc.M
    Xs = data.design_matrix()
    resid = data.y[:, None] - Xs @ state.theta_beta.T          # (n, N)
    log_py = -0.5 * (np.log(state.theta_tau)[None, :]
                     + resid ** 2 / state.theta_tau[None, :])  # (n, N)

    inv_tau = (1.0 / state.psi_tau).reshape(N * M, -1)         # (NM, p)
    mu = state.psi_mu.reshape(N * M, -1)
    quad = (data.X ** 2) @ inv_tau.T - 2.0 * data.X @ (mu * inv_tau).T
    quad += (mu ** 2 * inv_tau).sum(axis=1)[None, :]           # (n, NM)
    log_px = -0.5 * (np.log(state.psi_tau).reshape(N * M, -1).sum(axis=1)[None, :]
                     + quad)

    with np.errstate(divide="ignore"):
        log_w = (np.log(state.theta_w)[:, None] + np.log(state.psi_w))
    total = log_w.reshape(1, N * M) + log_px
    total += np.repeat(log_py, M, axis=1)
    return total.reshape(-1, N, M)


def update_assignments(state: GibbsState, data: Dataset,
                       rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Joint categorical draw of (K_i, J_i) over the N x M grid per
    observation, computed in the log domain with max subtraction."""
    M = state.trunc.M
    total = assignment_log_masses(state, data).reshape(data.n, -1)
    top = total.max(axis=1)
    if not np.isfinite(top).all():
        raise NumericalError("all assignment masses underflowed")
    probs = np.exp(total - top[:, None])
    csum = np.cumsum(probs, axis=1)
    u = rng.random(data.n) * csum[:, -1]
    idx = (csum < u[:, None]).sum(axis=1)
    return (idx // M + 1).astype(int), (idx % M + 1).astype(int)


def update_theta_weights(state: GibbsState, hp: Hyperparameters,
                         rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Beta draws V_k ~ Beta(n_k + 1, alpha + sum_{h>k} n_h), last stick 1."""
    N = state.trunc.N
    n_k, _ = occupancy_counts(state.K, state.J, state.trunc)
    above = np.concatenate([np.cumsum(n_k[::-1])[::-1][1:], [0.0]])
    V = np.empty(N)
    V[:-1] = rng.beta(n_k[:-1] + 1.0, state.alpha_theta + above[:-1])
    V[-1] = 1.0
    return V, stick_break(V)


def update_psi_weights(state: GibbsState, hp: Hyperparameters,
                       rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Per theta-cluster nested stick draws from the analogous Betas."""
    N, M = state.trunc.N, state.trunc.M
    _, n_kj = occupancy_counts(state.K, state.J, state.trunc)
    above = np.concatenate(
        [np.cumsum(n_kj[:, ::-1], axis=1)[:, ::-1][:, 1:],
         np.zeros((N, 1))], axis=1)
    V = np.empty((N, M))
    V[:, :-1] = rng.beta(n_kj[:, :-1] + 1.0,
                         state.alpha_psi[:, None] + above[:, :-1])
    V[:, -1] = 1.0
    w = V.copy()
    w[:, 1:] *= np.cumprod(1.0 - V[:, :-1], axis=1)
    return V, w


def update_concentration_theta(state: GibbsState, hp: Hyperparameters,
                               rng: np.random.Generator) -> float:
    """Gamma draw for alpha_theta given the stick fractions."""
    log_tail = np.log(np.maximum(1.0 - state.theta_V[:-1], LOG_GUARD))
    shape = state.trunc.N + hp.eta_y1 - 1.0
    rate = hp.eta_y2 - log_tail.sum()
    return float(rng.gamma(shape, 1.0 / rate))


def update_concentration_psi(state: GibbsState, hp: Hyperparameters,
                             rng: np.random.Generator) -> np.ndarray:
    """Gamma draws for the nested concentrations, per cluster or pooled."""
    N, M = state.trunc.N, state.trunc.M
    log_tail = np.log(np.maximum(1.0 - state.psi_V[:, :-1], LOG_GUARD))
    if hp.alpha_psi_shared:
        shape = N * (M - 1) + hp.eta_x1 - 1.0
        rate = hp.eta_x2 - log_tail.sum()
        return np.full(N, rng.gamma(shape, 1.0 / rate))
    shape = M + hp.eta_x1 - 1.0
    rates = hp.eta_x2 - log_tail.sum(axis=1)
    return rng.gamma(shape, 1.0 / rates)


def sweep(state: GibbsState, data: Dataset, hp: Hyperparameters,
          rng: np.random.Generator) -> None:
    """One full in-place Gibbs sweep in the listed update order."""
    state.theta_beta, state.theta_tau = update_regression_atoms(
        state, data, hp, rng)
    state.psi_mu, state.psi_tau = update_covariate_atoms(state, data, hp, rng)
    state.K, state.J = update_assignments(state, data, rng)
    state.theta_V, state.theta_w = update_theta_weights(state, hp, rng)
    state.psi_V, state.psi_w = update_psi_weights(state, hp, rng)
    state.alpha_theta = update_concentration_theta(state, hp, rng)
    state.alpha_psi = update_concentration_psi(state, hp, rng)


def snapshot(state: GibbsState) -> GibbsState:
    return GibbsState(
        trunc=state.trunc,
        theta_V=state.theta_V.copy(), theta_w=state.theta_w.copy(),
        psi_V=state.psi_V.copy(), psi_w=state.psi_w.copy(),
        theta_beta=state.theta_beta.copy(), theta_tau=state.theta_tau.copy(),
        psi_mu=state.psi_mu.copy(), psi_tau=state.psi_tau.copy(),
        K=state.K.copy(), J=state.J.copy(),
        alpha_theta=state.alpha_theta, alpha_psi=state.alpha_psi.copy(),
    )


# ---------------------------------------------------------------------------
# chain orchestration
# ---------------------------------------------------------------------------

def resolve_truncation(data: Dataset, hp: Hyperparameters,
                       cfg: ChainConfig) -> Truncation:
    """Return cfg.trunc, or run the pilot and pick the minimum truncation."""
    if cfg.trunc is not None:
        return cfg.trunc
    pilot_cfg = replace(
        cfg, trunc=Truncation(10, 50), iterations=cfg.pilot_iterations,
        burn_in=cfg.pilot_burn_in, thin=1)
    pilot_rng = np.random.default_rng(
        np.random.SeedSequence([int(cfg.seed) & (2 ** 63 - 1), 1]))
    pilot = run_chain(data, hp, pilot_cfg, rng=pilot_rng)
    a_theta, a_psi_max = estimate_concentrations(pilot)
    N, M = min_truncation(data.n, a_theta, a_psi_max, cfg.auto_epsilon)
    return Truncation(max(N, 2), max(M, 2))


def iter_chain(data: Dataset, hp: Hyperparameters, cfg: ChainConfig,
               rng: np.random.Generator | None = None):
    """Generate thinned post-burn-in draws without retaining them.

    cfg.trunc must already be resolved (iter_chain does not run pilots).
    """
    if cfg.trunc is None:
        raise DomainError("iter_chain requires a resolved truncation")
    if rng is None:
        rng = np.random.default_rng(
            np.random.SeedSequence([int(cfg.seed) & (2 ** 63 - 1), 0]))
    state = init_state(data, hp, cfg.trunc, rng, cfg.init_policy)
    for b in range(1, cfg.iterations + 1):
        sweep(state, data, hp, rng)
        if not np.isfinite(state.alpha_theta):
            raise NumericalError(f"non-finite state at iteration {b}")
        if b > cfg.burn_in and (b - cfg.burn_in - 1) % cfg.thin == 0:
            snap = snapshot(state)
            snap.validate()
            yield ChainDraw(iter=b, state=snap, representation="truncated")


def run_chain(data: Dataset, hp: Hyperparameters, cfg: ChainConfig,
              rng: np.random.Generator | None = None) -> Chain:
    """Run the sampler and collect all emitted draws in memory."""
    if cfg.trunc is None:
        cfg = replace(cfg, trunc=resolve_truncation(data, hp, cfg))
    chain = Chain()
    for draw in iter_chain(data, hp, cfg, rng=rng):
        chain.append(draw)
    return chain


def sample_dataset_from_state(state: GibbsState, n: int,
                              rng: np.random.Generator) -> Dataset:
    """Generate (y, X) from the truncated mixture held in `state`,
    redrawing the assignment labels from the current weights in place."""
    M = state.trunc.M
    flat_w = (state.theta_w[:, None] * state.psi_w).reshape(-1)
    idx = rng.choice(flat_w.size, size=n, p=flat_w / flat_w.sum())
    K, J = idx // M + 1, idx % M + 1
    mu = state.psi_mu[K - 1, J - 1]
    tau_x = state.psi_tau[K - 1, J - 1]
    X = mu + np.sqrt(tau_x) * rng.standard_normal(mu.shape)
    Xs = np.column_stack([np.ones(n), X])
    mean_y = (Xs * state.theta_beta[K - 1]).sum(axis=1)
    y = mean_y + np.sqrt(state.theta_tau[K - 1]) * rng.standard_normal(n)
    state.K, state.J = K.astype(int), J.astype(int)
    return Dataset(y=y, X=X)
