import math

import numpy as np
import pytest
from oracles import (batch_means_stderr, nig_location_posterior,
                     nig_regression_posterior)
from scipy.integrate import quad
from scipy.special import gammaln

from edpm.core import Dataset, Hyperparameters
from edpm.blocked import ChainConfig
from edpm.errors import DomainError
from edpm.urn import (PsiCluster, ThetaCluster, UrnState,
                      concentration_gibbs_step, init_urn_state,
                      pu_sample_dataset, pu_sweep, pu_update_cluster_params,
                      run_pu_chain, urn_snapshot)


def _hp(p=1, c_x=1.0, m=0.0):
    return Hyperparameters(beta0=np.zeros(p + 1), C_y=np.eye(p + 1),
                           a_y=3.0, b_y=2.0, m=np.full(p, m),
                           c_x=np.full(p, c_x), a_x=3.0, b_x=2.0)


def _fixed_state(memberships, p=1):
    """UrnState with given nested membership lists and unit atoms."""
    clusters = []
    for groups in memberships:
        cl = ThetaCluster(np.zeros(p + 1), 1.0, alpha_psi=1.0)
        for members in groups:
            cl.psi.append(PsiCluster(np.zeros(p), np.ones(p), members))
        clusters.append(cl)
    return UrnState(clusters=clusters, alpha_theta=1.0)


# ---------------------------------------------------------------------------
# state construction and consistency
# ---------------------------------------------------------------------------

def test_init_urn_state_single_pair(small_data, small_hp, rng):
    state = init_urn_state(small_data, small_hp, rng)
    assert len(state.clusters) == 1
    assert len(state.clusters[0].psi) == 1
    assert state.n == small_data.n
    state.check_consistent()
    K, J = state.labels()
    assert (K == 1).all() and (J == 1).all()


def test_init_urn_state_rejects_bad_m_aux(small_data, small_hp, rng):
    with pytest.raises(DomainError):
        init_urn_state(small_data, small_hp, rng, m_aux=0)


def test_check_consistent_detects_corruption():
    state = _fixed_state([[{0, 1}], [{2}]])
    state.check_consistent()
    state.clusters[1].psi[0].members = {1}  # duplicated observation
    with pytest.raises(DomainError):
        state.check_consistent()
    state.clusters[1].psi[0].members = set()
    with pytest.raises(DomainError):
        state.check_consistent()


def test_sweeps_preserve_consistency(small_data, small_hp, rng):
    state = init_urn_state(small_data, small_hp, rng)
    for _ in range(10):
        pu_sweep(state, small_data, small_hp, rng)
        state.check_consistent()
        assert state.alpha_theta > 0
        assert all(cl.alpha_psi > 0 for cl in state.clusters)


def test_single_observation_dataset(rng):
    data = Dataset(y=np.array([0.3]), X=np.array([[1.2]]))
    hp = _hp()
    state = init_urn_state(data, hp, rng)
    for _ in range(20):
        pu_sweep(state, data, hp, rng)
        state.check_consistent()
        assert len(state.clusters) == 1 and len(state.clusters[0].psi) == 1


# ---------------------------------------------------------------------------
# parameter updates: Gibbs stationarity against the exact NIG posteriors
# ---------------------------------------------------------------------------

def test_cluster_params_match_nig_posteriors(tiny_data, rng):
    hp = _hp(p=1, c_x=2.0, m=-1.0)
    state = _fixed_state([[{0, 1}, {2}]])
    state.refresh_likelihoods(tiny_data)
    Xs = tiny_data.design_matrix()
    reg_ref = nig_regression_posterior(tiny_data.y, Xs, hp.beta0, hp.C_y,
                                       hp.a_y, hp.b_y)
    loc_ref = nig_location_posterior(tiny_data.X[[0, 1], 0], -1.0, 2.0,
                                     hp.a_x, hp.b_x)
    n_keep, burn = 6000, 500
    betas = np.empty((n_keep, 2))
    taus = np.empty(n_keep)
    mus = np.empty(n_keep)
    txs = np.empty(n_keep)
    for i in range(burn + n_keep):
        pu_update_cluster_params(state, tiny_data, hp, rng)
        if i >= burn:
            cl = state.clusters[0]
            betas[i - burn] = cl.beta
            taus[i - burn] = cl.tau_y
            mus[i - burn] = cl.psi[0].mu[0]
            txs[i - burn] = cl.psi[0].tau_x[0]
    for l in range(2):
        se = batch_means_stderr(betas[:, l])
        assert abs(betas[:, l].mean() - reg_ref["beta_mean"][l]) < 5 * se
    assert abs(taus.mean() - reg_ref["tau_mean"]) < 5 * batch_means_stderr(taus)
    assert abs(mus.mean() - loc_ref["mu_mean"]) < 5 * batch_means_stderr(mus)
    assert abs(txs.mean() - loc_ref["tau_mean"]) < 5 * batch_means_stderr(txs)


# ---------------------------------------------------------------------------
# concentration update
# ---------------------------------------------------------------------------

def test_concentration_step_preserves_prior(rng):
    # with n = 1 and one cluster the partition likelihood is flat in alpha,
    # so the stationary law is the Gamma(1, 1) prior itself
    draws = np.empty(40_000)
    alpha = 1.0
    for i in range(draws.size):
        alpha = concentration_gibbs_step(alpha, 1, 1, 1.0, 1.0, rng)
        draws[i] = alpha
    assert abs(draws.mean() - 1.0) < 5 * batch_means_stderr(draws)
    assert abs((draws > 1.0).mean() - math.exp(-1.0)) < 0.02


def test_concentration_step_matches_quadrature_posterior(rng):
    # exact posterior for n = 10, d = 3 under a Gamma(1, 1) prior:
    # p(alpha) proportional to alpha^3 Gamma(alpha)/Gamma(alpha+10) e^{-alpha}
    n_obs, d, a, b = 10, 3, 1.0, 1.0

    def dens(alpha):
        return math.exp((a + d - 1.0) * math.log(alpha) - b * alpha
                        + gammaln(alpha) - gammaln(alpha + n_obs))

    z, _ = quad(dens, 0.0, 60.0)
    mean_ref = quad(lambda t: t * dens(t), 0.0, 60.0)[0] / z
    draws = np.empty(40_000)
    alpha = 1.0
    for i in range(draws.size):
        alpha = concentration_gibbs_step(alpha, n_obs, d, a, b, rng)
        draws[i] = alpha
    assert abs(draws.mean() - mean_ref) < 5 * batch_means_stderr(draws)


# ---------------------------------------------------------------------------
# snapshots and chain orchestration
# ---------------------------------------------------------------------------

def test_urn_snapshot_structure(small_data, small_hp, rng):
    state = init_urn_state(small_data, small_hp, rng)
    for _ in range(5):
        pu_sweep(state, small_data, small_hp, rng)
    snap = urn_snapshot(state, small_data, small_hp, rng)
    snap.validate()
    d = len(state.clusters)
    assert snap.trunc.N == d + 1
    # occupied weights are the urn predictive masses n_k / (alpha + n)
    denom = state.alpha_theta + small_data.n
    for k, cl in enumerate(state.clusters):
        assert math.isclose(snap.theta_w[k], cl.n / denom)
        assert np.array_equal(snap.theta_beta[k], cl.beta)
    assert math.isclose(snap.theta_w[d], state.alpha_theta / denom)
    assert np.allclose(snap.psi_w.sum(axis=1), 1.0)
    K, J = state.labels()
    assert np.array_equal(snap.K, K) and np.array_equal(snap.J, J)


def test_run_pu_chain_bookkeeping_and_determinism(small_data, small_hp):
    cfg = ChainConfig(iterations=10, burn_in=4, thin=2, seed=5)
    a = run_pu_chain(small_data, small_hp, cfg)
    b = run_pu_chain(small_data, small_hp, cfg)
    assert [d.iter for d in a] == [5, 7, 9]
    assert all(d.representation == "urn" for d in a)
    for da, db in zip(a, b):
        assert da.state.alpha_theta == db.state.alpha_theta
        assert np.array_equal(da.state.theta_w, db.state.theta_w)
        assert np.array_equal(da.state.psi_mu, db.state.psi_mu)


def test_pu_sample_dataset_point_mass(tiny_data, rng):
    state = _fixed_state([[{0, 1, 2}]])
    cl = state.clusters[0]
    cl.beta = np.array([2.0, 0.0])
    cl.tau_y = 1e-12
    pc = cl.psi[0]
    pc.mu = np.array([3.0])
    pc.tau_x = np.array([1e-12])
    out = pu_sample_dataset(state, tiny_data, rng)
    assert out.n == tiny_data.n
    assert np.allclose(out.X, 3.0, atol=1e-4)
    assert np.allclose(out.y, 2.0, atol=1e-4)
