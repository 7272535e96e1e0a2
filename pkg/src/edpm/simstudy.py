"""Synthetic two-line benchmark: data generation, ground truth, and the
accuracy / mixing evaluation protocols.

The response is a two-component mixture of regression lines in x_1 whose
mixing weight moves smoothly from one line to the other; the remaining
covariates are correlated noise arranged in two blocks.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .blocked import ChainConfig, iter_chain, resolve_truncation
from .core import Dataset, Truncation, default_hyperparameters
from .errors import DomainError, MatrixError
from .predict import conditional_mean, prediction_errors, predictive_values
from .urn import iter_pu_chain


@dataclass(frozen=True)
class DgpConfig:
    """Data-generating process for the benchmark."""

    p: int = 5
    n: int = 200
    beta1: tuple = (0.0, 1.0)
    sigma1_sq: float = 1.0 / 16.0
    beta2: tuple = (4.5, 0.1)
    sigma2_sq: float = 1.0 / 8.0
    mu1: float = 4.0
    mu2: float = 6.0
    omega1: float = 2.0
    omega2: float = 2.0
    x_mean: float = 4.0
    x_var: float = 4.0
    x_cov: float = 3.5

    def __post_init__(self):
        if self.p < 1 or self.n < 1:
            raise DomainError("p and n must be positive")
        try:
            np.linalg.cholesky(covariance_matrix(self))
        except np.linalg.LinAlgError:
            raise MatrixError(
                f"covariate covariance not positive definite for p={self.p}"
            ) from None


def covariance_matrix(cfg: DgpConfig) -> np.ndarray:
    """Two-block covariance: variance 4 on the diagonal, 3.5 within the
    block {1, 2, 4, 6, ...} and within the block {3, 5, 7, ...}."""
    sigma = np.zeros((cfg.p, cfg.p))
    idx = np.arange(1, cfg.p + 1)
    block_a = (idx == 1) | (idx % 2 == 0)
    for block in (block_a, ~block_a):
        members = np.where(block)[0]
        for h in members:
            for l in members:
                sigma[h, l] = cfg.x_cov
    np.fill_diagonal(sigma, cfg.x_var)
    return sigma


def mixing_weight(x1: float, cfg: DgpConfig = DgpConfig()) -> float:
    """Probability of the first regression line at covariate value x1."""
    a = cfg.omega1 * np.exp(-0.5 * cfg.omega1 * (np.asarray(x1) - cfg.mu1) ** 2)
    b = cfg.omega2 * np.exp(-0.5 * cfg.omega2 * (np.asarray(x1) - cfg.mu2) ** 2)
    with np.errstate(invalid="ignore"):
        w = np.where(a + b > 0.0, a / (a + b),
                     np.asarray(x1) < 0.5 * (cfg.mu1 + cfg.mu2))
    return float(w) if np.isscalar(x1) else w


def true_conditional_mean(x1, cfg: DgpConfig = DgpConfig()):
    """Ground-truth E(y | x1) under the generating mixture."""
    w = mixing_weight(x1, cfg)
    x1 = np.asarray(x1, dtype=float)
    line1 = cfg.beta1[0] + cfg.beta1[1] * x1
    line2 = cfg.beta2[0] + cfg.beta2[1] * x1
    out = w * line1 + (1.0 - w) * line2
    return float(out) if out.ndim == 0 else out


def generate_covariates(cfg: DgpConfig, rng: np.random.Generator) -> np.ndarray:
    sigma = covariance_matrix(cfg)
    try:
        L = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise MatrixError("covariance factorization failed") from None
    return cfg.x_mean + rng.standard_normal((cfg.n, cfg.p)) @ L.T


def generate_response(X: np.ndarray, cfg: DgpConfig,
                      rng: np.random.Generator) -> np.ndarray:
    x1 = X[:, 0]
    w = mixing_weight(x1, cfg)
    branch1 = rng.random(X.shape[0]) < w
    mean = np.where(branch1,
                    cfg.beta1[0] + cfg.beta1[1] * x1,
                    cfg.beta2[0] + cfg.beta2[1] * x1)
    sd = np.where(branch1, math.sqrt(cfg.sigma1_sq), math.sqrt(cfg.sigma2_sq))
    return mean + sd * rng.standard_normal(X.shape[0])


def generate_dataset(cfg: DgpConfig, rng: np.random.Generator) -> Dataset:
    X = generate_covariates(cfg, rng)
    return Dataset(y=generate_response(X, cfg, rng), X=X)


def figure_grid(cfg: DgpConfig, n_points: int = 20,
                x1_range: tuple = (-0.5, 8.0)) -> np.ndarray:
    """Evaluation grid: x1 evenly spaced, other covariates at their
    conditional mean given x1 under the generating covariance."""
    x1 = np.linspace(x1_range[0], x1_range[1], n_points)
    X = np.full((n_points, cfg.p), cfg.x_mean)
    sigma = covariance_matrix(cfg)
    slope = sigma[1:, 0] / sigma[0, 0]
    X[:, 0] = x1
    X[:, 1:] = cfg.x_mean + (x1 - cfg.x_mean)[:, None] * slope
    return X


# ---------------------------------------------------------------------------
# mixing diagnostics
# ---------------------------------------------------------------------------

_STAT_NAMES = ("mean", "q025", "q25", "q75", "q975")


def batch_stats_from_values(values: np.ndarray, batch_size: int = 100) -> dict:
    """Batched summary variability of per-draw values.

    `values` has one row per draw and one column per subject. Each batch of
    rows yields the mean and four quantiles per subject; per subject and
    statistic the mean and SD across batches are taken, then averaged over
    subjects. Returns {statistic: (mean, sd)}.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise DomainError("values must be draws x subjects")
    n_batches = values.shape[0] // batch_size
    if n_batches < 2:
        raise DomainError("need at least two full batches of draws")
    trimmed = values[: n_batches * batch_size]
    batches = trimmed.reshape(n_batches, batch_size, values.shape[1])
    per_batch = {
        "mean": batches.mean(axis=1),
        "q025": np.quantile(batches, 0.025, axis=1),
        "q25": np.quantile(batches, 0.25, axis=1),
        "q75": np.quantile(batches, 0.75, axis=1),
        "q975": np.quantile(batches, 0.975, axis=1),
    }
    out = {}
    for name in _STAT_NAMES:
        b = per_batch[name]  # (n_batches, subjects)
        out[name] = (float(b.mean(axis=0).mean()),
                     float(b.std(axis=0, ddof=1).mean()))
    return out


def batch_mixing_stats(chain, data: Dataset, batch_size: int = 100) -> dict:
    """Mixing table cell: batched variability of E(y | x_i) per subject."""
    values = predictive_values(chain, data.X)
    return batch_stats_from_values(values, batch_size=batch_size)


# ---------------------------------------------------------------------------
# study orchestration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StudyConfig:
    """One full accuracy/mixing study."""

    p_values: tuple = (5,)
    n_datasets: int = 2
    n: int = 200
    m_test: int = 200
    samplers: tuple = ("blocked-large", "blocked-auto")
    iterations: int = 20_000
    burn_in: int = 5_000
    thin: int = 1
    batch_size: int = 100
    seed: int = 0
    epsilon: float = 0.01
    large_trunc: tuple = (10, 50)
    include_mixing: bool = False
    figure_points: int = 20

    def __post_init__(self):
        known = {"blocked-large", "blocked-auto", "polya"}
        bad = set(self.samplers) - known
        if bad:
            raise DomainError(f"unknown samplers: {sorted(bad)}")
        if self.n_datasets < 1:
            raise DomainError("n_datasets must be positive")


def _fit_values(sampler: str, data: Dataset, hp, scfg: StudyConfig,
                seed: int, X_eval: np.ndarray):
    """Fit one sampler on one dataset; per-draw conditional means at
    X_eval plus the truncation actually used (None for the urn)."""
    cfg = ChainConfig(iterations=scfg.iterations, burn_in=scfg.burn_in,
                      thin=scfg.thin, seed=seed, auto_epsilon=scfg.epsilon)
    if sampler == "polya":
        draws = iter_pu_chain(data, hp, cfg)
        return predictive_values(draws, X_eval), None
    if sampler == "blocked-large":
        trunc = Truncation(*scfg.large_trunc)
    else:
        trunc = resolve_truncation(data, hp, cfg)
    cfg = ChainConfig(iterations=scfg.iterations, burn_in=scfg.burn_in,
                      thin=scfg.thin, seed=seed, trunc=trunc)
    draws = iter_chain(data, hp, cfg)
    return predictive_values(draws, X_eval), (trunc.N, trunc.M)


def run_study(scfg: StudyConfig) -> dict:
    """Full accuracy (and optionally mixing) study report as plain dicts."""
    report = {"config": asdict(scfg), "cells": [], "accuracy": {},
              "mixing": {}, "figure": {}}
    root_ss = np.random.SeedSequence(scfg.seed)
    for p in scfg.p_values:
        dgp = DgpConfig(p=p, n=scfg.n)
        errs = {s: {"l1": [], "l2": []} for s in scfg.samplers}
        mix_cells = {s: [] for s in scfg.samplers}
        fig_cells = {s: [] for s in scfg.samplers}
        grid = figure_grid(dgp, n_points=scfg.figure_points)
        for d in range(scfg.n_datasets):
            ss = np.random.SeedSequence([scfg.seed, p, d])
            data_rng = np.random.default_rng(ss)
            data = generate_dataset(dgp, data_rng)
            test_cfg = DgpConfig(p=p, n=scfg.m_test)
            X_test = generate_covariates(test_cfg, data_rng)
            truth = true_conditional_mean(X_test[:, 0], dgp)
            hp = default_hyperparameters(data)
            X_eval = np.vstack([X_test, grid, data.X]) \
                if scfg.include_mixing else np.vstack([X_test, grid])
            for s_idx, sampler in enumerate(scfg.samplers):
                chain_seed = int(root_ss.generate_state(1)[0] >> 1) \
                    + 1000 * d + s_idx
                values, trunc = _fit_values(sampler, data, hp, scfg,
                                            chain_seed, X_eval)
                est = values[:, :scfg.m_test].mean(axis=0)
                l1, l2 = prediction_errors(est, truth)
                errs[sampler]["l1"].append(l1)
                errs[sampler]["l2"].append(l2)
                cell = {"p": p, "dataset": d, "sampler": sampler,
                        "trunc": trunc, "l1": l1, "l2": l2}
                report["cells"].append(cell)
                fig_vals = values[:, scfg.m_test:scfg.m_test + len(grid)]
                fig_cells[sampler].append({
                    "x1": grid[:, 0].tolist(),
                    "mean": fig_vals.mean(axis=0).tolist(),
                    "q025": np.quantile(fig_vals, 0.025, axis=0).tolist(),
                    "q975": np.quantile(fig_vals, 0.975, axis=0).tolist(),
                })
                if scfg.include_mixing:
                    subj = values[:, scfg.m_test + len(grid):]
                    mix_cells[sampler].append(
                        batch_stats_from_values(subj, scfg.batch_size))
        acc = {}
        for sampler in scfg.samplers:
            l1 = np.array(errs[sampler]["l1"])
            l2 = np.array(errs[sampler]["l2"])
            acc[sampler] = {
                "l1_mean": float(l1.mean()), "l2_mean": float(l2.mean()),
                "l1_sd": float(l1.std(ddof=1)) if l1.size > 1 else 0.0,
                "l2_sd": float(l2.std(ddof=1)) if l2.size > 1 else 0.0,
            }
        report["accuracy"][str(p)] = acc
        report["figure"][str(p)] = fig_cells
        if scfg.include_mixing:
            report["mixing"][str(p)] = {
                s: {
                    stat: {
                        "mean": float(np.mean([c[stat][0] for c in cells])),
                        "sd": float(np.mean([c[stat][1] for c in cells])),
                    }
                    for stat in _STAT_NAMES
                }
                for s, cells in mix_cells.items() if cells
            }
    return report
