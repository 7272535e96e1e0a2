"""Shared domain types and pure constructions.

Datasets, truncation levels, base-measure hyperparameters, stick-breaking
weights and the full sampler state used by both MCMC algorithms.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InvalidStickError, MatrixError, NumericalError

PROB_TOL = 1e-12  # absolute tolerance for probability-vector normalization


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Dataset:
    """Response vector and covariate matrix (no intercept column)."""

    y: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2:
            raise DomainError("X must be a 2-d matrix")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise DomainError("row count of X must equal length of y")
        if y.shape[0] < 1 or X.shape[1] < 1:
            raise DomainError("dataset must be non-empty with p >= 1")
        if not (np.isfinite(y).all() and np.isfinite(X).all()):
            raise DomainError("dataset entries must be finite")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def design_matrix(self) -> np.ndarray:
        """Covariate rows with a constant 1 prepended (intercept is index 0)."""
        return np.column_stack([np.ones(self.n), self.X])

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        """Read a dataset from CSV with header row `y,x1,...,xp`.

        Parsing is strict: every field must be a finite number.
        """
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DomainError(f"{path}: empty file") from None
            p = len(header) - 1
            expected = ["y"] + [f"x{l}" for l in range(1, p + 1)]
            if header != expected or p < 1:
                raise DomainError(
                    f"{path}: header must be y,x1,...,xp, got {header!r}")
            rows = []
            for lineno, row in enumerate(reader, start=2):
                if len(row) != p + 1:
                    raise DomainError(f"{path}:{lineno}: expected {p + 1} fields")
                try:
                    vals = [float(v) for v in row]
                except ValueError:
                    raise DomainError(
                        f"{path}:{lineno}: non-numeric field") from None
                if not all(np.isfinite(vals)):
                    raise DomainError(f"{path}:{lineno}: non-finite value")
                rows.append(vals)
        if not rows:
            raise DomainError(f"{path}: no data rows")
        arr = np.array(rows)
        return cls(y=arr[:, 0], X=arr[:, 1:])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["y"] + [f"x{l}" for l in range(1, self.p + 1)])
            for i in range(self.n):
                writer.writerow([repr(float(self.y[i]))]
                                + [repr(float(v)) for v in self.X[i]])


# ---------------------------------------------------------------------------
# truncation and hyperparameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Truncation:
    """Truncation levels for the two stick-breaking families.

    N is the number of regression (theta) clusters, M the number of
    covariate (psi) clusters nested in each. A truncation of 1 degenerates
    the Beta draws, so both must be at least 2.
    """

    N: int
    M: int

    def __post_init__(self):
        if int(self.N) != self.N or int(self.M) != self.M:
            raise DomainError("N and M must be integers")
        if self.N < 2 or self.M < 2:
            raise DomainError("truncation levels must be >= 2")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "M", int(self.M))


@dataclass(frozen=True)
class Hyperparameters:
    """Base-measure and hyperprior constants.

    The regression atom prior is normal-inverse-gamma:
    tau_y ~ IG(a_y, b_y), beta | tau_y ~ N(beta0, tau_y * C_y^{-1}).
    Each covariate atom prior is, per covariate l:
    tau_xl ~ IG(a_x, b_x), mu_l | tau_xl ~ N(m_l, tau_xl / c_xl).
    Gamma(eta_y1, eta_y2) and Gamma(eta_x1, eta_x2) are the hyperpriors on
    the two concentration parameters (shape-rate parameterization).
    """

    beta0: np.ndarray
    C_y: np.ndarray
    a_y: float
    b_y: float
    m: np.ndarray
    c_x: np.ndarray
    a_x: float
    b_x: float
    eta_y1: float = 1.0
    eta_y2: float = 1.0
    eta_x1: float = 1.0
    eta_x2: float = 1.0
    alpha_psi_shared: bool = False
    # Cholesky factor of C_y, computed once at construction.
    _chol_C_y: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        beta0 = np.asarray(self.beta0, dtype=float)
        C_y = np.asarray(self.C_y, dtype=float)
        m = np.asarray(self.m, dtype=float)
        c_x = np.asarray(self.c_x, dtype=float)
        if beta0.ndim != 1:
            raise DomainError("beta0 must be a vector")
        if C_y.shape != (beta0.size, beta0.size):
            raise MatrixError("C_y must be (p+1)x(p+1) to match beta0")
        if not np.allclose(C_y, C_y.T):
            raise MatrixError("C_y must be symmetric")
        try:
            chol = np.linalg.cholesky(C_y)
        except np.linalg.LinAlgError:
            raise MatrixError("C_y must be positive definite") from None
        if m.shape != c_x.shape or m.ndim != 1:
            raise DomainError("m and c_x must be vectors of length p")
        if not (c_x > 0).all():
            raise DomainError("c_x entries must be positive")
        for name in ("a_y", "b_y", "a_x", "b_x",
                     "eta_y1", "eta_y2", "eta_x1", "eta_x2"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be strictly positive")
        object.__setattr__(self, "beta0", beta0)
        object.__setattr__(self, "C_y", C_y)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "c_x", c_x)
        object.__setattr__(self, "_chol_C_y", chol)

    @property
    def p(self) -> int:
        return self.m.size


def default_hyperparameters(data: Dataset,
                            alpha_psi_shared: bool = False) -> Hyperparameters:
    """Data-driven default base measure.

    beta0 is the least-squares fit, C_y the unit-information precision
    (1/n) X*'X*, the covariate prior is centered at the sample means with
    c_xl = 0.5 / var(x_l), and all inverse-gamma shapes/rates are 2.
    """
    Xs = data.design_matrix()
    beta0, *_ = np.linalg.lstsq(Xs, data.y, rcond=None)
    C_y = Xs.T @ Xs / data.n
    var_x = data.X.var(axis=0, ddof=1)
    if not (var_x > 0).all():
        raise DomainError("covariates must have positive sample variance")
    return Hyperparameters(
        beta0=beta0, C_y=C_y, a_y=2.0, b_y=2.0,
        m=data.X.mean(axis=0), c_x=0.5 / var_x, a_x=2.0, b_x=2.0,
        alpha_psi_shared=alpha_psi_shared,
    )


# ---------------------------------------------------------------------------
# stick-breaking
# ---------------------------------------------------------------------------

def stick_break(V) -> np.ndarray:
    """Map stick fractions to weights: w_k = V_k * prod_{h<k}(1 - V_h).

    V must have length >= 2, entries in [0, 1], and last entry exactly 1,
    so the weights form a probability vector.
    """
    V = np.asarray(V, dtype=float)
    if V.ndim != 1 or V.size < 2:
        raise DomainError("V must be a vector of length >= 2")
    if ((V < 0) | (V > 1)).any() or not np.isfinite(V).all():
        raise DomainError("stick entries must lie in [0, 1]")
    if V[-1] != 1.0:
        raise InvalidStickError("last stick entry must be exactly 1")
    w = V.copy()
    w[1:] *= np.cumprod(1.0 - V[:-1])
    return w


@dataclass(frozen=True)
class StickWeights:
    """A stick vector together with the weights it induces."""

    V: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        V = np.asarray(self.V, dtype=float)
        w = np.asarray(self.w, dtype=float)
        if V.shape != w.shape:
            raise DomainError("V and w must have the same length")
        expected = stick_break(V)
        if (w < 0).any() or np.max(np.abs(w - expected)) > 1e-9:
            raise InvalidStickError("w is inconsistent with the product formula")
        if abs(w.sum() - 1.0) > 1e-9:
            raise InvalidStickError("weights must sum to 1")
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "w", w)

    @classmethod
    def from_sticks(cls, V) -> "StickWeights":
        V = np.asarray(V, dtype=float)
        return cls(V=V, w=stick_break(V))

    def __len__(self) -> int:
        return self.V.size


# ---------------------------------------------------------------------------
# atoms and base-measure draws
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThetaAtom:
    """Regression-cluster parameters: coefficients (intercept first) and
    response variance."""

    beta: np.ndarray
    tau_y: float

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        if beta.ndim != 1:
            raise DomainError("beta must be a vector")
        if not self.tau_y > 0:
            raise DomainError("tau_y must be positive")
        object.__setattr__(self, "beta", beta)


@dataclass(frozen=True)
class PsiAtom:
    """Covariate-cluster parameters: per-covariate means and variances."""

    mu: np.ndarray
    tau_x: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        tau_x = np.asarray(self.tau_x, dtype=float)
        if mu.shape != tau_x.shape or mu.ndim != 1:
            raise DomainError("mu and tau_x must be vectors of equal length")
        if not (tau_x > 0).all():
            raise DomainError("tau_x entries must be positive")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "tau_x", tau_x)


def sample_inverse_gamma(rng: np.random.Generator, shape, rate, size=None):
    """IG(shape, rate) draw via 1/X with X ~ Gamma(shape, rate)."""
    return 1.0 / rng.gamma(shape, 1.0 / np.asarray(rate, dtype=float), size=size)


def draw_theta_from_base(hp: Hyperparameters,
                         rng: np.random.Generator) -> ThetaAtom:
    """One regression atom from the base measure: tau_y then beta | tau_y."""
    tau_y = float(sample_inverse_gamma(rng, hp.a_y, hp.b_y))
    z = rng.standard_normal(hp.beta0.size)
    # C_y = L L' gives Cov(L'^{-1} z) = C_y^{-1}.
    beta = hp.beta0 + np.sqrt(tau_y) * np.linalg.solve(hp._chol_C_y.T, z)
    return ThetaAtom(beta=beta, tau_y=tau_y)


def draw_psi_from_base(hp: Hyperparameters,
                       rng: np.random.Generator) -> PsiAtom:
    """One covariate atom from the base measure, covariate by covariate."""
    tau_x = sample_inverse_gamma(rng, hp.a_x, hp.b_x, size=hp.p)
    mu = hp.m + np.sqrt(tau_x / hp.c_x) * rng.standard_normal(hp.p)
    return PsiAtom(mu=mu, tau_x=tau_x)


def draw_from_base_measure(hp: Hyperparameters, p: int,
                           rng: np.random.Generator) -> tuple[ThetaAtom, PsiAtom]:
    """A (theta, psi) atom pair from the product base measure."""
    if p != hp.p:
        raise DomainError(f"p={p} does not match hyperparameters (p={hp.p})")
    return draw_theta_from_base(hp, rng), draw_psi_from_base(hp, rng)


# ---------------------------------------------------------------------------
# counts and sampler state
# ---------------------------------------------------------------------------

def occupancy_counts(K, J, trunc: Truncation) -> tuple[np.ndarray, np.ndarray]:
    """Tallies n_k and n_kj for 1-based label vectors K, J."""
    K = np.asarray(K, dtype=int)
    J = np.asarray(J, dtype=int)
    if K.shape != J.shape or K.ndim != 1:
        raise DomainError("K and J must be vectors of equal length")
    if K.size and (K.min() < 1 or K.max() > trunc.N):
        raise DomainError("K labels out of range 1..N")
    if J.size and (J.min() < 1 or J.max() > trunc.M):
        raise DomainError("J labels out of range 1..M")
    n_kj = np.zeros((trunc.N, trunc.M), dtype=int)
    np.add.at(n_kj, (K - 1, J - 1), 1)
    return n_kj.sum(axis=1), n_kj


@dataclass
class GibbsState:
    """Full truncated-mixture posterior state, array-backed.

    Labels K, J are 1-based. psi arrays are laid out (N, M, ...) and
    alpha_psi holds one entry per theta-cluster (replicated when shared).
    """

    trunc: Truncation
    theta_V: np.ndarray       # (N,)
    theta_w: np.ndarray       # (N,)
    psi_V: np.ndarray         # (N, M)
    psi_w: np.ndarray         # (N, M)
    theta_beta: np.ndarray    # (N, p+1)
    theta_tau: np.ndarray     # (N,)
    psi_mu: np.ndarray        # (N, M, p)
    psi_tau: np.ndarray       # (N, M, p)
    K: np.ndarray             # (n,) in 1..N
    J: np.ndarray             # (n,) in 1..M
    alpha_theta: float
    alpha_psi: np.ndarray     # (N,)

    @property
    def p(self) -> int:
        return self.psi_mu.shape[2]

    @property
    def n(self) -> int:
        return self.K.shape[0]

    def theta_weights(self) -> StickWeights:
        return StickWeights(V=self.theta_V, w=self.theta_w)

    def psi_weights(self, k: int) -> StickWeights:
        """Nested weights for theta-cluster k (1-based)."""
        return StickWeights(V=self.psi_V[k - 1], w=self.psi_w[k - 1])

    def theta_atom(self, k: int) -> ThetaAtom:
        return ThetaAtom(beta=self.theta_beta[k - 1], tau_y=self.theta_tau[k - 1])

    def psi_atom(self, k: int, j: int) -> PsiAtom:
        return PsiAtom(mu=self.psi_mu[k - 1, j - 1], tau_x=self.psi_tau[k - 1, j - 1])

    def counts(self) -> tuple[np.ndarray, np.ndarray]:
        return occupancy_counts(self.K, self.J, self.trunc)

    def validate(self) -> None:
        """Raise unless every structural invariant holds."""
        N, M = self.trunc.N, self.trunc.M
        if abs(self.theta_w.sum() - 1.0) > PROB_TOL * N or (self.theta_w < 0).any():
            raise NumericalError("theta weights not a probability vector")
        sums = self.psi_w.sum(axis=1)
        if (np.abs(sums - 1.0) > PROB_TOL * M).any() or (self.psi_w < 0).any():
            raise NumericalError("psi weights not probability vectors")
        if not (self.theta_tau > 0).all() or not (self.psi_tau > 0).all():
            raise NumericalError("non-positive variance in state")
        if not self.alpha_theta > 0 or not (self.alpha_psi > 0).all():
            raise NumericalError("non-positive concentration")
        n_k, n_kj = self.counts()
        if n_k.sum() != self.n or (n_kj.sum(axis=1) != n_k).any():
            raise NumericalError("occupancy counts inconsistent")
        arrays = [self.theta_V, self.theta_w, self.psi_V, self.psi_w,
                  self.theta_beta, self.theta_tau, self.psi_mu, self.psi_tau,
                  self.alpha_psi]
        if not all(np.isfinite(a).all() for a in arrays):
            raise NumericalError("non-finite value in state")

