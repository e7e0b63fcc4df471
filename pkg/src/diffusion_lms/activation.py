"""Bernoulli on-off activation model and its exact first/second moments.

Each agent k runs with step-size ``mu[k]`` with probability ``q[k]`` and
sleeps otherwise. Each same-cluster link (l -> k) delivers weight
``a[l, k]`` with probability ``p[l, k]``; each cross-cluster link
(k -> l) applies the regularization factor ``rho[k, l]`` with
probability ``r[k, l]``. All on-off variables are independent across
agents, links and time. Diagonal entries absorb the missing mass so the
realized combination matrix stays column-stochastic and the realized
regularization matrix stays row-stochastic; an agent with no
cross-cluster neighbor keeps a fixed unit self-factor.

Second moments are reported as Kronecker covariances
``C_X = E[(X - X_mean) kron (X - X_mean)]`` of size N^2 x N^2 with the
row-major 0-based Kronecker indexing ``(X kron Y)[i*N + k, j*N + l] =
X[i, j] * Y[k, l]``. Because distinct receiving agents use independent
links, every covariance couples at most one column of the combination
matrix (one row of the regularization matrix); the per-column structure
is: same link -> variance, link against the adjusted diagonal ->
minus that variance, diagonal against itself -> sum of the column's
variances, anything else -> zero.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .errors import ProbabilityRange, ValidationError
from .network import ClusteredNetwork

_FEAS_TOL = 1e-12


@dataclass(frozen=True)
class BernoulliParams:
    """Nominal values and success probabilities of the on-off model.

    ``a[l, k]`` is nonzero exactly on same-cluster links l -> k (l != k),
    ``rho[k, l]`` exactly on cross-cluster links k -> l. Column sums of
    ``a`` and row sums of ``rho`` must not exceed one so the adjusted
    diagonals stay nonnegative in every realization.
    """

    mu: np.ndarray
    q: np.ndarray
    a: np.ndarray
    p: np.ndarray
    rho: np.ndarray
    r: np.ndarray


@dataclass(frozen=True)
class ActivationDraw:
    """One realization of the random step/combination/regularization triple."""

    M: np.ndarray
    A: np.ndarray
    P: np.ndarray


@dataclass(frozen=True)
class MomentSet:
    """Exact means and Kronecker covariances of the activation triple."""

    mbar: np.ndarray
    abar: np.ndarray
    pbar: np.ndarray
    c_m: np.ndarray
    c_a: np.ndarray
    c_p: np.ndarray

    @property
    def mu_bar(self) -> np.ndarray:
        return np.diag(self.mbar).copy()


@dataclass(frozen=True)
class MomentReport:
    """Stochasticity checks on the second-moment matrices."""

    a_colsum_dev: float
    p_rowsum_dev: float
    a_min_entry: float
    p_min_entry: float
    tol: float

    @property
    def passed(self) -> bool:
        return (
            self.a_colsum_dev <= self.tol
            and self.p_rowsum_dev <= self.tol
            and self.a_min_entry >= -self.tol
            and self.p_min_entry >= -self.tol
        )


class ActivationModel(Protocol):
    """Sampler plus exact moments; lets non-Bernoulli models plug in."""

    def sample(self, net: ClusteredNetwork, rng: np.random.Generator) -> ActivationDraw: ...

    def moments(self, net: ClusteredNetwork) -> MomentSet: ...


def _masks(net: ClusteredNetwork) -> tuple[np.ndarray, np.ndarray]:
    """Boolean masks of the allowed intra-link (l, k) / inter-link (k, l) slots."""
    n = net.n_nodes
    intra = np.zeros((n, n), dtype=bool)
    inter = np.zeros((n, n), dtype=bool)
    for l, k in net.intra_links():
        intra[l, k] = True
    for k, l in net.inter_links():
        inter[k, l] = True
    return intra, inter


def validate_params(params: BernoulliParams, net: ClusteredNetwork) -> None:
    """Check shapes, sparsity, probability ranges and feasibility sums."""
    n = net.n_nodes
    mu = np.asarray(params.mu, dtype=float)
    q = np.asarray(params.q, dtype=float)
    if mu.shape != (n,) or q.shape != (n,):
        raise ValidationError("mu and q must be length-N vectors")
    if np.any(mu <= 0):
        raise ValidationError("nominal step-sizes must be positive")
    for name, probs in (("q", q), ("p", params.p), ("r", params.r)):
        arr = np.asarray(probs, dtype=float)
        if np.any(arr < 0) or np.any(arr > 1):
            raise ProbabilityRange(f"probabilities '{name}' must lie in [0, 1]")

    intra, inter = _masks(net)
    a = np.asarray(params.a, dtype=float)
    rho = np.asarray(params.rho, dtype=float)
    if a.shape != (n, n) or rho.shape != (n, n):
        raise ValidationError("a and rho must be N x N matrices")
    if np.any(a[~intra] != 0):
        raise ValidationError("a has entries outside same-cluster links")
    if np.any(rho[~inter] != 0):
        raise ValidationError("rho has entries outside cross-cluster links")
    if np.any((a[intra] <= 0) | (a[intra] > 1)):
        raise ValidationError("link weights must lie in (0, 1]")
    if np.any((rho[inter] <= 0) | (rho[inter] > 1)):
        raise ValidationError("regularization factors must lie in (0, 1]")
    if np.any(a.sum(axis=0) > 1 + _FEAS_TOL):
        raise ValidationError("column sums of a exceed 1; diagonal would go negative")
    if np.any(rho.sum(axis=1) > 1 + _FEAS_TOL):
        raise ValidationError("row sums of rho exceed 1; diagonal would go negative")


def uniform_intra_weights(net: ClusteredNetwork) -> np.ndarray:
    """Averaging-rule weights: 1 / (number of same-cluster neighbors + self)."""
    n = net.n_nodes
    a = np.zeros((n, n))
    for k in range(n):
        view = net.neighborhood(k)
        for l in view.intra_strict:
            a[l, k] = 1.0 / len(view.intra)
    return a


def uniform_inter_factors(net: ClusteredNetwork) -> np.ndarray:
    """Equal split over cross-cluster neighbors; rows without any stay zero."""
    n = net.n_nodes
    rho = np.zeros((n, n))
    for k in range(n):
        inter = net.neighborhood(k).inter
        for l in inter:
            rho[k, l] = 1.0 / len(inter)
    return rho


def sample(
    params: BernoulliParams, net: ClusteredNetwork, rng: np.random.Generator
) -> ActivationDraw:
    """Draw one realization of (M, A, P)."""
    mu_draw, a_draw, p_draw = sample_batch(params, net, rng, 1)
    return ActivationDraw(M=np.diag(mu_draw[0]), A=a_draw[0], P=p_draw[0])


def sample_batch(
    params: BernoulliParams,
    net: ClusteredNetwork,
    rng: np.random.Generator,
    count: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Draw ``count`` independent realizations at once.

    Returns step-size vectors of shape (count, N) and combination /
    regularization matrices of shape (count, N, N). Uniform variates are
    drawn for every matrix slot to keep the stream layout independent of
    the sparsity pattern.
    """
    n = net.n_nodes
    idx = np.arange(n)
    mu_draw = np.asarray(params.mu) * (rng.random((count, n)) < np.asarray(params.q))

    a_draw = np.where(rng.random((count, n, n)) < params.p, params.a, 0.0)
    a_draw[:, idx, idx] = 1.0 - a_draw.sum(axis=1)

    p_draw = np.where(rng.random((count, n, n)) < params.r, params.rho, 0.0)
    p_draw[:, idx, idx] = 1.0 - p_draw.sum(axis=2)
    return mu_draw, a_draw, p_draw


def moments(params: BernoulliParams, net: ClusteredNetwork) -> MomentSet:
    """Exact means and Kronecker covariances of the Bernoulli model."""
    n = net.n_nodes
    mu = np.asarray(params.mu, dtype=float)
    q = np.asarray(params.q, dtype=float)

    mbar = np.diag(mu * q)
    abar = np.asarray(params.a) * np.asarray(params.p)
    np.fill_diagonal(abar, 0.0)
    abar[np.arange(n), np.arange(n)] = 1.0 - abar.sum(axis=0)
    pbar = np.asarray(params.rho) * np.asarray(params.r)
    np.fill_diagonal(pbar, 0.0)
    pbar[np.arange(n), np.arange(n)] = 1.0 - pbar.sum(axis=1)

    c_m = np.zeros((n * n, n * n))
    var_mu = mu**2 * q * (1.0 - q)
    for k in range(n):
        c_m[k * n + k, k * n + k] = var_mu[k]

    # var of one Bernoulli-scaled coefficient on each directed link
    var_a = np.asarray(params.a) ** 2 * np.asarray(params.p) * (1.0 - np.asarray(params.p))
    var_p = np.asarray(params.rho) ** 2 * np.asarray(params.r) * (1.0 - np.asarray(params.r))

    c_a = np.zeros((n * n, n * n))
    for k in range(n):
        strict = sorted(net.neighborhood(k).intra_strict)
        col = k * n + k
        for l in strict:
            c_a[l * n + l, col] += var_a[l, k]          # link vs itself
            c_a[l * n + k, col] += -var_a[l, k]         # link vs adjusted diagonal
            c_a[k * n + l, col] += -var_a[l, k]         # diagonal vs link
        c_a[k * n + k, col] += var_a[strict, k].sum()   # diagonal vs itself

    c_p = np.zeros((n * n, n * n))
    for k in range(n):
        inter = sorted(net.neighborhood(k).inter)
        row = k * n + k
        for l in inter:
            c_p[row, l * n + l] += var_p[k, l]
            c_p[row, l * n + k] += -var_p[k, l]
            c_p[row, k * n + l] += -var_p[k, l]
        c_p[row, k * n + k] += var_p[k, inter].sum()

    return MomentSet(mbar=mbar, abar=abar, pbar=pbar, c_m=c_m, c_a=c_a, c_p=c_p)


def verify_stochastic_moments(ms: MomentSet, tol: float = 1e-12) -> MomentReport:
    """Check the stochasticity guarantees of the second-moment matrices.

    ``abar kron abar + C_A`` must be left-stochastic and
    ``pbar kron pbar + C_P`` right-stochastic with nonnegative entries;
    violations are reported, not raised.
    """
    second_a = np.kron(ms.abar, ms.abar) + ms.c_a
    second_p = np.kron(ms.pbar, ms.pbar) + ms.c_p
    return MomentReport(
        a_colsum_dev=float(np.abs(second_a.sum(axis=0) - 1.0).max()),
        p_rowsum_dev=float(np.abs(second_p.sum(axis=1) - 1.0).max()),
        a_min_entry=float(second_a.min()),
        p_min_entry=float(second_p.min()),
        tol=tol,
    )


@dataclass(frozen=True)
class BernoulliModel:
    """Bernoulli activation bound to one parameter set."""

    params: BernoulliParams

    def sample(self, net: ClusteredNetwork, rng: np.random.Generator) -> ActivationDraw:
        return sample(self.params, net, rng)

    def sample_batch(self, net, rng, count):
        return sample_batch(self.params, net, rng, count)

    def moments(self, net: ClusteredNetwork) -> MomentSet:
        return moments(self.params, net)
