"""Streaming data generation and the multitask diffusion ATC recursions.

One iteration of the adapt-then-combine update at node k:

    psi_k = w_k + mu_k * x_k * (d_k - x_k' w_k)
                + eta * mu_k * sum_l rho_kl * (w_l - w_k)
    w_k   = sum_l a_lk * psi_l

where the regularization sum runs over the active cross-cluster
neighbors and the combination over the active same-cluster neighbors.
The asynchronous step draws (mu, a, rho) from an activation model; the
synchronous step uses fixed coefficients (typically the model means).
Both share one arithmetic path, so an all-on draw reproduces the
synchronous trajectory bit for bit on the same data stream.

Monte-Carlo runs derive their random streams from (master seed, run
index, channel): channel 0 feeds regressors and noise, channel 1 the
activation draws. Simulations with identical seeds are bit-identical.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .activation import ActivationDraw, BernoulliModel
from .errors import DimensionMismatch, ValidationError
from .network import ClusteredNetwork

_CHUNK_TARGET = 1 << 21  # soft cap on per-chunk scratch (floats)


def to_db(values: np.ndarray) -> np.ndarray:
    """Linear MSD to dB (10 log10), -inf for exact zeros."""
    values = np.asarray(values, dtype=float)
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(values)


def rng_for_run(seed: int, run: int, channel: int) -> np.random.Generator:
    """Independent, reproducible stream for one (run, channel) pair."""
    return np.random.default_rng(np.random.SeedSequence((seed, run, channel)))


@dataclass(frozen=True)
class SignalModel:
    """Per-node regression statistics and ground-truth parameter vectors."""

    rx: np.ndarray
    sigma2_z: np.ndarray
    w_star: np.ndarray
    rx_chol: np.ndarray

    @property
    def dim(self) -> int:
        return self.w_star.shape[1]

    @property
    def w_star_flat(self) -> np.ndarray:
        return self.w_star.reshape(-1)

    @property
    def rx_block(self) -> np.ndarray:
        """Block-diagonal stack of the per-node regression covariances."""
        n, l = self.w_star.shape
        out = np.zeros((n * l, n * l))
        for k in range(n):
            out[k * l : (k + 1) * l, k * l : (k + 1) * l] = self.rx[k]
        return out

    @property
    def noise_block(self) -> np.ndarray:
        """Block-diagonal stack of sigma2_z[k] * rx[k]."""
        n, l = self.w_star.shape
        out = np.zeros((n * l, n * l))
        for k in range(n):
            out[k * l : (k + 1) * l, k * l : (k + 1) * l] = self.sigma2_z[k] * self.rx[k]
        return out


def make_signal_model(
    net: ClusteredNetwork,
    rx,
    sigma2_z,
    cluster_tasks=None,
    w_star=None,
) -> SignalModel:
    """Validate and assemble a :class:`SignalModel`.

    ``rx`` is either a length-N vector of scalar regressor variances
    (expanded to variance * identity) or an (N, L, L) stack of positive
    definite covariances. Tasks are given per cluster (``cluster_tasks``,
    in cluster order) or per node (``w_star``, checked for equality
    within each cluster).
    """
    n, l = net.n_nodes, net.dim
    rx = np.asarray(rx, dtype=float)
    if rx.ndim == 1:
        if rx.shape != (n,):
            raise ValidationError("per-node regressor variances must have length N")
        if np.any(rx <= 0):
            raise ValidationError("regressor variances must be positive")
        rx = rx[:, None, None] * np.eye(l)[None]
    if rx.shape != (n, l, l):
        raise ValidationError(f"rx must have shape ({n}, {l}, {l})")
    try:
        chol = np.linalg.cholesky(rx)
    except np.linalg.LinAlgError as exc:
        raise ValidationError("regression covariances must be positive definite") from exc

    sigma2_z = np.broadcast_to(np.asarray(sigma2_z, dtype=float), (n,)).copy()
    if np.any(sigma2_z < 0):
        raise ValidationError("noise variances must be nonnegative")

    if (cluster_tasks is None) == (w_star is None):
        raise ValidationError("give exactly one of cluster_tasks or w_star")
    if cluster_tasks is not None:
        tasks = [np.asarray(t, dtype=float) for t in cluster_tasks]
        if len(tasks) != net.n_clusters:
            raise ValidationError("one task vector per cluster is required")
        w = np.zeros((n, l))
        for q, t in enumerate(tasks):
            if t.shape != (l,):
                raise ValidationError(f"task {q} must have length {l}")
            for k in net.clusters[q]:
                w[k] = t
    else:
        w = np.asarray(w_star, dtype=float)
        if w.shape != (n, l):
            raise ValidationError(f"w_star must have shape ({n}, {l})")
        for members in net.clusters:
            members = sorted(members)
            for k in members[1:]:
                if not np.array_equal(w[k], w[members[0]]):
                    raise ValidationError(
                        f"nodes {members[0]} and {k} share a cluster but not a task"
                    )
    return SignalModel(rx=rx, sigma2_z=sigma2_z, w_star=w, rx_chol=chol)


@dataclass(frozen=True)
class NetworkState:
    """Estimates, intermediate estimates and the iteration counter."""

    w: np.ndarray
    psi: np.ndarray
    iteration: int


def initial_state(net: ClusteredNetwork) -> NetworkState:
    """All-zero start."""
    shape = (net.n_nodes, net.dim)
    return NetworkState(w=np.zeros(shape), psi=np.zeros(shape), iteration=0)


def draw_data(
    model: SignalModel, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """One snapshot of regressors (N, L) and reference signals (N,)."""
    n, l = model.w_star.shape
    x = np.einsum("nij,nj->ni", model.rx_chol, rng.standard_normal((n, l)))
    z = np.sqrt(model.sigma2_z) * rng.standard_normal(n)
    d = np.einsum("ni,ni->n", x, model.w_star) + z
    return x, d


def _atc_update(w, x, d, mu_vec, a_mat, p_mat, eta):
    """Shared arithmetic of the synchronous and asynchronous steps."""
    err = d - np.einsum("ni,ni->n", x, w)
    psi = w + (mu_vec * err)[:, None] * x
    if eta != 0.0:
        psi = psi + (eta * mu_vec)[:, None] * (p_mat @ w - w)
    return psi, a_mat.T @ psi


def _check_dims(state: NetworkState, x, d, mats):
    n, l = state.w.shape
    if np.shape(x) != (n, l) or np.shape(d) != (n,):
        raise DimensionMismatch("data shapes do not match the network state")
    for m in mats:
        if np.shape(m)[-1] != n:
            raise DimensionMismatch("coefficient shapes do not match the network state")


def atc_step_async(
    state: NetworkState,
    x: np.ndarray,
    d: np.ndarray,
    draw: ActivationDraw,
    eta: float,
) -> NetworkState:
    """One adapt-then-combine step under a sampled activation draw.

    Inactive agents and dropped links are implied by the zero pattern of
    the draw; the adjusted diagonals of ``draw.A`` and ``draw.P`` keep
    the combination convex and the regularization weights summing to one.
    """
    _check_dims(state, x, d, (draw.M, draw.A, draw.P))
    psi, w = _atc_update(state.w, x, d, np.diagonal(draw.M), draw.A, draw.P, eta)
    return NetworkState(w=w, psi=psi, iteration=state.iteration + 1)


def atc_step_sync(
    state: NetworkState,
    x: np.ndarray,
    d: np.ndarray,
    mu_bar: np.ndarray,
    a_bar: np.ndarray,
    p_bar: np.ndarray,
    eta: float,
) -> NetworkState:
    """One adapt-then-combine step with deterministic coefficients."""
    _check_dims(state, x, d, (a_bar, p_bar))
    psi, w = _atc_update(state.w, x, d, np.asarray(mu_bar), a_bar, p_bar, eta)
    return NetworkState(w=w, psi=psi, iteration=state.iteration + 1)


@dataclass(frozen=True)
class MsdCurve:
    """Monte-Carlo MSD trajectory, network-wide and per cluster."""

    msd: np.ndarray
    per_cluster: np.ndarray
    runs: int
    seed: int
    mode: str

    @property
    def msd_db(self) -> np.ndarray:
        return to_db(self.msd)

    @property
    def per_cluster_db(self) -> np.ndarray:
        return to_db(self.per_cluster)


def iterate_weights(
    net: ClusteredNetwork,
    model: SignalModel,
    activation: BernoulliModel,
    eta: float,
    horizon: int,
    rng_data: np.random.Generator,
    rng_act: np.random.Generator | None,
    mode: str = "async",
    w0: np.ndarray | None = None,
    chunk: int | None = None,
):
    """Yield the estimate array after 0, 1, ..., horizon steps.

    Data and activation variates are pre-sampled in chunks; the chunk
    layout depends only on (N, L, horizon), so synchronous and
    asynchronous runs sharing ``rng_data`` see identical data. Each
    yielded array is fresh and never modified afterwards.
    """
    n, l = net.n_nodes, net.dim
    if mode not in ("async", "sync"):
        raise ValueError(f"unknown mode {mode!r}")
    if chunk is None:
        chunk = max(64, min(4096, _CHUNK_TARGET // (n * n + 2 * n * l)))
    if mode == "sync":
        ms = activation.moments(net)
        mu_c = ms.mu_bar
        a_c = ms.abar
        p_c = ms.pbar

    w = np.zeros((n, l)) if w0 is None else np.array(w0, dtype=float)
    yield w
    done = 0
    sigma_z = np.sqrt(model.sigma2_z)
    while done < horizon:
        m = min(chunk, horizon - done)
        xs = np.einsum(
            "nij,cnj->cni", model.rx_chol, rng_data.standard_normal((m, n, l))
        )
        ds = np.einsum("cni,ni->cn", xs, model.w_star)
        ds += sigma_z * rng_data.standard_normal((m, n))
        if mode == "async":
            mus, amats, pmats = activation.sample_batch(net, rng_act, m)
        for i in range(m):
            if mode == "async":
                mu_c, a_c, p_c = mus[i], amats[i], pmats[i]
            _, w = _atc_update(w, xs[i], ds[i], mu_c, a_c, p_c, eta)
            yield w
        done += m


def run_monte_carlo(
    net: ClusteredNetwork,
    model: SignalModel,
    activation: BernoulliModel,
    eta: float,
    horizon: int,
    runs: int,
    seed: int,
    mode: str = "async",
    w0: np.ndarray | None = None,
) -> MsdCurve:
    """Average squared-deviation curves over independent runs.

    ``msd[i]`` is the run average of ``(1/N) * ||w_star - w(i)||^2``;
    per-cluster rows average over the cluster members only. Identical
    (seed, configuration) pairs give bit-identical curves.
    """
    if horizon < 0 or runs < 1:
        raise ValidationError("horizon must be >= 0 and runs >= 1")
    n = net.n_nodes
    w_star = model.w_star
    acc = np.zeros((horizon + 1, n))
    for run in range(runs):
        states = iterate_weights(
            net,
            model,
            activation,
            eta,
            horizon,
            rng_data=rng_for_run(seed, run, 0),
            rng_act=rng_for_run(seed, run, 1),
            mode=mode,
            w0=w0,
        )
        for i, w in enumerate(states):
            acc[i] += ((w_star - w) ** 2).sum(axis=1)
    acc /= runs
    per_cluster = np.stack(
        [acc[:, sorted(members)].mean(axis=1) for members in net.clusters]
    )
    return MsdCurve(
        msd=acc.mean(axis=1), per_cluster=per_cluster, runs=runs, seed=seed, mode=mode
    )
