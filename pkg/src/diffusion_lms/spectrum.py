"""Distributed aggregate power-spectrum estimation over multi-antenna users.

Every secondary user is a fully connected cluster of antenna nodes; all
clusters estimate one shared coefficient vector that expresses the
aggregate transmitted spectrum in a bank of Gaussian frequency bumps.
The node (user k, antenna l) measures, over all frequency samples,

    r_kl(i) = [p_1,kl(i), ..., p_P,kl(i)] kron Phi  @  alpha_star + z_kl(i)

where p_q,kl(i) is the fluctuating path-loss factor to primary user q.
The node only knows the thresholded estimate (nominal loss when the
realized loss exceeds the detection threshold, else zero), so far-away
primaries are locally invisible; cross-cluster regularization lets their
spectral lobes diffuse in from users that do sense them.

The adapt step is the vector-measurement form mu * H'(r - H w) with H
the node's thresholded regression matrix; combination and regularization
reuse the standard activation machinery on the antenna-level network.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .activation import BernoulliParams, moments, sample_batch
from .engine import MsdCurve, rng_for_run
from .errors import DegenerateGeometry, ValidationError
from .network import ClusteredNetwork, build_network

_CHUNK = 256


@dataclass(frozen=True)
class SpectrumScenario:
    """Geometry, basis and activation parameters of the sensing network."""

    n_primary: int
    n_secondary: int
    n_antennas: int
    n_basis: int
    n_freq: int
    basis_width: float
    alpha_star: np.ndarray
    primary_pos: np.ndarray
    secondary_pos: np.ndarray
    loss_threshold: float
    loss_jitter: float = 0.1
    noise_std: float = 0.01
    link_decay: float = 0.15
    mu: float = 0.6
    q: float = 0.4
    p_intra: float = 0.4

    @property
    def dim(self) -> int:
        return self.n_primary * self.n_basis

    @property
    def n_nodes(self) -> int:
        return self.n_secondary * self.n_antennas

    @property
    def alpha_flat(self) -> np.ndarray:
        return self.alpha_star.reshape(-1)


def make_spectrum_scenario(**kwargs) -> SpectrumScenario:
    """Validate raw inputs and build a :class:`SpectrumScenario`."""
    alpha = np.asarray(kwargs.pop("alpha_star"), dtype=float)
    n_primary = int(kwargs["n_primary"])
    n_basis = int(kwargs["n_basis"])
    if alpha.ndim == 1:
        alpha = alpha.reshape(n_primary, n_basis)
    if alpha.shape != (n_primary, n_basis):
        raise ValidationError(
            f"alpha_star must hold {n_primary} x {n_basis} coefficients"
        )
    primary = np.asarray(kwargs.pop("primary_pos"), dtype=float)
    secondary = np.asarray(kwargs.pop("secondary_pos"), dtype=float)
    if primary.shape != (n_primary, 2):
        raise ValidationError("one 2-D position per primary user is required")
    if secondary.shape != (int(kwargs["n_secondary"]), 2):
        raise ValidationError("one 2-D position per secondary user is required")
    scen = SpectrumScenario(
        alpha_star=alpha, primary_pos=primary, secondary_pos=secondary, **kwargs
    )
    if scen.basis_width <= 0 or scen.loss_threshold <= 0:
        raise ValidationError("basis_width and loss_threshold must be positive")
    if _pair_distances(secondary, primary).min() <= 0.0:
        raise DegenerateGeometry("a primary user sits on top of a receiver")
    return scen


def _pair_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)


def basis_matrix(scen: SpectrumScenario) -> np.ndarray:
    """Gaussian bumps sampled on the normalized frequency axis (n_freq x n_basis)."""
    freqs = np.linspace(0.0, 1.0, scen.n_freq)
    centers = np.linspace(0.0, 1.0, scen.n_basis)
    return np.exp(-((freqs[:, None] - centers[None, :]) ** 2) / (2.0 * scen.basis_width))


def mean_path_loss(scen: SpectrumScenario) -> np.ndarray:
    """Free-space inverse-square loss between users and primaries (n_secondary x n_primary)."""
    return 1.0 / _pair_distances(scen.secondary_pos, scen.primary_pos) ** 2


def build_spectrum_model(
    scen: SpectrumScenario,
) -> tuple[ClusteredNetwork, BernoulliParams]:
    """Antenna-level clustered network and its activation parameters.

    Clusters are fully connected; every antenna pair across two distinct
    users forms a cross-cluster link whose success probability decays
    exponentially with the user distance. Regularization factors split
    1 / (antennas * other users) per the uniform rule, excluding the
    user itself from its neighbor count.
    """
    n = scen.n_nodes
    user_of = np.repeat(np.arange(scen.n_secondary), scen.n_antennas)
    edges = [
        (i, j)
        for i in range(n)
        for j in range(i + 1, n)
    ]
    clusters = [
        set(np.flatnonzero(user_of == u).tolist()) for u in range(scen.n_secondary)
    ]
    net = build_network(n, scen.dim, edges, clusters)

    dist = _pair_distances(scen.secondary_pos, scen.secondary_pos)
    a_nom = np.zeros((n, n))
    p = np.zeros((n, n))
    rho = np.zeros((n, n))
    r = np.zeros((n, n))
    rho_value = 1.0 / (scen.n_antennas * (scen.n_secondary - 1))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            if user_of[i] == user_of[j]:
                a_nom[j, i] = 1.0 / scen.n_antennas
                p[j, i] = scen.p_intra
            else:
                rho[i, j] = rho_value
                r[i, j] = np.exp(-scen.link_decay * dist[user_of[i], user_of[j]])
    params = BernoulliParams(
        mu=np.full(n, scen.mu),
        q=np.full(n, scen.q),
        a=a_nom,
        p=p,
        rho=rho,
        r=r,
    )
    return net, params


@dataclass(frozen=True)
class SpectrumResult:
    """MSD trajectory plus run-averaged final coefficient estimates."""

    curve: MsdCurve
    alpha_final: np.ndarray

    def user_estimates(self, scen: SpectrumScenario) -> np.ndarray:
        """Final estimates averaged over each user's antennas (n_secondary x dim)."""
        return self.alpha_final.reshape(
            scen.n_secondary, scen.n_antennas, scen.dim
        ).mean(axis=1)


def reconstruct_psd(scen: SpectrumScenario, alpha_vec: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Aggregate power spectrum implied by one coefficient vector."""
    phi = basis_matrix(scen)
    per_primary = np.asarray(alpha_vec, dtype=float).reshape(scen.n_primary, scen.n_basis)
    return np.linspace(0.0, 1.0, scen.n_freq), phi @ per_primary.sum(axis=0)


def run_spectrum_monte_carlo(
    scen: SpectrumScenario,
    eta: float,
    horizon: int,
    runs: int,
    seed: int,
    mode: str = "async",
) -> SpectrumResult:
    """Monte-Carlo estimate of the sensing network's MSD trajectory.

    ``per_cluster`` rows of the returned curve are per secondary user.
    Path-loss fluctuations and measurement noise stay random in the
    synchronous mode; only the activation triple becomes deterministic.
    """
    if mode not in ("async", "sync"):
        raise ValueError(f"unknown mode {mode!r}")
    net, params = build_spectrum_model(scen)
    n, l = scen.n_nodes, scen.dim
    phi = basis_matrix(scen)
    pbar = np.repeat(mean_path_loss(scen), scen.n_antennas, axis=0)
    alpha = scen.alpha_star
    alpha_flat = scen.alpha_flat
    if mode == "sync":
        ms = moments(params, net)
        mu_c, a_c, p_c = ms.mu_bar, ms.abar, ms.pbar

    acc = np.zeros((horizon + 1, n))
    alpha_final = np.zeros((n, l))
    for run in range(runs):
        rng_data = rng_for_run(seed, run, 0)
        rng_act = rng_for_run(seed, run, 1)
        w = np.zeros((n, l))
        acc[0] += ((alpha_flat[None, :] - w) ** 2).sum(axis=1)
        done = 0
        while done < horizon:
            m = min(_CHUNK, horizon - done)
            jitter = rng_data.standard_normal((m, n, scen.n_primary))
            noise = scen.noise_std * rng_data.standard_normal((m, n, scen.n_freq))
            if mode == "async":
                mus, amats, pmats = sample_batch(params, net, rng_act, m)
            for i in range(m):
                p_true = pbar * (1.0 + scen.loss_jitter * jitter[i])
                p_hat = np.where(p_true > scen.loss_threshold, pbar, 0.0)
                r_meas = (p_true @ alpha) @ phi.T + noise[i]
                w_blocks = w.reshape(n, scen.n_primary, scen.n_basis)
                resid = r_meas - np.einsum("nq,nqb->nb", p_hat, w_blocks) @ phi.T
                grad = (p_hat[:, :, None] * (resid @ phi)[:, None, :]).reshape(n, l)
                if mode == "async":
                    mu_c, a_c, p_c = mus[i], amats[i], pmats[i]
                psi = w + mu_c[:, None] * grad
                if eta != 0.0:
                    psi = psi + (eta * mu_c)[:, None] * (p_c @ w - w)
                w = a_c.T @ psi
                acc[done + i + 1] += ((alpha_flat[None, :] - w) ** 2).sum(axis=1)
            done += m
        alpha_final += w
    acc /= runs
    alpha_final /= runs
    per_cluster = np.stack(
        [acc[:, sorted(cl)].mean(axis=1) for cl in net.clusters]
    )
    curve = MsdCurve(
        msd=acc.mean(axis=1), per_cluster=per_cluster, runs=runs, seed=seed, mode=mode
    )
    return SpectrumResult(curve=curve, alpha_final=alpha_final)
