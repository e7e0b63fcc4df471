"""Closed-form mean and mean-square performance of the asynchronous ATC
multitask diffusion recursion.

Writing wt(i) = w_star - w(i) for the stacked error, the recursion
implies

    wt(i+1) = B(i) wt(i) - g(i) + eta * r(i)

with B(i) = A'(i) [I - M(i) (Rx(i) + eta Q(i))], g(i) = A'(i) M(i) p(i)
(p stacks x_k z_k) and r(i) = A'(i) M(i) Q(i) w_star, where Q(i) =
I - P(i) and every capital letter is the dimension-lifted version of the
corresponding N x N activation matrix. Everything below is a deterministic
function of the activation moments and the signal statistics:

- mean:    E wt(i+1) = Bbar E wt(i) + eta * rbar, asymptotic bias
  eta * (I - Bbar)^{-1} rbar when rho(Bbar) < 1;
- mean-square: with sigma = bvec(S) for a weighting matrix S, the
  weighted variance obeys E||wt(i+1)||^2_sigma = E||wt(i)||^2_{F' sigma}
  + g_b' sigma + eta^2 r_b' sigma + 2 eta (E wt(i))' K' sigma, where F
  is the small-step approximation of E[B(i) (x)_b B(i)] (second-order
  step-size terms dropped), g_b = A_I' M_I bvec(diag{sigma2_z Rx}),
  r_b = A_I' M_I Q_I bvec(w_star w_star') and K = E[B(i) (x)_b r(i)].

F and the second-moment operators A_I, M_I, P_I, Q_I all factor as
(N^2 x N^2 core) kron I_{L^2}, so they are stored factored and applied
through reshapes; dense forms are materialized only for small problems.

Transient and steady-state weighted deviations follow by iterating the
variance relation (one operator application per step) or by propagating
the full second-moment vector m(i) = bvec(E[wt wt']); the two routes are
algebraically identical and serve as mutual cross-checks. Network MSD
uses S = I / N, per-cluster MSD a block-diagonal selector averaging the
cluster's nodes.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .activation import MomentSet
from .blocklinalg import block_kron, block_lift, bvec, unbvec
from .engine import SignalModel
from .errors import ProblemTooLarge, UnstableMean, UnstableMeanSquare
from .network import ClusteredNetwork

MAX_STATE_DIM = 512  # refuse (N*L) beyond this; second-moment objects blow up
_DENSE_DIM_MAX = 4096  # largest (N*L)^2 for dense F / dense eigensolve
_POWER_TOL = 1e-10
_POWER_MAXITER = 10_000
_SOLVE_RTOL = 1e-10


def network_weighting(net: ClusteredNetwork) -> np.ndarray:
    """bvec of the network-MSD weighting I / N."""
    nl = net.n_nodes * net.dim
    return bvec(np.eye(nl) / net.n_nodes, net.dim)


def cluster_weighting(net: ClusteredNetwork, q: int) -> np.ndarray:
    """bvec of the selector averaging the squared deviation of cluster q."""
    l = net.dim
    members = sorted(net.clusters[q])
    mat = np.zeros((net.n_nodes * l, net.n_nodes * l))
    for k in members:
        mat[k * l : (k + 1) * l, k * l : (k + 1) * l] = np.eye(l) / len(members)
    return bvec(mat, l)


@dataclass(eq=False)
class MeanArtifacts:
    """Mean-error recursion: transition matrix, driving term, bias."""

    bbar: np.ndarray
    r: np.ndarray
    qbar: np.ndarray
    rho_b: float
    bias: np.ndarray | None


def mean_artifacts(ms: MomentSet, model: SignalModel, eta: float) -> MeanArtifacts:
    """Assemble the mean recursion from activation means and signal stats.

    The bias solves (I - Bbar) x = eta * r by a dense linear solve and is
    absent when the recursion is unstable (rho(Bbar) >= 1).
    """
    l = model.dim
    abar_b = block_lift(ms.abar, l)
    mbar_b = block_lift(ms.mbar, l)
    nl = abar_b.shape[0]
    qbar = np.eye(nl) - block_lift(ms.pbar, l)
    bbar = abar_b.T @ (np.eye(nl) - mbar_b @ (model.rx_block + eta * qbar))
    r = abar_b.T @ mbar_b @ qbar @ model.w_star_flat
    rho_b = float(np.abs(np.linalg.eigvals(bbar)).max())
    bias = None
    if rho_b < 1.0:
        bias = np.linalg.solve(np.eye(nl) - bbar, eta * r)
        _check_residual(np.eye(nl) - bbar, bias, eta * r)
    return MeanArtifacts(bbar=bbar, r=r, qbar=qbar, rho_b=rho_b, bias=bias)


@dataclass(frozen=True)
class MeanStabilityReport:
    """Exact spectral test plus the uniform-step sufficient bound."""

    rho: float
    stable: bool
    sufficient_bound: float
    mu_bar_max: float

    @property
    def bound_satisfied(self) -> bool:
        return 0.0 < self.mu_bar_max < self.sufficient_bound


def mean_stability(
    ma: MeanArtifacts, ms: MomentSet, model: SignalModel, eta: float
) -> MeanStabilityReport:
    """Mean stability: rho(Bbar) < 1, and the bound 2 / (max rho(Rx) + 2 eta).

    The bound assumes a uniform mean step-size and is sufficient only:
    satisfying it implies the spectral test, never the converse.
    """
    rx_radius = max(float(np.abs(np.linalg.eigvalsh(r)).max()) for r in model.rx)
    return MeanStabilityReport(
        rho=ma.rho_b,
        stable=ma.rho_b < 1.0,
        sufficient_bound=2.0 / (rx_radius + 2.0 * eta),
        mu_bar_max=float(ms.mu_bar.max()),
    )


def _check_residual(mat: np.ndarray, x: np.ndarray, rhs: np.ndarray) -> None:
    res = float(np.linalg.norm(mat @ x - rhs))
    lim = _SOLVE_RTOL * max(float(np.linalg.norm(rhs)), 1e-300)
    if res > lim:
        raise np.linalg.LinAlgError(
            f"linear solve residual {res:.3e} exceeds {lim:.3e}"
        )


def _apply_core(core: np.ndarray, v: np.ndarray, l2: int) -> np.ndarray:
    """Apply (core kron I_{l2}) to one vector or to stacked columns."""
    n2 = core.shape[0]
    if v.ndim == 1:
        return (core @ v.reshape(n2, l2)).reshape(-1)
    cols = v.shape[1]
    out = np.einsum("ab,bcd->acd", core, v.reshape(n2, l2, cols))
    return out.reshape(n2 * l2, cols)


@dataclass(eq=False)
class MsArtifacts:
    """Second-moment operators and driving terms of the variance relation.

    ``xa``, ``xm``, ``xp``, ``xq`` are the N^2 x N^2 cores of A_I, M_I,
    P_I, Q_I (each full operator is core kron I_{L^2}); ``t`` is the
    mean update curvature Mbar (Rx + eta Qbar) at lifted dimension.
    """

    n_nodes: int
    dim: int
    eta: float
    xa: np.ndarray
    xm: np.ndarray
    xp: np.ndarray
    xq: np.ndarray
    t: np.ndarray
    g_b: np.ndarray
    r_b: np.ndarray
    k_cross: np.ndarray
    s_noise: np.ndarray

    @property
    def state_dim(self) -> int:
        return self.n_nodes * self.dim

    @property
    def op_dim(self) -> int:
        return self.state_dim**2

    def _bvec(self, mat: np.ndarray) -> np.ndarray:
        return bvec(mat, self.dim)

    def _unbvec(self, v: np.ndarray) -> np.ndarray:
        nl = self.state_dim
        return unbvec(v, (self.n_nodes, self.n_nodes), self.dim).reshape(nl, nl)

    def f_matvec(self, v: np.ndarray) -> np.ndarray:
        """F v without materializing F."""
        mat = self._unbvec(v)
        u = v - self._bvec(self.t @ mat) - self._bvec(mat @ self.t.T)
        return _apply_core(self.xa.T, u, self.dim**2)

    def ft_matvec(self, v: np.ndarray) -> np.ndarray:
        """F' v without materializing F."""
        u = _apply_core(self.xa, v, self.dim**2)
        mat = self._unbvec(u)
        return u - self._bvec(self.t.T @ mat) - self._bvec(mat @ self.t)

    @property
    def a_i(self) -> np.ndarray:
        self._require_dense("A_I")
        return np.kron(self.xa, np.eye(self.dim**2))

    @property
    def m_i(self) -> np.ndarray:
        self._require_dense("M_I")
        return np.kron(self.xm, np.eye(self.dim**2))

    @property
    def p_i(self) -> np.ndarray:
        self._require_dense("P_I")
        return np.kron(self.xp, np.eye(self.dim**2))

    @property
    def q_i(self) -> np.ndarray:
        self._require_dense("Q_I")
        return np.kron(self.xq, np.eye(self.dim**2))

    def _require_dense(self, what: str) -> None:
        if self.op_dim > _DENSE_DIM_MAX:
            raise ProblemTooLarge(
                f"dense {what} of dimension {self.op_dim} exceeds {_DENSE_DIM_MAX};"
                " use the factored operator interface"
            )

    @cached_property
    def f_dense(self) -> np.ndarray:
        """Dense F, available only below the dense-dimension cap."""
        self._require_dense("F")
        nl = self.state_dim
        eye = np.eye(nl)
        core = (
            np.eye(self.op_dim)
            - block_kron(eye, self.t, self.dim, self.dim)
            - block_kron(self.t, eye, self.dim, self.dim)
        )
        return self.a_i.T @ core

    @cached_property
    def rho_f(self) -> float:
        """Spectral radius of F: dense eigensolve when small, else power iteration."""
        if self.op_dim <= _DENSE_DIM_MAX:
            return float(np.abs(np.linalg.eigvals(self.f_dense)).max())
        return _power_radius(self.f_matvec, self.op_dim)


def _power_radius(matvec, dim: int, tol: float = _POWER_TOL, maxiter: int = _POWER_MAXITER) -> float:
    """Power iteration on a nonsymmetric operator, tracking the norm growth."""
    rng = np.random.default_rng(0x5EED)
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    estimate = 0.0
    history: list[float] = []
    for _ in range(maxiter):
        w = matvec(v)
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0
        history.append(norm)
        # damp the oscillation of complex-pair dominance
        current = float(np.sqrt(history[-1] * history[-2])) if len(history) > 1 else norm
        v = w / norm
        if abs(current - estimate) <= tol * max(1.0, abs(current)):
            return current
        estimate = current
    warnings.warn("power iteration hit the iteration cap", stacklevel=2)
    return estimate


def ms_artifacts(
    ms: MomentSet, model: SignalModel, eta: float, net: ClusteredNetwork
) -> MsArtifacts:
    """Assemble the mean-square operators and driving terms.

    Raises :class:`ProblemTooLarge` when N*L exceeds the memory guard.
    F keeps only terms linear in the mean step-sizes; the neglected
    second-order correction makes theory optimistic for large steps.
    """
    n, l = net.n_nodes, net.dim
    nl = n * l
    if nl > MAX_STATE_DIM:
        raise ProblemTooLarge(
            f"state dimension {nl} exceeds the guard {MAX_STATE_DIM}"
        )
    eye_n = np.eye(n)
    xa = np.kron(ms.abar, ms.abar) + ms.c_a
    xm = np.kron(ms.mbar, ms.mbar) + ms.c_m
    xp = np.kron(ms.pbar, ms.pbar) + ms.c_p
    xq = (
        np.eye(n * n)
        - np.kron(eye_n, ms.pbar)
        - np.kron(ms.pbar, eye_n)
        + xp
    )

    mbar_b = block_lift(ms.mbar, l)
    qbar = np.eye(nl) - block_lift(ms.pbar, l)
    t = mbar_b @ (model.rx_block + eta * qbar)

    l2 = l * l
    s_noise = model.noise_block
    g_b = _apply_core(xa.T, _apply_core(xm, bvec(s_noise, l), l2), l2)

    w_flat = model.w_star_flat
    r_b = _apply_core(
        xa.T,
        _apply_core(xm, _apply_core(xq, bvec(np.outer(w_flat, w_flat), l), l2), l2),
        l2,
    )

    w_col = w_flat[:, None]
    qw = (qbar @ w_flat)[:, None]
    eye_nl = np.eye(nl)
    term1 = block_kron(eye_nl, mbar_b @ qw, l, (l, 1))
    term2 = block_kron(model.rx_block, qw, l, (l, 1))
    term3 = _apply_core(xq, block_kron(eye_nl, w_col, l, (l, 1)), l2)
    k_cross = _apply_core(
        xa.T, term1 - _apply_core(xm, term2 + eta * term3, l2), l2
    )

    return MsArtifacts(
        n_nodes=n,
        dim=l,
        eta=eta,
        xa=xa,
        xm=xm,
        xp=xp,
        xq=xq,
        t=t,
        g_b=g_b,
        r_b=r_b,
        k_cross=k_cross,
        s_noise=s_noise,
    )


@dataclass(frozen=True)
class MsStabilityReport:
    """Exact spectral test plus the uniform-step sufficient bound."""

    rho: float
    stable: bool
    sufficient_bound: float
    mu_bar_max: float

    @property
    def bound_satisfied(self) -> bool:
        return 0.0 < self.mu_bar_max < self.sufficient_bound


def ms_stability(
    msa: MsArtifacts, ms: MomentSet, model: SignalModel, eta: float
) -> MsStabilityReport:
    """Mean-square stability: rho(F) < 1, bound 1 / (2 eta + max rho(Rx))."""
    rx_radius = max(float(np.abs(np.linalg.eigvalsh(r)).max()) for r in model.rx)
    return MsStabilityReport(
        rho=msa.rho_f,
        stable=msa.rho_f < 1.0,
        sufficient_bound=1.0 / (2.0 * eta + rx_radius),
        mu_bar_max=float(ms.mu_bar.max()),
    )


def kronecker_sum_terms(model: SignalModel, mu_bar: float, eta: float) -> np.ndarray:
    """Diagnostic eigenvalue combinations behind the mean-square bound.

    For uniform mean step ``mu_bar`` the block-diagonal part of F has
    eigenvalues 1 - eta mu - mu lam_j(Rx_k) - eta mu - mu lam_i(Rx_l)
    over all node pairs (k, l) and eigenvalue indices (i, j).
    """
    lams = [np.linalg.eigvalsh(r) for r in model.rx]
    out = []
    for lk in lams:
        for ll in lams:
            grid = 1.0 - mu_bar * (2.0 * eta + lk[None, :] + ll[:, None])
            out.append(grid.reshape(-1))
    return np.concatenate(out)


def transient_msd(
    msa: MsArtifacts,
    ma: MeanArtifacts,
    sigma: np.ndarray,
    w0_err: np.ndarray,
    horizon: int,
    stop_delta: float | None = None,
) -> np.ndarray:
    """Weighted deviation curve zeta(0..horizon) for the weighting ``sigma``.

    Maintains v(i) = (F')^i sigma with one operator application per step
    plus the mean recursion and the cross-term accumulator required by a
    nonzero regularization strength. With ``stop_delta`` set, iteration
    ends once |zeta(i+1) - zeta(i)| falls below it.
    """
    if msa.rho_f >= 1.0:
        warnings.warn(
            f"mean-square recursion unstable (rho(F) = {msa.rho_f:.6g});"
            " transient curve will diverge",
            stacklevel=2,
        )
    eta = msa.eta
    sigma = np.asarray(sigma, dtype=float)
    w0_err = np.asarray(w0_err, dtype=float).reshape(-1)
    b0 = bvec(np.outer(w0_err, w0_err), msa.dim)
    k_sigma = msa.k_cross.T @ sigma

    zeta = [float(b0 @ sigma)]
    v = sigma
    ew = w0_err.copy()
    gamma = np.zeros_like(sigma)
    for _ in range(horizon):
        v_next = msa.ft_matvec(v)
        step = float(
            msa.g_b @ v
            + eta**2 * (msa.r_b @ v)
            - b0 @ (v - v_next)
            + 2.0 * eta * (ew @ k_sigma)
            + 2.0 * eta * (gamma @ sigma)
        )
        zeta.append(zeta[-1] + step)
        if eta != 0.0:
            k_ew = msa.k_cross @ ew
            gamma = msa.f_matvec(gamma + k_ew) - k_ew
            ew = ma.bbar @ ew + eta * ma.r
        v = v_next
        if stop_delta is not None and abs(step) < stop_delta:
            break
    return np.array(zeta)


def moment_propagation_oracle(
    msa: MsArtifacts,
    ma: MeanArtifacts,
    sigma: np.ndarray,
    w0_err: np.ndarray,
    horizon: int,
) -> np.ndarray:
    """Same curve by propagating the full second moment of the error.

    m(i) = bvec(E[wt wt']) obeys m(i+1) = F m(i) + g_b + eta^2 r_b +
    2 eta K E[wt(i)], and zeta(i) = m(i)' sigma for any symmetric
    weighting. Independent implementation route used to cross-validate
    :func:`transient_msd`.
    """
    eta = msa.eta
    sigma = np.asarray(sigma, dtype=float)
    w0_err = np.asarray(w0_err, dtype=float).reshape(-1)
    m = bvec(np.outer(w0_err, w0_err), msa.dim)
    ew = w0_err.copy()
    zeta = [float(m @ sigma)]
    drive = msa.g_b + eta**2 * msa.r_b
    for _ in range(horizon):
        m = msa.f_matvec(m) + drive
        if eta != 0.0:
            m = m + 2.0 * eta * (msa.k_cross @ ew)
            ew = ma.bbar @ ew + eta * ma.r
        zeta.append(float(m @ sigma))
    return np.array(zeta)


def steady_state_msd(msa: MsArtifacts, ma: MeanArtifacts, sigma: np.ndarray) -> float:
    """Limiting weighted deviation via (I - F')^{-1} sigma.

    Requires both recursions stable; solves the linear system densely
    below the dimension cap and by GMRES on the factored operator above.
    """
    if msa.rho_f >= 1.0:
        raise UnstableMeanSquare(f"rho(F) = {msa.rho_f:.6g} >= 1")
    if ma.bias is None:
        raise UnstableMean(f"rho(Bbar) = {ma.rho_b:.6g} >= 1")
    sigma = np.asarray(sigma, dtype=float)
    dim = msa.op_dim
    if dim <= _DENSE_DIM_MAX:
        mat = np.eye(dim) - msa.f_dense.T
        x = np.linalg.solve(mat, sigma)
        _check_residual(mat, x, sigma)
    else:
        from scipy.sparse.linalg import LinearOperator, gmres

        op = LinearOperator(
            (dim, dim), matvec=lambda v: v - msa.ft_matvec(v), dtype=float
        )
        x, info = gmres(op, sigma, rtol=1e-12, atol=0.0, maxiter=2000)
        if info != 0:
            raise UnstableMeanSquare("GMRES failed to solve (I - F') x = sigma")
        res = float(np.linalg.norm(x - msa.ft_matvec(x) - sigma))
        if res > _SOLVE_RTOL * max(float(np.linalg.norm(sigma)), 1e-300):
            raise UnstableMeanSquare("steady-state solve residual too large")
    eta = msa.eta
    ew_inf = ma.bias
    return float(
        msa.g_b @ x + eta**2 * (msa.r_b @ x) + 2.0 * eta * (ew_inf @ (msa.k_cross.T @ x))
    )
