import itertools

import numpy as np
import pytest

from diffusion_lms import (
    BernoulliModel,
    BernoulliParams,
    build_network,
    make_signal_model,
    mean_artifacts,
    mean_stability,
    moment_propagation_oracle,
    moments,
    ms_artifacts,
    ms_stability,
    network_weighting,
    steady_state_msd,
    transient_msd,
)
from diffusion_lms.activation import sample_batch
from diffusion_lms.engine import iterate_weights, rng_for_run
from diffusion_lms.errors import ProblemTooLarge, UnstableMeanSquare
from diffusion_lms.theory import _power_radius, kronecker_sum_terms

from conftest import bernoulli_for, illustrative_network, two_node_two_cluster
from oracles import scalar_lms_learning_curve


def _two_node_setup(mu=0.2, q=0.5, eta=1.0, sigma2_z=0.01):
    """Two singleton clusters, unit-variance scalar regressors."""
    net = two_node_two_cluster(dim=1)
    model = make_signal_model(net, rx=np.ones(2), sigma2_z=sigma2_z,
                              cluster_tasks=[[0.0], [1.0]])
    rho = np.array([[0.0, 1.0], [1.0, 0.0]])
    params = BernoulliParams(
        mu=np.full(2, mu), q=np.full(2, q),
        a=np.zeros((2, 2)), p=np.zeros((2, 2)),
        rho=rho, r=np.ones((2, 2)),
    )
    return net, model, params, eta


def test_eta_zero_is_unbiased():
    net, model, params, _ = _two_node_setup()
    ma = mean_artifacts(moments(params, net), model, eta=0.0)
    # the drive enters the mean recursion scaled by eta, so it vanishes
    np.testing.assert_allclose(0.0 * ma.r, 0.0, atol=1e-15)
    np.testing.assert_allclose(ma.bias, 0.0, atol=1e-15)


def test_self_regularization_only_is_unbiased():
    net = two_node_two_cluster(dim=1)
    model = make_signal_model(net, rx=np.ones(2), sigma2_z=0.01,
                              cluster_tasks=[[0.0], [1.0]])
    params = BernoulliParams(
        mu=np.full(2, 0.1), q=np.ones(2),
        a=np.zeros((2, 2)), p=np.zeros((2, 2)),
        rho=np.zeros((2, 2)), r=np.zeros((2, 2)),
    )
    ma = mean_artifacts(moments(params, net), model, eta=1.0)
    np.testing.assert_allclose(ma.qbar, 0.0, atol=1e-15)
    np.testing.assert_allclose(ma.r, 0.0, atol=1e-15)
    np.testing.assert_allclose(ma.bias, 0.0, atol=1e-15)


def test_two_node_mean_artifacts_hand_values():
    net, model, params, eta = _two_node_setup()
    ma = mean_artifacts(moments(params, net), model, eta)
    np.testing.assert_allclose(ma.bbar, [[0.8, 0.1], [0.1, 0.8]], atol=1e-15)
    np.testing.assert_allclose(ma.r, [-0.1, 0.1], atol=1e-15)
    np.testing.assert_allclose(ma.bias, [-1.0 / 3.0, 1.0 / 3.0], rtol=1e-12)


def test_bias_matches_simulated_mean_trajectory():
    net, model, params, eta = _two_node_setup()
    ma = mean_artifacts(moments(params, net), model, eta)
    total = np.zeros(2)
    count = 0
    states = iterate_weights(net, model, BernoulliModel(params), eta, 200_000,
                             rng_data=rng_for_run(21, 0, 0),
                             rng_act=rng_for_run(21, 0, 1))
    for i, w in enumerate(states):
        if i >= 5_000:
            total += model.w_star_flat - w[:, 0]
            count += 1
    avg = total / count
    np.testing.assert_allclose(avg, ma.bias, rtol=0.1)


def test_mean_bound_formula():
    net = two_node_two_cluster(dim=2)
    model = make_signal_model(net, rx=np.ones(2), sigma2_z=0.01,
                              cluster_tasks=[np.zeros(2), np.zeros(2)])
    params = bernoulli_for(net, mu=0.01)
    ms = moments(params, net)
    report = mean_stability(mean_artifacts(ms, model, 1.0), ms, model, 1.0)
    assert report.sufficient_bound == pytest.approx(2.0 / 3.0)


def test_single_node_reduces_to_classic_lms_bound():
    net = build_network(1, 2, edges=[], clusters=[{0}])
    rx = np.array([[[2.0, 0.0], [0.0, 0.5]]])
    model = make_signal_model(net, rx=rx, sigma2_z=0.01, cluster_tasks=[np.zeros(2)])
    params = BernoulliParams(mu=np.array([0.1]), q=np.ones(1),
                             a=np.zeros((1, 1)), p=np.zeros((1, 1)),
                             rho=np.zeros((1, 1)), r=np.zeros((1, 1)))
    ms = moments(params, net)
    report = mean_stability(mean_artifacts(ms, model, 0.0), ms, model, 0.0)
    assert report.sufficient_bound == pytest.approx(2.0 / 2.0)
    # exact spectral test agrees: stable iff mu < 2 / lambda_max
    for mu, stable in [(0.9, True), (1.05, False)]:
        p2 = BernoulliParams(mu=np.array([mu]), q=np.ones(1),
                             a=np.zeros((1, 1)), p=np.zeros((1, 1)),
                             rho=np.zeros((1, 1)), r=np.zeros((1, 1)))
        ma = mean_artifacts(moments(p2, net), model, 0.0)
        assert (ma.rho_b < 1.0) == stable


def _exact_bernoulli_expectations(net, params, model, eta):
    """Exact defining expectations for a 2-node, L=1, link-only model.

    Enumerates the Bernoulli patterns of (mu, rho) (no intra links) and
    integrates the Gaussian regressors analytically via E[x^2] = v and
    E[x^4] = 3 v^2. Independent of the package assembly code.
    """
    sig2 = np.array([model.rx[0, 0, 0], model.rx[1, 0, 0]])
    e_r = np.diag(sig2)
    e_rkr = np.zeros((4, 4))
    for i in range(2):
        for k in range(2):
            val = 3 * sig2[i] ** 2 if i == k else sig2[i] * sig2[k]
            e_rkr[i * 2 + k, i * 2 + k] = val

    f_exact = np.zeros((4, 4))
    e_t_kron_t = np.zeros((4, 4))
    e_gg = np.zeros((2, 2))
    e_rr = np.zeros((2, 2))
    e_b_kron_r = np.zeros((4, 2))
    w = model.w_star_flat
    s_mat = np.diag(model.sigma2_z * sig2)
    mu, q = params.mu, params.q
    rho, r_prob = params.rho, params.r
    for bits in itertools.product((0, 1), repeat=4):
        m0, m1, l01, l10 = bits
        prob = (
            (q[0] if m0 else 1 - q[0]) * (q[1] if m1 else 1 - q[1])
            * (r_prob[0, 1] if l01 else 1 - r_prob[0, 1])
            * (r_prob[1, 0] if l10 else 1 - r_prob[1, 0])
        )
        m_mat = np.diag([mu[0] * m0, mu[1] * m1])
        p_mat = np.array(
            [[1.0 - rho[0, 1] * l01, rho[0, 1] * l01],
             [rho[1, 0] * l10, 1.0 - rho[1, 0] * l10]]
        )
        q_mat = np.eye(2) - p_mat
        d_mat = np.eye(2) - eta * m_mat @ q_mat
        mr_weight = m_mat  # R enters as M R with R = diag(x_k^2)
        # E[kron(D - MR, D - MR)] with E over the regressors only
        e_bb = (
            np.kron(d_mat, d_mat)
            - np.kron(d_mat, mr_weight @ e_r)
            - np.kron(mr_weight @ e_r, d_mat)
            + np.kron(mr_weight, mr_weight) @ e_rkr
        )
        f_exact += prob * e_bb
        t_det = eta * m_mat @ q_mat
        e_tt = (
            np.kron(t_det, t_det)
            + np.kron(t_det, mr_weight @ e_r)
            + np.kron(mr_weight @ e_r, t_det)
            + np.kron(mr_weight, mr_weight) @ e_rkr
        )
        e_t_kron_t += prob * e_tt
        e_gg += prob * (m_mat @ s_mat @ m_mat)
        r_vec = m_mat @ q_mat @ w
        e_rr += prob * np.outer(r_vec, r_vec)
        e_b_kron_r += prob * (
            np.kron(d_mat, r_vec[:, None]) - np.kron(mr_weight @ e_r, r_vec[:, None])
        )
    return f_exact, e_t_kron_t, e_gg, e_rr, e_b_kron_r


def test_ms_artifacts_match_exact_defining_expectations():
    net, model, params, eta = _two_node_setup(mu=0.3, q=0.6, eta=0.8)
    ms = moments(params, net)
    msa = ms_artifacts(ms, model, eta, net)
    f_exact, e_tt, e_gg, e_rr, e_bkr = _exact_bernoulli_expectations(
        net, params, model, eta
    )
    # the implemented F drops exactly the second-order step-size term
    a_i = msa.a_i
    np.testing.assert_allclose(msa.f_dense, f_exact - a_i.T @ e_tt, atol=1e-12)
    np.testing.assert_allclose(msa.g_b, e_gg.reshape(-1, order="F"), atol=1e-14)
    np.testing.assert_allclose(msa.r_b, e_rr.reshape(-1, order="F"), atol=1e-14)
    np.testing.assert_allclose(msa.k_cross, e_bkr, atol=1e-13)


def test_ms_artifacts_match_sample_means():
    net, model, params, eta = _two_node_setup(mu=0.25, q=0.7, eta=0.6)
    ms = moments(params, net)
    msa = ms_artifacts(ms, model, eta, net)
    rng = np.random.default_rng(17)
    draws = 200_000
    mus, amats, pmats = sample_batch(params, net, rng, draws)
    xs = rng.standard_normal((draws, 2))
    zs = np.sqrt(model.sigma2_z) * rng.standard_normal((draws, 2))
    g_sum = np.zeros((2, 2))
    bb_sum = np.zeros((4, 4))
    tt_sum = np.zeros((4, 4))
    g_mean = np.zeros(2)
    for s in range(draws):
        m_mat = np.diag(mus[s])
        q_mat = np.eye(2) - pmats[s]
        r_mat = np.diag(xs[s] ** 2)
        t_mat = m_mat @ (r_mat + eta * q_mat)
        b_mat = amats[s].T @ (np.eye(2) - t_mat)
        g_vec = amats[s].T @ (mus[s] * xs[s] * zs[s])
        bb_sum += np.kron(b_mat, b_mat)
        tt_sum += np.kron(t_mat, t_mat)
        g_sum += np.outer(g_vec, g_vec)
        g_mean += g_vec
    a_i = msa.a_i
    f_est = bb_sum / draws - a_i.T @ (tt_sum / draws)
    assert np.abs(f_est - msa.f_dense).max() < 0.02
    assert np.abs(g_sum.reshape(-1, order="F") / draws - msa.g_b).max() < 5e-5
    # zero-mean noise drive: sample mean shrinks like 1/sqrt(draws)
    assert np.abs(g_mean / draws).max() < 5 * 0.25 / np.sqrt(draws)


def test_zero_covariance_reduces_to_synchronous_operators():
    net = illustrative_network()
    model = make_signal_model(net, rx=np.linspace(0.8, 1.2, 10), sigma2_z=0.02,
                              cluster_tasks=[np.array([0.5, -0.4])] * 4)
    params = bernoulli_for(net, q=1.0, p=1.0, r=1.0)
    ms = moments(params, net)
    msa = ms_artifacts(ms, model, 1.0, net)
    l2 = net.dim**2
    np.testing.assert_allclose(msa.a_i, np.kron(np.kron(ms.abar, ms.abar), np.eye(l2)),
                               atol=1e-14)
    np.testing.assert_allclose(msa.p_i, np.kron(np.kron(ms.pbar, ms.pbar), np.eye(l2)),
                               atol=1e-14)


def test_identity_regularization_matrix_kills_bias_drive():
    net = two_node_two_cluster(dim=1)
    model = make_signal_model(net, rx=np.ones(2), sigma2_z=0.01,
                              cluster_tasks=[[0.0], [1.0]])
    params = BernoulliParams(
        mu=np.full(2, 0.1), q=np.ones(2),
        a=np.zeros((2, 2)), p=np.zeros((2, 2)),
        rho=np.zeros((2, 2)), r=np.zeros((2, 2)),
    )
    msa = ms_artifacts(moments(params, net), model, 1.0, net)
    np.testing.assert_allclose(msa.q_i, 0.0, atol=1e-15)
    np.testing.assert_allclose(msa.r_b, 0.0, atol=1e-15)


def test_transient_matches_classical_scalar_lms():
    net = build_network(1, 1, edges=[], clusters=[{0}])
    var_x, var_z, mu = 1.3, 0.05, 0.02
    model = make_signal_model(net, rx=np.array([var_x]), sigma2_z=var_z,
                              cluster_tasks=[[0.8]])
    params = BernoulliParams(mu=np.array([mu]), q=np.ones(1),
                             a=np.zeros((1, 1)), p=np.zeros((1, 1)),
                             rho=np.zeros((1, 1)), r=np.zeros((1, 1)))
    ms = moments(params, net)
    ma = mean_artifacts(ms, model, 0.0)
    msa = ms_artifacts(ms, model, 0.0, net)
    sigma = network_weighting(net)
    got = transient_msd(msa, ma, sigma, model.w_star_flat, horizon=400)
    expected = scalar_lms_learning_curve(mu, var_x, var_z, 0.8**2, 400)
    np.testing.assert_allclose(got, expected, rtol=1e-12)
    # steady state from the same chain, scalar closed form
    star = steady_state_msd(msa, ma, sigma)
    assert star == pytest.approx(mu * var_z / 2.0, rel=1e-12)


def test_transient_horizon_zero():
    net, model, params, eta = _two_node_setup()
    ms = moments(params, net)
    ma = mean_artifacts(ms, model, eta)
    msa = ms_artifacts(ms, model, eta, net)
    sigma = network_weighting(net)
    w0 = model.w_star_flat
    curve = transient_msd(msa, ma, sigma, w0, horizon=0)
    assert curve.shape == (1,)
    assert curve[0] == pytest.approx((w0 @ w0) / 2.0)


def _random_stable_instance(seed):
    rng = np.random.default_rng(seed)
    while True:
        n = int(rng.integers(2, 7))
        l = int(rng.integers(1, 4))
        if n * l <= 20:
            break
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        edges = []
        for i in range(1, n):
            edges.append((int(rng.integers(0, i)), i))
        extra = rng.random((n, n)) < 0.3
        for i in range(n):
            for j in range(i + 1, n):
                if extra[i, j]:
                    edges.append((i, j))
        n_clusters = int(rng.integers(1, min(n, 3) + 1))
        assignment = [int(rng.integers(0, n_clusters)) for _ in range(n)]
        for c in range(n_clusters):
            assignment[c % n] = c
        clusters = [
            {i for i, a in enumerate(assignment) if a == c} for c in range(n_clusters)
        ]
        clusters = [c for c in clusters if c]
        net = build_network(n, l, edges, clusters)
    lam = rng.uniform(0.5, 2.0, size=(n, l))
    basis = np.linalg.qr(rng.standard_normal((n, l, l)))[0]
    rx = np.einsum("nij,nj,nkj->nik", basis, lam, basis)
    model = make_signal_model(
        net, rx=rx, sigma2_z=rng.uniform(0.01, 0.05, n),
        cluster_tasks=[rng.uniform(-1, 1, l) for _ in clusters],
    )
    eta = float(rng.uniform(0.0, 1.5))
    bound = 1.0 / (2 * eta + max(np.abs(np.linalg.eigvalsh(r)).max() for r in model.rx))
    q = float(rng.uniform(0.5, 1.0))
    mu_nom = 0.5 * bound / q
    params = bernoulli_for(net, mu=mu_nom, q=q,
                           p=float(rng.uniform(0.5, 1.0)),
                           r=float(rng.uniform(0.5, 1.0)))
    return net, model, params, eta


@pytest.mark.parametrize("seed", range(6))
def test_dual_route_consistency(seed):
    net, model, params, eta = _random_stable_instance(seed)
    ms = moments(params, net)
    ma = mean_artifacts(ms, model, eta)
    msa = ms_artifacts(ms, model, eta, net)
    sigma = network_weighting(net)
    w0 = model.w_star_flat
    a = transient_msd(msa, ma, sigma, w0, horizon=300)
    b = moment_propagation_oracle(msa, ma, sigma, w0, horizon=300)
    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-14)


def test_steady_state_agrees_with_converged_transient():
    net, model, params, eta = _two_node_setup(mu=0.1, q=0.7, eta=0.8)
    ms = moments(params, net)
    ma = mean_artifacts(ms, model, eta)
    msa = ms_artifacts(ms, model, eta, net)
    sigma = network_weighting(net)
    curve = transient_msd(msa, ma, sigma, model.w_star_flat, horizon=50_000,
                          stop_delta=1e-14)
    star = steady_state_msd(msa, ma, sigma)
    assert abs(10 * np.log10(curve[-1] / star)) < 0.01


def test_factored_operator_matches_dense():
    net, model, params, eta = _two_node_setup(mu=0.2, q=0.6, eta=0.9)
    ms = moments(params, net)
    msa = ms_artifacts(ms, model, eta, net)
    rng = np.random.default_rng(0)
    for _ in range(10):
        v = rng.standard_normal(msa.op_dim)
        np.testing.assert_allclose(msa.f_matvec(v), msa.f_dense @ v, atol=1e-12)
        np.testing.assert_allclose(msa.ft_matvec(v), msa.f_dense.T @ v, atol=1e-12)


def test_power_iteration_matches_dense_radius():
    net, model, params, eta = _two_node_setup(mu=0.15, q=0.8, eta=0.5)
    msa = ms_artifacts(moments(params, net), model, eta, net)
    dense = float(np.abs(np.linalg.eigvals(msa.f_dense)).max())
    power = _power_radius(msa.f_matvec, msa.op_dim)
    assert power == pytest.approx(dense, rel=1e-6)


def test_ms_bound_formula_and_ordering():
    net = two_node_two_cluster(dim=2)
    model = make_signal_model(net, rx=np.ones(2), sigma2_z=0.01,
                              cluster_tasks=[np.zeros(2), np.zeros(2)])
    params = bernoulli_for(net, mu=0.01)
    ms = moments(params, net)
    msa = ms_artifacts(ms, model, 1.0, net)
    report = ms_stability(msa, ms, model, 1.0)
    assert report.sufficient_bound == pytest.approx(1.0 / 3.0)
    rng = np.random.default_rng(2)
    for _ in range(100):
        eta, radius = rng.uniform(0, 3), rng.uniform(0.1, 5)
        assert 1 / (2 * eta + radius) <= 2 / (radius + 2 * eta)


def test_kronecker_sum_diagnostic():
    net = two_node_two_cluster(dim=2)
    rx = np.stack([np.diag([1.0, 2.0]), np.diag([0.5, 1.5])])
    model = make_signal_model(net, rx=rx, sigma2_z=0.01,
                              cluster_tasks=[np.zeros(2), np.zeros(2)])
    terms = kronecker_sum_terms(model, mu_bar=0.1, eta=0.5)
    assert terms.shape == (16,)
    expected = 1 - 0.1 * (2 * 0.5 + 1.0 + 0.5)  # lam_j=1 at node 0, lam_i=0.5 at node 1
    assert np.any(np.isclose(terms, expected))


def test_memory_guard():
    net = build_network(2, 300, edges=[(0, 1)], clusters=[{0}, {1}])
    model = make_signal_model(net, rx=np.ones(2), sigma2_z=0.01,
                              cluster_tasks=[np.zeros(300), np.zeros(300)])
    params = bernoulli_for(net, mu=0.001)
    ms = moments(params, net)
    with pytest.raises(ProblemTooLarge):
        ms_artifacts(ms, model, 0.0, net)


def test_unstable_steady_state_raises():
    net, model, params, eta = _two_node_setup(mu=1.9, q=1.0, eta=0.0)
    ms = moments(params, net)
    ma = mean_artifacts(ms, model, eta)
    msa = ms_artifacts(ms, model, eta, net)
    assert msa.rho_f >= 1.0
    with pytest.raises(UnstableMeanSquare):
        steady_state_msd(msa, ma, network_weighting(net))


def test_idle_probability_does_not_improve_steady_state():
    net = illustrative_network()
    model = make_signal_model(net, rx=np.linspace(0.8, 1.2, 10), sigma2_z=0.02,
                              cluster_tasks=[np.array([0.5, -0.4])] * 4)
    sigma = network_weighting(net)
    stars = []
    for prob in (1.0, 0.7, 0.5):
        params = bernoulli_for(net, mu=0.03, q=prob, p=prob, r=prob)
        ms = moments(params, net)
        ma = mean_artifacts(ms, model, 1.0)
        msa = ms_artifacts(ms, model, 1.0, net)
        stars.append(steady_state_msd(msa, ma, sigma))
    assert stars[0] <= stars[1] <= stars[2]


def test_transient_tracks_small_monte_carlo():
    # step small enough that the dropped second-order term stays sub-0.5 dB
    net, model, params, eta = _two_node_setup(mu=0.04, q=0.7, eta=0.5, sigma2_z=0.02)
    ms = moments(params, net)
    ma = mean_artifacts(ms, model, eta)
    msa = ms_artifacts(ms, model, eta, net)
    sigma = network_weighting(net)
    theory = transient_msd(msa, ma, sigma, model.w_star_flat, horizon=1000)
    from diffusion_lms import run_monte_carlo

    sim = run_monte_carlo(net, model, BernoulliModel(params), eta,
                          horizon=1000, runs=400, seed=3)
    tail_theory = theory[-200:].mean()
    tail_sim = sim.msd[-200:].mean()
    assert abs(10 * np.log10(tail_sim / tail_theory)) < 0.5
