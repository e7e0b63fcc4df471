"""The seven block-operator identities are the module's correctness contract."""
import numpy as np
import pytest

from diffusion_lms.blocklinalg import (
    block_kron,
    block_lift,
    bvec,
    unbvec,
    weighted_sq_norm,
)
from diffusion_lms.errors import DimensionMismatch, NonSymmetricWeight


def _rand(rng, n, m, l):
    return rng.uniform(-1.0, 1.0, size=(n * l, m * l))


def _dims(rng):
    n, m, l = rng.integers(1, 5), rng.integers(1, 5), rng.integers(1, 4)
    return int(n), int(m), int(l)


def test_bvec_scalar_blocks_is_plain_vec(rng):
    a = rng.standard_normal((3, 4))
    assert np.array_equal(bvec(a, 1), a.reshape(-1, order="F"))


def test_bvec_identity_blocks():
    eye = np.eye(4)
    got = bvec(eye, 2)
    blocks = [eye[r : r + 2, c : c + 2] for c in (0, 2) for r in (0, 2)]
    expected = np.concatenate([b.reshape(-1, order="F") for b in blocks])
    assert np.array_equal(got, expected)


def test_unbvec_roundtrip(rng):
    for _ in range(20):
        n, m, l = _dims(rng)
        a = _rand(rng, n, m, l)
        assert np.array_equal(unbvec(bvec(a, l), (n, m), l), a)


def test_outer_product_identity(rng):
    # bvec(x y^T) equals y block-kron x for block column vectors
    for _ in range(100):
        n, _, l = _dims(rng)
        x = rng.uniform(-1, 1, n * l)
        y = rng.uniform(-1, 1, n * l)
        lhs = bvec(np.outer(x, y), l)
        rhs = block_kron(y[:, None], x[:, None], (l, 1), (l, 1)).reshape(-1)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12, rtol=0)


def test_bilinearity(rng):
    for _ in range(100):
        n, m, l = _dims(rng)
        a, b = _rand(rng, n, m, l), _rand(rng, n, m, l)
        c, d = _rand(rng, n, m, l), _rand(rng, n, m, l)
        lhs = block_kron(a + b, c + d, l, l)
        rhs = (
            block_kron(a, c, l, l)
            + block_kron(a, d, l, l)
            + block_kron(b, c, l, l)
            + block_kron(b, d, l, l)
        )
        np.testing.assert_allclose(lhs, rhs, atol=1e-12, rtol=0)


def test_mixed_product(rng):
    # (A C) bk (B D) = (A bk B)(C bk D)
    for _ in range(100):
        n, m, l = _dims(rng)
        k = int(rng.integers(1, 5))
        a, b = _rand(rng, n, m, l), _rand(rng, n, m, l)
        c, d = _rand(rng, m, k, l), _rand(rng, m, k, l)
        lhs = block_kron(a @ c, b @ d, l, l)
        rhs = block_kron(a, b, l, l) @ block_kron(c, d, l, l)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12, rtol=0)


def test_kron_of_krons(rng):
    # (A kron B) bk (C kron D) = (A kron C) kron (B kron D)
    for _ in range(100):
        n = int(rng.integers(1, 5))
        l = int(rng.integers(1, 4))
        a, c = rng.uniform(-1, 1, (n, n)), rng.uniform(-1, 1, (n, n))
        b, d = rng.uniform(-1, 1, (l, l)), rng.uniform(-1, 1, (l, l))
        lhs = block_kron(np.kron(a, b), np.kron(c, d), l, l)
        rhs = np.kron(np.kron(a, c), np.kron(b, d))
        np.testing.assert_allclose(lhs, rhs, atol=1e-12, rtol=0)


def test_trace_identity(rng):
    for _ in range(100):
        n, m, l = _dims(rng)
        a = _rand(rng, n, m, l)
        b = _rand(rng, m, n, l)
        lhs = np.trace(a @ b)
        rhs = bvec(b.T, l) @ bvec(a, l)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12, rtol=0)


def test_sandwich_identity(rng):
    # bvec(A B C) = (C^T bk A) bvec(B)
    for _ in range(100):
        n, m, l = _dims(rng)
        k = int(rng.integers(1, 5))
        a = _rand(rng, n, n, l)
        b = _rand(rng, n, m, l)
        c = _rand(rng, m, k, l)
        lhs = bvec(a @ b @ c, l)
        rhs = block_kron(c.T, a, l, l) @ bvec(b, l)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12, rtol=0)


def test_transpose_identity(rng):
    for _ in range(100):
        n, m, l = _dims(rng)
        a, b = _rand(rng, n, m, l), _rand(rng, n, m, l)
        lhs = block_kron(a, b, l, l).T
        rhs = block_kron(a.T, b.T, l, l)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12, rtol=0)


def test_scalar_blocks_reduce_to_plain_kron(rng):
    a = rng.standard_normal((3, 3))
    b = rng.standard_normal((3, 3))
    np.testing.assert_allclose(block_kron(a, b, 1, 1), np.kron(a, b), atol=1e-14)


def test_identity_block_kron_identity():
    eye = np.eye(6)
    got = block_kron(eye, eye, 2, 2)
    np.testing.assert_allclose(got, np.eye(36), atol=0)


def test_lifted_combination_matrices(rng):
    # (A kron I) bk (A kron I) = (A kron A) kron I_{l^2}
    a = rng.uniform(-1, 1, (3, 3))
    l = 2
    lifted = block_lift(a, l)
    lhs = block_kron(lifted, lifted, l, l)
    rhs = np.kron(np.kron(a, a), np.eye(l * l))
    np.testing.assert_allclose(lhs, rhs, atol=1e-13, rtol=0)


def test_weighted_sq_norm_matches_quadratic_form(rng):
    for _ in range(50):
        n, _, l = _dims(rng)
        v = rng.uniform(-1, 1, n * l)
        half = rng.uniform(-1, 1, (n * l, n * l))
        mat = half @ half.T
        got = weighted_sq_norm(v, bvec(mat, l), l)
        np.testing.assert_allclose(got, v @ mat @ v, atol=1e-12, rtol=1e-12)


def test_weighted_sq_norm_zero_vector(rng):
    mat = np.eye(6) / 3
    assert weighted_sq_norm(np.zeros(6), bvec(mat, 2), 2) == 0.0


def test_weighted_sq_norm_network_msd_weighting(rng):
    v = rng.standard_normal(8)
    mat = np.eye(8) / 4.0
    got = weighted_sq_norm(v, bvec(mat, 2), 2)
    np.testing.assert_allclose(got, (v @ v) / 4.0, rtol=1e-14)


def test_weighted_sq_norm_rejects_asymmetric(rng):
    mat = np.eye(4)
    mat[0, 1] = 0.5
    with pytest.raises(NonSymmetricWeight):
        weighted_sq_norm(np.ones(4), bvec(mat, 2), 2)


def test_dimension_mismatch_raised():
    with pytest.raises(DimensionMismatch):
        bvec(np.ones((3, 3)), 2)
    with pytest.raises(DimensionMismatch):
        weighted_sq_norm(np.ones(4), np.ones(15), 2)
