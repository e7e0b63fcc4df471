"""Block vectorization and block Kronecker products.

A matrix of shape ``(n*p, m*q)`` is treated as an n-by-m grid of p-by-q
blocks. The conventions are fixed once and pinned by the identity suite
in the tests:

- ``bvec`` scans the block grid column by column and vectorizes each
  block in column-major order;
- ``block_kron(a, b)`` places the ordinary Kronecker product
  ``A_ij (x) B_kl`` at block row ``i*r + k``, block column ``j*s + l``,
  where ``b`` has an r-by-s block grid.

With these choices the familiar identities carry over from ``vec`` and
``kron``: ``bvec(x y^T) = y (x)_b x``, ``bvec(A B C) = (C^T (x)_b A)
bvec(B)``, ``(A kron B) (x)_b (C kron D) = (A kron C) kron (B kron D)``,
``trace(A B) = bvec(B^T)^T bvec(A)``, and so on.
"""
from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, NonSymmetricWeight


def _block_shape(block) -> tuple[int, int]:
    if np.isscalar(block):
        return int(block), int(block)
    p, q = block
    return int(p), int(q)


def _grid(mat: np.ndarray, block) -> tuple[int, int, int, int]:
    p, q = _block_shape(block)
    rows, cols = mat.shape
    if rows % p or cols % q:
        raise DimensionMismatch(
            f"matrix shape {mat.shape} not divisible into {p}x{q} blocks"
        )
    return rows // p, cols // q, p, q


def bvec(mat: np.ndarray, block) -> np.ndarray:
    """Stack the column-major vectorizations of every block of ``mat``.

    Blocks are visited column by column over the block grid; ``block``
    is the block shape, either an int (square blocks) or ``(p, q)``.
    """
    mat = np.asarray(mat)
    n, m, p, q = _grid(mat, block)
    # axes: (block-row, intra-row, block-col, intra-col) -> (j, k, c, r)
    return mat.reshape(n, p, m, q).transpose(2, 0, 3, 1).reshape(-1)


def unbvec(v: np.ndarray, grid, block) -> np.ndarray:
    """Inverse of :func:`bvec` for a block matrix with the given grid."""
    v = np.asarray(v)
    n, m = grid
    p, q = _block_shape(block)
    if v.size != n * m * p * q:
        raise DimensionMismatch(
            f"vector of size {v.size} cannot fill a {n}x{m} grid of {p}x{q} blocks"
        )
    return v.reshape(m, n, q, p).transpose(1, 3, 0, 2).reshape(n * p, m * q)


def block_kron(a: np.ndarray, b: np.ndarray, a_block, b_block) -> np.ndarray:
    """Block Kronecker product of two block matrices.

    For ``a`` an n-by-m grid of ``a_block`` blocks and ``b`` an r-by-s
    grid of ``b_block`` blocks, the result is an (n*r)-by-(m*s) grid of
    Kronecker-product blocks ``A_ij (x) B_kl``.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    na, ma, pa, qa = _grid(a, a_block)
    nb, mb, pb, qb = _grid(b, b_block)
    a4 = a.reshape(na, pa, ma, qa)
    b4 = b.reshape(nb, pb, mb, qb)
    z = np.einsum("irjc,ksld->ikrsjlcd", a4, b4)
    return z.reshape(na * nb * pa * pb, ma * mb * qa * qb)


def block_lift(mat: np.ndarray, dim: int) -> np.ndarray:
    """Expand each scalar entry of ``mat`` to ``entry * I_dim``."""
    return np.kron(np.asarray(mat), np.eye(dim))


def weighted_sq_norm(v: np.ndarray, sigma: np.ndarray, block: int) -> float:
    """Weighted squared norm ``v^T S v`` with ``sigma = bvec(S)``.

    ``S`` must be symmetric positive semi-definite with ``block``-sized
    blocks; the value is evaluated through the trace identity as
    ``bvec(v v^T)^T sigma``, which agrees with the direct quadratic form.
    Raises :class:`NonSymmetricWeight` if the matrix reconstructed from
    ``sigma`` is not symmetric within tolerance.
    """
    v = np.asarray(v, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if v.size * v.size != sigma.size:
        raise DimensionMismatch(
            f"weight vector of size {sigma.size} does not match state size {v.size}"
        )
    n = v.size // block
    mat = unbvec(sigma, (n, n), block)
    scale = max(1.0, float(np.abs(mat).max()))
    if not np.allclose(mat, mat.T, atol=1e-9 * scale, rtol=0.0):
        raise NonSymmetricWeight("weight vector does not encode a symmetric matrix")
    return float(bvec(np.outer(v, v), block) @ sigma)
