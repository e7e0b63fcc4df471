"""Shared builders for small test networks and parameter sets."""
import numpy as np
import pytest

from diffusion_lms import (
    BernoulliParams,
    build_network,
    uniform_inter_factors,
    uniform_intra_weights,
)


def two_node_two_cluster(dim=1):
    """Two singleton clusters joined by one edge."""
    return build_network(2, dim, edges=[(0, 1)], clusters=[{0}, {1}])


def path4_two_clusters(dim=1):
    """Path 0-1-2-3 with clusters {0,1} and {2,3}."""
    return build_network(4, dim, edges=[(0, 1), (1, 2), (2, 3)], clusters=[{0, 1}, {2, 3}])


def illustrative_network(dim=2):
    """10 nodes in 4 clusters: cluster triangles/pairs joined in a ring.

    The cross-cluster edges are (2,3), (5,6), (7,8), (0,9); nodes 1 and 4
    have no out-of-cluster neighbor.
    """
    edges = [
        (0, 1), (0, 2), (1, 2),
        (3, 4), (3, 5), (4, 5),
        (6, 7),
        (8, 9),
        (2, 3), (5, 6), (7, 8), (0, 9),
    ]
    clusters = [{0, 1, 2}, {3, 4, 5}, {6, 7}, {8, 9}]
    return build_network(10, dim, edges=edges, clusters=clusters)


def bernoulli_for(net, mu=0.03, q=0.7, p=0.7, r=0.7):
    """Averaging-rule nominals with scalar probabilities everywhere."""
    n = net.n_nodes
    a = uniform_intra_weights(net)
    rho = uniform_inter_factors(net)
    return BernoulliParams(
        mu=np.full(n, float(mu)),
        q=np.full(n, float(q)),
        a=a,
        p=np.full((n, n), float(p)),
        rho=rho,
        r=np.full((n, n), float(r)),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
