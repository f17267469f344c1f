import numpy as np
import pytest
from scipy.sparse import csr_matrix

from netsample import Graph


def graph_from_edges(edges, n=None, weights=None):
    """Build a Graph from an undirected edge list of (u, v) pairs."""
    edges = list(edges)
    rows = np.array([e[0] for e in edges])
    cols = np.array([e[1] for e in edges])
    if weights is None:
        data = np.ones(len(edges))
    else:
        data = np.asarray(weights, dtype=float)
    if n is None:
        n = int(max(rows.max(), cols.max())) + 1
    adj = csr_matrix((data, (rows, cols)), shape=(n, n))
    adj = adj + adj.T
    adj = adj.tocsr()
    adj.sort_indices()
    return Graph(adj=adj, labels=np.arange(n))


def path_graph(n, weights=None):
    return graph_from_edges([(i, i + 1) for i in range(n - 1)], n=n, weights=weights)


def star_graph(n_leaves):
    return graph_from_edges([(0, i) for i in range(1, n_leaves + 1)])


def complete_graph(n):
    return graph_from_edges([(i, j) for i in range(n) for j in range(i + 1, n)], n=n)


def triangle_pendant_graph():
    """Triangle 0-1-2 plus pendant node 3 hanging off node 2."""
    return graph_from_edges([(0, 1), (1, 2), (0, 2), (2, 3)])


@pytest.fixture
def rng():
    return np.random.default_rng(20240819)
