"""Adjacency and row-standardized weight matrices for SAR models.

Node labels are 1-based on input, matching edge lists produced by
sampling integers in ``1..n``.
"""

import numpy as np


class GraphError(ValueError):
    """Raised when an edge list or adjacency matrix cannot define W."""


def build_adjacency(nodes, n):
    """Binary symmetric adjacency matrix from a flat edge list.

    Consecutive pairs ``(nodes[0], nodes[1])``, ``(nodes[2], nodes[3])``, ...
    become undirected edges. Repeated edges are idempotent and self-pairs
    are dropped.

    Parameters
    ----------
    nodes : sequence of int
        Flat list of 1-based node labels, even length.
    n : int
        Number of nodes.

    Returns
    -------
    numpy.ndarray
        ``(n, n)`` float array with entries in {0, 1} and zero diagonal.
    """
    nodes = np.asarray(nodes)
    n = int(n)
    if n < 1:
        raise GraphError(f"node count must be positive, got {n}")
    if nodes.ndim != 1:
        raise GraphError("nodes must be a flat sequence")
    if nodes.size % 2:
        raise GraphError(f"edge list has odd length {nodes.size}")
    if not np.issubdtype(nodes.dtype, np.integer):
        if nodes.size and not np.all(np.equal(np.mod(nodes, 1), 0)):
            raise GraphError("node labels must be integers")
        nodes = nodes.astype(np.int64)
    bad = (nodes < 1) | (nodes > n)
    if np.any(bad):
        raise GraphError(
            f"node labels out of range [1, {n}]: {sorted(set(nodes[bad].tolist()))}"
        )

    A = np.zeros((n, n))
    src = nodes[0::2] - 1
    dst = nodes[1::2] - 1
    keep = src != dst
    A[src[keep], dst[keep]] = 1.0
    A[dst[keep], src[keep]] = 1.0
    return A


def row_standardize(A):
    """Divide each row of ``A`` by its sum.

    Raises
    ------
    GraphError
        If any node is isolated (all-zero row); the error lists the
        offending 1-based node labels.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise GraphError(f"adjacency must be square, got shape {A.shape}")
    sums = A.sum(axis=1)
    isolated = np.flatnonzero(sums == 0)
    if isolated.size:
        raise GraphError(
            "isolated node(s) cannot define a SAR weight row: "
            + ", ".join(str(i + 1) for i in isolated)
        )
    return A / sums[:, None]


def edge_list(A):
    """Undirected edges ``(source, target)`` with ``source < target``, 1-based."""
    A = np.asarray(A)
    src, dst = np.nonzero(np.triu(A, k=1))
    return np.column_stack([src + 1, dst + 1])


def random_edge_nodes(n, rng, edges_per_node=2):
    """Sample ``2 * edges_per_node * n`` node labels uniformly with replacement."""
    return rng.integers(1, n + 1, size=2 * edges_per_node * n)


def random_adjacency(n, rng, edges_per_node=2, max_tries=1000):
    """Random adjacency with no isolated node.

    Edge lists are drawn with :func:`random_edge_nodes` and redrawn from the
    same generator until every node has a neighbour.

    Returns
    -------
    (numpy.ndarray, numpy.ndarray)
        The adjacency matrix and the accepted flat edge list.
    """
    for _ in range(max_tries):
        nodes = random_edge_nodes(n, rng, edges_per_node)
        A = build_adjacency(nodes, n)
        if np.all(A.sum(axis=1) > 0):
            return A, nodes
    raise GraphError(
        f"no graph without isolated nodes after {max_tries} draws; "
        "increase edges_per_node"
    )
