"""Shared fixtures and oracle helpers for the test suite.

The oracles here are deliberately independent of the library internals:
dense matrix powers for heat kernels, itertools pair enumeration for the
sampler law, and networkx for connectivity and diameters.
"""

import itertools

import numpy as np
import pytest

from lrplab.core import Box, LatticeGraph, LrpParams, flat_graph


def make_params(d=1, s=1.5, beta=1.0, L=0, short_range=None, geometry="box"):
    return LrpParams(d=d, s=s, beta=beta, L=L, short_range=short_range or {}, geometry=geometry)


def path_graph(n):
    return flat_graph(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n):
    return flat_graph(n, [(i, (i + 1) % n) for i in range(n)])


def complete_graph(n):
    return flat_graph(n, list(itertools.combinations(range(n), 2)))


def k2_lattice():
    """K2 embedded in a d=1 box so the lattice-aware APIs accept it."""
    box = Box(d=1, N=1, geometry="box")
    return LatticeGraph(box, np.array([[0, 1]], dtype=np.int64)), [0, 1]


def random_connected_flat(n, rng, extra_frac=0.5):
    """Random connected graph: a uniform random tree plus extra edges."""
    edges = set()
    perm = rng.permutation(n)
    for i in range(1, n):
        j = int(rng.integers(0, i))
        a, b = int(perm[i]), int(perm[j])
        edges.add((min(a, b), max(a, b)))
    n_extra = min(int(extra_frac * n), n * (n - 1) // 2 - len(edges))
    while n_extra > 0:
        a, b = (int(x) for x in rng.integers(0, n, size=2))
        if a != b and (min(a, b), max(a, b)) not in edges:
            edges.add((min(a, b), max(a, b)))
            n_extra -= 1
    return flat_graph(n, sorted(edges))


def dense_transition(graph):
    """Dense SRW transition matrix P = D^-1 A; requires no isolated vertices."""
    n = graph.n_vertices
    A = np.zeros((n, n))
    for u, v in graph.edges:
        A[u, v] = A[v, u] = 1.0
    degs = A.sum(axis=1)
    assert (degs > 0).all(), "oracle needs a graph without isolated vertices"
    return A / degs[:, None], degs


def exhaustive_pair_probabilities(box, params):
    """Dict {(u, v) u<v: p} over all pairs, computed pair by pair."""
    from lrplab.core import connection_probability

    out = {}
    for u, v in itertools.combinations(range(box.n_vertices), 2):
        dx = box.pair_displacement(u, v)
        if all(c == 0 for c in dx):
            continue
        out[(u, v)] = connection_probability(params, dx, box.N)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20260826)
