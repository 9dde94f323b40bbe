"""Connectivity analysis: components, graph distances, diameters, degrees."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components as _cc

from .core import Box, LatticeGraph, LrpParams
from .sampler import PairPredicate, sample_edges

__all__ = [
    "ComponentLabeling",
    "connected_components",
    "second_largest_size",
    "bfs_distances",
    "component_diameter",
    "max_degree",
    "escape_vs_giant",
    "EscapeEstimate",
]

UNREACHABLE = -1  # placeholder; the real sentinel is n_vertices, see bfs_distances


@dataclass(frozen=True)
class ComponentLabeling:
    """Per-vertex component ids, contiguous from 0 in decreasing size order.

    Ties between equal-size components are broken by the smallest minimum
    vertex index, so the labeling is a pure function of the graph.
    """

    labels: np.ndarray
    sizes: np.ndarray  # sorted descending

    @property
    def n_components(self) -> int:
        return len(self.sizes)

    def largest(self) -> np.ndarray:
        """Vertex indices of the largest component, C1."""
        return np.flatnonzero(self.labels == 0)

    def component(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.labels == k)


def connected_components(graph: LatticeGraph) -> ComponentLabeling:
    n = graph.n_vertices
    _, raw = _cc(graph.to_sparse(), directed=False)
    raw = raw[:n]
    sizes = np.bincount(raw)
    # min vertex index per raw label; raw labels from scipy are ordered by
    # first occurrence, so the label's first vertex is its minimum
    first = np.full(sizes.shape, n, dtype=np.int64)
    for v in range(n - 1, -1, -1):
        first[raw[v]] = v
    order = np.lexsort((first, -sizes))
    remap = np.empty_like(order)
    remap[order] = np.arange(len(order))
    return ComponentLabeling(labels=remap[raw], sizes=sizes[order])


def second_largest_size(labeling: ComponentLabeling) -> int:
    if labeling.n_components < 2:
        return 0
    return int(labeling.sizes[1])


def bfs_distances(graph: LatticeGraph, source: int) -> np.ndarray:
    """Exact hop distances from source; unreachable vertices get n_vertices."""
    n = graph.n_vertices
    if not 0 <= source < n:
        raise ValueError(f"source {source} outside vertex range")
    dist = np.full(n, n, dtype=np.int64)
    dist[source] = 0
    frontier = np.array([source], dtype=np.int64)
    d = 0
    indptr, indices = graph.indptr, graph.indices
    while len(frontier):
        d += 1
        starts = indptr[frontier]
        ends = indptr[frontier + 1]
        total = int((ends - starts).sum())
        if total == 0:
            break
        nbrs = np.concatenate([indices[s:e] for s, e in zip(starts, ends)])
        fresh = np.unique(nbrs[dist[nbrs] == n])
        if not len(fresh):
            break
        dist[fresh] = d
        frontier = fresh
    return dist


def _eccentricity(graph: LatticeGraph, source: int, members: np.ndarray) -> tuple[int, int]:
    """(eccentricity within members, farthest vertex with smallest index)."""
    dist = bfs_distances(graph, source)
    dm = dist[members]
    if (dm == graph.n_vertices).any():
        raise ValueError("component is not connected")
    ecc = int(dm.max())
    far = int(members[dm == ecc].min())
    return ecc, far


def component_diameter(
    graph: LatticeGraph,
    component: np.ndarray,
    mode: str = "exact",
    exact_cap: int = 20000,
    sweeps: int = 8,
) -> int:
    """Graph diameter of a connected component.

    ``exact`` runs BFS from every component vertex (refused above
    ``exact_cap``); ``two_sweep_lower`` iterates the double-sweep heuristic,
    always returning a lower bound on the true diameter.
    """
    component = np.asarray(component, dtype=np.int64)
    if len(component) == 0:
        raise ValueError("empty component")
    if len(component) == 1:
        return 0
    if mode == "exact":
        if len(component) > exact_cap:
            raise ValueError(
                f"component size {len(component)} exceeds exact cap {exact_cap}"
            )
        best = 0
        for v in component:
            ecc, _ = _eccentricity(graph, int(v), component)
            best = max(best, ecc)
        return best
    if mode == "two_sweep_lower":
        start = int(component.min())
        best = 0
        seen = set()
        for _ in range(sweeps):
            ecc, far = _eccentricity(graph, start, component)
            best = max(best, ecc)
            if far in seen:
                break
            seen.add(far)
            start = far
        return best
    raise ValueError(f"unknown mode {mode!r}")


def max_degree(graph: LatticeGraph, region=None) -> int:
    """Maximum degree over ``region`` (vertex indices; None = all vertices)."""
    if region is None:
        degs = graph.degrees
    else:
        region = np.asarray(region, dtype=np.int64)
        if len(region) == 0:
            raise ValueError("empty region")
        degs = graph.degrees[region]
    return int(degs.max()) if len(degs) else 0


@dataclass(frozen=True)
class EscapeEstimate:
    """Monte Carlo estimate of P(0 connects outside Lambda_N | 0 not in C1(N))."""

    frequency: float | None
    n_conditioning: int
    n_escapes: int
    n_samples: int
    diagnostic: str | None = None


def escape_vs_giant(
    params: LrpParams,
    N: int,
    outer_N: int,
    n_samples: int,
    seed: int,
) -> EscapeEstimate:
    """Estimate the escape probability of the origin given it misses C1(N).

    Graphs are sampled on the strictly larger box ``[-outer_N, outer_N]^d``;
    C1(N) is the largest component of the restriction to the inner box.
    """
    if outer_N <= N:
        raise ValueError("outer box must strictly contain Lambda_N")
    box = Box(d=params.d, N=outer_N, geometry="box")
    coords = box.all_coords()
    inner_mask = (np.abs(coords).max(axis=1) <= N)
    origin = box.coord_to_index(np.zeros(params.d, dtype=np.int64))
    pred = PairPredicate()
    n_cond = 0
    n_escape = 0
    for rep in range(n_samples):
        edges = sample_edges(box, pred, params, seed, stream=(rep,))
        graph = LatticeGraph(box, edges)
        # restriction to the inner box
        if len(edges):
            keep = inner_mask[edges[:, 0]] & inner_mask[edges[:, 1]]
            inner_edges = edges[keep]
        else:
            inner_edges = edges
        inner = LatticeGraph(box, inner_edges)
        labeling = connected_components(inner)
        giant_sizes = np.bincount(labeling.labels[inner_mask])
        giant_label = int(np.argmax(giant_sizes))
        if labeling.labels[origin] == giant_label and giant_sizes[giant_label] > 1:
            continue
        n_cond += 1
        dist = bfs_distances(graph, int(origin))
        reached = dist < graph.n_vertices
        if (reached & ~inner_mask).any():
            n_escape += 1
    if n_cond == 0:
        return EscapeEstimate(None, 0, 0, n_samples, "insufficient conditioning events")
    return EscapeEstimate(n_escape / n_cond, n_cond, n_escape, n_samples)
