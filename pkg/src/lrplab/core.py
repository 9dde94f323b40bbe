"""Parameter model, lattice geometry, connection probabilities, and the graph container.

Conventions used throughout the package:

* boxes are ``[-N, N]^d`` with ``(2N+1)^d`` lattice points,
* the connection probability uses the Euclidean norm of the displacement,
* box/block bookkeeping uses the l-infinity metric,
* tori identify coordinates modulo the box side ``2N+1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

__all__ = [
    "LrpParams",
    "Box",
    "LatticeGraph",
    "displacement_class",
    "connection_probability",
    "canonical_torus_displacement",
    "build_graph",
    "flat_graph",
]


def displacement_class(dx) -> tuple[int, ...]:
    """Isotropy class of a lattice displacement: sorted absolute coordinates.

    Two displacements related by coordinate permutation, reflection or
    negation share a class, which is the invariance the short-range table
    is required to respect.
    """
    return tuple(sorted(abs(int(c)) for c in dx))


@dataclass(frozen=True)
class LrpParams:
    """Model parameters for long-range percolation on Z^d.

    For displacements with Euclidean norm >= L the pair probability is
    ``1 - exp(-beta * r**-s)``; shorter displacements are looked up in
    ``short_range`` keyed by :func:`displacement_class`.
    """

    d: int
    s: float
    beta: float
    L: int = 0
    short_range: Mapping[tuple[int, ...], float] = field(default_factory=dict)
    geometry: str = "box"

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"dimension must be >= 1, got {self.d}")
        if self.s <= self.d:
            raise ValueError(f"tail exponent s must exceed d, got s={self.s}, d={self.d}")
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if self.L < 0:
            raise ValueError(f"short-range cutoff L must be >= 0, got {self.L}")
        if self.geometry not in ("box", "torus"):
            raise ValueError(f"geometry must be 'box' or 'torus', got {self.geometry!r}")
        for key, p in self.short_range.items():
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"short_range[{key}] = {p} outside [0, 1]")
            if tuple(sorted(key)) != tuple(key) or any(c < 0 for c in key):
                raise ValueError(f"short_range key {key} is not a canonical displacement class")


def canonical_torus_displacement(dx, N: int) -> tuple[int, ...]:
    """Minimal-norm representative of a displacement on the torus of side 2N+1.

    The side is odd so the representative is unique: each coordinate is
    reduced to the range [-N, N].
    """
    side = 2 * N + 1
    out = []
    for c in dx:
        c = int(c) % side
        if c > N:
            c -= side
        out.append(c)
    return tuple(out)


def connection_probability(params: LrpParams, dx, N: int | None = None) -> float:
    """Probability that the pair at displacement ``dx`` is an edge.

    For torus geometry ``N`` must be given so ``dx`` can first be reduced
    to its minimal-norm representative.  Zero displacement is rejected:
    the model has no self-loops.
    """
    if params.geometry == "torus":
        if N is None:
            raise ValueError("torus geometry requires the scale N for canonicalization")
        dx = canonical_torus_displacement(dx, N)
    dx = tuple(int(c) for c in dx)
    if all(c == 0 for c in dx):
        raise ValueError("zero displacement: no self-loops")
    r2 = sum(c * c for c in dx)
    r = math.sqrt(r2)
    if r < params.L:
        return float(params.short_range.get(displacement_class(dx), 0.0))
    return -math.expm1(-params.beta * r ** (-params.s))


@dataclass(frozen=True)
class Box:
    """The lattice box Lambda_N = [-N, N]^d, with a fixed vertex indexing.

    Vertices are indexed row-major over coordinates shifted to [0, 2N]^d.
    """

    d: int
    N: int
    geometry: str = "box"

    def __post_init__(self):
        if self.N < 0:
            raise ValueError("N must be >= 0")
        if self.geometry not in ("box", "torus"):
            raise ValueError(f"geometry must be 'box' or 'torus', got {self.geometry!r}")

    @property
    def side(self) -> int:
        return 2 * self.N + 1

    @property
    def n_vertices(self) -> int:
        return self.side**self.d

    def coord_to_index(self, coords) -> np.ndarray:
        """Map coordinates in [-N, N]^d (array (..., d)) to vertex indices."""
        coords = np.asarray(coords, dtype=np.int64)
        shifted = coords + self.N
        if np.any(shifted < 0) or np.any(shifted >= self.side):
            raise ValueError("coordinate outside the box")
        idx = shifted[..., 0].astype(np.int64)
        for k in range(1, self.d):
            idx = idx * self.side + shifted[..., k]
        return idx

    def index_to_coord(self, idx) -> np.ndarray:
        """Inverse of :meth:`coord_to_index`; returns array (..., d)."""
        idx = np.asarray(idx, dtype=np.int64)
        if np.any(idx < 0) or np.any(idx >= self.n_vertices):
            raise ValueError("vertex index out of range")
        out = np.empty(idx.shape + (self.d,), dtype=np.int64)
        rem = idx.copy()
        for k in range(self.d - 1, -1, -1):
            out[..., k] = rem % self.side
            rem //= self.side
        return out - self.N

    def all_coords(self) -> np.ndarray:
        """Coordinates of every vertex, in index order, shape (n_vertices, d)."""
        return self.index_to_coord(np.arange(self.n_vertices))

    def pair_displacement(self, u: int, v: int) -> tuple[int, ...]:
        """Displacement v - u, torus-canonicalized when applicable."""
        dx = self.index_to_coord(v) - self.index_to_coord(u)
        if self.geometry == "torus":
            return canonical_torus_displacement(dx, self.N)
        return tuple(int(c) for c in dx)


class LatticeGraph:
    """Undirected graph on the vertices of a box, stored as sorted adjacency.

    Immutable after construction.  Adjacency is symmetric with no self-loops
    and no duplicate edges; ``degrees[x] == len(adj(x))``.
    """

    def __init__(self, box: Box, edges, provenance: dict | None = None):
        self.box = box
        n = box.n_vertices
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size:
            if edges.min() < 0 or edges.max() >= n:
                raise ValueError("edge endpoint outside the vertex region")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise ValueError("self-loop in edge list")
            lo = np.minimum(edges[:, 0], edges[:, 1])
            hi = np.maximum(edges[:, 0], edges[:, 1])
            canon = np.unique(np.stack([lo, hi], axis=1), axis=0)
        else:
            canon = edges.reshape(0, 2)
        self.edges = canon
        both = np.concatenate([canon, canon[:, ::-1]], axis=0) if canon.size else canon
        order = np.lexsort((both[:, 1], both[:, 0])) if both.size else np.array([], dtype=np.int64)
        both = both[order]
        self.indices = both[:, 1].copy() if both.size else np.array([], dtype=np.int64)
        self.indptr = np.zeros(n + 1, dtype=np.int64)
        if both.size:
            np.add.at(self.indptr, both[:, 0] + 1, 1)
        np.cumsum(self.indptr, out=self.indptr)
        self.degrees = np.diff(self.indptr)
        self.provenance = dict(provenance or {})

    @property
    def n_vertices(self) -> int:
        return self.box.n_vertices

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v] : self.indptr[v + 1]]

    def to_sparse(self):
        """Adjacency as a scipy CSR matrix (0/1 entries)."""
        from scipy.sparse import csr_matrix

        n = self.n_vertices
        data = np.ones(len(self.indices), dtype=np.float64)
        return csr_matrix((data, self.indices, self.indptr), shape=(n, n))

    def induced_subgraph(self, vertices) -> tuple["LatticeGraph", np.ndarray]:
        """Subgraph induced on ``vertices``; returns (graph, original indices).

        The subgraph is re-indexed onto a synthetic 1-d box large enough to
        hold the vertex count; the second return value maps new -> old.
        """
        vertices = np.unique(np.asarray(vertices, dtype=np.int64))
        lookup = -np.ones(self.n_vertices, dtype=np.int64)
        lookup[vertices] = np.arange(len(vertices))
        if self.edges.size:
            mask = (lookup[self.edges[:, 0]] >= 0) & (lookup[self.edges[:, 1]] >= 0)
            sub_edges = lookup[self.edges[mask]]
        else:
            sub_edges = np.empty((0, 2), dtype=np.int64)
        m = len(vertices)
        g = _FlatGraph(m, sub_edges, provenance={"parent": "induced", "n": m})
        return g, vertices


class _FlatGraph(LatticeGraph):
    """Graph on a plain vertex range [0, n), without lattice geometry."""

    def __init__(self, n: int, edges, provenance: dict | None = None):
        self._n = int(n)
        box = Box(d=1, N=0)
        # bypass LatticeGraph box-size checks: rebuild CSR directly
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size:
            if edges.min() < 0 or edges.max() >= n:
                raise ValueError("edge endpoint outside the vertex region")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise ValueError("self-loop in edge list")
            lo = np.minimum(edges[:, 0], edges[:, 1])
            hi = np.maximum(edges[:, 0], edges[:, 1])
            canon = np.unique(np.stack([lo, hi], axis=1), axis=0)
        else:
            canon = edges.reshape(0, 2)
        self.box = box
        self.edges = canon
        both = np.concatenate([canon, canon[:, ::-1]], axis=0) if canon.size else canon
        order = np.lexsort((both[:, 1], both[:, 0])) if both.size else np.array([], dtype=np.int64)
        both = both[order]
        self.indices = both[:, 1].copy() if both.size else np.array([], dtype=np.int64)
        self.indptr = np.zeros(n + 1, dtype=np.int64)
        if both.size:
            np.add.at(self.indptr, both[:, 0] + 1, 1)
        np.cumsum(self.indptr, out=self.indptr)
        self.degrees = np.diff(self.indptr)
        self.provenance = dict(provenance or {})

    @property
    def n_vertices(self) -> int:
        return self._n


def flat_graph(n: int, edges, provenance: dict | None = None) -> LatticeGraph:
    """Graph on vertices [0, n) given an edge list; no lattice structure."""
    return _FlatGraph(n, edges, provenance)


def build_graph(box: Box, edges, params: LrpParams | None = None, provenance: dict | None = None) -> LatticeGraph:
    """Assemble a :class:`LatticeGraph`, canonicalizing the edge list.

    Duplicate and reversed duplicates collapse to one undirected edge;
    endpoints outside the box raise ``ValueError``.
    """
    prov = dict(provenance or {})
    if params is not None:
        prov.setdefault("params", params)
    return LatticeGraph(box, edges, provenance=prov)
