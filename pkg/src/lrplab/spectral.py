"""Spectral gaps of simple random walk and multicommodity-flow lower bounds.

The congestion of any valid flow lower-bounds the gap: ``Gap >= 1/rho(f)``.
Flows here are constructive: equal splitting over BFS geodesics for a single
graph, and interpolation through a coarse (part-level) flow for partitioned
graphs, routing inter-part demand along coarse paths expanded with designated
inter-part edges and intra-part geodesics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix, identity
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .core import LatticeGraph

__all__ = [
    "ReversibleChain",
    "Flow",
    "IterativeGapError",
    "spectral_gap_exact",
    "spectral_gap_iterative",
    "flow_congestion",
    "gap_lower_bound_from_flow",
    "geodesic_flow",
    "interpolated_flow",
    "build_interpolation_inputs",
    "mixing_time_tv",
    "MixingResult",
    "lazy",
]

DENSE_CAP = 4000


class IterativeGapError(RuntimeError):
    """Iterative eigensolver failed to converge; carries the residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ReversibleChain:
    """SRW transition structure on a connected graph.

    P(x, y) = laziness * I + (1 - laziness) / deg(x) on neighbors;
    pi(x) proportional to deg(x) regardless of laziness.
    """

    def __init__(self, adjacency: csr_matrix, laziness: float = 0.0, origin=None):
        self.adj = adjacency.tocsr()
        self.n = self.adj.shape[0]
        self.degrees = np.asarray(self.adj.sum(axis=1)).ravel().astype(np.int64)
        if (self.degrees == 0).any():
            raise ValueError("chain requires every vertex to have positive degree")
        self.pi = self.degrees / self.degrees.sum()
        if not 0.0 <= laziness < 1.0:
            raise ValueError("laziness must lie in [0, 1)")
        self.laziness = laziness
        self.origin = origin  # original vertex ids, if re-indexed from a graph

    @classmethod
    def from_graph(cls, graph: LatticeGraph, vertices=None, laziness: float = 0.0):
        """Chain on the subgraph induced by ``vertices`` (must be connected)."""
        if vertices is None:
            vertices = np.arange(graph.n_vertices)
        sub, origin = graph.induced_subgraph(vertices)
        chain = cls(sub.to_sparse(), laziness=laziness, origin=origin)
        if not chain.is_connected():
            raise ValueError("induced subgraph is not connected")
        return chain

    @classmethod
    def from_edges(cls, n: int, edges, laziness: float = 0.0):
        from .core import flat_graph

        g = flat_graph(n, edges)
        chain = cls(g.to_sparse(), laziness=laziness)
        if not chain.is_connected():
            raise ValueError("graph is not connected")
        return chain

    def is_connected(self) -> bool:
        from scipy.sparse.csgraph import connected_components

        ncomp, _ = connected_components(self.adj, directed=False)
        return ncomp == 1

    def neighbors(self, v: int) -> np.ndarray:
        return self.adj.indices[self.adj.indptr[v] : self.adj.indptr[v + 1]]

    def transition_prob(self, a: int, b: int) -> float:
        if a == b:
            return self.laziness
        if b in set(self.neighbors(a).tolist()):
            return (1.0 - self.laziness) / self.degrees[a]
        return 0.0

    def kernel_matrix(self) -> np.ndarray:
        """Dense transition matrix (use only below the dense cap)."""
        if self.n > DENSE_CAP:
            raise ValueError(f"dense kernel refused for n={self.n} > {DENSE_CAP}")
        P = self.adj.toarray() / self.degrees[:, None]
        if self.laziness:
            P = self.laziness * np.eye(self.n) + (1.0 - self.laziness) * P
        return P

    def symmetrized(self) -> csr_matrix:
        """D^{1/2} P D^{-1/2}: same spectrum as P, symmetric."""
        inv_sqrt = 1.0 / np.sqrt(self.degrees)
        S = self.adj.multiply(inv_sqrt[:, None]).multiply(inv_sqrt[None, :]).tocsr()
        if self.laziness:
            S = self.laziness * identity(self.n, format="csr") + (1.0 - self.laziness) * S
        return S


def lazy(chain: ReversibleChain, weight: float = 0.5) -> ReversibleChain:
    """Lazy variant: stay put with probability ``weight``."""
    return ReversibleChain(chain.adj, laziness=weight, origin=chain.origin)


def spectral_gap_exact(chain: ReversibleChain) -> float:
    """1 - lambda_2 via dense symmetric eigendecomposition."""
    if chain.n > DENSE_CAP:
        raise ValueError(f"n={chain.n} exceeds the dense cap {DENSE_CAP}")
    if chain.n == 1:
        return 1.0
    S = chain.symmetrized().toarray()
    evals = np.linalg.eigvalsh(S)
    return float(1.0 - evals[-2])


def spectral_gap_iterative(chain: ReversibleChain, tol: float = 1e-8) -> tuple[float, float]:
    """(gap, error bound) from a Lanczos iteration on the symmetrized kernel."""
    if chain.n <= 2:
        return spectral_gap_exact(chain), 0.0
    S = chain.symmetrized()
    v0 = np.sqrt(chain.degrees / chain.degrees.sum())  # top eigenvector, deterministic
    try:
        evals = eigsh(
            S,
            k=2,
            which="LA",
            v0=v0,
            tol=tol * 1e-2,
            maxiter=50 * chain.n,
            return_eigenvectors=False,
        )
    except ArpackNoConvergence as exc:
        got = getattr(exc, "eigenvalues", None)
        raise IterativeGapError(
            f"Lanczos did not converge on n={chain.n}", residual=got
        ) from exc
    return float(1.0 - np.sort(evals)[-2]), tol


@dataclass
class Flow:
    """Multicommodity flow: per unordered pair, weighted simple paths.

    Paths are stored once for the pair (x, y) with x < y; the flow for the
    reversed ordered pair is the mirror image, which satisfies its demand
    because pi(x) pi(y) is symmetric.
    """

    chain: ReversibleChain
    paths: dict = field(default_factory=dict)  # (x, y) x<y -> list[(tuple path, weight)]

    def add_path(self, path, weight: float):
        path = tuple(int(v) for v in path)
        if len(path) < 2:
            raise ValueError("a flow path needs at least two vertices")
        if len(set(path)) != len(path):
            raise ValueError("flow paths must be simple")
        key = (path[0], path[-1]) if path[0] < path[-1] else (path[-1], path[0])
        if path[0] > path[-1]:
            path = path[::-1]
        self.paths.setdefault(key, []).append((path, float(weight)))

    def demand_violation(self) -> tuple[float, tuple | None]:
        """(max relative demand error, offending pair)."""
        pi = self.chain.pi
        worst, worst_pair = 0.0, None
        n = self.chain.n
        for x in range(n):
            for y in range(x + 1, n):
                want = pi[x] * pi[y]
                got = sum(w for _, w in self.paths.get((x, y), ()))
                err = abs(got - want) / want if want > 0 else abs(got)
                if err > worst:
                    worst, worst_pair = err, (x, y)
        return worst, worst_pair

    def edge_loads(self) -> dict:
        """Oriented edge -> f(e) = sum over paths through e of f(gamma)|gamma|.

        Each stored path contributes in its own orientation and, mirrored,
        in the reverse orientation.
        """
        loads: dict = {}
        for plist in self.paths.values():
            for path, w in plist:
                contrib = w * (len(path) - 1)
                for a, b in zip(path[:-1], path[1:]):
                    loads[(a, b)] = loads.get((a, b), 0.0) + contrib
                    loads[(b, a)] = loads.get((b, a), 0.0) + contrib
        return loads


def flow_congestion(chain: ReversibleChain, flow: Flow, demand_tol: float = 1e-9) -> float:
    """Exact congestion rho(f); rejects flows that violate their demands."""
    violation, pair = flow.demand_violation()
    if violation > demand_tol:
        raise ValueError(f"flow violates demand at pair {pair} (relative error {violation:.3g})")
    if chain.laziness:
        raise ValueError("congestion is defined for the non-lazy kernel")
    loads = flow.edge_loads()
    rho = 0.0
    for (a, b), load in loads.items():
        q = chain.pi[a] * (1.0 / chain.degrees[a])
        rho = max(rho, load / q)
    return rho


def gap_lower_bound_from_flow(chain: ReversibleChain, flow: Flow) -> float:
    """Sinclair bound: Gap >= 1/rho(f)."""
    return 1.0 / flow_congestion(chain, flow)


def _geodesic_structures(chain: ReversibleChain, source: int):
    """BFS distances, predecessor lists, and exact geodesic counts from source."""
    n = chain.n
    INF = n + 1
    dist = np.full(n, INF, dtype=np.int64)
    dist[source] = 0
    order = [source]
    head = 0
    preds: list[list[int]] = [[] for _ in range(n)]
    while head < len(order):
        u = order[head]
        head += 1
        for v in chain.neighbors(u):
            v = int(v)
            if dist[v] == INF:
                dist[v] = dist[u] + 1
                order.append(v)
            if dist[v] == dist[u] + 1:
                preds[v].append(u)
    counts = [0] * n  # exact geodesic counts (python ints, no overflow)
    counts[source] = 1
    for u in order[1:]:
        counts[u] = sum(counts[p] for p in preds[u])
    return dist, preds, counts


def _enumerate_geodesics(preds, source, target, cap):
    """Up to ``cap`` geodesics source->target; deterministic order.

    Paths are generated by backward depth-first search taking predecessors
    in ascending vertex order, which fixes the canonical first path.
    """
    out = []
    stack = [(target, (target,))]
    while stack and len(out) < cap:
        v, suffix = stack.pop()
        if v == source:
            out.append(suffix)
            continue
        for p in sorted(preds[v], reverse=True):
            stack.append((p, (p,) + suffix))
    return out[:cap]


def geodesic_flow(chain: ReversibleChain, cap: int = 16) -> Flow:
    """Demand split equally over BFS geodesics, at most ``cap`` per pair.

    When a pair has more geodesics than the cap, the enumerated paths each
    carry demand/count and the surplus mass rides on the canonical first
    path, so demands are met exactly.
    """
    flow = Flow(chain)
    pi = chain.pi
    for x in range(chain.n):
        dist, preds, counts = _geodesic_structures(chain, x)
        for y in range(x + 1, chain.n):
            if dist[y] > chain.n:
                raise ValueError("chain is not connected")
            demand = pi[x] * pi[y]
            total = counts[y]
            paths = _enumerate_geodesics(preds, x, y, cap)
            w = demand / total
            for i, path in enumerate(paths):
                extra = demand * (total - len(paths)) / total if i == 0 else 0.0
                flow.add_path(path, w + extra)
    return flow


@dataclass
class InterpolationInputs:
    """Everything interpolated_flow needs beyond the fine chain and part map."""

    coarse_chain: ReversibleChain
    part_ids: np.ndarray  # coarse index -> part id
    designated_edges: dict  # (i, k) i<k coarse indices -> (fine u in i, fine v in k)
    geodesic: object  # callable (x, y) -> path within the common part


def _lex_bfs_parents(adj_lists, source, n):
    INF = n + 1
    dist = np.full(n, INF, dtype=np.int64)
    parent = np.full(n, -1, dtype=np.int64)
    dist[source] = 0
    frontier = [source]
    while frontier:
        nxt = []
        for u in sorted(frontier):
            for v in adj_lists[u]:
                if dist[v] == INF:
                    dist[v] = dist[u] + 1
                    parent[v] = u
                    nxt.append(v)
                elif dist[v] == dist[u] + 1 and (parent[v] == -1 or u < parent[v]):
                    parent[v] = u
        frontier = nxt
    return parent


def build_interpolation_inputs(fine_chain: ReversibleChain, part_of: np.ndarray) -> InterpolationInputs:
    """Coarse chain, designated edges, and intra-part geodesics for a partition.

    The designated fine edge for a coarse edge is the lexicographically least
    fine edge realizing it; intra-part geodesics come from deterministic
    min-parent BFS inside each part's induced subgraph.
    """
    part_of = np.asarray(part_of, dtype=np.int64)
    ids = np.unique(part_of)
    coarse_of = {int(p): i for i, p in enumerate(ids)}
    cidx = np.array([coarse_of[int(p)] for p in part_of], dtype=np.int64)
    designated: dict = {}
    coarse_edges = set()
    A = fine_chain.adj
    for u in range(fine_chain.n):
        for v in A.indices[A.indptr[u] : A.indptr[u + 1]]:
            v = int(v)
            if v <= u:
                continue
            i, k = int(cidx[u]), int(cidx[v])
            if i == k:
                continue
            key = (min(i, k), max(i, k))
            coarse_edges.add(key)
            cand = (u, v) if i < k else (v, u)
            if key not in designated or cand < designated[key]:
                designated[key] = cand
    m = len(ids)
    coarse = ReversibleChain.from_edges(m, np.array(sorted(coarse_edges)).reshape(-1, 2))

    # per-part lex-least shortest-path trees from every part vertex
    part_members = {i: np.flatnonzero(cidx == i) for i in range(m)}
    parents_cache: dict = {}

    def geodesic(x: int, y: int):
        i = int(cidx[x])
        if cidx[y] != i:
            raise ValueError("geodesic endpoints must share a part")
        if x == y:
            return (x,)
        members = part_members[i]
        local = {int(v): j for j, v in enumerate(members)}
        key = (i, x)
        if key not in parents_cache:
            adj_lists = [
                sorted(
                    local[int(w)]
                    for w in A.indices[A.indptr[int(v)] : A.indptr[int(v) + 1]]
                    if int(cidx[w]) == i
                )
                for v in members
            ]
            parents_cache[key] = _lex_bfs_parents(adj_lists, local[x], len(members))
        parent = parents_cache[key]
        path = [local[y]]
        while path[-1] != local[x]:
            p = parent[path[-1]]
            if p < 0:
                raise ValueError("part is not internally connected")
            path.append(int(p))
        return tuple(int(members[j]) for j in reversed(path))

    return InterpolationInputs(coarse, ids, designated, geodesic)


def _loop_erase(path):
    pos: dict = {}
    out = []
    for v in path:
        if v in pos:
            del_from = pos[v] + 1
            for w in out[del_from:]:
                pos.pop(w, None)
            out = out[:del_from]
        else:
            out.append(v)
            pos[v] = len(out) - 1
    return tuple(out)


def interpolated_flow(
    fine_chain: ReversibleChain,
    part_of: np.ndarray,
    coarse_chain: ReversibleChain,
    coarse_flow: Flow,
    designated_edges: dict,
    intra_part_geodesics,
) -> Flow:
    """Expand a coarse (part-level) flow into a flow on the fine graph.

    Intra-part demand rides intra-part geodesics.  Demand between parts i
    and k follows each coarse path, scaled by the fine demand over the
    coarse demand, with coarse edges replaced by their designated fine
    edges and gaps bridged by intra-part geodesics.  Built paths are
    loop-erased so the flow contains only simple paths; erasing loops can
    only lower path lengths and loads.
    """
    part_of = np.asarray(part_of, dtype=np.int64)
    ids = np.unique(part_of)
    coarse_of = {int(p): i for i, p in enumerate(ids)}
    cidx = np.array([coarse_of[int(p)] for p in part_of], dtype=np.int64)
    pi = fine_chain.pi
    pic = coarse_chain.pi
    flow = Flow(fine_chain)

    def designated(i, k):
        key = (min(i, k), max(i, k))
        if key not in designated_edges:
            raise ValueError(f"no designated fine edge for coarse edge {key}")
        u, v = designated_edges[key]
        return (u, v) if i < k else (v, u)

    for x in range(fine_chain.n):
        for y in range(x + 1, fine_chain.n):
            demand = pi[x] * pi[y]
            i, k = int(cidx[x]), int(cidx[y])
            if i == k:
                flow.add_path(intra_part_geodesics(x, y), demand)
                continue
            coarse_paths = coarse_flow.paths.get((min(i, k), max(i, k)), ())
            scale = demand / (pic[i] * pic[k])
            for cpath, cw in coarse_paths:
                if cpath[0] != i:
                    cpath = cpath[::-1]
                fine_path = [x]
                here = x
                for a, b in zip(cpath[:-1], cpath[1:]):
                    u, v = designated(a, b)
                    fine_path.extend(intra_part_geodesics(here, u)[1:])
                    fine_path.append(v)
                    here = v
                fine_path.extend(intra_part_geodesics(here, y)[1:])
                flow.add_path(_loop_erase(fine_path), cw * scale)
    return flow


@dataclass(frozen=True)
class MixingResult:
    time: float  # math.inf when the chain is periodic
    bipartite: bool = False
    diagnostic: str | None = None


def _is_bipartite(chain: ReversibleChain) -> bool:
    color = np.full(chain.n, -1, dtype=np.int64)
    color[0] = 0
    frontier = [0]
    while frontier:
        nxt = []
        for u in frontier:
            for v in chain.neighbors(u):
                v = int(v)
                if color[v] == -1:
                    color[v] = 1 - color[u]
                    nxt.append(v)
                elif color[v] == color[u]:
                    return False
        frontier = nxt
    return True


def mixing_time_tv(chain: ReversibleChain, eps: float = 0.25, t_max: int = 100000) -> MixingResult:
    """Smallest t with worst-start total variation distance to pi below eps.

    Bipartite non-lazy chains are periodic and never mix; they get an
    infinite sentinel and a diagnostic instead of a silent lazy fallback.
    """
    import math

    if chain.n > DENSE_CAP:
        raise ValueError(f"n={chain.n} exceeds the dense cap {DENSE_CAP}")
    if chain.laziness == 0.0 and _is_bipartite(chain):
        return MixingResult(math.inf, bipartite=True, diagnostic="periodic (bipartite) chain")
    P = chain.kernel_matrix()
    Pt = np.eye(chain.n)
    for t in range(1, t_max + 1):
        Pt = Pt @ P
        tv = 0.5 * np.abs(Pt - chain.pi[None, :]).sum(axis=1).max()
        if tv <= eps:
            return MixingResult(float(t))
    return MixingResult(math.inf, diagnostic=f"no mixing within {t_max} steps")
