"""Edge sampling for long-range percolation without touching all vertex pairs.

Pairs are grouped by lattice displacement.  Each displacement class is an
orbit of the translation group, so its pair count has a closed form (or a
cheap vectorized count when vertex-set constraints are present).  Per class
we draw the number of edges from ``Binomial(n, p)`` and then place that many
edges uniformly at random within the class; the resulting law is exactly the
i.i.d. Bernoulli product measure.

Randomness is drawn from child streams keyed by
``(master seed, *stream, displacement id)`` so classes and stages are
order-independent and reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .core import Box, LrpParams, connection_probability

__all__ = [
    "PairPredicate",
    "DistanceClass",
    "enumerate_distance_classes",
    "sample_edges",
    "staged_reveal",
]


@dataclass(frozen=True, eq=False)
class PairPredicate:
    """Constraint on unordered vertex pairs.

    A pair {u, v} matches when all of the following hold:

    * one endpoint lies in ``set_a`` and the other in ``set_b`` (boolean
      masks over the box's vertex indices; ``None`` means all vertices,
      ``set_b`` defaults to ``set_a``),
    * the l-infinity length of the displacement lies in
      ``[linf_min, linf_max]`` (``linf_max=None`` means unbounded),
    * if ``same_block`` labels are given, both endpoints carry equal labels;
      if ``diff_block`` labels are given, the labels differ,
    * the pair matches none of the predicates in ``exclude`` (the
      complement-of-previously-revealed constraint).
    """

    set_a: np.ndarray | None = None
    set_b: np.ndarray | None = None
    linf_min: int = 1
    linf_max: int | None = None
    same_block: np.ndarray | None = None
    diff_block: np.ndarray | None = None
    exclude: tuple = ()

    def window_contains(self, linf: int) -> bool:
        if linf < max(1, self.linf_min):
            return False
        return self.linf_max is None or linf <= self.linf_max

    def is_trivial(self) -> bool:
        """True when only the length window constrains pairs."""
        return (
            self.set_a is None
            and self.set_b is None
            and self.same_block is None
            and self.diff_block is None
            and not self.exclude
        )

    def matches_pairs(self, box: Box, u, v) -> np.ndarray:
        """Vectorized exact membership test for pairs (u_i, v_i)."""
        u = np.atleast_1d(np.asarray(u, dtype=np.int64))
        v = np.atleast_1d(np.asarray(v, dtype=np.int64))
        cu = box.index_to_coord(u)
        cv = box.index_to_coord(v)
        dx = cv - cu
        if box.geometry == "torus":
            side = box.side
            dx = (dx + box.N) % side - box.N
        linf = np.abs(dx).max(axis=-1)
        ok = linf >= max(1, self.linf_min)
        if self.linf_max is not None:
            ok &= linf <= self.linf_max
        ok &= self._sets_match(u, v)
        for ex in self.exclude:
            ok &= ~ex.matches_pairs(box, u, v)
        return ok

    def _sets_match(self, u, v) -> np.ndarray:
        ok = np.ones(len(u), dtype=bool)
        a, b = self.set_a, self.set_b
        if a is not None or b is not None:
            if a is None:
                a = np.ones_like(b)
            if b is None:
                b = a
            ok &= (a[u] & b[v]) | (a[v] & b[u])
        if self.same_block is not None:
            ok &= self.same_block[u] == self.same_block[v]
        if self.diff_block is not None:
            ok &= self.diff_block[u] != self.diff_block[v]
        return ok


@dataclass(frozen=True)
class DistanceClass:
    """Pairs at one squared Euclidean distance matched by a predicate."""

    r_squared: int
    multiplicity: int
    probability: float


def _geometric_linf_max(box: Box) -> int:
    return box.N if box.geometry == "torus" else box.side - 1


def _canonical_displacements(box: Box, predicate: PairPredicate):
    """Yield (displacement id, dx) for every class the window can reach.

    Canonical displacements have their first nonzero coordinate positive, so
    each unordered pair belongs to exactly one class.  The id is the mixed
    radix encoding of dx, stable across predicates and enumeration order.
    """
    gmax = _geometric_linf_max(box)
    hi = gmax if predicate.linf_max is None else min(predicate.linf_max, gmax)
    lo = max(1, predicate.linf_min)
    if hi < lo:
        return
    side = 2 * hi + 1
    for dx in product(*(range(-hi, hi + 1) for _ in range(box.d))):
        linf = max(abs(c) for c in dx)
        if linf < lo or linf > hi:
            continue
        # lexicographic positivity: first nonzero coordinate > 0
        lead = next((c for c in dx if c != 0), 0)
        if lead <= 0:
            continue
        ident = 0
        for c in dx:
            ident = ident * side + (c + hi)
        yield ident, dx


def _grid_views(box: Box, arr: np.ndarray, dx) -> tuple[np.ndarray, np.ndarray]:
    """Aligned (base, partner) views of a per-vertex array for displacement dx."""
    shape = (box.side,) * box.d
    nd = arr.reshape(shape)
    if box.geometry == "torus":
        return nd, np.roll(nd, shift=tuple(-c for c in dx), axis=tuple(range(box.d)))
    base = tuple(slice(max(0, -c), box.side - max(0, c)) for c in dx)
    part = tuple(slice(max(0, c), box.side - max(0, -c)) for c in dx)
    return nd[base], nd[part]


def _match_grid(box: Box, pred: PairPredicate, dx):
    """Candidate-base mask for displacement dx: True, False, or a bool grid."""
    linf = max(abs(c) for c in dx)
    if not pred.window_contains(linf):
        return False
    g = True
    a, b = pred.set_a, pred.set_b
    if a is not None or b is not None:
        if a is None:
            a = np.ones_like(b)
        if b is None:
            b = a
        a0, a1 = _grid_views(box, a, dx)
        b0, b1 = _grid_views(box, b, dx)
        g = _and(g, (a0 & b1) | (b0 & a1))
    if pred.same_block is not None:
        l0, l1 = _grid_views(box, pred.same_block, dx)
        g = _and(g, l0 == l1)
    if pred.diff_block is not None:
        l0, l1 = _grid_views(box, pred.diff_block, dx)
        g = _and(g, l0 != l1)
    for ex in pred.exclude:
        eg = _match_grid(box, ex, dx)
        if eg is True:
            return False
        if eg is False:
            continue
        g = _and(g, ~eg)
    return g


def _and(g, mask):
    return mask if g is True else (g & mask)


def _closed_form_count(box: Box, dx) -> int:
    if box.geometry == "torus":
        return box.n_vertices
    n = 1
    for c in dx:
        n *= box.side - abs(c)
    return n


def _decode_bases(box: Box, dx, draws: np.ndarray) -> np.ndarray:
    """Map uniform integers in [0, count) to base vertex indices."""
    if box.geometry == "torus":
        return draws.astype(np.int64)
    lengths = [box.side - abs(c) for c in dx]
    starts = [max(0, -c) for c in dx]  # shifted coordinate offset
    idx = np.zeros(len(draws), dtype=np.int64)
    rem = draws.astype(np.int64)
    coords = np.empty((len(draws), box.d), dtype=np.int64)
    for k in range(box.d - 1, -1, -1):
        coords[:, k] = rem % lengths[k] + starts[k]
        rem //= lengths[k]
    for k in range(box.d):
        idx = idx * box.side + coords[:, k] if k else coords[:, 0].copy()
    return idx


def _partner_indices(box: Box, dx, bases: np.ndarray) -> np.ndarray:
    coords = box.index_to_coord(bases) + np.asarray(dx, dtype=np.int64)
    if box.geometry == "torus":
        coords = (coords + box.N) % box.side - box.N
    return box.coord_to_index(coords)


def _grid_positions_to_bases(box: Box, dx, grid_shape, flat_positions: np.ndarray) -> np.ndarray:
    multi = np.unravel_index(flat_positions, grid_shape)
    coords = np.stack(multi, axis=-1).astype(np.int64)
    if box.geometry == "box":
        coords += np.array([max(0, -c) for c in dx], dtype=np.int64)
    return coords @ np.array(
        [box.side ** (box.d - 1 - k) for k in range(box.d)], dtype=np.int64
    )


def _distinct_uniform(rng: np.random.Generator, n: int, k: int) -> np.ndarray:
    """k distinct uniform integers from [0, n); rejection with choice fallback."""
    if k > n:
        raise ValueError("cannot draw more distinct values than the population")
    if k == 0:
        return np.empty(0, dtype=np.int64)
    if k > n // 2 or n <= 4096:
        return np.sort(rng.choice(n, size=k, replace=False)).astype(np.int64)
    picked: set[int] = set()
    out = []
    while len(out) < k:
        batch = rng.integers(0, n, size=2 * (k - len(out)) + 8)
        for x in batch:
            x = int(x)
            if x not in picked:
                picked.add(x)
                out.append(x)
                if len(out) == k:
                    break
    return np.sort(np.asarray(out, dtype=np.int64))


def _class_rng(seed, stream, ident) -> np.random.Generator:
    key = tuple(int(s) for s in stream) + (int(ident),)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))


def _iter_classes(box: Box, predicate: PairPredicate, params: LrpParams):
    """Yield (ident, dx, probability, count, grid_or_None) per nonempty class."""
    for ident, dx in _canonical_displacements(box, predicate):
        p = connection_probability(params, dx, box.N)
        if predicate.is_trivial():
            yield ident, dx, p, _closed_form_count(box, dx), None
            continue
        g = _match_grid(box, predicate, dx)
        if g is False:
            continue
        if g is True:
            yield ident, dx, p, _closed_form_count(box, dx), None
        else:
            n = int(g.sum())
            if n:
                yield ident, dx, p, n, g


def enumerate_distance_classes(box: Box, predicate: PairPredicate, params: LrpParams) -> list[DistanceClass]:
    """Exact per-squared-distance pair multiplicities under a predicate.

    Displacement classes sharing a squared distance and probability are
    merged; distinct short-range probabilities at one distance stay separate.
    """
    agg: dict[tuple[int, float], int] = {}
    for _, dx, p, n, _ in _iter_classes(box, predicate, params):
        r2 = sum(c * c for c in dx)
        agg[(r2, p)] = agg.get((r2, p), 0) + n
    return [
        DistanceClass(r_squared=r2, multiplicity=n, probability=p)
        for (r2, p), n in sorted(agg.items())
    ]


def sample_edges(
    box: Box,
    predicate: PairPredicate,
    params: LrpParams,
    seed: int,
    stream: tuple = (),
) -> np.ndarray:
    """Sample an edge configuration restricted to pairs matching ``predicate``.

    Returns an (m, 2) array of vertex index pairs with u < v, lexsorted.
    Identical inputs give bit-identical output.
    """
    chunks = []
    for ident, dx, p, n, grid in _iter_classes(box, predicate, params):
        if p <= 0.0 or n == 0:
            continue
        rng = _class_rng(seed, stream, ident)
        if p >= 1.0:
            k = n
        else:
            k = int(rng.binomial(n, p))
        if k == 0:
            continue
        if grid is None:
            draws = _distinct_uniform(rng, n, k)
            bases = _decode_bases(box, dx, draws)
        else:
            positions = np.flatnonzero(grid.ravel())
            draws = _distinct_uniform(rng, n, k)
            bases = _grid_positions_to_bases(box, dx, grid.shape, positions[draws])
        partners = _partner_indices(box, dx, bases)
        lo = np.minimum(bases, partners)
        hi = np.maximum(bases, partners)
        chunks.append(np.stack([lo, hi], axis=1))
    if not chunks:
        return np.empty((0, 2), dtype=np.int64)
    edges = np.concatenate(chunks, axis=0)
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    return edges[order]


def staged_reveal(
    box: Box,
    stages: list[PairPredicate],
    params: LrpParams,
    seed: int,
    check_disjoint: bool = True,
) -> list[np.ndarray]:
    """Sample edges stage by stage under pairwise-disjoint predicates.

    Stage k's randomness is keyed by (seed, k), so its output does not
    depend on later stages.  The concatenation over stages has exactly the
    law of one-shot sampling over the union predicate.
    """
    if check_disjoint and box.n_vertices <= 1500:
        _check_disjoint_exhaustive(box, stages)
    out = []
    for k, pred in enumerate(stages):
        edges = sample_edges(box, pred, params, seed, stream=(k,))
        if len(edges):
            ok = pred.matches_pairs(box, edges[:, 0], edges[:, 1])
            if not ok.all():
                raise ValueError(f"stage {k} produced an edge violating its predicate")
            for j, other in enumerate(stages):
                if j != k and other.matches_pairs(box, edges[:, 0], edges[:, 1]).any():
                    raise ValueError(f"stage predicates {k} and {j} overlap")
        out.append(edges)
    return out


def _check_disjoint_exhaustive(box: Box, stages: list[PairPredicate]):
    n = box.n_vertices
    u, v = np.triu_indices(n, k=1)
    hit = np.zeros(len(u), dtype=np.int64)
    for pred in stages:
        hit += pred.matches_pairs(box, u, v)
    if (hit > 1).any():
        raise ValueError("stage predicates overlap")
