"""Staged construction of a connected partition of the giant component.

The configuration is revealed in five structurally disjoint stages: pairs
inside one small block, core-to-core pairs of length at most N2, remaining
pairs of length at most N3, pairs with an endpoint outside the core and
length above N3, and finally long core pairs.  Each stage has its own
randomness stream, so the union of the stage samples has exactly the law of
a one-shot sample of the whole configuration.

Success of the construction is tracked by five events:

* O  every small block's largest internal component is dense enough,
* A  cores of adjacent blocks are directly linked,
* E  phase-1 part volumes in range and leftover clusters small,
* F  phase-2 volume/diameter increments in range,
* R  assembled large-scale parts connected.

Failure of an event is data (a flag with a reason), never an exception.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .core import Box, LatticeGraph, LrpParams, flat_graph
from .cluster import component_diameter, connected_components
from .sampler import PairPredicate, sample_edges

__all__ = [
    "ScaleLadder",
    "make_ladder",
    "default_toy_overrides",
    "BlockGrid",
    "RenormConfig",
    "StageEvent",
    "stage_predicates",
    "stage1_block_cores",
    "stage2_link_cores",
    "allocate_phase1",
    "allocate_phase2",
    "assemble_N1_parts",
    "run_pipeline",
    "pipeline_events",
    "partition_invariants",
    "partition_diagnostics",
]


@dataclass(frozen=True)
class ScaleLadder:
    """The nested scales N0 >= N1 > N2 > N3 > N4 of the construction."""

    N0: int
    N1: int
    N2: int
    N3: int
    N4: int
    s_prime: float
    rho: float
    mode: str
    feasible: bool
    note: str = ""


def _ordering_ok(N0, N1, N2, N3, N4) -> bool:
    return N0 >= N1 > N2 > N3 > N4 >= 2


def make_ladder(
    N: int,
    params: LrpParams,
    s_prime: float | None = None,
    rho: float = 0.1,
    mode: str = "paper_formula",
    overrides: dict | None = None,
) -> ScaleLadder:
    """Build the scale ladder for region radius N.

    In ``paper_formula`` mode the inner scales follow the asymptotic
    recipe N2 = floor(N1^((s-d)/d) (ln N1)^(3/d)), N3 = floor(sqrt(N2)),
    N4 = ceil((ln N)^(2/(2d-s'))); an ordering violation is reported via
    ``feasible=False`` with an explanation, not an exception.  In
    ``toy_override`` mode explicit N1..N4 are taken from ``overrides``
    and the strict ordering is enforced.
    """
    d, s = params.d, params.s
    if s_prime is None:
        s_prime = (s + 2 * d) / 2.0
    if not s < s_prime < 2 * d:
        raise ValueError(f"s_prime must lie in (s, 2d) = ({s}, {2 * d}), got {s_prime}")
    if not 0.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (0, 1), got {rho}")
    overrides = dict(overrides or {})
    if mode == "toy_override":
        N1 = int(overrides.get("N1", N))
        N2, N3, N4 = (int(overrides[k]) for k in ("N2", "N3", "N4"))
        if not _ordering_ok(N, N1, N2, N3, N4):
            raise ValueError(
                f"toy ladder must satisfy N >= N1 > N2 > N3 > N4 >= 2, "
                f"got {(N, N1, N2, N3, N4)}"
            )
        return ScaleLadder(N, N1, N2, N3, N4, s_prime, rho, mode, feasible=True)
    if mode != "paper_formula":
        raise ValueError(f"unknown ladder mode {mode!r}")
    N1 = int(overrides.get("N1", N))
    logN1 = math.log(N1)
    N2 = math.floor(N1 ** ((s - d) / d) * logN1 ** (3.0 / d))
    N3 = math.floor(math.sqrt(max(N2, 0)))
    N4 = math.ceil(math.log(N) ** (2.0 / (2 * d - s_prime)))
    feasible = _ordering_ok(N, N1, N2, N3, N4)
    note = ""
    if not feasible:
        note = (
            f"asymptotic formulas give N1={N1}, N2={N2}, N3={N3}, N4={N4}; "
            f"the strict ordering N >= N1 > N2 > N3 > N4 >= 2 fails at this scale"
        )
    return ScaleLadder(N, N1, N2, N3, N4, s_prime, rho, mode, feasible, note)


def default_toy_overrides(N: int, d: int) -> dict:
    """Toy-ladder scales calibrated for the d = 1 pilot regime, scaled to N.

    The inner scales shrink for small regions so the strict ordering holds.
    """
    if d == 1:
        N2, N3, N4 = 128, 40, 16
    else:
        N2, N3, N4 = 8, 4, 2
    while N2 >= N and N2 > 4:
        N2, N3, N4 = max(N2 // 2, 4), max(N3 // 2, 3), max(N4 // 2, 2)
    return {"N1": N, "N2": N2, "N3": N3, "N4": N4}


class BlockGrid:
    """Axis-aligned blocks of a fixed side covering a box.

    Blocks partition the vertex set; two blocks are adjacent when their
    grid positions differ by at most 1 in every coordinate.  A boundary
    remainder shorter than half a block merges into the last full block,
    so block sizes stay within a factor 3/2 of the nominal side.
    """

    def __init__(self, box: Box, block_side: int):
        if box.geometry != "box":
            raise ValueError("block grids are defined on box geometry only")
        if block_side < 1:
            raise ValueError("block side must be >= 1")
        self.box = box
        self.block_side = int(block_side)
        self.per_axis = max(1, round(box.side / self.block_side))
        self.n_blocks = self.per_axis**box.d
        shifted = box.all_coords() + box.N
        grid = np.minimum(shifted // self.block_side, self.per_axis - 1)
        lab = grid[:, 0].astype(np.int64)
        for k in range(1, box.d):
            lab = lab * self.per_axis + grid[:, k]
        self.labels = lab

    def block_grid_coords(self, bid: int) -> tuple[int, ...]:
        out = []
        for _ in range(self.box.d):
            out.append(bid % self.per_axis)
            bid //= self.per_axis
        return tuple(reversed(out))

    def block_lo(self, bid: int) -> np.ndarray:
        """Low corner of the block, in lattice coordinates."""
        g = np.array(self.block_grid_coords(bid), dtype=np.int64)
        return g * self.block_side - self.box.N

    def block_size(self, bid: int) -> int:
        g = self.block_grid_coords(bid)
        n = 1
        for gk in g:
            if gk == self.per_axis - 1:
                n *= self.box.side - gk * self.block_side
            else:
                n *= self.block_side
        return n

    def block_vertices(self, bid: int) -> np.ndarray:
        return np.flatnonzero(self.labels == bid)

    def block_of_coords(self, coords) -> int:
        shifted = np.asarray(coords, dtype=np.int64) + self.box.N
        g = np.minimum(shifted // self.block_side, self.per_axis - 1)
        bid = int(g[0])
        for k in range(1, self.box.d):
            bid = bid * self.per_axis + int(g[k])
        return bid

    def adjacent_pairs(self):
        """Unordered adjacent block pairs (b1 < b2), row-major order."""
        d, m = self.box.d, self.per_axis
        offsets = [o for o in product((-1, 0, 1), repeat=d) if any(o)]
        for bid in range(self.n_blocks):
            g = self.block_grid_coords(bid)
            for off in offsets:
                h = tuple(g[k] + off[k] for k in range(d))
                if any(not 0 <= h[k] < m for k in range(d)):
                    continue
                other = 0
                for hk in h:
                    other = other * m + hk
                if bid < other:
                    yield bid, other


@dataclass(frozen=True)
class RenormConfig:
    """Thresholds for the stage events; defaults from a pilot calibration."""

    rho1: float = 0.02  # min part volume, fraction of the anchor block size
    rho2: float = 3.0  # max part volume, multiple of the anchor block size
    small_cluster_factor: float = 4.0  # leftover-cluster bound multiplier
    phase2_volume_frac: float = 1.0  # max phase-2 volume gain per part
    phase2_diameter_add: float = 40.0  # max phase-2 diameter gain per part


@dataclass(frozen=True)
class StageEvent:
    name: str
    ok: bool
    reason: str = ""
    measured: dict = field(default_factory=dict)


def stage_predicates(box: Box, grid4: BlockGrid, core_mask: np.ndarray, ladder: ScaleLadder):
    """The five pairwise-disjoint stage predicates covering every pair."""
    labels = grid4.labels
    N2, N3 = ladder.N2, ladder.N3
    s1 = PairPredicate(same_block=labels)
    s2 = PairPredicate(set_a=core_mask, linf_max=N2, diff_block=labels)
    s3 = PairPredicate(
        linf_max=N3,
        diff_block=labels,
        exclude=(PairPredicate(set_a=core_mask, linf_max=N3, diff_block=labels),),
    )
    s4 = PairPredicate(
        linf_min=N3 + 1,
        diff_block=labels,
        exclude=(PairPredicate(set_a=core_mask, linf_min=N3 + 1, diff_block=labels),),
    )
    s5 = PairPredicate(set_a=core_mask, linf_min=N2 + 1, diff_block=labels)
    return [s1, s2, s3, s4, s5]


def _nested_grid(box: Box, nominal_side: int, finer: BlockGrid) -> BlockGrid:
    """A block grid whose side is a multiple of a finer grid's, so the finer
    blocks nest inside the coarser ones exactly."""
    b = finer.block_side * max(1, round(nominal_side / finer.block_side))
    grid = BlockGrid(box, b)
    for bid in range(finer.n_blocks):
        coarse = grid.labels[finer.block_vertices(bid)]
        if len(np.unique(coarse)) != 1:
            raise ValueError(
                f"fine block {bid} straddles a coarse block boundary; "
                f"adjust the ladder scales (sides {finer.block_side}, {b})"
            )
    return grid


def _linf(box: Box, edges: np.ndarray) -> np.ndarray:
    if not len(edges):
        return np.zeros(0, dtype=np.int64)
    dx = box.index_to_coord(edges[:, 1]) - box.index_to_coord(edges[:, 0])
    return np.abs(dx).max(axis=1)


def _multi_source_bfs(graph: LatticeGraph, sources: np.ndarray) -> np.ndarray:
    """Hop distance to the source set; unreachable vertices get n_vertices."""
    n = graph.n_vertices
    dist = np.full(n, n, dtype=np.int64)
    dist[sources] = 0
    frontier = np.asarray(sources, dtype=np.int64)
    d = 0
    while len(frontier):
        d += 1
        nbrs = np.concatenate(
            [graph.indices[graph.indptr[v] : graph.indptr[v + 1]] for v in frontier]
        ) if len(frontier) else np.zeros(0, dtype=np.int64)
        fresh = np.unique(nbrs[dist[nbrs] == n]) if len(nbrs) else nbrs
        if not len(fresh):
            break
        dist[fresh] = d
        frontier = fresh
    return dist


def _layered_assign(graph: LatticeGraph, part_of: np.ndarray, dist: np.ndarray):
    """Assign unassigned vertices layer by layer to a nearest assigned part.

    Within a layer vertices are processed in ascending index; each takes the
    smallest part id found among its previous-layer neighbors (the
    deterministic tie-break: equal graph distance, then smallest anchor
    block in row-major order).
    """
    n = graph.n_vertices
    max_d = int(dist[dist < n].max(initial=0))
    for k in range(1, max_d + 1):
        for v in np.flatnonzero(dist == k):
            best = -1
            for u in graph.neighbors(int(v)):
                if dist[u] == k - 1 and part_of[u] >= 0:
                    if best < 0 or part_of[u] < best:
                        best = int(part_of[u])
            if best < 0:
                raise RuntimeError("layered assignment hit a vertex with no assigned predecessor")
            part_of[v] = best


def _part_subgraph(edges: np.ndarray, vertices: np.ndarray):
    vertices = np.asarray(vertices, dtype=np.int64)
    lookup: dict[int, int] = {int(v): i for i, v in enumerate(vertices)}
    sub = []
    vset = set(lookup)
    for u, v in edges:
        if int(u) in vset and int(v) in vset:
            sub.append((lookup[int(u)], lookup[int(v)]))
    return flat_graph(len(vertices), np.array(sub, dtype=np.int64).reshape(-1, 2))


def _part_diameter(edges: np.ndarray, vertices: np.ndarray) -> int | None:
    """Exact diameter of the induced subgraph, or None if disconnected."""
    g = _part_subgraph(edges, vertices)
    lab = connected_components(g)
    if lab.n_components != 1:
        return None
    return component_diameter(g, np.arange(len(vertices)), mode="exact")


@dataclass
class Stage1Result:
    box: Box
    ladder: ScaleLadder
    params: LrpParams
    seed: int
    config: RenormConfig
    grid4: BlockGrid
    edges: np.ndarray
    core_mask: np.ndarray
    core_of_block: dict
    occupied: np.ndarray
    event: StageEvent


def stage1_block_cores(
    region: Box,
    ladder: ScaleLadder,
    params: LrpParams,
    seed: int,
    config: RenormConfig = RenormConfig(),
) -> Stage1Result:
    """Reveal intra-block pairs and extract each block's largest component.

    A block is occupied when its largest internal component holds at least
    ``ladder.rho`` of its vertices; event O asks every block to be occupied.
    """
    if not ladder.feasible:
        raise ValueError(f"infeasible ladder: {ladder.note}")
    grid4 = BlockGrid(region, 2 * ladder.N4 + 1)
    pred = PairPredicate(same_block=grid4.labels)
    edges = sample_edges(region, pred, params, seed, stream=(0,))
    labeling = connected_components(LatticeGraph(region, edges))
    core_mask = np.zeros(region.n_vertices, dtype=bool)
    core_of_block: dict[int, np.ndarray] = {}
    occupied = np.zeros(grid4.n_blocks, dtype=bool)
    fractions = np.zeros(grid4.n_blocks)
    for bid in range(grid4.n_blocks):
        verts = grid4.block_vertices(bid)
        labs = labeling.labels[verts]
        counts = np.bincount(labs)
        # components of the intra-block graph never leave their block, so
        # in-block counts equal global sizes; argmax honors the size-then-
        # min-vertex tie order of the labeling
        best = int(np.argmax(counts))
        core = verts[labs == best]
        core_of_block[bid] = core
        core_mask[core] = True
        fractions[bid] = len(core) / grid4.block_size(bid)
        occupied[bid] = len(core) >= ladder.rho * grid4.block_size(bid)
    ok = bool(occupied.all())
    event = StageEvent(
        "O",
        ok,
        "" if ok else f"{int((~occupied).sum())} of {grid4.n_blocks} blocks under density rho",
        measured={
            "occupied_fraction": float(occupied.mean()),
            "min_core_fraction": float(fractions.min()),
            "median_core_fraction": float(np.median(fractions)),
        },
    )
    return Stage1Result(region, ladder, params, seed, config, grid4, edges, core_mask, core_of_block, occupied, event)


@dataclass
class Stage2Result:
    stage1: Stage1Result
    edges: np.ndarray
    core_graph_edges: np.ndarray
    linked_pairs: set
    event: StageEvent


def stage2_link_cores(stage1: Stage1Result, seed: int | None = None) -> Stage2Result:
    """Reveal core-to-core pairs of length at most N2 across blocks.

    Event A holds when every adjacent pair of occupied blocks has a direct
    revealed edge between its cores.  The returned core graph carries all
    edges revealed so far between core vertices.
    """
    box, ladder, params = stage1.box, stage1.ladder, stage1.params
    seed = stage1.seed if seed is None else seed
    pred = PairPredicate(set_a=stage1.core_mask, linf_max=ladder.N2, diff_block=stage1.grid4.labels)
    edges = sample_edges(box, pred, params, seed, stream=(1,))
    labels = stage1.grid4.labels
    linked = set()
    for u, v in edges:
        a, b = int(labels[u]), int(labels[v])
        linked.add((min(a, b), max(a, b)))
    missing = []
    n_adj = 0
    for b1, b2 in stage1.grid4.adjacent_pairs():
        if stage1.occupied[b1] and stage1.occupied[b2]:
            n_adj += 1
            if (b1, b2) not in linked:
                missing.append((b1, b2))
    ok = not missing
    event = StageEvent(
        "A",
        ok,
        "" if ok else f"{len(missing)} adjacent occupied block pairs unlinked, e.g. {missing[0]}",
        measured={
            "adjacent_occupied_pairs": n_adj,
            "linked_fraction": 1.0 if n_adj == 0 else 1.0 - len(missing) / n_adj,
        },
    )
    core = stage1.core_mask
    intra = stage1.edges
    if len(intra):
        intra = intra[core[intra[:, 0]] & core[intra[:, 1]]]
    core_graph_edges = np.concatenate([intra.reshape(-1, 2), edges.reshape(-1, 2)], axis=0)
    return Stage2Result(stage1, edges, core_graph_edges, linked, event)


@dataclass
class Phase1Result:
    stage2: Stage2Result
    grid2: BlockGrid
    edges: np.ndarray
    alloc_edges: np.ndarray  # core graph plus all revealed pairs of length <= N3
    part_of: np.ndarray
    dist_to_core: np.ndarray
    volumes: dict
    diameters: dict
    event: StageEvent


def allocate_phase1(stage2: Stage2Result, seed: int | None = None) -> Phase1Result:
    """Reveal remaining pairs of length at most N3 and allocate around the core.

    Core vertices are anchored to the N2 block containing them; every other
    vertex reachable from the core in the allocation graph (core edges plus
    all revealed pairs of length <= N3) joins the part of a nearest core
    block via layered BFS.  Event E bounds part volumes and the size of the
    clusters left unallocated.
    """
    s1 = stage2.stage1
    box, ladder, params, config = s1.box, s1.ladder, s1.params, s1.config
    seed = s1.seed if seed is None else seed
    core = s1.core_mask
    labels4 = s1.grid4.labels
    pred = PairPredicate(
        linf_max=ladder.N3,
        diff_block=labels4,
        exclude=(PairPredicate(set_a=core, linf_max=ladder.N3, diff_block=labels4),),
    )
    edges = sample_edges(box, pred, params, seed, stream=(2,))
    short1 = s1.edges[_linf(box, s1.edges) <= ladder.N3] if len(s1.edges) else s1.edges
    alloc_edges = np.concatenate(
        [stage2.core_graph_edges.reshape(-1, 2), short1.reshape(-1, 2), edges.reshape(-1, 2)], axis=0
    )
    graph = LatticeGraph(box, alloc_edges)
    grid2 = _nested_grid(box, 2 * ladder.N2 + 1, s1.grid4)
    part_of = np.full(box.n_vertices, -1, dtype=np.int64)
    core_idx = np.flatnonzero(core)
    part_of[core_idx] = grid2.labels[core_idx]
    dist = _multi_source_bfs(graph, core_idx)
    reachable = dist < box.n_vertices
    _layered_assign(graph, part_of, np.where(reachable, dist, box.n_vertices))

    assigned = part_of >= 0
    volumes = {int(p): int(c) for p, c in zip(*np.unique(part_of[assigned], return_counts=True))}
    diameters = {p: _part_diameter(alloc_edges, np.flatnonzero(part_of == p)) for p in volumes}
    bad_vol = []
    for p, vol in volumes.items():
        size = grid2.block_size(p)
        if not config.rho1 * size <= vol <= config.rho2 * size:
            bad_vol.append((p, vol, size))
    # clusters of the allocation graph missed by the core component
    leftover = connected_components(LatticeGraph(box, alloc_edges))
    left_sizes = np.bincount(leftover.labels[~assigned]) if (~assigned).any() else np.zeros(1, int)
    max_left = int(left_sizes.max(initial=0))
    threshold = config.small_cluster_factor * ladder.N4 ** (params.s - params.d) * math.log(ladder.N0) ** 2
    ok = not bad_vol and max_left <= threshold
    reasons = []
    if bad_vol:
        reasons.append(f"{len(bad_vol)} parts outside volume window, e.g. {bad_vol[0]}")
    if max_left > threshold:
        reasons.append(f"leftover cluster of size {max_left} exceeds {threshold:.1f}")
    event = StageEvent(
        "E",
        ok,
        "; ".join(reasons),
        measured={
            "n_parts": len(volumes),
            "min_volume": min(volumes.values(), default=0),
            "max_volume": max(volumes.values(), default=0),
            "max_leftover_cluster": max_left,
            "leftover_threshold": threshold,
        },
    )
    return Phase1Result(stage2, grid2, edges, alloc_edges, part_of, dist, volumes, diameters, event)


@dataclass
class Phase2Result:
    phase1: Phase1Result
    edges: np.ndarray
    revealed_edges: np.ndarray  # everything revealed through stage 4
    part_of: np.ndarray
    volumes: dict
    diameters: dict
    event: StageEvent


def allocate_phase2(phase1: Phase1Result, seed: int | None = None) -> Phase2Result:
    """Reveal pairs touching the complement of the core (length above N3).

    Clusters that become connected to the allocated set are attached to the
    part of their attachment point by the same layered rule.  Event F bounds
    the per-part volume and diameter increments.
    """
    s1 = phase1.stage2.stage1
    box, ladder, params, config = s1.box, s1.ladder, s1.params, s1.config
    seed = s1.seed if seed is None else seed
    core = s1.core_mask
    labels4 = s1.grid4.labels
    pred = PairPredicate(
        linf_min=ladder.N3 + 1,
        diff_block=labels4,
        exclude=(PairPredicate(set_a=core, linf_min=ladder.N3 + 1, diff_block=labels4),),
    )
    edges = sample_edges(box, pred, params, seed, stream=(3,))
    revealed = np.concatenate([phase1.alloc_edges.reshape(-1, 2), edges.reshape(-1, 2)], axis=0)
    graph = LatticeGraph(box, revealed)
    part_of = phase1.part_of.copy()
    assigned = np.flatnonzero(part_of >= 0)
    dist = _multi_source_bfs(graph, assigned)
    _layered_assign(graph, part_of, dist)

    now = part_of >= 0
    volumes = {int(p): int(c) for p, c in zip(*np.unique(part_of[now], return_counts=True))}
    diameters = {p: _part_diameter(revealed, np.flatnonzero(part_of == p)) for p in volumes}
    bad = []
    for p, vol in volumes.items():
        vol0 = phase1.volumes.get(p, 0)
        if vol - vol0 > config.phase2_volume_frac * max(vol0, 1):
            bad.append((p, "volume", vol0, vol))
            continue
        d0, d1 = phase1.diameters.get(p), diameters[p]
        if d1 is None:
            bad.append((p, "disconnected", d0, None))
        elif d0 is not None and d1 - d0 > config.phase2_diameter_add:
            bad.append((p, "diameter", d0, d1))
    ok = not bad
    event = StageEvent(
        "F",
        ok,
        "" if ok else f"{len(bad)} parts exceeded increment bounds, e.g. {bad[0]}",
        measured={
            "max_volume_gain": max(
                (volumes[p] - phase1.volumes.get(p, 0) for p in volumes), default=0
            ),
            "n_newly_assigned": int(now.sum() - len(assigned)),
        },
    )
    return Phase2Result(phase1, edges, revealed, part_of, volumes, diameters, event)


@dataclass
class AssembleResult:
    phase2: Phase2Result
    grid1: BlockGrid
    edges: np.ndarray
    all_edges: np.ndarray
    assembled: dict  # N1 block id -> vertex array
    connected: dict  # N1 block id -> bool
    event: StageEvent


def assemble_N1_parts(phase2: Phase2Result, seed: int | None = None) -> AssembleResult:
    """Reveal the remaining long core pairs and merge parts per N1 block.

    Each N2-anchored part joins the N1 block containing its anchor; event R
    asks every assembled part to induce a connected subgraph of the fully
    revealed configuration.
    """
    s1 = phase2.phase1.stage2.stage1
    box, ladder, params = s1.box, s1.ladder, s1.params
    seed = s1.seed if seed is None else seed
    pred = PairPredicate(set_a=s1.core_mask, linf_min=ladder.N2 + 1, diff_block=s1.grid4.labels)
    edges = sample_edges(box, pred, params, seed, stream=(4,))
    all_edges = np.concatenate([phase2.revealed_edges.reshape(-1, 2), edges.reshape(-1, 2)], axis=0)
    grid2 = phase2.phase1.grid2
    grid1 = _nested_grid(box, 2 * ladder.N1 + 1, grid2)
    groups: dict[int, list] = {}
    for p in phase2.volumes:
        n1_bid = grid1.block_of_coords(grid2.block_lo(p))
        groups.setdefault(n1_bid, []).append(p)
    assembled = {}
    connected = {}
    failures = 0
    for n1_bid, parts in sorted(groups.items()):
        verts = np.flatnonzero(np.isin(phase2.part_of, parts))
        assembled[n1_bid] = verts
        sub = _part_subgraph(all_edges, verts)
        connected[n1_bid] = connected_components(sub).n_components == 1
        failures += not connected[n1_bid]
    ok = failures == 0
    event = StageEvent(
        "R",
        ok,
        "" if ok else f"{failures} assembled parts disconnected",
        measured={"n_assembled": len(assembled), "n_disconnected": failures},
    )
    return AssembleResult(phase2, grid1, edges, all_edges, assembled, connected, event)


def run_pipeline(
    region: Box,
    ladder: ScaleLadder,
    params: LrpParams,
    seed: int,
    config: RenormConfig = RenormConfig(),
) -> AssembleResult:
    """Run all five stages; events are carried on the per-stage results."""
    s1 = stage1_block_cores(region, ladder, params, seed, config)
    s2 = stage2_link_cores(s1)
    p1 = allocate_phase1(s2)
    p2 = allocate_phase2(p1)
    return assemble_N1_parts(p2)


def pipeline_events(result: AssembleResult) -> dict[str, StageEvent]:
    p2 = result.phase2
    p1 = p2.phase1
    s2 = p1.stage2
    return {"O": s2.stage1.event, "A": s2.event, "E": p1.event, "F": p2.event, "R": result.event}


def partition_invariants(result: AssembleResult) -> dict:
    """Exact partition checks against the fully revealed configuration.

    Checks: the parts cover exactly the largest component, every part's
    induced subgraph is connected, and each block's core sits in the part
    anchored at its own N2 block.
    """
    p2 = result.phase2
    s1 = p2.phase1.stage2.stage1
    box = s1.box
    graph = LatticeGraph(box, result.all_edges)
    labeling = connected_components(graph)
    c1 = set(labeling.largest().tolist())
    assigned = set(np.flatnonzero(p2.part_of >= 0).tolist())
    covering = assigned == c1
    parts_connected = all(
        _part_diameter(result.all_edges, np.flatnonzero(p2.part_of == p)) is not None
        for p in p2.volumes
    )
    core_idx = np.flatnonzero(s1.core_mask)
    core_containment = bool(
        np.all(p2.part_of[core_idx] == p2.phase1.grid2.labels[core_idx])
    )
    return {
        "covering": covering,
        "parts_connected": parts_connected,
        "core_containment": core_containment,
        "all": covering and parts_connected and core_containment,
        "n_assigned": len(assigned),
        "c1_size": len(c1),
    }


def partition_diagnostics(result: AssembleResult) -> dict:
    """Per-part volume, diameter, core count, and minimum degree ratio."""
    p2 = result.phase2
    s1 = p2.phase1.stage2.stage1
    graph = LatticeGraph(s1.box, result.all_edges)
    part_of = p2.part_of
    rows = []
    for p in sorted(p2.volumes):
        verts = np.flatnonzero(part_of == p)
        ratios = []
        for v in verts:
            nbrs = graph.neighbors(int(v))
            if len(nbrs):
                ratios.append(float((part_of[nbrs] == p).sum() / len(nbrs)))
        rows.append(
            {
                "part_id": int(p),
                "anchor_block": tuple(int(c) for c in p2.phase1.grid2.block_lo(p)),
                "volume": int(len(verts)),
                "diameter": p2.diameters.get(p),
                "core_count": int(s1.core_mask[verts].sum()),
                "min_degree_ratio": min(ratios) if ratios else 0.0,
            }
        )
    vols = [r["volume"] for r in rows]
    events = pipeline_events(result)
    return {
        "parts": rows,
        "n_parts": len(rows),
        "volume_min": min(vols, default=0),
        "volume_max": max(vols, default=0),
        "min_degree_ratio": min((r["min_degree_ratio"] for r in rows), default=0.0),
        "events": {k: {"ok": e.ok, "reason": e.reason, "measured": e.measured} for k, e in events.items()},
    }
