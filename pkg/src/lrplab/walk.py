"""Random-walk simulation and exact heat-kernel propagation.

The return-probability series is always expressed through the half-time
identity for reversible chains,

    psi_t = P_2t(x, x) / deg(x) = sum_y P_t(x, y)^2 / deg(y),

so one propagation to time t yields the value at 2t.  Continuous time is
handled by uniformization: a Poisson(t)-weighted mixture of discrete powers,
truncated once the neglected mass drops below 1e-12.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .core import LatticeGraph

__all__ = [
    "PsiSeries",
    "WalkStats",
    "heat_kernel_row_exact",
    "psi_series_exact",
    "psi_mc_collision",
    "simulate_walk",
    "universal_return_check",
    "psi_infinity",
    "plateau_mask",
    "empirical_tail",
]

UNIFORMIZATION_TOL = 1e-12


@dataclass
class PsiSeries:
    """Return-probability series psi_t = P_2t(x,x)/deg(x) on a time grid."""

    x: int
    times: np.ndarray
    values: np.ndarray
    method: str  # exact_propagation | uniformization | mc_collision
    stderr: np.ndarray | None = None


@dataclass
class WalkStats:
    """Per-trajectory statistics: jump lengths and running max displacement."""

    x: int
    mode: str
    t_max: float
    n_moves: int
    increments: np.ndarray  # Euclidean jump lengths, one per move
    running_max: np.ndarray  # D after each move (Euclidean, unwrapped)
    jump_times: np.ndarray | None = None  # continuous mode only
    diagnostic: str | None = None


def _component_chain(graph: LatticeGraph, component, x: int):
    """(csr adjacency, degrees, local index of x, original ids) for a component."""
    component = np.asarray(component, dtype=np.int64)
    sub, origin = graph.induced_subgraph(component)
    pos = np.searchsorted(origin, x)
    if pos >= len(origin) or origin[pos] != x:
        raise ValueError(f"vertex {x} is not in the component")
    degs = sub.degrees
    if (degs == 0).any():
        raise ValueError("component contains an isolated vertex; it is not connected")
    return sub.to_sparse(), degs, int(pos), origin


def _poisson_log_weight(t: float, k: int) -> float:
    return -t + k * math.log(t) - gammaln(k + 1)


def _propagate_rows(adj, degs, start: int, times, mode: str):
    """Rows P_t(start, .) for each requested time, one incremental sweep."""
    n = adj.shape[0]
    inv_deg = 1.0 / degs
    v = np.zeros(n)
    v[start] = 1.0
    times = list(times)
    if mode == "discrete":
        for t in times:
            if t != int(t) or t < 0:
                raise ValueError(f"discrete mode needs nonnegative integer times, got {t}")
        order = np.argsort(times, kind="stable")
        rows = [None] * len(times)
        step = 0
        for j in order:
            target = int(times[j])
            while step < target:
                v = adj.T @ (v * inv_deg)
                step += 1
            rows[j] = v.copy()
        return rows
    if mode != "continuous":
        raise ValueError(f"unknown mode {mode!r}")
    for t in times:
        if t < 0:
            raise ValueError(f"negative time {t}")
    rows = [np.zeros(n) for _ in times]
    acc = np.zeros(len(times))
    t_max = max(times) if times else 0.0
    k = 0
    while True:
        done = True
        for j, t in enumerate(times):
            if acc[j] >= 1.0 - UNIFORMIZATION_TOL:
                continue
            if t == 0.0:
                w = 1.0 if k == 0 else 0.0
            else:
                w = math.exp(_poisson_log_weight(t, k))
            if w > 0.0:
                rows[j] += w * v
                acc[j] += w
            # mass beyond k is still pending for this time
            if acc[j] < 1.0 - UNIFORMIZATION_TOL and (t > 0.0 and k < t + 60 * math.sqrt(t + 1) + 60):
                done = False
        if done:
            break
        v = adj.T @ (v * inv_deg)
        k += 1
    if (acc < 1.0 - 1e-9).any():
        raise RuntimeError("uniformization failed to accumulate unit mass")
    return rows


def heat_kernel_row_exact(graph: LatticeGraph, component, x: int, t, mode: str = "discrete"):
    """Distribution P_t(x, .), indexed by the sorted component vertex order."""
    adj, degs, start, _ = _component_chain(graph, component, x)
    row = _propagate_rows(adj, degs, start, [t], mode)[0]
    total = row.sum()
    if abs(total - 1.0) > 1e-9:
        raise RuntimeError(f"propagated row sums to {total}, not 1")
    return row


def psi_series_exact(graph: LatticeGraph, component, x: int, times, mode: str = "continuous") -> PsiSeries:
    """Exact psi series through the reversibility identity (one half-time row each)."""
    adj, degs, start, _ = _component_chain(graph, component, x)
    times = np.asarray(list(times), dtype=float)
    rows = _propagate_rows(adj, degs, start, times.tolist(), mode)
    values = np.array([float((row * row / degs).sum()) for row in rows])
    method = "uniformization" if mode == "continuous" else "exact_propagation"
    return PsiSeries(x=x, times=times, values=values, method=method)


def _vectorized_steps(adj, degs, pos: np.ndarray, rng, active=None) -> np.ndarray:
    """One SRW step for each walker in ``pos`` (optionally masked)."""
    if active is None:
        active = np.ones(len(pos), dtype=bool)
    idx = np.flatnonzero(active)
    if not len(idx):
        return pos
    cur = pos[idx]
    offsets = rng.integers(0, degs[cur])
    pos[idx] = adj.indices[adj.indptr[cur] + offsets]
    return pos


def psi_mc_collision(
    graph: LatticeGraph,
    component,
    x: int,
    t,
    reps: int,
    seed: int,
    mode: str = "discrete",
) -> PsiSeries:
    """Monte Carlo psi estimate from colliding walk pairs.

    Two independent t-walks X, Y start at x; the unbiased estimator of
    P_2t(x,x) adds deg(x)/deg(Y_t) whenever X_t = Y_t.
    """
    if reps < 1:
        raise ValueError(f"reps must be >= 1, got {reps}")
    adj, degs, start, _ = _component_chain(graph, component, x)
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    X = np.full(reps, start, dtype=np.int64)
    Y = np.full(reps, start, dtype=np.int64)
    if mode == "discrete":
        if t != int(t) or t < 0:
            raise ValueError("discrete mode needs a nonnegative integer time")
        for _ in range(int(t)):
            _vectorized_steps(adj, degs, X, rng)
            _vectorized_steps(adj, degs, Y, rng)
    elif mode == "continuous":
        jumps_x = rng.poisson(t, size=reps)
        jumps_y = rng.poisson(t, size=reps)
        for k in range(int(max(jumps_x.max(initial=0), jumps_y.max(initial=0)))):
            _vectorized_steps(adj, degs, X, rng, active=jumps_x > k)
            _vectorized_steps(adj, degs, Y, rng, active=jumps_y > k)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    samples = np.where(X == Y, degs[start] / degs[Y], 0.0) / degs[start]  # psi units
    mean = float(samples.mean())
    stderr = float(samples.std(ddof=1) / math.sqrt(reps)) if reps > 1 else float("inf")
    return PsiSeries(
        x=x,
        times=np.array([float(t)]),
        values=np.array([mean]),
        method="mc_collision",
        stderr=np.array([stderr]),
    )


def simulate_walk(graph: LatticeGraph, x: int, t_max, mode: str, seed: int) -> WalkStats:
    """Simulate SRW started at x; returns jump lengths and running max displacement.

    Displacements are tracked unwrapped: each jump adds the minimal-norm
    representative of its lattice displacement, so torus walks report true
    traveled distance.  An isolated start gives zero moves with a flag.
    """
    box = graph.box
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    if graph.degrees[x] == 0:
        return WalkStats(
            x=x, mode=mode, t_max=float(t_max), n_moves=0,
            increments=np.zeros(0), running_max=np.zeros(0),
            diagnostic="start vertex is isolated",
        )
    if mode == "discrete":
        n_moves = int(t_max)
        jump_times = None
    elif mode == "continuous":
        times = np.zeros(0)
        while not len(times) or times[-1] <= t_max:
            chunk = rng.exponential(1.0, size=max(64, int(t_max)))
            base = times[-1] if len(times) else 0.0
            times = np.concatenate([times, base + np.cumsum(chunk)])
        jump_times = times[times <= t_max]
        n_moves = len(jump_times)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    # batched draws and a precomputed coordinate table keep long runs cheap
    adj = graph.to_sparse()
    indptr, indices = adj.indptr, adj.indices
    degs = graph.degrees
    coords = box.all_coords()
    side = 2 * box.N + 1
    uniforms = rng.random(n_moves)
    cur = int(x)
    path = np.empty(n_moves + 1, dtype=np.int64)
    path[0] = cur
    for i in range(n_moves):
        lo = indptr[cur]
        cur = int(indices[lo + int(uniforms[i] * degs[cur])])
        path[i + 1] = cur
    dxs = coords[path[1:]] - coords[path[:-1]]
    if box.geometry == "torus":
        dxs = (dxs + box.N) % side - box.N
    increments = np.sqrt((dxs * dxs).sum(axis=1).astype(float))
    offsets = np.cumsum(dxs, axis=0)
    running = np.maximum.accumulate(np.sqrt((offsets * offsets).sum(axis=1).astype(float)))
    return WalkStats(
        x=x, mode=mode, t_max=float(t_max), n_moves=n_moves,
        increments=increments, running_max=running, jump_times=jump_times,
    )


def psi_infinity(graph: LatticeGraph, component) -> float:
    """Stationary plateau value of psi on a finite component: 1 / sum deg."""
    component = np.asarray(component, dtype=np.int64)
    total = int(graph.degrees[component].sum())
    if total == 0:
        raise ValueError("component has no edges")
    return 1.0 / total


def plateau_mask(series: PsiSeries, psi_inf: float, rel: float = 0.05) -> np.ndarray:
    """Boolean mask of grid points already at the finite-size plateau."""
    return np.abs(series.values - psi_inf) / psi_inf < rel


@dataclass
class ReturnCheck:
    passed: bool
    n_checked: int
    failures: list = field(default_factory=list)  # (t, P_2t(x,x), bound)


def universal_return_check(
    series: PsiSeries,
    deg_x: int,
    psi_inf: float,
    C: float = 4.0,
    plateau_rel: float = 0.05,
) -> ReturnCheck:
    """Check P_2t(x,x) <= C / sqrt(2t) on the pre-plateau part of the grid.

    The underlying fact is an infinite-graph bound, so plateau points
    (where the finite graph has equilibrated) are excluded.
    """
    if series.method == "mc_collision":
        raise ValueError("the return check needs an exact-method series")
    keep = ~plateau_mask(series, psi_inf, plateau_rel)
    failures = []
    n_checked = 0
    for t, val in zip(series.times[keep], series.values[keep]):
        if t <= 0:
            continue
        n_checked += 1
        p2t = val * deg_x
        bound = C / math.sqrt(2.0 * t)
        if p2t > bound:
            failures.append((float(t), float(p2t), float(bound)))
    return ReturnCheck(passed=not failures, n_checked=n_checked, failures=failures)


def empirical_tail(samples: np.ndarray, u_values) -> np.ndarray:
    """Survival probabilities P(sample > u) for each threshold u."""
    samples = np.asarray(samples, dtype=float)
    if not len(samples):
        raise ValueError("no samples")
    u_values = np.asarray(list(u_values), dtype=float)
    return np.array([(samples > u).mean() for u in u_values])
