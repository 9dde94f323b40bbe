"""Numerical instantiation of the abstract heat-kernel upper bound.

Six measurable assumptions tie a partition schedule (gap floor lambda_s,
volume scale V_s, degree ratio Delta, escape probability from an inner
region B_R) to the return probability psi_s.  When they hold, psi obeys the
differential inequality

    -d/ds psi_s >= Delta_s * lambda_s * (psi_s - (1 + C3) log V_s / V_s)

whose integrated consequence is the closed-form decay curve produced by
:func:`bound_curve`.  The unnamed constants of the conclusion are fitted
per run (the underlying statement asserts existence, not values).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import LatticeGraph
from .walk import PsiSeries

__all__ = [
    "BoundParams",
    "TimeScaleRow",
    "AssumptionCheck",
    "check_assumptions",
    "escape_probability",
    "escape_vector",
    "verify_differential_inequality",
    "DiffIneqReport",
    "bound_curve",
    "BoundCurve",
    "fit_constants",
]


@dataclass(frozen=True)
class BoundParams:
    """Constants of the abstract bound; delta is pinned to 2 + d1 + d2 + gamma."""

    gamma: float
    delta1_tilde: float = 0.0
    delta2_tilde: float = 0.0
    c1: float = 0.5
    C1: float = 2.0
    c2: float = 1.0
    c3: float = 0.5
    C3: float = 1.0
    C4: float = 100.0
    T1: float = 1.0
    T2: float = 100.0
    C5: float | None = None
    C6: float | None = None

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if self.delta1_tilde < 0 or self.delta2_tilde < 0:
            raise ValueError("delta tildes must be >= 0")
        for name in ("c1", "C1", "c2", "c3", "C3", "C4"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if not self.T1 < self.T2:
            raise ValueError(f"need T1 < T2, got [{self.T1}, {self.T2}]")

    @property
    def delta(self) -> float:
        return 2.0 + self.delta1_tilde + self.delta2_tilde + self.gamma


@dataclass(frozen=True)
class TimeScaleRow:
    """Measured quantities at one time scale s of the partition schedule."""

    s: float
    lambda_s: float  # gap floor declared by the schedule
    V_s: float  # volume scale declared by the schedule
    gap_min: float  # measured minimum spectral gap over parts
    vol_min: float  # measured minimum part volume
    vol_max: float  # measured maximum part volume
    delta_ratio: float  # measured min over B(s) of deg_part/deg
    escape_sup: float  # measured sup over B_R of P_s(x, B(s)^c)
    psi_s: float  # measured return series value at s


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    ok: bool
    margin: float  # min over s of (measured - required); >= 0 when ok
    detail: str = ""


def check_assumptions(rows: list[TimeScaleRow], params: BoundParams) -> dict[str, AssumptionCheck]:
    """Evaluate assumptions (1)-(6) on a schedule; margins are worst cases.

    Also validates the schedule's shape requirements: lambda_s nonincreasing
    and V_s nondecreasing in s.
    """
    if not rows:
        raise ValueError("empty schedule")
    s_vals = [r.s for r in rows]
    if sorted(s_vals) != s_vals:
        raise ValueError("schedule rows must be sorted by s")
    lam = [r.lambda_s for r in rows]
    vol = [r.V_s for r in rows]
    if any(b > a + 1e-12 for a, b in zip(lam, lam[1:])):
        raise ValueError("lambda_s must be nonincreasing in s")
    if any(b < a - 1e-12 for a, b in zip(vol, vol[1:])):
        raise ValueError("V_s must be nondecreasing in s")

    def worst(pairs):
        margins = [m for m, _ in pairs]
        i = int(np.argmin(margins))
        return margins[i], pairs[i][1]

    out = {}
    m, d = worst([(r.gap_min - r.lambda_s, f"s={r.s}") for r in rows])
    out["gap_floor"] = AssumptionCheck("gap_floor", m >= 0, m, d)
    pairs = []
    for r in rows:
        lo = r.vol_min - params.c1 * r.V_s
        hi = params.C1 * r.V_s - r.vol_max
        pairs.append((min(lo, hi), f"s={r.s}"))
    m, d = worst(pairs)
    out["volume_window"] = AssumptionCheck("volume_window", m >= 0, m, d)
    pairs = [
        (
            r.lambda_s - params.c2 * r.V_s ** (-params.gamma) * math.log(r.V_s) ** (-params.delta1_tilde),
            f"s={r.s}",
        )
        for r in rows
    ]
    m, d = worst(pairs)
    out["linkage"] = AssumptionCheck("linkage", m >= 0, m, d)
    pairs = [
        (r.delta_ratio - params.c3 * math.log(r.V_s) ** (-params.delta2_tilde), f"s={r.s}")
        for r in rows
    ]
    m, d = worst(pairs)
    out["degree_ratio"] = AssumptionCheck("degree_ratio", m >= 0, m, d)
    pairs = [
        (params.C3 * math.log(r.V_s) / r.V_s - r.escape_sup, f"s={r.s}")
        for r in rows
    ]
    m, d = worst(pairs)
    out["escape"] = AssumptionCheck("escape", m >= 0, m, d)
    pairs = []
    for r in rows:
        q = r.psi_s * r.V_s / math.log(r.V_s)
        pairs.append((min(q - (2.0 + params.C3), params.C4 - q), f"s={r.s} (psi V/log V={q:.3g})"))
    m, d = worst(pairs)
    out["calibration"] = AssumptionCheck("calibration", m >= 0, m, d)
    return out


def escape_probability(
    graph: LatticeGraph,
    component,
    region_mask: np.ndarray,
    x: int,
    t: float,
    mode: str = "continuous",
) -> float:
    """P(walk from x leaves the region by time t), by absorbing propagation.

    The complement of ``region_mask`` (a boolean mask over graph vertices)
    absorbs; the returned value is 1 minus the surviving mass, an upper
    bound for the instantaneous mass outside the region.
    """
    from .walk import _component_chain, _poisson_log_weight

    adj, degs, start, origin = _component_chain(graph, component, x)
    inside = np.asarray(region_mask, dtype=bool)[origin]
    if not inside[start]:
        return 1.0
    inv_deg = 1.0 / degs
    v = np.zeros(adj.shape[0])
    v[start] = 1.0
    if mode == "discrete":
        if t != int(t) or t < 0:
            raise ValueError("discrete mode needs a nonnegative integer time")
        for _ in range(int(t)):
            v = adj.T @ (v * inv_deg)
            v[~inside] = 0.0
        return float(1.0 - v.sum())
    if mode != "continuous":
        raise ValueError(f"unknown mode {mode!r}")
    if t < 0:
        raise ValueError("negative time")
    survive = 0.0
    acc = 0.0
    k = 0
    cap = t + 60 * math.sqrt(t + 1) + 60
    while acc < 1.0 - 1e-12 and k <= cap:
        w = 1.0 if (t == 0.0 and k == 0) else (0.0 if t == 0.0 else math.exp(_poisson_log_weight(t, k)))
        survive += w * v.sum()
        acc += w
        v = adj.T @ (v * inv_deg)
        v[~inside] = 0.0
        k += 1
    if acc < 1.0 - 1e-9:
        raise RuntimeError(f"uniformization accumulated only {acc} mass")
    return float(1.0 - survive)


def escape_vector(
    graph: LatticeGraph,
    component,
    region_mask: np.ndarray,
    t: float,
    mode: str = "continuous",
) -> np.ndarray:
    """Escape probability by time t for every component vertex at once.

    Uses the adjoint recursion: the survival vector w satisfies
    w <- P_region w with w = 1 on the region, so one sweep covers all
    starting points.  Returned in the sorted component vertex order;
    starts outside the region get escape probability 1.
    """
    from .walk import _poisson_log_weight

    component = np.asarray(component, dtype=np.int64)
    sub, origin = graph.induced_subgraph(component)
    adj = sub.to_sparse()
    degs = sub.degrees
    if (degs == 0).any():
        raise ValueError("component contains an isolated vertex")
    inside = np.asarray(region_mask, dtype=bool)[origin]
    inv_deg = 1.0 / degs
    w = inside.astype(float)
    if mode == "discrete":
        if t != int(t) or t < 0:
            raise ValueError("discrete mode needs a nonnegative integer time")
        for _ in range(int(t)):
            w = inv_deg * (adj @ w)
            w[~inside] = 0.0
        w[~inside] = 0.0
        return 1.0 - np.where(inside, w, 0.0)
    if mode != "continuous":
        raise ValueError(f"unknown mode {mode!r}")
    if t < 0:
        raise ValueError("negative time")
    survive = np.zeros(len(w))
    acc = 0.0
    k = 0
    cap = t + 60 * math.sqrt(t + 1) + 60
    while acc < 1.0 - 1e-12 and k <= cap:
        pw = 1.0 if (t == 0.0 and k == 0) else (0.0 if t == 0.0 else math.exp(_poisson_log_weight(t, k)))
        survive += pw * w
        acc += pw
        w = inv_deg * (adj @ w)
        w[~inside] = 0.0
        k += 1
    if acc < 1.0 - 1e-9:
        raise RuntimeError(f"uniformization accumulated only {acc} mass")
    return 1.0 - np.where(inside, survive, 0.0)


@dataclass
class DiffIneqReport:
    n_interior: int
    n_pass: int
    failures: list = field(default_factory=list)  # (s, lhs, rhs, slack)
    needs_refinement: bool = False
    max_truncation_rel: float = 0.0

    @property
    def pass_fraction(self) -> float:
        return 1.0 if self.n_interior == 0 else self.n_pass / self.n_interior


def verify_differential_inequality(
    series: PsiSeries,
    lambda_s: np.ndarray,
    delta_s: np.ndarray,
    V_s: np.ndarray,
    params: BoundParams,
    rel_tol: float = 0.0,
) -> DiffIneqReport:
    """Pointwise check of the differential inequality on the series grid.

    The left side -d/ds psi is estimated by second-order central
    differences; a coarse/fine comparison flags grids whose truncation
    error exceeds 1% so the caller can refine.  Monte Carlo series are
    rejected outright (the derivative would be noise).
    """
    if series.method == "mc_collision":
        raise ValueError("differential inequality needs an exact-method series")
    t = np.asarray(series.times, dtype=float)
    psi = np.asarray(series.values, dtype=float)
    lambda_s = np.asarray(lambda_s, dtype=float)
    delta_s = np.asarray(delta_s, dtype=float)
    V_s = np.asarray(V_s, dtype=float)
    if not (len(t) == len(psi) == len(lambda_s) == len(delta_s) == len(V_s)):
        raise ValueError("schedule arrays must align with the series grid")
    if len(t) < 5:
        raise ValueError("need at least 5 grid points")
    deriv = np.gradient(psi, t)
    # truncation guard: derivative recomputed on the 2x coarsened grid
    coarse = np.gradient(psi[::2], t[::2])
    interp = np.interp(t[::2], t, deriv)
    scale = np.abs(deriv).max()
    # boundary stencils are one-sided on both grids; compare interior only
    diff = np.abs(coarse - interp)[1:-1]
    max_rel = float(diff.max() / scale) if scale > 0 and len(diff) else 0.0
    needs_refinement = max_rel > 0.01
    report = DiffIneqReport(0, 0, needs_refinement=needs_refinement, max_truncation_rel=max_rel)
    for i in range(1, len(t) - 1):
        lhs = -deriv[i]
        rhs = delta_s[i] * lambda_s[i] * (psi[i] - (1.0 + params.C3) * math.log(V_s[i]) / V_s[i])
        report.n_interior += 1
        slack = lhs - rhs
        if slack >= -rel_tol * max(abs(rhs), 1e-300):
            report.n_pass += 1
        else:
            report.failures.append((float(t[i]), float(lhs), float(rhs), float(slack)))
    return report


@dataclass
class BoundCurve:
    times: np.ndarray
    psi_bar: np.ndarray
    u: np.ndarray  # psi_bar ** -gamma
    u_rate_constant: float  # min over decaying branch of du/dt * log(u)^delta
    monotone_after_crossover: bool


def bound_curve(
    params: BoundParams,
    psi_T1: float,
    n_points: int = 256,
    delta: float | None = None,
) -> BoundCurve:
    """Tabulate the decay curve on [T1/2, T2/2].

    psi_bar(t) = min(psi_T1, C5 (1 + C6 (t - T1/2))^(-1/gamma)
                             / |log(1 + C6 (t - T1/2))|^(delta/gamma)).

    Near t = T1/2 the log factor vanishes, the second branch blows up, and
    the min keeps the psi_T1 branch.  Also reports the numerical rate
    constant of the transformed variable u = psi_bar^(-gamma).
    """
    if params.C5 is None or params.C6 is None:
        raise ValueError("bound_curve needs fitted C5 and C6 (see fit_constants)")
    if psi_T1 <= 0:
        raise ValueError("psi_T1 must be positive")
    d = params.delta if delta is None else delta
    t = np.linspace(params.T1 / 2.0, params.T2 / 2.0, n_points)
    arg = 1.0 + params.C6 * (t - params.T1 / 2.0)
    with np.errstate(divide="ignore", over="ignore"):
        logs = np.abs(np.log(arg))
        branch = params.C5 * arg ** (-1.0 / params.gamma) / np.where(logs > 0, logs, np.nan) ** (
            d / params.gamma
        )
    branch = np.where(np.isfinite(branch), branch, np.inf)
    if d == 0:
        branch = params.C5 * arg ** (-1.0 / params.gamma)
    psi_bar = np.minimum(psi_T1, branch)
    u = psi_bar ** (-params.gamma)
    du = np.gradient(u, t)
    on_branch = branch < psi_T1
    if on_branch.any():
        logu = np.log(np.maximum(u[on_branch], math.e))
        rate = float((du[on_branch] * logu**d).min())
        tail = psi_bar[on_branch]
        monotone = bool(np.all(np.diff(tail) <= 1e-12))
    else:
        rate = float("inf")
        monotone = True
    return BoundCurve(t, psi_bar, u, rate, monotone)


def fit_constants(series: PsiSeries, params: BoundParams, C6: float = 1.0) -> BoundParams:
    """Fit C5 minimally so the curve majorizes the measured series.

    C6 is taken as given (default 1); C5 becomes the smallest constant for
    which the decaying branch sits above every measured point where that
    branch is active.  The fit is recorded on the returned params.
    """
    t = np.asarray(series.times, dtype=float)
    psi = np.asarray(series.values, dtype=float)
    sel = (t >= params.T1 / 2.0) & (t <= params.T2 / 2.0)
    if not sel.any():
        raise ValueError("series grid does not intersect [T1/2, T2/2]")
    arg = 1.0 + C6 * (t[sel] - params.T1 / 2.0)
    logs = np.abs(np.log(arg))
    active = logs > 0
    if active.any():
        needed = psi[sel][active] * arg[active] ** (1.0 / params.gamma) * logs[active] ** (
            params.delta / params.gamma
        )
        C5 = float(needed.max())
    else:
        C5 = 1.0
    return replace(params, C5=C5, C6=C6)
