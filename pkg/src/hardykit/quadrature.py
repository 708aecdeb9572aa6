"""Shared numerical engines.

Three pieces used throughout the package:

* geometric t-grids discretizing suprema over the time variable, with a
  vectorized golden-section refinement pass around the discrete argmax;

* product midpoint rules over boxes, box complements, and windows, with
  two-level Richardson refinement and a reported error estimate;

* 15-point Gauss-Kronrod panels plus an adaptive 1-D driver for the
  subordination and mass integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import QuadratureError

# ---------------------------------------------------------------------------
# Gauss-Kronrod 15/7
# ---------------------------------------------------------------------------

_GK_NODES = np.array([
    0.991455371120813, 0.949107912342759, 0.864864423359769,
    0.741531185599394, 0.586087235467691, 0.405845151377397,
    0.207784955007898, 0.0,
])
_GK_WK = np.array([
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728,
])
_GK_WG = np.array([
    0.0, 0.129484966168870, 0.0, 0.279705391489277,
    0.0, 0.381830050505119, 0.0, 0.417959183673469,
])
GK15_X = np.concatenate([-_GK_NODES[:-1], _GK_NODES[::-1]])
GK15_WK = np.concatenate([_GK_WK[:-1], _GK_WK[::-1]])
GK15_WG = np.concatenate([_GK_WG[:-1], _GK_WG[::-1]])


def gauss_kronrod_15(f, a: float, b: float) -> tuple[float, float]:
    """One K15/G7 panel on [a, b]: (K15 integral, error estimate)."""
    h = 0.5 * (b - a)
    y = np.asarray(f(0.5 * (a + b) + h * GK15_X), dtype=float)
    k15 = h * float(np.dot(GK15_WK, y))
    g7 = h * float(np.dot(GK15_WG, y))
    diff = abs(k15 - g7)
    return k15, (200.0 * diff) ** 1.5 if diff > 0.0 else 0.0


def integrate_adaptive(f, a: float, b: float, *, rtol: float = 1e-10,
                       atol: float = 0.0, breakpoints=(),
                       max_panels: int = 2000) -> tuple[float, float]:
    """Adaptive Gauss-Kronrod on [a, b] with optional seed breakpoints.

    Bisects the worst-error panel until the summed error estimate meets
    max(atol, rtol * |integral|); raises QuadratureError with the achieved
    estimate once the panel budget is exhausted.
    """
    edges = sorted({a, b, *(p for p in breakpoints if a < p < b)})
    panels = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, err = gauss_kronrod_15(f, lo, hi)
        panels.append((err, lo, hi, val))
    while True:
        total = math.fsum(p[3] for p in panels)
        err = math.fsum(p[0] for p in panels)
        if err <= max(atol, rtol * abs(total)):
            return total, err
        if len(panels) >= max_panels:
            raise QuadratureError(
                "adaptive quadrature budget exhausted",
                estimate=err, budget=max_panels)
        panels.sort(key=lambda p: p[0])
        _, lo, hi, _ = panels.pop()
        mid = 0.5 * (lo + hi)
        v1, e1 = gauss_kronrod_15(f, lo, mid)
        v2, e2 = gauss_kronrod_15(f, mid, hi)
        panels.append((e1, lo, mid, v1))
        panels.append((e2, mid, hi, v2))


# ---------------------------------------------------------------------------
# Quasi-random sequences
# ---------------------------------------------------------------------------

_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19)


def halton(n: int, dim: int, start: int = 1) -> np.ndarray:
    """First n Halton points in [0,1)^dim (deterministic, unseeded)."""
    if dim > len(_PRIMES):
        raise ValueError(f"halton supports up to {len(_PRIMES)} dimensions")
    out = np.empty((n, dim))
    for j in range(dim):
        base = _PRIMES[j]
        for i in range(n):
            k = i + start
            value, denom = 0.0, 1.0
            while k > 0:
                k, digit = divmod(k, base)
                denom *= base
                value += digit / denom
            out[i, j] = value
    return out


# ---------------------------------------------------------------------------
# Time grids and suprema in t
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TGrid:
    """Geometric grid covering [t_min, t_max]."""

    t_min: float
    t_max: float
    points_per_decade: int = 16

    def __post_init__(self):
        if not 0.0 < self.t_min < self.t_max:
            raise ValueError("need 0 < t_min < t_max")

    @property
    def values(self) -> np.ndarray:
        decades = math.log10(self.t_max / self.t_min)
        count = max(2, int(round(decades * self.points_per_decade)) + 1)
        return np.geomspace(self.t_min, self.t_max, count)


def tgrid_for_cuboid(d_q: float, points_per_decade: int = 16,
                     span: tuple[float, float] = (1e-8, 1e4)) -> TGrid:
    """Default per-cuboid grid [1e-8 d_Q^2, 1e4 d_Q^2].

    Beyond the upper end the kernels' envelope in t is monotone
    decreasing for the exponents used here, so the truncated range
    dominates the genuine supremum up to the envelope constant.
    """
    return TGrid(span[0] * d_q * d_q, span[1] * d_q * d_q, points_per_decade)


class SupResult(NamedTuple):
    values: np.ndarray       # sup over t of t^delta * f(t, .), per batch point
    argmax_t: np.ndarray     # refined maximizer
    boundary_frac: float     # fraction of points whose argmax hit a grid end


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_refine(f: Callable, ts: np.ndarray, idx: np.ndarray,
                  delta: float, iters: int) -> tuple[np.ndarray, np.ndarray]:
    """Golden-section pass in log-t between the grid neighbours of idx.

    Returns (values, maximizers) for t^delta * f(t) per batch point.
    """
    a = np.log(ts[np.maximum(idx - 1, 0)])
    b = np.log(ts[np.minimum(idx + 1, len(ts) - 1)])
    x1 = b - _INV_PHI * (b - a)
    x2 = a + _INV_PHI * (b - a)

    def g(log_t):
        t = np.exp(log_t)
        return np.atleast_1d(np.asarray(f(t), dtype=float)) * t ** delta

    f1 = g(x1)
    f2 = g(x2)
    for _ in range(iters):
        take_left = f1 >= f2
        b = np.where(take_left, x2, b)
        a = np.where(take_left, a, x1)
        x1 = b - _INV_PHI * (b - a)
        x2 = a + _INV_PHI * (b - a)
        f1, f2 = g(x1), g(x2)
    refined = np.maximum(f1, f2)
    t_ref = np.exp(np.where(f1 >= f2, x1, x2))
    return refined, t_ref


def sup_over_t(f: Callable, grid: TGrid, delta: float = 0.0,
               golden_iters: int = 18) -> SupResult:
    """max over the t-grid of t^delta * f(t), refined by golden section.

    ``f`` must broadcast: called with scalar t it returns the value batch
    (shape (N,)), called with a (N,) array it pairs elementwise.  The
    golden-section pass runs in log-t between the grid neighbours of the
    discrete argmax.
    """
    ts = grid.values
    rows = [np.atleast_1d(np.asarray(f(float(t)), dtype=float)) * (t ** delta)
            for t in ts]
    vals = np.stack(rows)               # (T, N)
    idx = np.argmax(vals, axis=0)
    n = vals.shape[1]
    best = vals[idx, np.arange(n)]
    boundary = (idx == 0) | (idx == len(ts) - 1)
    if golden_iters > 0:
        refined, t_ref = golden_refine(f, ts, idx, delta, golden_iters)
    else:
        refined, t_ref = best, ts[idx]
    improved = refined > best
    return SupResult(np.maximum(best, refined),
                     np.where(improved, t_ref, ts[idx]),
                     float(np.mean(boundary)))


# ---------------------------------------------------------------------------
# Spatial midpoint rules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Panel:
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    nodes_per_axis: tuple[int, ...]

    @property
    def volume(self) -> float:
        return float(np.prod(np.subtract(self.hi, self.lo)))


@dataclass(frozen=True)
class SpatialRule:
    """Disjoint axis-aligned panels with per-panel midpoint grids.

    Weights are positive and sum to the measure of the covered region by
    construction.
    """

    panels: tuple[Panel, ...]
    region: str = "box"

    @property
    def dimension(self) -> int:
        return len(self.panels[0].lo) if self.panels else 1

    @property
    def volume(self) -> float:
        return sum(p.volume for p in self.panels)

    def nodes_and_weights(self, level: int = 1) -> tuple[np.ndarray, np.ndarray]:
        """Midpoint nodes/weights; level multiplies every axis count."""
        pts, wts = [], []
        for p in self.panels:
            axes = []
            cell = 1.0
            for a, b, n in zip(p.lo, p.hi, p.nodes_per_axis):
                m = n * level
                h = (b - a) / m
                axes.append(a + h * (np.arange(m) + 0.5))
                cell *= h
            if len(axes) == 1:
                grid = axes[0][:, None]
            else:
                mesh = np.meshgrid(*axes, indexing="ij")
                grid = np.stack([g.ravel() for g in mesh], axis=-1)
            pts.append(grid)
            wts.append(np.full(grid.shape[0], cell))
        if not pts:
            d = self.dimension
            return np.empty((0, d)), np.empty(0)
        return np.concatenate(pts), np.concatenate(wts)


class IntegralResult(NamedTuple):
    value: float
    error: float


def integrate(rule: SpatialRule, f, tol: float | None = None) -> IntegralResult:
    """Weighted sum with two-level Richardson refinement.

    ``f`` receives nodes of shape (N,) in one dimension, (N, d) above.
    The reported error is the coarse-fine difference; when ``tol`` is set
    and exceeded, a QuadratureError carrying the estimate is raised.
    """
    if not rule.panels:
        return IntegralResult(0.0, 0.0)
    d = rule.dimension

    def apply(level):
        pts, wts = rule.nodes_and_weights(level)
        x = pts[:, 0] if d == 1 else pts
        return float(np.dot(wts, np.asarray(f(x), dtype=float)))

    coarse = apply(1)
    fine = apply(2)
    value = fine + (fine - coarse) / 3.0
    error = abs(fine - coarse)
    if tol is not None and error > tol:
        raise QuadratureError("spatial integral error estimate above tolerance",
                              estimate=error, budget=tol)
    return IntegralResult(value, error)


def rule_for_box(lo, hi, nodes_per_axis) -> SpatialRule:
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if np.any(hi <= lo):
        return SpatialRule(panels=(), region="box")
    if np.isscalar(nodes_per_axis) or isinstance(nodes_per_axis, int):
        nodes_per_axis = (int(nodes_per_axis),) * len(lo)
    return SpatialRule(panels=(Panel(tuple(lo), tuple(hi), tuple(nodes_per_axis)),),
                       region="box")


def _graded_edges(start: float, end: float, first_width: float,
                  growth: float = 2.0) -> list[float]:
    """Edges from start toward end with geometrically growing spacing."""
    if end == start:
        return [start]
    sign = 1.0 if end > start else -1.0
    edges = [start]
    w = first_width
    pos = start
    while sign * (end - pos) > 1.5 * w:
        pos += sign * w
        edges.append(pos)
        w *= growth
    edges.append(end)
    return edges


def rule_for_complement(window_lo, window_hi, hole_lo, hole_hi,
                        nodes_near: int = 32, nodes_cross: int = 24,
                        growth: float = 2.0) -> SpatialRule:
    """Window minus hole as a graded tensor decomposition.

    Every axis is cut into the hole range plus geometrically growing
    panels on both sides; the rule is the product of these segments with
    the all-inside box removed.  Near-hole structure (where condition
    integrands ridge along the hole's coordinate ranges) is resolved on
    every axis without wasting nodes on the far field.
    """
    window_lo = np.atleast_1d(np.asarray(window_lo, dtype=float))
    window_hi = np.atleast_1d(np.asarray(window_hi, dtype=float))
    hole_lo = np.atleast_1d(np.asarray(hole_lo, dtype=float))
    hole_hi = np.atleast_1d(np.asarray(hole_hi, dtype=float))
    d = len(window_lo)
    hole_lo = np.maximum(hole_lo, window_lo)
    hole_hi = np.minimum(hole_hi, window_hi)
    n_graded = nodes_near if d == 1 else max(6, nodes_cross // 2)
    n_inside = nodes_cross
    first_frac = 8.0 if d == 1 else 2.0
    grow = growth if d == 1 else max(growth, 2.5)

    axis_segments: list[list[tuple[float, float, int, bool]]] = []
    for j in range(d):
        width = hole_hi[j] - hole_lo[j]
        first = max(width / first_frac, 1e-12)
        segs: list[tuple[float, float, int, bool]] = []
        edges = _graded_edges(hole_lo[j], window_lo[j], first, grow)
        for a, b in zip(edges[:-1], edges[1:]):
            lo_j, hi_j = min(a, b), max(a, b)
            if hi_j > lo_j:
                segs.append((lo_j, hi_j, n_graded, False))
        if width > 0:
            segs.append((hole_lo[j], hole_hi[j], n_inside, True))
        edges = _graded_edges(hole_hi[j], window_hi[j], first, grow)
        for a, b in zip(edges[:-1], edges[1:]):
            lo_j, hi_j = min(a, b), max(a, b)
            if hi_j > lo_j:
                segs.append((lo_j, hi_j, n_graded, False))
        axis_segments.append(segs)

    panels: list[Panel] = []
    index_mesh = np.meshgrid(*[np.arange(len(s)) for s in axis_segments],
                             indexing="ij")
    for idx in zip(*(g.ravel() for g in index_mesh)):
        segs = [axis_segments[j][k] for j, k in enumerate(idx)]
        if all(s[3] for s in segs):
            continue  # the hole itself
        panels.append(Panel(tuple(s[0] for s in segs),
                            tuple(s[1] for s in segs),
                            tuple(s[2] for s in segs)))
    return SpatialRule(panels=tuple(panels), region="complement")
