"""Cuboid geometry, admissible coverings, box products, partitions of unity.

An admissible covering tiles the domain X with closed, almost-cube
cuboids subject to four properties: the union covers X, distinct cuboids
overlap in measure zero, side lengths within one cuboid are comparable
(shape constant C1), and diameters of touching cuboids are comparable
(neighbour constant C2).  Enlargements Q*, Q**, Q*** scale the half-widths
by kappa, kappa^2, kappa^3 and are always intersected with X.

Countable families are materialized over finite index windows; the
family name and window are retained so windows can be widened.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .domain import DomainSpec, half_line, product_domain, real_line
from .errors import CoveringHoleError, SplitBudgetError
from .quadrature import halton

DEFAULT_KAPPA = 1.05


# ---------------------------------------------------------------------------
# Cuboids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Cuboid:
    """Closed axis-aligned box Q(z, r_1..r_d), taken as a subset of X."""

    center: tuple[float, ...]
    half_widths: tuple[float, ...]
    domain: DomainSpec

    def __post_init__(self):
        if len(self.center) != len(self.half_widths):
            raise ValueError("center/half_widths dimension mismatch")
        if any(r <= 0 for r in self.half_widths):
            raise ValueError("half-widths must be positive")

    @property
    def dimension(self) -> int:
        return len(self.center)

    @property
    def diameter(self) -> float:
        """d_Q = 2 sqrt(sum r_i^2), from the stored half-widths."""
        return 2.0 * math.sqrt(sum(r * r for r in self.half_widths))

    def box(self) -> tuple[np.ndarray, np.ndarray]:
        """Geometric box (lo, hi) clipped to the domain closure."""
        z = np.array(self.center)
        r = np.array(self.half_widths)
        return self.domain.clip_box(z - r, z + r)

    @property
    def measure(self) -> float:
        lo, hi = self.box()
        return float(np.prod(np.maximum(hi - lo, 0.0)))

    def enlarged(self, kappa: float, level: int = 1) -> "Cuboid":
        factor = kappa ** level
        return Cuboid(self.center,
                      tuple(factor * r for r in self.half_widths),
                      self.domain)

    def contains(self, x) -> np.ndarray:
        lo, hi = self.box()
        pts = np.asarray(x, dtype=float)
        if self.dimension == 1 and (pts.ndim == 0 or pts.shape[-1] != 1):
            pts = pts[..., None]
        ok = np.ones(pts.shape[:-1], dtype=bool)
        for j in range(self.dimension):
            ok &= (pts[..., j] >= lo[j]) & (pts[..., j] <= hi[j])
        return ok


def enlarge(q: Cuboid, covering: "AdmissibleCovering", level: int) -> Cuboid:
    """Q*, Q**, or Q*** for level 1, 2, 3."""
    if level not in (1, 2, 3):
        raise ValueError("enlargement level must be 1, 2, or 3")
    return q.enlarged(covering.kappa, level)


# ---------------------------------------------------------------------------
# Coverings
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AdmissibleCovering:
    """Finite window of a countable covering family.

    ``c1`` and ``c2`` are the declared shape/neighbour constants where the
    construction fixes them (None when they are only known by
    measurement); ``window_box`` is the exactly tiled sub-box of X used
    for coverage sampling.
    """

    cuboids: tuple[Cuboid, ...]
    kappa: float
    domain: DomainSpec
    window_box: tuple[tuple[float, ...], tuple[float, ...]]
    family: str
    window: tuple
    c1: float | None = None
    c2: float | None = None

    def __post_init__(self):
        if not self.cuboids:
            raise ValueError("covering window is empty")
        if self.kappa <= 1.0:
            raise ValueError("kappa must exceed 1")

    @property
    def dimension(self) -> int:
        return self.cuboids[0].dimension

    def boxes(self) -> tuple[np.ndarray, np.ndarray]:
        los, his = zip(*(q.box() for q in self.cuboids))
        return np.stack(los), np.stack(his)

    def enlarged_boxes(self, level: int) -> tuple[np.ndarray, np.ndarray]:
        los, his = zip(*(q.enlarged(self.kappa, level).box()
                         for q in self.cuboids))
        return np.stack(los), np.stack(his)


def covering_bessel(window: tuple[int, int],
                    kappa: float = DEFAULT_KAPPA) -> AdmissibleCovering:
    """Dyadic intervals [2^n, 2^{n+1}] on (0, inf) for n in the window."""
    n_lo, n_hi = window
    dom = half_line()
    cuboids = tuple(
        Cuboid((3.0 * 2.0 ** (n - 1),), (2.0 ** (n - 1),), dom)
        for n in range(n_lo, n_hi + 1)
    )
    return AdmissibleCovering(
        cuboids=cuboids, kappa=kappa, domain=dom,
        window_box=((2.0 ** n_lo,), (2.0 ** (n_hi + 1),)),
        family="bessel", window=window, c1=1.0, c2=2.0)


def covering_laguerre(window: tuple[int, int],
                      kappa: float = DEFAULT_KAPPA) -> AdmissibleCovering:
    """The two-regime half-line covering used with the Laguerre kernel.

    Negative indices m contribute plain dyadic intervals [2^m, 2^{m+1}]
    (the small-x regime); indices n >= 0 contribute blocks of
    2^{2n+1} congruent intervals of length 2^{-n-1} tiling [2^n, 2^{n+1}]
    (refinement toward large x).
    """
    n_lo, n_hi = window
    dom = half_line()
    cuboids: list[Cuboid] = []
    for m in range(n_lo, min(n_hi, -1) + 1):
        cuboids.append(Cuboid((3.0 * 2.0 ** (m - 1),), (2.0 ** (m - 1),), dom))
    for n in range(max(n_lo, 0), n_hi + 1):
        length = 2.0 ** (-n - 1)
        count = 2 ** (2 * n + 1)
        base = 2.0 ** n
        for k in range(count):
            lo = base + k * length
            cuboids.append(Cuboid((lo + 0.5 * length,), (0.5 * length,), dom))
    return AdmissibleCovering(
        cuboids=tuple(cuboids), kappa=kappa, domain=dom,
        window_box=((2.0 ** n_lo,), (2.0 ** (n_hi + 1),)),
        family="laguerre", window=window, c1=1.0, c2=None)


def covering_uniform(domain: DomainSpec, tau: float,
                     window: tuple[Sequence[float], Sequence[float]],
                     kappa: float = DEFAULT_KAPPA) -> AdmissibleCovering:
    """Grid of congruent cubes with diameter tau over the window box."""
    d = domain.dimension
    side = tau / math.sqrt(d)
    lo = np.asarray(window[0], dtype=float)
    hi = np.asarray(window[1], dtype=float)
    counts = [max(1, int(math.ceil((hi[j] - lo[j]) / side - 1e-9)))
              for j in range(d)]
    axes = [lo[j] + side * (np.arange(counts[j]) + 0.5) for j in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    centers = np.stack([g.ravel() for g in mesh], axis=-1)
    cuboids = tuple(Cuboid(tuple(float(v) for v in c), (side / 2.0,) * d, domain)
                    for c in centers)
    actual_hi = tuple(float(lo[j] + counts[j] * side) for j in range(d))
    return AdmissibleCovering(
        cuboids=cuboids, kappa=kappa, domain=domain,
        window_box=(tuple(float(v) for v in lo), actual_hi),
        family="uniform", window=(tau, tuple(float(v) for v in lo),
                                  tuple(float(v) for v in hi)),
        c1=1.0, c2=1.0)


def covering_line_strips(inner: AdmissibleCovering, extent: float,
                         kappa: float | None = None) -> AdmissibleCovering:
    """Covering of R x X_2: each strip R x Q_2 is tiled by intervals
    whose half-width equals d_{Q_2}, anchored at the origin.

    Tiles overhang the requested extent so that every strip is tiled by
    full-size cells; the window box used for coverage checks stays at
    [-extent, extent].
    """
    kappa = kappa if kappa is not None else inner.kappa
    dom = product_domain(real_line(), inner.domain)
    cuboids: list[Cuboid] = []
    for q2 in inner.cuboids:
        r1 = q2.diameter
        width = 2.0 * r1
        m_lo = int(math.floor(-extent / width))
        m_hi = int(math.ceil(extent / width))
        for m in range(m_lo, m_hi):
            center1 = (m + 0.5) * width
            cuboids.append(Cuboid((center1, *q2.center),
                                  (r1, *q2.half_widths), dom))
    win2_lo, win2_hi = inner.window_box
    return AdmissibleCovering(
        cuboids=tuple(cuboids), kappa=kappa, domain=dom,
        window_box=((-extent, *win2_lo), (extent, *win2_hi)),
        family=f"line_strips({inner.family})", window=(extent, inner.window),
        c1=None, c2=None)


def _split_edges(center: float, half: float, m: int) -> np.ndarray:
    # shared float edges so adjacent pieces meet exactly
    return center - half + 2.0 * half * np.arange(m + 1) / m


def box_product(a: AdmissibleCovering, b: AdmissibleCovering,
                max_ratio: int = 64) -> AdmissibleCovering:
    """Covering of X_a x X_b: each product cell's longer factor is split
    into congruent pieces with diameters comparable to the shorter one.

    The per-axis split count is ceil(d_long / d_short); ratios within
    1e-9 of 1 are treated as equal and left unsplit.  Ratios beyond
    ``max_ratio`` raise SplitBudgetError, which bounds the piece count on
    finite windows.
    """
    dom = product_domain(a.domain, b.domain)
    kappa = min(a.kappa, b.kappa)
    cells: list[Cuboid] = []
    for qa in a.cuboids:
        for qb in b.cuboids:
            da, db = qa.diameter, qb.diameter
            ratio = max(da, db) / min(da, db)
            if ratio <= 1.0 + 1e-9:
                cells.append(Cuboid((*qa.center, *qb.center),
                                    (*qa.half_widths, *qb.half_widths), dom))
                continue
            m = int(math.ceil(ratio - 1e-9))
            if m > max_ratio:
                raise SplitBudgetError(
                    f"diameter ratio {ratio:.3g} exceeds split budget {max_ratio}")
            long_q, short_q, long_first = (qa, qb, True) if da > db \
                else (qb, qa, False)
            axes_edges = [_split_edges(z, r, m)
                          for z, r in zip(long_q.center, long_q.half_widths)]
            index_mesh = np.meshgrid(*[np.arange(m)] * long_q.dimension,
                                     indexing="ij")
            for idx in zip(*(g.ravel() for g in index_mesh)):
                piece_center = []
                piece_half = []
                for ax, k in enumerate(idx):
                    e = axes_edges[ax]
                    piece_center.append(float(0.5 * (e[k] + e[k + 1])))
                    piece_half.append(float(0.5 * (e[k + 1] - e[k])))
                if long_first:
                    center = (*piece_center, *short_q.center)
                    half = (*piece_half, *short_q.half_widths)
                else:
                    center = (*short_q.center, *piece_center)
                    half = (*short_q.half_widths, *piece_half)
                cells.append(Cuboid(tuple(center), tuple(half), dom))
    wa_lo, wa_hi = a.window_box
    wb_lo, wb_hi = b.window_box
    return AdmissibleCovering(
        cuboids=tuple(cells), kappa=kappa, domain=dom,
        window_box=((*wa_lo, *wb_lo), (*wa_hi, *wb_hi)),
        family=f"({a.family})x({b.family})", window=(a.window, b.window),
        c1=None, c2=None)


def widen(covering: AdmissibleCovering, extra: int) -> AdmissibleCovering:
    """Rebuild the covering on a window extended by ``extra`` indices."""
    if covering.family == "bessel":
        n_lo, n_hi = covering.window
        return covering_bessel((n_lo - extra, n_hi + extra), covering.kappa)
    if covering.family == "laguerre":
        n_lo, n_hi = covering.window
        return covering_laguerre((n_lo - extra, n_hi + extra), covering.kappa)
    raise ValueError(f"no window generator retained for family {covering.family}")


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def _boxes_touch(lo_a, hi_a, lo_b, hi_b) -> np.ndarray:
    return np.all((lo_a <= hi_b) & (lo_b <= hi_a), axis=-1)


def _boxes_overlap_measure(lo_a, hi_a, lo_b, hi_b) -> np.ndarray:
    width = np.minimum(hi_a, hi_b) - np.maximum(lo_a, lo_b)
    return np.prod(np.maximum(width, 0.0), axis=-1)


@dataclass
class CoveringReport:
    family: str
    cuboid_count: int
    measured_c1: float
    measured_c2: float
    max_overlap_count: int
    covers_window: bool
    uncovered_points: list
    overlap_violations: list
    neighbours_equivalent: bool
    neighbour_counterexamples: list
    kappa: float
    samples: int

    @property
    def passed(self) -> bool:
        return (self.covers_window and not self.overlap_violations
                and self.neighbours_equivalent
                and math.isfinite(self.measured_c1)
                and math.isfinite(self.measured_c2))

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} covering={self.family} cuboids={self.cuboid_count} "
                f"C1={self.measured_c1:.6g} C2={self.measured_c2:.6g} "
                f"overlap3*={self.max_overlap_count} "
                f"covers={self.covers_window} "
                f"neighbours={self.neighbours_equivalent}")


def validate_covering(c: AdmissibleCovering, samples: int = 4096) -> CoveringReport:
    """Measure the covering constants and check the four properties.

    Shape/overlap/neighbour checks run exactly on cuboid interval
    arithmetic; window coverage and the Q***-overlap count use Halton
    sampling of the window box.  Reports, never raises, on violations.
    """
    n = len(c.cuboids)
    lo, hi = c.boxes()
    lo3, hi3 = c.enlarged_boxes(3)
    r = np.array([q.half_widths for q in c.cuboids])
    diam = np.array([q.diameter for q in c.cuboids])

    measured_c1 = float(np.max(r.max(axis=1) / r.min(axis=1)))

    measured_c2 = 1.0
    overlap_violations = []
    neighbour_bad = []
    neighbours_ok = True
    chunk = 512
    scale = np.minimum.outer(diam, diam)
    for start in range(0, n, chunk):
        sl = slice(start, min(start + chunk, n))
        touch = _boxes_touch(lo[sl, None, :], hi[sl, None, :],
                             lo[None, :, :], hi[None, :, :])
        overlap = _boxes_overlap_measure(lo[sl, None, :], hi[sl, None, :],
                                         lo[None, :, :], hi[None, :, :])
        touch3 = _boxes_touch(lo3[sl, None, :], hi3[sl, None, :],
                              lo3[None, :, :], hi3[None, :, :])
        rows = np.arange(sl.start, sl.stop)
        same = rows[:, None] == np.arange(n)[None, :]
        # property 2: positive-measure overlaps between distinct cuboids
        bad = (overlap > 1e-12 * scale[sl] ** lo.shape[1]) & ~same
        for i, j in zip(*np.nonzero(bad)):
            if rows[i] < j:
                overlap_violations.append((int(rows[i]), int(j),
                                           float(overlap[i, j])))
        # property 4 on touching pairs
        ratio = np.maximum(diam[sl, None] / diam[None, :],
                           diam[None, :] / diam[sl, None])
        touching = touch & ~same
        if np.any(touching):
            measured_c2 = max(measured_c2, float(ratio[touching].max()))
        # (neighbours): Q1*** meets Q2*** iff Q1 meets Q2
        mismatch = (touch3 != touch) & ~same
        for i, j in zip(*np.nonzero(mismatch)):
            neighbours_ok = False
            if len(neighbour_bad) < 16 and rows[i] < j:
                neighbour_bad.append((int(rows[i]), int(j)))

    win_lo = np.asarray(c.window_box[0], dtype=float)
    win_hi = np.asarray(c.window_box[1], dtype=float)
    margin = 1e-9 * (win_hi - win_lo)
    pts = win_lo + margin + halton(samples, len(win_lo)) \
        * (win_hi - win_lo - 2 * margin)
    covered = np.zeros(samples, dtype=bool)
    count3 = np.zeros(samples, dtype=np.int32)
    for start in range(0, n, chunk):
        sl = slice(start, min(start + chunk, n))
        inside = np.all((pts[None, :, :] >= lo[sl, :, None].transpose(0, 2, 1))
                        & (pts[None, :, :] <= hi[sl, :, None].transpose(0, 2, 1)),
                        axis=2)
        covered |= inside.any(axis=0)
        inside3 = np.all((pts[None, :, :] >= lo3[sl, :, None].transpose(0, 2, 1))
                         & (pts[None, :, :] <= hi3[sl, :, None].transpose(0, 2, 1)),
                         axis=2)
        count3 += inside3.sum(axis=0, dtype=np.int32)
    uncovered = [tuple(map(float, p)) for p in pts[~covered][:16]]

    return CoveringReport(
        family=c.family, cuboid_count=n,
        measured_c1=measured_c1, measured_c2=measured_c2,
        max_overlap_count=int(count3.max()),
        covers_window=bool(covered.all()), uncovered_points=uncovered,
        overlap_violations=overlap_violations[:16],
        neighbours_equivalent=neighbours_ok,
        neighbour_counterexamples=neighbour_bad,
        kappa=c.kappa, samples=samples)


# ---------------------------------------------------------------------------
# Partition of unity
# ---------------------------------------------------------------------------

class PartitionOfUnity:
    """Normalized trapezoid bumps psi_Q subordinate to {Q*}.

    The raw bump equals 1 on Q and falls linearly to 0 on the boundary of
    Q* (per-axis product of 1-D trapezoids); psi_Q divides by the bump
    sum.  The bumps are Lipschitz rather than C^1: the construction only
    needs the derivative bound ||psi_Q'|| <= C / d_Q, which the linear
    ramps satisfy almost everywhere.
    """

    def __init__(self, covering: AdmissibleCovering):
        self.covering = covering
        self._z = np.array([q.center for q in covering.cuboids])
        self._r = np.array([q.half_widths for q in covering.cuboids])
        self._kappa = covering.kappa
        # probe the window for holes at construction time
        probe = self._window_probe(256)
        sums = self.bump_sum(probe)
        if np.any(sums <= 0.0):
            bad = probe[sums <= 0.0][0]
            raise CoveringHoleError(f"no bump reaches window point {bad}")

    def _window_probe(self, count: int) -> np.ndarray:
        lo = np.asarray(self.covering.window_box[0], dtype=float)
        hi = np.asarray(self.covering.window_box[1], dtype=float)
        return lo + halton(count, len(lo)) * (hi - lo)

    def _as_points(self, x) -> np.ndarray:
        pts = np.asarray(x, dtype=float)
        d = self.covering.dimension
        if d == 1 and (pts.ndim == 1 or pts.ndim == 0):
            pts = np.atleast_1d(pts)[:, None]
        return pts

    def bumps(self, x) -> np.ndarray:
        """Raw bump matrix, shape (n_cuboids, n_points)."""
        pts = self._as_points(x)
        dist = np.abs(pts[None, :, :] - self._z[:, None, :])
        ramp = (self._kappa * self._r[:, None, :] - dist) \
            / ((self._kappa - 1.0) * self._r[:, None, :])
        return np.prod(np.clip(ramp, 0.0, 1.0), axis=2)

    def bump_sum(self, x) -> np.ndarray:
        return self.bumps(x).sum(axis=0)

    def evaluate_all(self, x, strict: bool = True) -> np.ndarray:
        """psi matrix, shape (n_cuboids, n_points); columns sum to 1.

        With ``strict=False`` points beyond the finite window (where no
        bump reaches) yield psi = 0 instead of raising.
        """
        b = self.bumps(x)
        s = b.sum(axis=0)
        if np.any(s <= 0.0):
            if strict:
                pts = self._as_points(x)
                bad = pts[s <= 0.0][0]
                raise CoveringHoleError(f"no bump reaches point {tuple(bad)}")
            safe = np.where(s > 0.0, s, 1.0)
            return np.where(s > 0.0, b / safe[None, :], 0.0)
        return b / s[None, :]

    def evaluate(self, index: int, x) -> np.ndarray:
        return self.evaluate_all(x)[index]

    def derivative_bound(self, index: int, points_per_axis: int = 1000) -> float:
        """max |psi'| over Q* by central differences (1-D coverings).

        The scan stays inside the covered window; outside it the finite
        family has no bumps and psi is undefined.
        """
        if self.covering.dimension != 1:
            raise NotImplementedError("derivative scan implemented for d=1")
        q = self.covering.cuboids[index]
        z, r = q.center[0], q.half_widths[0]
        kr = self._kappa * r
        win_lo = self.covering.window_box[0][0]
        win_hi = self.covering.window_box[1][0]
        h = 2.0 * kr / points_per_axis * 1e-3
        lo = max(z - kr, win_lo + 2 * h)
        hi = min(z + kr, win_hi - 2 * h)
        u = np.linspace(lo, hi, points_per_axis)
        psi_p = self.evaluate(index, u + h)
        psi_m = self.evaluate(index, u - h)
        return float(np.max(np.abs(psi_p - psi_m) / (2.0 * h)))


def partition_of_unity(covering: AdmissibleCovering) -> PartitionOfUnity:
    return PartitionOfUnity(covering)


# ---------------------------------------------------------------------------
# SVG emitter
# ---------------------------------------------------------------------------

def covering_svg(c: AdmissibleCovering, size: int = 640,
                 log_axes: bool = False, margin: float = 12.0) -> str:
    """One rectangle per cuboid of a 2-D covering; optional log-log axes."""
    if c.dimension != 2:
        raise ValueError("SVG emitter draws 2-D coverings")
    lo, hi = c.boxes()
    if log_axes:
        if np.any(lo <= 0):
            raise ValueError("log axes need strictly positive boxes")
        lo, hi = np.log10(lo), np.log10(hi)
    mn = lo.min(axis=0)
    mx = hi.max(axis=0)
    span = np.maximum(mx - mn, 1e-300)
    scale = (size - 2 * margin) / span.max()

    def sx(v):
        return margin + (v - mn[0]) * scale

    def sy(v):
        return size - margin - (v - mn[1]) * scale

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" '
        f'height="{size}" viewBox="0 0 {size} {size}">'
    ]
    for (l0, l1), (h0, h1) in zip(lo, hi):
        x, y = sx(l0), sy(h1)
        w, h = (h0 - l0) * scale, (h1 - l1) * scale
        lines.append(
            f'<rect x="{x:.3f}" y="{y:.3f}" width="{w:.3f}" height="{h:.3f}" '
            f'fill="none" stroke="black" stroke-width="1"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
