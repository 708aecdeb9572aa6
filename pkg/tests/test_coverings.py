import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from hardykit import coverings as cov
from hardykit.domain import half_line, real_line
from hardykit.errors import CoveringHoleError, SplitBudgetError


def boxes_1d(c):
    lo, hi = c.boxes()
    return [(float(a), float(b)) for a, b in zip(lo[:, 0], hi[:, 0])]


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------

def test_bessel_window_intervals():
    c = cov.covering_bessel((-2, 2))
    assert boxes_1d(c) == [(0.25, 0.5), (0.5, 1.0), (1.0, 2.0),
                           (2.0, 4.0), (4.0, 8.0)]
    # neighbour diameter ratio between [1,2] and [2,4] is exactly 1/2
    d12 = c.cuboids[2].diameter
    d24 = c.cuboids[3].diameter
    assert d12 / d24 == 0.5


def test_bessel_validates():
    report = cov.validate_covering(cov.covering_bessel((-5, 5)))
    assert report.passed
    assert report.measured_c1 == 1.0
    assert report.measured_c2 == 2.0
    assert report.max_overlap_count <= 2


def test_laguerre_blocks():
    c = cov.covering_laguerre((-2, 1))
    bs = boxes_1d(c)
    # case-1 dyadic intervals on the small side
    assert (0.25, 0.5) in bs and (0.5, 1.0) in bs
    # n = 0 block: two intervals of length 1/2
    assert (1.0, 1.5) in bs and (1.5, 2.0) in bs
    # n = 1 block: 8 intervals of length 1/4 tiling [2, 4]
    block = sorted(b for b in bs if 2.0 <= b[0] and b[1] <= 4.0)
    assert len(block) == 8
    assert all(abs((b[1] - b[0]) - 0.25) < 1e-15 for b in block)
    assert block[0][0] == 2.0 and block[-1][1] == 4.0


def test_laguerre_validates():
    report = cov.validate_covering(cov.covering_laguerre((-2, 1)))
    assert report.passed
    assert report.measured_c2 <= 4.0


def test_uniform_grid():
    c = cov.covering_uniform(real_line(2), math.sqrt(2.0), ([0.0, 0.0], [3.0, 3.0]))
    assert len(c.cuboids) == 9
    report = cov.validate_covering(c)
    assert report.passed
    assert report.measured_c2 == 1.0
    # overlap of triple enlargements stays small at kappa = 1.05
    assert report.max_overlap_count <= 4


def test_uniform_1d_overlap():
    c = cov.covering_uniform(real_line(1), 1.0, ([0.0], [8.0]))
    report = cov.validate_covering(c)
    assert report.passed
    assert report.max_overlap_count <= 4


def test_uniform_1d_overlap_kappa_1_1():
    c = cov.covering_uniform(real_line(1), 1.0, ([0.0], [8.0]), kappa=1.1)
    report = cov.validate_covering(c)
    assert report.max_overlap_count <= 4


# ---------------------------------------------------------------------------
# Enlargement
# ---------------------------------------------------------------------------

def test_enlarge_levels():
    c = cov.covering_bessel((0, 0), kappa=1.1)
    q = cov.Cuboid((1.5,), (0.5,), half_line())
    star = cov.enlarge(q, c, 1)
    assert_allclose(star.half_widths[0], 0.55)
    assert_allclose(cov.enlarge(q, c, 3).half_widths[0], 0.5 * 1.1 ** 3)
    with pytest.raises(ValueError):
        cov.enlarge(q, c, 4)


def test_enlarge_clips_to_domain():
    c = cov.covering_bessel((0, 0), kappa=1.2)
    q = cov.Cuboid((0.1,), (0.1,), half_line())
    lo, hi = cov.enlarge(q, c, 1).box()
    assert lo[0] == 0.0
    assert_allclose(hi[0], 0.22)


def test_enlargement_monotone():
    c = cov.covering_bessel((0, 2))
    q = c.cuboids[1]
    prev_lo, prev_hi = q.box()
    for level in (1, 2, 3):
        lo, hi = q.enlarged(c.kappa, level).box()
        assert np.all(lo <= prev_lo) and np.all(hi >= prev_hi)
        prev_lo, prev_hi = lo, hi


# ---------------------------------------------------------------------------
# Box product
# ---------------------------------------------------------------------------

def test_box_product_split_example():
    # pair ([1,2], [2,4]): the longer factor splits into two pieces
    a = cov.covering_bessel((0, 0))
    b = cov.covering_bessel((1, 1))
    prod = cov.box_product(a, b)
    cells = sorted((tuple(map(float, lo)), tuple(map(float, hi)))
                   for lo, hi in zip(*prod.boxes()))
    assert cells == [((1.0, 2.0), (2.0, 3.0)), ((1.0, 3.0), (2.0, 4.0))]


def test_box_product_equal_pair_no_split():
    a = cov.covering_bessel((0, 0))
    prod = cov.box_product(a, a)
    assert len(prod.cuboids) == 1


def test_box_product_measure_zero_overlaps():
    prod = cov.box_product(cov.covering_bessel((-2, 2)),
                           cov.covering_bessel((-2, 2)))
    report = cov.validate_covering(prod)
    assert report.passed
    assert not report.overlap_violations


def test_box_product_split_budget():
    with pytest.raises(SplitBudgetError):
        cov.box_product(cov.covering_bessel((0, 0)),
                        cov.covering_bessel((10, 10)), max_ratio=64)


def test_box_product_constants_reported():
    prod = cov.box_product(cov.covering_bessel((-2, 2)),
                           cov.covering_laguerre((-1, 1)))
    report = cov.validate_covering(prod)
    assert report.passed
    assert report.measured_c2 <= 4.0 * max(2.0, 2.0)


def test_line_strips_validates():
    c = cov.covering_line_strips(cov.covering_bessel((-2, 2)), extent=8.0)
    report = cov.validate_covering(c)
    assert report.passed


def test_validate_detects_hole():
    c = cov.covering_bessel((-2, 2))
    broken = cov.AdmissibleCovering(
        cuboids=c.cuboids[:2] + c.cuboids[3:], kappa=c.kappa, domain=c.domain,
        window_box=c.window_box, family="bessel-corrupted", window=c.window)
    report = cov.validate_covering(broken)
    assert not report.covers_window
    assert report.uncovered_points
    assert not report.passed


def test_validate_detects_overlap():
    dom = half_line()
    overlapping = cov.AdmissibleCovering(
        cuboids=(cov.Cuboid((1.0,), (0.5,), dom),
                 cov.Cuboid((1.4,), (0.5,), dom)),
        kappa=1.05, domain=dom, window_box=((0.5,), (1.9,)),
        family="overlap", window=())
    report = cov.validate_covering(overlapping)
    assert report.overlap_violations


def test_neighbours_equivalence_exact():
    for family in (cov.covering_bessel((-4, 4)),
                   cov.covering_laguerre((-2, 1)),
                   cov.covering_uniform(real_line(1), 1.0, ([0.0], [6.0]))):
        assert cov.validate_covering(family).neighbours_equivalent


def test_widen():
    c = cov.covering_bessel((-1, 1))
    wide = cov.widen(c, 2)
    assert wide.window == (-3, 3)
    assert len(wide.cuboids) == 7


# ---------------------------------------------------------------------------
# Partition of unity
# ---------------------------------------------------------------------------

def test_partition_single_cuboid_identity():
    c = cov.covering_bessel((0, 0))
    p = cov.partition_of_unity(c)
    xs = np.linspace(1.0, 2.0, 101)
    assert_allclose(p.evaluate(0, xs), 1.0, rtol=0, atol=0)


def test_partition_sums_to_one():
    p = cov.partition_of_unity(cov.covering_bessel((-5, 5)))
    xs = np.linspace(2.0 ** -5, 2.0 ** 6, 100001)
    total = p.evaluate_all(xs).sum(axis=0)
    assert np.max(np.abs(total - 1.0)) <= 1e-12


def test_partition_shared_endpoint():
    p = cov.partition_of_unity(cov.covering_bessel((-3, 3)))
    psis = p.evaluate_all(np.array([2.0]))
    assert_allclose(psis.sum(), 1.0, rtol=0, atol=1e-15)
    # only the two incident cuboids contribute
    assert np.count_nonzero(psis > 1e-14) == 2


def test_partition_subordinate_to_stars():
    c = cov.covering_bessel((-3, 3))
    p = cov.partition_of_unity(c)
    for i, q in enumerate(c.cuboids):
        star = q.enlarged(c.kappa, 1)
        lo, hi = star.box()
        outside = np.array([lo[0] - 1e-9, hi[0] + 1e-9])
        inside_window = (outside >= c.window_box[0][0]) \
            & (outside <= c.window_box[1][0])
        if np.any(inside_window):
            vals = p.evaluate_all(outside[inside_window], strict=False)[i]
            assert np.all(vals == 0.0)


def test_partition_derivative_scale_invariance():
    # interior cuboids of dyadic windows have bit-identical psi' * d_Q
    p = cov.partition_of_unity(cov.covering_bessel((-5, 5)))
    vals = [p.derivative_bound(i) * q.diameter
            for i, q in enumerate(p.covering.cuboids)]
    interior = vals[1:-1]
    assert max(interior) - min(interior) <= 1e-9 * max(interior)


def test_partition_derivative_halving_scale():
    # halving every cuboid doubles |psi'|, keeping |psi'| * d_Q fixed
    big = cov.partition_of_unity(
        cov.covering_uniform(real_line(1), 1.0, ([0.0], [8.0])))
    small = cov.partition_of_unity(
        cov.covering_uniform(real_line(1), 0.5, ([0.0], [4.0])))
    db = big.derivative_bound(4)
    ds = small.derivative_bound(4)
    assert_allclose(ds / db, 2.0, rtol=1e-6)
    assert_allclose(db * big.covering.cuboids[4].diameter,
                    ds * small.covering.cuboids[4].diameter, rtol=1e-6)


def test_partition_hole_error():
    p = cov.partition_of_unity(cov.covering_bessel((-2, 2)))
    with pytest.raises(CoveringHoleError):
        p.evaluate_all(np.array([100.0]))


# ---------------------------------------------------------------------------
# SVG
# ---------------------------------------------------------------------------

def test_svg_rect_per_cuboid():
    prod = cov.box_product(cov.covering_bessel((-2, 2)),
                           cov.covering_bessel((-2, 2)))
    svg = cov.covering_svg(prod)
    assert svg.count("<rect") == len(prod.cuboids)
    svg_log = cov.covering_svg(prod, log_axes=True)
    assert svg_log.count("<rect") == len(prod.cuboids)
    with pytest.raises(ValueError):
        cov.covering_svg(cov.covering_bessel((0, 1)))


def test_svg_geometry_deterministic():
    prod = cov.box_product(cov.covering_bessel((-1, 1)),
                           cov.covering_laguerre((-1, 0)))
    assert cov.covering_svg(prod) == cov.covering_svg(prod)
