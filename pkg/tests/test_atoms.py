import numpy as np
import pytest
from numpy.testing import assert_allclose

from hardykit import atoms as at
from hardykit import coverings as cov
from hardykit.errors import ResolutionError
from hardykit.quadrature import integrate_adaptive


@pytest.fixture(scope="module")
def qb():
    return cov.covering_bessel((-3, 3))


@pytest.fixture(scope="module")
def host(qb):
    return qb.cuboids[3]   # [1, 2]


def star_box(q, kappa):
    lo, hi = q.enlarged(kappa, 1).box()
    return float(lo[0]), float(hi[0])


# ---------------------------------------------------------------------------
# Atom construction and validation
# ---------------------------------------------------------------------------

def test_local_atom_examples(qb):
    a12 = at.make_local_atom(qb.cuboids[3])
    assert np.all(a12.values == 1.0)
    a24 = at.make_local_atom(qb.cuboids[4])
    assert np.all(a24.values == 0.5)
    for a in (a12, a24):
        assert_allclose(a.integral, 1.0, rtol=1e-14)
        assert at.validate_atom(a, qb.kappa).passed


def test_random_classical_atom(qb, host):
    a = at.random_classical_atom(host, qb.kappa, seed=42)
    report = at.validate_atom(a, qb.kappa)
    assert report.passed
    # both defining inequalities hold with a tight margin
    assert 0.9 <= a.sup_norm * a.measure <= 1.0 + 1e-12
    assert abs(a.integral) <= 1e-10
    # supported inside Q*
    lo, hi = star_box(host, qb.kappa)
    assert a.support_lo >= lo and a.support_hi <= hi


def test_random_atom_seed_determinism(qb, host):
    a = at.random_classical_atom(host, qb.kappa, seed=7)
    b = at.random_classical_atom(host, qb.kappa, seed=7)
    assert a.support_lo == b.support_lo and a.support_hi == b.support_hi
    assert np.array_equal(a.values, b.values)
    c = at.random_classical_atom(host, qb.kappa, seed=8)
    assert not np.array_equal(a.values, c.values)


def test_validate_atom_rejects_violations(qb, host):
    a = at.random_classical_atom(host, qb.kappa, seed=3)
    too_big = at.Atom("classical", host, a.support_lo, a.support_hi,
                      a.values * 2.0)
    assert not at.validate_atom(too_big, qb.kappa).passed
    shifted = at.Atom("classical", host, a.support_lo, a.support_hi,
                      a.values + 1e-3 * a.sup_norm)
    assert not at.validate_atom(shifted, qb.kappa).passed
    outside = at.Atom("classical", host, a.support_lo - 10.0,
                      a.support_hi, a.values)
    assert not at.validate_atom(outside, qb.kappa).passed


# ---------------------------------------------------------------------------
# Localization
# ---------------------------------------------------------------------------

def test_localize_constant_gives_psi(qb):
    p = cov.partition_of_unity(qb)
    pieces = at.localize(lambda x: np.ones_like(x), p, cells=128)
    for i, (q, fq) in enumerate(pieces):
        win_lo = qb.window_box[0][0]
        win_hi = qb.window_box[1][0]
        centers = fq.centers
        inside = (centers >= win_lo) & (centers <= win_hi)
        psi = p.evaluate(i, centers[inside])
        assert_allclose(fq.values[inside], psi, rtol=0, atol=1e-15)


def test_localize_single_cuboid_identity():
    single = cov.covering_bessel((0, 0))
    p = cov.partition_of_unity(single)
    f = lambda x: np.sin(x)
    (_, fq), = at.localize(f, p, cells=64)
    centers = fq.centers
    inside = (centers >= 1.0) & (centers <= 2.0)
    assert_allclose(fq.values[inside], np.sin(centers[inside]), rtol=0,
                    atol=1e-15)


def test_localize_pointwise_identity(qb):
    p = cov.partition_of_unity(qb)
    f = lambda x: np.exp(-((x - 1.5) ** 2))
    probes = np.linspace(2.0 ** -3, 2.0 ** 4, 4097)
    assert at.localize_reconstruction_error(f, p, probes) <= 1e-12


def test_localize_l1_additivity(qb):
    # for f >= 0 the piece integrals recover the total mass
    p = cov.partition_of_unity(qb)
    f = lambda x: np.exp(-((x - 2.0) ** 2) / 0.5)
    pieces = at.localize(f, p, cells=2048)
    total = sum(fq.l1_norm for _, fq in pieces)
    oracle, _ = integrate_adaptive(f, 2.0 ** -3, 2.0 ** 4, rtol=1e-12,
                                   breakpoints=[1.0, 2.0, 3.0])
    assert abs(total - oracle) < 1e-5 * oracle


# ---------------------------------------------------------------------------
# Local decomposition
# ---------------------------------------------------------------------------

def test_decompose_local_atom_fixed_point(qb, host):
    lo, hi = star_box(host, qb.kappa)
    m = hi - lo
    fq = at.GridFunction(lo, hi, np.full(1024, 1.0 / m))
    dec = at.local_decompose(fq, host, qb.kappa, depth=6)
    assert len(dec.terms) == 1
    coeff, atom = dec.terms[0]
    assert atom.kind == "local"
    assert_allclose(coeff, 1.0, rtol=1e-12)
    assert dec.residual_norm == 0.0


def test_decompose_haar_eigencase(qb, host):
    lo, hi = star_box(host, qb.kappa)
    m = hi - lo
    vals = np.concatenate([np.full(512, 1.0 / m), np.full(512, -1.0 / m)])
    dec = at.local_decompose(at.GridFunction(lo, hi, vals), host, qb.kappa, 6)
    assert len(dec.terms) == 1
    coeff, atom = dec.terms[0]
    assert atom.kind == "classical"
    assert_allclose(abs(coeff), 1.0, rtol=1e-12)
    assert dec.residual_norm == 0.0
    assert at.validate_atom(atom, qb.kappa).passed


def test_decompose_hat_self_convergence(qb, host):
    lo, hi = star_box(host, qb.kappa)
    g = at.GridFunction(lo, hi, np.zeros(1024))
    x = g.centers
    mid = 0.5 * (lo + hi)
    hat = np.maximum(0.0, 1.0 - np.abs((x - mid) / ((hi - lo) / 3.0)))
    d6 = at.local_decompose(at.GridFunction(lo, hi, hat), host, qb.kappa, 6)
    d10 = at.local_decompose(at.GridFunction(lo, hi, hat), host, qb.kappa, 10)
    assert abs(d6.coefficient_l1 / d10.coefficient_l1 - 1.0) < 0.05
    assert d10.residual_norm == 0.0    # full depth on a 1024-cell grid
    assert d6.residual_norm > 0.0
    # reconstruction is exact including the remainder
    rec = d6.reconstruct()
    assert np.max(np.abs(rec.values - hat)) < 1e-12
    assert all(at.validate_atom(a, qb.kappa).passed for _, a in d10.terms)


def test_decompose_reconstructs_exactly(qb, host):
    lo, hi = star_box(host, qb.kappa)
    rng = np.random.default_rng(0)
    vals = rng.normal(size=512)
    fq = at.GridFunction(lo, hi, vals)
    dec = at.local_decompose(fq, host, qb.kappa, depth=5)
    rec = dec.reconstruct()
    assert np.max(np.abs(rec.values - vals)) < 1e-12
    assert abs(dec.remainder.l1_norm - dec.residual_norm) == 0.0


def test_decompose_linearity(qb, host):
    lo, hi = star_box(host, qb.kappa)
    x = at.GridFunction(lo, hi, np.zeros(512)).centers
    f = np.sin(x)
    g = np.cos(2 * x)
    a_, b_ = 2.0, -0.7
    rf = at.local_decompose(at.GridFunction(lo, hi, f), host, qb.kappa, 5) \
        .reconstruct(include_remainder=False)
    rg = at.local_decompose(at.GridFunction(lo, hi, g), host, qb.kappa, 5) \
        .reconstruct(include_remainder=False)
    rs = at.local_decompose(at.GridFunction(lo, hi, a_ * f + b_ * g),
                            host, qb.kappa, 5) \
        .reconstruct(include_remainder=False)
    assert np.max(np.abs(rs.values - (a_ * rf.values + b_ * rg.values))) < 1e-12


def test_decompose_triangle_property(qb, host):
    lo, hi = star_box(host, qb.kappa)
    x = at.GridFunction(lo, hi, np.zeros(512)).centers
    f = np.sin(x)
    g = np.exp(-x)
    lf = at.local_decompose(at.GridFunction(lo, hi, f), host, qb.kappa, 5) \
        .coefficient_l1
    lg = at.local_decompose(at.GridFunction(lo, hi, g), host, qb.kappa, 5) \
        .coefficient_l1
    lfg = at.local_decompose(at.GridFunction(lo, hi, f + g), host, qb.kappa, 5) \
        .coefficient_l1
    assert lfg <= lf + lg + 1e-10


def test_decompose_resolution_error(qb, host):
    lo, hi = star_box(host, qb.kappa)
    fq = at.GridFunction(lo, hi, np.zeros(24))
    with pytest.raises(ResolutionError):
        at.local_decompose(fq, host, qb.kappa, depth=4)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def test_atom_roundtrip(tmp_path, qb, host):
    lo, hi = star_box(host, qb.kappa)
    x = at.GridFunction(lo, hi, np.zeros(256)).centers
    fq = at.GridFunction(lo, hi, np.sin(3 * x))
    dec = at.local_decompose(fq, host, qb.kappa, depth=4)
    path = tmp_path / "dec.txt"
    at.save_decomposition(path, dec)
    back = at.load_decomposition(path, qb.domain)
    assert len(back.terms) == len(dec.terms)
    for (c1, a1), (c2, a2) in zip(dec.terms, back.terms):
        assert c1 == c2
        assert a1.kind == a2.kind
        assert a1.support_lo == a2.support_lo
        assert np.array_equal(a1.values, a2.values)
    assert np.array_equal(back.remainder.values, dec.remainder.values)
    assert back.residual_norm == dec.residual_norm


def test_grid_function_roundtrip(tmp_path):
    g = at.GridFunction(0.5, 2.5, np.linspace(-1, 1, 64))
    path = tmp_path / "g.txt"
    at.save_grid_function(path, g)
    back = at.load_grid_function(path)
    assert back.lo == g.lo and back.hi == g.hi
    assert np.array_equal(back.values, g.values)
