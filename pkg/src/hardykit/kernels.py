"""Semigroup kernels T_t(x, y) with pointwise evaluation, comparison
kernels, and mass integrals.

Implemented families:

* ``EuclideanHeat(d)``: (4 pi t)^{-d/2} exp(-|x-y|^2 / 4t) on R^d;

* ``BesselKernel(beta)`` on (0, inf):
  sqrt(xy)/(2t) I_{beta-1/2}(xy/2t) exp(-(x^2+y^2)/4t),
  evaluated in log space through the scaled Bessel function so the
  exponential growth of I and the Gaussian factor cancel exactly;

* ``LaguerreKernel(alpha)`` on (0, inf):
  sqrt(xy)/sinh(2t) I_alpha(xy/sinh 2t) exp(-coth(2t)(x^2+y^2)/2),
  also in log space, stable down to t ~ 1e-12 and up to overflow times;

* ``SchrodingerKernel``: eigen-expansion of the second-order finite
  difference discretization of -Delta + V on a truncation box with zero
  boundary values (``schrodinger_build``);

* ``SubordinateKernel(base, nu)``: the subordinated semigroup evaluated
  at the substituted time, eval(t) = integral_0^inf base(t s) g_nu(s) ds.
  With base = EuclideanHeat this is the 2nu-stable kernel P_{t^nu, nu};

* ``StableKernel(nu, d)``: the same object in its natural time
  parameter, eval(t) = P_{t, nu};

* ``ProductKernel(factors)``: coordinate-wise product at a shared t.

All evaluators broadcast over numpy arrays in t, x, y.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal

from . import specfun
from .domain import DomainSpec, half_line, product_domain, real_line
from .errors import DomainError, QuadratureError
from .quadrature import GK15_WG, GK15_WK, GK15_X, integrate_adaptive


def _log_sinh(u):
    """log(sinh u) without overflow for large u."""
    u = np.asarray(u, dtype=float)
    return u + np.log1p(-np.exp(-2.0 * u)) - math.log(2.0)


class KernelFamily:
    """Base class: an evaluatable semigroup kernel plus its comparison."""

    domain: DomainSpec
    kind: str

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    def eval(self, t, x, y):
        raise NotImplementedError

    def comparison(self) -> "KernelFamily":
        """The designated tilde-kernel for the (A2)-type conditions."""
        raise NotImplementedError

    def max_valid_time(self) -> float:
        """Largest time the evaluation is validated for (inf if unlimited)."""
        return math.inf

    def describe(self) -> str:
        return self.kind

    def _check_points(self, *points):
        for p in points:
            arr = np.asarray(p, dtype=float)
            if not np.all(self.domain.contains(arr)):
                raise DomainError(f"point outside domain for {self.kind}")

    def _check_time(self, t):
        if np.any(np.asarray(t, dtype=float) <= 0.0):
            raise DomainError("kernel time t must be positive")


class EuclideanHeat(KernelFamily):
    def __init__(self, d: int = 1):
        self.domain = real_line(d)
        self.kind = f"euclidean_heat(d={d})"

    def eval(self, t, x, y):
        self._check_time(t)
        t = np.asarray(t, dtype=float)
        d = self.dimension
        if d == 1:
            r2 = (np.asarray(x, dtype=float) - np.asarray(y, dtype=float)) ** 2
        else:
            r2 = np.sum((np.asarray(x, dtype=float)
                         - np.asarray(y, dtype=float)) ** 2, axis=-1)
        return (4.0 * math.pi * t) ** (-d / 2.0) * np.exp(-r2 / (4.0 * t))

    def comparison(self) -> "KernelFamily":
        return self


class BesselKernel(KernelFamily):
    def __init__(self, beta: float):
        if beta <= 0.0:
            raise DomainError("bessel kernel requires beta > 0")
        self.beta = beta
        self.tau = beta - 0.5
        self.domain = half_line()
        self.kind = f"bessel(beta={beta:g})"

    def eval(self, t, x, y):
        self._check_time(t)
        self._check_points(x, y)
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore"):
            log_xy = np.log(x) + np.log(y)
        log_z = log_xy - np.log(2.0 * t)
        log_k = (0.5 * log_xy - np.log(2.0 * t)
                 + specfun.log_bessel_i_scaled(self.tau, log_z)
                 - (x - y) ** 2 / (4.0 * t))
        return np.exp(log_k)

    def comparison(self) -> "KernelFamily":
        return EuclideanHeat(1)


class LaguerreKernel(KernelFamily):
    def __init__(self, alpha: float):
        if alpha <= -0.5:
            raise DomainError("laguerre kernel requires alpha > -1/2")
        self.alpha = alpha
        self.domain = half_line()
        self.kind = f"laguerre(alpha={alpha:g})"

    def eval(self, t, x, y):
        self._check_time(t)
        self._check_points(x, y)
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore"):
            log_xy = np.log(x) + np.log(y)
        ls = _log_sinh(2.0 * t)
        log_z = log_xy - ls
        # z - coth(2t)(x^2+y^2)/2 rewritten to stay finite for all t
        exponent = (-(x - y) ** 2 * np.exp(-ls) / 2.0
                    - np.tanh(t) * (x * x + y * y) / 2.0)
        log_k = (0.5 * log_xy - ls
                 + specfun.log_bessel_i_scaled(self.alpha, log_z)
                 + exponent)
        return np.exp(log_k)

    def comparison(self) -> "KernelFamily":
        return EuclideanHeat(1)


# ---------------------------------------------------------------------------
# Subordination
# ---------------------------------------------------------------------------

class SubordinationRule:
    """Fixed Gauss-Kronrod rule in s for integral T(t s) g_nu(s) ds.

    Panels are dyadic below s = 1 and e-fold above, with the density
    evaluated once per node at construction.  Panels whose density values
    all underflow are dropped; the polynomial right tail is truncated at
    exp(60), beyond which the kernel factor (t s)^{-d/2} makes the
    remainder negligible at the accuracies used here.
    """

    def __init__(self, nu: float, inner_levels: int = 50, outer_levels: int = 60):
        params = specfun.StableDensityParams(nu)
        self.nu = nu
        edges: list[tuple[float, float]] = []
        for k in range(inner_levels):
            edges.append((2.0 ** (-k - 1), 2.0 ** (-k)))
        for u in range(outer_levels):
            edges.append((math.exp(u), math.exp(u + 1.0)))
        nodes, wk, wg = [], [], []
        for a, b in edges:
            h = 0.5 * (b - a)
            s = 0.5 * (a + b) + h * GK15_X
            g = specfun.stable_density(params, s)
            if np.all(g < 1e-300):
                continue
            nodes.append(s)
            wk.append(h * GK15_WK * g)
            wg.append(h * GK15_WG * g)
        self.nodes = np.concatenate(nodes)
        self.weights_k = np.concatenate(wk)
        self.weights_g = np.concatenate(wg)
        self.panel_count = len(nodes)

    def apply(self, base_eval, t, x, y, rtol: float = 1e-6):
        """integral base(t s, x, y) g_nu(s) ds with a K15/G7 error check."""
        t = np.asarray(t, dtype=float)
        shape = np.broadcast_shapes(t.shape, np.shape(x), np.shape(y))
        s = self.nodes.reshape((-1,) + (1,) * len(shape))
        vals = base_eval(t * s, x, y)
        k15 = np.tensordot(self.weights_k, vals, axes=(0, 0))
        g7 = np.tensordot(self.weights_g, vals, axes=(0, 0))
        err = np.max(np.abs(k15 - g7))
        scale = np.max(np.abs(k15))
        if err > max(rtol * scale, 1e-13):
            raise QuadratureError("subordination quadrature error above budget",
                                  estimate=float(err), budget=rtol)
        return k15


@lru_cache(maxsize=8)
def subordination_rule(nu: float) -> SubordinationRule:
    return SubordinationRule(nu)


class SubordinateKernel(KernelFamily):
    """Subordinated semigroup at the substituted time.

    ``eval(t, x, y)`` returns the kernel of the fractional-power
    semigroup at time t^nu, i.e. integral base(t s) g_nu(s) ds.  All
    estimates consume the kernel in exactly this parameterization, and
    the CLI documents the convention.
    """

    def __init__(self, base: KernelFamily, nu: float):
        if not 0.0 < nu < 1.0:
            raise DomainError("subordination requires nu in (0, 1)")
        self.base = base
        self.nu = nu
        self.domain = base.domain
        self.kind = f"subordinate({base.kind}, nu={nu:g})"
        self.rule = subordination_rule(nu)

    def eval(self, t, x, y):
        self._check_time(t)
        return self.rule.apply(self.base.eval, t, x, y)

    def comparison(self) -> "KernelFamily":
        return SubordinateKernel(EuclideanHeat(self.dimension), self.nu)


class StableKernel(KernelFamily):
    """Kernel of the 2nu-stable semigroup in its natural time, P_{t, nu}."""

    def __init__(self, nu: float, d: int = 1):
        if not 0.0 < nu < 1.0:
            raise DomainError("stable kernel requires nu in (0, 1)")
        self.nu = nu
        self.heat = EuclideanHeat(d)
        self.domain = self.heat.domain
        self.kind = f"stable(nu={nu:g}, d={d})"
        self.rule = subordination_rule(nu)

    def eval(self, t, x, y):
        self._check_time(t)
        u = np.asarray(t, dtype=float) ** (1.0 / self.nu)
        return self.rule.apply(self.heat.eval, u, x, y)

    def comparison(self) -> "KernelFamily":
        return self


def comparison_eval(k: KernelFamily, t, x, y):
    """Evaluate the family's designated comparison kernel at (t, x, y)."""
    return k.comparison().eval(t, x, y)


def poisson_kernel(t, x, y, d: int = 1):
    """Closed-form P_{t, 1/2}; the nu = 1/2 oracle for subordination."""
    t = np.asarray(t, dtype=float)
    if d == 1:
        r2 = (np.asarray(x, dtype=float) - np.asarray(y, dtype=float)) ** 2
    else:
        r2 = np.sum((np.asarray(x, dtype=float)
                     - np.asarray(y, dtype=float)) ** 2, axis=-1)
    c = math.gamma((d + 1) / 2.0) / math.pi ** ((d + 1) / 2.0)
    return c * t / (t * t + r2) ** ((d + 1) / 2.0)


# ---------------------------------------------------------------------------
# Products
# ---------------------------------------------------------------------------

class ProductKernel(KernelFamily):
    """Coordinate-split product of lower-dimensional factors at shared t."""

    def __init__(self, factors: Sequence[KernelFamily]):
        if not factors:
            raise ValueError("product kernel needs at least one factor")
        self.factors = tuple(factors)
        self.domain = product_domain(*(f.domain for f in factors))
        self.kind = "product(" + ", ".join(f.kind for f in factors) + ")"

    def _slices(self):
        off = 0
        for f in self.factors:
            yield f, off, off + f.dimension
            off += f.dimension

    def eval(self, t, x, y):
        self._check_time(t)
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = None
        for f, a, b in self._slices():
            xs = x[..., a:b]
            ys = y[..., a:b]
            if f.dimension == 1:
                xs = xs[..., 0]
                ys = ys[..., 0]
            piece = f.eval(t, xs, ys)
            out = piece if out is None else out * piece
        return out

    def max_valid_time(self) -> float:
        return min(f.max_valid_time() for f in self.factors)

    def comparison(self) -> "KernelFamily":
        return ProductKernel([f.comparison() for f in self.factors])


# ---------------------------------------------------------------------------
# Discretized Schrodinger kernel
# ---------------------------------------------------------------------------

class SchrodingerKernel(KernelFamily):
    """Eigen-expansion kernel of -d^2/dx^2 + V on [-R, R], zero BCs.

    eval(t, x, y) = sum_k e^{-t lambda_k} phi_k(x) phi_k(y) with the
    finite-difference eigenpairs; off-grid points interpolate the grid
    eigenvectors linearly, which coincides with bilinear interpolation of
    the grid kernel.  Times with sqrt(t) > R/4 are outside the validated
    range of the spectral truncation and are rejected.
    """

    def __init__(self, potential_values: np.ndarray, box_half_width: float,
                 grid: np.ndarray, eigvals: np.ndarray, eigvecs: np.ndarray):
        self.domain = real_line(1)
        self.kind = f"schrodinger(R={box_half_width:g}, n={len(grid)})"
        self.box_half_width = box_half_width
        self.potential_values = potential_values
        self.grid = grid
        self.h = grid[1] - grid[0]
        self.eigvals = eigvals
        self.eigvecs = eigvecs  # columns, l2-orthonormal
        # padded grid including the zero boundary values for interpolation
        self._xp = np.concatenate(([-box_half_width], grid, [box_half_width]))
        self._vp = np.vstack([np.zeros((1, eigvecs.shape[1])),
                              eigvecs,
                              np.zeros((1, eigvecs.shape[1]))])

    def max_valid_time(self) -> float:
        return (self.box_half_width / 4.0) ** 2

    def _check_validity(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(np.sqrt(t) > self.box_half_width / 4.0):
            raise DomainError(
                "requested time outside the validated range of the "
                f"truncation box (sqrt(t) > {self.box_half_width / 4.0:g})")

    def _interp_modes(self, x, k_max: int) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if np.any(np.abs(x) > self.box_half_width):
            raise DomainError("point outside the Schrodinger truncation box")
        idx = np.clip(np.searchsorted(self._xp, x) - 1, 0, len(self._xp) - 2)
        x0 = self._xp[idx]
        w = (x - x0) / (self._xp[idx + 1] - x0)
        return ((1.0 - w)[..., None] * self._vp[idx, :k_max]
                + w[..., None] * self._vp[idx + 1, :k_max])

    def _eval_scalar_t(self, t: float, x, y):
        weights = np.exp(-t * self.eigvals)
        k_max = int(np.searchsorted(t * self.eigvals, 746.0)) or 1
        phi_x = self._interp_modes(x, k_max)
        phi_y = self._interp_modes(y, k_max)
        return np.einsum("...k,...k,k->...", phi_x, phi_y,
                         weights[:k_max]) / self.h

    def eval(self, t, x, y):
        self._check_time(t)
        self._check_validity(t)
        t_arr = np.asarray(t, dtype=float)
        if t_arr.ndim == 0:
            return self._eval_scalar_t(float(t_arr), x, y)
        shape = np.broadcast_shapes(t_arr.shape, np.shape(x), np.shape(y))
        t_b = np.broadcast_to(t_arr, shape)
        x_b = np.broadcast_to(np.asarray(x, dtype=float), shape)
        y_b = np.broadcast_to(np.asarray(y, dtype=float), shape)
        out = np.empty(shape)
        for tv in np.unique(t_b):
            mask = t_b == tv
            out[mask] = self._eval_scalar_t(float(tv), x_b[mask], y_b[mask])
        return out

    def comparison(self) -> "KernelFamily":
        return EuclideanHeat(1)


def schrodinger_build(potential, box_half_width: float = 20.0,
                      n_points: int = 2000) -> SchrodingerKernel:
    """Discretize -d^2/dx^2 + V on [-R, R] with zero boundary values.

    ``potential`` is a callable on the grid or an array of n_points
    samples; it must be nonnegative.
    """
    grid = np.linspace(-box_half_width, box_half_width, n_points + 2)[1:-1]
    h = grid[1] - grid[0]
    if callable(potential):
        v = np.asarray(potential(grid), dtype=float)
        v = np.broadcast_to(v, grid.shape).copy()
    else:
        v = np.asarray(potential, dtype=float)
        if v.shape != grid.shape:
            raise ValueError(f"potential samples must have shape {grid.shape}")
    if np.any(v < 0.0):
        raise DomainError("schrodinger_build requires a nonnegative potential")
    diag = 2.0 / h ** 2 + v
    off = np.full(n_points - 1, -1.0 / h ** 2)
    try:
        eigvals, eigvecs = eigh_tridiagonal(diag, off)
    except Exception as exc:  # pragma: no cover - LAPACK failure
        raise QuadratureError(f"eigendecomposition failed: {exc}") from exc
    return SchrodingerKernel(v, box_half_width, grid, eigvals, eigvecs)


# ---------------------------------------------------------------------------
# Mass integrals
# ---------------------------------------------------------------------------

def _mass_1d(k: KernelFamily, t: float, x: float, radius: float,
             rtol: float) -> float:
    dom_lo, dom_hi = k.domain.intervals[0]
    if isinstance(k, SchrodingerKernel):
        dom_lo = max(dom_lo, -k.box_half_width)
        dom_hi = min(dom_hi, k.box_half_width)
    if math.isinf(radius):
        w = 45.0 * math.sqrt(t) + 10.0
        lo, hi = x - w, x + w
    else:
        lo, hi = x - radius, x + radius
    lo = max(lo, dom_lo)
    hi = min(hi, dom_hi)
    if hi <= lo:
        return 0.0
    seeds = [x + c * math.sqrt(t) for c in
             (-30.0, -10.0, -3.0, -1.0, 1.0, 3.0, 10.0, 30.0)]
    val, _ = integrate_adaptive(lambda ys: k.eval(t, x, ys), lo, hi,
                                rtol=rtol, atol=1e-14, breakpoints=seeds,
                                max_panels=4000)
    return val


def _mass_nd(k: KernelFamily, t: float, x, radius: float,
             rtol: float) -> float:
    x = np.asarray(x, dtype=float)
    d = k.dimension
    if math.isinf(radius):
        w = 45.0 * math.sqrt(t) + 10.0
    else:
        w = radius
    lo, hi = k.domain.clip_box(x - w, x + w)
    spans = hi - lo
    if np.any(spans <= 0):
        return 0.0

    def masked(pts):
        vals = k.eval(t, x[None, :], pts)
        if math.isfinite(radius):
            inside = np.linalg.norm(pts - x[None, :], axis=1) <= radius
            vals = np.where(inside, vals, 0.0)
        return vals

    from .quadrature import integrate, rule_for_box
    n = max(32, min(128, int(8 * spans.max() / math.sqrt(t))))
    result = integrate(rule_for_box(lo, hi, n), masked)
    return result.value


def mass(k: KernelFamily, t: float, x, radius: float = math.inf,
         rtol: float = 1e-9) -> float:
    """integral of T_t(x, y) over {y in X : |x - y| <= radius}.

    Bounded by 1 + quadrature error for every implemented kernel.
    """
    if not (radius > 0.0):
        raise DomainError("mass radius must be positive (inf for full domain)")
    if k.dimension == 1:
        return _mass_1d(k, t, float(np.asarray(x).reshape(())), radius, rtol)
    return _mass_nd(k, t, x, radius, rtol)
