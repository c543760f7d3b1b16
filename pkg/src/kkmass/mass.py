"""Flux-integral masses over ``S_R x X`` and the spinor boundary identities.

The generalized mass of an end asymptotic to ``R^k x X`` is

    m(g) = lim 1/(4 omega_k vol(X)) int_{S_R x X} (nabla0_a g_ja - nabla0_j g_aa) *dx_j dvol(X)

with ``omega_k = 2 pi^(k/2) / Gamma(k/2)`` the area of the unit (k-1)-sphere.
For ``dim_fiber = 0`` this is the ordinary ADM mass.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaln, roots_gegenbauer

from .fits import loglog_fit, power_law_limit
from .geometry import (
    DecayReport,
    MetricField,
    _derivatives,
    _points,
    _unbatch,
    background_covariant_h,
    curvature,
    decay_order,
)
from .spin import SpinorField, _covariant_batch, _dirac_from_nabla, default_parallel_spinor

__all__ = [
    "sphere_area",
    "ShellQuadrature",
    "MassResult",
    "adm_integrand",
    "kk_integrand",
    "mass",
    "witten_form",
    "DivergenceCheck",
    "divergence_identity_residual",
    "BoundaryReport",
    "boundary_mass_check",
]

CHUNK = 512


def sphere_area(k: int) -> float:
    """Area of the unit ``(k-1)``-sphere in ``R^k``."""
    return float(2.0 * math.exp(0.5 * k * math.log(math.pi) - gammaln(0.5 * k)))


def _sphere_rule(d: int, degree: int):
    """Product rule on the unit ``S^d`` in ``R^(d+1)``, exact to polynomial ``degree``."""
    if d == 0:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if d == 1:
        count = degree + 1
        ang = 2.0 * np.pi * np.arange(count) / count
        return np.stack([np.cos(ang), np.sin(ang)], axis=1), np.full(count, 2.0 * np.pi / count)
    # slice along the last axis: dS_d = (1 - t^2)^((d-2)/2) dt dS_{d-1}
    t, wt = roots_gegenbauer(degree // 2 + 1, 0.5 * (d - 1))
    sub, wsub = _sphere_rule(d - 1, degree)
    s = np.sqrt(1.0 - t**2)
    nodes = np.concatenate([np.hstack([s_i * sub, np.full((len(sub), 1), t_i)]) for t_i, s_i in zip(t, s)])
    weights = np.concatenate([w_i * wsub for w_i in wt])
    return nodes, weights


@dataclass(frozen=True)
class ShellQuadrature:
    """Gauss-Gegenbauer x trapezoid rule on ``S^(k-1)``, trapezoid on each fibre circle.

    Weights carry the Euclidean area element ``R^(k-1) dS`` and the fibre
    volume, so integrating 1 gives ``omega_k R^(k-1) vol(X)``.
    """

    dim_base: int
    degree: int = 16
    fiber_periods: tuple = ()
    fiber_points: int = 8

    def __post_init__(self):
        if self.dim_base < 2:
            raise ValueError("shell quadrature needs a base dimension of at least 2")
        if self.degree < 0 or self.fiber_points < 1:
            raise ValueError("quadrature degree and fibre points must be positive")
        object.__setattr__(self, "fiber_periods", tuple(float(p) for p in self.fiber_periods))

    @classmethod
    def for_metric(cls, m: MetricField, degree: int = 16, fiber_points: int = 8) -> "ShellQuadrature":
        return cls(m.chart.dim_base, degree, m.chart.fiber_periods, fiber_points)

    def unit_sphere(self):
        return _sphere_rule(self.dim_base - 1, self.degree)

    def fiber_rule(self):
        if not self.fiber_periods:
            return np.zeros((1, 0)), np.ones(1)
        axes = [np.arange(self.fiber_points) * p / self.fiber_points for p in self.fiber_periods]
        grids = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([gr.ravel() for gr in grids], axis=1)
        w = np.prod([p / self.fiber_points for p in self.fiber_periods])
        return pts, np.full(len(pts), w)

    def nodes(self, radius: float):
        """``(points, weights, unit normals)`` on ``S_R x X``."""
        u, wu = self.unit_sphere()
        f, wf = self.fiber_rule()
        nb, nf = len(u), len(f)
        base = np.repeat(radius * u, nf, axis=0)
        normals = np.repeat(u, nf, axis=0)
        fib = np.tile(f, (nb, 1))
        weights = np.repeat(wu * radius ** (self.dim_base - 1), nf) * np.tile(wf, nb)
        return np.hstack([base, fib]), weights, normals

    def integrate(self, fn: Callable[[np.ndarray], np.ndarray], radius: float, threads: int = 1) -> float:
        X, w, _ = self.nodes(radius)
        return float(np.sum(w * _map_chunks(fn, X, threads)))


def _map_chunks(fn, X: np.ndarray, threads: int = 1) -> np.ndarray:
    """Evaluate ``fn`` over fixed-size chunks; chunk boundaries never depend on ``threads``."""
    chunks = [X[i : i + CHUNK] for i in range(0, len(X), CHUNK)]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(fn, chunks))
    else:
        parts = [fn(c) for c in chunks]
    return np.concatenate(parts)


# ---------------------------------------------------------------------------
# integrands


def adm_integrand(m: MetricField, x, step=None) -> np.ndarray:
    """``(d_i g_ij - d_j g_ii) n_j``: the ADM flux density per unit sphere area.

    ``n`` is the outward Euclidean radial direction.  Only for charts without
    a fibre.
    """
    if m.chart.dim_fiber:
        raise ValueError("adm_integrand is for pure asymptotically flat charts; use kk_integrand")
    X, single = _points(x, m.dim)
    dg, _ = _derivatives(m.metric, m.metric_d1, m.chart, X, 1, step)
    k = m.chart.dim_base
    n = X[:, :k] / np.linalg.norm(X[:, :k], axis=1, keepdims=True)
    vec = np.einsum("...iij->...j", dg) - np.einsum("...jii->...j", dg)
    return _unbatch(np.einsum("...j,...j->...", vec, n), single)


def kk_integrand(m: MetricField, x, step=None):
    """Generalized-mass flux density along the outward normal.

    Returns ``(full, reduced)``: the covariant form
    ``(nabla0_{e0_a} g_ja - nabla0_{e0_j} g_aa) n_j`` and the coordinate form
    ``(d_i g_ij - d_j g_aa) n_j`` (``i`` over the base only).  The two agree
    pointwise when the perturbation does not depend on the fibre and after
    fibre integration in general.
    """
    if m.background is None:
        raise ValueError(f"metric {m.name!r} has no background")
    X, single = _points(x, m.dim)
    k = m.chart.dim_base
    n = X[:, :k] / np.linalg.norm(X[:, :k], axis=1, keepdims=True)
    _, DH = background_covariant_h(m, X, step)
    full_vec = np.einsum("...aja->...j", DH[:, :, :k, :]) - np.einsum("...jaa->...j", DH[:, :k])
    dg, _ = _derivatives(m.metric, m.metric_d1, m.chart, X, 1, step)
    red_vec = np.einsum("...iij->...j", dg[:, :k, :k, :k]) - np.einsum("...jaa->...j", dg[:, :k])
    full = np.einsum("...j,...j->...", full_vec, n)
    reduced = np.einsum("...j,...j->...", red_vec, n)
    return _unbatch(full, single), _unbatch(reduced, single)


# ---------------------------------------------------------------------------
# mass


@dataclass
class MassResult:
    """Per-radius flux masses and their extrapolation ``m(R) = m_inf + c R^-p``."""

    radii: np.ndarray
    values: np.ndarray
    m_inf: float
    exponent: float
    error: float
    converged: bool
    omega_k: float
    fiber_volume: float
    decay: Optional[DecayReport] = None
    flags: list = field(default_factory=list)


def _flux_density(m: MetricField, step=None):
    if m.chart.dim_fiber == 0:
        return lambda X: adm_integrand(m, X, step)
    return lambda X: kk_integrand(m, X, step)[0]


def _extrapolate(radii, values):
    fit = power_law_limit(radii, values)
    err = abs(values[-1] - fit.limit) if fit.converged else math.inf
    if fit.converged and len(values) >= 4:
        prev = power_law_limit(radii[:-1], values[:-1])
        err = err + (abs(prev.limit - fit.limit) if prev.converged else abs(values[-1] - values[-2]))
    return fit, err


def mass(
    m: MetricField,
    radii,
    quad: Optional[ShellQuadrature] = None,
    threads: int = 1,
    step=None,
    check_decay: bool = True,
    seed: int = 0,
) -> MassResult:
    """Flux mass at each radius plus a three-point power-law extrapolation."""
    radii = np.asarray(radii, dtype=float)
    if radii.size < 3 or not np.all(np.diff(radii) > 0):
        raise ValueError("need at least three strictly increasing radii")
    if radii[0] <= m.chart.r_min:
        raise ValueError(f"smallest radius {radii[0]} lies inside the chart boundary r_min = {m.chart.r_min}")
    quad = quad or ShellQuadrature.for_metric(m)
    if quad.fiber_periods != m.chart.fiber_periods or quad.dim_base != m.chart.dim_base:
        raise ValueError("quadrature does not match the metric's chart")
    k = m.chart.dim_base
    omega = sphere_area(k)
    vol = m.chart.fiber_volume
    density = _flux_density(m, step)
    values = np.array([quad.integrate(density, R, threads) for R in radii]) / (4.0 * omega * vol)
    fit, err = _extrapolate(radii, values)

    flags = []
    decay = None
    if check_decay and m.background is not None:
        decay = decay_order(m, radii, samples=32, seed=seed, step=step)
        if not decay.mass_well_defined:
            flags.append("mass possibly coordinate-dependent")
    if not fit.converged:
        flags.append("non-convergent ladder")
    return MassResult(
        radii=radii,
        values=values,
        m_inf=fit.limit if fit.converged else math.nan,
        exponent=fit.exponent,
        error=err,
        converged=fit.converged,
        omega_k=omega,
        fiber_volume=vol,
        decay=decay,
        flags=flags,
    )


# ---------------------------------------------------------------------------
# Witten form and the divergence identity


def _inner(u, v):
    """Hermitian product, linear in the first slot."""
    return np.einsum("...i,...i->...", u, np.conj(v))


def _witten_batch(m: MetricField, phi: SpinorField, X, step=None):
    nabla, val, ff, omega = _covariant_batch(m, phi, X, step)
    D = _dirac_from_nabla(phi.rep, nabla)
    cliff_D = np.einsum("aij,...j->...ai", phi.rep.gamma, D)
    alpha = np.einsum("...ai,...i->...a", nabla + cliff_D, np.conj(val))
    return alpha, nabla, D, val, ff, omega


def witten_form(m: MetricField, phi: SpinorField, x, direction=None, step=None):
    """``alpha(X) = <(nabla_X + X . D) phi, phi>`` along the frame ``e``.

    ``direction`` may be a frame index or a vector of frame components; with
    ``None`` all legs ``alpha(e_a)`` are returned.
    """
    X, single = _points(x, m.dim)
    alpha, *_ = _witten_batch(m, phi, X, step)
    if direction is not None:
        if np.ndim(direction) == 0:
            alpha = alpha[:, int(direction)]
        else:
            alpha = alpha @ np.asarray(direction)
    return _unbatch(alpha, single)


@dataclass(frozen=True)
class DivergenceCheck:
    divergence: np.ndarray
    scalar_term: np.ndarray
    gradient_term: np.ndarray
    dirac_term: np.ndarray
    residual: np.ndarray


def divergence_identity_residual(m: MetricField, phi: SpinorField, x, step=None) -> DivergenceCheck:
    """Compare ``div alpha`` with ``R/4 |phi|^2 + |nabla phi|^2 - |D phi|^2``.

    ``div alpha = sum_a [e_a(alpha(e_a)) - alpha(nabla_{e_a} e_a)]`` with the
    frame derivative taken by central differences of ``alpha`` at the same
    step used for the spinor and curvature, so the residual is O(step^2).
    """
    X, single = _points(x, m.dim)
    from .geometry import _resolve_step

    h = _resolve_step(m.chart, X, step)
    alpha, nabla, D, val, ff, omega = _witten_batch(m, phi, X, h)
    d_alpha = []
    for nu in range(m.dim):
        shift = np.zeros_like(X)
        shift[:, nu] = h
        plus = _witten_batch(m, phi, X + shift, h)[0]
        minus = _witten_batch(m, phi, X - shift, h)[0]
        d_alpha.append((plus - minus) / (2.0 * h)[:, None])
    d_alpha = np.stack(d_alpha, axis=1)  # [N, nu, a]
    div = np.einsum("...na,...na->...", ff.e, d_alpha) - np.einsum("...aab,...b->...", omega, alpha)
    R = curvature(m, X, h).scalar
    norm2 = np.real(_inner(val, val))
    scalar_term = 0.25 * R * norm2
    grad_term = np.real(np.einsum("...ai,...ai->...", nabla, np.conj(nabla)))
    dirac_term = np.real(_inner(D, D))
    residual = np.abs(div - (scalar_term + grad_term - dirac_term))
    out = (div, scalar_term, grad_term, dirac_term, residual)
    return DivergenceCheck(*(_unbatch(a, single) for a in out))


# ---------------------------------------------------------------------------
# boundary term versus mass


@dataclass
class BoundaryReport:
    """Shell integrals of the spinor boundary form versus the mass flux.

    ``boundary`` holds ``int Re <(nabla_a + e_a . D) phi0, phi0> int(e_a) dvol(g)``
    and ``reduced`` the integral of ``1/4 (nabla0_b g_ab - nabla0_a g_bb) |phi0|^2``
    against the coordinate measure.  Dividing either by ``omega_k vol(X)``
    gives a mass estimate.
    """

    radii: np.ndarray
    boundary: np.ndarray
    reduced: np.ndarray
    gap: np.ndarray
    gap_exponent: float
    boundary_mass: np.ndarray
    boundary_mass_limit: float
    flux_mass: MassResult
    omega_k: float
    fiber_volume: float

    @property
    def relative_difference(self) -> float:
        """``|boundary mass - flux mass| / |flux mass|`` at the largest radius."""
        a, b = self.boundary_mass[-1], self.flux_mass.values[-1]
        return abs(a - b) / abs(b) if b != 0 else abs(a - b)

    @property
    def limit_relative_difference(self) -> float:
        a, b = self.boundary_mass_limit, self.flux_mass.m_inf
        return abs(a - b) / abs(b) if b != 0 else abs(a - b)


def _boundary_density(m: MetricField, phi0: SpinorField, step=None):
    k = m.chart.dim_base

    def density(X):
        alpha, _, _, _, ff, _ = _witten_batch(m, phi0, X, step)
        n = X[:, :k] / np.linalg.norm(X[:, :k], axis=1, keepdims=True)
        # flux of the vector field sum_a Re(alpha_a) e_a through r = R
        flux = np.einsum("...a,...ja,...j->...", np.real(alpha), ff.e[:, :k, :], n)
        return flux * np.sqrt(np.linalg.det(ff.g))

    return density


def boundary_mass_check(
    m: MetricField,
    phi0: Optional[SpinorField] = None,
    radii=None,
    quad: Optional[ShellQuadrature] = None,
    threads: int = 1,
    step=None,
) -> BoundaryReport:
    """Boundary spinor flux of the approximately parallel spinor versus the mass.

    Each radius integrates both sides of the pointwise reduction; their gap
    shrinks like ``R^(k-1) R^(-2 tau - 1)``.
    """
    if m.background is None:
        raise ValueError(f"metric {m.name!r} has no background")
    radii = np.asarray(radii, dtype=float)
    if phi0 is None:
        phi0 = default_parallel_spinor(m)
    quad = quad or ShellQuadrature.for_metric(m)
    flux = mass(m, radii, quad, threads=threads, step=step, check_decay=False)
    omega, vol = flux.omega_k, flux.fiber_volume
    norm2 = lambda X: np.real(_inner(phi0.evaluate(X), phi0.evaluate(X)))  # noqa: E731
    density = _boundary_density(m, phi0, step)
    red_density = lambda X: 0.25 * _flux_density(m, step)(X) * norm2(X)  # noqa: E731
    boundary = np.array([quad.integrate(density, R, threads) for R in radii])
    reduced = np.array([quad.integrate(red_density, R, threads) for R in radii])
    gap = np.abs(boundary - reduced)
    keep = gap > 1e-300
    gap_exp = loglog_fit(radii[keep], gap[keep]).decay_exponent if keep.sum() >= 2 else math.inf
    bmass = boundary / (omega * vol)
    fit, _ = _extrapolate(radii, bmass)
    return BoundaryReport(
        radii=radii,
        boundary=boundary,
        reduced=reduced,
        gap=gap,
        gap_exponent=gap_exp,
        boundary_mass=bmass,
        boundary_mass_limit=fit.limit if fit.converged else math.nan,
        flux_mass=flux,
        omega_k=omega,
        fiber_volume=vol,
    )
