"""Metrics on (R^k minus a ball) x flat fibre charts: derivatives, curvature,
orthonormal frames and asymptotic decay fits.

Index conventions follow the usual product split: ``i, j`` run over the
Euclidean factor (the first ``dim_base`` coordinates), ``alpha`` over the
fibre, and ``a, b`` over everything.  Derivative arrays put the derivative
index first: ``dg[..., k, i, j] = d_k g_ij``.

Every evaluator is vectorised: points are ``(N, n)`` arrays.  Public
functions also accept a single ``(n,)`` point and then drop the batch axis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .fits import loglog_fit

__all__ = [
    "Chart",
    "MetricField",
    "CurvatureData",
    "FrameData",
    "DecayReport",
    "ChartError",
    "NotPositiveDefinite",
    "default_step",
    "metric_derivatives",
    "christoffel",
    "curvature",
    "orthonormal_frames",
    "decay_order",
    "shell_samples",
]

DEFAULT_RELATIVE_STEP = 1e-4
NOISE_FLOOR = 1e-12

Evaluator = Callable[[np.ndarray], np.ndarray]


class ChartError(ValueError):
    """A stencil or sample point left the chart."""


class NotPositiveDefinite(ValueError):
    pass


@dataclass(frozen=True)
class Chart:
    """Coordinates ``(x_1..x_k, y_1..y_d)`` on ``(R^k - B_{r_min}) x T^d``."""

    dim_base: int
    dim_fiber: int = 0
    fiber_periods: tuple = ()
    r_min: float = 0.0

    def __post_init__(self):
        if self.dim_base < 1:
            raise ValueError("dim_base must be at least 1")
        if self.dim_fiber < 0:
            raise ValueError("dim_fiber must be non-negative")
        if len(self.fiber_periods) != self.dim_fiber:
            raise ValueError(
                f"expected {self.dim_fiber} fibre periods, got {len(self.fiber_periods)}"
            )
        if any(p <= 0 for p in self.fiber_periods):
            raise ValueError("fibre periods must be positive")
        object.__setattr__(self, "fiber_periods", tuple(float(p) for p in self.fiber_periods))

    @property
    def dim(self) -> int:
        return self.dim_base + self.dim_fiber

    @property
    def fiber_volume(self) -> float:
        # flat fibres with unit coordinate metric
        return float(np.prod(self.fiber_periods)) if self.dim_fiber else 1.0

    def radius(self, x: np.ndarray) -> np.ndarray:
        return np.linalg.norm(np.asarray(x)[..., : self.dim_base], axis=-1)


@dataclass(frozen=True, eq=False)
class MetricField:
    """A metric given by closed-form evaluators on a chart.

    ``metric(X)`` maps ``(N, n)`` points to ``(N, n, n)`` matrices.
    ``metric_d1`` (optional) returns exact first derivatives ``(N, n, n, n)``
    and takes precedence over finite differences.  ``background`` is the
    product model metric g0 the end is asymptotic to.
    """

    chart: Chart
    metric: Evaluator
    metric_d1: Optional[Evaluator] = None
    background: Optional[Evaluator] = None
    background_d1: Optional[Evaluator] = None
    decay_order_claimed: float = math.inf
    name: str = "metric"
    params: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.chart.dim

    def __call__(self, x) -> np.ndarray:
        X, single = _points(x, self.dim)
        return _unbatch(_finite(self.metric(X), "metric"), single)

    def perturbation(self, x) -> np.ndarray:
        """``h = g - g0`` in coordinate components."""
        if self.background is None:
            raise ValueError(f"metric {self.name!r} has no background")
        X, single = _points(x, self.dim)
        return _unbatch(self.metric(X) - self.background(X), single)


# ---------------------------------------------------------------------------
# helpers


def _points(x, dim: int):
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.ndim != 2 or X.shape[1] != dim:
        raise ValueError(f"points must have shape (N, {dim}), got {np.shape(x)}")
    return X, single


def _unbatch(arr, single: bool):
    return arr[0] if single else arr


def _finite(arr, what: str):
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"non-finite {what} values")
    return arr


def default_step(chart: Chart, X: np.ndarray, relative: float = DEFAULT_RELATIVE_STEP) -> np.ndarray:
    """Per-point step ``relative * max(1, r)``."""
    return relative * np.maximum(1.0, chart.radius(X))


def _resolve_step(chart: Chart, X: np.ndarray, step) -> np.ndarray:
    if step is None:
        return default_step(chart, X)
    if callable(step):
        step = step(X)
    h = np.broadcast_to(np.asarray(step, dtype=float), (X.shape[0],)).copy()
    if np.any(h <= 0):
        raise ValueError("finite-difference step must be positive")
    return h


def _check_stencil(chart: Chart, X: np.ndarray, h: np.ndarray, reach: float = 2.0) -> None:
    if chart.r_min > 0 and np.any(chart.radius(X) - reach * h <= chart.r_min):
        raise ChartError(
            f"finite-difference stencil leaves the chart (r_min = {chart.r_min})"
        )


def _central_d1(fn: Evaluator, X: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Central differences of a tensor-valued evaluator along every coordinate.

    Returns ``(N, n) + fn(X).shape[1:]`` with the derivative index second.
    """
    n = X.shape[1]
    out = []
    for k in range(n):
        shift = np.zeros_like(X)
        shift[:, k] = h
        diff = fn(X + shift) - fn(X - shift)
        out.append(diff / (2.0 * h).reshape((-1,) + (1,) * (diff.ndim - 1)))
    return np.stack(out, axis=1)


def _central_d2(fn: Evaluator, X: np.ndarray, h: np.ndarray) -> np.ndarray:
    n = X.shape[1]
    f0 = fn(X)
    hh = h.reshape((-1,) + (1,) * (f0.ndim - 1))
    out = np.empty((X.shape[0], n, n) + f0.shape[1:])
    unit = np.eye(n)
    for k in range(n):
        ek = unit[k] * h[:, None]
        out[:, k, k] = (fn(X + ek) - 2.0 * f0 + fn(X - ek)) / hh**2
        for l in range(k + 1, n):
            el = unit[l] * h[:, None]
            val = (fn(X + ek + el) - fn(X + ek - el) - fn(X - ek + el) + fn(X - ek - el)) / (4.0 * hh**2)
            out[:, k, l] = val
            out[:, l, k] = val
    return out


def _derivatives(fn, fn_d1, chart, X, order, step):
    h = _resolve_step(chart, X, step)
    _check_stencil(chart, X, h)
    if fn_d1 is not None:
        d1 = _finite(fn_d1(X), "metric derivative")
        d2 = _central_d1(fn_d1, X, h) if order == 2 else None
    else:
        d1 = _finite(_central_d1(fn, X, h), "metric derivative")
        d2 = _central_d2(fn, X, h) if order == 2 else None
    if d2 is not None:
        d2 = _finite(d2, "metric second derivative")
    return d1, d2


def metric_derivatives(m: MetricField, x, order: int = 1, step=None):
    """First (and optionally second) coordinate derivatives of the metric.

    Exact first derivatives are used when the model supplies them; second
    derivatives are central differences of those (or second differences of
    the metric itself).  Truncation error is O(step**2).

    Returns ``dg`` for ``order=1`` and ``(dg, ddg)`` for ``order=2`` with
    ``ddg[..., l, k, i, j] = d_l d_k g_ij``.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    X, single = _points(x, m.dim)
    d1, d2 = _derivatives(m.metric, m.metric_d1, m.chart, X, order, step)
    if order == 1:
        return _unbatch(d1, single)
    return _unbatch(d1, single), _unbatch(d2, single)


def _background_derivatives(m: MetricField, X, order, step):
    if m.background is None:
        raise ValueError(f"metric {m.name!r} has no background")
    return _derivatives(m.background, m.background_d1, m.chart, X, order, step)


# ---------------------------------------------------------------------------
# curvature


def christoffel(g: np.ndarray, dg: np.ndarray) -> np.ndarray:
    """``Gamma[..., c, a, b]`` (upper index first) from the metric and ``d_k g_ij``."""
    ginv = np.linalg.inv(g)
    lower = 0.5 * (
        np.einsum("...adb->...dab", dg) + np.einsum("...bda->...dab", dg) - dg
    )
    return np.einsum("...cd,...dab->...cab", ginv, lower)


@dataclass(frozen=True)
class CurvatureData:
    """Coordinate components at one or more points.

    ``riemann[a, b, c, d] = <R(d_a, d_b) d_c, d_d>`` with
    ``R(X, Y) = [nabla_X, nabla_Y] - nabla_[X,Y]``; the round sphere has
    positive Ricci and scalar curvature in this convention.
    """

    metric: np.ndarray
    christoffel: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: np.ndarray

    def bianchi_residual(self) -> np.ndarray:
        R = self.riemann
        cyc = R + np.einsum("...bcad->...abcd", R) + np.einsum("...cabd->...abcd", R)
        return np.max(np.abs(cyc), axis=(-4, -3, -2, -1))

    def antisymmetry_residual(self) -> np.ndarray:
        R = self.riemann
        r1 = np.abs(R + np.swapaxes(R, -4, -3))
        r2 = np.abs(R + np.swapaxes(R, -2, -1))
        return np.maximum(r1.max(axis=(-4, -3, -2, -1)), r2.max(axis=(-4, -3, -2, -1)))

    def trace_residual(self) -> np.ndarray:
        ginv = np.linalg.inv(self.metric)
        return np.abs(self.scalar - np.einsum("...ab,...ab->...", ginv, self.ricci))


def _curvature_batch(g, dg, ddg) -> CurvatureData:
    ginv = np.linalg.inv(g)
    ddg = 0.5 * (ddg + np.swapaxes(ddg, -4, -3))
    lower = 0.5 * (np.einsum("...adb->...dab", dg) + np.einsum("...bda->...dab", dg) - dg)
    gamma = np.einsum("...cd,...dab->...cab", ginv, lower)
    # all-lower form keeps the pair antisymmetries and Bianchi exact
    second = 0.5 * (
        np.einsum("...acbd->...abcd", ddg)
        - np.einsum("...adbc->...abcd", ddg)
        - np.einsum("...bcad->...abcd", ddg)
        + np.einsum("...bdac->...abcd", ddg)
    )
    quad = np.einsum("...pbd,...pac->...abcd", lower, gamma) - np.einsum("...pad,...pbc->...abcd", lower, gamma)
    Rm = second + quad
    ricci = np.einsum("...ad,...abcd->...bc", ginv, Rm)
    scalar = np.einsum("...bc,...bc->...", ginv, ricci)
    return CurvatureData(g, gamma, Rm, ricci, scalar)


def curvature(m: MetricField, x, step=None) -> CurvatureData:
    """Christoffel symbols, Riemann, Ricci and scalar curvature at ``x``."""
    X, single = _points(x, m.dim)
    g = _finite(m.metric(X), "metric")
    if np.any(np.abs(np.linalg.det(g)) < 1e-300):
        raise np.linalg.LinAlgError("singular metric")
    dg, ddg = _derivatives(m.metric, m.metric_d1, m.chart, X, 2, step)
    data = _curvature_batch(g, dg, ddg)
    if single:
        data = CurvatureData(*(getattr(data, f)[0] for f in data.__dataclass_fields__))
    return data


# ---------------------------------------------------------------------------
# frames


def _inv_sqrt(G: np.ndarray, dG: Optional[np.ndarray] = None):
    """Symmetric inverse square root of SPD matrices and its derivative.

    ``dG`` carries a derivative axis right after the batch axis; the
    derivative uses the divided-difference (Daleckii-Krein) formula, which is
    exact and well conditioned at repeated eigenvalues.
    """
    lam, Q = np.linalg.eigh(G)
    if np.any(lam <= 0):
        raise NotPositiveDefinite("metric is not positive definite at a queried point")
    root = np.sqrt(lam)
    S = np.einsum("...ik,...k,...jk->...ij", Q, 1.0 / root, Q)
    if dG is None:
        return S, None
    ri = root[..., :, None]
    rj = root[..., None, :]
    L = -1.0 / (ri * rj * (ri + rj))
    Qt_dG_Q = np.einsum("...ia,...kij,...jb->...kab", Q, dG, Q)
    dS = np.einsum("...ia,...kab,...jb->...kij", Q, L[..., None, :, :] * Qt_dG_Q, Q)
    return S, dS


@dataclass(frozen=True)
class FrameData:
    """Frames as matrices whose columns are frame vectors in coordinates.

    ``e0`` is g0-orthonormal, ``e`` is g-orthonormal and ``e = e0 @ A``.
    """

    e0: np.ndarray
    e: np.ndarray
    A: np.ndarray

    def gauge_endomorphism(self) -> np.ndarray:
        """The tangent map sending ``e0_a`` to ``e_a`` in coordinates."""
        return self.e @ np.linalg.inv(self.e0)


@dataclass(frozen=True)
class _FrameField:
    """Frames together with their exact coordinate derivatives (batched)."""

    g: np.ndarray
    dg: np.ndarray
    g0: np.ndarray
    dg0: np.ndarray
    e0: np.ndarray
    de0: np.ndarray
    e: np.ndarray
    de: np.ndarray
    A: np.ndarray
    dA: np.ndarray


def _frame_field(m: MetricField, X: np.ndarray, step=None) -> _FrameField:
    n = m.dim
    g = _finite(m.metric(X), "metric")
    dg, _ = _derivatives(m.metric, m.metric_d1, m.chart, X, 1, step)
    if m.background is None:
        g0 = np.broadcast_to(np.eye(n), g.shape).copy()
        dg0 = np.zeros_like(dg)
    else:
        g0 = m.background(X)
        dg0, _ = _background_derivatives(m, X, 1, step)
    e0, de0 = _inv_sqrt(g0, dg0)
    G = np.einsum("...ia,...ij,...jb->...ab", e0, g, e0)
    dG = (
        np.einsum("...kia,...ij,...jb->...kab", de0, g, e0)
        + np.einsum("...ia,...kij,...jb->...kab", e0, dg, e0)
        + np.einsum("...ia,...ij,...kjb->...kab", e0, g, de0)
    )
    A, dA = _inv_sqrt(G, dG)
    e = e0 @ A
    de = np.einsum("...kia,...ab->...kib", de0, A) + np.einsum("...ia,...kab->...kib", e0, dA)
    return _FrameField(g, dg, g0, dg0, e0, de0, e, de, A, dA)


def orthonormal_frames(m: MetricField, x, step=None) -> FrameData:
    """Background frame ``e0`` and its symmetric g-orthonormalisation ``e``.

    Symmetric (Loewdin) orthonormalisation gives
    ``e_a = e0_a - 1/2 h_ab e0_b + O(|h|^2)`` to first order, which
    Gram-Schmidt would not.
    """
    if m.background is None:
        raise ValueError(f"metric {m.name!r} has no background to build e0 from")
    X, single = _points(x, m.dim)
    ff = _frame_field(m, X, step)
    return FrameData(*(_unbatch(a, single) for a in (ff.e0, ff.e, ff.A)))


# ---------------------------------------------------------------------------
# decay


def shell_samples(chart: Chart, radius: float, count: int, rng: np.random.Generator) -> np.ndarray:
    """Random points on ``S_R x T^d``: uniform directions, uniform fibre coordinates."""
    u = rng.standard_normal((count, chart.dim_base))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    pts = [radius * u]
    if chart.dim_fiber:
        pts.append(rng.uniform(0.0, 1.0, (count, chart.dim_fiber)) * np.array(chart.fiber_periods))
    return np.hstack(pts)


def background_covariant_h(m: MetricField, X: np.ndarray, step=None):
    """``h`` and ``nabla0 h`` in components along the background frame ``e0``.

    Returns ``(H, DH)`` with ``H[..., a, b]`` and ``DH[..., c, a, b]`` the
    derivative along ``e0_c``.
    """
    if m.background is None:
        raise ValueError(f"metric {m.name!r} has no background")
    g = m.metric(X)
    g0 = m.background(X)
    dg, _ = _derivatives(m.metric, m.metric_d1, m.chart, X, 1, step)
    dg0, _ = _background_derivatives(m, X, 1, step)
    e0, _ = _inv_sqrt(g0)
    h = g - g0
    dh = dg - dg0
    gam0 = christoffel(g0, dg0)
    cov = dh - np.einsum("...dca,...db->...cab", gam0, h) - np.einsum("...dcb,...ad->...cab", gam0, h)
    H = np.einsum("...ia,...ij,...jb->...ab", e0, h, e0)
    DH = np.einsum("...kc,...ia,...kij,...jb->...cab", e0, e0, cov, e0)
    return H, DH


@dataclass(frozen=True)
class DecayReport:
    """Sup-norms of ``h``, ``nabla0 h``, ``nabla0 nabla0 h`` on shells and fitted orders.

    ``orders`` maps each condition to the fitted tau (already shifted by the
    derivative count), ``inf`` when the quantity sits below the noise floor.
    """

    radii: np.ndarray
    norms: dict
    orders: dict
    tau: float
    threshold: float
    mass_well_defined: bool
    exact_background: bool
    message: str


def decay_order(
    m: MetricField,
    radii,
    samples: int = 64,
    seed: int = 0,
    step=None,
    noise_floor: float = NOISE_FLOOR,
) -> DecayReport:
    """Fit the asymptotic order tau from sup-norms over random shell points.

    Second derivatives are central differences of the first, taken along
    the (parallel, for product backgrounds) frame ``e0``.
    """
    radii = np.asarray(radii, dtype=float)
    if radii.size < 3:
        raise ValueError("decay_order needs at least three radii")
    if not np.all(np.diff(radii) > 0):
        raise ValueError("radii must be strictly increasing")
    if m.background is None:
        raise ValueError(f"metric {m.name!r} has no background")
    norms = {"h": [], "dh": [], "ddh": []}
    for R in radii:
        # same directions on every shell, so anisotropic h does not add fit noise
        X = shell_samples(m.chart, R, samples, np.random.default_rng(seed))
        H, DH = background_covariant_h(m, X, step)
        h = _resolve_step(m.chart, X, step)
        e0, _ = _inv_sqrt(m.background(X))
        dd = []
        for c in range(m.dim):
            shift = e0[:, :, c] * h[:, None]
            plus = background_covariant_h(m, X + shift, step)[1]
            minus = background_covariant_h(m, X - shift, step)[1]
            dd.append((plus - minus) / (2.0 * h)[:, None, None, None])
        DDH = np.stack(dd, axis=1)
        norms["h"].append(np.max(np.abs(H)))
        norms["dh"].append(np.max(np.abs(DH)))
        norms["ddh"].append(np.max(np.abs(DDH)))

    orders = {}
    for shift, key in enumerate(("h", "dh", "ddh")):
        vals = np.asarray(norms[key])
        keep = vals > noise_floor
        if keep.sum() < 2:
            orders[key] = math.inf
        else:
            orders[key] = loglog_fit(radii[keep], vals[keep]).decay_exponent - shift
    tau = min(orders.values())
    k = m.chart.dim_base
    threshold = (k - 2) / 2
    exact = math.isinf(tau)
    well = tau > threshold
    if exact:
        msg = "exact background, tau = inf"
    elif well:
        msg = f"tau = {tau:.4g} > (k-2)/2 = {threshold:.4g}: mass well defined"
    else:
        msg = f"tau = {tau:.4g} <= (k-2)/2 = {threshold:.4g}: mass possibly coordinate-dependent"
    return DecayReport(
        radii=radii,
        norms={key: np.asarray(v) for key, v in norms.items()},
        orders=orders,
        tau=tau,
        threshold=threshold,
        mass_well_defined=well,
        exact_background=exact,
        message=msg,
    )
