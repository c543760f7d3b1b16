"""Closed-form metric zoo with exact first derivatives.

All models live on ``(R^k - B) x T^d`` in Cartesian base coordinates and
flat periodic fibre coordinates with unit coordinate metric, so the product
background is the identity matrix and its orthonormal frame is the
coordinate frame.  Flat tori stand in for the compact special-holonomy
fibre: the only property the computations use is that the fibre carries
parallel spinors, which flat tori do.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Chart, MetricField

__all__ = [
    "MODEL_NAMES",
    "PERTURBATION_SHAPES",
    "ModelSpec",
    "build_model",
    "rn_horizon_radius",
    "rn_circle_length",
    "rn_charge_for_circle",
    "rn_mass_closed_form",
    "perturbed_product_mass",
]

MODEL_NAMES = ("flat", "product_flat", "schwarzschild_slice", "euclidean_rn", "perturbed_product")
PERTURBATION_SHAPES = ("trace", "mixing", "fiber")

_DEFAULTS = {
    "flat": {"k": 3, "fiber_periods": ()},
    "product_flat": {"k": 3, "fiber_periods": (2 * math.pi,)},
    "schwarzschild_slice": {"m": 1.0},
    "euclidean_rn": {"m": 1.0, "q": 1.0, "margin": 0.1},
    "perturbed_product": {
        "k": 3,
        "fiber_periods": (2 * math.pi,),
        "eps": 0.1,
        "tau": 2.0,
        "shape": "trace",
        "r_min": 1.0,
    },
}


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    name: str
    params: dict = field(default_factory=dict)

    def resolved(self) -> dict:
        if self.name not in MODEL_NAMES:
            raise ModelError(f"unknown model {self.name!r}; choose from {', '.join(MODEL_NAMES)}")
        out = dict(_DEFAULTS[self.name])
        unknown = set(self.params) - set(out) - ({"q2"} if self.name == "euclidean_rn" else set())
        if self.name == "schwarzschild_slice":
            unknown -= {"r_min"}
        if unknown:
            raise ModelError(f"unknown parameters for {self.name}: {sorted(unknown)}")
        if self.name == "euclidean_rn" and "q" in self.params and "q2" in self.params:
            raise ModelError("give either q or q2, not both")
        out.update(self.params)
        if "fiber_periods" in out:
            out["fiber_periods"] = tuple(float(p) for p in out["fiber_periods"])
        return out


def build_model(spec: ModelSpec) -> MetricField:
    p = spec.resolved()
    return _BUILDERS[spec.name](p)


def _identity_fields(n: int):
    def metric(X):
        return np.broadcast_to(np.eye(n), (X.shape[0], n, n)).copy()

    def d1(X):
        return np.zeros((X.shape[0], n, n, n))

    return metric, d1


def _flat(p) -> MetricField:
    k = int(p["k"])
    periods = tuple(p["fiber_periods"])
    chart = Chart(dim_base=k, dim_fiber=len(periods), fiber_periods=periods)
    metric, d1 = _identity_fields(chart.dim)
    return MetricField(
        chart=chart,
        metric=metric,
        metric_d1=d1,
        background=metric,
        background_d1=d1,
        decay_order_claimed=math.inf,
        name="flat" if not periods else "product_flat",
        params=p,
    )


def _radial(X, k):
    x = X[:, :k]
    r = np.linalg.norm(x, axis=1)
    return x, r, x / r[:, None]


def _schwarzschild(p) -> MetricField:
    """Time-symmetric Schwarzschild slice ``(1 + m/2r)^4 delta`` on R^3."""
    mass = float(p["m"])
    r_min = float(p.get("r_min", max(abs(mass), 1e-3)))
    if mass < 0 and r_min <= abs(mass) / 2:
        raise ModelError("r_min must exceed |m|/2 for negative m")
    chart = Chart(dim_base=3, r_min=r_min)
    eye = np.eye(3)

    def metric(X):
        _, r, _ = _radial(X, 3)
        psi = 1.0 + mass / (2.0 * r)
        return psi[:, None, None] ** 4 * eye

    def d1(X):
        _, r, n = _radial(X, 3)
        psi = 1.0 + mass / (2.0 * r)
        dpsi = -mass / (2.0 * r**2)[:, None] * n
        return (4.0 * psi**3)[:, None, None, None] * dpsi[:, :, None, None] * eye

    bg, bg_d1 = _identity_fields(3)
    return MetricField(chart, metric, d1, bg, bg_d1, 1.0, "schwarzschild_slice", p)


def rn_horizon_radius(m: float, q: float) -> float:
    """``r_+ = m + sqrt(m^2 + q^2)``; must be positive."""
    rp = m + math.sqrt(m * m + q * q)
    if not rp > 0 or not rp > m:
        raise ModelError(f"(m, q) = ({m}, {q}) gives no admissible r_+ (need r_+ > max(0, m))")
    return rp


def rn_circle_length(m: float, q: float) -> float:
    """Period of theta that makes the metric smooth at ``r = r_+``."""
    rp = rn_horizon_radius(m, q)
    return 2.0 * math.pi * rp**2 / (rp - m)


def rn_charge_for_circle(m: float, length: float) -> float:
    """``q >= 0`` giving circle length ``length`` at fixed ``m``."""
    if length <= 0:
        raise ModelError("circle length must be positive")
    disc = length * length - 8.0 * math.pi * length * m
    if disc < 0:
        raise ModelError(f"no solution for m = {m} at circle length {length}")
    rp = (length + math.sqrt(disc)) / (4.0 * math.pi)
    q2 = rp * rp - 2.0 * m * rp
    if q2 < 0:
        raise ModelError(f"no real charge for m = {m} at circle length {length}")
    return math.sqrt(q2)


def rn_mass_closed_form(m: float, q: float) -> float:
    """Closed-form mass ``m (r_+ - m) / (4 pi r_+^2)`` of the Euclidean RN soliton.

    This is ``m / (2 l)`` with ``l`` the circle length.  The normalized flux
    computed by :func:`kkmass.mass.mass` converges to ``m / 2`` instead, a
    factor ``l`` larger; the CLI reports both and their ratio.
    """
    rp = rn_horizon_radius(m, q)
    return 0.5 * m * (rp - m) / (2.0 * math.pi * rp**2)


def _euclidean_rn(p) -> MetricField:
    """Euclidean Reissner-Nordstrom on ``R^2 x S^2``, written on its end.

    ``V dtheta^2 + V^{-1} dr^2 + r^2 dOmega^2`` with ``V = 1 - 2m/r - q^2/r^2``
    becomes ``delta_ij + (1/V - 1) n_i n_j`` on the base (``x = r n``) and
    ``g_theta_theta = V`` on the circle.  ``theta`` is already an arclength
    coordinate at infinity, so the background is R^3 x S^1 of length
    ``2 pi r_+^2 / (r_+ - m)``.
    """
    mass = float(p["m"])
    if "q2" in p:
        q2 = float(p["q2"])
        if q2 < 0:
            raise ModelError("q2 must be non-negative")
        q = math.sqrt(q2)
    else:
        q = float(p["q"])
    rp = rn_horizon_radius(mass, q)
    length = 2.0 * math.pi * rp**2 / (rp - mass)
    margin = float(p["margin"])
    if margin <= 0:
        raise ModelError("margin must be positive")
    chart = Chart(dim_base=3, dim_fiber=1, fiber_periods=(length,), r_min=rp * (1.0 + margin))
    q2 = q * q

    def metric(X):
        _, r, n = _radial(X, 3)
        V = 1.0 - 2.0 * mass / r - q2 / r**2
        g = np.zeros((X.shape[0], 4, 4))
        g[:, :3, :3] = np.eye(3) + (1.0 / V - 1.0)[:, None, None] * n[:, :, None] * n[:, None, :]
        g[:, 3, 3] = V
        return g

    def d1(X):
        _, r, n = _radial(X, 3)
        V = 1.0 - 2.0 * mass / r - q2 / r**2
        dV = 2.0 * mass / r**2 + 2.0 * q2 / r**3
        f = 1.0 / V - 1.0
        df = -dV / V**2
        dn = (np.eye(3) - n[:, :, None] * n[:, None, :]) / r[:, None, None]  # dn[k, i] = d_k n_i
        out = np.zeros((X.shape[0], 4, 4, 4))
        out[:, :3, :3, :3] = (
            df[:, None, None, None] * n[:, :, None, None] * n[:, None, :, None] * n[:, None, None, :]
            + f[:, None, None, None] * (dn[:, :, :, None] * n[:, None, None, :] + n[:, None, :, None] * dn[:, :, None, :])
        )
        out[:, :3, 3, 3] = dV[:, None] * n
        return out

    bg, bg_d1 = _identity_fields(4)
    params = dict(p, q=q, r_plus=rp, circle_length=length)
    return MetricField(chart, metric, d1, bg, bg_d1, 1.0, "euclidean_rn", params)


def _perturbed_product(p) -> MetricField:
    """``delta + eps r^-tau S`` on ``R^k x T^d`` with three shapes for ``S``.

    * ``trace``: ``S = identity`` (every diagonal entry, fibre included)
    * ``mixing``: ``S_{j,alpha_0} = S_{alpha_0,j} = n_j`` (base-fibre mixing)
    * ``fiber``: ``S_{alpha,alpha} = 1`` on the fibre block only
    """
    k = int(p["k"])
    periods = tuple(p["fiber_periods"])
    eps, tau = float(p["eps"]), float(p["tau"])
    shape = p["shape"]
    r_min = float(p["r_min"])
    if shape not in PERTURBATION_SHAPES:
        raise ModelError(f"unknown perturbation shape {shape!r}")
    if tau <= 0:
        raise ModelError("tau must be positive")
    if r_min <= 0:
        raise ModelError("r_min must be positive")
    if abs(eps) * r_min**-tau >= 1.0:
        raise ModelError("eps too large: metric may fail to be positive definite on the chart")
    if shape in ("mixing", "fiber") and not periods:
        raise ModelError(f"shape {shape!r} needs a fibre")
    chart = Chart(dim_base=k, dim_fiber=len(periods), fiber_periods=periods, r_min=r_min)
    n = chart.dim

    def shape_tensor(X):
        S = np.zeros((X.shape[0], n, n))
        dS = np.zeros((X.shape[0], n, n, n))
        if shape == "trace":
            S[:] = np.eye(n)
        elif shape == "fiber":
            S[:, k:, k:] = np.eye(n - k)
        else:
            _, r, nv = _radial(X, k)
            S[:, :k, k] = nv
            S[:, k, :k] = nv
            dn = (np.eye(k) - nv[:, :, None] * nv[:, None, :]) / r[:, None, None]
            dS[:, :k, :k, k] = dn
            dS[:, :k, k, :k] = dn
        return S, dS

    def metric(X):
        _, r, _ = _radial(X, k)
        S, _ = shape_tensor(X)
        return np.eye(n) + (eps * r**-tau)[:, None, None] * S

    def d1(X):
        _, r, nv = _radial(X, k)
        S, dS = shape_tensor(X)
        radial = np.zeros((X.shape[0], n))
        radial[:, :k] = (-tau * eps * r ** (-tau - 1))[:, None] * nv
        return radial[:, :, None, None] * S[:, None] + (eps * r**-tau)[:, None, None, None] * dS

    bg, bg_d1 = _identity_fields(n)
    return MetricField(chart, metric, d1, bg, bg_d1, tau, "perturbed_product", p)


def perturbed_product_mass(params: dict, radius: float) -> float:
    """Exact generalized-mass flux at finite radius for a perturbed product.

    The flux integrand is linear in the metric, so for ``eps r^-tau S`` the
    shell value is ``c * tau * eps * R^(k-2-tau) / 4`` with ``c = n - 1``
    (trace), ``c = d`` (fibre) and ``c = 0`` (mixing).
    """
    p = ModelSpec("perturbed_product", params).resolved()
    k, d = int(p["k"]), len(p["fiber_periods"])
    coeff = {"trace": k + d - 1, "fiber": d, "mixing": 0}[p["shape"]]
    return coeff * float(p["tau"]) * float(p["eps"]) * radius ** (k - 2 - float(p["tau"])) / 4.0


_BUILDERS = {
    "flat": _flat,
    "product_flat": _flat,
    "schwarzschild_slice": _schwarzschild,
    "euclidean_rn": _euclidean_rn,
    "perturbed_product": _perturbed_product,
}
