"""Identity checks shared by the CLI and the test-suite."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clifford import CliffordRep, build_clifford
from .fits import loglog_fit
from .geometry import MetricField, shell_samples
from .mass import divergence_identity_residual
from .spin import (
    SpinorField,
    connection_difference,
    connection_difference_from_torsion,
    covariant_derivative,
    default_parallel_spinor,
    lichnerowicz_contraction,
    ricci_identity_sides,
    spin_connection,
)

__all__ = [
    "clifford_residuals",
    "smooth_test_spinors",
    "RefinementResult",
    "divergence_refinement",
    "identity_residuals",
    "verification_points",
    "ShellDecay",
    "connection_gap_decay",
    "parallel_spinor_decay",
]


def clifford_residuals(rep: CliffordRep) -> dict:
    """Max-norm residuals of the defining relations and the commutator identities."""
    g = rep.gamma
    n = rep.dim
    eye = rep.identity
    prod = rep.products()
    anti = prod + prod.transpose(1, 0, 2, 3) + 2.0 * np.eye(n)[:, :, None, None] * eye
    skew = g + np.conj(np.transpose(g, (0, 2, 1)))
    comm = rep.commutators()
    comm_skew = comm + np.conj(np.transpose(comm, (0, 1, 3, 2)))
    split = prod - (0.5 * comm - np.eye(n)[:, :, None, None] * eye)
    return {
        "anticommutation": float(np.max(np.abs(anti))),
        "skew_hermitian": float(np.max(np.abs(skew))),
        "commutator_skew_hermitian": float(np.max(np.abs(comm_skew))),
        "product_split": float(np.max(np.abs(split))),
    }


def smooth_test_spinors(rep: CliffordRep, count: int = 3, seed: int = 0) -> list:
    """Smooth non-polynomial spinor fields with exact finite-difference error terms.

    Component ``j`` is ``sum_t c_t exp(i k_t . x) / (1 + 0.1 |x - s_t|^2)``
    with random complex amplitudes and wave vectors of size O(1).
    """
    rng = np.random.default_rng(seed)
    fields = []
    for _ in range(count):
        terms = 2
        amp = rng.standard_normal((terms, rep.fiber_dim)) + 1j * rng.standard_normal((terms, rep.fiber_dim))
        wave = rng.uniform(-1.0, 1.0, (terms, rep.dim))
        centre = rng.uniform(-1.0, 1.0, (terms, rep.dim))

        def evaluate(X, amp=amp, wave=wave, centre=centre):
            out = np.zeros((X.shape[0], rep.fiber_dim), dtype=complex)
            for c, k, s in zip(amp, wave, centre):
                env = 1.0 / (1.0 + 0.1 * np.sum((X - s) ** 2, axis=1))
                out += (np.exp(1j * X @ k) * env)[:, None] * c
            return out

        fields.append(SpinorField(rep, evaluate))
    return fields


@dataclass(frozen=True)
class RefinementResult:
    steps: np.ndarray
    residuals: np.ndarray  # [spinor, step] sup over points
    orders: np.ndarray  # fitted order per spinor

    @property
    def min_order(self) -> float:
        return float(np.min(self.orders))


def divergence_refinement(m: MetricField, spinors, points: np.ndarray, steps) -> RefinementResult:
    """Sup-norm divergence-identity residual at each step and its fitted order."""
    steps = np.asarray(steps, dtype=float)
    res = np.array(
        [[np.max(divergence_identity_residual(m, phi, points, step=h).residual) for h in steps] for phi in spinors]
    )
    orders = np.array([loglog_fit(steps, row).slope for row in res])
    return RefinementResult(steps, res, orders)


def identity_residuals(m: MetricField, points: np.ndarray, rep: CliffordRep | None = None, seed: int = 0) -> dict:
    """Pointwise algebraic identities on a metric (max over ``points``)."""
    rep = rep or build_clifford(m.dim)
    rng = np.random.default_rng(seed)
    phi = rng.standard_normal(rep.fiber_dim) + 1j * rng.standard_normal(rep.fiber_dim)
    phi /= np.linalg.norm(phi)
    sc = spin_connection(m, points)
    out = {"omega_antisymmetry": float(np.max(sc.antisymmetry_residual()))}
    lhs, rhs = ricci_identity_sides(m, points, phi, rep)
    out["ricci_identity"] = float(np.max(np.abs(lhs - rhs)))
    contraction, R = lichnerowicz_contraction(m, points, rep)
    target = 0.25 * R[:, None, None] * rep.identity
    out["lichnerowicz_contraction"] = float(np.max(np.abs(contraction - target)))
    if m.background is not None:
        from_torsion = connection_difference_from_torsion(m, points)
        out["torsion_consistency"] = float(np.max(np.abs(from_torsion - (sc.omega - sc.omega0))))
    return out


def verification_points(m: MetricField, radius: float, count: int, seed: int) -> np.ndarray:
    return shell_samples(m.chart, radius, count, np.random.default_rng(seed))


@dataclass(frozen=True)
class ShellDecay:
    """Sup-norm of a quantity over shell samples, with its log-log decay rate."""

    radii: np.ndarray
    norms: np.ndarray
    exponent: float


def _shell_sup(m: MetricField, radii, samples: int, seed: int, fn) -> ShellDecay:
    radii = np.asarray(radii, dtype=float)
    norms = []
    for R in radii:
        X = shell_samples(m.chart, R, samples, np.random.default_rng(seed))
        norms.append(float(np.max(fn(X))))
    norms = np.array(norms)
    return ShellDecay(radii, norms, loglog_fit(radii, norms).decay_exponent)


def connection_gap_decay(m: MetricField, radii, samples: int = 16, seed: int = 0, step=None) -> ShellDecay:
    """Exact spinor connection difference minus its first-order term, on shells."""
    rep = build_clifford(m.dim)

    def gap(X):
        exact, leading = connection_difference(m, X, rep, step=step)
        return np.max(np.abs(exact - leading), axis=(-3, -2, -1))

    return _shell_sup(m, radii, samples, seed, gap)


def parallel_spinor_decay(m: MetricField, radii, samples: int = 16, seed: int = 0, step=None) -> ShellDecay:
    """``sup |nabla phi0|`` on shells for the transported background spinor."""
    phi0 = default_parallel_spinor(m)

    def size(X):
        nabla = covariant_derivative(m, phi0, X, step=step)
        return np.sqrt(np.sum(np.abs(nabla) ** 2, axis=(-2, -1)))

    return _shell_sup(m, radii, samples, seed, size)
