"""Spinor covariant derivatives, Dirac operator and the gauge-transported
background connection.

Spinor fields are stored by their components in the g-orthonormal frame
``e`` of :func:`kkmass.geometry.orthonormal_frames`.  The gauge map A is
then the identity on components, so the transported parallel spinor is a
constant-component field.

With ``omega_bc(X) = <nabla_X e_b, e_c>`` and the Clifford convention of
:mod:`kkmass.clifford`, the spinor connection is

    nabla_{e_a} phi = e_a(phi) + 1/4 sum_{b,c} omega_bc(e_a) gamma_b gamma_c phi,

the sign fixed by requiring Clifford multiplication to be parallel.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .clifford import CliffordRep, build_clifford
from .geometry import (
    MetricField,
    _check_stencil,
    _derivatives,
    _frame_field,
    _points,
    _resolve_step,
    _unbatch,
    background_covariant_h,
    christoffel,
    curvature,
)

__all__ = [
    "SpinorField",
    "SpinConnection",
    "constant_spinor",
    "spin_connection",
    "connection_matrices",
    "covariant_derivative",
    "dirac",
    "torsion_tensor",
    "torsion_of_nabla0",
    "connection_difference",
    "connection_difference_from_torsion",
    "approx_parallel_spinor",
    "default_parallel_spinor",
    "spinor_curvature",
    "ricci_identity_sides",
    "lichnerowicz_contraction",
]


@dataclass(frozen=True, eq=False)
class SpinorField:
    """Spinor-valued function: ``evaluate(X)`` maps ``(N, n)`` to ``(N, F)``.

    ``gradient`` optionally returns exact coordinate derivatives with shape
    ``(N, n, F)``; otherwise central differences are used.
    """

    rep: CliffordRep
    evaluate: Callable[[np.ndarray], np.ndarray]
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __call__(self, x) -> np.ndarray:
        X, single = _points(x, self.rep.dim)
        val = np.asarray(self.evaluate(X), dtype=complex)
        if val.shape != (X.shape[0], self.rep.fiber_dim):
            raise ValueError(
                f"spinor evaluator returned shape {val.shape}, expected {(X.shape[0], self.rep.fiber_dim)}"
            )
        return _unbatch(val, single)


def constant_spinor(rep: CliffordRep, components) -> SpinorField:
    comp = np.asarray(components, dtype=complex)
    if comp.shape != (rep.fiber_dim,):
        raise ValueError(f"expected {rep.fiber_dim} components, got shape {comp.shape}")

    def evaluate(X):
        return np.broadcast_to(comp, (X.shape[0], comp.size)).copy()

    def gradient(X):
        return np.zeros((X.shape[0], rep.dim, comp.size), dtype=complex)

    return SpinorField(rep, evaluate, gradient)


@dataclass(frozen=True)
class SpinConnection:
    """``omega[..., a, b, c] = omega_bc(e_a)`` for the Levi-Civita connection
    of g, and ``omega0`` the same for the transported connection
    ``nabla0 = A nabla_g0 A^-1``.
    """

    omega: np.ndarray
    omega0: np.ndarray

    def antisymmetry_residual(self) -> np.ndarray:
        r = np.abs(self.omega + np.swapaxes(self.omega, -1, -2))
        return r.max(axis=(-3, -2, -1))


def _connection_batch(m: MetricField, X, step=None):
    ff = _frame_field(m, X, step)
    gam = christoffel(ff.g, ff.dg)
    gam0 = christoffel(ff.g0, ff.dg0)
    E, E0 = ff.e, ff.e0
    # nabla_{e_a} e_b in coordinates
    v = np.einsum("...na,...nmb->...abm", E, ff.de) + np.einsum("...na,...mnl,...lb->...abm", E, gam, E)
    omega = np.einsum("...abm,...ms,...sc->...abc", v, ff.g, E)
    v0 = np.einsum("...na,...nmb->...abm", E, ff.de0) + np.einsum("...na,...mnl,...lb->...abm", E, gam0, E0)
    omega0 = np.einsum("...abm,...ms,...sc->...abc", v0, ff.g0, E0)
    return ff, omega, omega0


def spin_connection(m: MetricField, x, step=None) -> SpinConnection:
    X, single = _points(x, m.dim)
    _, omega, omega0 = _connection_batch(m, X, step)
    return SpinConnection(_unbatch(omega, single), _unbatch(omega0, single))


def connection_matrices(rep: CliffordRep, omega: np.ndarray) -> np.ndarray:
    """``1/4 sum_bc omega[a, b, c] gamma_b gamma_c`` for every leg ``a``."""
    return 0.25 * np.einsum("...abc,bcij->...aij", omega, rep.products())


def _spinor_gradient(phi: SpinorField, chart, X, step) -> np.ndarray:
    if phi.gradient is not None:
        return np.asarray(phi.gradient(X), dtype=complex)
    h = _resolve_step(chart, X, step)
    _check_stencil(chart, X, h, reach=1.0)
    out = []
    for k in range(X.shape[1]):
        shift = np.zeros_like(X)
        shift[:, k] = h
        out.append((phi.evaluate(X + shift) - phi.evaluate(X - shift)) / (2.0 * h)[:, None])
    return np.stack(out, axis=1)


def _covariant_batch(m: MetricField, phi: SpinorField, X, step=None):
    """``(nabla phi[N, a, F], phi[N, F], frame field, omega)`` at a batch of points."""
    ff, omega, _ = _connection_batch(m, X, step)
    val = np.asarray(phi.evaluate(X), dtype=complex)
    grad = _spinor_gradient(phi, m.chart, X, step)
    frame_deriv = np.einsum("...na,...nf->...af", ff.e, grad)
    conn = connection_matrices(phi.rep, omega)
    nabla = frame_deriv + np.einsum("...aij,...j->...ai", conn, val)
    return nabla, val, ff, omega


def covariant_derivative(m: MetricField, phi: SpinorField, x, direction: Optional[int] = None, step=None):
    """``nabla_{e_a} phi`` in frame components; all legs unless ``direction`` is given."""
    _check_rep(m, phi.rep)
    X, single = _points(x, m.dim)
    nabla, *_ = _covariant_batch(m, phi, X, step)
    if direction is not None:
        if not 0 <= direction < m.dim:
            raise IndexError(f"direction {direction} out of range")
        nabla = nabla[:, direction]
    return _unbatch(nabla, single)


def _dirac_from_nabla(rep: CliffordRep, nabla: np.ndarray) -> np.ndarray:
    return np.einsum("aij,...aj->...i", rep.gamma, nabla)


def dirac(m: MetricField, phi: SpinorField, x, step=None) -> np.ndarray:
    """``D phi = sum_a e_a . nabla_{e_a} phi``."""
    _check_rep(m, phi.rep)
    X, single = _points(x, m.dim)
    nabla, *_ = _covariant_batch(m, phi, X, step)
    return _unbatch(_dirac_from_nabla(phi.rep, nabla), single)


def _check_rep(m: MetricField, rep: CliffordRep) -> None:
    if rep.dim != m.dim:
        raise ValueError(f"Clifford rep of dim {rep.dim} used on a {m.dim}-dimensional metric")


# ---------------------------------------------------------------------------
# transported connection and its torsion


def torsion_tensor(m: MetricField, x, step=None) -> np.ndarray:
    """``T[..., a, b, c] = <T(e_a, e_b), e_c>`` for ``nabla0 = A nabla_g0 A^-1``.

    Uses ``T(X, Y) = -(nabla0_X A) A^-1 Y + (nabla0_Y A) A^-1 X`` with A the
    tangent endomorphism ``e0_a -> e_a``.
    """
    if m.background is None:
        raise ValueError(f"metric {m.name!r} has no background")
    X, single = _points(x, m.dim)
    ff = _frame_field(m, X, step)
    E, E0 = ff.e, ff.e0
    E0inv = np.linalg.inv(E0)
    Aend = E @ E0inv
    dAend = np.einsum("...kib,...bj->...kij", ff.de, E0inv) - np.einsum(
        "...ib,...bc,...kcd,...dj->...kij", E, E0inv, ff.de0, E0inv
    )
    gam0 = christoffel(ff.g0, ff.dg0)
    # (nabla0_k A)^i_j = d_k A^i_j + Gamma0^i_{k l} A^l_j - A^i_l Gamma0^l_{k j}
    cov = dAend + np.einsum("...ikl,...lj->...kij", gam0, Aend) - np.einsum("...il,...lkj->...kij", Aend, gam0)
    Ainv = np.linalg.inv(Aend)
    # (nabla0_{e_a} A) A^-1 e_b, coordinates
    term = np.einsum("...ka,...kij,...jl,...lb->...abi", E, cov, Ainv, E)
    Tcoord = -term + np.swapaxes(term, -3, -2)
    T = np.einsum("...abi,...ij,...jc->...abc", Tcoord, ff.g, E)
    return _unbatch(T, single)


def torsion_of_nabla0(m: MetricField, x, a: int, b: int, step=None) -> np.ndarray:
    """Torsion vector ``T(e_a, e_b)`` in components along the frame ``e``."""
    if not (0 <= a < m.dim and 0 <= b < m.dim):
        raise IndexError("frame index out of range")
    T = torsion_tensor(m, x, step)
    return T[..., a, b, :]


def connection_difference_from_torsion(m: MetricField, x, step=None) -> np.ndarray:
    """``(omega - omega0)[a, b, c]`` recovered purely from the torsion:
    ``2 <nabla0_X Y - nabla_X Y, Z> = T(X,Y,Z) - T(X,Z,Y) - T(Y,Z,X)``.
    """
    T = torsion_tensor(m, x, step)
    return -0.5 * (T - np.swapaxes(T, -1, -2) - np.einsum("...bca->...abc", T))


def connection_difference(m: MetricField, x, rep: Optional[CliffordRep] = None, direction: Optional[int] = None, step=None):
    """Spinor connection difference ``nabla_{e_a} - nabla0_{e_a}``.

    Returns ``(exact, leading)`` fibre matrices of shape ``(..., n, F, F)``
    (or ``(..., F, F)`` for a single ``direction``): the exact
    ``1/4 sum (omega - omega0)_bc(e_a) gamma_b gamma_c`` and the first-order
    ``1/8 sum_{b != c} (nabla0_b g_ac - nabla0_c g_ab) gamma_b gamma_c``,
    which differ by ``O(r^(-2 tau - 1))``.
    """
    if m.background is None:
        raise ValueError(f"metric {m.name!r} has no background")
    rep = rep or build_clifford(m.dim)
    _check_rep(m, rep)
    X, single = _points(x, m.dim)
    _, omega, omega0 = _connection_batch(m, X, step)
    exact = connection_matrices(rep, omega - omega0)
    _, DH = background_covariant_h(m, X, step)
    coeff = np.einsum("...bac->...abc", DH) - np.einsum("...cab->...abc", DH)
    leading = 0.125 * np.einsum("...abc,bcij->...aij", coeff, rep.products())
    if direction is not None:
        exact, leading = exact[:, direction], leading[:, direction]
    return _unbatch(exact, single), _unbatch(leading, single)


def approx_parallel_spinor(m: MetricField, base_spinor, fiber_spinor=(1.0,), rep: Optional[CliffordRep] = None) -> SpinorField:
    """Transport ``psi0 (x) psi1`` through the gauge map: constant frame components.

    Any constant-component spinor is parallel for the flat product
    background in the frame ``e0``; the tensor factors only fix which one.
    When base and fibre are both odd-dimensional the full spinor module is
    twice the tensor product and the extra factor is fixed to ``(1, 0)``.
    """
    rep = rep or build_clifford(m.dim)
    _check_rep(m, rep)
    psi0 = np.asarray(base_spinor, dtype=complex).ravel()
    psi1 = np.asarray(fiber_spinor, dtype=complex).ravel()
    for name, v in (("base", psi0), ("fibre", psi1)):
        if not np.isclose(np.linalg.norm(v), 1.0, atol=1e-12):
            raise ValueError(f"{name} spinor must have unit norm")
    comp = np.kron(psi0, psi1)
    if comp.size < rep.fiber_dim and rep.fiber_dim % comp.size == 0:
        pad = np.zeros(rep.fiber_dim // comp.size)
        pad[0] = 1.0
        comp = np.kron(comp, pad)
    if comp.size != rep.fiber_dim:
        raise ValueError(
            f"tensor product has {comp.size} components, spinor fibre has {rep.fiber_dim}"
        )
    return constant_spinor(rep, comp)


def default_parallel_spinor(m: MetricField, rep: Optional[CliffordRep] = None) -> SpinorField:
    """:func:`approx_parallel_spinor` with the first basis spinor on each factor."""
    base = np.zeros(2 ** (m.chart.dim_base // 2))
    base[0] = 1.0
    fib = np.zeros(2 ** (m.chart.dim_fiber // 2))
    fib[0] = 1.0
    return approx_parallel_spinor(m, base, fib, rep)


# ---------------------------------------------------------------------------
# curvature on spinors


def spinor_curvature(m: MetricField, x, rep: Optional[CliffordRep] = None, step=None):
    """``R^S(e_a, e_b) = 1/4 sum_cd <R(e_a, e_b) e_c, e_d> gamma_c gamma_d``.

    Returns ``(RS[..., a, b, F, F], curvature data, frame)``.
    """
    rep = rep or build_clifford(m.dim)
    X, single = _points(x, m.dim)
    ff = _frame_field(m, X, step)
    cd = curvature(m, X, step)
    Rf = np.einsum("...ia,...jb,...kc,...ld,...ijkl->...abcd", ff.e, ff.e, ff.e, ff.e, cd.riemann)
    RS = 0.25 * np.einsum("...abcd,cdij->...abij", Rf, rep.products())
    return _unbatch(RS, single), cd, ff


def ricci_identity_sides(m: MetricField, x, spinor_components, rep: Optional[CliffordRep] = None, step=None):
    """Both sides of ``sum_a e_a . R(X, e_a) phi = -1/2 Ric(X) . phi`` for every frame leg X.

    The argument order is the one consistent with the ``+R/4`` contraction
    of :func:`lichnerowicz_contraction`; swapping it flips the sign.
    Returns ``(lhs, rhs)`` with shape ``(..., n, F)``.
    """
    rep = rep or build_clifford(m.dim)
    X, single = _points(x, m.dim)
    RS, cd, ff = spinor_curvature(m, X, rep, step)
    phi = np.broadcast_to(np.asarray(spinor_components, dtype=complex), (X.shape[0], rep.fiber_dim))
    lhs = np.einsum("aij,...xajk,...k->...xi", rep.gamma, RS, phi)
    ric = np.einsum("...ix,...jb,...ij->...xb", ff.e, ff.e, cd.ricci)
    rhs = -0.5 * np.einsum("...xb,bij,...j->...xi", ric, rep.gamma, phi)
    return _unbatch(lhs, single), _unbatch(rhs, single)


def lichnerowicz_contraction(m: MetricField, x, rep: Optional[CliffordRep] = None, step=None):
    """``1/4 sum_ab [e_a., e_b.] R^S(e_a, e_b)`` and the scalar curvature R."""
    rep = rep or build_clifford(m.dim)
    X, single = _points(x, m.dim)
    RS, cd, _ = spinor_curvature(m, X, rep, step)
    contraction = 0.25 * np.einsum("abij,...abjk->...ik", rep.commutators(), RS)
    return _unbatch(contraction, single), _unbatch(cd.scalar, single)
