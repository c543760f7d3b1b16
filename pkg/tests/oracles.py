"""Independent reference computations, built with sympy from textbook formulas.

Nothing here imports the package; the tests compare the package against these.
"""
from __future__ import annotations

import functools
import math

import numpy as np
import sympy as sp


def _lambdify_array(coords, arr):
    f = sp.lambdify(coords, arr, "numpy")

    def ev(X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = [np.array(f(*x), dtype=float) for x in X]
        return np.array(out)

    return ev


class SymbolicMetric:
    """Christoffels, Riemann, Ricci and scalar curvature of an explicit metric.

    Riemann is ``Rm[a, b, c, d] = g(R(d_a, d_b) d_c, d_d)`` with
    ``R(X, Y) = [nabla_X, nabla_Y] - nabla_[X,Y]`` (round spheres positive).
    """

    def __init__(self, coords, g):
        self.coords = list(coords)
        self.g = sp.Matrix(g)
        n = len(self.coords)
        ginv = self.g.inv()
        x = self.coords
        gam = [[[sum(ginv[c, d] * (sp.diff(self.g[d, a], x[b]) + sp.diff(self.g[d, b], x[a]) - sp.diff(self.g[a, b], x[d]))
                     for d in range(n)) / 2 for b in range(n)] for a in range(n)] for c in range(n)]
        self.gamma = gam  # gamma[c][a][b]
        # R^r_{s m v} = d_m G^r_{v s} - d_v G^r_{m s} + G^r_{m l} G^l_{v s} - G^r_{v l} G^l_{m s}
        Rup = [[[[sp.diff(gam[r][v][s], x[mu]) - sp.diff(gam[r][mu][s], x[v])
                  + sum(gam[r][mu][l] * gam[l][v][s] - gam[r][v][l] * gam[l][mu][s] for l in range(n))
                  for v in range(n)] for mu in range(n)] for s in range(n)] for r in range(n)]
        # <R(d_a, d_b) d_c, d_d> = g_dr R^r_{c a b}
        self.riemann = [[[[sum(self.g[d, r] * Rup[r][c][a][b] for r in range(n)) for d in range(n)]
                          for c in range(n)] for b in range(n)] for a in range(n)]
        self.ricci = sp.Matrix(n, n, lambda s, v: sum(Rup[r][s][r][v] for r in range(n)))
        self.scalar = sum(ginv[i, j] * self.ricci[i, j] for i in range(n) for j in range(n))

    def numeric(self, what):
        return _lambdify_array(self.coords, getattr(self, what))

    def levi_civita_frame_connection(self, frame):
        """``omega[a, b, c] = g(nabla_{e_a} e_b, e_c)`` for columns of ``frame``."""
        n = len(self.coords)
        E = sp.Matrix(frame)
        x = self.coords
        out = []
        for a in range(n):
            rows = []
            for b in range(n):
                vec = [sum(E[i, a] * sp.diff(E[k, b], x[i]) for i in range(n))
                       + sum(self.gamma[k][i][j] * E[i, a] * E[j, b] for i in range(n) for j in range(n))
                       for k in range(n)]
                rows.append([sum(self.g[k, l] * vec[k] * E[l, c] for k in range(n) for l in range(n)) for c in range(n)])
            out.append(rows)
        return _lambdify_array(self.coords, out)


def round_sphere_metric(rho: float):
    """Stereographic round 2-sphere of radius rho times a flat line."""
    x, y, z = sp.symbols("x y z", real=True)
    conf = 4 * rho**4 / (rho**2 + x**2 + y**2) ** 2
    g = sp.diag(conf, conf, 1)
    return SymbolicMetric((x, y, z), g)


def conformal_flat_metric(m: float):
    """``(1 + m/2r)^4 delta`` on R^3 together with its conformal frame ``psi^-2 d``."""
    x, y, z = sp.symbols("x y z", real=True)
    r = sp.sqrt(x**2 + y**2 + z**2)
    psi = 1 + sp.Rational(1, 2) * m / r
    g = sp.eye(3) * psi**4
    return SymbolicMetric((x, y, z), g), sp.eye(3) / psi**2


@functools.lru_cache(maxsize=None)
def _rn_flux_expression():
    """Shell flux mass m(R) of the Euclidean RN metric in Cartesian form.

    ``g_ij = delta_ij + (1/V - 1) n_i n_j``, ``g_tt = V`` with t the
    arclength circle coordinate, ``V = 1 - 2m/r - q^2/r^2``.  The integrand
    ``(d_i g_ij - d_j g_aa) n_j`` is radial, so the shell mass is
    ``R^2 I(R) / 4`` after the ``4 pi R^2 l`` area and the ``4 omega_3 l`` prefactor.
    """
    x, y, z, m, q2, R = sp.symbols("x y z m q2 R", real=True)
    X = (x, y, z)
    r = sp.sqrt(x**2 + y**2 + z**2)
    V = 1 - 2 * m / r - q2 / r**2
    f = 1 / V - 1
    n = [c / r for c in X]
    g = [[sp.KroneckerDelta(i, j) + f * n[i] * n[j] for j in range(3)] for i in range(3)]
    div = [sum(sp.diff(g[i][j], X[i]) for i in range(3)) for j in range(3)]
    trace = sum(g[i][i] for i in range(3)) + V
    integrand = sum((div[j] - sp.diff(trace, X[j])) * n[j] for j in range(3))
    on_axis = sp.simplify(integrand.subs({x: 0, y: 0}).subs(z, R))
    shell = sp.simplify(R**2 * on_axis / 4)
    return shell, (m, q2, R)


def rn_shell_mass(m: float, q2: float, R: float) -> float:
    expr, (ms, qs, Rs) = _rn_flux_expression()
    return float(expr.subs({ms: m, qs: q2, Rs: R}))


def rn_flux_mass_limit(m: float, q2: float) -> float:
    expr, (ms, qs, Rs) = _rn_flux_expression()
    return float(sp.limit(expr.subs({ms: m, qs: q2}), Rs, sp.oo))


def rn_closed_form_value(m: float, q2: float) -> float:
    """Closed form ``1/2 m (r+ - m) / (2 pi r+^2)`` evaluated independently."""
    rp = m + math.sqrt(m * m + q2)
    return 0.5 * m * (rp - m) / (2 * math.pi * rp**2)


def rn_gtt_series(m: float, q2: float, order: int = 2):
    r = sp.symbols("r", positive=True)
    V = 1 - 2 * m / r - q2 / r**2
    lead = sp.series(V.subs(r, 1 / r), r, 0, order).removeO().subs(r, 1 / r)
    return sp.lambdify(r, lead, "math")


def schwarzschild_shell_mass(m: float, R: float) -> float:
    """Flux of ``(1 + m/2r)^4 delta`` through the round sphere of radius R."""
    r = sp.symbols("r", positive=True)
    psi4 = (1 + sp.Rational(1, 2) * m / r) ** 4
    # d_i g_ij n_j - d_j g_ii n_j = (1 - 3) psi4'(r)
    integrand = -2 * sp.diff(psi4, r)
    return float((r**2 * integrand / 4).subs(r, R))


def sphere_monomial(alpha) -> float:
    """Exact integral of ``prod x_i^alpha_i`` over the unit sphere in ``R^n``."""
    if any(a % 2 for a in alpha):
        return 0.0
    beta = [sp.Rational(a + 1, 2) for a in alpha]
    val = 2 * sp.prod([sp.gamma(b) for b in beta]) / sp.gamma(sum(beta))
    return float(val)


def first_order_torsion(eps: float, tau: float, shape, x):
    """``T(e_a, e_b)^c = 1/2 (d_a h_cb - d_b h_ca)`` for ``h = eps r^-tau S(x)``.

    ``shape(sym_coords)`` returns a sympy matrix; the base is the first three
    coordinates.
    """
    n = len(x)
    syms = sp.symbols(f"x0:{n}", real=True)
    r = sp.sqrt(sum(s**2 for s in syms[:3]))
    h = eps * r ** (-tau) * shape(syms)
    dh = [[[sp.diff(h[i, j], syms[a]) for j in range(n)] for i in range(n)] for a in range(n)]
    sub = dict(zip(syms, x))
    T = np.zeros((n, n, n))
    for a in range(n):
        for b in range(n):
            for c in range(n):
                T[a, b, c] = float((sp.Rational(1, 2) * (dh[a][c][b] - dh[b][c][a])).subs(sub))
    return T


def polynomial_spinor(coeffs, dim):
    """Spinor with quadratic polynomial components and its exact flat Laplacian."""
    syms = sp.symbols(f"x0:{dim}", real=True)
    comps = []
    for c in coeffs:
        lin, quad, const = c
        expr = const + sum(lin[i] * syms[i] for i in range(dim)) + sum(
            quad[i][j] * syms[i] * syms[j] for i in range(dim) for j in range(dim)
        )
        comps.append(expr)
    lap = [sum(sp.diff(e, s, 2) for s in syms) for e in comps]
    return _lambdify_array(syms, comps), _lambdify_array(syms, lap)
