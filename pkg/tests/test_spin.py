import numpy as np
import pytest
import sympy as sp

from kkmass.clifford import build_clifford
from kkmass.models import ModelSpec, build_model
from kkmass.spin import (
    SpinorField,
    approx_parallel_spinor,
    connection_difference,
    connection_difference_from_torsion,
    constant_spinor,
    covariant_derivative,
    default_parallel_spinor,
    dirac,
    lichnerowicz_contraction,
    ricci_identity_sides,
    spin_connection,
    torsion_of_nabla0,
    torsion_tensor,
)
from kkmass.verify import connection_gap_decay, parallel_spinor_decay
import oracles

LADDER = 62.5 * 2.0 ** np.arange(5)


def _shell_point(R, fiber=0.7):
    u = np.array([0.48, -0.6, 0.64])
    return np.concatenate([R * u, [fiber]])


def test_flat_connection_vanishes():
    sc = spin_connection(build_model(ModelSpec("product_flat")), np.ones((3, 4)))
    assert np.max(np.abs(sc.omega)) == 0 and np.max(np.abs(sc.omega0)) == 0


def test_conformal_connection_matches_symbolic(rng):
    sym, frame = oracles.conformal_flat_metric(1.0)
    ref = sym.levi_civita_frame_connection(frame)
    m = build_model(ModelSpec("schwarzschild_slice", {"m": 1.0}))
    X = rng.uniform(1.5, 6, (5, 3)) * rng.choice([-1, 1], (5, 3))
    sc = spin_connection(m, X)
    assert np.max(np.abs(sc.omega - ref(X))) < 1e-10
    assert np.max(sc.antisymmetry_residual()) < 1e-12


@pytest.mark.parametrize("name", ["flat", "product_flat"])
def test_constant_spinor_is_parallel_on_flat_models(name):
    m = build_model(ModelSpec(name))
    rep = build_clifford(m.dim)
    phi = constant_spinor(rep, np.arange(rep.fiber_dim) + 1j)
    X = np.random.default_rng(0).uniform(1, 4, (4, m.dim))
    assert np.max(np.abs(covariant_derivative(m, phi, X))) < 1e-12
    assert np.max(np.abs(dirac(m, phi, X))) < 1e-12


def test_dirac_squared_is_minus_laplacian_on_flat_product():
    m = build_model(ModelSpec("product_flat"))
    rep = build_clifford(4)
    ks = np.array([[0.3, -0.2, 0.5, 1.0], [0.1, 0.4, 0.0, 2.0], [-0.6, 0.2, 0.3, 0.0], [0.2, 0.2, -0.1, 1.0]])

    def wave(X):
        return np.exp(1j * X @ ks.T)

    phi = SpinorField(rep, wave)
    x = np.array([[1.3, -0.4, 2.1, 0.9]])
    exact = (ks**2).sum(axis=1) * wave(x)  # D^2 = -Laplacian, and -Laplacian e^{ikx} = |k|^2 e^{ikx}
    errs = []
    for h in (0.04, 0.02, 0.01):
        Dphi = SpinorField(rep, lambda X, h=h: dirac(m, phi, X, step=h))
        errs.append(np.max(np.abs(dirac(m, Dphi, x, step=h) - exact)))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.9)


def _trace_shape(s):
    return sp.eye(len(s))


def _mixing_shape(s):
    n = len(s)
    r = sp.sqrt(s[0] ** 2 + s[1] ** 2 + s[2] ** 2)
    S = sp.zeros(n, n)
    for j in range(3):
        S[j, 3] = S[3, j] = s[j] / r
    return S


@pytest.mark.parametrize("shape,sym_shape", [("trace", _trace_shape), ("mixing", _mixing_shape)])
def test_torsion_first_order(shape, sym_shape):
    x = np.array([2.0, -1.0, 1.5, 0.4])
    errs = []
    for eps in (1e-2, 5e-3):
        m = build_model(ModelSpec("perturbed_product", {"shape": shape, "eps": eps, "tau": 1.5}))
        T = torsion_tensor(m, x)
        ref = oracles.first_order_torsion(eps, 1.5, sym_shape, x)
        assert np.max(np.abs(ref)) > 1e-4
        errs.append(np.max(np.abs(T - ref)))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_torsion_vector_and_antisymmetry():
    m = build_model(ModelSpec("perturbed_product", {"shape": "mixing", "tau": 1.0, "eps": 0.3}))
    x = _shell_point(3.0)
    T = torsion_tensor(m, x)
    assert np.allclose(T, -np.swapaxes(T, 0, 1), atol=1e-14)
    assert np.array_equal(torsion_of_nabla0(m, x, 0, 3), T[0, 3])
    with pytest.raises(IndexError):
        torsion_of_nabla0(m, x, 0, 4)


@pytest.mark.parametrize(
    "spec",
    [
        ModelSpec("perturbed_product", {"shape": "mixing", "tau": 1.0, "eps": 0.3}),
        ModelSpec("euclidean_rn", {"m": 1.0, "q": 1.0}),
    ],
)
def test_connection_difference_from_torsion(spec):
    m = build_model(spec)
    X = np.stack([_shell_point(R) for R in (4.0, 7.0, 12.0)])
    sc = spin_connection(m, X)
    assert np.max(np.abs(connection_difference_from_torsion(m, X) - (sc.omega - sc.omega0))) < 1e-12


def test_connection_difference_vanishes_for_product():
    exact, leading = connection_difference(build_model(ModelSpec("product_flat")), _shell_point(5.0))
    assert np.max(np.abs(exact)) == 0 and np.max(np.abs(leading)) == 0


@pytest.mark.parametrize("tau", [1.5, 2.0])
@pytest.mark.parametrize("shape", ["trace", "mixing", "fiber"])
def test_connection_gap_decay(tau, shape):
    m = build_model(ModelSpec("perturbed_product", {"shape": shape, "tau": tau, "eps": 0.3}))
    gap = connection_gap_decay(m, LADDER, samples=8)
    assert gap.exponent >= 0.9 * (2 * tau + 1)


def test_exact_difference_acts_as_covariant_derivative_of_parallel_spinor():
    m = build_model(ModelSpec("perturbed_product", {"shape": "mixing", "tau": 1.0, "eps": 0.3}))
    rep = build_clifford(4)
    phi0 = default_parallel_spinor(m, rep)
    x = _shell_point(3.0)
    exact, _ = connection_difference(m, x, rep)
    comps = phi0.evaluate(x[None])[0]
    nabla = covariant_derivative(m, phi0, x)
    assert np.max(np.abs(exact @ comps - nabla)) < 1e-9


def test_parallel_spinor_on_product_and_decay():
    rep = build_clifford(4)
    prod = build_model(ModelSpec("product_flat"))
    phi0 = approx_parallel_spinor(prod, [1, 0], [1], rep)
    assert np.max(np.abs(covariant_derivative(prod, phi0, _shell_point(9.0)))) == 0
    for tau in (1.5, 2.0):
        m = build_model(ModelSpec("perturbed_product", {"shape": "mixing", "tau": tau, "eps": 0.3}))
        assert parallel_spinor_decay(m, LADDER, samples=8).exponent == pytest.approx(tau + 1, rel=0.1)


def test_parallel_spinor_padding_and_validation():
    m = build_model(ModelSpec("perturbed_product", {"k": 3, "fiber_periods": [1.0, 1.0]}))
    rep = build_clifford(5)
    phi = approx_parallel_spinor(m, [0, 1], [1, 0], rep)
    assert phi.evaluate(np.zeros((1, 5)) + 2).shape == (1, 4)
    odd = build_model(ModelSpec("perturbed_product", {"k": 3, "fiber_periods": [1.0, 1.0, 1.0]}))
    comps = approx_parallel_spinor(odd, [1, 0], [0, 1], build_clifford(6)).evaluate(np.ones((1, 6)) * 2)[0]
    assert np.count_nonzero(comps) == 1 and comps.size == 8
    with pytest.raises(ValueError):
        approx_parallel_spinor(m, [1, 1], [1, 0], rep)


def test_ricci_identity_on_round_sphere(round_sphere_field):
    m, _ = round_sphere_field
    X = np.array([[0.3, -0.5, 1.0], [1.1, 0.2, -0.7]])
    phi = np.array([0.6, 0.8j])
    lhs, rhs = ricci_identity_sides(m, X, phi, step=1e-3)
    assert np.max(np.abs(rhs)) > 0.05
    assert np.max(np.abs(lhs - rhs)) < 1e-6
    contraction, R = lichnerowicz_contraction(m, X, step=1e-3)
    assert np.allclose(R, 0.5, atol=1e-6)
    assert np.max(np.abs(contraction - 0.25 * R[:, None, None] * np.eye(2))) < 1e-6


def test_ricci_identity_on_rn():
    m = build_model(ModelSpec("euclidean_rn"))
    X = np.stack([_shell_point(R) for R in (3.0, 5.0)])
    lhs, rhs = ricci_identity_sides(m, X, np.array([1, 0, 0, 1]) / np.sqrt(2))
    assert np.max(np.abs(rhs)) > 1e-3
    assert np.max(np.abs(lhs - rhs)) < 1e-8
