import numpy as np
import pytest

from conftest import custom_metric
from kkmass.geometry import (
    Chart,
    ChartError,
    NotPositiveDefinite,
    christoffel,
    curvature,
    decay_order,
    metric_derivatives,
    orthonormal_frames,
)
from kkmass.models import ModelSpec, build_model, rn_horizon_radius
import oracles

LADDER = 62.5 * 2.0 ** np.arange(5)


def _random_points(rng, count, r_lo, r_hi, dim=3, fiber=()):
    u = rng.standard_normal((count, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    r = rng.uniform(r_lo, r_hi, count)
    pts = u * r[:, None]
    if dim > 3:
        pts = np.hstack([pts, rng.uniform(0, fiber[0], (count, dim - 3))])
    return pts


def test_chart_validation():
    with pytest.raises(ValueError):
        Chart(0)
    with pytest.raises(ValueError):
        Chart(3, 1, ())
    with pytest.raises(ValueError):
        Chart(3, 1, (-1.0,))
    assert Chart(3, 2, (2.0, 3.0)).fiber_volume == 6.0


def test_flat_derivatives_vanish(rng):
    m = build_model(ModelSpec("product_flat"))
    X = _random_points(rng, 5, 2, 10, 4, (2 * np.pi,))
    fd_model = custom_metric(m.metric, fiber_periods=(2 * np.pi,))
    for mm in (m, fd_model):
        dg, ddg = metric_derivatives(mm, X, order=2)
        assert np.max(np.abs(dg)) < 1e-10 and np.max(np.abs(ddg)) < 1e-10


def test_radial_bump_derivative_second_order():
    def g(X):
        r = np.linalg.norm(X, axis=1)
        out = np.broadcast_to(np.eye(3), (len(X), 3, 3)).copy()
        out[:, 0, 0] += r**-2
        return out

    m = custom_metric(g)
    r = 3.0
    errs = []
    for h in (1e-2, 5e-3, 2.5e-3):
        dg = metric_derivatives(m, [r, 0, 0], step=h)
        errs.append(abs(dg[0, 0, 0] - (-2 * r**-3)))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.9)


@pytest.mark.parametrize(
    "spec",
    [
        ModelSpec("schwarzschild_slice", {"m": 1.0}),
        ModelSpec("euclidean_rn", {"m": 1.0, "q": 1.0}),
        ModelSpec("euclidean_rn", {"m": -1.0, "q2": 3.0}),
        ModelSpec("perturbed_product", {"shape": "mixing", "tau": 1.5}),
        ModelSpec("perturbed_product", {"shape": "fiber", "tau": 2}),
    ],
)
def test_closed_form_first_derivatives_match_differences(spec, rng):
    m = build_model(spec)
    fd = custom_metric(m.metric, fiber_periods=m.chart.fiber_periods, r_min=m.chart.r_min)
    X = _random_points(rng, 6, 4 * max(1, m.chart.r_min), 30, m.dim, m.chart.fiber_periods or (1.0,))
    exact = metric_derivatives(m, X)
    approx = metric_derivatives(fd, X, step=1e-4)
    assert np.max(np.abs(exact - approx)) < 1e-8


def test_christoffel_matches_symbolic(rng):
    sym, _ = oracles.conformal_flat_metric(1.0)
    m = build_model(ModelSpec("schwarzschild_slice", {"m": 1.0}))
    X = _random_points(rng, 4, 2, 8)
    g = m(X)
    dg = metric_derivatives(m, X)
    ref = sym.numeric("gamma")(X)
    assert np.max(np.abs(christoffel(g, dg) - ref)) < 1e-10


def test_flat_curvature_vanishes(rng):
    m = build_model(ModelSpec("flat"))
    cd = curvature(m, _random_points(rng, 4, 1, 5))
    assert np.max(np.abs(cd.riemann)) < 1e-10 and np.max(np.abs(cd.scalar)) < 1e-10


def test_round_sphere_curvature_matches_symbolic(round_sphere_field, rng):
    m, rho = round_sphere_field
    sym = oracles.round_sphere_metric(rho)
    X = rng.uniform(-1.5, 1.5, (6, 3))
    cd = curvature(m, X, step=1e-3)
    assert np.allclose(cd.scalar, 2 / rho**2, atol=1e-6)
    assert np.max(np.abs(cd.riemann - sym.numeric("riemann")(X))) < 1e-6
    assert np.max(np.abs(cd.ricci - sym.numeric("ricci")(X))) < 1e-6


def test_curvature_symmetries(rng):
    m = build_model(ModelSpec("euclidean_rn", {"m": 1.0, "q": 1.0}))
    X = _random_points(rng, 8, 4, 20, 4, (m.chart.fiber_periods[0],))
    cd = curvature(m, X)
    assert np.max(cd.antisymmetry_residual()) < 1e-10
    assert np.max(cd.bianchi_residual()) < 1e-10
    assert np.max(cd.trace_residual()) < 1e-10


def test_rn_scalar_flat_at_random_points(rng):
    m = build_model(ModelSpec("euclidean_rn", {"m": 1.0, "q": 1.0}))
    rp = rn_horizon_radius(1.0, 1.0)
    X = _random_points(rng, 50, 1.1 * rp, 100 * rp, 4, (m.chart.fiber_periods[0],))
    assert np.max(np.abs(curvature(m, X).scalar)) < 1e-6


def test_schwarzschild_slice_scalar_flat(rng):
    m = build_model(ModelSpec("schwarzschild_slice", {"m": 1.0}))
    assert np.max(np.abs(curvature(m, _random_points(rng, 10, 2, 50)).scalar)) < 1e-6


def test_stencil_leaving_chart_is_rejected():
    m = build_model(ModelSpec("euclidean_rn"))
    with pytest.raises(ChartError):
        curvature(m, [m.chart.r_min * 1.0001, 0, 0, 0], step=0.01)


def test_indefinite_metric_is_rejected():
    m = custom_metric(lambda X: np.broadcast_to(np.diag([1.0, -1.0, 1.0]), (len(X), 3, 3)).copy())
    with pytest.raises(NotPositiveDefinite):
        orthonormal_frames(m, [1.0, 2.0, 3.0])


def test_frames_trivial_for_exact_background():
    m = build_model(ModelSpec("product_flat"))
    fr = orthonormal_frames(m, [[3.0, 1.0, 0.0, 0.5]])
    assert np.allclose(fr.e, np.eye(4)) and np.allclose(fr.A, np.eye(4))


def test_frames_orthonormal(rng):
    m = build_model(ModelSpec("perturbed_product", {"shape": "mixing", "tau": 1, "eps": 0.3}))
    X = _random_points(rng, 5, 2, 9, 4, (2 * np.pi,))
    fr = orthonormal_frames(m, X)
    G = np.einsum("nia,nij,njb->nab", fr.e, m(X), fr.e)
    assert np.allclose(G, np.eye(4), atol=1e-13)
    assert np.allclose(np.swapaxes(fr.A, 1, 2), fr.A)


def test_conformal_frame_first_order():
    # g = (1 + eps r^-tau) delta: e = (1 - eps r^-tau / 2) d + O(eps^2)
    x = np.array([2.0, 1.0, -1.5])
    r = np.linalg.norm(x)
    errs = []
    for eps in (1e-2, 5e-3):
        m = build_model(ModelSpec("perturbed_product", {"fiber_periods": [], "eps": eps, "tau": 1.0}))
        e = orthonormal_frames(m, x).e
        errs.append(np.max(np.abs(e - (1 - 0.5 * eps / r) * np.eye(3))))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.02)


@pytest.mark.parametrize("tau", [1.0, 2.0])
def test_frame_linearization_residual_decay(tau):
    m = build_model(ModelSpec("perturbed_product", {"shape": "mixing", "tau": tau, "eps": 0.3}))
    u = np.array([0.3, -0.5, 0.81, 1.0])
    u[:3] /= np.linalg.norm(u[:3])
    res = []
    for R in LADDER:
        x = np.concatenate([R * u[:3], u[3:]])
        fr = orthonormal_frames(m, x)
        res.append(np.max(np.abs(fr.e - (fr.e0 - 0.5 * m.perturbation(x) @ fr.e0))))
    slope = -np.polyfit(np.log(LADDER), np.log(res), 1)[0]
    assert slope >= 2 * tau - 1e-3


def test_decay_exact_background():
    rep = decay_order(build_model(ModelSpec("product_flat")), LADDER)
    assert np.isinf(rep.tau) and rep.exact_background
    assert rep.message == "exact background, tau = inf"


def test_decay_constant_symmetric_bump():
    S = np.array([[0.3, 0.1, -0.2], [0.1, -0.4, 0.05], [-0.2, 0.05, 0.2]])

    def g(X):
        r = np.linalg.norm(X, axis=1)
        return np.eye(3) + r[:, None, None] ** -2 * S

    rep = decay_order(custom_metric(g, r_min=1.0), LADDER, samples=16)
    for val in rep.orders.values():
        assert val == pytest.approx(2.0, rel=0.05)


def test_decay_rn_leading_order():
    rep = decay_order(build_model(ModelSpec("euclidean_rn")), LADDER, samples=16)
    assert rep.tau == pytest.approx(1.0, rel=0.1)
    assert rep.mass_well_defined


def test_decay_flags_slow_falloff():
    m = build_model(ModelSpec("perturbed_product", {"tau": 0.4, "eps": 0.2}))
    rep = decay_order(m, LADDER, samples=8)
    assert rep.tau == pytest.approx(0.4, rel=0.05)
    assert not rep.mass_well_defined
    assert "mass possibly coordinate-dependent" in rep.message


def test_decay_requires_increasing_radii():
    m = build_model(ModelSpec("product_flat"))
    with pytest.raises(ValueError):
        decay_order(m, [10.0, 5.0, 20.0])
