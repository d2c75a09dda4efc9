import math
from fractions import Fraction

import numpy as np
import pytest
import scipy.integrate
from hypothesis import given, settings
from hypothesis import strategies as st

from symindex.convexbody import (
    Ellipsoid,
    GaugeBody,
    Mollifier,
    ProfileChi,
    action_deviation,
    capacity_hat,
    capacity_hat0,
    gauge_squared,
    hessian_floor,
    lemma_delta_constant,
    mollify,
    pb_lower_bound,
    positive_regime_sweep,
    sphere_samples,
    spec_window_report,
    strictly_convex_inner,
)
from symindex.errors import (
    CannotSeparate,
    DeltaTooLarge,
    InvalidInput,
    OriginUndefined,
    RegimeViolation,
)

radii = st.lists(st.floats(0.3, 3.0), min_size=1, max_size=3)


# -- gauges -------------------------------------------------------------------

def test_gauge_examples():
    assert gauge_squared(Ellipsoid((1.0,)), np.array([0.6, 0.8])) == pytest.approx(1.0)
    E = Ellipsoid((1.0, 2.0))
    assert gauge_squared(E, np.array([0.0, 0.0, 2.0, 0.0])) == pytest.approx(1.0)
    assert gauge_squared(E, np.array([0.5, 0.0, 0.0, 0.0])) == pytest.approx(0.25)


def test_level_set_gauge_matches_closed_form():
    E = Ellipsoid((1.0, 2.0))
    L = E.as_level_set()
    rng = np.random.default_rng(0)
    X = rng.standard_normal((20, 4))
    assert np.allclose(L.gauge(X) ** 2, E.gauge_sq(X), rtol=1e-9)


def test_general_body_rejects_origin():
    with pytest.raises(OriginUndefined):
        gauge_squared(Ellipsoid((1.0,)).as_level_set(), np.zeros(2))
    assert gauge_squared(Ellipsoid((1.0,)), np.zeros(2)) == 0


@settings(max_examples=40, deadline=None)
@given(radii, st.floats(0.1, 10), st.integers(0, 2**31 - 1))
def test_two_homogeneity(r, t, seed):
    E = Ellipsoid(tuple(r))
    x = np.random.default_rng(seed).standard_normal(E.dim)
    assert gauge_squared(E, t * x) == pytest.approx(t * t * gauge_squared(E, x), rel=1e-9)


def test_hessian_is_zero_homogeneous_on_level_set():
    L = Ellipsoid((1.0, 1.5)).as_level_set()
    x = np.random.default_rng(1).standard_normal(4)
    for a in (0.3, 2.0, 7.5):
        assert np.allclose(L.hess_sq(a * x[None])[0], L.hess_sq(x[None])[0], atol=1e-8)


def test_boundary_relations():
    """On the boundary, D^2 f(x)(x, x) = 2 and D^2 f(x)(x, v) = 0 = Df(x) v for tangent v."""
    L = Ellipsoid((0.8, 1.7)).as_level_set()
    X = L.boundary_points(sphere_samples(4, 32))
    G, H = L.grad_sq(X), L.hess_sq(X)
    for x, g, h in zip(X, G, H):
        v = np.random.default_rng(0).standard_normal(4)
        v -= (v @ g) / (g @ g) * g  # tangent to the level set
        assert x @ h @ x == pytest.approx(2.0, abs=1e-7)
        assert x @ h @ v == pytest.approx(0.0, abs=1e-7)
        assert g @ v == pytest.approx(0.0, abs=1e-12)


# -- capacities ---------------------------------------------------------------

@pytest.mark.parametrize("r, cap, cap0", [
    ((1.0,), math.pi, math.pi),
    ((1.0, 1.0), math.pi, math.pi),
    ((1.0, 2.0), 4 * math.pi, math.pi),
    ((0.5, 1.0, 3.0), 9 * math.pi, 0.25 * math.pi),
])
def test_ellipsoid_capacities(r, cap, cap0):
    E = Ellipsoid(r)
    assert capacity_hat(E).value == pytest.approx(cap, rel=1e-14)
    assert capacity_hat0(E).value == pytest.approx(cap0, rel=1e-14)


@settings(max_examples=40, deadline=None)
@given(radii, st.lists(st.floats(0.0, 1.0), min_size=3, max_size=3))
def test_capacities_monotone(r, grow):
    small = Ellipsoid(tuple(r))
    big = Ellipsoid(tuple(x + g for x, g in zip(r, grow)))
    assert capacity_hat(small).value <= capacity_hat(big).value
    assert capacity_hat0(small).value <= capacity_hat0(big).value


def test_sampled_capacities_bound_closed_forms():
    """The sampled route certifies a smaller Hessian floor, so it can only overestimate."""
    E = Ellipsoid((1.0, 2.0))
    L = E.as_level_set()
    c, c0 = capacity_hat(L), capacity_hat0(L)
    assert 4 * math.pi <= c.value <= 4 * math.pi * 1.02
    assert c0.value == pytest.approx(math.pi, rel=0.02)
    assert c.certificate["method"] == "sphere-sampled"


def test_hessian_floor_certificate():
    cert = hessian_floor(Ellipsoid((1.0, 2.0)).as_level_set())
    assert cert["a_certified"] <= cert["a_sampled"]
    assert cert["a_sampled"] == pytest.approx(0.5, rel=1e-6)


def test_nonsmooth_body_has_no_capacity():
    with pytest.raises(InvalidInput):
        capacity_hat(GaugeBody.cube(1))


# -- mollification ------------------------------------------------------------

def test_quadratic_mollification_adds_a_constant():
    delta = 0.1
    mol = Mollifier(centre=0.0)
    mg = mollify(Ellipsoid((1.0,)), delta, mol)
    # independent constant: delta^2 E|y|^2 under the normalized bump, by adaptive quadrature
    bump = lambda r: math.exp(-1 / (1 - (r / mol.rho) ** 2)) if r < mol.rho else 0.0
    mass = scipy.integrate.quad(lambda r: bump(r) * r, 0, mol.rho)[0]
    second = scipy.integrate.quad(lambda r: bump(r) * r ** 3, 0, mol.rho)[0]
    c = delta ** 2 * second / mass
    rng = np.random.default_rng(3)
    shifts = [mg.value(x) - x @ x for x in rng.standard_normal((10, 2))]
    assert np.ptp(shifts) <= 1e-12
    # the order-8 tensor rule resolves the bump's second moment to about 1%
    assert shifts[0] == pytest.approx(c, rel=1e-2)
    Y, W = mol.nodes(2)
    assert shifts[0] == pytest.approx(delta ** 2 * W @ np.sum(Y * Y, axis=1), rel=1e-12)
    assert np.allclose(mg.hess(np.array([0.3, -0.4])), 2 * np.eye(2))


def test_off_centre_mollifier_shifts_the_quadratic():
    """With the default kernel, f_delta(x) = integral of |x - delta y|^2 phi(y) dy."""
    delta = 0.05
    mol = Mollifier()
    mg = mollify(Ellipsoid((1.0,)), delta, mol)
    x = np.array([0.2, 0.7])
    phi = lambda y1, y0: mol.bump(np.array([[y0, y1]]))[0]
    lo, hi = mol.centre - mol.rho, mol.centre + mol.rho
    mass = scipy.integrate.dblquad(phi, lo, hi, -mol.rho, mol.rho, epsabs=1e-13)[0]
    num = scipy.integrate.dblquad(
        lambda y1, y0: ((x[0] - delta * y0) ** 2 + (x[1] - delta * y1) ** 2) * phi(y1, y0),
        lo, hi, -mol.rho, mol.rho, epsabs=1e-13)[0]
    # quadrature error of the order-8 rule on the kernel moments is O(delta^2 * 1e-2)
    assert mg.value(x) == pytest.approx(num / mass, abs=1e-2 * delta)


def test_mollified_hessian_certificate():
    mg = mollify(Ellipsoid((1.0, 2.0)).as_level_set(), 0.02)
    cert = mg.certificate
    assert cert["certified"] and cert["sampled_min"] >= cert["a"] - cert["guard"]


def test_delta_too_large():
    with pytest.raises(DeltaTooLarge):
        mollify(Ellipsoid((1.0,)), 0.6)
    with pytest.raises(InvalidInput):
        mollify(Ellipsoid((1.0,)), 0.0)


def test_action_deviation_decays_linearly():
    E = Ellipsoid((1.0,))
    chi = ProfileChi(3.0, 0.1)
    x = np.array([0.95, 0.0])
    deltas = (1e-2, 5e-3, 2.5e-3)
    devs = [action_deviation(E, chi, x, d) for d in deltas]
    C = lemma_delta_constant(E)
    assert all(dv <= C * d * chi.sup_d1() for dv, d in zip(devs, deltas))
    assert devs[0] / devs[1] == pytest.approx(2, abs=0.1)
    assert devs[1] / devs[2] == pytest.approx(2, abs=0.1)


# -- strictly convex inner bodies ---------------------------------------------

def test_inner_body_for_ball():
    U = Ellipsoid((1.0,))
    K = 0.5 * sphere_samples(2, 64)
    V = strictly_convex_inner(U, K)
    assert np.all(V.gauge(K) < 1)
    assert V.meta["max_gauge_on_dV"] < 1
    assert V.meta["hess_min"] >= 2 * V.meta["eps"] - V.meta["guard"]


def test_inner_body_for_square_rounds_corners():
    sq = GaugeBody.cube(1)
    V = strictly_convex_inner(sq, np.zeros((1, 2)))
    corner = np.array([1.0, 1.0]) / math.sqrt(2)
    edge = np.array([1.0, 0.0])
    # the corner direction reaches further in the square than the edge direction
    assert V.meta["max_gauge_on_dV"] < 1
    assert 1 / V.gauge(corner) > 1 / V.gauge(edge)


def test_inner_body_needs_margin():
    with pytest.raises(CannotSeparate):
        strictly_convex_inner(Ellipsoid((1.0,)), np.array([[0.9999, 0.0]]))


# -- profiles and orbit windows -----------------------------------------------

@pytest.mark.parametrize("a, eps, s", [(2.0, 0.1, 0.0), (2.0, 0.1, 1.0), (0.5, 0.05, 0.3)])
def test_profile_check(a, eps, s):
    rep = ProfileChi(a, eps, s=s).check()
    assert rep["ok"], rep


def test_profile_validation():
    with pytest.raises(InvalidInput):
        ProfileChi(2.0, 0.5)
    with pytest.raises(InvalidInput):
        ProfileChi(2.0, 0.1, eps_prime=10.0)


def test_spec_window_zero_regime_on_ball():
    rep = spec_window_report(Ellipsoid((1.0,)), ProfileChi(2.0, 0.1), 0.0, 0.005)
    inside = [e for e in rep.entries if e.periodic and e.level <= 0.9]
    assert inside and all(e.max_cz < -1 for e in inside)
    assert rep.ok
    levels = [e.level for e in rep.entries]
    assert levels == sorted(levels)


def test_spec_window_outside_data_independent_of_slope():
    E = Ellipsoid((1.0,))
    pairs = [spec_window_report(E, ProfileChi(2.0, 0.1, s=s), 0.0, 0.005).outside_pairs() for s in (0, 1)]
    assert pairs[0] == pairs[1]


def test_regime_violation():
    with pytest.raises(RegimeViolation):
        spec_window_report(Ellipsoid((1.0,)), ProfileChi(2.0, 0.1), 2.0, 0.005)
    with pytest.raises(RegimeViolation):
        positive_regime_sweep(1.0, 1, 1.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 8.0), st.integers(1, 3), st.floats(0.05, 1.0))
def test_positive_regime_inequality(a, n, frac):
    kappa = frac * n * a / (2 * math.pi)  # keeps 2 pi / a <= n / kappa
    ys, lhs, holds = positive_regime_sweep(a, n, kappa, 200)
    assert holds and np.all(lhs <= 2 * math.pi / a + 1e-12)


# -- pb bound -----------------------------------------------------------------

@pytest.mark.parametrize("d, cap_over_pi, exact", [
    (0, 1, "1/(2π)"),
    (3, 1, "1/(32π)"),
    (1, 4, "1/(32π)"),
    (2, "1/2", "1/(9π)"),
])
def test_pb_examples(d, cap_over_pi, exact):
    res = pb_lower_bound(d, None, cap_over_pi=cap_over_pi)
    assert res.exact == exact
    assert res.value == pytest.approx(1 / (2 * (d + 1) ** 2 * float(Fraction(cap_over_pi)) * math.pi))


def test_pb_from_capacity():
    cap = capacity_hat(Ellipsoid((1.0, 2.0))).value
    assert pb_lower_bound(1, cap).value == pytest.approx(1 / (32 * math.pi))


def test_pb_invalid():
    with pytest.raises(InvalidInput):
        pb_lower_bound(1, 0.0)
    with pytest.raises(InvalidInput):
        pb_lower_bound(-1, 1.0)
    with pytest.raises(InvalidInput):
        pb_lower_bound(1, 1.0, regime="other")
