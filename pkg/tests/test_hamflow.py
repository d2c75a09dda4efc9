import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from symindex import sampling as smp
from symindex.czindex import max_cz_index, rotation_path
from symindex.errors import InvalidInput
from symindex.hamflow import (
    HamiltonianModel,
    PolyProfile,
    action,
    action_correction,
    action_hat,
    compose,
    flow,
    linearized_path,
    orbit_record,
    reparametrization_defect,
    reparametrization_generator,
)
from symindex.symcore import is_isotropic_generator, standard_J


def numeric(H):
    """Same Hamiltonian with the closed forms stripped, forcing the ODE solver."""
    return compose(PolyProfile((0.0, 1.0)), H)


def test_constant_flow_and_action():
    H = HamiltonianModel.constant(2.5, 2)
    x0 = np.array([0.3, -0.1, 0.7, 0.2])
    assert np.allclose(flow(H, x0, 1.0, 10).points, x0)
    assert action(H, x0) == pytest.approx(2.5)


def test_circle_is_one_periodic():
    H = HamiltonianModel.quadratic(2 * math.pi * np.eye(2))  # pi |z|^2
    x0 = np.array([0.4, 0.0])
    for model in (H, numeric(H)):
        end = flow(model, x0, 1.0, 1000).points[-1]
        assert np.linalg.norm(end - x0) <= 1e-8
    # flow runs counterclockwise in (x, y): J0 grad H at (r, 0) points along +y
    quarter = flow(H, x0, 0.25, 10).points[-1]
    assert quarter == pytest.approx([0.0, 0.4], abs=1e-12)


def test_ball_orbits_share_a_period():
    H = HamiltonianModel.quadratic(2 * np.eye(4))  # |x|^2 on the unit ball
    rng = np.random.default_rng(0)
    for _ in range(5):
        x0 = rng.standard_normal(4)
        x0 *= rng.uniform(0.1, 1) / np.linalg.norm(x0)
        end = flow(numeric(H), x0, math.pi, 2000).points[-1]
        assert np.linalg.norm(end - x0) <= 1e-8


def test_energy_conserved_numerically():
    rng = np.random.default_rng(1)
    Q = smp.psd(4, rng) + np.eye(4)
    H = numeric(HamiltonianModel.quadratic(Q))
    x0 = rng.standard_normal(4)
    pts = flow(H, x0, 1.0, 500).points
    assert max(abs(H.value(p) - H.value(x0)) for p in pts) <= 1e-7


def test_quadratic_linearization_is_exponential():
    rng = np.random.default_rng(2)
    Q = smp.symmetric(4, rng)
    H = HamiltonianModel.quadratic(Q)
    x0 = rng.standard_normal(4)
    P = linearized_path(numeric(H), x0, steps=800)
    A = standard_J(2) @ Q
    for t in (0.3, 1.0):
        assert np.allclose(P(t), scipy.linalg.expm(A * t), atol=1e-9)


def test_linear_profile_matches_rotation():
    c = 2.2 * math.pi  # H = c |z|^2, generator 2c Id
    H = HamiltonianModel.quadratic(2 * c * np.eye(2))
    P = linearized_path(H, np.array([0.5, 0.1]))
    R = rotation_path([-c / math.pi])
    assert all(np.allclose(P(t), R(t), atol=1e-12) for t in np.linspace(0, 1, 9))


def test_action_of_linear_profile_on_disc():
    chi = PolyProfile((1.0, -1.0))  # 1 - u
    f = HamiltonianModel.quadratic(2 * np.eye(2))
    H = compose(chi, f)
    for u in (0.2, 0.5, 0.9):
        assert action(H, np.array([math.sqrt(u), 0.0]), 2000) == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(-3, 3), st.floats(-3, 3))
def test_action_two_homogeneous_formula(u, b, c):
    chi = PolyProfile((0.3, b, c))
    H = compose(chi, HamiltonianModel.quadratic(2 * np.eye(2)))
    A = action(H, np.array([0.0, math.sqrt(u)]), 2000)
    assert A == pytest.approx(-chi.d1(u) * u + chi.value(u), abs=1e-8)


def test_action_correction_examples():
    assert action_correction(1, -1, 0.7) == 0
    assert action_correction(1, -3, -1) == 1
    with pytest.raises(InvalidInput):
        action_correction(1, -1, 0)


@pytest.mark.parametrize("shift", [-2, -1, 1, 3])
def test_action_correction_integer_shift(shift):
    for n, m, kappa in [(1, -3, -1.0), (2, -5, 0.5), (3, -2, 2.0)]:
        moved = action_correction(n, m + 2 * shift, kappa) - action_correction(n, m, kappa)
        assert moved == pytest.approx(shift / kappa)


def test_action_hat_is_sum_of_parts():
    H = HamiltonianModel.quadratic(-3 * math.pi * np.eye(2))
    x0 = np.array([0.2, 0.0])
    m = max_cz_index(linearized_path(H, x0))
    assert action_hat(H, x0, -1.0) == pytest.approx(action(H, x0) + action_correction(1, m, -1.0))


class TestReparametrization:
    def setup_method(self):
        rng = np.random.default_rng(5)
        self.H = HamiltonianModel.quadratic(smp.psd(4, rng) + 0.5 * np.eye(4))
        self.chi = PolyProfile((0.0, 1.5, -0.8, 0.6))
        self.x = rng.standard_normal(4) * 0.5
        self.rng = rng

    def test_identity_holds(self):
        for t in (0.3, 1.0):
            xi = self.rng.standard_normal(4)
            assert reparametrization_defect(self.H, self.chi, self.x, t, xi, 2000) <= 1e-6

    def test_generator_is_isotropic(self):
        X = reparametrization_generator(self.H, self.chi.d2(self.H.value(self.x)), self.x)
        ok, diag = is_isotropic_generator(X)
        assert ok and diag["rank"] == 1

    def test_max_index_moves_by_at_most_one(self):
        K = compose(self.chi, self.H)
        speed = self.chi.d1(self.H.value(self.x))
        a = max_cz_index(linearized_path(K, self.x, steps=800))
        b = max_cz_index(linearized_path(self.H, self.x, T=speed, steps=800))
        assert abs(a - b) <= 1


def test_model_check():
    H = HamiltonianModel.quadratic(np.diag([1.0, 2.0]))
    assert H.check() <= 1e-5
    bad = HamiltonianModel(1, H.value, lambda x: 2 * H.grad(x), H.hess)
    with pytest.raises(InvalidInput):
        bad.check()


def test_quadratic_validation():
    with pytest.raises(InvalidInput):
        HamiltonianModel.quadratic(np.ones((3, 3)))
    with pytest.raises(InvalidInput):
        HamiltonianModel.quadratic(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_from_samples_recovers_quadratic():
    rng = np.random.default_rng(9)
    Q = smp.symmetric(2, rng)
    X = rng.standard_normal((40, 2))
    y = 0.5 * np.einsum("ij,jk,ik->i", X, Q, X)
    H = HamiltonianModel.from_samples(X, y, 2)
    x = np.array([0.3, -0.4])
    assert H.value(x) == pytest.approx(0.5 * x @ Q @ x, abs=1e-10)
    assert np.allclose(H.hess(x), Q, atol=1e-9)


def test_orbit_record_flags_periodicity():
    H = HamiltonianModel.quadratic(2 * math.pi * np.eye(2))
    rec = orbit_record(H, np.array([0.3, 0.0]))
    assert rec.periodic and rec.period_check < 1e-10
    assert rec.index.kernel_dim == 2
    off = orbit_record(HamiltonianModel.quadratic(3 * np.eye(2)), np.array([0.3, 0.0]))
    assert not off.periodic
