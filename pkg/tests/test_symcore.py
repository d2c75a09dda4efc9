import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from symindex import sampling as smp
from symindex.errors import Diverged, InvalidInput, NotSymplectic, NotTransverse
from symindex.symcore import (
    LagrangianFrame,
    QuadraticForm,
    SymmetricPath,
    SymplecticPath,
    diagonal,
    graph_frame,
    graph_lagrangian,
    graph_over_decomposition,
    horizontal,
    integrate_fundamental,
    is_isotropic_generator,
    numerical_rank,
    signature,
    standard_J,
    standard_Omega,
    vertical,
)

J1 = standard_J(1)
finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def sym_matrices(k):
    return arrays(np.float64, (k, k), elements=finite).map(lambda A: 0.5 * (A + A.T))


# -- signature ----------------------------------------------------------------

def test_signature_examples():
    assert signature(np.diag([1.0, -1.0])) == (1, 0, 1)
    assert signature(np.diag([1.0, -1.0])).sign == 0
    z = signature(np.zeros((2, 2)))
    assert z == (0, 2, 0) and z.tilde_sign == 2
    # crossing form of the half turn at t = 0 is S(0) = -pi Id
    s = signature(QuadraticForm(-np.pi * np.eye(2)))
    assert s == (0, 0, 2) and s.sign == -2


def test_signature_rejects_nan():
    with pytest.raises(InvalidInput):
        signature(np.array([[np.nan]]))
    with pytest.raises(InvalidInput):
        signature(np.eye(2), zero_tol=-1)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 3), st.integers(0, 3), st.integers(0, 3), st.integers(0, 2**31 - 1))
def test_signature_congruence_invariant(p, z, m, seed):
    """Sylvester: inertia of ``A^T G A`` equals inertia of ``G`` for invertible ``A``."""
    if p + z + m == 0:
        return
    rng = np.random.default_rng(seed)
    G = np.diag(np.r_[rng.uniform(0.5, 2, p), np.zeros(z), -rng.uniform(0.5, 2, m)])
    Q, _ = np.linalg.qr(rng.standard_normal(G.shape))
    A = Q @ np.diag(rng.uniform(0.5, 2, G.shape[0]))
    assert signature(A.T @ G @ A) == (p, z, m)


@settings(max_examples=300, deadline=None)
@given(sym_matrices(4), st.integers(0, 4), st.integers(0, 2**31 - 1))
def test_sign_change_bounded_by_rank(A, r, seed):
    rng = np.random.default_rng(seed)
    P = rng.standard_normal((r, 4))
    B = P.T @ np.diag(rng.choice([-1.0, 1.0], r)) @ P
    rank_B = numerical_rank(B)
    zt = 1e-9
    assert abs(signature(A + B, zt).sign - signature(A, zt).sign) <= 2 * rank_B


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(0, 4), st.integers(0, 4))
def test_tilde_sign_with_rank_gain(seed, rA, rB):
    rng = np.random.default_rng(seed)
    P = rng.standard_normal((rA, 4))
    A = P.T @ np.diag(rng.choice([-1.0, 1.0], rA)) @ P
    Q = rng.standard_normal((rB, 4))
    B = Q.T @ np.diag(rng.choice([-1.0, 1.0], rB)) @ Q
    k = numerical_rank(A + B) - numerical_rank(A)
    if k < 0:
        return
    zt = 1e-8 * max(1.0, np.abs(A).max(), np.abs(B).max())
    gain = signature(A + B, zt).tilde_sign - signature(A, zt).tilde_sign
    assert gain <= 2 * numerical_rank(B) - 2 * k


# -- frames and graphs --------------------------------------------------------

def test_frame_validation():
    with pytest.raises(InvalidInput):
        LagrangianFrame(np.eye(2), standard_Omega(1))
    with pytest.raises(InvalidInput):
        LagrangianFrame(np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0], [0.0, 0.0]]), standard_Omega(2))
    assert horizontal(2).intersection_dim(vertical(2)) == 0


def test_graph_of_identity_is_diagonal():
    assert graph_lagrangian(np.eye(2)).same_subspace(diagonal(1))


@pytest.mark.parametrize("Phi", [-np.eye(2), scipy.linalg.expm(-np.pi * J1 / 2)])
def test_graph_transverse_to_diagonal(Phi):
    assert graph_lagrangian(Phi).intersection_dim(diagonal(1)) == 0


def test_graph_rejects_non_symplectic():
    with pytest.raises(NotSymplectic):
        graph_lagrangian(np.diag([2.0, 2.0]))


def test_graph_over_decomposition_examples():
    L0, L1 = horizontal(1), vertical(1)
    assert np.allclose(graph_over_decomposition(L0, L0, L1).G, 0)
    for c in (-2.0, 0.5, 3.0):
        L = LagrangianFrame(np.array([[1.0], [c]]), standard_Omega(1))
        q = graph_over_decomposition(L, L0, L1)
        assert q.G.shape == (1, 1)
        assert np.sign(q.G[0, 0]) == np.sign(c)
    with pytest.raises(NotTransverse):
        graph_over_decomposition(L1, L0, L1)


def test_graph_round_trip():
    rng = np.random.default_rng(7)
    for n in (1, 2, 3):
        L0, L1 = smp.lagrangian_frame(n, rng), smp.lagrangian_frame(n, rng)
        G = smp.symmetric(n, rng)
        L = graph_frame(G, L0, L1)
        assert L.lagrangian_defect() < 1e-9
        q = graph_over_decomposition(L, L0, L1)
        assert np.allclose(q.G, G, atol=1e-9)
        assert graph_frame(q, L0, L1).same_subspace(L)


# -- integration --------------------------------------------------------------

def test_integrate_zero_generator():
    P = integrate_fundamental(SymmetricPath.constant(np.zeros((4, 4))), 50)
    for t in (0.0, 0.3, 1.0):
        assert np.allclose(P(t), np.eye(4))


def test_integrate_constant_rotation_matches_exponential():
    C = 2.7
    P = integrate_fundamental(SymmetricPath.constant(-C * np.eye(2)), 10_000)
    err = max(np.abs(P(t) - scipy.linalg.expm(-C * J1 * t)).max() for t in np.linspace(0, 1, 41))
    assert err <= 1e-8


def test_integrate_block_rotations():
    ys = [0.3, 1.7]
    S = np.diag([-2 * np.pi * ys[0]] * 2 + [-2 * np.pi * ys[1]] * 2)
    P = integrate_fundamental(SymmetricPath.constant(S), 2000)
    R = SymplecticPath.rotation(ys)
    assert max(np.abs(P(t) - R(t)).max() for t in np.linspace(0, 1, 17)) < 1e-9


def test_integrate_keeps_determinant_and_symplecticity():
    rng = np.random.default_rng(11)
    for n in (1, 2, 3):
        P = integrate_fundamental(smp.polynomial_generator(2 * n, rng, 3, 3.0), 500)
        assert P.defect <= 1e-7
        for t in np.linspace(0, 1, 9):
            assert abs(np.linalg.det(P(t)) - 1) <= 1e-6


def test_integrate_diverges():
    with pytest.raises(Diverged):
        integrate_fundamental(SymmetricPath.constant(np.diag([80.0, -80.0])), 100)


def test_integrate_rejects_bad_steps():
    with pytest.raises(InvalidInput):
        integrate_fundamental(SymmetricPath.constant(np.zeros((2, 2))), 0)


# -- isotropic generators -----------------------------------------------------

def test_isotropic_generator_examples():
    assert is_isotropic_generator(np.zeros((2, 2)))[0]
    w = np.array([0.6, -1.1])
    Om = standard_Omega(1)
    X = np.outer(w, Om.T @ w)  # xi -> omega0(xi, w) w
    ok, diag = is_isotropic_generator(X)
    assert ok and diag["rank"] == 1
    ok, diag = is_isotropic_generator(J1)
    assert not ok and not diag["isotropic_image"]


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2**31 - 1))
def test_sampled_isotropic_generators_pass(n, seed):
    rng = np.random.default_rng(seed)
    rank = int(rng.integers(1, n + 1))
    X = smp.isotropic_generator(n, rank, rng)
    ok, diag = is_isotropic_generator(X)
    assert ok, diag
    assert diag["rank"] == rank
    # X X = 0 for isotropic images, so 1 + tX is unipotent
    assert np.allclose(X @ X, 0, atol=1e-10)
