"""Random instances for property tests and demos.

All generators take a ``numpy.random.Generator`` so runs are reproducible.
"""

import numpy as np
import scipy.linalg

from .maslov import LagrangianPath
from .symcore import (
    LagrangianFrame,
    SymmetricPath,
    realify,
    standard_J,
    standard_Omega,
)


def symmetric(dim, rng, scale=1.0):
    A = rng.standard_normal((dim, dim))
    return scale * 0.5 * (A + A.T)


def hermitian(n, rng, scale=1.0):
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * 0.5 * (A + A.conj().T)


def unitary(n, rng):
    Q, R = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def symplectic(n, rng, scale=0.5):
    """``expm(J0 K)`` for a random symmetric ``K``."""
    return scipy.linalg.expm(standard_J(n) @ symmetric(2 * n, rng, scale))


def unitary_frame(U):
    """Frame of the Lagrangian ``U R^n`` for unitary (or invertible complex) ``U``."""
    return realify(U)


def lagrangian_frame(n, rng):
    return LagrangianFrame(unitary_frame(unitary(n, rng)), standard_Omega(n))


def unitary_lagrangian_path(n, rng, degree=2, scale=3.0, U0=None):
    """``t -> expm(i H(t)) U0 R^n`` with ``H`` a random Hermitian polynomial in ``t``."""
    U0 = unitary(n, rng) if U0 is None else U0
    Hs = [hermitian(n, rng, scale) for _ in range(degree + 1)]
    return hermitian_polynomial_path(Hs, U0)


def hermitian_polynomial_path(Hs, U0):
    """``t -> expm(i sum_k t^k H_k) U0 R^n`` with exact derivative."""
    n = U0.shape[0]

    def H(t):
        return sum(t ** k * Hk for k, Hk in enumerate(Hs))

    def dH(t):
        return sum(k * t ** (k - 1) * Hk for k, Hk in enumerate(Hs) if k)

    def frame(t):
        return unitary_frame(scipy.linalg.expm(1j * H(t)) @ U0)

    def dframe(t):
        _, dE = scipy.linalg.expm_frechet(1j * H(t), 1j * dH(t))
        return unitary_frame(dE @ U0)

    return LagrangianPath(frame, standard_Omega(n), dframe)


def isotropic_generator(n, rank, rng, scale=1.0):
    """``X = J0 B D B^T`` with ``B`` spanning an isotropic subspace and ``rank D = rank``."""
    if not 0 <= rank <= n:
        raise ValueError("rank must lie in [0, n]")
    B = lagrangian_frame(n, rng).Z[:, :rank]
    D = symmetric(rank, rng, scale)
    return standard_J(n) @ B @ D @ B.T


def polynomial_generator(dim, rng, degree=2, scale=2.0):
    """Random ``S(t) = sum_k t^k C_k``."""
    return SymmetricPath.polynomial([symmetric(dim, rng, scale) for _ in range(degree + 1)])


def psd(dim, rng, rank=None, scale=1.0):
    rank = dim if rank is None else rank
    P = rng.standard_normal((rank, dim))
    return scale * P.T @ P
