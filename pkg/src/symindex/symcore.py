"""Dense linear algebra on the standard symplectic space.

Coordinates are interleaved, ``(x1, y1, x2, y2, ...)``, so that every 2x2
diagonal block is one complex line and ``J0`` acts on it as multiplication
by ``i``.  The symplectic form is ``omega0(u, v) = <J0 u, v>``; in matrix
form ``omega0(u, v) = u @ Omega @ v`` with ``Omega = J0.T``.  With this
choice the Hamiltonian vector field of ``H`` is ``J0 @ grad H`` and a
negative definite generator produces a negative Conley-Zehnder index.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
import scipy.linalg
from scipy.interpolate import CubicSpline

from .errors import Diverged, InvalidInput, NotSymplectic, NotTransverse

TOL_SYM = 1e-9
TOL_LAG = 1e-9
TOL_SP = 1e-7
TOL_ID = 1e-9
ZERO_TOL_REL = 1e-7
RANK_TOL = 1e-8
OVERFLOW_GUARD = 1e12


def standard_J(n):
    """Standard complex structure on R^{2n} (block ``[[0, -1], [1, 0]]``)."""
    return np.kron(np.eye(n), np.array([[0.0, -1.0], [1.0, 0.0]]))


def standard_Omega(n):
    """Gram matrix of ``omega0``: ``omega0(u, v) = u @ Omega @ v``."""
    return standard_J(n).T


def doubled_Omega(n):
    """Gram matrix of ``(-omega0) + omega0`` on R^{2n} x R^{2n}."""
    Om = standard_Omega(n)
    return scipy.linalg.block_diag(-Om, Om)


def compatible_J(Omega):
    """Complex structure with ``Omega(u, v) = <J u, v>``; needs orthogonal ``Omega``."""
    return np.asarray(Omega).T


@dataclass(frozen=True)
class SymplecticContext:
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise InvalidInput("half-dimension must be positive")

    @cached_property
    def J0(self):
        return standard_J(self.n)

    @cached_property
    def Omega(self):
        return standard_Omega(self.n)

    @property
    def dim(self):
        return 2 * self.n

    def omega(self, u, v):
        return float(np.asarray(u) @ self.Omega @ np.asarray(v))

    def doubled(self):
        """Form of the doubled space used by the graph construction."""
        return doubled_Omega(self.n)


def realify(z):
    """Complex vectors/matrices in C^n -> interleaved real coordinates."""
    z = np.asarray(z, dtype=complex)
    out = np.empty((2 * z.shape[0],) + z.shape[1:])
    out[0::2] = z.real
    out[1::2] = z.imag
    return out


def symplectic_defect(M, Omega):
    M = np.asarray(M)
    return float(np.max(np.abs(M.T @ Omega @ M - Omega)))


def is_symplectic(M, Omega=None, tol=TOL_SP):
    M = np.asarray(M, dtype=float)
    if Omega is None:
        Omega = standard_Omega(M.shape[0] // 2)
    return symplectic_defect(M, Omega) <= tol * max(1.0, np.linalg.norm(M, 2) ** 2)


# ---------------------------------------------------------------------------
# quadratic forms and signatures
# ---------------------------------------------------------------------------

class Signature(NamedTuple):
    p_plus: int
    p_zero: int
    p_minus: int

    @property
    def sign(self):
        return self.p_plus - self.p_minus

    @property
    def tilde_sign(self):
        return self.p_plus + self.p_zero - self.p_minus

    @property
    def dim(self):
        return self.p_plus + self.p_zero + self.p_minus


@dataclass(frozen=True)
class QuadraticForm:
    """Symmetric bilinear form given by its Gram matrix on ``basis`` (columns)."""

    G: np.ndarray
    basis: Optional[np.ndarray] = None

    def __post_init__(self):
        G = np.atleast_2d(np.asarray(self.G, dtype=float))
        if G.shape[0] != G.shape[1]:
            raise InvalidInput("Gram matrix must be square")
        object.__setattr__(self, "G", G)

    @property
    def dim(self):
        return self.G.shape[0]

    def is_symmetric(self, tol=TOL_SYM):
        scale = max(1.0, np.max(np.abs(self.G), initial=0.0))
        return bool(np.max(np.abs(self.G - self.G.T), initial=0.0) <= tol * scale)


def default_zero_tol(G):
    G = np.asarray(G, dtype=float)
    return ZERO_TOL_REL * (np.linalg.norm(G, 2) if G.size else 0.0)


def signature(q, zero_tol=None):
    """Inertia ``(p_plus, p_zero, p_minus)`` of a quadratic form.

    Eigenvalues in ``[-zero_tol, zero_tol]`` count as zero.  ``zero_tol``
    defaults to ``1e-7 * ||G||``.
    """
    G = q.G if isinstance(q, QuadraticForm) else np.atleast_2d(np.asarray(q, dtype=float))
    if G.size == 0:
        return Signature(0, 0, 0)
    if not np.all(np.isfinite(G)):
        raise InvalidInput("Gram matrix has non-finite entries")
    if zero_tol is None:
        zero_tol = default_zero_tol(G)
    if zero_tol < 0:
        raise InvalidInput("zero_tol must be nonnegative")
    ev = np.linalg.eigvalsh(0.5 * (G + G.T))
    return Signature(int(np.sum(ev > zero_tol)),
                     int(np.sum(np.abs(ev) <= zero_tol)),
                     int(np.sum(ev < -zero_tol)))


def numerical_rank(M, tol=RANK_TOL):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > tol * max(1.0, s[0])))


# ---------------------------------------------------------------------------
# Lagrangian frames
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LagrangianFrame:
    """Full column rank ``2N x N`` matrix whose image is Lagrangian for ``Omega``."""

    Z: np.ndarray
    Omega: np.ndarray
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        Z = np.asarray(self.Z, dtype=float)
        Om = np.asarray(self.Omega, dtype=float)
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "Omega", Om)
        if Z.ndim != 2 or Z.shape[0] != 2 * Z.shape[1] or Om.shape != (Z.shape[0],) * 2:
            raise InvalidInput(f"frame shape {Z.shape} incompatible with form {Om.shape}")
        if self.check:
            s = np.linalg.svd(Z, compute_uv=False)
            if s[-1] <= RANK_TOL * s[0]:
                raise InvalidInput("frame is rank deficient")
            Q = self.orthonormal
            if np.max(np.abs(Q.T @ Om @ Q)) > 1e3 * TOL_LAG:
                raise InvalidInput("frame is not Lagrangian")

    @property
    def n(self):
        return self.Z.shape[1]

    @cached_property
    def orthonormal(self):
        Q, _ = np.linalg.qr(self.Z)
        return Q

    @cached_property
    def complement(self):
        """Orthonormal basis of the Euclidean orthogonal complement."""
        Q, _ = np.linalg.qr(self.Z, mode="complete")
        return Q[:, self.n:]

    def lagrangian_defect(self):
        Q = self.orthonormal
        return float(np.max(np.abs(Q.T @ self.Omega @ Q)))

    def intersection_dim(self, other, tol=1e-8):
        s = np.linalg.svd(self.complement.T @ other.orthonormal, compute_uv=False)
        return int(np.sum(s < tol))

    def same_subspace(self, other, tol=1e-8):
        return bool(np.linalg.norm(self.complement.T @ other.orthonormal) < tol)

    def transformed(self, M):
        return LagrangianFrame(np.asarray(M) @ self.Z, self.Omega)


def horizontal(n):
    """The Lagrangian ``span(e_x1, ..., e_xn)``."""
    Z = np.zeros((2 * n, n))
    Z[0::2] = np.eye(n)
    return LagrangianFrame(Z, standard_Omega(n))


def vertical(n):
    Z = np.zeros((2 * n, n))
    Z[1::2] = np.eye(n)
    return LagrangianFrame(Z, standard_Omega(n))


def diagonal(n):
    """The diagonal of the doubled space."""
    I = np.eye(2 * n)
    return LagrangianFrame(np.vstack([I, I]), doubled_Omega(n))


def graph_lagrangian(Phi, ctx=None):
    """Graph of ``Phi`` as a Lagrangian frame in the doubled space."""
    Phi = np.asarray(Phi, dtype=float)
    ctx = ctx or SymplecticContext(Phi.shape[0] // 2)
    if Phi.shape != (ctx.dim, ctx.dim):
        raise InvalidInput("matrix size does not match context")
    if not is_symplectic(Phi, ctx.Omega):
        raise NotSymplectic(f"symplectic defect {symplectic_defect(Phi, ctx.Omega):.3e}")
    return LagrangianFrame(np.vstack([np.eye(ctx.dim), Phi]), ctx.doubled(), check=False)


def _pairing(L0, L1):
    # M[i, j] = Omega(L1 e_i, L0 e_j); F(v) = -i_v omega has matrix -M^T in these bases
    return L1.Z.T @ L0.Omega @ L0.Z


def graph_frame(q, L0, L1):
    """Frame of ``graph_{L0}^{L1} q``; columns are indexed by the basis of ``L0``."""
    G = q.G if isinstance(q, QuadraticForm) else np.atleast_2d(np.asarray(q, dtype=float))
    M = _pairing(L0, L1)
    return LagrangianFrame(L0.Z - L1.Z @ np.linalg.solve(M.T, G), L0.Omega, check=False)


def graph_over_decomposition(L, L0, L1, tol=1e-9):
    """Quadratic form ``q`` on ``L0`` with ``L = graph_{L0}^{L1} q``."""
    B = np.hstack([L0.Z, L1.Z])
    if np.linalg.svd(B, compute_uv=False)[-1] < tol:
        raise InvalidInput("L0 and L1 do not span")
    coef = np.linalg.solve(B, L.Z)
    n = L0.n
    A, C = coef[:n], coef[n:]
    if np.linalg.svd(A, compute_uv=False)[-1] < tol * max(1.0, np.linalg.norm(A)):
        raise NotTransverse("L meets L1 nontrivially")
    G = -_pairing(L0, L1).T @ C @ np.linalg.inv(A)
    return QuadraticForm(0.5 * (G + G.T), basis=L0.Z)


# ---------------------------------------------------------------------------
# paths
# ---------------------------------------------------------------------------

def _central_difference(f, t, h=1e-6, lo=0.0, hi=1.0):
    a, b = max(lo, t - h), min(hi, t + h)
    if b - a < 1.5 * h:
        # one-sided, second order
        if a == lo and t - lo < h:
            return (-3 * f(t) + 4 * f(t + h) - f(t + 2 * h)) / (2 * h)
        return (3 * f(t) - 4 * f(t - h) + f(t - 2 * h)) / (2 * h)
    return (f(b) - f(a)) / (b - a)


@dataclass(frozen=True)
class SymmetricPath:
    """``t -> S(t)``, a path of symmetric ``dim x dim`` matrices on [0, 1]."""

    func: Callable[[float], np.ndarray]
    dim: int
    kind: str = "generator"
    batch: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)

    def __call__(self, t):
        S = np.asarray(self.func(float(t)), dtype=float)
        return 0.5 * (S + S.T)

    def many(self, ts):
        """``S`` at every time in ``ts``, stacked along the first axis."""
        ts = np.asarray(ts, dtype=float)
        if self.batch is not None:
            S = np.asarray(self.batch(ts), dtype=float)
            return 0.5 * (S + np.swapaxes(S, 1, 2))
        return np.array([self(t) for t in ts])

    @classmethod
    def polynomial(cls, coeffs):
        """``S(t) = sum_k t^k C_k`` for symmetric ``C_k``."""
        C = np.asarray(coeffs, dtype=float)
        if C.ndim == 2:
            C = C[None]
        for Ck in C:
            _check_symmetric(Ck)

        def batch(ts):
            powers = np.power.outer(np.asarray(ts, dtype=float), np.arange(C.shape[0]))
            return np.einsum("tk,kij->tij", powers, C)

        return cls(lambda t: batch(np.array([t]))[0], C.shape[1], "polynomial", batch)

    @classmethod
    def constant(cls, S):
        S = np.asarray(S, dtype=float)
        _check_symmetric(S)
        return cls(lambda t: S, S.shape[0], "constant",
                   lambda ts: np.broadcast_to(S, (len(ts),) + S.shape))

    @classmethod
    def from_samples(cls, times, matrices):
        times = np.asarray(times, dtype=float)
        mats = np.asarray(matrices, dtype=float)
        for S in mats:
            _check_symmetric(S)
        spline = CubicSpline(times, mats, axis=0)
        return cls(spline, mats.shape[1], "samples", spline)

    def sym_defect(self, samples=33):
        return max(float(np.max(np.abs(S - S.T)))
                   for S in (np.asarray(self.func(t)) for t in np.linspace(0, 1, samples)))


def _check_symmetric(S):
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise InvalidInput("expected a square matrix")
    if not np.all(np.isfinite(S)):
        raise InvalidInput("non-finite entries")
    if np.max(np.abs(S - S.T), initial=0.0) > TOL_SYM * max(1.0, np.max(np.abs(S))):
        raise InvalidInput("matrix is not symmetric")


@dataclass(frozen=True)
class SymplecticPath:
    """``t -> Phi(t)`` in Sp(2n) on [0, 1] with ``Phi(0) = Id``.

    ``dfunc`` gives the exact derivative when known; otherwise derivatives
    are central differences.
    """

    func: Callable[[float], np.ndarray]
    dim: int
    provenance: str = "explicit"
    dfunc: Optional[Callable[[float], np.ndarray]] = None
    defect: Optional[float] = None
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def n(self):
        return self.dim // 2

    def __call__(self, t):
        return np.asarray(self.func(float(t)), dtype=float)

    def derivative(self, t):
        if self.dfunc is not None:
            return np.asarray(self.dfunc(float(t)), dtype=float)
        return _central_difference(self, float(t))

    def generator(self, t):
        """Symmetric ``S(t)`` with ``dPhi/dt = J0 S Phi``."""
        J = standard_J(self.n)
        S = -J @ self.derivative(t) @ np.linalg.inv(self(t))
        return 0.5 * (S + S.T)

    def check(self, samples=65, tol_sp=TOL_SP, tol_id=TOL_ID):
        """Return the max symplectic defect over a sample grid; raise if invalid."""
        Om = standard_Omega(self.n)
        if np.max(np.abs(self(0.0) - np.eye(self.dim))) > tol_id:
            raise InvalidInput("path does not start at the identity")
        worst = max(symplectic_defect(self(t), Om) for t in np.linspace(0, 1, samples))
        if worst > tol_sp:
            raise NotSymplectic(f"symplectic defect {worst:.3e}")
        return worst

    # --- closed forms -----------------------------------------------------

    @classmethod
    def identity(cls, n):
        I = np.eye(2 * n)
        Z = np.zeros((2 * n, 2 * n))
        return cls(lambda t: I, 2 * n, "closed-form", lambda t: Z, 0.0, {"kind": "identity"})

    @classmethod
    def rotation(cls, freqs):
        """``Phi(t) = (+)_k exp(-2 pi y_k J0 t)`` on 2x2 blocks."""
        y = np.asarray(freqs, dtype=float).ravel()
        n = y.size
        if n == 0:
            raise InvalidInput("need at least one frequency")

        def phi(t):
            out = np.zeros((2 * n, 2 * n))
            c, s = np.cos(2 * np.pi * y * t), np.sin(2 * np.pi * y * t)
            out[0::2, 0::2][np.diag_indices(n)] = c
            out[1::2, 1::2][np.diag_indices(n)] = c
            out[0::2, 1::2][np.diag_indices(n)] = s
            out[1::2, 0::2][np.diag_indices(n)] = -s
            return out

        J = standard_J(n)
        S = np.diag(np.repeat(-2 * np.pi * y, 2))
        return cls(phi, 2 * n, "closed-form", lambda t: J @ S @ phi(t), 0.0,
                   {"kind": "rotation", "freqs": y.tolist()})

    @classmethod
    def from_constant_S(cls, S):
        """``Phi(t) = expm(J0 S t)``."""
        S = np.asarray(S, dtype=float)
        _check_symmetric(S)
        if S.shape[0] % 2:
            raise InvalidInput("dimension must be even")
        A = standard_J(S.shape[0] // 2) @ S
        return cls(lambda t: scipy.linalg.expm(A * t), S.shape[0], "closed-form",
                   lambda t: A @ scipy.linalg.expm(A * t), 0.0, {"kind": "constant_S"})

    @classmethod
    def from_samples(cls, times, matrices):
        times = np.asarray(times, dtype=float)
        mats = np.asarray(matrices, dtype=float)
        if times.ndim != 1 or times[0] != 0.0 or times[-1] != 1.0 or np.any(np.diff(times) <= 0):
            raise InvalidInput("sample times must increase from 0 to 1")
        if mats.shape[0] != times.size or mats.shape[1] != mats.shape[2] or mats.shape[1] % 2:
            raise InvalidInput("sample matrices have the wrong shape")
        spline = CubicSpline(times, mats, axis=0)
        dspline = spline.derivative()
        Om = standard_Omega(mats.shape[1] // 2)
        defect = max(symplectic_defect(M, Om) for M in mats)
        return cls(spline, mats.shape[1], "samples", dspline, defect, {"kind": "samples"})

    # --- constructions ----------------------------------------------------

    def right_multiplied(self, X):
        """``t -> Phi(t) (1 + t X)``."""
        X = np.asarray(X, dtype=float)
        I = np.eye(self.dim)
        return SymplecticPath(lambda t: self(t) @ (I + t * X), self.dim, self.provenance,
                              lambda t: self.derivative(t) @ (I + t * X) + self(t) @ X,
                              self.defect, {"kind": "right_multiplied"})

    def rotated(self, eps):
        """``t -> exp(eps J0 t) Phi(t)``."""
        J = standard_J(self.n)
        I = np.eye(self.dim)

        def R(t):
            # J0^2 = -1, so the exponential is a rotation in closed form
            return np.cos(eps * t) * I + np.sin(eps * t) * J

        return SymplecticPath(lambda t: R(t) @ self(t), self.dim, self.provenance,
                              lambda t: R(t) @ (eps * J @ self(t) + self.derivative(t)),
                              self.defect, {"kind": "rotated", "eps": eps})

    def conjugated(self, A):
        """``t -> A Phi(t) A^{-1}`` for a fixed symplectic ``A``."""
        A = np.asarray(A, dtype=float)
        Ai = np.linalg.inv(A)
        return SymplecticPath(lambda t: A @ self(t) @ Ai, self.dim, self.provenance,
                              lambda t: A @ self.derivative(t) @ Ai, self.defect,
                              {"kind": "conjugated"})

    def then(self, other):
        """Catenation: run ``self`` on [0, 1/2], then ``other(.) Phi(1)`` on [1/2, 1]."""
        if other.dim != self.dim:
            raise InvalidInput("dimension mismatch")
        end = self(1.0)

        def f(t):
            return self(2 * t) if t <= 0.5 else other(2 * t - 1) @ end

        def df(t):
            return 2 * self.derivative(2 * t) if t <= 0.5 else 2 * other.derivative(2 * t - 1) @ end

        return SymplecticPath(f, self.dim, "composite", df,
                              max(self.defect or 0.0, other.defect or 0.0), {"kind": "catenation"})

    def direct_sum(self, other):
        # block_diag of interleaved coordinates stays interleaved
        def f(t):
            return scipy.linalg.block_diag(self(t), other(t))

        def df(t):
            return scipy.linalg.block_diag(self.derivative(t), other.derivative(t))

        return SymplecticPath(f, self.dim + other.dim, "composite", df,
                              max(self.defect or 0.0, other.defect or 0.0), {"kind": "direct_sum"})


# ---------------------------------------------------------------------------
# fundamental solutions
# ---------------------------------------------------------------------------

_GAUSS = (0.5 - np.sqrt(3) / 6, 0.5 + np.sqrt(3) / 6)


def _magnus4(A1, A2, h):
    return 0.5 * h * (A1 + A2) + (np.sqrt(3) / 12) * h * h * (A2 @ A1 - A1 @ A2)


def integrate_fundamental(S, steps=1000):
    """Fundamental solution of ``x' = J0 S(t) x`` on [0, 1].

    Fourth-order Magnus scheme with two Gauss points per step; each step
    is an exact exponential of a Hamiltonian matrix, so the result stays
    symplectic up to rounding.  Between grid points the path is evaluated
    by a partial Magnus step from the previous node.
    """
    if steps < 1:
        raise InvalidInput("steps must be >= 1")
    dim = S.dim
    if dim % 2:
        raise InvalidInput("dimension must be even")
    J = standard_J(dim // 2)
    h = 1.0 / steps
    t0 = np.arange(steps) * h
    A1 = J @ S.many(t0 + _GAUSS[0] * h)
    A2 = J @ S.many(t0 + _GAUSS[1] * h)
    steps_exp = scipy.linalg.expm(_magnus4(A1, A2, h))
    nodes = np.empty((steps + 1, dim, dim))
    nodes[0] = np.eye(dim)
    for k in range(steps):
        nodes[k + 1] = steps_exp[k] @ nodes[k]
        if not np.isfinite(nodes[k + 1]).all() or np.abs(nodes[k + 1]).max() > OVERFLOW_GUARD:
            raise Diverged(f"fundamental solution blew up near t={(k + 1) * h:.4g}")
    Om = standard_Omega(dim // 2)
    defect = max(symplectic_defect(M, Om) for M in nodes[:: max(1, steps // 64)])
    defect = max(defect, symplectic_defect(nodes[-1], Om))

    def phi(t):
        k = min(int(t / h), steps - 1) if t < 1.0 else steps
        tau = t - k * h
        if k == steps or tau <= 0.0:
            return nodes[k]
        a1, a2 = J @ S.many(k * h + np.array(_GAUSS) * tau)
        return scipy.linalg.expm(_magnus4(a1, a2, tau)) @ nodes[k]

    return SymplecticPath(phi, dim, "integrated", lambda t: J @ S(t) @ phi(t), defect,
                          {"kind": "integrated", "steps": steps, "nodes": nodes})


# ---------------------------------------------------------------------------
# isotropic generators
# ---------------------------------------------------------------------------

def is_isotropic_generator(X, tol_sym=TOL_SYM, tol_lag=TOL_LAG, samples=(-2.0, -0.5, 0.5, 1.0, 3.0)):
    """Check ``X`` against both descriptions of the set of isotropic generators.

    Returns ``(ok, diagnostics)``; ``ok`` requires ``J0 X`` symmetric with
    isotropic image, and ``1 + tX`` symplectic at the sampled ``t``.
    """
    X = np.asarray(X, dtype=float)
    diag = {"square": X.ndim == 2 and X.shape[0] == X.shape[1] and X.shape[0] % 2 == 0}
    if not diag["square"]:
        return False, diag
    n = X.shape[0] // 2
    J, Om = standard_J(n), standard_Omega(n)
    scale = max(1.0, np.max(np.abs(X)))
    JX = J @ X
    diag["sp_defect"] = float(np.max(np.abs(JX - JX.T)) / scale)
    diag["in_sp"] = diag["sp_defect"] <= tol_sym
    U, s, _ = np.linalg.svd(X)
    r = int(np.sum(s > RANK_TOL * scale))
    B = U[:, :r]
    diag["rank"] = r
    diag["isotropy_defect"] = float(np.max(np.abs(B.T @ Om @ B), initial=0.0))
    diag["isotropic_image"] = diag["isotropy_defect"] <= tol_lag
    I = np.eye(2 * n)
    worst = 0.0
    for t in samples:
        M = I + t * X
        worst = max(worst, symplectic_defect(M, Om) / max(1.0, abs(t) * scale) ** 2)
    diag["affine_defect"] = worst
    diag["affine_symplectic"] = worst <= max(tol_sym, tol_lag) * 10
    ok = diag["in_sp"] and diag["isotropic_image"] and diag["affine_symplectic"]
    return bool(ok), diag
