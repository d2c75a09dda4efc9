"""Hamiltonian flows on R^{2n}, their linearizations and action functionals.

The flow is ``x' = J0 DH(x)``; with ``J0`` the block ``[[0, -1], [1, 0]]``
the Hamiltonian ``pi |z|^2`` has 1-periodic circular orbits, which fixes the
sign realization of ``i_{X_H} omega = -dH``.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
import scipy.integrate
import scipy.linalg

from .czindex import IndexResult, cz_index, max_cz_index
from .errors import Diverged, InvalidInput
from .poly import Polynomial
from .symcore import (
    OVERFLOW_GUARD,
    TOL_SYM,
    SymmetricPath,
    SymplecticPath,
    integrate_fundamental,
    standard_J,
    standard_Omega,
)

ORBIT_TOL = 1e-8
DEFAULT_STEPS = 1000


@dataclass(frozen=True)
class HamiltonianModel:
    """Value, gradient and Hessian of ``H`` on R^{2n}.

    ``flow_exact(x0, t)`` and ``linear_exact(x0, t)``, when present, give the
    flow and its differential in closed form.
    """

    n: int
    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    hess: Callable[[np.ndarray], np.ndarray]
    kind: str = "closed-form"
    flow_exact: Optional[Callable] = field(default=None, compare=False)
    linear_exact: Optional[Callable] = field(default=None, compare=False)
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def dim(self):
        return 2 * self.n

    def vector_field(self, x):
        return standard_J(self.n) @ self.grad(x)

    def check(self, rng=None, probes=5, h=1e-6, rel=1e-5):
        """Finite-difference consistency of ``grad`` and symmetry of ``hess``."""
        rng = rng or np.random.default_rng(0)
        worst = 0.0
        for _ in range(probes):
            x = 0.5 * rng.standard_normal(self.dim)
            g = self.grad(x)
            fd = np.array([(self.value(x + h * e) - self.value(x - h * e)) / (2 * h)
                           for e in np.eye(self.dim)])
            worst = max(worst, np.linalg.norm(fd - g) / max(1.0, np.linalg.norm(g)))
            H = self.hess(x)
            if np.max(np.abs(H - H.T)) > TOL_SYM * max(1.0, np.max(np.abs(H))):
                raise InvalidInput("Hessian is not symmetric")
        if worst > rel:
            raise InvalidInput(f"gradient disagrees with finite differences ({worst:.2e})")
        return worst

    # --- constructors -----------------------------------------------------

    @classmethod
    def constant(cls, c, n):
        d = 2 * n
        return cls(n, lambda x: float(c), lambda x: np.zeros(d), lambda x: np.zeros((d, d)),
                   "closed-form", lambda x0, t: np.array(x0, dtype=float),
                   lambda x0, t: np.eye(d), {"kind": "constant", "c": c})

    @classmethod
    def quadratic(cls, Q):
        """``H(x) = <x, Q x> / 2``."""
        Q = np.asarray(Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or Q.shape[0] % 2:
            raise InvalidInput("Q must be square of even size")
        if np.max(np.abs(Q - Q.T)) > TOL_SYM * max(1.0, np.max(np.abs(Q))):
            raise InvalidInput("Q must be symmetric")
        n = Q.shape[0] // 2
        A = standard_J(n) @ Q
        return cls(n, lambda x: 0.5 * float(x @ Q @ x), lambda x: Q @ x, lambda x: Q,
                   "closed-form", lambda x0, t: scipy.linalg.expm(A * t) @ x0,
                   lambda x0, t: scipy.linalg.expm(A * t), {"kind": "quadratic"})

    @classmethod
    def profile(cls, f, df, d2f, chi, n, quadratic=None):
        """``H = chi o f`` from ``f`` with derivatives and a profile ``chi``.

        ``chi`` must provide ``value``, ``d1`` and ``d2``.  When ``quadratic``
        ``= (a, m, c)`` describes ``f(x) = sum_k a_k |x_k - m_k|^2 + c`` on
        complex blocks, flows and linearizations are evaluated in closed form.
        """
        def value(x):
            return float(chi.value(f(x)))

        def grad(x):
            return chi.d1(f(x)) * df(x)

        def hess(x):
            g = df(x)
            u = f(x)
            return chi.d2(u) * np.outer(g, g) + chi.d1(u) * d2f(x)

        flow_exact = linear_exact = None
        if quadratic is not None:
            flow_exact, linear_exact = _quadratic_profile_flows(chi, *quadratic, n)
        return cls(n, value, grad, hess, "profile", flow_exact, linear_exact,
                   {"kind": "profile", "quadratic": quadratic is not None})

    @classmethod
    def from_samples(cls, points, values, degree=2):
        """Least-squares polynomial fit of ``H`` to scattered samples."""
        X = np.atleast_2d(np.asarray(points, dtype=float))
        y = np.asarray(values, dtype=float).ravel()
        if X.shape[0] != y.size or X.shape[1] % 2:
            raise InvalidInput("samples need matching points/values in even dimension")
        poly, resid = Polynomial.fit(X, y, degree)
        return cls(X.shape[1] // 2, poly.value, poly.grad, poly.hess, "sampled", None, None,
                   {"kind": "samples", "degree": degree, "fit_residual": resid})


def _quadratic_profile_flows(chi, a, m, c, n):
    """Closed forms for ``chi o f`` with ``f = sum a_k |x_k - m_k|^2 + c``.

    Each block rotates about ``m`` with angular speed ``2 a_k chi'(u)``; the
    differential picks up the rank-one term from ``chi''``.
    """
    a = np.repeat(np.asarray(a, dtype=float), 2)
    m = np.asarray(m, dtype=float)
    J = standard_J(n)
    A = np.diag(a)

    def level(x0):
        y = np.asarray(x0, dtype=float) - m
        return float(y @ A @ y + c), y

    def rot(theta):
        out = np.zeros((2 * n, 2 * n))
        for k in range(n):
            ck, sk = math.cos(theta[2 * k]), math.sin(theta[2 * k])
            out[2 * k:2 * k + 2, 2 * k:2 * k + 2] = [[ck, -sk], [sk, ck]]
        return out

    def flow(x0, t):
        u, y = level(x0)
        return m + rot(2 * chi.d1(u) * a * t) @ y

    def linear(x0, t):
        u, y = level(x0)
        E = rot(2 * chi.d1(u) * a * t)
        g = 2 * A @ y
        # d/dx0 of exp(2 chi'(f(x0)) J A t) y
        return E + t * chi.d2(u) * np.outer(E @ J @ (2 * A) @ y, g)

    return flow, linear


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    points: np.ndarray
    dense: Optional[Callable] = field(default=None, repr=False)

    def at(self, t):
        if self.dense is not None:
            return self.dense(t)
        return np.array([np.interp(t, self.times, self.points[:, j]) for j in range(self.points.shape[1])])


def flow(H: HamiltonianModel, x0, T=1.0, steps=DEFAULT_STEPS):
    """Trajectory of ``x' = J0 DH(x)`` on ``[0, T]`` sampled at ``steps + 1`` times."""
    if steps < 1:
        raise InvalidInput("steps must be >= 1")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (H.dim,):
        raise InvalidInput("initial point has the wrong dimension")
    times = np.linspace(0.0, T, steps + 1)
    if H.flow_exact is not None:
        pts = np.array([H.flow_exact(x0, t) for t in times])
        traj = Trajectory(times, pts, lambda t: H.flow_exact(x0, t))
    else:
        J = standard_J(H.n)
        sol = scipy.integrate.solve_ivp(lambda t, x: J @ H.grad(x), (0.0, T), x0, method="DOP853",
                                        t_eval=times, rtol=1e-12, atol=1e-12, dense_output=True)
        if not sol.success:
            raise Diverged(sol.message)
        traj = Trajectory(times, sol.y.T, sol.sol)
    if not np.all(np.isfinite(traj.points)) or np.max(np.abs(traj.points)) > OVERFLOW_GUARD:
        raise Diverged("trajectory left the overflow guard")
    return traj


def linearized_path(H: HamiltonianModel, x0, T=1.0, steps=DEFAULT_STEPS):
    """``s -> (phi^H_{sT})_{*x0}`` as a :class:`SymplecticPath` on ``s in [0, 1]``."""
    x0 = np.asarray(x0, dtype=float)
    if H.linear_exact is not None:
        def phi(s):
            return H.linear_exact(x0, s * T)

        return SymplecticPath(phi, H.dim, "closed-form", None, 0.0, {"kind": "linearized", "T": T})
    traj = flow(H, x0, T, steps)
    S = SymmetricPath(lambda s: T * H.hess(traj.at(s * T)), H.dim, "linearized")
    return integrate_fundamental(S, steps)


def action(H: HamiltonianModel, x0, steps=DEFAULT_STEPS):
    """``A_H(x0) = -int_0^1 DH(x).x / 2 dt + H(x0)`` (Simpson on the flow grid)."""
    traj = flow(H, x0, 1.0, steps)
    integrand = np.array([0.5 * H.grad(x) @ x for x in traj.points])
    return float(-scipy.integrate.simpson(integrand, x=traj.times) + H.value(np.asarray(x0, dtype=float)))


def action_correction(n, max_cz, kappa):
    """``(1/kappa) floor((n + max_cz)/2)``; exact floor on the half-integer argument."""
    if kappa == 0:
        raise InvalidInput("kappa must be nonzero")
    return math.floor((n + Fraction(max_cz)) / 2) / kappa


def action_hat(H: HamiltonianModel, x0, kappa, max_cz=None, steps=DEFAULT_STEPS):
    """Action plus the index correction ``(1/kappa) floor((n + max_cz)/2)``."""
    if kappa == 0:
        raise InvalidInput("kappa must be nonzero")
    if max_cz is None:
        max_cz = max_cz_index(linearized_path(H, x0, steps=steps))
    return action(H, x0, steps) + action_correction(H.n, max_cz, kappa)


# ---------------------------------------------------------------------------
# orbits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OrbitRecord:
    x0: np.ndarray
    period_check: float
    periodic: bool
    trajectory: Trajectory = field(repr=False)
    linearized: SymplecticPath = field(repr=False)
    action: float
    index: IndexResult
    level: Optional[float] = None


def orbit_record(H: HamiltonianModel, x0, steps=DEFAULT_STEPS, orbit_tol=None, level=None):
    x0 = np.asarray(x0, dtype=float)
    traj = flow(H, x0, 1.0, steps)
    gap = float(np.linalg.norm(traj.points[-1] - x0))
    tol = orbit_tol if orbit_tol is not None else ORBIT_TOL * (2 if H.kind == "sampled" else 1)
    lin = linearized_path(H, x0, steps=steps)
    return OrbitRecord(x0, gap, gap <= tol, traj, lin, action(H, x0, steps), cz_index(lin), level)


# ---------------------------------------------------------------------------
# reparametrization
# ---------------------------------------------------------------------------

def reparametrization_generator(H: HamiltonianModel, d2chi_at_H, x):
    """``xi -> chi''(H(x)) omega(xi, X_H(x)) X_H(x)`` as a matrix."""
    g = H.vector_field(np.asarray(x, dtype=float))
    Om = standard_Omega(H.n)
    return d2chi_at_H * np.outer(g, Om @ g)


def reparametrization_defect(H: HamiltonianModel, chi, x, t, xi, steps=DEFAULT_STEPS):
    """Relative gap between both sides of the time-change formula for ``chi o H``.

    Compares ``(phi^{chi o H}_t)_* xi`` with
    ``(phi^H_{chi'(H(x)) t})_* (xi + t X xi)``, ``X`` from
    :func:`reparametrization_generator`.
    """
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    K = compose(chi, H)
    h = H.value(x)
    lhs = linearized_path(K, x, T=t, steps=steps)(1.0) @ xi
    X = reparametrization_generator(H, chi.d2(h), x)
    base = linearized_path(H, x, T=chi.d1(h) * t, steps=steps)(1.0)
    rhs = base @ (xi + t * X @ xi)
    return float(np.linalg.norm(lhs - rhs) / max(1e-300, np.linalg.norm(lhs)))


def compose(chi, H: HamiltonianModel):
    """``chi o H`` for any model (no closed forms carried over)."""
    return HamiltonianModel.profile(H.value, H.grad, H.hess, chi, H.n)


@dataclass(frozen=True)
class PolyProfile:
    """``chi(u) = sum_k c_k u^k``; a convenient smooth profile for tests."""

    coeffs: tuple

    def value(self, u):
        return float(np.polynomial.polynomial.polyval(u, self.coeffs))

    def d1(self, u):
        return float(np.polynomial.polynomial.polyval(u, np.polynomial.polynomial.polyder(self.coeffs)))

    def d2(self, u):
        return float(np.polynomial.polynomial.polyval(u, np.polynomial.polynomial.polyder(self.coeffs, 2)))
