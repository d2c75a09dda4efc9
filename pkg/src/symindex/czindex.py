"""Conley-Zehnder index of symplectic paths.

The index is the Maslov index of the graph path ``t -> (1 x Phi(t)) Delta``
against the diagonal of the doubled space.  Conventions are pinned by two
calibrations: the constant identity has index 0 and ``exp(-pi J0 t)`` has
index -1 in dimension two.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .errors import AmbiguousFloor, DegenerateArc, EpsilonUnstable, InvalidInput, IrregularEndpoint
from .maslov import DEFAULT_GRID, LagrangianPath, maslov_report
from .symcore import (
    SymmetricPath,
    SymplecticPath,
    diagonal,
    doubled_Omega,
    integrate_fundamental,
)

KERNEL_REL_TOL = 1e-7
DEFAULT_EPS = 1e-4
FLOOR_GUARD = 1e-12


@dataclass(frozen=True)
class IndexResult:
    value: Fraction
    kernel_dim: int
    crossings: list = field(default_factory=list, repr=False)
    perturbation_used: Optional[float] = None

    @property
    def max_value(self):
        return self.value + Fraction(self.kernel_dim, 2)

    def as_dict(self):
        return {"cz": half_str(self.value), "kernel_dim": self.kernel_dim,
                "max_cz": half_str(self.max_value)}


def half_str(x):
    """Exact string for a half-integer: ``"-3/2"`` or ``"2"``."""
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def kernel_dim(M, rel_tol=KERNEL_REL_TOL):
    """``dim Ker(M - Id)``."""
    M = np.asarray(M, dtype=float)
    s = np.linalg.svd(M - np.eye(M.shape[0]), compute_uv=False)
    return int(np.sum(s < rel_tol * max(1.0, np.linalg.norm(M, 2))))


def _graph_index(path, grid):
    rep = maslov_report(LagrangianPath.graph(path), diagonal(path.n), grid=grid)
    return rep


def cz_index(path: SymplecticPath, grid=DEFAULT_GRID, eps=DEFAULT_EPS):
    """Conley-Zehnder index as an :class:`IndexResult`.

    When the crossing at ``t = 0`` is degenerate (singular ``S(0)``) or the
    graph path stays in the diagonal's train on an arc, the index is read
    off the rotated path ``exp(eps J0 t) Phi(t)`` minus half the kernel
    dimension at ``t = 1``; ``perturbation_used`` records ``eps``.
    """
    k = kernel_dim(path(1.0))
    try:
        rep = _graph_index(path, grid)
        return IndexResult(rep.value, k, rep.crossings, rep.perturbation)
    except (IrregularEndpoint, DegenerateArc) as err:
        if isinstance(err, IrregularEndpoint) and err.t != 0.0:
            raise
    rep = _rotated_index(path, eps, grid)
    return IndexResult(rep.value - Fraction(k, 2), k, rep.crossings, eps)


def _rotated_index(path, eps, grid):
    rot = path.rotated(eps)
    if kernel_dim(rot(1.0)):
        raise EpsilonUnstable(f"rotation by eps={eps:g} does not clear the kernel at t=1")
    return _graph_index(rot, grid)


def max_cz_index(path: SymplecticPath, eps=DEFAULT_EPS, grid=DEFAULT_GRID):
    """``cz + dim Ker(Phi(1) - Id) / 2``, cross-checked against small rotations.

    The formula value must equal the index of ``exp(e J0 t) Phi(t)`` for
    ``e = eps`` and ``e = eps / 2``; any disagreement raises
    :class:`EpsilonUnstable`.
    """
    if eps <= 0:
        raise InvalidInput("eps must be positive")
    formula = cz_index(path, grid, eps).max_value
    routes = [_rotated_index(path, e, grid).value for e in (eps, eps / 2)]
    if any(r != formula for r in routes):
        raise EpsilonUnstable(f"max index unstable: formula {formula}, rotations {routes}")
    return formula


def rotation_path(freqs):
    """``Phi(t) = (+)_k exp(-2 pi y_k J0 t)`` in 2x2 blocks."""
    return SymplecticPath.rotation(freqs)


def rotation_cz(y):
    """Closed-form ``(cz, kernel_dim)`` of ``exp(-2 pi y J0 t)`` in dimension two."""
    y = Fraction(y)
    if y.denominator == 1:
        return int(-2 * y), 2
    return -1 - 2 * math.floor(y), 0


# ---------------------------------------------------------------------------
# strict floor and comparison bounds
# ---------------------------------------------------------------------------

def floor_strict(x, guard=0.0):
    """Largest integer strictly less than ``x``.

    Exact on the binary value of ``x``.  With ``guard > 0``, arguments within
    ``guard`` of an integer raise :class:`AmbiguousFloor`.
    """
    if not math.isfinite(x):
        raise InvalidInput("floor_strict needs a finite argument")
    if guard > 0 and abs(x - round(x)) <= guard:
        raise AmbiguousFloor(x)
    return math.ceil(Fraction(x)) - 1


def bound_negative_definite(C, n):
    """Upper bound on the max index when ``S(t) <= -C``."""
    return -n - 2 * n * floor_strict(C / (2 * math.pi), FLOOR_GUARD)


def bound_block(C, dimV, n):
    """Upper bound when ``S(t) <= -C`` on a complex subspace of dimension ``dimV`` and ``< 0`` off it."""
    if not 0 <= dimV <= n:
        raise InvalidInput("complex dimension of V must lie in [0, n]")
    return -n - 2 * dimV * floor_strict(C / (2 * math.pi), FLOOR_GUARD)


# ---------------------------------------------------------------------------
# spectral flow through the endpoint path
# ---------------------------------------------------------------------------

class EndpointPath:
    """``s -> (1 x Phi^s(1)) Delta`` with ``Phi^s`` integrated on demand."""

    def __init__(self, homotopy: Callable[[float], SymmetricPath], steps, h=1e-6):
        self.homotopy = homotopy
        self.steps = steps
        self.h = h
        self.cache = {}
        self.dim = homotopy(0.0).dim

    def end(self, s):
        s = float(s)
        if s not in self.cache:
            self.cache[s] = integrate_fundamental(self.homotopy(s), self.steps)(1.0)
        return self.cache[s]

    def frame(self, s):
        return np.vstack([np.eye(self.dim), self.end(s)])

    def dframe(self, s):
        a, b = max(0.0, s - self.h), min(1.0, s + self.h)
        if b - a < 1.5 * self.h:
            sign = 1.0 if a == 0.0 else -1.0
            d = sign * (-3 * self.end(s) + 4 * self.end(s + sign * self.h)
                        - self.end(s + 2 * sign * self.h)) / (2 * self.h)
        else:
            d = (self.end(b) - self.end(a)) / (b - a)
        return np.vstack([np.zeros((self.dim, self.dim)), d])

    def as_lagrangian_path(self):
        return LagrangianPath(self.frame, doubled_Omega(self.dim // 2), self.dframe)


def spectral_flow_endpoint_path(homotopy, samples=16, steps=400, max_levels=6):
    """Maslov index of the endpoint path of a homotopy of generators.

    ``homotopy(s)`` returns the :class:`SymmetricPath` ``S^s``.  The crossing
    scan starts on ``samples`` intervals and doubles until two successive
    levels agree.
    """
    ep = EndpointPath(homotopy, steps)
    path = ep.as_lagrangian_path()
    Delta = diagonal(ep.dim // 2)
    grid = max(2, int(samples))
    prev = None
    for _ in range(max_levels):
        val = maslov_report(path, Delta, grid=grid).value
        if val == prev:
            return val
        prev = val
        grid *= 2
    raise EpsilonUnstable("endpoint-path index did not stabilize under refinement")


def linear_homotopy(S0: SymmetricPath, S1: SymmetricPath):
    """``s -> (1 - s) S0 + s S1`` as a family of :class:`SymmetricPath`."""
    def at(s):
        return SymmetricPath(lambda t: (1 - s) * S0(t) + s * S1(t), S0.dim, "homotopy",
                             lambda ts: (1 - s) * S0.many(ts) + s * S1.many(ts))
    return at
