"""Convex bodies through their squared gauge, mollification and capacities.

For a convex body ``U`` containing the origin, ``p`` is its gauge
(Minkowski functional) and ``f = p^2`` is 2-homogeneous with ``f = 1`` on
``dU``.  Capacities are ``2 pi / a`` where ``a`` bounds ``D^2 f`` from below,
either on the whole space or along a complex line.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable, Optional

import numpy as np
import scipy.integrate
import scipy.optimize
import scipy.stats.qmc

from .czindex import cz_index, floor_strict, kernel_dim, max_cz_index
from .errors import (
    CannotSeparate,
    DeltaTooLarge,
    InvalidInput,
    OriginUndefined,
    RegimeViolation,
    Uncertified,
)
from .hamflow import HamiltonianModel, action, action_correction, linearized_path
from .poly import Polynomial
from .symcore import realify

SPHERE_SAMPLES = 4096
GAUGE_RTOL = 1e-12
MOLLIFIER_ORDER = 8


# ---------------------------------------------------------------------------
# sphere samples
# ---------------------------------------------------------------------------

def sphere_samples(dim, count=SPHERE_SAMPLES, seed=0):
    """Deterministic, well spread points on the unit sphere of R^dim.

    Circle: equally spaced angles.  2-sphere: Fibonacci lattice.  Higher
    dimensions: scrambled Sobol points pushed through the normal quantile
    and normalized.
    """
    if dim == 2:
        th = 2 * np.pi * (np.arange(count) + 0.5) / count
        return np.column_stack([np.cos(th), np.sin(th)])
    if dim == 3:
        k = np.arange(count) + 0.5
        z = 1 - 2 * k / count
        phi = np.pi * (1 + 5 ** 0.5) * k
        r = np.sqrt(1 - z * z)
        return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    m = int(math.ceil(math.log2(count)))
    u = scipy.stats.qmc.Sobol(dim, scramble=True, seed=seed).random_base2(m)[:count]
    g = scipy.stats.norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _covering_radius(pts, probes=2048, seed=1):
    """Largest distance from random sphere points to the sample set (estimate)."""
    rng = np.random.default_rng(seed)
    q = rng.standard_normal((probes, pts.shape[1]))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    d = np.sqrt(np.maximum(0.0, 2 - 2 * np.max(q @ pts.T, axis=1)))
    return float(np.max(d))


# ---------------------------------------------------------------------------
# bodies
# ---------------------------------------------------------------------------

class ConvexBodyModel:
    """Interface shared by all bodies; arrays of points are ``(N, 2n)``."""

    n: int
    kind: str
    smooth: bool = True

    @property
    def dim(self):
        return 2 * self.n

    def gauge(self, X):
        raise NotImplementedError

    def gauge_sq(self, X):
        return self.gauge(X) ** 2

    def grad_sq(self, X):
        raise NotImplementedError

    def hess_sq(self, X):
        raise NotImplementedError

    quadratic_data = None

    def df_sup_on_double(self, samples=SPHERE_SAMPLES):
        """``sup |Df|`` over ``2U``; ``Df`` is 1-homogeneous, so this is 2 * sup over dU."""
        Y = self.boundary_points(sphere_samples(self.dim, samples))
        return 2.0 * float(np.max(np.linalg.norm(self.grad_sq(Y), axis=1)))

    def boundary_points(self, dirs):
        dirs = np.atleast_2d(dirs)
        return dirs / self.gauge(dirs)[:, None]

    def inradius(self, samples=SPHERE_SAMPLES):
        return float(1.0 / np.max(self.gauge(sphere_samples(self.dim, samples))))


@dataclass(frozen=True)
class Ellipsoid(ConvexBodyModel):
    """``E(r_1, ..., r_n) = {sum |z_k|^2 / r_k^2 < 1}``."""

    radii: tuple
    kind: str = "ellipsoid"

    def __post_init__(self):
        r = tuple(float(x) for x in np.atleast_1d(self.radii))
        if not r or min(r) <= 0:
            raise InvalidInput("radii must be positive")
        object.__setattr__(self, "radii", r)

    @property
    def n(self):
        return len(self.radii)

    @cached_property
    def A(self):
        return np.repeat(1.0 / np.asarray(self.radii) ** 2, 2)

    def gauge_sq(self, X):
        X = np.asarray(X, dtype=float)
        return (X * X) @ self.A if X.ndim == 2 else float((X * X) @ self.A)

    def gauge(self, X):
        return np.sqrt(self.gauge_sq(X))

    def grad_sq(self, X):
        return 2 * np.asarray(X, dtype=float) * self.A

    def hess_sq(self, X):
        X = np.asarray(X, dtype=float)
        H = np.diag(2 * self.A)
        return np.broadcast_to(H, X.shape[:-1] + H.shape) if X.ndim == 2 else H

    @property
    def quadratic_data(self):
        return (1.0 / np.asarray(self.radii) ** 2, np.zeros(self.dim), 0.0)

    def as_level_set(self):
        """The same ellipsoid presented through a polynomial defining function."""
        exps, coefs = [], []
        for k, r in enumerate(self.radii):
            for j in (2 * k, 2 * k + 1):
                e = [0] * self.dim
                e[j] = 2
                exps.append(e)
                coefs.append(1.0 / r ** 2)
        exps.append([0] * self.dim)
        coefs.append(-1.0)
        return LevelSetBody.from_polynomial(Polynomial(exps, coefs), self.n)


@dataclass(frozen=True)
class LevelSetBody(ConvexBodyModel):
    """``U = {F < 0}`` for a strictly convex ``F`` with ``F(0) < 0``.

    ``F``, ``dF`` and ``d2F`` act on ``(N, 2n)`` stacks.  The gauge is found
    by bisection along rays; its derivatives follow from the implicit
    equation ``F(x / p(x)) = 0``.
    """

    n: int
    F: Callable
    dF: Callable
    d2F: Optional[Callable] = None
    kind: str = "general"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if float(np.atleast_1d(self.F(np.zeros((1, 2 * self.n))))[0]) >= 0:
            raise InvalidInput("origin must lie inside the body (F(0) < 0)")

    @classmethod
    def from_polynomial(cls, poly, n, **meta):
        return cls(n, poly.value, poly.grad, poly.hess, "general", {"F": poly.as_dict(), **meta})

    def _radius(self, dirs):
        """``r`` with ``F(r * d) = 0`` for unit directions ``d``."""
        hi = np.ones(dirs.shape[0])
        for _ in range(200):
            out = self.F(hi[:, None] * dirs) < 0
            if not out.any():
                break
            hi = np.where(out, 2 * hi, hi)
        else:
            raise InvalidInput("body is unbounded along some direction")
        lo = np.zeros_like(hi)
        while np.max((hi - lo) / hi) > GAUGE_RTOL:
            mid = 0.5 * (lo + hi)
            inside = self.F(mid[:, None] * dirs) < 0
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
        return 0.5 * (lo + hi)

    def gauge(self, X):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        nrm = np.linalg.norm(X, axis=1)
        if np.any(nrm == 0):
            raise OriginUndefined("gauge derivatives are undefined at the origin")
        p = nrm / self._radius(X / nrm[:, None])
        return float(p[0]) if single else p

    def _pieces(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        p = np.atleast_1d(self.gauge(X))
        Y = X / p[:, None]
        nu = np.atleast_2d(self.dF(Y))
        s = np.einsum("ij,ij->i", nu, Y)
        return p, Y, nu, s

    def grad_sq(self, X):
        single = np.asarray(X).ndim == 1
        p, Y, nu, s = self._pieces(X)
        out = 2 * p[:, None] * nu / s[:, None]
        return out[0] if single else out

    def hess_sq(self, X):
        single = np.asarray(X).ndim == 1
        p, Y, nu, s = self._pieces(X)
        gp = nu / s[:, None]
        if self.d2F is not None:
            D2 = np.atleast_3d(self.d2F(Y)).reshape(-1, self.dim, self.dim)
        else:
            D2 = _fd_jacobian(self.dF, Y)
        I = np.eye(self.dim)
        P = (I[None] - np.einsum("ni,nj->nij", Y, gp)) / p[:, None, None]
        # D^2 p = p P^T D^2F P / s, and D^2 f = 2 grad p grad p^T + 2 p D^2 p
        Hp = p[:, None, None] * np.einsum("nki,nkl,nlj->nij", P, D2, P) / s[:, None, None]
        out = 2 * np.einsum("ni,nj->nij", gp, gp) + 2 * p[:, None, None] * Hp
        return out[0] if single else out


@dataclass(frozen=True)
class GaugeBody(ConvexBodyModel):
    """Convex body given only by its gauge ``p`` (possibly nonsmooth)."""

    n: int
    p: Callable
    kind: str = "convex"
    smooth: bool = False
    meta: dict = field(default_factory=dict, compare=False)

    def gauge(self, X):
        X = np.asarray(X, dtype=float)
        return float(self.p(X[None])[0]) if X.ndim == 1 else self.p(X)

    @classmethod
    def cube(cls, n, half_width=1.0):
        """``(-w, w)^{2n}``, the polydisc-free box; its gauge is the sup norm / w."""
        return cls(n, lambda X: np.max(np.abs(X), axis=1) / half_width, meta={"shape": "cube"})

    def grad_sq(self, X):
        raise InvalidInput("nonsmooth body: mollify before differentiating")

    def hess_sq(self, X):
        raise InvalidInput("nonsmooth body: mollify before differentiating")


def _fd_jacobian(g, Y, h=1e-6):
    d = Y.shape[1]
    out = np.empty((Y.shape[0], d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        out[:, :, j] = (np.atleast_2d(g(Y + e)) - np.atleast_2d(g(Y - e))) / (2 * h)
    return 0.5 * (out + np.swapaxes(out, 1, 2))


def gauge_squared(body, x):
    """``f(x) = p(x)^2``; general bodies reject the origin."""
    x = np.asarray(x, dtype=float)
    if body.kind != "ellipsoid" and not np.any(x):
        raise OriginUndefined("f is defined on R^{2n} minus the origin")
    return body.gauge_sq(x)


def hessian_floor(body, samples=SPHERE_SAMPLES):
    """Smallest eigenvalue of ``D^2 f`` over sphere samples, with a mesh term.

    ``D^2 f`` is 0-homogeneous, so the sphere suffices.  The mesh term is
    the observed Lipschitz slope of the eigenvalue field times the
    covering radius of the sample set.
    """
    pts = sphere_samples(body.dim, samples)
    ev = np.linalg.eigvalsh(body.hess_sq(pts))[:, 0]
    i = int(np.argmin(ev))
    d = np.linalg.norm(pts - pts[i], axis=1)
    near = (d > 0) & (d < 4 * _covering_radius(pts))
    slope = float(np.max(np.abs(ev[near] - ev[i]) / d[near], initial=0.0))
    mesh = slope * _covering_radius(pts)
    return {"a_sampled": float(ev[i]), "mesh": mesh, "a_certified": float(ev[i]) - mesh,
            "argmin": pts[i].tolist(), "samples": samples}


# ---------------------------------------------------------------------------
# capacities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CapacityResult:
    value: float
    a: float
    certificate: dict

    def __float__(self):
        return self.value


def capacity_hat(body, samples=SPHERE_SAMPLES):
    """``2 pi / a`` with ``a`` the smallest eigenvalue of ``D^2 f``."""
    if body.kind == "ellipsoid":
        a = 2.0 / max(body.radii) ** 2
        return CapacityResult(2 * math.pi / a, a, {"method": "closed-form"})
    if not body.smooth:
        raise InvalidInput("capacity needs a strictly convex (smooth) body")
    cert = hessian_floor(body, samples)
    if cert["a_certified"] <= 0:
        raise Uncertified(cert["a_sampled"], cert["mesh"])
    a = cert["a_certified"]
    return CapacityResult(2 * math.pi / a, a, {"method": "sphere-sampled", **cert})


def _line_basis(v):
    """Orthonormal real basis ``(v, i v)`` of the complex line through ``v``."""
    v = np.asarray(v, dtype=complex)
    v = v / np.linalg.norm(v)
    return np.column_stack([realify(v), realify(1j * v)])


def _line_floor(Hinv, B):
    # largest a with D^2 f - a P_V >= 0 at each sample is 1 / lambda_max(B^T H^{-1} B)
    M = B.T @ (Hinv @ B)
    tr = M[:, 0, 0] + M[:, 1, 1]
    det = M[:, 0, 0] * M[:, 1, 1] - M[:, 0, 1] * M[:, 1, 0]
    lam = 0.5 * tr + np.sqrt(np.maximum(0.25 * tr * tr - det, 0.0))
    return 1.0 / lam


def capacity_hat0(body, samples=SPHERE_SAMPLES, starts=4, seed=0):
    """``2 pi / a0`` maximizing over complex lines ``V`` the bound ``D^2 f >= a0 P_V``.

    General bodies search the complex-line Grassmannian with multi-start
    Nelder-Mead; the result is an upper bound on the infimum over lines.
    """
    if body.kind == "ellipsoid":
        a = 2.0 / min(body.radii) ** 2
        return CapacityResult(2 * math.pi / a, a, {"method": "closed-form"})
    if not body.smooth:
        raise InvalidInput("capacity needs a strictly convex (smooth) body")
    n = body.n
    pts = sphere_samples(body.dim, samples)
    Hinv = np.linalg.inv(body.hess_sq(pts))

    def neg_floor(params):
        v = params[:n] + 1j * params[n:]
        if np.linalg.norm(v) < 1e-12:
            return 0.0
        return -float(np.min(_line_floor(Hinv, _line_basis(v))))

    rng = np.random.default_rng(seed)
    inits = [np.eye(2 * n)[k] for k in range(n)] + [rng.standard_normal(2 * n) for _ in range(starts)]
    best = None
    for x0 in inits:
        res = scipy.optimize.minimize(neg_floor, x0, method="Nelder-Mead",
                                      options={"xatol": 1e-9, "fatol": 1e-12, "maxiter": 2000})
        if best is None or res.fun < best.fun:
            best = res
    v = best.x[:n] + 1j * best.x[n:]
    B = _line_basis(v)
    floors = _line_floor(Hinv, B)
    i = int(np.argmin(floors))
    d = np.linalg.norm(pts - pts[i], axis=1)
    h = _covering_radius(pts)
    near = (d > 0) & (d < 4 * h)
    mesh = float(np.max(np.abs(floors[near] - floors[i]) / d[near], initial=0.0)) * h
    a_cert = float(floors[i]) - mesh
    if a_cert <= 0:
        raise Uncertified(float(floors[i]), mesh)
    return CapacityResult(2 * math.pi / a_cert, a_cert,
                          {"method": "line-search", "line": realify(v / np.linalg.norm(v)).tolist(),
                           "a_sampled": float(floors[i]), "mesh": mesh, "samples": samples})


# ---------------------------------------------------------------------------
# mollification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Mollifier:
    """Smooth bump ``exp(-1 / (1 - |y - c|^2 / rho^2))`` on a ball inside the unit ball.

    The default centre is off the origin, so the kernel has a nonzero mean;
    ``support_radius`` bounds ``|y|`` on the support.
    """

    centre: float = 0.25
    rho: float = 0.75
    order: int = MOLLIFIER_ORDER

    @property
    def support_radius(self):
        return abs(self.centre) + self.rho

    def bump(self, Y):
        c = np.zeros(Y.shape[1])
        c[0] = self.centre
        r2 = np.sum((Y - c) ** 2, axis=1) / self.rho ** 2
        out = np.zeros(Y.shape[0])
        ok = r2 < 1
        out[ok] = np.exp(-1.0 / (1.0 - r2[ok]))
        return out

    def nodes(self, dim, order=None):
        """Tensor Gauss-Legendre nodes on the support box with normalized weights."""
        order = order or self.order
        x, w = np.polynomial.legendre.leggauss(order)
        grids = np.meshgrid(*([x] * dim), indexing="ij")
        Y = self.rho * np.column_stack([g.ravel() for g in grids])
        Y[:, 0] += self.centre
        W = np.ones(Y.shape[0])
        for wg in np.meshgrid(*([w] * dim), indexing="ij"):
            W *= wg.ravel()
        W *= self.bump(Y)
        keep = W > 0
        return Y[keep], W[keep] / W[keep].sum()

    def moments(self, dim):
        Y, W = self.nodes(dim)
        mean = W @ Y
        second = np.einsum("n,ni,nj->ij", W, Y, Y)
        return mean, second


@dataclass(frozen=True)
class MollifiedGauge:
    """``f_delta = f * phi_delta`` evaluated with the discrete kernel.

    For smooth ``f`` the discrete kernel is a probability measure, so
    ``D^2 f_delta`` is a convex combination of values of ``D^2 f`` and keeps
    any lower bound exactly.  Ellipsoids reduce to a shifted quadratic.
    """

    body: ConvexBodyModel
    delta: float
    mollifier: Mollifier
    Y: np.ndarray = field(repr=False)
    W: np.ndarray = field(repr=False)
    certificate: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.body.n

    @property
    def dim(self):
        return self.body.dim

    @cached_property
    def quadratic_data(self):
        """``(a, m, c)`` with ``f_delta = sum a_k |x_k - m_k|^2 + c`` for ellipsoids."""
        if self.body.quadratic_data is None:
            return None
        a, m0, c0 = self.body.quadratic_data
        A = np.repeat(a, 2)
        mean = self.W @ self.Y
        second = np.einsum("n,ni,nj->ij", self.W, self.Y, self.Y)
        m = m0 + self.delta * mean
        c = c0 + self.delta ** 2 * (float(np.sum(A * np.diag(second))) - float(mean @ (A * mean)))
        return a, m, c

    def _shifted(self, x):
        return np.asarray(x, dtype=float)[None, :] - self.delta * self.Y

    def value(self, x):
        q = self.quadratic_data
        if q is not None:
            a, m, c = q
            y = np.asarray(x, dtype=float) - m
            return float(y @ (np.repeat(a, 2) * y) + c)
        if self.body.smooth:
            return float(self.W @ self.body.gauge_sq(self._shifted(x)))
        return float(self.W @ self.body.gauge_sq(self._shifted(x)))

    def grad(self, x):
        q = self.quadratic_data
        if q is not None:
            a, m, c = q
            return 2 * np.repeat(a, 2) * (np.asarray(x, dtype=float) - m)
        if self.body.smooth:
            return self.W @ self.body.grad_sq(self._shifted(x))
        # d/dx int f(x - d y) phi(y) dy = (1/d) int (f(x - d y) - f(x)) grad phi(y) dy
        vals = self.body.gauge_sq(self._shifted(x)) - self.body.gauge_sq(np.asarray(x, dtype=float)[None])
        return (self.W * vals) @ self._dlog / self.delta

    def hess(self, x):
        q = self.quadratic_data
        if q is not None:
            return np.diag(2 * np.repeat(q[0], 2))
        if self.body.smooth:
            return np.einsum("n,nij->ij", self.W, self.body.hess_sq(self._shifted(x)))
        # the second-derivative kernel is too steep for the box quadrature;
        # difference the (accurate) kernel gradient instead
        x = np.asarray(x, dtype=float)
        h = 1e-3 * self.delta
        cols = [(self.grad(x + h * e) - self.grad(x - h * e)) / (2 * h) for e in np.eye(self.dim)]
        H = np.column_stack(cols)
        return 0.5 * (H + H.T)

    @cached_property
    def _dlog(self):
        """``grad phi / phi`` at the nodes."""
        mol = self.mollifier
        c = np.zeros(self.dim)
        c[0] = mol.centre
        Z = (self.Y - c) / mol.rho
        s = 1.0 / (1.0 - np.sum(Z * Z, axis=1))
        return -2 * (s * s)[:, None] * Z / mol.rho


def mollify(body, delta, mollifier=None, order=None, certify=True, samples=1024):
    """Mollified squared gauge ``f_delta`` with a sampled Hessian certificate.

    ``delta`` times the kernel's support radius must stay below half the
    inradius of ``U``, keeping every shifted point away from the origin
    along the sphere and inside ``2U`` on ``U``.
    """
    mollifier = mollifier or Mollifier()
    if delta <= 0:
        raise InvalidInput("delta must be positive")
    if delta * mollifier.support_radius >= 0.5 * body.inradius(1024):
        raise DeltaTooLarge(f"delta={delta:g} too large for this body")
    order = order or (mollifier.order if body.smooth else 4 * mollifier.order)
    Y, W = mollifier.nodes(body.dim, order)
    mg = MollifiedGauge(body, delta, mollifier, Y, W)
    if certify and body.smooth:
        ref = hessian_floor(body, samples) if body.kind != "ellipsoid" else \
            {"a_sampled": 2.0 / max(body.radii) ** 2, "mesh": 0.0}
        pts = sphere_samples(body.dim, samples)
        ev = min(float(np.linalg.eigvalsh(mg.hess(x))[0]) for x in pts[:: max(1, samples // 256)])
        guard = 1e-4
        cert = {"a": ref["a_sampled"], "sampled_min": ev, "guard": guard,
                "certified": ev >= ref["a_sampled"] - guard}
        object.__setattr__(mg, "certificate", cert)
    return mg


def lemma_delta_constant(body, mollifier=None):
    """``C`` in ``|A - (-chi' f + chi)| <= C delta |chi'|_inf``: ``R sup_{2U} |Df| / 2``."""
    mollifier = mollifier or Mollifier()
    if body.kind == "ellipsoid":
        sup = 4.0 / min(body.radii)
    else:
        sup = body.df_sup_on_double()
    return 0.5 * mollifier.support_radius * sup


def action_deviation(body, chi, x, delta, mollifier=None, steps=2000):
    """``|A_{chi o f_delta}(x) - (-chi'(f_delta) f_delta + chi(f_delta))|``."""
    mg = mollify(body, delta, mollifier, certify=False)
    H = HamiltonianModel.profile(mg.value, mg.grad, mg.hess, chi, body.n, mg.quadratic_data)
    u = mg.value(x)
    return abs(action(H, x, steps) - (-chi.d1(u) * u + chi.value(u)))


# ---------------------------------------------------------------------------
# strictly convex inner bodies
# ---------------------------------------------------------------------------

def strictly_convex_inner(body, K, margin=1e-3, deltas=None, epss=None, samples=512):
    """A strictly convex ``V = {f_delta + eps |x|^2 < 1}`` with ``K`` inside ``V`` inside ``U``.

    ``(delta, eps)`` are swept downward until ``K`` is contained, the boundary
    of ``V`` sampled along rays lies inside ``U`` and the Hessian certificate
    ``D^2(f_delta + eps |x|^2) >= 2 eps`` (up to the quadrature guard) holds.
    """
    K = np.atleast_2d(np.asarray(K, dtype=float))
    pk = np.atleast_1d(body.gauge(K[np.any(K != 0, axis=1)])) if np.any(K) else np.zeros(1)
    if np.max(pk, initial=0.0) >= 1 - margin:
        raise CannotSeparate("K is not inside U with the requested margin")
    deltas = deltas or [0.1 * 2 ** -k for k in range(6)]
    epss = epss or [0.2 * 2 ** -k for k in range(6)]
    dirs = sphere_samples(body.dim, samples)
    inr = body.inradius(1024)
    tried = []
    for delta in deltas:
        try:
            mg = mollify(body, delta, certify=False)
        except DeltaTooLarge:
            continue
        H_samples = None
        for eps in epss:
            def F(X, mg=mg, eps=eps):
                X = np.atleast_2d(X)
                return np.array([mg.value(x) for x in X]) + eps * np.sum(X * X, axis=1) - 1

            if np.any(F(K) >= 0) or F(np.zeros((1, body.dim)))[0] >= 0:
                tried.append((delta, eps, "K"))
                continue
            rad = _ray_roots(F, dirs, hi=2.0 / inr + 1.0)
            bd = rad[:, None] * dirs
            if np.max(body.gauge(bd)) >= 1:
                tried.append((delta, eps, "U"))
                continue
            if H_samples is None:
                probe = np.vstack([bd * s for s in (0.25, 0.5, 0.75, 1.0)])
                H_samples = [np.linalg.eigvalsh(mg.hess(x))[0] for x in probe]
            guard = 1e-6 if body.smooth else _quadrature_guard(body, delta, mg, bd[:16])
            low = float(np.min(H_samples)) + 2 * eps
            if low < 2 * eps - guard:
                tried.append((delta, eps, "hessian"))
                continue

            def dF(X, mg=mg, eps=eps):
                X = np.atleast_2d(X)
                return np.array([mg.grad(x) for x in X]) + 2 * eps * X

            def d2F(X, mg=mg, eps=eps):
                X = np.atleast_2d(X)
                return np.array([mg.hess(x) for x in X]) + 2 * eps * np.eye(body.dim)

            V = LevelSetBody(body.n, F, dF, d2F, "general",
                             {"delta": delta, "eps": eps, "hess_min": low, "guard": guard,
                              "max_gauge_on_dV": float(np.max(body.gauge(bd)))})
            return V
    raise CannotSeparate(f"no (delta, eps) in the sweep worked; last attempts {tried[-3:]}")


def _ray_roots(F, dirs, hi):
    lo = np.zeros(dirs.shape[0])
    hi = np.full(dirs.shape[0], hi)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        inside = F(mid[:, None] * dirs) < 0
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return 0.5 * (lo + hi)


def _quadrature_guard(body, delta, mg, pts):
    """Hessian change between quadrature orders, as an error proxy."""
    fine = mollify(body, delta, mg.mollifier, order=2 * len(np.unique(mg.Y[:, -1])), certify=False)
    return float(max(np.max(np.abs(mg.hess(x) - fine.hess(x))) for x in pts))


# ---------------------------------------------------------------------------
# profile functions
# ---------------------------------------------------------------------------

def _psi(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    ok = t > 0
    out[ok] = np.exp(-1.0 / t[ok])
    return out


def smooth_step(t, nu=0):
    """``S(t) = psi(t) / (psi(t) + psi(1 - t))`` and its first two derivatives."""
    t = np.clip(np.asarray(t, dtype=float), -1.0, 2.0)
    a, b = _psi(t), _psi(1 - t)
    with np.errstate(divide="ignore", invalid="ignore"):
        da = np.where(t > 0, a / np.where(t > 0, t, 1) ** 2, 0.0)
        db = -np.where(t < 1, b / np.where(t < 1, 1 - t, 1) ** 2, 0.0)
        d2a = np.where(t > 0, a * (1 / np.where(t > 0, t, 1) ** 4 - 2 / np.where(t > 0, t, 1) ** 3), 0.0)
        u = np.where(t < 1, 1 - t, 1)
        d2b = np.where(t < 1, b * (1 / u ** 4 - 2 / u ** 3), 0.0)
    D = a + b
    if nu == 0:
        return a / D
    if nu == 1:
        return (da * b - a * db) / D ** 2
    return ((d2a * b - a * d2b) * D - 2 * (da * b - a * db) * (da + db)) / D ** 3


def _step_integral(tau):
    """``int_0^tau S`` for ``tau`` in [0, 1]."""
    tau = min(max(float(tau), 0.0), 1.0)
    return scipy.integrate.quad(lambda s: float(smooth_step(s)), 0.0, tau, epsabs=1e-14)[0]


@dataclass(frozen=True)
class _Ramp:
    """Decreasing convex function: slope ``-sigma`` until ``start``, smoothly flat after ``start + L``."""

    sigma: float
    start: float
    L: float

    def d1(self, u):
        return -self.sigma * (1 - float(smooth_step((u - self.start) / self.L)))

    def d2(self, u):
        return self.sigma * float(smooth_step((u - self.start) / self.L, 1)) / self.L

    def value(self, u):
        tau = (u - self.start) / self.L
        if tau >= 1:
            return 0.0
        if tau <= 0:
            return self.sigma * (self.start - u) + 0.5 * self.sigma * self.L
        # int_u^{end} (1 - S) = L * int_tau^1 (1 - S) = L * int_0^{1-tau} S
        return self.sigma * self.L * _step_integral(1 - tau)


@dataclass(frozen=True)
class ProfileChi:
    """``chi^s = chi_0 + s chi_1`` for the capacity argument.

    ``chi_0`` has slope ``-(2 pi / a + eps')`` on ``[0, 1 - eps)`` and vanishes
    from ``1 - eps / 4``; ``chi_1`` has slope ``-1`` on ``[0, 1 - 2 eps]`` and
    vanishes from ``1 - 5 eps / 4``.  Both are convex and decreasing.
    """

    a: float
    eps: float
    eps_prime: Optional[float] = None
    s: float = 0.0

    def __post_init__(self):
        if not (self.a > 0 and 0 < self.eps < 0.4 and self.s >= 0):
            raise InvalidInput("need a > 0, 0 < eps < 0.4 and s >= 0")
        bound = (2 * math.pi / self.a) * (5 * self.eps / 8) / (1 - 5 * self.eps / 8)
        if self.eps_prime is None:
            object.__setattr__(self, "eps_prime", (2 * math.pi / self.a) * self.eps / 4)
        if not 0 < self.eps_prime < bound:
            raise InvalidInput(f"eps_prime must lie in (0, {bound:.6g}) to keep max chi_0 < 2 pi / a")

    @cached_property
    def chi0(self):
        L = 0.75 * self.eps
        return _Ramp(2 * math.pi / self.a + self.eps_prime, 1 - self.eps, L)

    @cached_property
    def chi1(self):
        return _Ramp(1.0, 1 - 2 * self.eps, 0.75 * self.eps)

    def with_s(self, s):
        return ProfileChi(self.a, self.eps, self.eps_prime, s)

    def value(self, u):
        return self.chi0.value(u) + self.s * self.chi1.value(u)

    def d1(self, u):
        return self.chi0.d1(u) + self.s * self.chi1.d1(u)

    def d2(self, u):
        return self.chi0.d2(u) + self.s * self.chi1.d2(u)

    def check(self, samples=401):
        us = np.linspace(0, 1, samples)
        v = np.array([self.value(u) for u in us])
        d1 = np.array([self.d1(u) for u in us])
        d2 = np.array([self.d2(u) for u in us])
        v0 = np.array([self.chi0.value(u) for u in us])
        v1 = np.array([self.chi1.value(u) for u in us])
        report = {
            "decreasing": bool(np.all(d1 <= 0) and np.all(np.diff(v) <= 1e-14)),
            "nonnegative": bool(np.all(v >= 0)),
            "convex": bool(np.all(d2 >= -1e-12)),
            "max_chi0": float(v0.max()),
            "max_chi0_below": bool(v0.max() < 2 * math.pi / self.a),
            "supp_chi0": bool(np.all(v0[us >= 1 - self.eps / 4] == 0)),
            "supp_chi1": bool(np.all(v1[us >= 1 - self.eps] == 0)),
            "slope_chi0": bool(np.allclose([self.chi0.d1(u) for u in us[us < 1 - self.eps]],
                                           -(2 * math.pi / self.a + self.eps_prime), rtol=0, atol=1e-12)),
        }
        report["ok"] = all(v for k, v in report.items() if isinstance(v, bool))
        return report

    def sup_d1(self):
        return self.chi0.sigma + self.s * self.chi1.sigma


# ---------------------------------------------------------------------------
# orbit spectrum window
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpecEntry:
    level: float
    block: int
    x: list
    periodic: bool
    inside: bool
    H: float
    action: float
    cz: Fraction
    kernel_dim: int
    max_cz: Fraction
    action_hat: Optional[float] = None
    flag: Optional[bool] = None
    label: str = ""

    @property
    def window_hits(self):
        """Whether ``-n`` lies in the range ``[max_cz - kernel_dim, max_cz]`` a perturbation may reach."""
        return self.max_cz - self.kernel_dim <= -self._n <= self.max_cz

    _n: int = 1


@dataclass(frozen=True)
class SpecReport:
    entries: list
    threshold: int
    kappa: float
    regime: str
    constants: dict

    @property
    def ok(self):
        return all(e.flag is not False for e in self.entries)

    def outside_pairs(self):
        """``(action, max_cz, kernel_dim)`` of periodic orbits outside the region reaching index ``-n``."""
        return sorted((round(e.action, 10), e.max_cz, e.kernel_dim) for e in self.entries
                      if e.periodic and not e.inside and e.window_hits)


def _periodic_levels(chi, r2, lo, hi, grid=4000):
    """Levels ``u`` in ``(lo, hi)`` with ``chi'(u) = pi j r2`` for some integer ``j``."""
    us = np.linspace(lo, hi, grid + 1)[1:-1]
    d = np.array([chi.d1(u) for u in us]) / (math.pi * r2)
    out = []
    for j in range(int(math.floor(d.min())), int(math.ceil(d.max())) + 1):
        if j == 0:
            continue
        g = d - j
        for i in np.flatnonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0):
            out.append((scipy.optimize.brentq(lambda u: chi.d1(u) / (math.pi * r2) - j, us[i], us[i + 1],
                                              xtol=1e-14), j))
    return out


def spec_window_report(body, profile: ProfileChi, kappa, delta, levels=None, mollifier=None,
                       grid=128):
    """Enumerate orbits of ``H = chi^s o f_delta`` on an ellipsoid and test the index/action window.

    Entries cover a level grid (one representative point per complex block)
    plus the periodic orbits: the centre of rotation and the roots of
    ``chi'(u) = pi j r_k^2``.  Flags: ``kappa = 0``: ``max_cz < -n`` on
    ``u <= 1 - eps``; ``kappa < 0``: ``A_hat > max H^0`` there; ``kappa > 0``:
    ``A_hat <= 2 pi / a + C delta |chi'|_inf`` wherever ``H != 0``.
    """
    if body.kind != "ellipsoid":
        raise InvalidInput("the orbit window is enumerated for ellipsoids only")
    n = body.n
    a_full = 2.0 / max(body.radii) ** 2
    if kappa > 0 and 2 * math.pi / a_full > n / kappa:
        raise RegimeViolation(f"2 pi / a = {2 * math.pi / a_full:.6g} exceeds n / kappa = {n / kappa:.6g}")
    mg = mollify(body, delta, mollifier, certify=False)
    ak, m, c = mg.quadratic_data
    H = HamiltonianModel.profile(mg.value, mg.grad, mg.hess, profile, n, (ak, m, c))
    C = lemma_delta_constant(body, mollifier)
    max_H0 = profile.with_s(0).value(c)
    bound_pos = 2 * math.pi / a_full + C * delta * profile.sup_d1()
    regime = "zero" if kappa == 0 else ("negative" if kappa < 0 else "positive")
    cut = 1 - profile.eps
    levels = np.linspace(0.02, 0.98, 49) if levels is None else np.asarray(levels, dtype=float)

    points = []
    for u in levels:
        if u <= c:
            continue
        for k in range(n):
            points.append((float(u), k, False, "grid"))
    points.append((c, -1, True, "centre"))
    for k in range(n):
        r2 = body.radii[k] ** 2
        for u, j in _periodic_levels(profile, r2, c, 1.0):
            points.append((u, k, True, f"block {k} winding {j}"))
        flat = 1 - profile.eps / 8
        if flat > c:
            points.append((flat, k, True, "flat region"))

    entries = []
    for u, k, periodic, label in sorted(points, key=lambda p: (p[0], p[1])):
        x = m.copy()
        if k >= 0:
            x[2 * k] += math.sqrt((u - c) / ak[k])
        lin = linearized_path(H, x)
        res = cz_index(lin, grid=grid)
        mx = max_cz_index(lin, grid=grid)
        A = action(H, x)
        Hx = H.value(x)
        inside = u <= cut
        ahat = None if kappa == 0 else A + action_correction(n, mx, kappa)
        if regime == "zero":
            flag = bool(mx < -n) if inside else None
        elif regime == "negative":
            flag = bool(ahat > max_H0) if inside else None
        else:
            flag = bool(ahat <= bound_pos + 1e-9) if Hx != 0 else None
        e = SpecEntry(u, k, x.tolist(), periodic, inside, Hx, A, res.value, res.kernel_dim, mx,
                      ahat, flag, label)
        object.__setattr__(e, "_n", n)
        entries.append(e)
    return SpecReport(entries, -n, kappa, regime,
                      {"a": a_full, "C": C, "delta": delta, "max_H0": max_H0, "shift": m.tolist(),
                       "offset": c, "bound_positive": bound_pos})


def positive_regime_sweep(a, n, kappa, count=1000):
    """Check ``y - (n / kappa) [a y / 2 pi]^< <= 2 pi / a`` on ``y in (0, 10 * 2 pi / a]``."""
    if 2 * math.pi / a > n / kappa:
        raise RegimeViolation("2 pi / a must not exceed n / kappa")
    ys = np.linspace(0, 10 * 2 * math.pi / a, count + 1)[1:]
    lhs = np.array([y - (n / kappa) * floor_strict(a * y / (2 * math.pi)) for y in ys])
    return ys, lhs, bool(np.all(lhs <= 2 * math.pi / a + 1e-12))


# ---------------------------------------------------------------------------
# Poisson bracket invariant bound
# ---------------------------------------------------------------------------

PB_REGIMES = ("kappa_nonpos_or_small_c0", "kappa_pos_c")


@dataclass(frozen=True)
class PBResult:
    value: float
    exact: Optional[str]
    regime: str


def pb_lower_bound(d, cap, regime=PB_REGIMES[0], cap_over_pi=None):
    """``1 / (2 (d + 1)^2 cap)``; ``cap_over_pi`` (rational) adds an exact sidecar in units of pi."""
    if regime not in PB_REGIMES:
        raise InvalidInput(f"regime must be one of {PB_REGIMES}")
    if int(d) != d or d < 0:
        raise InvalidInput("d must be a nonnegative integer")
    exact = None
    if cap_over_pi is not None:
        q = Fraction(cap_over_pi)
        if q <= 0:
            raise InvalidInput("capacity must be positive")
        cap = float(q) * math.pi
        r = Fraction(1, 2 * (int(d) + 1) ** 2) / q
        exact = f"{r.numerator}/({r.denominator}π)" if r.denominator != 1 else f"{r.numerator}/π"
    if cap is None or cap <= 0:
        raise InvalidInput("capacity must be positive")
    return PBResult(1.0 / (2 * (int(d) + 1) ** 2 * cap), exact, regime)
