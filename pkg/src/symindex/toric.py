"""Linear toric models: loop indices at fixed points, the special fiber and
the constant value of the index-corrected action.

A model lists, for each torus-fixed point, its moment image ``p`` and the
weights ``w_1, ..., w_n`` of the isotropy representation.  The loop
``t -> e^{t m}`` linearizes at a fixed point to
``(+)_i exp(-2 pi (m . w_i) J0 t)``.  Weights are the negated primitive edge
directions of the moment polytope; with this sign the CP^1 model puts the
special fiber at the midpoint of the moment interval.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .czindex import floor_strict, max_cz_index, rotation_cz
from .errors import InconsistentModel, InvalidInput, NotFixed
from .hamflow import HamiltonianModel, linearized_path
from .symcore import standard_J

FIBER_TOL = 1e-9


@dataclass(frozen=True)
class FixedPoint:
    p: tuple
    weights: tuple

    def __post_init__(self):
        object.__setattr__(self, "p", tuple(float(v) for v in self.p))
        object.__setattr__(self, "weights", tuple(tuple(int(v) for v in w) for w in self.weights))

    @property
    def W(self):
        return np.array(self.weights, dtype=int).reshape(len(self.weights), len(self.p))


@dataclass(frozen=True)
class TorusActionModel:
    rank: int
    n: int
    kappa: float
    fixed_points: tuple
    offset: tuple = ()
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        fps = tuple(fp if isinstance(fp, FixedPoint) else FixedPoint(fp["p"], fp["weights"])
                    for fp in self.fixed_points)
        object.__setattr__(self, "fixed_points", fps)
        if not self.kappa > 0:
            raise InvalidInput("kappa must be positive")
        if not fps:
            raise InvalidInput("model needs at least one fixed point")
        for fp in fps:
            if len(fp.p) != self.rank or len(fp.weights) != self.n or \
                    any(len(w) != self.rank for w in fp.weights):
                raise InvalidInput("fixed point data must have rank-k images and n weights of length k")
        if not self.offset:
            object.__setattr__(self, "offset", (0.0,) * self.rank)

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["rank"]), int(d["n"]), float(d["kappa"]),
                   tuple(FixedPoint(fp["p"], fp["weights"]) for fp in d["fixed_points"]),
                   tuple(d.get("offset", ())), dict(d.get("meta", {})))

    def as_dict(self):
        return {"rank": self.rank, "n": self.n, "kappa": self.kappa,
                "fixed_points": [{"p": list(fp.p), "weights": [list(w) for w in fp.weights]}
                                 for fp in self.fixed_points],
                "offset": list(self.offset), "meta": self.meta}

    def shifted(self, v):
        """Same action with the moment map translated by ``v``."""
        v = np.asarray(v, dtype=float)
        fps = tuple(FixedPoint(np.asarray(fp.p) + v, fp.weights) for fp in self.fixed_points)
        return TorusActionModel(self.rank, self.n, self.kappa, fps,
                                tuple(np.asarray(self.offset) + v), dict(self.meta))

    def moment_centroid(self):
        """Centroid of the moment polytope (uniform Duistermaat-Heckman measure, rank = n)."""
        P = np.array([fp.p for fp in self.fixed_points])
        if self.rank != self.n:
            raise InvalidInput("centroid needs a toric model (rank = n)")
        if self.rank == 1:
            return np.array([0.5 * (P.min() + P.max())])
        from scipy.spatial import Delaunay
        tri = Delaunay(P)
        vols, cents = [], []
        for s in tri.simplices:
            V = P[s]
            vols.append(abs(np.linalg.det(V[1:] - V[0])))
            cents.append(V.mean(axis=0))
        vols = np.array(vols)
        return (vols[:, None] * np.array(cents)).sum(axis=0) / vols.sum()

    def normalized(self):
        """Model whose moment map has zero mean (centroid at the origin)."""
        return self.shifted(-self.moment_centroid())


def _primitive(v):
    v = np.asarray(np.rint(v), dtype=int)
    g = math.gcd(*[abs(int(x)) for x in v])
    return v // g


def projective_space(n, ell=1.0):
    """``CP^n`` with moment simplex ``conv(0, ell e_1, ..., ell e_n)`` and ``kappa = (n + 1) / ell``.

    ``ell`` is the symplectic area of a line; ``c_1`` of a line is ``n + 1``.
    """
    verts = [np.zeros(n)] + [ell * e for e in np.eye(n)]
    fps = []
    for j, v in enumerate(verts):
        ws = [tuple(-_primitive((u - v) / ell)) for i, u in enumerate(verts) if i != j]
        fps.append(FixedPoint(tuple(v), tuple(ws)))
    return TorusActionModel(n, n, (n + 1) / ell, tuple(fps),
                            meta={"name": f"CP^{n}", "ell": ell, "kappa": (n + 1) / ell})


def loop_cz(model, fp, m):
    """CZ index of the linearized loop ``e^{t m}`` at a fixed point: ``-2 sum_i m . w_i``."""
    fp = model.fixed_points[fp] if isinstance(fp, int) else fp
    m = np.asarray(m)
    if m.shape != (model.rank,) or np.any(m != np.rint(m)):
        raise InvalidInput("m must be an integer vector of length rank")
    return int(-2 * np.sum(fp.W @ m.astype(int)))


def loop_cz_numeric(model, fp, m):
    """Same index from the rotation closed forms, block by block (cross-check)."""
    fp = model.fixed_points[fp] if isinstance(fp, int) else fp
    return sum(rotation_cz(int(nu))[0] for nu in fp.W @ np.asarray(m, dtype=int))


@dataclass(frozen=True)
class SpecialFiber:
    point: np.ndarray
    residual: float
    per_fixed_point: np.ndarray

    def as_dict(self):
        return {"p_star": self.point.tolist(), "residual": self.residual,
                "per_fixed_point": self.per_fixed_point.tolist()}


def special_fiber_point(model, tol=FIBER_TOL):
    """``p_star`` from ``p_star . m = p . m + loop_cz(m) / (2 kappa)`` at every fixed point."""
    basis = np.eye(model.rank, dtype=int)
    sols = np.array([np.asarray(fp.p) + np.array([loop_cz(model, fp, e) for e in basis]) / (2 * model.kappa)
                     for fp in model.fixed_points])
    p_star = sols.mean(axis=0)
    residual = float(np.max(np.abs(sols - p_star)))
    if residual > tol:
        raise InconsistentModel(residual)
    return SpecialFiber(p_star, residual, sols)


def _fixed_point_data(model, m, N, fixed_point, r):
    fp = model.fixed_points[fixed_point]
    r = np.zeros(model.n) if r is None else np.asarray(r, dtype=float)
    if r.shape != (model.n,) or np.any(r < 0):
        raise InvalidInput("r must hold n nonnegative area coordinates")
    nu = fp.W @ np.asarray(m, dtype=int)
    for i in np.flatnonzero(r > 0):
        if Fraction(int(nu[i]), N).denominator != 1:
            raise NotFixed(f"point on weight line {i} is not fixed by e^(m/N): (m.w)/N = {nu[i]}/{N}")
    return fp, r, nu


def tilde_action(model, c, m, N, fixed_point=0, r=None):
    """Index-corrected action of ``H = f o mu`` with ``f(p) = c + p . m / N`` at a point of ``Fix e^{m/N}``.

    The point lies in the chart of ``fixed_point`` with area coordinates
    ``r_i = pi |z_i|^2``, so ``mu = p - sum r_i w_i``.  The orbit on weight
    line ``i`` turns ``(m . w_i) / N`` times; capped by the disc in that line
    it sweeps area ``r_i (m . w_i) / N``.  The result should equal
    ``f(p_star) + n / kappa``.
    """
    N = int(N)
    if N < 1:
        raise InvalidInput("N must be a positive integer")
    fp, r, nu = _fixed_point_data(model, m, N, fixed_point, r)
    mu = np.asarray(fp.p) - r @ fp.W
    H = c + float(mu @ np.asarray(m, dtype=float)) / N
    area = float(r @ nu) / N
    cz_N = loop_cz(model, fp, m)  # linear chart: same linearization off the fixed point
    return H + area + (2 * model.n + cz_N / N) / (2 * model.kappa)


def chart_hamiltonian(model, fixed_point, f, df, d2f):
    """``H = f o mu`` on the linear chart ``C^n`` of a fixed point, ``mu = p - sum pi |z_i|^2 w_i``."""
    fp = model.fixed_points[fixed_point]
    W = fp.W.astype(float)
    p = np.asarray(fp.p)
    n = model.n

    def r_of(x):
        return np.pi * (x[0::2] ** 2 + x[1::2] ** 2)

    def mu(x):
        return p - r_of(x) @ W

    def grad(x):
        nu = W @ df(mu(x))
        return -2 * np.pi * np.repeat(nu, 2) * x

    def hess(x):
        q = mu(x)
        nu = W @ df(q)
        G = np.zeros((2 * n, n))  # columns: d r_i / dx
        for i in range(n):
            G[2 * i:2 * i + 2, i] = 2 * np.pi * x[2 * i:2 * i + 2]
        return -2 * np.pi * np.diag(np.repeat(nu, 2)) + G @ (W @ d2f(q) @ W.T) @ G.T

    return HamiltonianModel(n, lambda x: float(f(mu(x))), grad, hess, "toric-chart",
                            meta={"fixed_point": fixed_point, "mu": mu})


def moment_index_comparison(model, fixed_point, f, df, d2f, x, steps=1000):
    """Both sides of ``max_cz(linearized flow of f o mu) <= max_cz(rotation e^{t df(mu(x))})``.

    The left side is integrated numerically; the right side is the closed
    form for the block rotations with frequencies ``df(mu(x)) . w_i``.
    ``x`` must lie on a closed orbit, otherwise :class:`NotFixed` is raised.
    """
    H = chart_hamiltonian(model, fixed_point, f, df, d2f)
    x = np.asarray(x, dtype=float)
    nu = model.fixed_points[fixed_point].W @ df(H.meta["mu"](x))
    # the comparison is about closed orbits: every occupied weight line must turn a whole number of times
    r = x[0::2] ** 2 + x[1::2] ** 2
    off = np.abs(nu - np.rint(nu))
    if np.any((r > 0) & (off > 1e-9)):
        raise NotFixed(f"x is not a fixed point of the time-one flow: frequencies {nu.tolist()}")
    lhs = max_cz_index(linearized_path(H, x, steps=steps))
    rhs = Fraction(0)
    for y in nu:
        cz, k = rotation_cz(Fraction(float(y)).limit_denominator(10 ** 9))
        rhs += cz + Fraction(k, 2)
    return lhs, rhs, lhs <= rhs


def rank_identity(A, X, rel_tol=1e-9):
    """``rank(A (1 + X) - 1) - rank(A - 1)`` and ``rank X``, plus the hypotheses that make them equal."""
    I = np.eye(A.shape[0])

    def rk(M):
        s = np.linalg.svd(M, compute_uv=False)
        return int(np.sum(s > rel_tol * max(1.0, s[0] if s.size else 0.0)))

    lhs = rk(A @ (I + X) - I) - rk(A - I)
    fixed = np.allclose(A @ X, X, atol=1e-10)
    transverse = rk(np.hstack([A - I, X])) == rk(A - I) + rk(X)
    return lhs, rk(X), fixed and transverse


def rotation_lemma_gap(y, m, N):
    """Both sides of ``max_cz(e^{-2 pi y J t}) <= -2m/N + 1 + 2|y - m/N|``."""
    N = int(N)
    if N < 1:
        raise InvalidInput("N must be a positive integer")
    lhs = -1 - 2 * floor_strict(y)
    rhs = -2 * m / N + 1 + 2 * abs(y - m / N)
    return lhs, rhs, lhs <= rhs + 1e-12


def isotropic_in_blocks(n, blocks, rng, scale=1.0):
    """``X = J0 B D B^T`` with ``B`` isotropic inside the given complex blocks."""
    blocks = list(blocks)
    if not blocks:
        return np.zeros((2 * n, 2 * n))
    k = rng.integers(1, len(blocks) + 1)
    B = np.zeros((2 * n, k))
    # one real line per chosen block keeps B isotropic
    chosen = rng.choice(blocks, size=k, replace=False)
    for col, b in enumerate(chosen):
        th = rng.uniform(0, 2 * np.pi)
        B[2 * b:2 * b + 2, col] = [np.cos(th), np.sin(th)]
    D = rng.standard_normal((k, k))
    D = scale * (D + D.T) / 2
    return standard_J(n) @ B @ D @ B.T
