"""Maslov index of Lagrangian paths via regular crossings.

The index is assembled from crossing forms exactly as a half-integer: each
crossing contributes ``sign Q_t`` (interior) or ``sign Q_t / 2`` (endpoint),
and the running total is kept as an integer twice-value.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .errors import DegenerateArc, InvalidInput, IrregularCrossing, IrregularEndpoint
from .symcore import (
    LagrangianFrame,
    QuadraticForm,
    Signature,
    SymplecticPath,
    _central_difference,
    compatible_J,
    doubled_Omega,
    signature,
    standard_J,
)

CROSSING_THRESHOLD = 1e-8
MERGE_TOL = 1e-10
CLUSTER_TOL = 1e-6
MAX_CLUSTER_DEPTH = 4
KERNEL_TOL = 1e-6
DEFAULT_GRID = 256


@dataclass(frozen=True)
class LagrangianPath:
    """``t -> frame(t)``, a path of Lagrangian frames for the form ``Omega``."""

    frame: Callable[[float], np.ndarray]
    Omega: np.ndarray
    dframe: Optional[Callable[[float], np.ndarray]] = None

    def __call__(self, t):
        return np.asarray(self.frame(float(t)), dtype=float)

    def derivative(self, t):
        if self.dframe is not None:
            return np.asarray(self.dframe(float(t)), dtype=float)
        return _central_difference(self, float(t))

    def at(self, t):
        return LagrangianFrame(self(t), self.Omega, check=False)

    @property
    def dim(self):
        return self.Omega.shape[0]

    @classmethod
    def graph(cls, path: SymplecticPath):
        """``t -> (1 x Phi(t)) Delta`` in the doubled space."""
        I = np.eye(path.dim)
        Z0 = np.zeros_like(I)
        return cls(lambda t: np.vstack([I, path(t)]), doubled_Omega(path.n),
                   lambda t: np.vstack([Z0, path.derivative(t)]))

    @classmethod
    def orbit(cls, path: SymplecticPath, L: LagrangianFrame):
        """``t -> Phi(t) L``."""
        return cls(lambda t: path(t) @ L.Z, L.Omega, lambda t: path.derivative(t) @ L.Z)

    @classmethod
    def constant(cls, L: LagrangianFrame):
        zero = np.zeros_like(L.Z)
        return cls(lambda t: L.Z, L.Omega, lambda t: zero)

    def transformed(self, M):
        M = np.asarray(M, dtype=float)
        return LagrangianPath(lambda t: M @ self(t), self.Omega, lambda t: M @ self.derivative(t))

    def then(self, other):
        """Catenation on [0, 1/2] and [1/2, 1]; requires ``self(1) == other(0)`` as subspaces."""
        def f(t):
            return self(2 * t) if t <= 0.5 else other(2 * t - 1)

        def df(t):
            return 2 * self.derivative(2 * t) if t <= 0.5 else 2 * other.derivative(2 * t - 1)

        return LagrangianPath(f, self.Omega, df)

    def direct_sum(self, other):
        Om = scipy.linalg.block_diag(self.Omega, other.Omega)
        return LagrangianPath(lambda t: scipy.linalg.block_diag(self(t), other(t)), Om,
                              lambda t: scipy.linalg.block_diag(self.derivative(t), other.derivative(t)))

    def bumped(self, eps, bump, dbump):
        """``t -> exp(eps b(t) J) frame(t)`` with ``b(0) = b(1) = 0``; endpoints unchanged."""
        J = compatible_J(self.Omega)

        def R(t):
            return scipy.linalg.expm(eps * bump(t) * J)

        return LagrangianPath(lambda t: R(t) @ self(t), self.Omega,
                              lambda t: R(t) @ (eps * dbump(t) * J @ self(t) + self.derivative(t)))


@dataclass(frozen=True)
class CrossingReport:
    t: float
    kernel_basis: np.ndarray
    form: QuadraticForm
    regular: bool
    inertia: Signature
    frame_independent: bool = True

    @property
    def endpoint(self):
        return self.t == 0.0 or self.t == 1.0

    @property
    def twice_contribution(self):
        """Twice the contribution of this crossing to the index."""
        return self.inertia.sign * (1 if self.endpoint else 2)


@dataclass(frozen=True)
class MaslovResult:
    value: Fraction
    crossings: list
    perturbation: Optional[float] = None
    grid: int = DEFAULT_GRID
    meta: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# crossing detection
# ---------------------------------------------------------------------------

def _golden_min(f, a, b, tol=1e-14, maxiter=200):
    g = (np.sqrt(5) - 1) / 2
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(maxiter):
        if b - a <= tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    # a V-shaped minimum sits at a kink; compare the bracket ends as well
    cands = [(fc, c), (fd, d), (f(a), a), (f(b), b)]
    fm, tm = min(cands)
    return tm, fm


class _Gap:
    """Smallest principal-angle sine between ``path(t)`` and ``L0``."""

    def __init__(self, path, L0):
        self.path = path
        self.C = L0.complement
        self.cache = {}

    def svd(self, t):
        Q, R = np.linalg.qr(self.path(t))
        U, s, Vt = np.linalg.svd(self.C.T @ Q)
        return Q, R, s, Vt

    def prefill(self, ts):
        """Evaluate many times at once; small QR/SVD calls are overhead-bound."""
        ts = [float(t) for t in ts if float(t) not in self.cache]
        if not ts:
            return
        Q = np.linalg.qr(np.stack([self.path(t) for t in ts]))[0]
        s = np.linalg.svd(self.C.T @ Q, compute_uv=False)
        self.cache.update(zip(ts, s))

    def sines(self, t):
        t = float(t)
        if t not in self.cache:
            Q = scipy.linalg.qr(self.path(t), mode="economic", check_finite=False)[0]
            self.cache[t] = scipy.linalg.svdvals(self.C.T @ Q, check_finite=False)
        return self.cache[t]

    def __call__(self, t):
        return self.sines(t)[-1]

    def volume(self, t):
        """Product of all principal-angle sines.

        A persistent near-intersection keeps the smallest sine small along a
        whole stretch and hides a second crossing under it; the product still
        vanishes linearly at that crossing.
        """
        return float(np.prod(self.sines(t)))


def _refine(gap, score, a, b, threshold):
    t, _ = _golden_min(score, a, b)
    return (t, gap(t)) if gap(t) < threshold else None


def _v_plausible(vals, j, threshold):
    # near a crossing the gap is V-shaped, so the value at a sample is at most
    # ~one sample step of slope; smooth positive stretches fail this test
    window = vals[max(j - 2, 0):j + 3]
    return vals[j] < threshold or vals[j] <= 1.5 * np.max(np.abs(np.diff(window)))


def _scan_bracket(gap, score, a, b, threshold, found, m=16, shape_only=False, depth=0):
    ts = np.linspace(a, b, m + 1)
    gap.prefill(ts)
    vals = np.array([score(t) for t in ts])
    padded = np.concatenate([[np.inf], vals, [np.inf]])
    minima = np.flatnonzero((vals <= padded[:-2]) & (vals <= padded[2:]))
    for j in minima:
        if not _v_plausible(vals, j, 0.0 if shape_only else threshold):
            continue
        lo, hi = ts[max(j - 1, 0)], ts[min(j + 1, m)]
        if any(lo <= t <= hi for t in found):
            continue
        hit = _refine(gap, score, lo, hi, threshold)
        if hit is None:
            continue
        found.append(hit[0])
        if depth < MAX_CLUSTER_DEPTH:
            _scan_cluster(gap, hit[0], lo, hi, threshold, found, depth)


def _scan_cluster(gap, t, lo, hi, threshold, found, depth):
    """Look for a second crossing hiding next to the crossing at ``t``.

    Two crossings closer than the scan step produce a single minimum.  The
    first sine beyond the kernel at ``t`` is then of the order of the slope
    times their distance, which bounds where the partner can be.
    """
    s = gap.sines(t)
    k = int(np.sum(s < KERNEL_TOL))
    if k >= s.size:
        return
    h = 1e-3 * (hi - lo)
    slope = max(abs(gap.sines(min(t + h, 1.0))[-(k + 1)] - s[-(k + 1)]),
                abs(gap.sines(max(t - h, 0.0))[-(k + 1)] - s[-(k + 1)])) / h
    reach = 4 * s[-(k + 1)] / max(slope, 1e-300)
    if reach >= hi - lo:
        return
    a, b = max(0.0, t - reach), min(1.0, t + reach)
    if b - a > 1e-13:
        _scan_bracket(gap, gap.volume, a, b, threshold, found, shape_only=True, depth=depth + 1)


def _locate(path, L0, grid, threshold):
    gap = _Gap(path, L0)
    ts = np.linspace(0.0, 1.0, grid + 1)
    gap.prefill(ts)
    vals = np.array([gap(t) for t in ts])
    low = vals < threshold
    run = np.flatnonzero(low[:-1] & low[1:])
    if run.size:
        i = run[0]
        j = i + 1
        while j + 1 <= grid and low[j + 1]:
            j += 1
        raise DegenerateArc(float(ts[i]), float(ts[j]))
    found = []
    # every grid point that could sit next to a crossing gets a dense rescan,
    # which separates crossings closer together than the grid step
    vols = np.array([gap.volume(t) for t in ts])
    for score, sv, shape in ((gap, vals, False), (gap.volume, vols, True)):
        for i in range(grid + 1):
            if _v_plausible(sv, i, 0.0 if shape else threshold):
                _scan_bracket(gap, score, ts[max(i - 1, 0)], ts[min(i + 1, grid)], threshold, found,
                              shape_only=shape)
    for end, v in ((0.0, vals[0]), (1.0, vals[-1])):
        if v < threshold:
            found.append(end)
    merged = []
    for t in sorted(float(t) for t in found):
        if merged and _same_crossing(gap, merged[-1], t, threshold):
            if t in (0.0, 1.0) or (merged[-1] not in (0.0, 1.0) and gap(t) < gap(merged[-1])):
                merged[-1] = t
            continue
        merged.append(t)
    snapped = []
    for t in merged:
        for end in (0.0, 1.0):
            if t != end and _same_crossing(gap, min(t, end), max(t, end), threshold):
                t = end
        if not snapped or snapped[-1] != t:
            snapped.append(t)
    merged = snapped
    return gap, merged


def _same_crossing(gap, a, b, threshold):
    """Candidates closer than ``CLUSTER_TOL`` with the gap staying below threshold between them."""
    if b - a <= MERGE_TOL:
        return True
    if b - a > CLUSTER_TOL:
        return False
    return all(gap(a + f * (b - a)) < threshold for f in (0.25, 0.5, 0.75))


def _abs_zero_tol(Z, dZ):
    return 1e-9 * max(1.0, np.linalg.norm(Z, 2)) * max(1e-300, np.linalg.norm(dZ, 2))


def _unresolved_radius(gap, t, threshold, cap=1e-2):
    """Half-width of the window around ``t`` where the gap stays below ``threshold``."""
    h = 1e-12
    while h < cap and (gap(min(t + h, 1.0)) < threshold or gap(max(t - h, 0.0)) < threshold):
        h *= 2
    return h


def crossing_form(path, L0, t, kernel_tol=KERNEL_TOL, zero_tol=None, gap=None,
                  threshold=CROSSING_THRESHOLD):
    gap = gap or _Gap(path, L0)
    Q, R, s, Vt = gap.svd(t)
    k = int(np.sum(s < kernel_tol))
    D = Vt[-k:].T if k else np.zeros((Q.shape[1], 0))
    C = np.linalg.solve(R, D)          # frame coordinates of the kernel
    Z, dZ = path(t), path.derivative(t)
    V = Z @ C
    G = V.T @ path.Omega @ (dZ @ C)
    G = 0.5 * (G + G.T)
    if zero_tol is None:
        zero_tol = max(1e-7 * np.linalg.norm(G, 2) if G.size else 0.0,
                       _abs_zero_tol(Z, dZ) * max(1.0, np.linalg.norm(C, 2)) ** 2)
        if 0.0 < t < 1.0 and G.size:
            # an interior crossing is only located up to the window where the gap
            # stays small; the form may vary by this much across that window
            h = _unresolved_radius(gap, t, threshold)
            drift = 0.0
            for u in (max(t - h, 0.0), min(t + h, 1.0)):
                Gu = (path(u) @ C).T @ path.Omega @ (path.derivative(u) @ C)
                drift = max(drift, np.linalg.norm(0.5 * (Gu + Gu.T) - G, 2))
            zero_tol = max(zero_tol, drift)
    return V, C, QuadraticForm(G, basis=V), zero_tol


def _reframed_inertia(path, t, C, zero_tol, rng):
    n = C.shape[0]
    A0 = np.eye(n) + 0.3 * rng.standard_normal((n, n))
    A1 = rng.standard_normal((n, n))
    A = A0 + t * A1
    Z2 = path(t) @ A
    dZ2 = path.derivative(t) @ A + path(t) @ A1
    C2 = np.linalg.solve(A, C)
    G2 = (Z2 @ C2).T @ path.Omega @ (dZ2 @ C2)
    return signature(0.5 * (G2 + G2.T), zero_tol)


class _Winding:
    """Signed crossing count between two transverse times.

    Uses the unwrapped phase of ``det W`` and the eigenvalue angles of ``W``
    at the two ends, as in :func:`winding_index`, restricted to a window.
    """

    def __init__(self, path, L0):
        self.path, self.L0 = path, L0
        self.B0 = L0.orthonormal
        self.B1 = compatible_J(L0.Omega) @ self.B0
        self.cache = {}
        self.angle_cache = {}

    def _at(self, t):
        t = float(t)
        if t not in self.cache:
            W = _unitary_square(self.path, self.L0, t, self.B0, self.B1)
            self.cache[t] = (np.linalg.det(W), W)
        return self.cache[t]

    def prefill(self, ts):
        ts = [float(t) for t in ts if float(t) not in self.cache]
        if not ts:
            return
        Z = np.stack([self.path(t) for t in ts])
        U = self.B0.T @ Z + 1j * (self.B1.T @ Z)
        W = U @ np.linalg.solve(np.conj(np.swapaxes(U, 1, 2)) @ U, np.swapaxes(U, 1, 2))
        dets = np.linalg.det(W)
        angles = np.sum(np.angle(np.linalg.eigvals(W)) % (2 * np.pi), axis=1)
        for t, d, w, ang in zip(ts, dets, W, angles):
            self.cache[t] = (d, w)
            self.angle_cache[t] = float(ang)

    def _phase(self, a, b, max_step):
        d = float(np.angle(self._at(b)[0] / self._at(a)[0]))
        if (abs(d) < np.pi / 8 and b - a <= max_step) or b - a < 1e-13:
            return d
        m = 0.5 * (a + b)
        return self._phase(a, m, max_step) + self._phase(m, b, max_step)

    def _angles(self, t):
        t = float(t)
        if t not in self.angle_cache:
            W = self._at(t)[1]
            self.angle_cache[t] = float(np.sum(np.angle(np.linalg.eigvals(W)) % (2 * np.pi)))
        return self.angle_cache[t]

    def count(self, a, b, max_step):
        theta = self._phase(a, b, max_step)
        return round((theta - (self._angles(b) - self._angles(a))) / (2 * np.pi))


def _end_knot(gap, end, step, safe):
    """Transverse time as close to ``end`` as the gap allows, within one step."""
    ts = [end + (step if end == 0.0 else -step) * 0.5 ** k for k in range(1, 40)]
    gap.prefill(ts)
    best = None
    for t in ts:
        if gap(t) < safe:
            break
        best = t
    return best


def _audit(path, L0, gap, reports, grid, threshold, make_report):
    """Add crossings the scan missed, found by comparing with windowed winding counts.

    Crossings closer together than the rescans resolve can hide inside a
    narrow notch of the gap.  On every grid cell with transverse ends the
    signed count from the winding of ``det W`` must equal the sum of the
    interior signatures; a mismatch is bisected down to the missing crossing.
    """
    wind = _Winding(path, L0)
    safe = 10 * threshold
    step = 1.0 / grid
    knots = [t for t in np.linspace(0.0, 1.0, grid + 1)[1:-1] if gap(t) >= safe]
    for end in (0.0, 1.0):
        k = _end_knot(gap, end, step, safe)
        if k is not None:
            knots.append(k)
    knots = sorted(set(float(t) for t in knots))
    wind.prefill(knots)

    def resolve(a, b, depth):
        inside = [r for r in reports if a < r.t < b]
        if any(not r.regular for r in inside):
            return
        if wind.count(a, b, step) == sum(r.inertia.sign for r in inside):
            return
        mid = None
        if b - a > 1e-11 and depth < 60:
            for f in (0.5, 0.45, 0.55, 0.4, 0.6, 0.3, 0.7):
                m = a + f * (b - a)
                if gap(m) >= safe:
                    mid = m
                    break
        if mid is None:
            t, _ = _golden_min(gap, a, b)
            if all(abs(t - r.t) > MERGE_TOL for r in reports):
                reports.append(make_report(float(t)))
            return
        resolve(a, mid, depth + 1)
        resolve(mid, b, depth + 1)

    for a, b in zip(knots, knots[1:]):
        resolve(a, b, 0)
    reports.sort(key=lambda r: r.t)


def _memoized(path):
    """Same path, with frames and derivatives cached by time."""
    frames, derivs = {}, {}

    def frame(t):
        if t not in frames:
            frames[t] = path(t)
        return frames[t]

    def dframe(t):
        if t not in derivs:
            derivs[t] = path.derivative(t)
        return derivs[t]

    return LagrangianPath(frame, path.Omega, dframe)


def find_crossings(path, L0, grid=DEFAULT_GRID, threshold=CROSSING_THRESHOLD,
                   kernel_tol=KERNEL_TOL, zero_tol=None, check_frame=True, audit=True):
    """All ``t`` with ``path(t) & L0 != 0``, each with its crossing form."""
    if grid < 2:
        raise InvalidInput("grid must be >= 2")
    if path.Omega.shape != L0.Omega.shape:
        raise InvalidInput("path and reference Lagrangian live in different spaces")
    path = _memoized(path)
    gap, times = _locate(path, L0, grid, threshold)
    rng = np.random.default_rng(20240611)

    def make_report(t):
        V, C, q, ztol = crossing_form(path, L0, t, kernel_tol, zero_tol, gap, threshold)
        inertia = signature(q, ztol)
        same = True
        if check_frame and q.dim:
            same = _reframed_inertia(path, t, C, ztol, rng) == inertia
        return CrossingReport(t, V, q, inertia.p_zero == 0, inertia, same)

    reports = [make_report(t) for t in times]
    if audit:
        _audit(path, L0, gap, reports, grid, threshold, make_report)
    return reports


# ---------------------------------------------------------------------------
# the index
# ---------------------------------------------------------------------------

def _bumps():
    return [
        (lambda t: t * t * (1 - t) ** 2, lambda t: 2 * t * (1 - t) * (1 - 2 * t)),
        (lambda t: t * t * (1 - t) ** 3, lambda t: t * (1 - t) ** 2 * (2 - 5 * t)),
    ]


def _total(reports):
    twice = sum(r.twice_contribution for r in reports)
    return Fraction(twice, 2)


def maslov_report(path, L0, grid=DEFAULT_GRID, auto_perturb=True, threshold=CROSSING_THRESHOLD,
                  zero_tol=None, eps=1e-3):
    """Maslov index with the crossing list and any perturbation used."""
    reports = find_crossings(path, L0, grid, threshold, zero_tol=zero_tol)
    for r in reports:
        if r.endpoint and not r.regular:
            raise IrregularEndpoint(r.t)
    bad = [r for r in reports if not r.regular]
    if not bad:
        return MaslovResult(_total(reports), reports, None, grid)
    if not auto_perturb:
        raise IrregularCrossing(bad[0].t)
    ts = [r.t for r in reports]
    gaps = [b - a for a, b in zip(ts, ts[1:]) if b > a]
    eps = min(eps, 0.5 * min(gaps)) if gaps else eps
    t_bad = bad[0].t
    bump, dbump = max(_bumps(), key=lambda bd: abs(bd[1](t_bad)))
    perturbed = path.bumped(eps, bump, dbump)
    reports = find_crossings(perturbed, L0, grid, threshold, zero_tol=zero_tol)
    for r in reports:
        if not r.regular:
            raise (IrregularEndpoint(r.t) if r.endpoint else IrregularCrossing(r.t))
    return MaslovResult(_total(reports), reports, eps, grid)


def maslov_index(path, L0, grid=DEFAULT_GRID, auto_perturb=True, **kw):
    """``mu_{L0}(path)`` as an exact half-integer (``Fraction``)."""
    return maslov_report(path, L0, grid, auto_perturb, **kw).value


# ---------------------------------------------------------------------------
# independent oracle: winding of det^2 in the unitary picture
# ---------------------------------------------------------------------------

def _unitary_square(path, L0, t, B0, B1):
    Z = path(t)
    U = (B0.T @ Z) + 1j * (B1.T @ Z)
    return U @ np.linalg.solve(U.conj().T @ U, U.T)


def winding_index(path, L0, samples=2000, tol=1e-7, max_refine=6):
    """Maslov index from eigenvalue winding of ``W = U U^T`` through 1.

    ``L0`` is moved to the real subspace by a unitary change of basis and
    each Lagrangian ``L = U R^n`` is encoded by ``W = U U^T``; eigenvalues of
    ``W`` equal to 1 mark intersections with ``L0``.  The count uses the
    unwrapped phase of ``det W`` and the branch ``[0, 2 pi)`` for
    eigenvalue angles (angles on the cut count as ``pi``).
    """
    Q0 = L0.orthonormal
    B1 = compatible_J(L0.Omega) @ Q0
    for _ in range(max_refine):
        ts = np.linspace(0, 1, samples + 1)
        dets = np.empty(ts.size, dtype=complex)
        for i, t in enumerate(ts):
            dets[i] = np.linalg.det(_unitary_square(path, L0, t, Q0, B1))
        steps = np.angle(dets[1:] / dets[:-1])
        if np.max(np.abs(steps)) < np.pi / 4:
            break
        samples *= 2
    else:
        raise InvalidInput("winding oracle could not resolve the phase")
    theta = float(np.sum(steps))

    def cut_sum(t):
        ang = np.angle(np.linalg.eigvals(_unitary_square(path, L0, t, Q0, B1))) % (2 * np.pi)
        on_cut = (ang < tol) | (ang > 2 * np.pi - tol)
        return float(np.sum(np.where(on_cut, np.pi, ang)))

    value = (theta - (cut_sum(1.0) - cut_sum(0.0))) / (2 * np.pi)
    twice = round(2 * value)
    if abs(2 * value - twice) > 1e-4:
        raise InvalidInput(f"winding oracle returned non half-integer {value}")
    return Fraction(twice, 2)
