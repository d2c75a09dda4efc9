"""Multivariate polynomials with vectorized value, gradient and Hessian."""

import itertools

import numpy as np

from .errors import InvalidInput


def exponents(d, degree):
    """All exponent tuples of total degree ``degree`` in ``d`` variables."""
    for combo in itertools.combinations_with_replacement(range(d), degree):
        e = [0] * d
        for i in combo:
            e[i] += 1
        yield tuple(e)


class Polynomial:
    """``sum_j c_j prod_i x_i^{e_ji}``; inputs may be one point or an ``(N, d)`` stack."""

    def __init__(self, exps, coefs):
        self.exps = np.atleast_2d(np.asarray(exps, dtype=int))
        self.coefs = np.asarray(coefs, dtype=float).ravel()
        if self.exps.shape[0] != self.coefs.size or np.any(self.exps < 0):
            raise InvalidInput("polynomial needs one nonnegative exponent row per coefficient")
        self.d = self.exps.shape[1]

    @classmethod
    def fit(cls, X, y, degree):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        exps = [e for k in range(degree + 1) for e in exponents(X.shape[1], k)]
        if len(exps) > len(y):
            raise InvalidInput(f"need at least {len(exps)} samples for degree {degree}")
        V = _monomials(X, np.array(exps))
        coef, *_ = np.linalg.lstsq(V, np.asarray(y, dtype=float), rcond=None)
        return cls(exps, coef), float(np.max(np.abs(V @ coef - y)))

    def _prep(self, x):
        x = np.asarray(x, dtype=float)
        return np.atleast_2d(x), x.ndim == 1

    def value(self, x):
        X, single = self._prep(x)
        out = _monomials(X, self.exps) @ self.coefs
        return float(out[0]) if single else out

    def grad(self, x):
        X, single = self._prep(x)
        out = np.zeros_like(X)
        for i in range(self.d):
            shift = np.zeros(self.d, dtype=int)
            shift[i] = 1
            out[:, i] = _shifted(X, self.exps, shift) @ (self.coefs * self.exps[:, i])
        return out[0] if single else out

    def hess(self, x):
        X, single = self._prep(x)
        out = np.zeros((X.shape[0], self.d, self.d))
        for i in range(self.d):
            for j in range(i, self.d):
                shift = np.zeros(self.d, dtype=int)
                shift[i] += 1
                shift[j] += 1
                fac = self.exps[:, i] * (self.exps[:, j] - (i == j))
                out[:, i, j] = out[:, j, i] = _shifted(X, self.exps, shift) @ (self.coefs * fac)
        return out[0] if single else out

    def as_dict(self):
        return {"exponents": self.exps.tolist(), "coefficients": self.coefs.tolist()}


def _monomials(X, exps):
    return np.prod(X[:, None, :] ** exps[None, :, :], axis=2)


def _shifted(X, exps, shift):
    e = exps - shift
    ok = np.all(e >= 0, axis=1)
    return _monomials(X, np.maximum(e, 0)) * ok
