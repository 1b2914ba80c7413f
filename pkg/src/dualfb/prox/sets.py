"""Closed convex sets with exact projectors.

Sets live on flattened coordinate spaces of dimension ``dim``; ``project``
accepts any array with ``dim`` entries and preserves its shape. The private
``_proj``/``_dist``/``_supp`` methods work on batches of points stored as
rows of an ``(m, dim)`` array, which keeps the grid oracles vectorized.
"""

from __future__ import annotations

import numpy as np

from ..errors import CatalogError, InputError, RankError, StructuralError

__all__ = [
    "ConvexSet",
    "Interval",
    "Box",
    "Halfspace",
    "Affine",
    "L2Ball",
    "LinfBall",
    "L1Ball",
    "Subspace",
    "WholeSpace",
    "Singleton",
    "NonnegOrthant",
    "PairBall",
    "ScaledSet",
    "project",
    "project_l1_ball",
]

CONTAIN_TOL = 1e-9


def _zero_tol(u):
    return 1e-9 * np.maximum(1.0, np.linalg.norm(u, axis=1))


def project_l1_ball(X, radius):
    """Rowwise Euclidean projection onto ``{x : ||x||_1 <= radius}`` (sort and threshold)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    A = np.abs(X)
    inside = A.sum(axis=1) <= radius
    if np.all(inside):
        return X.copy()
    U = -np.sort(-A, axis=1)
    css = np.cumsum(U, axis=1) - radius
    k = np.arange(1, X.shape[1] + 1)
    cond = U - css / k > 0
    rho = X.shape[1] - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(X.shape[0]), rho] / (rho + 1)
    theta = np.where(inside, 0.0, np.maximum(theta, 0.0))
    return np.sign(X) * np.maximum(A - theta[:, None], 0.0)


class ConvexSet:
    """Nonempty closed convex subset of ``R^dim``."""

    kind = "abstract"
    dim: int

    def _rows(self, x):
        arr = np.asarray(x, dtype=float)
        if arr.size != self.dim:
            raise StructuralError(f"{self.kind}: point has {arr.size} entries, set lives in R^{self.dim}")
        return arr.reshape(1, self.dim)

    def _proj(self, X):
        raise NotImplementedError

    def _dist(self, X):
        return np.linalg.norm(X - self._proj(X), axis=1)

    def _supp(self, U):
        raise NotImplementedError

    def project(self, x):
        x = np.asarray(x, dtype=float)
        return self._proj(self._rows(x)).reshape(x.shape)

    def distance(self, x):
        return float(self._dist(self._rows(x))[0])

    def contains(self, x, tol=CONTAIN_TOL):
        return self.distance(x) <= tol

    def support(self, u):
        """``sigma_C(u) = sup_{x in C} <x, u>``; ``inf`` when unbounded."""
        return float(self._supp(self._rows(u))[0])

    def scaled(self, c):
        return self if c == 1.0 else ScaledSet(self, c)

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim})"


def _vec(a, name):
    a = np.asarray(a, dtype=float).ravel()
    if a.size == 0:
        raise InputError(f"{name} must be nonempty")
    return a


class Box(ConvexSet):
    """Coordinatewise bounds ``lo <= x <= hi``; infinite bounds allowed."""

    kind = "box"

    def __init__(self, lo, hi, dim=None):
        lo = np.asarray(lo, dtype=float).ravel()
        hi = np.asarray(hi, dtype=float).ravel()
        n = dim if dim is not None else max(lo.size, hi.size)
        self.lo = np.broadcast_to(lo, (n,)).copy()
        self.hi = np.broadcast_to(hi, (n,)).copy()
        if np.any(np.isnan(self.lo)) or np.any(np.isnan(self.hi)) or np.any(self.lo > self.hi):
            raise InputError("box needs lo <= hi")
        self.dim = n

    def _proj(self, X):
        return np.clip(X, self.lo, self.hi)

    def _supp(self, U):
        with np.errstate(invalid="ignore"):
            terms = np.where(U > 0, U * self.hi, np.where(U < 0, U * self.lo, 0.0))
        return terms.sum(axis=1)


class Interval(Box):
    kind = "interval"

    def __init__(self, lo, hi):
        super().__init__([lo], [hi], dim=1)

    def __repr__(self):
        return f"Interval({self.lo[0]}, {self.hi[0]})"


class NonnegOrthant(Box):
    kind = "nonneg_orthant"

    def __init__(self, dim):
        super().__init__(0.0, np.inf, dim=int(dim))


class Halfspace(ConvexSet):
    """``{x : <x, u> <= eta}`` with ``u != 0``."""

    kind = "halfspace"

    def __init__(self, u, eta):
        self.u = _vec(u, "u")
        self.uu = float(self.u @ self.u)
        if self.uu == 0.0:
            raise InputError("halfspace normal must be nonzero")
        self.eta = float(eta)
        self.dim = self.u.size

    def _proj(self, X):
        excess = np.maximum(X @ self.u - self.eta, 0.0)
        return X - np.outer(excess / self.uu, self.u)

    def _dist(self, X):
        return np.maximum(X @ self.u - self.eta, 0.0) / np.sqrt(self.uu)

    def _supp(self, U):
        t = U @ self.u / self.uu
        resid = np.linalg.norm(U - np.outer(t, self.u), axis=1)
        ok = (t >= -_zero_tol(U)) & (resid <= _zero_tol(U))
        return np.where(ok, np.maximum(t, 0.0) * self.eta, np.inf)


class Affine(ConvexSet):
    """``{x : A x = c}`` with ``A`` of full row rank."""

    kind = "affine"

    def __init__(self, A, c):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        c = np.asarray(c, dtype=float).ravel()
        if c.size != A.shape[0]:
            raise StructuralError("affine set: A and c disagree in row count")
        if np.linalg.matrix_rank(A) < A.shape[0]:
            raise RankError("affine set: A must have full row rank")
        self.A, self.c = A, c
        self.gram = A @ A.T
        self.dim = A.shape[1]
        self.x0 = A.T @ np.linalg.solve(self.gram, c)

    def _proj(self, X):
        R = X @ self.A.T - self.c
        W = np.linalg.solve(self.gram, R.T).T
        return X - W @ self.A

    def _supp(self, U):
        # u must lie in range(A^T); then sigma(u) = <x0, u>
        W = np.linalg.solve(self.gram, (U @ self.A.T).T).T
        resid = np.linalg.norm(U - W @ self.A, axis=1)
        return np.where(resid <= _zero_tol(U), U @ self.x0, np.inf)


class L2Ball(ConvexSet):
    kind = "l2_ball"

    def __init__(self, center, radius):
        self.center = _vec(center, "center")
        self.radius = float(radius)
        if not self.radius >= 0:
            raise InputError("radius must be nonnegative")
        self.dim = self.center.size

    def _proj(self, X):
        D = X - self.center
        n = np.linalg.norm(D, axis=1)
        scale = np.where(n > self.radius, self.radius / np.where(n > 0, n, 1.0), 1.0)
        return self.center + D * scale[:, None]

    def _dist(self, X):
        return np.maximum(np.linalg.norm(X - self.center, axis=1) - self.radius, 0.0)

    def _supp(self, U):
        return U @ self.center + self.radius * np.linalg.norm(U, axis=1)


class LinfBall(ConvexSet):
    """``{x : max |x_i| <= radius}``."""

    kind = "linf_ball"

    def __init__(self, radius, dim):
        self.radius = float(radius)
        if not self.radius >= 0:
            raise InputError("radius must be nonnegative")
        self.dim = int(dim)

    def _proj(self, X):
        return np.clip(X, -self.radius, self.radius)

    def _supp(self, U):
        return self.radius * np.abs(U).sum(axis=1)


class L1Ball(ConvexSet):
    """``{x : sum |x_i| <= radius}``."""

    kind = "l1_ball"

    def __init__(self, radius, dim):
        self.radius = float(radius)
        if not self.radius >= 0:
            raise InputError("radius must be nonnegative")
        self.dim = int(dim)

    def _proj(self, X):
        return project_l1_ball(X, self.radius)

    def _supp(self, U):
        return self.radius * np.abs(U).max(axis=1)


class Subspace(ConvexSet):
    """Span of orthonormal vectors given as the columns of ``basis``."""

    kind = "subspace"

    def __init__(self, basis, tol=1e-10):
        B = np.asarray(basis, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        if np.max(np.abs(B.T @ B - np.eye(B.shape[1]))) > tol:
            raise StructuralError("subspace basis must be orthonormal")
        self.B = B
        self.dim = B.shape[0]

    def _proj(self, X):
        return (X @ self.B) @ self.B.T

    def _supp(self, U):
        inside = np.linalg.norm(U @ self.B, axis=1) <= _zero_tol(U)
        return np.where(inside, 0.0, np.inf)


class WholeSpace(ConvexSet):
    kind = "whole_space"

    def __init__(self, dim):
        self.dim = int(dim)

    def _proj(self, X):
        return X.copy()

    def _dist(self, X):
        return np.zeros(X.shape[0])

    def _supp(self, U):
        return np.where(np.linalg.norm(U, axis=1) <= 1e-12, 0.0, np.inf)


class Singleton(ConvexSet):
    kind = "singleton"

    def __init__(self, c):
        self.c = _vec(c, "c")
        self.dim = self.c.size

    def _proj(self, X):
        return np.broadcast_to(self.c, X.shape).copy()

    def _supp(self, U):
        return U @ self.c


class PairBall(ConvexSet):
    """Product over pixels of the unit ball of the dual norm of ``l^p`` in ``R^2``.

    Points are gradient fields of shape ``(2, n, n)``; the pair at pixel
    ``(k, l)`` is ``(y[0, k, l], y[1, k, l])``. ``p = 1`` gives the unit
    ``l^inf`` ball (componentwise clamp), ``p = 2`` the Euclidean disc and
    ``p = inf`` the unit ``l^1`` ball.
    """

    kind = "pair_ball"

    def __init__(self, p, n):
        if p not in (1, 2, np.inf):
            raise CatalogError(f"p must be 1, 2 or inf, got {p}")
        self.p = p
        self.n = int(n)
        self.dim = 2 * self.n * self.n

    def _split(self, X):
        h = self.n * self.n
        return X[:, :h], X[:, h:]

    def _proj(self, X):
        a, b = self._split(X)
        if self.p == 1:
            return np.clip(X, -1.0, 1.0)
        if self.p == 2:
            r = np.maximum(1.0, np.hypot(a, b))
            return np.concatenate([a / r, b / r], axis=1)
        # two-entry l1 ball: the threshold solves |a|-t + |b|-t = 1 unless the
        # smaller entry is cut to zero first
        aa, bb = np.abs(a), np.abs(b)
        big, small = np.maximum(aa, bb), np.minimum(aa, bb)
        theta = np.where(big - small >= 1.0, big - 1.0, 0.5 * (big + small - 1.0))
        theta = np.where(aa + bb <= 1.0, 0.0, theta)
        pa = np.sign(a) * np.maximum(aa - theta, 0.0)
        pb = np.sign(b) * np.maximum(bb - theta, 0.0)
        return np.concatenate([pa, pb], axis=1)

    def _supp(self, U):
        a, b = self._split(U)
        if self.p == 1:
            s = np.abs(a) + np.abs(b)
        elif self.p == 2:
            s = np.hypot(a, b)
        else:
            s = np.maximum(np.abs(a), np.abs(b))
        return s.sum(axis=1)


class ScaledSet(ConvexSet):
    """``c * C`` for ``c > 0``."""

    kind = "scaled"

    def __init__(self, base, c):
        c = float(c)
        if not c > 0:
            raise InputError("scale must be positive")
        self.base, self.c = base, c
        self.dim = base.dim

    def _proj(self, X):
        return self.c * self.base._proj(X / self.c)

    def _dist(self, X):
        return self.c * self.base._dist(X / self.c)

    def _supp(self, U):
        return self.c * self.base._supp(U)

    def scaled(self, c):
        return self.base.scaled(self.c * c)


def project(C, x):
    """Euclidean projection of ``x`` onto ``C``."""
    if not isinstance(C, ConvexSet):
        raise StructuralError(f"not a convex set: {C!r}")
    return C.project(x)
