"""Convex functions on coordinate spaces with exact proximity operators.

Each :class:`ProxFunction` provides ``prox(x, gamma)`` (the minimizer of
``gamma F(y) + ||x - y||^2 / 2``) and, when available, function values,
conjugate values and a catalog object for the conjugate. Batched
evaluation ``values(X)`` takes points as rows of an ``(m, dim)`` array.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from ..errors import CapabilityError, CatalogError, InputError, NumericalError, StructuralError
from ..spaces import LinOp, from_matrix, inner
from .scalar import PlusIndicatorInterval, ScalarFun, ZeroFun
from .sets import ConvexSet, Singleton

__all__ = [
    "ProxFunction",
    "Indicator",
    "Support",
    "DistSq",
    "SqMinusDist",
    "PhiOfDist",
    "SupportPlusPhiNorm",
    "Quadratic",
    "SumQuadratics",
    "SeparableBasis",
    "TightFrameComposite",
    "ScalarLift",
    "Zero",
    "prox_vector",
    "prox_conjugate",
    "moreau_envelope_value",
    "conj_envelope_value",
    "CG_RTOL",
]

CG_RTOL = 1e-12


def _gamma(gamma):
    gamma = float(gamma)
    if not gamma > 0 or not np.isfinite(gamma):
        raise InputError(f"gamma must be a finite positive number, got {gamma}")
    return gamma


class ProxFunction:
    """Base class. ``dim`` is ``None`` for functions defined on any space."""

    kind = "abstract"
    dim: int | None = None

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if self.dim is not None and x.size != self.dim:
            raise StructuralError(f"{self.kind}: point has {x.size} entries, expected {self.dim}")
        return x

    def prox(self, x, gamma=1.0):
        x = self._check(x)
        return np.asarray(self._prox(x, _gamma(gamma)), dtype=float).reshape(x.shape)

    def _prox(self, x, gamma):
        raise NotImplementedError

    def prox_conj(self, x, gamma=1.0):
        """``prox_{gamma F*}`` via the Moreau decomposition."""
        x = self._check(x)
        gamma = _gamma(gamma)
        return x - gamma * self.prox(x / gamma, 1.0 / gamma)

    # values ---------------------------------------------------------------
    def values(self, X):
        raise CapabilityError(f"{self.kind}: function value not available")

    def value(self, x):
        x = self._check(x)
        return float(self.values(x.reshape(1, -1))[0])

    @property
    def has_value(self):
        try:
            self.values(np.zeros((1, self.dim or 1)))
        except CapabilityError:
            return False
        return True

    def conj_value(self, u):
        raise CapabilityError(f"{self.kind}: conjugate value not available")

    @property
    def has_conj_value(self):
        try:
            self.conj_value(np.zeros(self.dim or 1))
        except CapabilityError:
            return False
        return True

    def conjugate(self) -> "ProxFunction | None":
        return None


class Indicator(ProxFunction):
    """``iota_C``: zero on ``C``, ``+inf`` elsewhere."""

    kind = "indicator"

    def __init__(self, C: ConvexSet, tol=1e-9):
        self.C = C
        self.dim = C.dim
        self.tol = tol

    def _prox(self, x, gamma):
        return self.C.project(x)

    def prox_conj(self, x, gamma=1.0):
        x = self._check(x)
        gamma = _gamma(gamma)
        return x - gamma * self.C.project(x / gamma)

    def values(self, X):
        X = np.atleast_2d(X)
        tol = self.tol * np.maximum(1.0, np.linalg.norm(X, axis=1))
        return np.where(self.C._dist(X) <= tol, 0.0, np.inf)

    def conj_value(self, u):
        return self.C.support(self._check(u))

    def conjugate(self):
        return Support(self.C)


class Support(ProxFunction):
    """``sigma_C(x) = sup_{c in C} <c, x>``."""

    kind = "support"

    def __init__(self, C: ConvexSet):
        self.C = C
        self.dim = C.dim

    def _prox(self, x, gamma):
        return x - gamma * self.C.project(x / gamma)

    def prox_conj(self, x, gamma=1.0):
        _gamma(gamma)
        return self.C.project(self._check(x))

    def values(self, X):
        return self.C._supp(np.atleast_2d(X))

    def conj_value(self, u):
        return 0.0 if self.C.contains(self._check(u)) else np.inf

    def conjugate(self):
        return Indicator(self.C)


class DistSq(ProxFunction):
    """``d_C(x)^2 / (2 alpha)``."""

    kind = "dist_sq"

    def __init__(self, C: ConvexSet, alpha=1.0):
        self.C, self.alpha = C, _gamma(alpha)
        self.dim = C.dim

    def _prox(self, x, gamma):
        a = self.alpha / gamma
        return x + (self.C.project(x) - x) / (1.0 + a)

    def values(self, X):
        return self.C._dist(np.atleast_2d(X)) ** 2 / (2.0 * self.alpha)

    def conj_value(self, u):
        u = self._check(u)
        return self.C.support(u) + 0.5 * self.alpha * inner(u, u)


class SqMinusDist(ProxFunction):
    """``(||x||^2 - d_C(x)^2) / (2 alpha)``."""

    kind = "sq_minus_dist"

    def __init__(self, C: ConvexSet, alpha=1.0):
        self.C, self.alpha = C, _gamma(alpha)
        self.dim = C.dim

    def _prox(self, x, gamma):
        a = self.alpha / gamma
        return x - self.C.project(a * x / (a + 1.0)) / a

    def values(self, X):
        X = np.atleast_2d(X)
        return (np.sum(X * X, axis=1) - self.C._dist(X) ** 2) / (2.0 * self.alpha)

    def conj_value(self, u):
        u = self._check(u)
        if not self.C.contains(self.alpha * u):
            return np.inf
        return 0.5 * self.alpha * inner(u, u)


def _require_even(phi, where):
    if not isinstance(phi, ScalarFun):
        raise CatalogError(f"{where}: expected a ScalarFun, got {phi!r}")
    if not phi.is_even:
        raise CatalogError(f"{where}: phi must be even")


class PhiOfDist(ProxFunction):
    """``phi(d_C(x))`` for an even convex ``phi`` finite at 0.

    The prox selects one of three branches: ``d_C(x) > max d phi(0)``
    moves ``x`` toward ``P_C x`` by ``prox_{phi*}(d) / d``; otherwise a
    point outside ``C`` maps to ``P_C x`` and a point of ``C`` (including
    ``d_C(x) = 0``) stays put. ``phi = iota_{0}`` therefore gives ``P_C``.
    """

    kind = "phi_of_dist"

    def __init__(self, phi: ScalarFun, C: ConvexSet):
        _require_even(phi, "phi_of_dist")
        phi.subdiff_at_zero()
        self.phi, self.C = phi, C
        self.dim = C.dim

    def _prox(self, x, gamma):
        phi = self.phi.scaled(gamma)
        p = self.C.project(x)
        d = float(np.linalg.norm(x - p))
        if d > phi.max_subgrad_at_zero:
            return x + (phi.prox_conj(d) / d) * (p - x)
        if d > 0.0:
            return p
        return x.copy()

    def values(self, X):
        return self.phi.value(self.C._dist(np.atleast_2d(X)))

    def conj_value(self, u):
        u = self._check(u)
        return self.C.support(u) + float(self.phi.conj_value(np.linalg.norm(u)))

    def conjugate(self):
        c = self.phi.conjugate()
        return None if c is None else SupportPlusPhiNorm(self.C, c)


class SupportPlusPhiNorm(ProxFunction):
    """``sigma_C(x) + phi(||x||)`` for an even ``phi`` with bounded argmin.

    The branch test compares ``d_C(x)`` with ``max Argmin phi``; functions
    whose argmin is unbounded (``phi`` constant) are rejected.
    """

    kind = "support_plus_phi_norm"

    def __init__(self, C: ConvexSet, phi: ScalarFun):
        _require_even(phi, "support_plus_phi_norm")
        phi.argmin_max()
        self.phi, self.C = phi, C
        self.dim = C.dim

    def _prox(self, x, gamma):
        phi = self.phi.scaled(gamma)
        Cg = self.C.scaled(gamma)
        p = Cg.project(x)
        d = float(np.linalg.norm(x - p))
        if d > phi.argmin_max():
            return (phi.prox(d) / d) * (x - p)
        if d > 0.0:
            return x - p
        return np.zeros_like(x)

    def values(self, X):
        X = np.atleast_2d(X)
        return self.C._supp(X) + self.phi.value(np.linalg.norm(X, axis=1))

    def conj_value(self, u):
        return float(self.phi.conj_value(self.C.distance(self._check(u))))

    def conjugate(self):
        c = self.phi.conjugate()
        if c is None:
            return None
        try:
            return PhiOfDist(c, self.C)
        except CatalogError:
            return None


def _as_linop(A, name):
    if isinstance(A, LinOp):
        return A
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise StructuralError(f"{name} must be a matrix or LinOp")
    return from_matrix(A)


def _shifted_solve(apply_A, rhs, gamma):
    """Solve ``(Id + gamma A) y = rhs`` by conjugate gradients."""
    shape = rhs.shape
    b = rhs.ravel()
    n = b.size
    nb = np.linalg.norm(b)
    if nb == 0.0:
        return np.zeros(shape)

    def mv(v):
        v = np.asarray(v).ravel()
        return v + gamma * np.ravel(apply_A(v.reshape(shape)))

    op = LinearOperator((n, n), matvec=mv, dtype=float)
    with np.errstate(invalid="ignore", over="ignore"):
        y, _ = cg(op, b, rtol=CG_RTOL, atol=0.0, maxiter=10 * n)
    resid = np.linalg.norm(b - mv(y)) / nb
    if not resid <= CG_RTOL * 10:
        raise NumericalError(f"conjugate gradients stopped at relative residual {resid:.3e}", residual=resid)
    return y.reshape(shape)


class Quadratic(ProxFunction):
    """``<A x, x> / 2 + <x, b> + alpha0`` with ``A`` self-adjoint positive semidefinite."""

    kind = "quadratic"

    def __init__(self, A, b=None, alpha0=0.0):
        self.A = _as_linop(A, "A")
        if self.A.shape_in != self.A.shape_out:
            raise StructuralError("quadratic: A must be square")
        self.dim = self.A.dim_in
        self.b = np.zeros(self.A.shape_in) if b is None else np.asarray(b, dtype=float).reshape(self.A.shape_in)
        self.alpha0 = float(alpha0)
        self._dense = self.A.matrix() if self.dim <= 64 else None

    def _prox(self, x, gamma):
        x = x.reshape(self.A.shape_in)
        return _shifted_solve(self.A.apply, x - gamma * self.b, gamma)

    def values(self, X):
        X = np.atleast_2d(X)
        bb = self.b.ravel()
        if self._dense is not None:
            AX = X @ self._dense.T
        else:
            AX = np.stack([np.ravel(self.A.apply(x.reshape(self.A.shape_in))) for x in X])
        return 0.5 * np.sum(AX * X, axis=1) + X @ bb + self.alpha0


class SumQuadratics(ProxFunction):
    """``sum_i alpha_i ||T_i x - r_i||^2 / 2``."""

    kind = "sum_quadratics"

    def __init__(self, terms: Sequence):
        if not terms:
            raise InputError("sum_quadratics needs at least one term")
        self.terms = []
        for alpha, T, r in terms:
            T = _as_linop(T, "T")
            self.terms.append((_gamma(alpha), T, np.asarray(r, dtype=float).reshape(T.shape_out)))
        shapes = {T.shape_in for _, T, _ in self.terms}
        if len(shapes) != 1:
            raise StructuralError("sum_quadratics: operators must share a domain")
        self.shape = shapes.pop()
        self.dim = self.terms[0][1].dim_in

    def _normal(self, x):
        return sum(a * T.apply_adjoint(T.apply(x)) for a, T, _ in self.terms)

    def _prox(self, x, gamma):
        x = x.reshape(self.shape)
        rhs = x + gamma * sum(a * T.apply_adjoint(r) for a, T, r in self.terms)
        return _shifted_solve(self._normal, rhs, gamma)

    def values(self, X):
        X = np.atleast_2d(X)
        out = np.zeros(X.shape[0])
        for i, x in enumerate(X):
            x = x.reshape(self.shape)
            out[i] = sum(0.5 * a * np.sum((T.apply(x) - r) ** 2) for a, T, r in self.terms)
        return out


def _phi_list(phis, n):
    if isinstance(phis, ScalarFun):
        return [phis] * n
    phis = list(phis)
    if len(phis) != n:
        raise StructuralError(f"expected {n} scalar functions, got {len(phis)}")
    for p in phis:
        if not isinstance(p, ScalarFun):
            raise CatalogError(f"unsupported scalar function {p!r}")
    return phis


def _apply_coordinatewise(phis, xi, op):
    """Apply ``op(phi, xi_subset)`` grouping coordinates that share a function."""
    if isinstance(phis, ScalarFun):
        return np.asarray(op(phis, xi), dtype=float)
    out = np.empty_like(xi, dtype=float)
    groups = {}
    for k, p in enumerate(phis):
        groups.setdefault(id(p), (p, []))[1].append(k)
    for p, idx in groups.values():
        out[..., idx] = op(p, xi[..., idx])
    return out


class ScalarLift(ProxFunction):
    """``sum_k phi_k(x_k)``; a single ScalarFun is applied to every coordinate."""

    kind = "scalar_lift"

    def __init__(self, phis, dim=None):
        if isinstance(phis, ScalarFun):
            self.phis = phis
            self.dim = dim
        else:
            self.phis = _phi_list(phis, len(list(phis)))
            self.dim = len(self.phis)
            if dim is not None and dim != self.dim:
                raise StructuralError("scalar_lift: dim disagrees with the number of functions")

    def _prox(self, x, gamma):
        flat = x.ravel()
        return _apply_coordinatewise(self.phis, flat, lambda p, t: p.prox(t, gamma)).reshape(x.shape)

    def values(self, X):
        X = np.atleast_2d(X)
        return _apply_coordinatewise(self.phis, X, lambda p, t: p.value(t)).sum(axis=1)

    def conj_value(self, u):
        u = self._check(u).ravel()
        return float(_apply_coordinatewise(self.phis, u, lambda p, t: p.conj_value(t)).sum())

    def conjugate(self):
        if isinstance(self.phis, ScalarFun):
            c = self.phis.conjugate()
            return None if c is None else ScalarLift(c, self.dim)
        cs = [p.conjugate() for p in self.phis]
        return None if any(c is None for c in cs) else ScalarLift(cs)


class SeparableBasis(ProxFunction):
    """``sum_k phi_k(<x, o_k>)`` over an orthonormal basis (columns of ``basis``)."""

    kind = "separable_basis"

    def __init__(self, phis, basis, tol=1e-10):
        O = np.asarray(basis, dtype=float)
        if O.ndim != 2 or O.shape[0] != O.shape[1]:
            raise StructuralError("separable_basis: basis must be a square matrix")
        if np.max(np.abs(O.T @ O - np.eye(O.shape[1]))) > tol:
            raise StructuralError("separable_basis: basis vectors are not orthonormal")
        self.O = O
        self.dim = O.shape[0]
        self.phis = phis if isinstance(phis, ScalarFun) else _phi_list(phis, self.dim)

    def _prox(self, x, gamma):
        c = self.O.T @ x.ravel()
        pc = _apply_coordinatewise(self.phis, c, lambda p, t: p.prox(t, gamma))
        return self.O @ pc

    def values(self, X):
        C = np.atleast_2d(X) @ self.O
        return _apply_coordinatewise(self.phis, C, lambda p, t: p.value(t)).sum(axis=1)

    def conj_value(self, u):
        c = self.O.T @ self._check(u).ravel()
        return float(_apply_coordinatewise(self.phis, c, lambda p, t: p.conj_value(t)).sum())

    def conjugate(self):
        if isinstance(self.phis, ScalarFun):
            cs = self.phis.conjugate()
            return None if cs is None else SeparableBasis(cs, self.O)
        cs = [p.conjugate() for p in self.phis]
        return None if any(c is None for c in cs) else SeparableBasis(cs, self.O)


class TightFrameComposite(ProxFunction):
    """``psi(M x)`` where ``M M* = kappa Id``."""

    kind = "tight_frame_composite"

    def __init__(self, psi: ProxFunction, M, kappa, trials=10, seed=0, tol=1e-10):
        self.M = _as_linop(M, "M")
        self.psi = psi
        self.kappa = _gamma(kappa)
        self.dim = self.M.dim_in
        rng = np.random.default_rng(seed)
        for _ in range(trials):
            y = rng.standard_normal(self.M.shape_out)
            defect = np.linalg.norm(self.M.apply(self.M.apply_adjoint(y)) - self.kappa * y)
            if defect > tol * max(1.0, self.kappa) * np.linalg.norm(y):
                raise StructuralError(f"M M* differs from kappa Id (defect {defect:.3e})")

    def _prox(self, x, gamma):
        x = x.reshape(self.M.shape_in)
        Mx = self.M.apply(x)
        return x + self.M.apply_adjoint(self.psi.prox(Mx, self.kappa * gamma) - Mx) / self.kappa

    def values(self, X):
        X = np.atleast_2d(X)
        return np.array([self.psi.value(self.M.apply(x.reshape(self.M.shape_in))) for x in X])


class Zero(ProxFunction):
    kind = "zero"

    def __init__(self, dim=None):
        self.dim = dim

    def _prox(self, x, gamma):
        return x.copy()

    def values(self, X):
        return np.zeros(np.atleast_2d(X).shape[0])

    def conj_value(self, u):
        return 0.0 if np.all(self._check(u) == 0.0) else np.inf

    def conjugate(self):
        if self.dim is None:
            return ScalarLift(PlusIndicatorInterval(ZeroFun(), 0.0, 0.0))
        return Indicator(Singleton(np.zeros(self.dim)))


def prox_vector(F: ProxFunction, gamma, x):
    """``argmin_y F(y) + ||x - y||^2 / (2 gamma)``."""
    if not isinstance(F, ProxFunction):
        raise CatalogError(f"unsupported function {F!r}")
    return F.prox(x, gamma)


def prox_conjugate(F: ProxFunction, gamma, x):
    """``prox_{gamma F*}(x)``; native for indicators and support functions."""
    if not isinstance(F, ProxFunction):
        raise CatalogError(f"unsupported function {F!r}")
    return F.prox_conj(x, gamma)


def moreau_envelope_value(F: ProxFunction, x):
    """``min_y F(y) + ||x - y||^2 / 2``."""
    x = np.asarray(x, dtype=float)
    p = F.prox(x, 1.0)
    return F.value(p) + 0.5 * float(np.sum((x - p) ** 2))


def conj_envelope_value(F: ProxFunction, x):
    """Moreau envelope of ``F*`` computed from conjugate values and the conjugate prox."""
    x = np.asarray(x, dtype=float)
    q = F.prox_conj(x, 1.0)
    return float(F.conj_value(q)) + 0.5 * float(np.sum((x - q) ** 2))
