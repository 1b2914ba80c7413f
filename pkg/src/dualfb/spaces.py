"""Finite-dimensional spaces, linear operators and the discrete gradient.

Vectors are plain ``float64`` numpy arrays. A vector may carry any shape
(images are ``(N, N)``, gradient fields ``(2, N, N)``); inner products and
norms always run over every entry.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod
from typing import Callable

import numpy as np

from .errors import InputError, StructuralError

__all__ = [
    "LinOp",
    "AdjointReport",
    "as_vector",
    "inner",
    "norm",
    "identity",
    "from_matrix",
    "discrete_gradient",
    "discrete_divergence",
    "gradient_operator",
    "estimate_opnorm",
    "adjoint_consistency_check",
]


def as_vector(x, shape=None, name="x"):
    """Return ``x`` as a finite float array, optionally checking its shape."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if shape is not None and arr.shape != tuple(shape):
        raise StructuralError(f"{name} has shape {arr.shape}, expected {tuple(shape)}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite entries")
    return arr


def inner(x, y):
    return float(np.vdot(np.ravel(x), np.ravel(y)))


def norm(x):
    return float(np.linalg.norm(np.ravel(x)))


@dataclass(frozen=True)
class LinOp:
    """Bounded linear map between two coordinate spaces.

    Parameters
    ----------
    shape_in, shape_out : tuple of int
        Array shapes of the domain and codomain.
    forward, adjoint : callable
        ``forward`` maps ``shape_in`` arrays to ``shape_out`` arrays and
        ``adjoint`` goes the other way.
    norm_bound : float, optional
        Upper bound on the operator norm. ``None`` means unknown; solvers
        then fall back to :func:`estimate_opnorm`.
    """

    shape_in: tuple
    shape_out: tuple
    forward: Callable
    adjoint: Callable
    norm_bound: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "shape_in", tuple(int(s) for s in self.shape_in))
        object.__setattr__(self, "shape_out", tuple(int(s) for s in self.shape_out))
        if self.dim_in < 1 or self.dim_out < 1:
            raise StructuralError("operator dimensions must be positive")
        if self.norm_bound is not None and not self.norm_bound >= 0:
            raise StructuralError("norm_bound must be nonnegative")

    @property
    def dim_in(self):
        return prod(self.shape_in)

    @property
    def dim_out(self):
        return prod(self.shape_out)

    def __call__(self, x):
        return self.apply(x)

    def apply(self, x):
        return np.asarray(self.forward(x), dtype=float)

    def apply_adjoint(self, y):
        return np.asarray(self.adjoint(y), dtype=float)

    def with_norm_bound(self, bound):
        return LinOp(self.shape_in, self.shape_out, self.forward, self.adjoint, float(bound))

    def scaled(self, c):
        c = float(c)
        bound = None if self.norm_bound is None else abs(c) * self.norm_bound
        return LinOp(
            self.shape_in,
            self.shape_out,
            lambda x: c * self.forward(x),
            lambda y: c * self.adjoint(y),
            bound,
        )

    def matrix(self):
        """Dense matrix of the flattened map (columns are images of basis vectors)."""
        cols = []
        for i in range(self.dim_in):
            e = np.zeros(self.dim_in)
            e[i] = 1.0
            cols.append(np.ravel(self.apply(e.reshape(self.shape_in))))
        return np.column_stack(cols)


def identity(n):
    shape = (n,) if np.isscalar(n) else tuple(n)
    return LinOp(shape, shape, lambda x: np.array(x, dtype=float), lambda y: np.array(y, dtype=float), 1.0)


def from_matrix(A, norm_bound=None):
    """Wrap a dense matrix. The default bound is the exact spectral norm."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if norm_bound is None:
        norm_bound = float(np.linalg.norm(A, 2))
    return LinOp((A.shape[1],), (A.shape[0],), lambda x: A @ x, lambda y: A.T @ y, norm_bound)


def _check_image(x):
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise StructuralError(f"expected a square image, got shape {x.shape}")
    return x


def discrete_gradient(x):
    """Forward differences with zero last row/column.

    Returns an array of shape ``(2, N, N)``: component 0 differences along
    rows (``k``), component 1 along columns (``l``).
    """
    x = _check_image(x)
    n = x.shape[0]
    y = np.zeros((2, n, n))
    y[0, :-1, :] = x[1:, :] - x[:-1, :]
    y[1, :, :-1] = x[:, 1:] - x[:, :-1]
    return y


def discrete_divergence(y):
    """Negative adjoint of :func:`discrete_gradient`."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 3 or y.shape[0] != 2 or y.shape[1] != y.shape[2]:
        raise StructuralError(f"expected a (2, N, N) field, got shape {y.shape}")
    e1, e2 = y
    n = e1.shape[0]
    out = np.zeros((n, n))
    if n == 1:
        return out
    out[0, :] += e1[0, :]
    out[1:-1, :] += e1[1:-1, :] - e1[:-2, :]
    out[-1, :] -= e1[-2, :]
    out[:, 0] += e2[:, 0]
    out[:, 1:-1] += e2[:, 1:-1] - e2[:, :-2]
    out[:, -1] -= e2[:, -2]
    return out


def gradient_operator(n, mu=1.0):
    """``mu * grad`` on ``n x n`` images, adjoint ``-mu * div``, bound ``2 sqrt(2) mu``."""
    if n < 2:
        raise StructuralError("gradient needs images of side at least 2")
    mu = float(mu)
    return LinOp(
        (n, n),
        (2, n, n),
        lambda x: mu * discrete_gradient(x),
        lambda y: -mu * discrete_divergence(y),
        2.0 * np.sqrt(2.0) * abs(mu),
    )


def estimate_opnorm(T, iterations=100, seed=0, safety=1.05):
    """Power-iteration estimate of ``||T||`` times a safety factor.

    The Rayleigh quotient of ``T* T`` never exceeds ``||T||^2``, so with
    ``safety=1`` the result is a lower estimate; the default factor turns it
    into a practical upper bound. A zero operator yields ``0.0``.
    """
    if iterations < 1:
        raise InputError("iterations must be >= 1")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(T.shape_in)
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(iterations):
        y = T.apply_adjoint(T.apply(x))
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0
        est = float(np.sqrt(max(np.vdot(x, y), 0.0)))
        x = y / ny
    return est * safety


@dataclass(frozen=True)
class AdjointReport:
    max_defect: float
    trials: int
    basis_checked: bool

    def ok(self, tol=1e-10):
        return self.max_defect <= tol


def adjoint_consistency_check(T, trials=20, seed=0, basis_limit=256):
    """Largest ``|<Tx, y> - <x, T*y>| / (1 + ||x|| ||y||)`` over probes.

    Probes are ``trials`` seeded Gaussian pairs and, for operators with
    ``dim_in + dim_out <= basis_limit``, every pair of basis vectors.
    """
    if trials < 1:
        raise InputError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        x = rng.standard_normal(T.shape_in)
        y = rng.standard_normal(T.shape_out)
        Tx = T.apply(x)
        Tty = T.apply_adjoint(y)
        if Tx.shape != T.shape_out or Tty.shape != T.shape_in:
            raise StructuralError(
                f"forward gives {Tx.shape} (want {T.shape_out}), "
                f"adjoint gives {Tty.shape} (want {T.shape_in})"
            )
        d = abs(inner(Tx, y) - inner(x, Tty)) / (1.0 + norm(x) * norm(y))
        worst = max(worst, d)
    basis = T.dim_in + T.dim_out <= basis_limit
    if basis:
        fwd = T.matrix()
        adj = np.column_stack(
            [np.ravel(T.apply_adjoint(np.eye(T.dim_out)[j].reshape(T.shape_out))) for j in range(T.dim_out)]
        )
        # basis pair (e_i, f_j): |fwd[j, i] - adj[i, j]| / 2
        worst = max(worst, float(np.max(np.abs(fwd - adj.T))) / 2.0)
    return AdjointReport(worst, trials, basis)
