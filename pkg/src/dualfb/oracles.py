"""Independent reference computations for small instances.

These routines evaluate definitions directly (grid search over the
objective, textbook recursions, normal equations) and share no code path
with the solvers they are used to check.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InputError, RangeTooSmallError, RankError
from .prox.functions import Indicator, ProxFunction
from .prox.scalar import ScalarFun

__all__ = [
    "GridSpec",
    "grid_argmin_scalar",
    "primal_grid_oracle",
    "dykstra_reference",
    "min_norm_closed_form",
    "chambolle_reference",
    "MAX_GRID_POINTS",
]

MAX_GRID_POINTS = 10**7


@dataclass(frozen=True)
class GridSpec:
    """Search box, grid step and number of refinement rounds.

    Each refinement round shrinks the bracket around the current winner by a
    factor 8, so after ``rounds`` rounds the returned point is within
    ``step / 8**rounds`` of the grid minimizer's cell (in particular within
    ``step / 2**rounds``).
    """

    lower: Sequence[float]
    upper: Sequence[float]
    step: float = 1e-3
    rounds: int = 3
    max_points: int = MAX_GRID_POINTS

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise InputError("lower and upper must be matching 1-d sequences")
        if np.any(~np.isfinite(lo)) or np.any(~np.isfinite(hi)) or np.any(hi <= lo):
            raise InputError("grid bounds must be finite with lower < upper")
        if lo.size > 3:
            raise InputError("grid oracles support at most 3 dimensions")
        if not self.step > 0:
            raise InputError("step must be positive")
        if self.rounds < 0:
            raise InputError("rounds must be >= 0")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self):
        return self.lower.size


def _ternary(fun, a, b, iters):
    """Ternary search on a convex function; infinite values shrink toward the middle."""
    for _ in range(iters):
        m1 = a + (b - a) / 3.0
        m2 = b - (b - a) / 3.0
        f1, f2 = fun(m1), fun(m2)
        if np.isinf(f1) and np.isinf(f2):
            a, b = m1, m2
        elif f1 <= f2:
            b = m2
        else:
            a = m1
    return 0.5 * (a + b)


# (2/3)^6 < 1/8: six ternary iterations shrink a bracket at least eightfold
_TERNARY_PER_ROUND = 6


def grid_argmin_scalar(phi: ScalarFun, gamma, xi, gs: GridSpec):
    """Minimize ``phi(y) + (xi - y)^2 / (2 gamma)`` by grid scan and ternary refinement."""
    if gs.dim != 1:
        raise InputError("grid_argmin_scalar needs a 1-d GridSpec")
    lo, hi = float(gs.lower[0]), float(gs.upper[0])
    npts = int(np.floor((hi - lo) / gs.step)) + 1
    if npts > gs.max_points:
        raise InputError(f"grid has {npts} points, limit {gs.max_points}")
    y = lo + gs.step * np.arange(npts)
    with np.errstate(over="ignore", invalid="ignore"):
        vals = np.asarray(phi.value(y), dtype=float) + (xi - y) ** 2 / (2.0 * gamma)
    vals = np.where(np.isnan(vals), np.inf, vals)
    if not np.any(np.isfinite(vals)):
        raise RangeTooSmallError("objective is infinite on the whole grid")
    i = int(np.argmin(vals))
    if i == 0 or i == npts - 1:
        raise RangeTooSmallError(f"argmin {y[i]} lies on the grid boundary [{lo}, {hi}]")

    def obj(t):
        with np.errstate(over="ignore", invalid="ignore"):
            v = float(phi.value(t)) + (xi - t) ** 2 / (2.0 * gamma)
        return np.inf if np.isnan(v) else v

    a, b = y[i - 1], y[i + 1]
    if gs.rounds == 0:
        return float(y[i])
    return float(_ternary(obj, a, b, _TERNARY_PER_ROUND * gs.rounds))


def _batch_values(F: ProxFunction, X, slack):
    # indicator constraints are relaxed to a band of width ``slack`` so that
    # thin sets (hyperplanes, points) meet the grid
    if isinstance(F, Indicator):
        return np.where(F.C._dist(X) <= slack, 0.0, np.inf)
    return np.asarray(F.values(X), dtype=float)


def _feasibility_map(P, M, r, sweeps=200):
    """Map grid points into the constraint sets carried by indicator terms.

    ``f = i_C`` is handled by projecting onto ``C``. ``g = i_D`` is handled,
    when ``L`` has full row rank, by the least-norm correction
    ``x + L^+ (P_D(Lx - r) - (Lx - r))``, which lands exactly in
    ``{x : Lx - r in D}``. With both, the two maps alternate. Without
    this, a feasibility band of one grid step lets the discrete argmin
    drift along an active boundary by much more than a step.
    """
    C = P.f.C if isinstance(P.f, Indicator) else None
    D = P.g.C if isinstance(P.g, Indicator) else None
    pinv = None
    if D is not None and np.linalg.matrix_rank(M) == M.shape[0]:
        pinv = np.linalg.pinv(M)
    if C is None and pinv is None:
        return None

    def sweep(Y):
        if C is not None:
            Y = C._proj(Y)
        if pinv is not None:
            T = Y @ M.T - r
            Y = Y + (D._proj(T) - T) @ pinv.T
        return Y

    def fmap(X):
        Y = sweep(X)
        if C is None or pinv is None:
            return Y
        for _ in range(sweeps):
            Y_next = sweep(Y)
            if np.max(np.abs(Y_next - Y)) <= 1e-14 * (1.0 + np.max(np.abs(Y))):
                return Y_next
            Y = Y_next
        return Y

    return fmap


def primal_grid_oracle(P, gs: GridSpec, coarse_points=250_000, window=4):
    """Grid argmin of ``f(x) + g(Lx - r) + ||x - z||^2 / 2`` for ``dim(H) <= 3``.

    A coarse scan of the whole box is followed by zoom levels around the
    winner, each with step divided by 8, until ``gs.step`` is reached;
    ``gs.rounds`` further levels refine below the grid step. Grid points are
    first mapped into the indicator constraints where a closed-form map
    exists (see :func:`_feasibility_map`); the remaining indicator
    constraints are relaxed to a band of one grid step.
    """
    n = P.L.dim_in
    if n > 3:
        raise InputError("primal_grid_oracle supports dim(H) <= 3")
    if gs.dim != n:
        raise InputError(f"GridSpec has dimension {gs.dim}, problem has {n}")
    M = P.L.matrix()
    r = P.r.ravel()
    z = P.z.ravel()
    nL = max(1.0, float(np.linalg.norm(M, 2)))

    fmap = _feasibility_map(P, M, r)

    def evaluate(axes, step):
        mesh = np.meshgrid(*axes, indexing="ij")
        X = np.stack([m.ravel() for m in mesh], axis=1)
        if fmap is not None:
            X = fmap(X)
        slack = step * np.sqrt(n) * nL
        with np.errstate(over="ignore", invalid="ignore"):
            val = _batch_values(P.f, X, slack) + _batch_values(P.g, X @ M.T - r, slack)
            val = val + 0.5 * np.sum((X - z) ** 2, axis=1)
        val = np.where(np.isnan(val), np.inf, val)
        if not np.any(np.isfinite(val)):
            raise RangeTooSmallError("objective is infinite on the whole grid")
        return X[int(np.argmin(val))].copy()

    width = gs.upper - gs.lower
    per_axis = max(3, int(round(coarse_points ** (1.0 / n))))
    step = max(gs.step, float(np.max(width)) / (per_axis - 1))
    axes = [np.arange(gs.lower[d], gs.upper[d] + 0.5 * step, step) for d in range(n)]
    if np.prod([len(a) for a in axes]) > gs.max_points:
        raise InputError("grid exceeds the point budget")
    x = evaluate(axes, step)
    if np.any(x <= gs.lower + 0.5 * step) or np.any(x >= gs.upper - 0.5 * step):
        raise RangeTooSmallError(f"argmin {x} lies on the grid boundary")
    final = gs.step / 8.0**gs.rounds
    while step > final * (1 + 1e-9):
        new = max(final, step / 8.0)
        axes = [
            np.arange(max(gs.lower[d], x[d] - window * step), min(gs.upper[d], x[d] + window * step) + 0.5 * new, new)
            for d in range(n)
        ]
        x = evaluate(axes, new)
        step = new
    return x.reshape(P.L.shape_in)


def dykstra_reference(f: ProxFunction, g: ProxFunction, z, iters):
    """Dykstra-like recursion for ``prox_{f+g}(z)``.

    ::

        y_0 = z, q_0 = p_0 = 0
        x_n     = prox_f(y_n + q_n)
        q_{n+1} = y_n + q_n - x_n
        y_{n+1} = prox_g(x_n + p_n)
        p_{n+1} = x_n + p_n - y_{n+1}

    Returns the lists ``xs`` and ``ps`` (``ps[n]`` is ``p_{n+1}``).
    """
    z = np.asarray(z, dtype=float)
    y, q, p = z.copy(), np.zeros_like(z), np.zeros_like(z)
    xs, ps = [], []
    for _ in range(int(iters)):
        x = f.prox(y + q, 1.0)
        q = y + q - x
        y = g.prox(x + p, 1.0)
        p = x + p - y
        xs.append(x)
        ps.append(p.copy())
    return xs, ps


def min_norm_closed_form(s, rho, cond_limit=1e12):
    """Minimum-norm solution ``L* (L L*)^-1 rho`` where ``L`` has rows ``s_i``."""
    S = np.atleast_2d(np.asarray(s, dtype=float))
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    if rho.size != S.shape[0]:
        raise InputError("one measurement per vector is required")
    G = S @ S.T
    if np.linalg.matrix_rank(S) < S.shape[0] or np.linalg.cond(G) > cond_limit:
        raise RankError("measurement vectors are linearly dependent")
    return S.T @ np.linalg.solve(G, rho)


def _grad_ref(x):
    gx = np.concatenate([np.diff(x, axis=0), np.zeros((1, x.shape[1]))], axis=0)
    gy = np.concatenate([np.diff(x, axis=1), np.zeros((x.shape[0], 1))], axis=1)
    return gx, gy


def _div_ref(px, py):
    # backward differences with the boundary rows of the negative adjoint
    dx = np.vstack([px[:1], px[1:-1] - px[:-2], -px[-2:-1]])
    dy = np.hstack([py[:, :1], py[:, 1:-1] - py[:, :-2], -py[:, -2:-1]])
    return dx + dy


def chambolle_reference(z, mu, tau, iters, p=2, v0=None):
    """Fixed-point dual projection loop for TV denoising with no extra term.

    ::

        x_n = z + mu div v_n
        zeta = v_n + tau grad x_n
        v_{n+1} = zeta / max(1, |zeta|)      (pixelwise)

    ``p = 2`` normalizes each pair by its Euclidean norm, ``p = 1`` each
    component by its absolute value. Returns the list of ``(v1, v2)``
    pairs ``v_1, ..., v_iters``.
    """
    z = np.asarray(z, dtype=float)
    if v0 is None:
        v1, v2 = np.zeros_like(z), np.zeros_like(z)
    else:
        v1, v2 = np.array(v0[0], dtype=float), np.array(v0[1], dtype=float)
    out = []
    for _ in range(int(iters)):
        x = z + mu * _div_ref(v1, v2)
        gx, gy = _grad_ref(x)
        z1, z2 = v1 + tau * gx, v2 + tau * gy
        if p == 2:
            den = np.maximum(1.0, np.sqrt(z1 * z1 + z2 * z2))
            v1, v2 = z1 / den, z2 / den
        elif p == 1:
            v1, v2 = z1 / np.maximum(1.0, np.abs(z1)), z2 / np.maximum(1.0, np.abs(z2))
        else:
            raise InputError("reference loop covers p = 1 and p = 2")
        out.append((v1.copy(), v2.copy()))
    return out
