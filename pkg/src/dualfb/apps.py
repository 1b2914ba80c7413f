"""Packaged recovery problems with their specialized iterations.

Each model converts to a :class:`~dualfb.solver.ProblemInstance` through
``to_problem()``; the functions below run the dedicated loops, which
perform the same arithmetic as :func:`~dualfb.solver.solve_dual_fb` on
that instance but spell out the proximity steps for the application.

Error sequences in the configuration keep their generic meaning:
``b_seq`` perturbs the primal step and ``a_seq`` the dual update.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import CatalogError, ConfigError, InputError, StructuralError
from .prox.functions import Indicator, PhiOfDist, ProxFunction, ScalarLift, Support, Zero, _apply_coordinatewise
from .prox.scalar import Power, ScalarFun
from .prox.sets import ConvexSet, L1Ball, PairBall, Singleton, WholeSpace
from .solver import (
    DualFBConfig,
    ProblemInstance,
    SolveResult,
    make_objective_fn,
    resolve_schedules,
    run_iterations,
    solve_dual_fb,
    _check_summable,
)
from .spaces import (
    LinOp,
    as_vector,
    discrete_divergence,
    discrete_gradient,
    estimate_opnorm,
    from_matrix,
    gradient_operator,
)

__all__ = [
    "BestApproxModel",
    "PotterArunModel",
    "SoftApproxModel",
    "DictModel",
    "TVModel",
    "best_feasible_approx",
    "potter_arun",
    "soft_best_approx",
    "soft_min_norm_fit",
    "linf_relaxed_recovery",
    "dict_denoise",
    "tv_denoise",
    "project_Dp",
    "tv_value",
    "tv_objective",
]


def _measurement_operator(s, tol=1e-12):
    """Rows ``s_i`` as an operator, bounded by the Frobenius norm (must be <= 1)."""
    S = np.atleast_2d(np.asarray(s, dtype=float))
    fro = float(np.linalg.norm(S))
    if fro**2 > 1.0 + tol:
        raise InputError(f"sum of squared measurement norms is {fro**2:.6g} > 1")
    if fro == 0.0:
        raise InputError("measurement vectors are all zero")
    return from_matrix(S, norm_bound=fro)


def _drive(P, cfg, update, finalize, v0=None):
    v_init = np.zeros(P.L.shape_out) if cfg.v0 is None and v0 is None else as_vector(
        cfg.v0 if v0 is None else v0, P.L.shape_out, "v0"
    )
    return run_iterations(
        update,
        v_init,
        finalize,
        max_iter=cfg.max_iter,
        tol_iterate=cfg.tol_iterate,
        tol_gap=cfg.tol_gap,
        objective_fn=make_objective_fn(P, cfg.track_objectives),
        keep_history=cfg.keep_history,
        stagnation_window=cfg.stagnation_window,
    )


# best feasible approximation ----------------------------------------------


@dataclass
class BestApproxModel:
    """Project ``z`` onto ``{x in C : L x - r in D}``.

    Building the model asserts that ``r`` lies in the strong relative
    interior of ``L(C) - D``.
    """

    C: ConvexSet
    D: ConvexSet
    L: LinOp
    r: np.ndarray
    z: np.ndarray

    def to_problem(self):
        return ProblemInstance(Indicator(self.C), Indicator(self.D), self.L, self.z, self.r, True)


def best_feasible_approx(m: BestApproxModel, cfg: Optional[DualFBConfig] = None) -> SolveResult:
    """Alternating projections onto ``C`` and ``D`` through the dual.

    ::

        x_n     = P_C(z - L* v_n) + b_n
        v_{n+1} = v_n + lam_n gamma_n (L x_n - r - P_D(v_n / gamma_n + L x_n - r) + c_n)

    with ``c_n = a_n / gamma_n``.
    """
    cfg = cfg or DualFBConfig()
    P = m.to_problem()
    _, gamma_fn, lam_fn = resolve_schedules(cfg, P.beta)
    C, D, L, z, r = m.C, m.D, P.L, P.z, P.r

    def update(n, v):
        u = z - L.apply_adjoint(v)
        p = C.project(u)
        x = p if cfg.b_seq is None else p + cfg.b_seq(n)
        Lx = L.apply(x)
        gam, lam = gamma_fn(n), lam_fn(n)
        t = Lx - r
        step = t - D.project(v / gam + t)
        if cfg.a_seq is not None:
            step = step + cfg.a_seq(n) / gam
        return x, v + lam * gam * step, {"u": u, "p": p, "Lx": Lx}

    return _drive(P, cfg, update, lambda v: C.project(z - L.apply_adjoint(v)))


# Potter-Arun -----------------------------------------------------------------


@dataclass
class PotterArunModel:
    """Minimum-norm point of ``C`` matching measurements ``<x, s_i> = rho_i``.

    The measurement vectors must satisfy ``sum ||s_i||^2 <= 1``.
    """

    C: ConvexSet
    s: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        self.s = np.atleast_2d(np.asarray(self.s, dtype=float))
        self.rho = np.atleast_1d(np.asarray(self.rho, dtype=float))
        if self.rho.size != self.s.shape[0]:
            raise StructuralError("one measurement value per vector is required")
        if self.C.dim != self.s.shape[1]:
            raise StructuralError("C and the measurement vectors live in different spaces")
        self.L = _measurement_operator(self.s)

    def to_problem(self):
        return ProblemInstance(
            Indicator(self.C), Indicator(Singleton(np.zeros(self.rho.size))), self.L, np.zeros(self.C.dim), self.rho, True
        )


def potter_arun(m: PotterArunModel, cfg: Optional[DualFBConfig] = None) -> SolveResult:
    """Measurement-fitting iteration; ``result.v`` holds ``w = -v``.

    ::

        x_n     = P_C(L* w_n) + b_n
        w_{n+1} = w_n + gamma_n (r - L x_n)

    Relaxation is fixed to 1. ``result.extras["v"]`` holds the dual point
    of the generic formulation.
    """
    cfg = cfg or DualFBConfig()
    if callable(cfg.lam) or cfg.lam != 1.0:
        raise ConfigError("the measurement-fitting iteration uses lambda_n = 1")
    P = m.to_problem()
    _, gamma_fn, _ = resolve_schedules(cfg, P.beta)
    C, L, r = m.C, P.L, P.r
    obj = make_objective_fn(P, cfg.track_objectives)

    def update(n, w):
        Lw = L.apply_adjoint(w)
        p = C.project(Lw)
        x = p if cfg.b_seq is None else p + cfg.b_seq(n)
        Lx = L.apply(x)
        w_next = w + gamma_fn(n) * (r - Lx)
        if cfg.a_seq is not None:
            w_next = w_next - cfg.a_seq(n)
        return x, w_next, {"u": Lw, "p": p, "Lx": Lx}

    def objective(x, w, aux):
        return obj(x, -w, aux)

    if obj is not None:
        objective.half_z = obj.half_z
    w0 = np.zeros(m.rho.size) if cfg.v0 is None else -as_vector(cfg.v0, (m.rho.size,), "v0")
    res = run_iterations(
        update,
        w0,
        lambda w: C.project(L.apply_adjoint(w)),
        max_iter=cfg.max_iter,
        tol_iterate=cfg.tol_iterate,
        tol_gap=cfg.tol_gap,
        objective_fn=objective if obj is not None else None,
        keep_history=cfg.keep_history,
        stagnation_window=cfg.stagnation_window,
    )
    res.extras["v"] = -res.v
    res.extras["residual"] = float(np.linalg.norm(L.apply(C.project(L.apply_adjoint(res.v))) - r))
    return res


# soft best approximation ----------------------------------------------------


def _check_soft_penalty(phi, name):
    if not isinstance(phi, ScalarFun):
        raise CatalogError(f"{name} must be a ScalarFun")
    if not phi.is_even:
        raise CatalogError(f"{name} must be even")
    if phi.is_indicator_of_zero:
        raise CatalogError(f"{name} must differ from the indicator of {{0}}")
    phi.subdiff_at_zero()


@dataclass
class SoftApproxModel:
    """``phi(d_C(x)) + psi(d_D(L x - r)) + ||x - z||^2 / 2`` with even penalties."""

    C: ConvexSet
    D: ConvexSet
    L: LinOp
    r: np.ndarray
    z: np.ndarray
    phi: ScalarFun
    psi: ScalarFun

    def __post_init__(self):
        _check_soft_penalty(self.phi, "phi")
        _check_soft_penalty(self.psi, "psi")

    def to_problem(self):
        return ProblemInstance(PhiOfDist(self.phi, self.C), PhiOfDist(self.psi, self.D), self.L, self.z, self.r, True)


def soft_best_approx(m: SoftApproxModel, cfg: Optional[DualFBConfig] = None) -> SolveResult:
    """Penalized best approximation with distance-based branch tests.

    ::

        y_n = z - L* v_n
        x_n = y_n + (prox_{phi*} d_C(y_n) / d_C(y_n)) (P_C y_n - y_n)   if d_C(y_n) > max d phi(0)
            = P_C y_n                                                 otherwise
        w_n = v_n / gamma_n + L x_n - r
        p_n = (prox_{(psi/gamma_n)*} d_D(w_n) / d_D(w_n)) (w_n - P_D w_n) if d_D(w_n) > max d psi(0) / gamma_n
            = w_n - P_D w_n                                           otherwise
        v_{n+1} = v_n + lam_n (gamma_n p_n - v_n)

    plus the error terms ``b_n`` and ``c_n = a_n / gamma_n``.
    """
    cfg = cfg or DualFBConfig()
    P = m.to_problem()
    _, gamma_fn, lam_fn = resolve_schedules(cfg, P.beta)
    C, D, L, z, r, phi, psi = m.C, m.D, P.L, P.z, P.r, m.phi, m.psi
    phi_thr = phi.max_subgrad_at_zero
    psi_thr = psi.max_subgrad_at_zero

    def primal_step(y):
        pc = C.project(y)
        d = float(np.linalg.norm(pc - y))
        if d > phi_thr:
            return y + (phi.prox_conj(d) / d) * (pc - y)
        return pc if d > 0.0 else y.copy()

    def update(n, v):
        y = z - L.apply_adjoint(v)
        p_clean = primal_step(y)
        x = p_clean if cfg.b_seq is None else p_clean + cfg.b_seq(n)
        Lx = L.apply(x)
        gam, lam = gamma_fn(n), lam_fn(n)
        w = v / gam + Lx - r
        pd = D.project(w)
        d = float(np.linalg.norm(w - pd))
        if d > psi_thr / gam:
            p = (psi.scaled(1.0 / gam).prox_conj(d) / d) * (w - pd)
        else:
            p = w - pd
        if cfg.a_seq is not None:
            p = p + cfg.a_seq(n) / gam
        return x, v + lam * (gam * p - v), {"u": y, "p": p_clean, "Lx": Lx}

    return _drive(P, cfg, update, lambda v: primal_step(z - L.apply_adjoint(v)))


def soft_min_norm_fit(C: ConvexSet, s, rho, alpha, beta, max_iter=1000, tol=1e-10, v0=None, keep_history=False):
    """Soft measurement fit with ``alpha d_C^{4/3}`` and ``beta ||L x - rho||``.

    Minimizes ``alpha d_C(x)^{4/3} + beta ||L x - rho|| + ||x||^2 / 2`` with
    unit steps and no relaxation::

        y_n = -L* v_n
        x_n = y_n + ((|sqrt(d^2 + sigma) + d|^{1/3} - |sqrt(d^2 + sigma) - d|^{1/3}) / (tau d)) (P_C y_n - y_n)
              (d = d_C(y_n) > 0; otherwise x_n = y_n)
        w_n = v_n + L x_n - rho
        v_{n+1} = beta w_n / ||w_n|| if ||w_n|| > beta else w_n

    where ``tau = 3 / (2 alpha 4^{1/3})`` and ``sigma = 256 alpha^3 / 729``.
    """
    L = _measurement_operator(s)
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    alpha, beta = float(alpha), float(beta)
    if not (alpha > 0 and beta > 0):
        raise InputError("alpha and beta must be positive")
    tau = 3.0 / (2.0 * alpha * 4.0 ** (1.0 / 3.0))
    sigma = 256.0 * alpha**3 / 729.0

    def primal_step(y):
        pc = C.project(y)
        d = float(np.linalg.norm(pc - y))
        if d == 0.0:
            return y.copy()
        rt = np.sqrt(d * d + sigma)
        k = (abs(rt + d) ** (1.0 / 3.0) - abs(rt - d) ** (1.0 / 3.0)) / (tau * d)
        return y + k * (pc - y)

    def update(n, v):
        x = primal_step(-L.apply_adjoint(v))
        w = v + L.apply(x) - rho
        nw = float(np.linalg.norm(w))
        return x, (beta / nw) * w if nw > beta else w, {}

    v_init = np.zeros(rho.size) if v0 is None else as_vector(v0, (rho.size,), "v0")
    return run_iterations(
        update, v_init, lambda v: primal_step(-L.apply_adjoint(v)), max_iter=max_iter, tol_iterate=tol,
        keep_history=keep_history,
    )


def soft_min_norm_fit_model(C: ConvexSet, s, rho, alpha, beta):
    """The generic model solved by :func:`soft_min_norm_fit`."""
    S = np.atleast_2d(np.asarray(s, dtype=float))
    return SoftApproxModel(
        C, Singleton(np.zeros(S.shape[0])), _measurement_operator(S), rho, np.zeros(S.shape[1]),
        Power(4.0 / 3.0, alpha), Power(1.0, beta),
    )


def linf_relaxed_recovery(C: ConvexSet, phi: ScalarFun, s, rho, alpha, cfg: Optional[DualFBConfig] = None):
    """``phi(d_C(x)) + alpha max_i |<x, s_i> - rho_i| + ||x||^2 / 2``.

    The max term is the support function of the ``l1`` ball of radius
    ``alpha``, so its conjugate prox is the exact ``l1``-ball projection.
    """
    _check_soft_penalty(phi, "phi")
    alpha = float(alpha)
    if not alpha > 0:
        raise InputError("alpha must be positive")
    L = _measurement_operator(s)
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    P = ProblemInstance(PhiOfDist(phi, C), Support(L1Ball(alpha, rho.size)), L, np.zeros(L.dim_in), rho, True)
    return solve_dual_fb(P, cfg)


# dictionaries -----------------------------------------------------------------


@dataclass
class DictModel:
    """``f(x) + sum_k phi_k(<x, e_k>) + ||x - z||^2 / 2`` over unit-norm atoms ``e_k`` (rows of ``e``).

    ``delta`` bounds the frame operator: ``sum_k <x, e_k>^2 <= delta ||x||^2``.
    Each ``phi_k`` must satisfy ``phi_k >= phi_k(0) = 0``.
    """

    e: np.ndarray
    delta: float
    phis: Union[ScalarFun, Sequence[ScalarFun]]
    z: np.ndarray
    f: ProxFunction = field(default_factory=Zero)

    def __post_init__(self):
        E = np.atleast_2d(np.asarray(self.e, dtype=float))
        norms = np.linalg.norm(E, axis=1)
        if np.max(np.abs(norms - 1.0)) > 1e-10:
            raise InputError("dictionary atoms must have unit norm")
        self.e = E
        self.delta = float(self.delta)
        self.z = as_vector(self.z, (E.shape[1],), "z")
        A = from_matrix(E, norm_bound=np.sqrt(self.delta) if self.delta > 0 else None)
        top = estimate_opnorm(A, iterations=500, safety=1.0) ** 2
        if not self.delta >= top * (1.0 - 1e-9):
            raise InputError(f"delta = {self.delta} is below the frame operator norm {top:.6g}")
        self.L = A
        plist = [self.phis] * E.shape[0] if isinstance(self.phis, ScalarFun) else list(self.phis)
        if len(plist) != E.shape[0]:
            raise StructuralError("one penalty per atom is required")
        for k, ph in enumerate(plist):
            if not isinstance(ph, ScalarFun):
                raise CatalogError(f"phi_{k} must be a ScalarFun")
            lo, hi = ph.subdiff_at_zero()
            if float(ph.value(0.0)) != 0.0 or not lo <= 0.0 <= hi:
                raise InputError(f"phi_{k} must satisfy phi >= phi(0) = 0")

    def to_problem(self):
        g = ScalarLift(self.phis, self.e.shape[0]) if isinstance(self.phis, ScalarFun) else ScalarLift(self.phis)
        return ProblemInstance(self.f, g, self.L, self.z, None, True)


def dict_denoise(m: DictModel, cfg: Optional[DualFBConfig] = None) -> SolveResult:
    """Coefficientwise dual iteration over a dictionary.

    ::

        x_n = prox_f(z - sum_k nu_{n,k} e_k) + b_n
        nu_{n+1,k} = nu_{n,k} + lam_n (prox_{gamma_n phi_k*}(nu_{n,k} + gamma_n <x_n, e_k>) + a_{n,k} - nu_{n,k})

    with steps in ``[eps, 2 / delta - eps]``.
    """
    cfg = cfg or DualFBConfig()
    P = m.to_problem()
    _, gamma_fn, lam_fn = resolve_schedules(cfg, 1.0 / m.delta)
    E, z, f = m.e, m.z, m.f
    phis = m.phis

    def update(n, nu):
        u = z - E.T @ nu
        p = f.prox(u, 1.0)
        x = p if cfg.b_seq is None else p + cfg.b_seq(n)
        c = E @ x
        gam, lam = gamma_fn(n), lam_fn(n)
        t = _apply_coordinatewise(phis, nu + gam * c, lambda ph, s: ph.prox_conj(s, gam))
        if cfg.a_seq is not None:
            t = t + cfg.a_seq(n)
        return x, nu + lam * (t - nu), {"u": u, "p": p, "Lx": c}

    return _drive(P, cfg, update, lambda nu: f.prox(z - E.T @ nu, 1.0))


# total variation --------------------------------------------------------------

_P_VALUES = {1: 1, 2: 2, np.inf: np.inf, "inf": np.inf, "1": 1, "2": 2}


def _norm_p(p):
    try:
        return _P_VALUES[p]
    except (KeyError, TypeError):
        raise CatalogError(f"p must be 1, 2 or inf, got {p!r}") from None


def project_Dp(p, y):
    """Pixelwise projection of a ``(2, N, N)`` field onto the dual-norm unit balls."""
    p = _norm_p(p)
    y = np.asarray(y, dtype=float)
    if y.ndim != 3 or y.shape[0] != 2 or y.shape[1] != y.shape[2]:
        raise StructuralError(f"expected a (2, N, N) field, got {y.shape}")
    return PairBall(p, y.shape[1]).project(y)


def tv_value(x, p):
    """``sum_{k,l} |grad x_{k,l}|_p``."""
    p = _norm_p(p)
    g = discrete_gradient(x)
    if p == 1:
        return float(np.sum(np.abs(g[0]) + np.abs(g[1])))
    if p == 2:
        return float(np.sum(np.hypot(g[0], g[1])))
    return float(np.sum(np.maximum(np.abs(g[0]), np.abs(g[1]))))


@dataclass
class TVModel:
    """``f(x) + mu tv_p(x) + ||x - z||^2 / 2`` on square images."""

    z: np.ndarray
    mu: float
    p: Union[int, float, str] = 2
    f: ProxFunction = field(default_factory=Zero)

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float)
        if self.z.ndim != 2 or self.z.shape[0] != self.z.shape[1]:
            raise StructuralError(f"TV needs a square image, got shape {self.z.shape}")
        if self.z.shape[0] < 2:
            raise StructuralError("TV needs images of side at least 2")
        as_vector(self.z, name="z")
        self.mu = float(self.mu)
        if not self.mu > 0:
            raise InputError("mu must be positive")
        self.p = _norm_p(self.p)

    @property
    def n(self):
        return self.z.shape[0]

    def to_problem(self):
        L = gradient_operator(self.n, self.mu)
        return ProblemInstance(self.f, Support(PairBall(self.p, self.n)), L, self.z, None, True)


def tv_objective(m: TVModel, x):
    x = np.asarray(x, dtype=float)
    return float(m.f.value(x) + m.mu * tv_value(x, m.p) + 0.5 * np.sum((x - m.z) ** 2))


def tv_denoise(m: TVModel, cfg: Optional[DualFBConfig] = None, tau=None) -> SolveResult:
    """Dual projection iteration for TV denoising.

    ::

        x_n     = prox_f(z + mu div v_n) + b_n
        zeta_n  = v_n + tau_n grad x_n
        v_{n+1} = v_n + lam_n (pi_p(zeta_n) + a_n - v_n)

    ``tau_n`` must lie in ``[eps, 1/(4 mu) - eps]`` with ``eps`` in
    ``]0, min{1, 1/(8 mu)}[``; the default is ``0.95 / (4 mu)``. The step
    ``gamma`` of ``cfg`` is ignored in favor of ``tau``.
    """
    cfg = cfg or DualFBConfig()
    P = m.to_problem()
    mu, z, f = m.mu, m.z, m.f
    cap = min(1.0, 1.0 / (8.0 * mu))
    eps = 0.05 * cap if cfg.epsilon is None else float(cfg.epsilon)
    if not 0.0 < eps < cap:
        raise ConfigError(f"epsilon must lie in ]0, {cap:.6g}[, got {eps}")
    tau_spec = 0.95 / (4.0 * mu) if tau is None else tau
    tau_fn = tau_spec if callable(tau_spec) else (lambda n, c=float(tau_spec): c)
    lam_fn = cfg.lam if callable(cfg.lam) else (lambda n, c=float(cfg.lam): c)
    hi = 1.0 / (4.0 * mu) - eps
    for n in range(cfg.max_iter):
        t, lam = tau_fn(n), lam_fn(n)
        if not eps <= t <= hi:
            raise ConfigError(f"tau_{n} = {t} outside [{eps:.6g}, {hi:.6g}]")
        if not eps <= lam <= 1.0:
            raise ConfigError(f"lambda_{n} = {lam} outside [{eps:.6g}, 1]")
        if not callable(tau_spec) and not callable(cfg.lam):
            break
    if cfg.check_summable:
        _check_summable(cfg.a_seq, cfg.max_iter, "a_seq")
        _check_summable(cfg.b_seq, cfg.max_iter, "b_seq")
    ball = PairBall(m.p, m.n)

    def update(n, v):
        u = z + mu * discrete_divergence(v)
        p = f.prox(u, 1.0)
        x = p if cfg.b_seq is None else p + cfg.b_seq(n)
        gx = discrete_gradient(x)
        zeta = v + tau_fn(n) * gx
        q = ball.project(zeta)
        if cfg.a_seq is not None:
            q = q + cfg.a_seq(n)
        return x, v + lam_fn(n) * (q - v), {"u": u, "p": p, "Lx": mu * gx}

    return _drive(P, cfg, update, lambda v: f.prox(z + mu * discrete_divergence(v), 1.0))
