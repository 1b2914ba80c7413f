"""Dual forward-backward splitting for strongly convex composite problems.

The primal problem is::

    minimize_x  f(x) + g(L x - r) + ||x - z||^2 / 2

Its dual, ``minimize_v  f~*(z - L* v) + g*(v) + <v, r>``, has a Lipschitz
gradient term, so forward-backward steps on ``v`` converge; the primal
solution is read off as ``prox_f(z - L* v)``. Here ``f~*`` is the Moreau
envelope of ``f*``.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import CapabilityError, ConfigError, DivergenceError, InvalidProblemError, StructuralError
from .prox.functions import ProxFunction
from .spaces import LinOp, as_vector, estimate_opnorm, inner

__all__ = [
    "ProblemInstance",
    "DualFBConfig",
    "TraceRow",
    "SolveResult",
    "solve_dual_fb",
    "solve_dual_fb_with_operator_errors",
    "solve_dykstra_mode",
    "recover_primal",
    "primal_objective",
    "dual_objective",
    "duality_gap",
    "run_iterations",
    "STAGNATION_WARNING",
]

log = logging.getLogger(__name__)

STAGNATION_WARNING = "suspected infeasible/unqualified"

Schedule = Union[float, Callable[[int], float]]


@dataclass(frozen=True)
class ProblemInstance:
    """Data ``(f, g, L, z, r)`` of the primal problem.

    ``qualification_asserted`` records that the caller vouches for the
    constraint qualification ``r in sri(L(dom f) - dom g)``; it cannot be
    checked numerically and solvers refuse instances without it.
    """

    f: ProxFunction
    g: ProxFunction
    L: LinOp
    z: np.ndarray
    r: Optional[np.ndarray] = None
    qualification_asserted: bool = False

    def __post_init__(self):
        L = self.L
        object.__setattr__(self, "z", as_vector(self.z, L.shape_in, "z"))
        r = np.zeros(L.shape_out) if self.r is None else as_vector(self.r, L.shape_out, "r")
        object.__setattr__(self, "r", r)
        if self.f.dim is not None and self.f.dim != L.dim_in:
            raise StructuralError(f"f acts on R^{self.f.dim} but L has {L.dim_in} inputs")
        if self.g.dim is not None and self.g.dim != L.dim_out:
            raise StructuralError(f"g acts on R^{self.g.dim} but L has {L.dim_out} outputs")
        if L.norm_bound is None:
            object.__setattr__(self, "L", L.with_norm_bound(estimate_opnorm(L)))
        if self.L.norm_bound == 0.0:
            raise InvalidProblemError("L must be nonzero")

    @property
    def norm_bound(self):
        return self.L.norm_bound

    @property
    def beta(self):
        """``||L||^-2`` computed from the norm bound."""
        return 1.0 / self.L.norm_bound**2


@dataclass
class DualFBConfig:
    """Step, relaxation, error and stopping parameters.

    Parameters
    ----------
    epsilon : float, optional
        Margin of the admissible boxes. Defaults to ``0.05 min(1, ||L||^-2)``.
    gamma : float or callable, optional
        Step ``gamma_n``, a constant or a map ``n -> gamma_n``. Defaults to
        ``1.9 ||L||^-2``. Must stay in ``[eps, 2 ||L||^-2 - eps]``.
    lam : float or callable
        Relaxation ``lambda_n`` in ``[eps, 1]``.
    a_seq, b_seq : callable, optional
        Error maps ``n -> array`` added to the dual and primal updates.
        Their norms must be summable.
    tol_iterate : float or None
        Stop when ``||v_{n+1} - v_n|| / max(1, ||v_n||)`` falls below it.
        ``None`` disables the test.
    tol_gap : float or None
        Stop when the duality gap falls below it (needs objective values).
    """

    epsilon: Optional[float] = None
    gamma: Optional[Schedule] = None
    lam: Schedule = 1.0
    a_seq: Optional[Callable[[int], np.ndarray]] = None
    b_seq: Optional[Callable[[int], np.ndarray]] = None
    max_iter: int = 1000
    tol_iterate: Optional[float] = 1e-8
    tol_gap: Optional[float] = None
    v0: Optional[np.ndarray] = None
    track_objectives: bool = True
    keep_history: bool = False
    check_summable: bool = True
    stagnation_window: int = 200


@dataclass(frozen=True)
class TraceRow:
    n: int
    iterate_change: float
    primal_obj: Optional[float]
    dual_obj: Optional[float]
    gap: Optional[float]
    wall_time_ms: float


@dataclass
class SolveResult:
    x: np.ndarray
    v: np.ndarray
    iterations: int
    trace: list
    termination_reason: str
    history_x: Optional[list] = None
    history_v: Optional[list] = None
    warning: Optional[str] = None
    extras: dict = field(default_factory=dict)

    @property
    def converged(self):
        return self.termination_reason in ("iterate_tol", "gap_tol")


def _schedule(s, name):
    if callable(s):
        return s
    c = float(s)
    return lambda n: c


def _check_summable(seq, horizon, name):
    if seq is None or horizon < 8:
        return
    norms = np.array([np.linalg.norm(np.ravel(seq(n))) for n in range(horizon)])
    if not np.all(np.isfinite(norms)):
        raise ConfigError(f"{name} has non-finite terms")
    half = horizon // 2
    head, tail = norms[:half].sum(), norms[half:].sum()
    # a summable sequence carries little mass in its second half; constant
    # or slowly decaying sequences carry at least as much as in the first
    if tail > 0.25 * head and tail > 1e-14:
        raise ConfigError(f"{name} does not look summable (tail mass {tail:.3g} vs head {head:.3g})")


def resolve_schedules(cfg: DualFBConfig, beta: float):
    """Validate ``cfg`` against the step box for ``||L||^-2 = beta``.

    Returns ``(eps, gamma_fn, lam_fn)``.
    """
    cap = min(1.0, beta)
    eps = 0.05 * cap if cfg.epsilon is None else float(cfg.epsilon)
    if not 0.0 < eps < cap:
        raise ConfigError(f"epsilon must lie in ]0, {cap:.6g}[, got {eps}")
    if cfg.max_iter < 1:
        raise ConfigError("max_iter must be >= 1")
    gamma_fn = _schedule(1.9 * beta if cfg.gamma is None else cfg.gamma, "gamma")
    lam_fn = _schedule(cfg.lam, "lam")
    hi = 2.0 * beta - eps
    for n in range(cfg.max_iter):
        g, lam = gamma_fn(n), lam_fn(n)
        if not eps <= g <= hi:
            raise ConfigError(f"gamma_{n} = {g} outside [{eps:.6g}, {hi:.6g}]")
        if not eps <= lam <= 1.0:
            raise ConfigError(f"lambda_{n} = {lam} outside [{eps:.6g}, 1]")
        if not callable(cfg.gamma) and not callable(cfg.lam):
            break  # constant schedules: one check suffices
    if cfg.check_summable:
        _check_summable(cfg.a_seq, cfg.max_iter, "a_seq")
        _check_summable(cfg.b_seq, cfg.max_iter, "b_seq")
    return eps, gamma_fn, lam_fn


def _require_qualified(P):
    if not isinstance(P, ProblemInstance):
        raise InvalidProblemError("expected a ProblemInstance")
    if not P.qualification_asserted:
        raise InvalidProblemError(
            "qualification not asserted: set qualification_asserted=True after checking "
            "that r lies in the strong relative interior of L(dom f) - dom g"
        )
    probe = np.random.default_rng(0).standard_normal(P.L.shape_in)
    if not np.any(P.L.apply(probe)):
        raise InvalidProblemError("L must be nonzero")


def recover_primal(P: ProblemInstance, v):
    """``prox_f(z - L* v)``, the primal point attached to a dual point."""
    v = as_vector(v, P.L.shape_out, "v")
    return P.f.prox(P.z - P.L.apply_adjoint(v), 1.0)


def primal_objective(P: ProblemInstance, x):
    x = as_vector(x, P.L.shape_in, "x")
    fx = P.f.value(x)
    gx = P.g.value(P.L.apply(x) - P.r)
    return float(fx + gx + 0.5 * np.sum((x - P.z) ** 2))


def _envelope_conj(f, u, p=None):
    """Moreau envelope of ``f*`` at ``u``: ``||u||^2/2 - f(p) - ||u - p||^2/2``."""
    if p is None:
        p = f.prox(u, 1.0)
    return 0.5 * float(np.sum(u * u)) - f.value(p) - 0.5 * float(np.sum((u - p) ** 2))


def dual_objective(P: ProblemInstance, v):
    v = as_vector(v, P.L.shape_out, "v")
    u = P.z - P.L.apply_adjoint(v)
    return float(_envelope_conj(P.f, u) + P.g.conj_value(v) + inner(v, P.r))


def duality_gap(P: ProblemInstance, x, v):
    """Primal plus dual value minus ``||z||^2 / 2``; nonnegative, zero at optima."""
    return primal_objective(P, x) + dual_objective(P, v) - 0.5 * float(np.sum(P.z**2))


def _capabilities(P):
    primal = P.f.has_value and P.g.has_value
    dual = P.f.has_value and P.g.has_conj_value
    return primal, dual


def make_objective_fn(P: ProblemInstance, enabled=True):
    """Per-iteration objective evaluator ``(x_n, v_n, aux) -> (primal, dual)``.

    ``aux`` may carry ``Lx`` (``L x_n``) and ``p`` (``prox_f(z - L* v_n)``
    without the primal error) to avoid recomputation.
    """
    if not enabled:
        return None
    has_p, has_d = _capabilities(P)
    if not (has_p or has_d):
        return None
    half_z = 0.5 * float(np.sum(P.z**2))

    def fn(x, v, aux):
        pv = dv = None
        if has_p:
            Lx = aux.get("Lx")
            if Lx is None:
                Lx = P.L.apply(x)
            pv = float(P.f.value(x) + P.g.value(Lx - P.r) + 0.5 * np.sum((x - P.z) ** 2))
        if has_d:
            u = aux.get("u")
            if u is None:
                u = P.z - P.L.apply_adjoint(v)
            dv = float(_envelope_conj(P.f, u, aux.get("p")) + P.g.conj_value(v) + inner(v, P.r))
        return pv, dv

    fn.half_z = half_z
    return fn


def run_iterations(
    update,
    v0,
    finalize,
    *,
    max_iter,
    tol_iterate=None,
    tol_gap=None,
    objective_fn=None,
    keep_history=False,
    stagnation_window=200,
):
    """Shared iteration driver.

    Parameters
    ----------
    update : callable
        ``update(n, v_n) -> (x_n, v_{n+1}, aux)``.
    finalize : callable
        ``finalize(v) -> x`` computes the returned primal point.
    objective_fn : callable, optional
        Evaluates ``(primal, dual)`` at ``(x_n, v_n)``; must expose a
        ``half_z`` attribute for the gap.
    """
    t0 = time.perf_counter()
    v = np.array(v0, dtype=float)
    trace = []
    hx = [] if keep_history else None
    hv = [] if keep_history else None
    reason = "max_iter"
    warning = None
    win_best = prev_best = np.inf
    for n in range(max_iter):
        x, v_next, aux = update(n, v)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v_next))):
            raise DivergenceError(f"non-finite iterate at step {n}", trace=trace)
        dv = v_next - v
        change = float(np.linalg.norm(dv))
        rel = change / max(1.0, float(np.linalg.norm(v)))
        pv = dval = gap = None
        if objective_fn is not None:
            pv, dval = objective_fn(x, v, aux)
            if pv is not None and dval is not None:
                gap = pv + dval - objective_fn.half_z
        trace.append(TraceRow(n, change, pv, dval, gap, 1e3 * (time.perf_counter() - t0)))
        if keep_history:
            hx.append(np.array(x))
            hv.append(np.array(v_next))
        v = v_next
        if tol_iterate is not None and rel <= tol_iterate:
            reason = "iterate_tol"
            break
        if tol_gap is not None and gap is not None and np.isfinite(gap) and gap <= tol_gap:
            reason = "gap_tol"
            break
        # stagnation monitor: the smallest step of a window should keep
        # shrinking; a persistent step means the dual drifts off
        win_best = min(win_best, change)
        if stagnation_window and (n + 1) % stagnation_window == 0:
            gap_ok = gap is not None and np.isfinite(gap)
            if warning is None and not gap_ok and 0.0 < prev_best <= win_best * (1.0 + 1e-6):
                warning = STAGNATION_WARNING
                log.warning("iterate change stopped decreasing near %.3e: %s", win_best, warning)
            prev_best, win_best = win_best, np.inf
    x_final = finalize(v)
    if not np.all(np.isfinite(x_final)):
        raise DivergenceError("non-finite primal recovery", trace=trace)
    return SolveResult(x_final, v, len(trace), trace, reason, hx, hv, warning)


def _v0(P, cfg):
    if cfg.v0 is None:
        return np.zeros(P.L.shape_out)
    return as_vector(cfg.v0, P.L.shape_out, "v0").copy()


def solve_dual_fb(P: ProblemInstance, cfg: Optional[DualFBConfig] = None) -> SolveResult:
    """Forward-backward iteration on the dual with primal recovery.

    Each step computes::

        x_n     = prox_f(z - L* v_n) + b_n
        v_{n+1} = v_n + lam_n (prox_{gamma_n g*}(v_n + gamma_n (L x_n - r)) + a_n - v_n)
    """
    cfg = cfg or DualFBConfig()
    _require_qualified(P)
    _, gamma_fn, lam_fn = resolve_schedules(cfg, P.beta)
    f, g, L, z, r = P.f, P.g, P.L, P.z, P.r

    def update(n, v):
        u = z - L.apply_adjoint(v)
        p = f.prox(u, 1.0)
        x = p if cfg.b_seq is None else p + cfg.b_seq(n)
        Lx = L.apply(x)
        gam, lam = gamma_fn(n), lam_fn(n)
        w = g.prox_conj(v + gam * (Lx - r), gam)
        if cfg.a_seq is not None:
            w = w + cfg.a_seq(n)
        return x, v + lam * (w - v), {"u": u, "p": p, "Lx": Lx}

    return run_iterations(
        update,
        _v0(P, cfg),
        lambda v: recover_primal(P, v),
        max_iter=cfg.max_iter,
        tol_iterate=cfg.tol_iterate,
        tol_gap=cfg.tol_gap,
        objective_fn=make_objective_fn(P, cfg.track_objectives),
        keep_history=cfg.keep_history,
        stagnation_window=cfg.stagnation_window,
    )


def solve_dual_fb_with_operator_errors(P, cfg, c1_seq=None, c2_seq=None, d1_seq=None, d2_seq=None):
    """Dual iteration with errors inside the operators.

    ::

        x_n     = prox_f(z - L* v_n - d2_n) + d1_n
        v_{n+1} = v_n + lam_n (prox_{gamma_n g*}(v_n + gamma_n (L x_n + c2_n - r)) + c1_n - v_n)

    The perturbations amount to summable errors ``a_n``/``b_n`` of
    :func:`solve_dual_fb`, so the same convergence guarantee applies.
    """
    cfg = cfg or DualFBConfig()
    _require_qualified(P)
    _, gamma_fn, lam_fn = resolve_schedules(cfg, P.beta)
    if cfg.check_summable:
        for name, s in (("c1_seq", c1_seq), ("c2_seq", c2_seq), ("d1_seq", d1_seq), ("d2_seq", d2_seq)):
            _check_summable(s, cfg.max_iter, name)
    f, g, L, z, r = P.f, P.g, P.L, P.z, P.r

    def update(n, v):
        u = z - L.apply_adjoint(v)
        if d2_seq is not None:
            u = u - d2_seq(n)
        p = f.prox(u, 1.0)
        x = p if d1_seq is None else p + d1_seq(n)
        Lx = L.apply(x)
        if c2_seq is not None:
            Lx = Lx + c2_seq(n)
        gam, lam = gamma_fn(n), lam_fn(n)
        w = g.prox_conj(v + gam * (Lx - r), gam)
        if c1_seq is not None:
            w = w + c1_seq(n)
        return x, v + lam * (w - v), {}

    return run_iterations(
        update,
        _v0(P, cfg),
        lambda v: recover_primal(P, v),
        max_iter=cfg.max_iter,
        tol_iterate=cfg.tol_iterate,
        tol_gap=cfg.tol_gap,
        objective_fn=make_objective_fn(P, cfg.track_objectives),
        keep_history=cfg.keep_history,
        stagnation_window=cfg.stagnation_window,
    )


def solve_dykstra_mode(f: ProxFunction, g: ProxFunction, z, max_iter=1000, tol=1e-10, keep_history=True):
    """Dykstra-like iteration for ``prox_{f+g}(z)``.

    With ``L = Id``, ``r = 0`` and unit steps the dual iteration becomes::

        x_n     = prox_f(z - v_n)
        v_{n+1} = x_n + v_n - prox_g(x_n + v_n)

    and ``x_n`` converges to ``prox_{f+g}(z)``.
    """
    z = as_vector(z, name="z")
    for F in (f, g):
        if F.dim is not None and F.dim != z.size:
            raise StructuralError("f, g and z must live in the same space")

    def update(n, v):
        x = f.prox(z - v, 1.0)
        s = x + v
        return x, s - g.prox(s, 1.0), {}

    return run_iterations(
        update,
        np.zeros_like(z),
        lambda v: f.prox(z - v, 1.0),
        max_iter=max_iter,
        tol_iterate=tol,
        keep_history=keep_history,
    )
