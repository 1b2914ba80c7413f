"""Oracle agreement suites shared by the ``verify`` subcommand and the tests.

Each suite returns a list of :class:`CheckResult`; a suite passes when
every entry is ``ok``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .apps import TVModel, tv_denoise
from .errors import InputError, RangeTooSmallError
from .oracles import GridSpec, chambolle_reference, dykstra_reference, grid_argmin_scalar, primal_grid_oracle
from .prox.functions import (
    DistSq,
    Indicator,
    PhiOfDist,
    Quadratic,
    ScalarLift,
    SeparableBasis,
    SqMinusDist,
    SumQuadratics,
    Support,
    SupportPlusPhiNorm,
    TightFrameComposite,
    Zero,
)
from .prox.scalar import (
    POWER_EXPONENTS,
    Huber,
    LogBarrier,
    NegLog,
    PlusIndicatorInterval,
    PlusSupportInterval,
    Power,
    ZeroFun,
)
from .prox.sets import Box, Halfspace, L1Ball, L2Ball, LinfBall, NonnegOrthant, Singleton
from .solver import DualFBConfig, ProblemInstance, solve_dual_fb, solve_dykstra_mode
from .spaces import discrete_divergence, discrete_gradient, estimate_opnorm, from_matrix, gradient_operator, inner

__all__ = [
    "CheckResult",
    "scalar_catalog",
    "moreau_catalog",
    "vector_catalog",
    "random_set",
    "prox_grid_suite",
    "moreau_suite",
    "dykstra_suite",
    "chambolle_suite",
    "adjoint_suite",
    "firm_nonexpansive_suite",
    "standard_instances",
    "solver_oracle_suite",
    "SUITES",
    "run_suite",
]


@dataclass
class CheckResult:
    name: str
    ok: bool
    max_error: float
    tol: float
    cases: int
    seconds: float

    def line(self):
        tag = "PASS" if self.ok else "FAIL"
        return f"{tag} {self.name}: max error {self.max_error:.3e} (tol {self.tol:.1e}, {self.cases} cases, {self.seconds:.2f} s)"


def scalar_catalog():
    """One representative per scalar kind and exponent, labelled."""
    out = [(f"power(p={p:.4g})", Power(p, 0.7)) for p in POWER_EXPONENTS]
    out += [
        ("neg_log", NegLog(1.3)),
        ("log_barrier", LogBarrier(2.0, 0.8)),
        ("huber", Huber(1.0, 0.6)),
        ("zero", ZeroFun()),
        ("plus_support(power2)", PlusSupportInterval(Power(2.0, 0.5), -0.4, 1.1)),
        ("plus_support(zero)", PlusSupportInterval(ZeroFun(), -1.0, 0.5)),
        ("plus_indicator(power2)", PlusIndicatorInterval(Power(2.0, 0.5), -1.0, 2.0)),
        ("plus_indicator(zero)", PlusIndicatorInterval(ZeroFun(), -1.5, 1.0)),
    ]
    return out


def random_set(rng, dim):
    """A random closed convex set of one of several kinds."""
    kind = rng.integers(6)
    if kind == 0:
        lo = rng.uniform(-2.0, 0.5, dim)
        return Box(lo, lo + rng.uniform(0.2, 2.0, dim))
    if kind == 1:
        return L2Ball(rng.normal(size=dim), rng.uniform(0.3, 2.0))
    if kind == 2:
        return Halfspace(rng.normal(size=dim), rng.normal())
    if kind == 3:
        return L1Ball(rng.uniform(0.3, 2.0), dim)
    if kind == 4:
        return LinfBall(rng.uniform(0.3, 2.0), dim)
    return NonnegOrthant(dim)


def moreau_catalog(dim=3, seed=0):
    """Vector kinds with a closed-form conjugate inside the catalog."""
    rng = np.random.default_rng(seed)
    O, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    sets = [
        ("box", Box(-np.ones(dim), 2 * np.ones(dim))),
        ("l2ball", L2Ball(rng.normal(size=dim), 1.5)),
        ("halfspace", Halfspace(rng.normal(size=dim), 0.3)),
        ("l1ball", L1Ball(1.2, dim)),
        ("linfball", LinfBall(0.8, dim)),
        ("singleton", Singleton(rng.normal(size=dim))),
    ]
    out = []
    for name, C in sets:
        out.append((f"indicator({name})", Indicator(C)))
        out.append((f"support({name})", Support(C)))
    out += [
        ("phi_of_dist(power1)", PhiOfDist(Power(1.0, 0.9), L2Ball(np.zeros(dim), 1.0))),
        ("phi_of_dist(power2)", PhiOfDist(Power(2.0, 0.9), Box(-np.ones(dim), np.ones(dim)))),
        ("phi_of_dist(huber)", PhiOfDist(Huber(1.0, 0.5), L1Ball(1.0, dim))),
        ("scalar_lift(power4/3)", ScalarLift(Power(4.0 / 3.0, 0.5), dim)),
        ("scalar_lift(mixed)", ScalarLift([Power(1.0, 0.3), Huber(0.5, 1.0), Power(3.0, 2.0)][:dim] + [ZeroFun()] * (dim - 3))),
        ("separable_basis(power1.5)", SeparableBasis(Power(1.5, 0.8), O)),
        ("zero", Zero(dim)),
    ]
    return out


def vector_catalog(dim=3, seed=0):
    """Every vector kind, including those without a catalog conjugate."""
    rng = np.random.default_rng([seed, 7])
    A = rng.normal(size=(dim, dim))
    Q, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    M = np.sqrt(2.0) * Q[: max(1, dim - 1)]  # M M* = 2 Id
    out = moreau_catalog(dim, seed)
    out += [
        ("dist_sq(l2ball)", DistSq(L2Ball(rng.normal(size=dim), 0.7), 0.6)),
        ("sq_minus_dist(box)", SqMinusDist(Box(-np.ones(dim), np.ones(dim)), 1.4)),
        ("support_plus_phi_norm(power2)", SupportPlusPhiNorm(L1Ball(0.8, dim), Power(2.0, 0.5))),
        ("support_plus_phi_norm(interval)", SupportPlusPhiNorm(Box(-np.ones(dim), np.ones(dim)), PlusIndicatorInterval(ZeroFun(), -1.0, 1.0))),
        ("quadratic", Quadratic(A @ A.T, rng.normal(size=dim), 0.3)),
        ("sum_quadratics", SumQuadratics([(0.5, rng.normal(size=(2, dim)), rng.normal(size=2)), (2.0, np.eye(dim), rng.normal(size=dim))])),
        ("tight_frame_composite", TightFrameComposite(ScalarLift(Power(1.0, 0.4), M.shape[0]), M, 2.0)),
    ]
    return out


def _timed(name, tol, fn):
    t0 = time.perf_counter()
    err, cases = fn()
    return CheckResult(name, bool(err <= tol), float(err), tol, cases, time.perf_counter() - t0)


def _widening_grid_argmin(phi, gamma, xi, step, rounds, half_width=10.0):
    for _ in range(8):
        gs = GridSpec([xi - half_width], [xi + half_width], step=step, rounds=rounds)
        try:
            return grid_argmin_scalar(phi, gamma, xi, gs)
        except RangeTooSmallError:
            half_width *= 2.0
    raise RangeTooSmallError(f"no interior argmin found for xi={xi}, gamma={gamma}")


def prox_grid_suite(cases=100, seed=0, tol=1e-5, step=1e-3, rounds=3):
    """Closed-form scalar proxes against the grid argmin of the defining objective."""
    results = []
    for k, (name, phi) in enumerate(scalar_catalog()):
        rng = np.random.default_rng([seed, k])

        def run(phi=phi, rng=rng):
            worst = 0.0
            for _ in range(cases):
                gamma = float(rng.uniform(0.1, 5.0))
                xi = float(rng.uniform(-5.0, 5.0))
                ref = _widening_grid_argmin(phi, gamma, xi, step, rounds)
                worst = max(worst, abs(phi.prox(xi, gamma) - ref))
            return worst, cases

        results.append(_timed(f"prox-grid {name}", tol, run))
    return results


def moreau_suite(cases=50, seed=0, tol=1e-10, dim=3):
    """``x = prox_{gF} x + g prox_{F*/g}(x/g)`` with the catalog conjugate."""
    results = []
    for k, (name, phi) in enumerate(scalar_catalog()):
        c = phi.conjugate()
        if c is None:
            continue
        rng = np.random.default_rng([seed, 1, k])

        def run(phi=phi, c=c, rng=rng):
            worst = 0.0
            for g, x in zip(rng.uniform(0.1, 5.0, cases), rng.uniform(-5.0, 5.0, cases)):
                worst = max(worst, abs(x - phi.prox(x, g) - g * c.prox(x / g, 1.0 / g)))
            return worst, cases

        results.append(_timed(f"moreau scalar {name}", tol, run))
    for k, (name, F) in enumerate(moreau_catalog(dim, seed)):
        H = F.conjugate()
        rng = np.random.default_rng([seed, 2, k])

        def run(F=F, H=H, rng=rng):
            worst = 0.0
            for _ in range(cases):
                g = float(rng.uniform(0.1, 5.0))
                x = rng.normal(scale=3.0, size=dim)
                res = x - F.prox(x, g) - g * H.prox(x / g, 1.0 / g)
                worst = max(worst, float(np.linalg.norm(res)) / max(1.0, float(np.linalg.norm(x))))
            return worst, cases

        results.append(_timed(f"moreau {name}", tol, run))
    return results


def dykstra_suite(pairs=20, iters=500, seed=0, tol=1e-12):
    """Dual iteration with ``L = Id`` against the textbook Dykstra-like recursion."""
    rng = np.random.default_rng(seed)

    def run():
        worst = 0.0
        for _ in range(pairs):
            dim = int(rng.integers(2, 6))
            f, g = Indicator(random_set(rng, dim)), Indicator(random_set(rng, dim))
            z = rng.normal(scale=3.0, size=dim)
            res = solve_dykstra_mode(f, g, z, max_iter=iters, tol=None, keep_history=True)
            xs, ps = dykstra_reference(f, g, z, iters)
            for a, b, va, vb in zip(res.history_x, xs, res.history_v, ps):
                worst = max(worst, float(np.max(np.abs(a - b))), float(np.max(np.abs(va - vb))))
        return worst, pairs

    return [_timed("dykstra equivalence", tol, run)]


def chambolle_suite(n=16, iters=200, mu=0.1, seed=0, tol=1e-12):
    """TV dual iterates with ``f = 0``, ``p = 2``, unit relaxation against the reference loop."""
    rng = np.random.default_rng(seed)
    z = np.clip(np.kron(rng.uniform(size=(4, 4)), np.ones((n // 4, n // 4)))[:n, :n], 0, 1)
    z = z + 0.1 * rng.normal(size=z.shape)
    tau = 0.9 / (4.0 * mu)

    def run():
        cfg = DualFBConfig(max_iter=iters, tol_iterate=None, keep_history=True, track_objectives=False)
        res = tv_denoise(TVModel(z, mu, 2), cfg, tau=tau)
        ref = chambolle_reference(z, mu, tau, iters, p=2)
        worst = 0.0
        for v, (v1, v2) in zip(res.history_v, ref):
            worst = max(worst, float(np.max(np.abs(v[0] - v1))), float(np.max(np.abs(v[1] - v2))))
        if len(res.history_v) != len(ref):
            worst = np.inf
        return worst, iters

    return [_timed("chambolle equivalence", tol, run)]


def adjoint_suite(trials=50, n=8, sizes=(4, 8, 16), seed=0, tol=1e-12):
    """``<grad x, y> = -<x, div y>`` and the power-iteration estimate of ``||grad||``."""
    rng = np.random.default_rng(seed)

    def run_adj():
        worst = 0.0
        for _ in range(trials):
            x = rng.normal(size=(n, n))
            y = rng.normal(size=(2, n, n))
            lhs = abs(inner(discrete_gradient(x), y) + inner(x, discrete_divergence(y)))
            worst = max(worst, lhs / (1.0 + np.linalg.norm(x) * np.linalg.norm(y)))
        return worst, trials

    def run_norm():
        # excess of the estimate over the bound; pass when <= 0
        worst = -np.inf
        for N in sizes:
            est = estimate_opnorm(gradient_operator(N, 1.0), iterations=200, seed=seed, safety=1.0)
            worst = max(worst, est - 2.0 * np.sqrt(2.0))
        return worst, len(sizes)

    return [_timed("gradient/divergence adjointness", tol, run_adj), _timed("gradient norm estimate <= 2 sqrt 2", 0.0, run_norm)]


def firm_nonexpansive_suite(pairs=200, seed=0, tol=1e-10, dim=3):
    """``<p - q, x - y> >= ||p - q||^2`` for ``p = prox x``, ``q = prox y``; reports the worst violation."""
    results = []
    kinds = [(f"scalar {n}", phi, 1) for n, phi in scalar_catalog()] + [(n, F, dim) for n, F in vector_catalog(dim, seed)]
    for k, (name, F, d) in enumerate(kinds):
        rng = np.random.default_rng([seed, 3, k])

        def run(F=F, d=d, rng=rng):
            worst = 0.0
            for _ in range(pairs):
                g = float(rng.uniform(0.1, 5.0))
                x, y = rng.normal(scale=3.0, size=d), rng.normal(scale=3.0, size=d)
                if d == 1:
                    p, q = np.array([F.prox(x[0], g)]), np.array([F.prox(y[0], g)])
                else:
                    p, q = F.prox(x, g), F.prox(y, g)
                worst = max(worst, float(np.sum((p - q) ** 2) - np.sum((p - q) * (x - y))))
            return worst, pairs

        results.append(_timed(f"firm nonexpansive {name}", tol, run))
    return results


_INSTANCE_KINDS = ("indicator", "support", "scalar_lift", "phi_of_dist")


def _instance_term(kind, rng, dim):
    if kind == "indicator":
        if rng.uniform() < 0.5:
            return Indicator(Box(-rng.uniform(0.2, 0.8, dim), rng.uniform(0.2, 0.8, dim)))
        return Indicator(L2Ball(np.zeros(dim), float(rng.uniform(0.3, 0.9))))
    if kind == "support":
        if rng.uniform() < 0.5:
            return Support(Box(-rng.uniform(0.1, 0.8, dim), rng.uniform(0.1, 0.8, dim)))
        return Support(L2Ball(np.zeros(dim), float(rng.uniform(0.1, 0.8))))
    if kind == "scalar_lift":
        p = float(rng.choice(POWER_EXPONENTS))
        return ScalarLift(Power(p, float(rng.uniform(0.2, 1.0))), dim)
    p = float(rng.choice([1.0, 2.0, 4.0 / 3.0]))
    return PhiOfDist(Power(p, float(rng.uniform(0.3, 1.5))), Box(-0.5 * np.ones(dim), 0.5 * np.ones(dim)))


def standard_instances(count=20, seed=0):
    """Seeded small problems covering every pairing of indicator, support,
    scalar-lift and distance-penalty terms.

    Sets contain the origin in their interior and ``||r||`` is small, so
    the constraint qualification holds; ``z`` is placed away from the
    origin so that constraints and kinks are active. Returns a list of
    ``(name, ProblemInstance)``.
    """
    out = []
    for k in range(count):
        rng = np.random.default_rng([seed, 5, k])
        fk = _INSTANCE_KINDS[k % 4]
        gk = _INSTANCE_KINDS[(k // 4) % 4]
        dim = 1 if k >= 16 else 2
        m = dim if rng.uniform() < 0.5 else max(1, dim - 1) if dim == 2 else 1
        A = rng.normal(size=(m, dim))
        A *= float(rng.uniform(0.5, 1.5)) / np.linalg.norm(A, 2)
        r = rng.uniform(-0.1, 0.1, m)
        z = rng.choice([-1.0, 1.0], dim) * rng.uniform(1.0, 2.5, dim)
        P = ProblemInstance(_instance_term(fk, rng, dim), _instance_term(gk, rng, m), from_matrix(A), z, r, True)
        out.append((f"#{k} f={fk} g={gk} dim={dim}", P))
    return out


def instance_grid(P, step=1e-3, rounds=1, half_width=4.0):
    """Grid covering ``z +- half_width`` for :func:`primal_grid_oracle`."""
    z = P.z.ravel()
    return GridSpec(z - half_width, z + half_width, step=step, rounds=rounds)


def solver_oracle_suite(count=20, seed=0, step=1e-3, max_seconds=5.0, references=None):
    """Dual iteration against the primal grid oracle; tolerance two grid steps.

    ``references`` may hold precomputed oracle points (one per instance).
    Any solve slower than ``max_seconds`` fails the check.
    """

    def run():
        worst = 0.0
        for k, (_, P) in enumerate(standard_instances(count, seed)):
            ref = primal_grid_oracle(P, instance_grid(P, step)) if references is None else np.asarray(references[k])
            t0 = time.perf_counter()
            x = solve_dual_fb(P, DualFBConfig(tol_iterate=1e-12, max_iter=100000)).x
            if time.perf_counter() - t0 > max_seconds:
                return np.inf, count
            worst = max(worst, float(np.linalg.norm(x.ravel() - ref.ravel())))
        return worst, count

    return [_timed("solver vs primal grid oracle", 2 * step, run)]


SUITES = {
    "prox-grid": prox_grid_suite,
    "moreau": moreau_suite,
    "dykstra": dykstra_suite,
    "chambolle": chambolle_suite,
    "adjoint": adjoint_suite,
    "firm": firm_nonexpansive_suite,
    "solver-oracle": solver_oracle_suite,
}


def run_suite(name, seed=0):
    """Run one suite (or ``"all"``) and return its results."""
    if name == "all":
        out = []
        for fn in SUITES.values():
            out.extend(fn(seed=seed))
        return out
    if name not in SUITES:
        raise InputError(f"unknown suite {name!r}; choose from {', '.join(list(SUITES) + ['all'])}")
    return SUITES[name](seed=seed)
