"""Command-line front end.

Every option can come from a flag, from a TOML file given with ``--config``,
or from a built-in default, in that order of precedence. Solver options live
in the ``[solver]`` section, paths in ``[io]`` and model parameters in a
section named after the subcommand::

    [solver]
    max_iter = 5000
    tol = 1e-7

    [tv]
    mu = 0.05
    p = "inf"

Exit status is 0 when the run stopped on a tolerance, 2 when it hit the
iteration cap (or a verify suite failed) and 1 on any error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass
from typing import Any, Callable, Optional

import numpy as np

from . import __version__
from .apps import (
    BestApproxModel,
    DictModel,
    PotterArunModel,
    SoftApproxModel,
    TVModel,
    best_feasible_approx,
    dict_denoise,
    potter_arun,
    soft_best_approx,
    tv_denoise,
)
from .errors import ConfigError, DualFBError, InputError
from .io import load_config, read_matrix_csv, read_pgm, read_vector_csv, write_pgm, write_trace_csv, write_vector_csv
from .prox.functions import DistSq, Indicator, SqMinusDist, Support
from .prox.scalar import Huber, LogBarrier, NegLog, PlusIndicatorInterval, PlusSupportInterval, Power, ZeroFun
from .prox.sets import Box, L1Ball, L2Ball, LinfBall, NonnegOrthant, Singleton, WholeSpace
from .solver import DualFBConfig
from .spaces import from_matrix, identity
from .verify import SUITES, run_suite

log = logging.getLogger("dualfb")

EXIT_OK, EXIT_ERROR, EXIT_MAXITER = 0, 1, 2


class CLIError(DualFBError):
    pass


# spec strings -----------------------------------------------------------------


def _floats(parts, spec, count):
    if len(parts) != count:
        raise InputError(f"spec {spec!r} expects {count} numeric field(s)")
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise InputError(f"spec {spec!r} has a non-numeric field") from None


def parse_scalar(spec):
    """``power:p:alpha``, ``neglog:alpha``, ``logbarrier:omega[:weight]``, ``huber:omega:tau``, ``zero``,
    ``abs:alpha`` (= ``power:1:alpha``) or ``interval:lo:hi`` (indicator of an interval)."""
    name, *parts = str(spec).strip().split(":")
    name = name.lower()
    if name == "power":
        return Power(*_floats(parts, spec, 2))
    if name == "abs":
        return Power(1.0, *_floats(parts, spec, 1))
    if name == "neglog":
        return NegLog(*_floats(parts, spec, 1))
    if name == "logbarrier":
        return LogBarrier(*_floats(parts, spec, len(parts) if len(parts) in (1, 2) else 1))
    if name == "huber":
        return Huber(*_floats(parts, spec, 2))
    if name == "zero":
        _floats(parts, spec, 0)
        return ZeroFun()
    if name == "interval":
        return PlusIndicatorInterval(ZeroFun(), *_floats(parts, spec, 2))
    raise InputError(f"unknown scalar function {spec!r}")


def parse_set(spec, dim):
    """``whole``, ``nonneg``, ``zero``, ``box:lo:hi``, ``l2ball:r``, ``linfball:r`` or ``l1ball:r``."""
    name, *parts = str(spec).strip().split(":")
    name = name.lower()
    if name == "whole":
        return WholeSpace(dim)
    if name == "nonneg":
        return NonnegOrthant(dim)
    if name == "zero":
        return Singleton(np.zeros(dim))
    if name == "box":
        lo, hi = _floats(parts, spec, 2)
        return Box(lo, hi, dim)
    if name == "l2ball":
        return L2Ball(np.zeros(dim), *_floats(parts, spec, 1))
    if name == "linfball":
        return LinfBall(*_floats(parts, spec, 1), dim)
    if name == "l1ball":
        return L1Ball(*_floats(parts, spec, 1), dim)
    raise InputError(f"unknown set {spec!r}")


def _norm_choice(v):
    s = str(v).strip().lower()
    if s not in ("1", "2", "inf"):
        raise InputError(f"p must be 1, 2 or inf, got {v!r}")
    return s


def _bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise InputError(f"expected a boolean, got {v!r}")


# option table -----------------------------------------------------------------


@dataclass(frozen=True)
class Opt:
    flag: str
    section: str  # "solver", "io" or "model"
    type: Callable[[Any], Any]
    default: Any = None
    help: str = ""
    choices: Optional[tuple] = None

    @property
    def dest(self):
        return self.flag.lstrip("-").replace("-", "_")


SOLVER_OPTS = [
    Opt("--max-iter", "solver", int, 1000, "iteration cap"),
    Opt("--tol", "solver", float, 1e-8, "relative dual iterate change that stops the run"),
    Opt("--tol-gap", "solver", float, None, "duality gap that stops the run"),
    Opt("--gamma", "solver", float, None, "constant step size (default 1.9 / ||L||^2)"),
    Opt("--lam", "solver", float, 1.0, "constant relaxation"),
    Opt("--epsilon", "solver", float, None, "step safety margin"),
    Opt("--seed", "solver", int, 0, "seed for the random dual start when --random-start is set"),
    Opt("--random-start", "solver", _bool, False, "start from a random dual point"),
]
TRACE_OPT = Opt("--trace", "io", str, None, "write the convergence trace to this CSV file")
OUTPUT_OPT = Opt("--output", "io", str, None, "output file (prints to stdout when omitted)")

COMMANDS = {
    "tv": [
        Opt("--input", "io", str, None, "noisy square image (PGM P2/P5)"),
        Opt("--output", "io", str, None, "denoised image (PGM)"),
        Opt("--ascii", "io", _bool, False, "write P2 instead of P5"),
        Opt("--mu", "model", float, 0.1, "TV weight"),
        Opt("--p", "model", _norm_choice, "2", "pixelwise gradient norm", ("1", "2", "inf")),
        Opt("--tau", "model", float, None, "dual step (default 0.95 / (4 mu))"),
        TRACE_OPT,
    ]
    + SOLVER_OPTS,
    "dict": [
        Opt("--input", "io", str, None, "signal z (CSV vector)"),
        Opt("--atoms", "io", str, None, "dictionary, one unit-norm atom per row (CSV matrix)"),
        Opt("--delta", "model", float, None, "frame bound (default: squared spectral norm of the atoms)"),
        Opt("--phi", "model", parse_scalar, "abs:0.1", "coefficient penalty"),
        OUTPUT_OPT,
        TRACE_OPT,
    ]
    + SOLVER_OPTS,
    "bestapprox": [
        Opt("--input", "io", str, None, "reference point z (CSV vector)"),
        Opt("--matrix", "io", str, None, "operator L (CSV matrix, default identity)"),
        Opt("--r", "io", str, None, "offset r (CSV vector, default zero)"),
        Opt("--C", "model", str, "whole", "constraint set in the signal space"),
        Opt("--D", "model", str, "whole", "constraint set in the measurement space"),
        OUTPUT_OPT,
        TRACE_OPT,
    ]
    + SOLVER_OPTS,
    "softapprox": [
        Opt("--input", "io", str, None, "reference point z (CSV vector)"),
        Opt("--matrix", "io", str, None, "operator L (CSV matrix, default identity)"),
        Opt("--r", "io", str, None, "offset r (CSV vector, default zero)"),
        Opt("--C", "model", str, "whole", "set penalized through phi(d_C)"),
        Opt("--D", "model", str, "whole", "set penalized through psi(d_D)"),
        Opt("--phi", "model", parse_scalar, "abs:1", "penalty on the distance to C"),
        Opt("--psi", "model", parse_scalar, "abs:1", "penalty on the distance to D"),
        OUTPUT_OPT,
        TRACE_OPT,
    ]
    + SOLVER_OPTS,
    "potter-arun": [
        Opt("--vectors", "io", str, None, "measurement vectors s_i, one per row (CSV matrix)"),
        Opt("--rho", "io", str, None, "measurements rho_i (CSV vector)"),
        Opt("--C", "model", str, "whole", "constraint set"),
        OUTPUT_OPT,
        TRACE_OPT,
    ]
    + [o for o in SOLVER_OPTS if o.flag not in ("--lam",)],
    "prox-eval": [
        Opt("--fun", "model", str, None, "power, abs, neglog, logbarrier, huber, zero, interval, "
            "indicator, support, distsq, sqminusdist"),
        Opt("--p", "model", float, None, "power exponent"),
        Opt("--alpha", "model", float, 1.0, "weight"),
        Opt("--omega", "model", float, 1.0, "huber / log-barrier width"),
        Opt("--tau", "model", float, 1.0, "huber smoothing"),
        Opt("--weight", "model", float, 1.0, "log-barrier weight"),
        Opt("--lo", "model", float, -1.0, "interval lower end"),
        Opt("--hi", "model", float, 1.0, "interval upper end"),
        Opt("--set", "model", str, None, "set for indicator, support, distsq, sqminusdist"),
        Opt("--gamma", "model", float, 1.0, "prox scaling"),
        Opt("--conj", "model", _bool, False, "evaluate the prox of the conjugate instead"),
        Opt("--x", "io", str, None, "point, a number or a comma-separated list"),
    ],
    "verify": [
        Opt("--suite", "model", str, "all", "oracle suite", tuple(SUITES) + ("all",)),
        Opt("--seed", "model", int, 0, "seed"),
    ],
}

HELP = {
    "tv": "total-variation denoising of a square PGM image",
    "dict": "denoising with a penalty on dictionary coefficients",
    "bestapprox": "projection onto {x in C : Lx - r in D}",
    "softapprox": "best approximation with distance penalties",
    "potter-arun": "minimum-norm point of C matching linear measurements",
    "prox-eval": "evaluate a catalog proximity operator at a point",
    "verify": "run the oracle agreement suites",
}


def config_schema():
    """Allowed keys per config section, derived from the option table."""
    schema = {"solver": set(), "io": set()}
    for cmd, opts in COMMANDS.items():
        schema[cmd] = set()
        for o in opts:
            key = o.dest
            schema[cmd if o.section == "model" else o.section].add(key)
    return schema


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CLIError(message)


def build_parser():
    parser = _Parser(prog="dualfb", description="Dual forward-backward solvers for proximal denoising problems.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    for cmd, opts in COMMANDS.items():
        sp = sub.add_parser(cmd, help=HELP[cmd], description=HELP[cmd])
        sp.add_argument("--config", default=None, help="TOML configuration file")
        noise = sp.add_mutually_exclusive_group()
        noise.add_argument("--quiet", action="store_true", help="only report errors")
        noise.add_argument("--verbose", action="store_true", help="log solver progress")
        for o in opts:
            default = "none" if o.default is None else o.default
            extra = {"nargs": "?", "const": "true"} if o.type is _bool else {}
            sp.add_argument(o.flag, dest=o.dest, default=None, metavar=o.dest.upper(), choices=o.choices,
                            help=f"{o.help} [default: {default}]", **extra)
    return parser


def resolve_options(cmd, args, config):
    """Merge flags, config sections and defaults for ``cmd`` into a dict."""
    out = {}
    for o in COMMANDS[cmd]:
        section = cmd if o.section == "model" else o.section
        raw = getattr(args, o.dest)
        if raw is None and config is not None:
            raw = config.get(section, {}).get(o.dest)
        if raw is None:
            out[o.dest] = o.type(o.default) if isinstance(o.default, str) and o.type is not str else o.default
            continue
        try:
            out[o.dest] = o.type(raw)
        except (TypeError, ValueError):
            raise ConfigError(f"option {o.flag}: cannot interpret {raw!r}") from None
    return out


def _solver_config(opts, shape=None, keep_history=False):
    v0 = None
    if opts.get("random_start") and shape is not None:
        v0 = np.random.default_rng(opts["seed"]).normal(size=shape)
    return DualFBConfig(
        epsilon=opts.get("epsilon"),
        gamma=opts.get("gamma"),
        lam=opts.get("lam") if opts.get("lam") is not None else 1.0,
        max_iter=opts["max_iter"],
        tol_iterate=opts["tol"],
        tol_gap=opts.get("tol_gap"),
        v0=v0,
        keep_history=keep_history,
    )


def _require(opts, *names):
    for n in names:
        if opts.get(n) is None:
            raise InputError(f"--{n.replace('_', '-')} is required")


def _emit_vector(opts, x):
    if opts.get("output"):
        write_vector_csv(opts["output"], x)
    else:
        for v in np.ravel(x):
            print(f"{v:.17g}")


def _finish(opts, res):
    if opts.get("trace"):
        write_trace_csv(opts["trace"], res.trace)
    last = res.trace[-1] if res.trace else None
    gap = "n/a" if last is None or last.gap is None else f"{last.gap:.3e}"
    log.info("stopped after %d iterations (%s), duality gap %s", res.iterations, res.termination_reason, gap)
    if res.warning:
        log.warning(res.warning)
    return EXIT_OK if res.termination_reason in ("iterate_tol", "gap_tol") else EXIT_MAXITER


def _operator(opts, dim):
    if opts.get("matrix"):
        A = read_matrix_csv(opts["matrix"])
        if A.shape[1] != dim:
            raise InputError(f"matrix has {A.shape[1]} columns, z has {dim} entries")
        return from_matrix(A)
    return identity(dim)


# subcommands ---------------------------------------------------------------------


def cmd_tv(opts):
    _require(opts, "input", "output")
    z, maxval = read_pgm(opts["input"], return_maxval=True)
    m = TVModel(z, opts["mu"], opts["p"])
    res = tv_denoise(m, _solver_config(opts, (2,) + z.shape), tau=opts["tau"])
    write_pgm(opts["output"], res.x, maxval=255 if maxval <= 255 else 65535, binary=not opts["ascii"])
    return _finish(opts, res)


def cmd_dict(opts):
    _require(opts, "input", "atoms")
    z = read_vector_csv(opts["input"])
    E = read_matrix_csv(opts["atoms"])
    if E.shape[1] != z.size:
        raise InputError(f"atoms have {E.shape[1]} entries, z has {z.size}")
    delta = opts["delta"] if opts["delta"] is not None else float(np.linalg.norm(E, 2) ** 2)
    m = DictModel(E, delta, opts["phi"], z)
    res = dict_denoise(m, _solver_config(opts, (E.shape[0],)))
    _emit_vector(opts, res.x)
    return _finish(opts, res)


def _linear_setup(opts):
    _require(opts, "input")
    z = read_vector_csv(opts["input"])
    L = _operator(opts, z.size)
    m = L.dim_out
    r = read_vector_csv(opts["r"]) if opts.get("r") else np.zeros(m)
    if r.size != m:
        raise InputError(f"r has {r.size} entries, L has {m} rows")
    return z, L, r, parse_set(opts["C"], z.size), parse_set(opts["D"], m)


def cmd_bestapprox(opts):
    z, L, r, C, D = _linear_setup(opts)
    res = best_feasible_approx(BestApproxModel(C, D, L, r, z), _solver_config(opts, (L.dim_out,)))
    _emit_vector(opts, res.x)
    return _finish(opts, res)


def cmd_softapprox(opts):
    z, L, r, C, D = _linear_setup(opts)
    m = SoftApproxModel(C, D, L, r, z, opts["phi"], opts["psi"])
    res = soft_best_approx(m, _solver_config(opts, (L.dim_out,)))
    _emit_vector(opts, res.x)
    return _finish(opts, res)


def cmd_potter_arun(opts):
    _require(opts, "vectors", "rho")
    S = read_matrix_csv(opts["vectors"])
    rho = read_vector_csv(opts["rho"])
    m = PotterArunModel(parse_set(opts["C"], S.shape[1]), S, rho)
    res = potter_arun(m, _solver_config(opts, (rho.size,)))
    _emit_vector(opts, res.x)
    return _finish(opts, res)


_SET_FUNS = {"indicator": Indicator, "support": Support, "distsq": DistSq, "sqminusdist": SqMinusDist}


def _scalar_from_opts(opts):
    name = opts["fun"].lower()
    if name == "power":
        _require(opts, "p")
        return Power(opts["p"], opts["alpha"])
    if name == "abs":
        return Power(1.0, opts["alpha"])
    if name == "neglog":
        return NegLog(opts["alpha"])
    if name == "logbarrier":
        return LogBarrier(opts["omega"], opts["weight"])
    if name == "huber":
        return Huber(opts["omega"], opts["tau"])
    if name == "zero":
        return ZeroFun()
    if name == "interval":
        return PlusIndicatorInterval(ZeroFun(), opts["lo"], opts["hi"])
    if name == "support-interval":
        return PlusSupportInterval(ZeroFun(), opts["lo"], opts["hi"])
    return None


def cmd_prox_eval(opts):
    _require(opts, "fun", "x")
    try:
        x = np.array([float(t) for t in str(opts["x"]).split(",")])
    except ValueError:
        raise InputError(f"cannot parse --x {opts['x']!r}") from None
    gamma = opts["gamma"]
    phi = _scalar_from_opts(opts)
    if phi is not None:
        y = phi.prox_conj(x, gamma) if opts["conj"] else phi.prox(x, gamma)
    elif opts["fun"].lower() in _SET_FUNS:
        _require(opts, "set")
        kind = _SET_FUNS[opts["fun"].lower()]
        C = parse_set(opts["set"], x.size)
        F = kind(C) if kind in (Indicator, Support) else kind(C, opts["alpha"])
        y = F.prox_conj(x, gamma) if opts["conj"] else F.prox(x, gamma)
    else:
        raise InputError(f"unknown function {opts['fun']!r}")
    print(",".join(f"{v:.17g}" for v in np.ravel(y)))
    return EXIT_OK


def cmd_verify(opts):
    results = run_suite(opts["suite"], seed=opts["seed"])
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.ok]
    if failed:
        log.error("%d of %d checks failed", len(failed), len(results))
        return EXIT_MAXITER
    return EXIT_OK


HANDLERS = {
    "tv": cmd_tv,
    "dict": cmd_dict,
    "bestapprox": cmd_bestapprox,
    "softapprox": cmd_softapprox,
    "potter-arun": cmd_potter_arun,
    "prox-eval": cmd_prox_eval,
    "verify": cmd_verify,
}


def _setup_logging(quiet, verbose):
    level = logging.ERROR if quiet else (logging.INFO if verbose else logging.WARNING)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))
    root = logging.getLogger("dualfb")
    root.handlers[:] = [handler]
    root.setLevel(level)
    root.propagate = False


def main(argv=None):
    """Run the CLI and return the exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_ERROR
        _setup_logging(args.quiet, args.verbose)
        config = load_config(args.config, config_schema()) if args.config else None
        opts = resolve_options(args.command, args, config)
        return HANDLERS[args.command](opts)
    except (DualFBError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
