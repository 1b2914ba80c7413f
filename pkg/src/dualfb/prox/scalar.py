"""Convex functions on the real line with closed-form proximity operators.

Every class evaluates vectorized over numpy arrays. ``prox(xi, gamma)``
returns the minimizer of ``gamma * phi(y) + (xi - y)**2 / 2``; the scale
``gamma`` is folded into the parameters by :meth:`ScalarFun.scaled`:

========================  =============================================
kind                      folding rule for ``gamma * phi``
========================  =============================================
power(p, alpha)           alpha -> gamma * alpha
neg_log(alpha)            alpha -> gamma * alpha
log_barrier(omega, w)     w -> gamma * w
huber(omega, tau)         omega -> omega * sqrt(gamma), tau -> gamma * tau
zero                      unchanged
plus_support(base, lo,hi) base scaled, interval -> gamma * interval
plus_indicator(base, C)   base scaled, C unchanged
========================  =============================================
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import CatalogError, InputError

__all__ = [
    "ScalarFun",
    "Power",
    "NegLog",
    "LogBarrier",
    "Huber",
    "ZeroFun",
    "PlusSupportInterval",
    "PlusIndicatorInterval",
    "scalar_prox",
    "soft_interval",
    "POWER_EXPONENTS",
]

POWER_EXPONENTS = (1.0, 4.0 / 3.0, 1.5, 2.0, 3.0, 4.0)
INTERVAL_TOL = 1e-9


def soft_interval(xi, lo, hi):
    """Soft thresholding onto the interval ``[lo, hi]``."""
    xi = np.asarray(xi, dtype=float)
    return np.where(xi < lo, xi - lo, np.where(xi > hi, xi - hi, 0.0))


def _out(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


class ScalarFun:
    """Base class; subclasses are frozen dataclasses."""

    kind = "abstract"

    def value(self, xi):
        raise NotImplementedError

    def _prox(self, xi):
        raise NotImplementedError

    def scaled(self, gamma) -> "ScalarFun":
        raise NotImplementedError

    def prox(self, xi, gamma=1.0):
        fun = self if gamma == 1.0 else self.scaled(gamma)
        x = np.asarray(xi, dtype=float)
        return _out(fun._prox(x), xi)

    def prox_conj(self, xi, gamma=1.0):
        """prox of ``gamma * phi^*`` through the Moreau decomposition."""
        x = np.asarray(xi, dtype=float)
        return _out(x - gamma * np.asarray(self.prox(x / gamma, 1.0 / gamma)), xi)

    def subdiff_at_zero(self):
        """The interval ``d phi(0)`` as ``(lo, hi)``."""
        raise NotImplementedError

    @property
    def max_subgrad_at_zero(self):
        return self.subdiff_at_zero()[1]

    @property
    def is_even(self):
        return True

    def argmin_max(self):
        """``max Argmin phi``; only defined when the argmin set is bounded above."""
        if self.is_even:
            return 0.0
        raise CatalogError(f"{self.kind}: max Argmin not available")

    def conjugate(self) -> "ScalarFun | None":
        """Closed-form conjugate inside the catalog, or ``None``."""
        return None

    def conj_value(self, u):
        c = self.conjugate()
        if c is None:
            raise CatalogError(f"{self.kind}: conjugate value not available")
        return c.value(u)

    @property
    def has_conj_value(self):
        try:
            self.conj_value(0.0)
        except CatalogError:
            return False
        return True

    @property
    def is_indicator_of_zero(self):
        return False


def _snap_exponent(p):
    for q in POWER_EXPONENTS:
        if abs(float(p) - q) < 1e-12:
            return q
    raise CatalogError(f"power exponent {p} not in catalog {POWER_EXPONENTS}")


def _positive(name, v):
    v = float(v)
    if not v > 0 or not np.isfinite(v):
        raise CatalogError(f"{name} must be a finite positive number, got {v}")
    return v


@dataclass(frozen=True)
class Power(ScalarFun):
    """``alpha * |xi|**p`` for ``p`` in 1, 4/3, 3/2, 2, 3, 4."""

    p: float
    alpha: float = 1.0
    kind = "power"

    def __post_init__(self):
        object.__setattr__(self, "p", _snap_exponent(self.p))
        object.__setattr__(self, "alpha", _positive("alpha", self.alpha))

    def value(self, xi):
        return self.alpha * np.abs(xi) ** self.p

    def scaled(self, gamma):
        return Power(self.p, gamma * self.alpha)

    def _prox(self, xi):
        a, p = self.alpha, self.p
        s, t = np.sign(xi), np.abs(xi)
        if p == 1.0:
            return s * np.maximum(t - a, 0.0)
        if p == 2.0:
            return xi / (1.0 + 2.0 * a)
        if p == 1.5:
            r = np.sqrt(1.0 + 16.0 * t / (9.0 * a * a))
            return xi * (r - 1.0) / (r + 1.0)
        if p == 3.0:
            return s * 2.0 * t / (1.0 + np.sqrt(1.0 + 12.0 * a * t))
        if p == 4.0 / 3.0:
            c = 256.0 * a**3 / 729.0
            rho = np.sqrt(t * t + c)
            lo = c / (rho + t)  # rho - t without cancellation
            k = 4.0 * a / (3.0 * 2.0 ** (1.0 / 3.0))
            return s * (t + k * (np.cbrt(lo) - np.cbrt(rho + t)))
        # p == 4
        c = 1.0 / (27.0 * a)
        rho = np.sqrt(t * t + c)
        lo = c / (rho + t)
        return s * (np.cbrt((rho + t) / (8.0 * a)) - np.cbrt(lo / (8.0 * a)))

    def subdiff_at_zero(self):
        return (-self.alpha, self.alpha) if self.p == 1.0 else (0.0, 0.0)

    def conjugate(self):
        if self.p == 1.0:
            return PlusIndicatorInterval(ZeroFun(), -self.alpha, self.alpha)
        p = self.p
        q = _snap_exponent(p / (p - 1.0))
        c = (1.0 - 1.0 / p) * (self.alpha * p) ** (-1.0 / (p - 1.0))
        return Power(q, c)


@dataclass(frozen=True)
class NegLog(ScalarFun):
    """``-alpha * log(xi)`` on ``xi > 0``."""

    alpha: float = 1.0
    kind = "neg_log"

    def __post_init__(self):
        object.__setattr__(self, "alpha", _positive("alpha", self.alpha))

    def value(self, xi):
        xi = np.asarray(xi, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            v = -self.alpha * np.log(np.where(xi > 0, xi, 1.0))
        return np.where(xi > 0, v, np.inf)

    def scaled(self, gamma):
        return NegLog(gamma * self.alpha)

    def _prox(self, xi):
        r = np.sqrt(xi * xi + 4.0 * self.alpha)
        with np.errstate(divide="ignore", invalid="ignore"):
            neg = 2.0 * self.alpha / (r - xi)
        return np.where(xi >= 0, 0.5 * (xi + r), neg)

    def subdiff_at_zero(self):
        raise CatalogError("neg_log: 0 is outside the domain")

    @property
    def is_even(self):
        return False

    def conj_value(self, u):
        u = np.asarray(u, dtype=float)
        a = self.alpha
        with np.errstate(divide="ignore", invalid="ignore"):
            v = -a + a * np.log(a / np.where(u < 0, -u, 1.0))
        return np.where(u < 0, v, np.inf)


@dataclass(frozen=True)
class LogBarrier(ScalarFun):
    """``weight * (log(omega) - log(omega - |xi|))`` on ``|xi| < omega``."""

    omega: float = 1.0
    weight: float = 1.0
    kind = "log_barrier"

    def __post_init__(self):
        object.__setattr__(self, "omega", _positive("omega", self.omega))
        object.__setattr__(self, "weight", _positive("weight", self.weight))

    def value(self, xi):
        t = np.abs(np.asarray(xi, dtype=float))
        inside = t < self.omega
        with np.errstate(divide="ignore", invalid="ignore"):
            v = self.weight * (np.log(self.omega) - np.log(np.where(inside, self.omega - t, 1.0)))
        return np.where(inside, v, np.inf)

    def scaled(self, gamma):
        return LogBarrier(self.omega, gamma * self.weight)

    def _prox(self, xi):
        w, om = self.weight, self.omega
        t = np.abs(xi)
        a = t + om
        b = np.sqrt((t - om) ** 2 + 4.0 * w)
        y = 2.0 * (t * om - w) / (a + b)
        return np.where(t > w / om, np.sign(xi) * y, 0.0)

    def subdiff_at_zero(self):
        g = self.weight / self.omega
        return (-g, g)

    def conj_value(self, u):
        t = np.abs(np.asarray(u, dtype=float)) * self.omega / self.weight
        with np.errstate(divide="ignore", invalid="ignore"):
            v = self.weight * (t - 1.0 - np.log(np.where(t > 1, t, 1.0)))
        return np.where(t > 1, v, 0.0)


@dataclass(frozen=True)
class Huber(ScalarFun):
    """Quadratic ``tau xi^2`` near zero, linear with slope ``omega sqrt(2 tau)`` beyond."""

    omega: float = 1.0
    tau: float = 1.0
    kind = "huber"

    def __post_init__(self):
        object.__setattr__(self, "omega", _positive("omega", self.omega))
        object.__setattr__(self, "tau", _positive("tau", self.tau))

    @property
    def slope(self):
        return self.omega * np.sqrt(2.0 * self.tau)

    def value(self, xi):
        t = np.abs(np.asarray(xi, dtype=float))
        knee = self.omega / np.sqrt(2.0 * self.tau)
        return np.where(t <= knee, self.tau * t * t, self.slope * t - 0.5 * self.omega**2)

    def scaled(self, gamma):
        return Huber(self.omega * np.sqrt(gamma), gamma * self.tau)

    def _prox(self, xi):
        thr = self.omega * (2.0 * self.tau + 1.0) / np.sqrt(2.0 * self.tau)
        return np.where(np.abs(xi) <= thr, xi / (2.0 * self.tau + 1.0), xi - self.slope * np.sign(xi))

    def subdiff_at_zero(self):
        return (0.0, 0.0)

    def conjugate(self):
        s = self.slope
        return PlusIndicatorInterval(Power(2.0, 1.0 / (4.0 * self.tau)), -s, s)


@dataclass(frozen=True)
class ZeroFun(ScalarFun):
    kind = "zero"

    def value(self, xi):
        return np.zeros_like(np.asarray(xi, dtype=float))

    def scaled(self, gamma):
        return self

    def _prox(self, xi):
        return np.array(xi, dtype=float)

    def subdiff_at_zero(self):
        return (0.0, 0.0)

    def argmin_max(self):
        raise CatalogError("zero: Argmin is the whole line (unbounded)")

    def conjugate(self):
        return PlusIndicatorInterval(ZeroFun(), 0.0, 0.0)


def _interval(lo, hi):
    lo, hi = float(lo), float(hi)
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
        raise CatalogError(f"invalid interval [{lo}, {hi}]")
    return lo, hi


@dataclass(frozen=True)
class PlusSupportInterval(ScalarFun):
    """``base + sigma_[lo, hi]``; ``base`` must be differentiable at 0 with zero slope."""

    base: ScalarFun
    lo: float
    hi: float
    kind = "plus_support_interval"

    def __post_init__(self):
        lo, hi = _interval(self.lo, self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        try:
            sd = self.base.subdiff_at_zero()
        except CatalogError as exc:
            raise CatalogError(f"plus_support_interval base: {exc}") from None
        if sd != (0.0, 0.0):
            raise CatalogError("plus_support_interval needs a base with derivative 0 at 0")

    def value(self, xi):
        xi = np.asarray(xi, dtype=float)
        return self.base.value(xi) + np.maximum(self.lo * xi, self.hi * xi)

    def scaled(self, gamma):
        return PlusSupportInterval(self.base.scaled(gamma), gamma * self.lo, gamma * self.hi)

    def _prox(self, xi):
        return np.asarray(self.base._prox(soft_interval(xi, self.lo, self.hi)))

    def subdiff_at_zero(self):
        return (self.lo, self.hi)

    @property
    def is_even(self):
        return self.base.is_even and self.lo == -self.hi

    def argmin_max(self):
        if not self.is_even:
            raise CatalogError("plus_support_interval: max Argmin only for even instances")
        if isinstance(self.base, ZeroFun) and self.hi == 0.0:
            raise CatalogError("plus_support_interval: function is constant")
        return 0.0

    def conjugate(self):
        if isinstance(self.base, ZeroFun):
            return PlusIndicatorInterval(ZeroFun(), self.lo, self.hi)
        return None

    def conj_value(self, u):
        # base* is minimal at 0, so the infimal convolution with the interval
        # indicator reduces to base*(soft(u))
        return self.base.conj_value(soft_interval(u, self.lo, self.hi))


@dataclass(frozen=True)
class PlusIndicatorInterval(ScalarFun):
    """``base`` restricted to the closed interval ``[lo, hi]``."""

    base: ScalarFun
    lo: float
    hi: float
    kind = "plus_indicator_interval"

    def __post_init__(self):
        lo, hi = _interval(self.lo, self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        probe = np.linspace(lo, hi, 9)
        if not np.any(np.isfinite(self.base.value(probe))):
            raise CatalogError("interval does not meet the domain of the base function")

    def value(self, xi):
        # endpoints carry the same relative slack as set indicators
        xi = np.asarray(xi, dtype=float)
        inside = (xi >= self.lo - INTERVAL_TOL * (1.0 + abs(self.lo))) & (xi <= self.hi + INTERVAL_TOL * (1.0 + abs(self.hi)))
        with np.errstate(invalid="ignore"):
            return np.where(inside, self.base.value(np.clip(xi, self.lo, self.hi)), np.inf)

    def scaled(self, gamma):
        return PlusIndicatorInterval(self.base.scaled(gamma), self.lo, self.hi)

    def _prox(self, xi):
        return np.clip(self.base._prox(xi), self.lo, self.hi)

    def subdiff_at_zero(self):
        if not self.lo <= 0.0 <= self.hi:
            raise CatalogError("plus_indicator_interval: 0 is outside the interval")
        blo, bhi = self.base.subdiff_at_zero()
        return (-np.inf if self.lo == 0.0 else blo, np.inf if self.hi == 0.0 else bhi)

    @property
    def is_even(self):
        return self.base.is_even and self.lo == -self.hi

    def argmin_max(self):
        if isinstance(self.base, ZeroFun):
            return self.hi
        return super().argmin_max()

    @property
    def is_indicator_of_zero(self):
        return self.lo == 0.0 and self.hi == 0.0

    def conjugate(self):
        if isinstance(self.base, ZeroFun):
            return PlusSupportInterval(ZeroFun(), self.lo, self.hi)
        if isinstance(self.base, Power) and self.base.p == 2.0 and self.lo == -self.hi and self.hi > 0:
            tau = 1.0 / (4.0 * self.base.alpha)
            return Huber(self.hi / np.sqrt(2.0 * tau), tau)
        return None


def scalar_prox(phi, gamma, xi):
    """Minimizer of ``phi(y) + (xi - y)**2 / (2 gamma)``."""
    if not isinstance(phi, ScalarFun):
        raise CatalogError(f"unsupported scalar function {phi!r}")
    gamma = float(gamma)
    if not gamma > 0 or not np.isfinite(gamma):
        raise InputError("gamma must be positive")
    xi = float(xi)
    if not np.isfinite(xi):
        raise InputError("xi must be finite")
    return float(phi.prox(xi, gamma))
