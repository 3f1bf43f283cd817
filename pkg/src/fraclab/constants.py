"""Scalar constants attached to the regional and censored fractional Laplacians.

All functions take ``s`` either as a float or a :class:`FracOrder` and are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import gamma, gammaln


@dataclass(frozen=True)
class FracOrder:
    """Fractional exponent ``s`` restricted to the open interval (0, 1)."""

    s: float

    def __post_init__(self):
        s = float(self.s)
        if not (0.0 < s < 1.0) or math.isnan(s):
            raise ValueError(f"fractional order must lie in (0, 1), got {self.s!r}")
        object.__setattr__(self, "s", s)

    @property
    def regime(self) -> str:
        if self.s < 0.5:
            return "subcritical"
        if self.s == 0.5:
            return "critical"
        return "supercritical"

    def __float__(self):
        return self.s


def as_order(s) -> float:
    """Validate ``s`` and return it as a float."""
    if isinstance(s, FracOrder):
        return s.s
    return FracOrder(s).s


def c_ns(N: int, s) -> float:
    """Normalising constant of the N-dimensional fractional Laplacian."""
    if int(N) != N or N < 1:
        raise ValueError(f"dimension must be a positive integer, got {N!r}")
    s = as_order(s)
    # log form keeps Gamma(1 - s) finite as s -> 1
    log_c = (math.log(s) + s * math.log(4.0) + gammaln(N / 2 + s)
             - (N / 2) * math.log(math.pi) - gammaln(1.0 - s))
    return math.exp(log_c)


def a_s(s) -> float:
    """Amplitude of the killing potential ``a_s x^{-2s}`` on the half-line."""
    s = as_order(s)
    return c_ns(1, s) / (2.0 * s)


def b_s(s) -> float:
    """Normaliser of the Poisson kernel ``b_s t^{2s} / |z|^{1+2s}``."""
    s = as_order(s)
    return gamma(s + 0.5) / (math.sqrt(math.pi) * gamma(s))


def kappa_bar(s) -> float:
    """Flux constant of the half-plane extension, fixed as ``b_s / a_s``."""
    s = as_order(s)
    return b_s(s) / a_s(s)


def hardy_constant(s) -> float:
    """Sharp constant of the fractional Hardy inequality on the line."""
    s = as_order(s)
    return gamma(s + 0.5) ** 2 / math.pi


def _mu_integrand_pieces(gam, s):
    e2 = 2.0 * s - 1.0 - gam
    # t = v^m flattens the algebraic endpoint behaviour at t = 0
    m = 2.0 / (1.0 + min(0.0, gam, e2))

    def lower(v):
        if v == 0.0:
            return 0.0
        t = v ** m
        # (t^g - 1)(1 - t^e2) dt expanded termwise, Jacobian folded into each power
        num = sum(sign * v ** (m * (p + 1.0) - 1.0) for sign, p in
                  ((1.0, gam), (-1.0, 2.0 * s - 1.0), (-1.0, 0.0), (1.0, e2)))
        return m * num / (1.0 - t) ** (1.0 + 2.0 * s)

    def upper(tau):
        # t = 1 - tau^2 on [1/2, 1); both numerator factors are O(tau^2)
        if tau == 0.0:
            return 0.0
        log_t = math.log1p(-tau * tau)
        num = math.expm1(gam * log_t) * (-math.expm1(e2 * log_t))
        return 2.0 * num * tau ** (-1.0 - 4.0 * s)

    return lower, upper, 0.5 ** (1.0 / m)


def mu(gam: float, s) -> float:
    """Multiplier ``mu(gamma, s)`` of ``x^gamma`` under the half-line regional operator.

    ``(-Delta)^s_{R+} x^gamma = -mu(gamma, s) x^{gamma - 2s}`` for ``gamma`` in (-1, 2s).
    """
    s = as_order(s)
    gam = float(gam)
    if not (-1.0 < gam < 2.0 * s):
        raise ValueError(f"gamma must lie in (-1, 2s) = (-1, {2 * s}), got {gam}")
    lower, upper, v_half = _mu_integrand_pieces(gam, s)
    opts = dict(epsabs=1e-13, epsrel=1e-12, limit=200)
    lo, _ = integrate.quad(lower, 0.0, v_half, **opts)
    hi, _ = integrate.quad(upper, 0.0, math.sqrt(0.5), **opts)
    return c_ns(1, s) * (lo + hi)


def gamma_n_limit(N: int, s_near_one: float = 1.0 - 1e-8) -> float:
    """Limit of ``c_{N,s} |B_1| / (2 (1 - s))`` as ``s -> 1``, evaluated just below 1."""
    if int(N) != N or N < 1:
        raise ValueError(f"dimension must be a positive integer, got {N!r}")
    ball = math.pi ** (N / 2) / gamma(N / 2 + 1)
    return c_ns(N, s_near_one) * ball / (2.0 * (1.0 - s_near_one))


@dataclass(frozen=True)
class ConstantsBundle:
    s: float
    N: int
    c_ns: float
    a_s: float
    b_s: float
    kappa_bar: float
    hardy: float

    @classmethod
    def for_order(cls, s, N: int = 1) -> "ConstantsBundle":
        s = as_order(s)
        return cls(s=s, N=N, c_ns=c_ns(N, s), a_s=a_s(s), b_s=b_s(s),
                   kappa_bar=kappa_bar(s), hardy=hardy_constant(s))

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("s", "N", "c_ns", "a_s", "b_s", "kappa_bar", "hardy")}

    def check(self) -> None:
        vals = np.array([self.c_ns, self.a_s, self.b_s, self.kappa_bar, self.hardy])
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
            raise ArithmeticError(f"non-positive or non-finite constant in {self}")
