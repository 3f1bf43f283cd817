"""Pointwise principal-value evaluation of the regional and full fractional Laplacians.

The singular part is handled by folding the integral symmetrically around ``x``::

    p.v. int (u(x) - u(y)) |x - y|^{-1-2s} dy
        = int_0^rho (2u(x) - u(x+h) - u(x-h)) h^{-1-2s} dh + (one-sided remainder)

and excising ``(0, eps)`` from the folded integral, where the Taylor expansion
``2u(x) - u(x+h) - u(x-h) = -u'' h^2 - u'''' h^4 / 12 + O(h^6)`` is integrated
exactly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.integrate import IntegrationWarning

from .constants import a_s, as_order, c_ns
from .fields import ScalarField
from .mesh import Domain1D, delta


class QuadratureError(ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance."""


class BoundaryPointError(ValueError):
    """Evaluation point lies on, or too close to, the boundary."""


@dataclass(frozen=True)
class QuadSpec:
    eps: Optional[float] = None       # excision radius; None -> min(1e-3, delta/8)
    tol: float = 1e-12                # absolute tolerance per adaptive integral
    tail_radius: float = 1e4          # numerical/analytic split for infinite domains
    limit: int = 500

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")
        if self.eps is not None and self.eps <= 0:
            raise ValueError("excision radius must be positive")


class FlapValue(NamedTuple):
    value: float
    error: float


def _quad(f, lo, hi, q: QuadSpec, points=None):
    if hi <= lo:
        return 0.0, 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            kw = dict(epsabs=q.tol, epsrel=1e-13, limit=q.limit)
            if points is not None and math.isfinite(lo) and math.isfinite(hi):
                pts = [p for p in points if lo < p < hi]
                if pts:
                    kw["points"] = pts
            val, err = integrate.quad(f, lo, hi, **kw)
        except IntegrationWarning as exc:
            raise QuadratureError(f"adaptive quadrature on [{lo}, {hi}] failed: {exc}") from None
    return val, err


def power_tail_integral(x: float, X: float, power: float, s: float) -> FlapValue:
    """``int_X^inf y^power (y - x)^{-1-2s} dy`` for ``X > |x|`` by its binomial series."""
    if power >= 2 * s:
        raise ValueError(f"tail power {power} must be below 2s = {2 * s}")
    if not X > abs(x):
        raise ValueError("series needs X > |x|")
    r = x / X
    total, coef, k = 0.0, 1.0, 0
    term = math.inf
    while k < 2000:
        term = coef * r ** k / (2 * s + k - power)
        total += term
        if abs(term) < 1e-17 * abs(total) and k > 2:
            break
        coef *= (1 + 2 * s + k) / (k + 1)
        k += 1
    scale = X ** (power - 2 * s)
    return FlapValue(scale * total, scale * abs(term) * 2)


def _one_sided(u: ScalarField, x: float, ux: float, lo: float, hi: float, s: float, q: QuadSpec):
    f = lambda y: (ux - u.scalar(y)) * abs(x - y) ** (-1.0 - 2.0 * s)
    return _quad(f, lo, hi, q, points=(0.0,))


def _right_tail(u: ScalarField, x: float, ux: float, X: float, s: float) -> FlapValue:
    # int_X^inf (u(x) - u(y)) (y - x)^{-1-2s} dy with u exact power beyond X
    tail = u.tail
    base = ux * (X - x) ** (-2 * s) / (2 * s)
    if tail.right == 0.0:
        return FlapValue(base, 0.0)
    t = power_tail_integral(x, X, tail.power, s)
    return FlapValue(base - tail.right * t.value, abs(tail.right) * t.error)


def _left_tail(u: ScalarField, x: float, ux: float, X: float, s: float) -> FlapValue:
    tail = u.tail
    base = ux * (X + x) ** (-2 * s) / (2 * s)
    if tail.left == 0.0:
        return FlapValue(base, 0.0)
    t = power_tail_integral(-x, X, tail.power, s)
    return FlapValue(base - tail.left * t.value, abs(tail.left) * t.error)


def _core(u: ScalarField, x: float, rho: float, eps: float, s: float):
    """Excised contribution ``int_0^eps (2u(x) - u(x+h) - u(x-h)) h^{-1-2s} dh``."""
    h2, h4 = 4e-3 * rho, 5e-2 * rho
    d2 = u.second_derivative(x, h2)
    d4 = u.fourth_derivative(x, h4)
    t2 = -d2 * eps ** (2 - 2 * s) / (2 - 2 * s)
    t4 = -d4 * eps ** (4 - 2 * s) / (12 * (4 - 2 * s))
    # sixth-order remainder, assuming each derivative costs a factor ~1/rho
    err = abs(t4) * (eps / rho) ** 2
    if u.d2 is None:
        err += abs(d2 - u.second_derivative(x, 2 * h2)) * eps ** (2 - 2 * s) / (2 - 2 * s)
    return t2 + t4, err


def _fold(u: ScalarField, x: float, ux: float, eps: float, rho: float, s: float, q: QuadSpec):
    def g(h):
        return (2 * ux - u.scalar(x + h) - u.scalar(x - h)) * h ** (-1.0 - 2.0 * s)

    return _quad(g, eps, rho, q)


def regional_flap(u: ScalarField, dom: Domain1D, x: float, s, q: QuadSpec = QuadSpec()) -> FlapValue:
    """Regional fractional Laplacian ``c_{1,s} p.v. int_dom (u(x)-u(y))|x-y|^{-1-2s} dy``.

    On ``Domain1D.line()`` this is the standard fractional Laplacian. Returns the
    value together with an absolute error estimate.
    """
    s = as_order(s)
    x = float(x)
    if not dom.contains(x):
        raise BoundaryPointError(f"x={x} is not interior to {dom}")
    if dom.kind != "interval" and u.tail is None:
        raise ValueError("a tail descriptor is required on unbounded domains")

    if dom.kind == "line":
        # both tail starts x +/- rho must clear |x| and the tail radius
        rho = u.tail.radius + 2 * abs(x) + 1.0
    else:
        rho = delta(dom, x)
    eps = q.eps if q.eps is not None else min(1e-3, rho / 8)
    if dom.kind != "line" and rho < 4 * eps:
        raise BoundaryPointError(f"x={x} within 4*eps of the boundary (delta={rho}, eps={eps})")

    ux = u.scalar(x)
    core, core_err = _core(u, x, min(rho, 1.0) if dom.kind == "line" else rho, eps, s)
    fold, fold_err = _fold(u, x, ux, eps, rho, s, q)
    total, err = core + fold, core_err + fold_err

    if dom.kind == "interval":
        lo_val, lo_err = _one_sided(u, x, ux, dom.a, x - rho, s, q)
        hi_val, hi_err = _one_sided(u, x, ux, x + rho, dom.b, s, q)
        total += lo_val + hi_val
        err += lo_err + hi_err
    elif dom.kind == "halfline":
        X = max(q.tail_radius, u.tail.radius, 4 * x)
        mid, mid_err = _one_sided(u, x, ux, x + rho, X, s, q)
        tail = _right_tail(u, x, ux, X, s)
        total += mid + tail.value
        err += mid_err + tail.error
    else:
        # beyond x +/- rho the field is an exact power on both sides
        right = _right_tail(u, x, ux, x + rho, s)
        left = _left_tail(u, x, ux, rho - x, s)
        total += right.value + left.value
        err += right.error + left.error

    c = c_ns(1, s)
    return FlapValue(c * total, c * err)


def full_flap(u: ScalarField, x: float, s, q: QuadSpec = QuadSpec()) -> FlapValue:
    """Standard fractional Laplacian on the line (``u`` smooth near ``x``, with tail)."""
    return regional_flap(u, Domain1D.line(), x, s, q)


def full_flap_zero_ext(u: ScalarField, x: float, s, q: QuadSpec = QuadSpec()) -> FlapValue:
    """Fractional Laplacian of the zero extension of a half-line field, at ``x > 0``.

    The half-line part reuses :func:`regional_flap`; the contribution of the
    negative half-line is integrated numerically, independently of the closed
    form ``a_s x^{-2s}``.
    """
    s = as_order(s)
    if not x > 0:
        raise BoundaryPointError("x must be positive")
    reg = regional_flap(u, Domain1D.halfline(), x, s, q)
    ux = u.scalar(x)
    # int_{-inf}^0 (x - y)^{-1-2s} dy, substituted y = -z
    kill, kill_err = _quad(lambda z: (x + z) ** (-1.0 - 2.0 * s), 0.0, math.inf, q)
    c = c_ns(1, s)
    return FlapValue(reg.value + c * ux * kill, reg.error + c * abs(ux) * kill_err)


def killing_potential(x, s):
    """``a_s x^{-2s}``: the potential added to the regional operator by zero extension."""
    s = as_order(s)
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("killing potential is defined for x > 0")
    out = a_s(s) * x ** (-2.0 * s)
    return float(out) if out.ndim == 0 else out


def regional_flap_many(u: ScalarField, dom: Domain1D, xs: Sequence[float], s,
                       q: QuadSpec = QuadSpec()) -> np.ndarray:
    """Values of :func:`regional_flap` at several points (errors discarded)."""
    return np.array([regional_flap(u, dom, x, s, q).value for x in xs])
