"""Scalar fields on the line with optional derivative and power-tail metadata."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True)
class PowerTail:
    """Exact power law ``u(y) = right * y**power`` for ``y >= radius`` and
    ``u(y) = left * |y|**power`` for ``y <= -radius``."""

    power: float
    right: float = 1.0
    left: float = 0.0
    radius: float = 1.0

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("tail radius must be positive")


@dataclass(frozen=True)
class ScalarField:
    """Vectorised callback ``x -> u(x)``.

    ``d2`` and ``d4`` are optional exact second and fourth derivatives; when
    absent they are obtained by finite differences. ``tail`` is required for
    evaluations that integrate to infinity.
    """

    func: Callable
    d2: Optional[Callable] = None
    d4: Optional[Callable] = None
    tail: Optional[PowerTail] = None
    name: str = "field"

    def __call__(self, x):
        return self.func(x)

    def scalar(self, x: float) -> float:
        return float(self.func(np.float64(x)))

    def second_derivative(self, x: float, h: float) -> float:
        if self.d2 is not None:
            return float(self.d2(np.float64(x)))
        return _fd_derivative(self.func, x, h, order=2)

    def fourth_derivative(self, x: float, h: float) -> float:
        if self.d4 is not None:
            return float(self.d4(np.float64(x)))
        return _fd_derivative(self.func, x, h, order=4)

    def __add__(self, other: "ScalarField") -> "ScalarField":
        return self.combine(1.0, other, 1.0)

    def combine(self, alpha: float, other: "ScalarField", beta: float) -> "ScalarField":
        """``alpha * self + beta * other``; exact derivatives survive only if both carry them."""
        d2 = d4 = None
        if self.d2 is not None and other.d2 is not None:
            d2 = lambda x, f=self.d2, g=other.d2: alpha * f(x) + beta * g(x)
        if self.d4 is not None and other.d4 is not None:
            d4 = lambda x, f=self.d4, g=other.d4: alpha * f(x) + beta * g(x)
        tail = None
        if self.tail is not None and other.tail is not None:
            t1, t2 = self.tail, other.tail
            r = max(t1.radius, t2.radius)
            if t1.power == t2.power:
                tail = PowerTail(t1.power, alpha * t1.right + beta * t2.right,
                                 alpha * t1.left + beta * t2.left, r)
            elif t1.right == t1.left == 0.0:
                tail = PowerTail(t2.power, beta * t2.right, beta * t2.left, r)
            elif t2.right == t2.left == 0.0:
                tail = PowerTail(t1.power, alpha * t1.right, alpha * t1.left, r)
        return ScalarField(lambda x, f=self.func, g=other.func: alpha * f(x) + beta * g(x),
                           d2=d2, d4=d4, tail=tail, name=f"{alpha}*{self.name}+{beta}*{other.name}")


def _fd_derivative(func, x, h, order):
    # fourth-order accurate central stencils
    k = np.arange(-3, 4, dtype=float)
    vals = np.asarray(func(x + k * h), dtype=float)
    if order == 2:
        w = np.array([0, -1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12, 0])
        return float(w @ vals) / h ** 2
    w = np.array([-1 / 6, 2, -13 / 2, 28 / 3, -13 / 2, 2, -1 / 6])
    return float(w @ vals) / h ** 4


def omega_gamma(gam: float) -> ScalarField:
    """``x^gamma`` on ``(0, inf)`` extended by zero."""
    if gam <= -1:
        raise ValueError(f"gamma must exceed -1, got {gam}")
    gam = float(gam)

    def f(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(x > 0, np.abs(x) ** gam, 0.0)

    def d2(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(x > 0, gam * (gam - 1) * np.abs(x) ** (gam - 2), 0.0)

    def d4(x):
        x = np.asarray(x, dtype=float)
        c = gam * (gam - 1) * (gam - 2) * (gam - 3)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(x > 0, c * np.abs(x) ** (gam - 4), 0.0)

    return ScalarField(f, d2=d2, d4=d4, tail=PowerTail(gam, 1.0, 0.0, 1e-300),
                       name=f"omega_{gam:g}")


def constant(value: float = 1.0) -> ScalarField:
    zero = lambda x: np.zeros_like(np.asarray(x, dtype=float))
    return ScalarField(lambda x: np.full_like(np.asarray(x, dtype=float), value),
                       d2=zero, d4=zero, tail=PowerTail(0.0, value, value, 1e-300),
                       name=f"const_{value:g}")


def bump(center: float = 0.0, width: float = 1.0, height: float = 1.0) -> ScalarField:
    """Smooth compactly supported ``height * exp(1 - 1/(1 - r^2))`` with ``r = (x - center)/width``."""

    def f(x):
        r = (np.asarray(x, dtype=float) - center) / width
        inside = np.abs(r) < 1
        out = np.zeros_like(r)
        out[inside] = height * np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
        return out if out.ndim else float(out)

    return ScalarField(f, tail=PowerTail(0.0, 0.0, 0.0, abs(center) + width),
                       name=f"bump_{center:g}_{width:g}")


def gaussian(center: float = 0.0, scale: float = 1.0) -> ScalarField:
    def f(x):
        r = (np.asarray(x, dtype=float) - center) / scale
        return np.exp(-r * r)

    def d2(x):
        r = (np.asarray(x, dtype=float) - center) / scale
        return (4 * r * r - 2) * np.exp(-r * r) / scale ** 2

    def d4(x):
        r = (np.asarray(x, dtype=float) - center) / scale
        return (16 * r ** 4 - 48 * r * r + 12) * np.exp(-r * r) / scale ** 4

    # exp(-r^2) underflows below the double range beyond r = 28
    return ScalarField(f, d2=d2, d4=d4, tail=PowerTail(0.0, 0.0, 0.0, abs(center) + 28 * scale),
                       name=f"gauss_{center:g}_{scale:g}")


def from_callable(func: Callable, name: str = "callable", tail: Optional[PowerTail] = None) -> ScalarField:
    return ScalarField(lambda x: np.asarray(func(np.asarray(x, dtype=float)), dtype=float),
                       tail=tail, name=name)


def polynomial(coeffs) -> ScalarField:
    """Polynomial with coefficients in increasing degree (for interval use only)."""
    p = np.polynomial.Polynomial(coeffs)
    p2, p4 = p.deriv(2), p.deriv(4)
    return ScalarField(lambda x: p(np.asarray(x, dtype=float)),
                       d2=lambda x: p2(np.asarray(x, dtype=float)),
                       d4=lambda x: p4(np.asarray(x, dtype=float)),
                       name=f"poly{len(coeffs) - 1}")


def _pow_diff(p, q, e):
    """``(p^e - q^e) / e`` for ``p, q > 0``, continuous through ``e = 0``."""
    lp, lq = np.log(p), np.log(q)
    if e == 0:
        return lp - lq
    return (np.expm1(e * lp) - np.expm1(e * lq)) / e


def manufactured(s: float, a: float = -1.0, b: float = 1.0):
    """Data for the exact solution ``u*(x) = (x - a)(b - x)`` of the censored problem on (a, b).

    Returns ``(f, u_star)`` with ``f`` the regional fractional Laplacian of ``u*``
    in closed form: writing ``u(x) - u(y) = -u'(x)(y - x) + (y - x)^2``, the odd
    part integrates to a difference of powers and the even part to a sum.
    """
    from .constants import c_ns

    c = c_ns(1, s)

    def f(x):
        x = np.asarray(x, dtype=float)
        p, q = b - x, x - a
        odd = -(a + b - 2 * x) * _pow_diff(p, q, 1 - 2 * s)
        even = (p ** (2 - 2 * s) + q ** (2 - 2 * s)) / (2 - 2 * s)
        return c * (odd + even)

    u_star = lambda x: (np.asarray(x, dtype=float) - a) * (b - np.asarray(x, dtype=float))
    return ScalarField(f, name=f"manufactured_{s:g}"), u_star


def builtin(name: str, s: Optional[float] = None, a: float = -1.0, b: float = 1.0) -> ScalarField:
    """Named right-hand sides used by the experiment runner.

    ``manufactured`` depends on ``s`` and the interval ``(a, b)``.
    """
    if name == "manufactured":
        if s is None:
            raise ValueError("the manufactured right-hand side needs s")
        return manufactured(s, a, b)[0]
    if name == "const1":
        return constant(1.0)
    if name == "zero":
        return constant(0.0)
    if name == "linear":
        return polynomial([0.0, 1.0])
    if name == "sine":
        return ScalarField(lambda x: np.sin(math.pi * np.asarray(x, dtype=float)),
                           d2=lambda x: -math.pi ** 2 * np.sin(math.pi * np.asarray(x, dtype=float)),
                           d4=lambda x: math.pi ** 4 * np.sin(math.pi * np.asarray(x, dtype=float)),
                           name="sine")
    raise KeyError(f"unknown built-in field {name!r}")
