"""Poisson (Caffarelli-Silvestre) extension to the upper half-plane.

    w(x, t) = b_s t^{2s} int u(y) ((x - y)^2 + t^2)^{-(1+2s)/2} dy

``div(t^{1-2s} grad w) = 0`` in ``t > 0`` and ``-t^{1-2s} dw/dt -> kappa_bar (-Delta)^s u``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .constants import as_order, b_s, kappa_bar
from .fields import ScalarField, omega_gamma
from .operator1d import QuadSpec, _quad, power_tail_integral

_NEAR = 10.0   # near field |y - x| <= _NEAR * t


@dataclass(frozen=True)
class HalfPlanePoint:
    x: float
    t: float

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError(f"half-plane point needs t > 0, got {self.t}")

    @classmethod
    def polar(cls, r: float, theta: float) -> "HalfPlanePoint":
        return cls(r * math.cos(theta), r * math.sin(theta))


class ExtrapolationError(ArithmeticError):
    """Richardson extrapolation did not settle."""


def _check_tail(u: ScalarField, s: float):
    if u.tail is None:
        raise ValueError("a tail descriptor is required for the extension")
    if (u.tail.right != 0.0 or u.tail.left != 0.0) and u.tail.power >= 2 * s:
        raise ValueError(f"tail power {u.tail.power} >= 2s = {2 * s}: extension integral diverges")


def _gegenbauer_tail(x: float, t: float, Y: float, power: float, s: float) -> float:
    """``int_Y^inf y^power ((y - x)^2 + t^2)^{-(1+2s)/2} dy`` for ``Y >= 2 sqrt(x^2 + t^2)``.

    Expands the kernel with the Gegenbauer generating function in ``r / y``.
    """
    a = 0.5 + s
    r = math.hypot(x, t)
    z = x / r if r > 0 else 0.0
    q = r / Y
    c_prev, c = 1.0, 2 * a * z
    bound = 2 * a            # C_k(1) bounds |C_k(z)|; odd terms vanish at z = 0
    total = 1.0 / (2 * s - power)
    qk = 1.0
    for k in range(1, 400):
        qk *= q
        total += c * qk / (2 * s + k - power)
        if bound * qk < 1e-17 * abs(total) * (2 * s + k - power):
            break
        c_prev, c = c, (2 * z * (k + a) * c - (k + 2 * a - 1) * c_prev) / (k + 1)
        bound *= (k + 2 * a) / (k + 1)
    return total * Y ** (power - 2 * s)


def _span(u: ScalarField, x: float, t: float):
    """Integration limits ``(lo, hi)`` beyond which ``u`` is an exact power."""
    r = math.hypot(x, t)
    R = max(u.tail.radius, 2 * r, abs(x) + _NEAR * t)
    return -R, R


def poisson_extend(u: ScalarField, p: HalfPlanePoint, s, tol: float = 1e-12) -> float:
    """Value of the extension of ``u`` at ``p``; absolute error about ``tol``."""
    s = as_order(s)
    _check_tail(u, s)
    x, t = float(p.x), float(p.t)
    a = 0.5 + s
    q = QuadSpec(tol=tol, limit=1000)
    lo, hi = _span(u, x, t)
    kern = lambda y: u.scalar(y) * ((y - x) ** 2 + t * t) ** (-a)
    pts = sorted({0.0, x - _NEAR * t, x, x + _NEAR * t})
    edges = [lo] + [v for v in pts if lo < v < hi] + [hi]
    # t^{2s} inside the integrand keeps the near-field mass O(1)
    scale = t ** (2 * s)
    total = 0.0
    for l, r in zip(edges[:-1], edges[1:]):
        total += _quad(lambda y: kern(y) * scale, l, r, q)[0]
    tail = u.tail
    if tail.right != 0.0:
        total += scale * tail.right * _gegenbauer_tail(x, t, hi, tail.power, s)
    if tail.left != 0.0:
        total += scale * tail.left * _gegenbauer_tail(-x, t, -lo, tail.power, s)
    return b_s(s) * total


def w_gamma(gam: float, p: HalfPlanePoint, s) -> float:
    """Extension of ``x^gamma 1_{x>0}``; requires ``-1 < gamma < 2s``."""
    s = as_order(s)
    if not -1 < gam < 2 * s:
        raise ValueError(f"gamma={gam} outside (-1, 2s)")
    return poisson_extend(omega_gamma(gam), p, s)


class FluxResult(NamedTuple):
    value: float
    error: float
    exponents: tuple            # correction exponents eliminated, smallest first
    raw: np.ndarray             # t^{1-2s} dw/dt on the t-sequence


def _binom_neg(a: float, j: int) -> float:
    """Binomial coefficient ``binom(-a, j)``."""
    out = 1.0
    for i in range(j):
        out *= (-a - i) / (i + 1)
    return out


def weighted_flux(u: ScalarField, x0: float, t: float, s, tol: float = 1e-13) -> float:
    """``t^{1-2s} dw/dt`` at ``(x0, t)``, from the t-derivative of the Poisson kernel."""
    s = as_order(s)
    _check_tail(u, s)
    a = 0.5 + s
    ux = u.scalar(x0)
    P = u.tail.radius + 2 * abs(x0) + 1.0

    def ker(rho):
        d = rho * rho + t * t
        return 2 * s * d ** (-a) - (1 + 2 * s) * t * t * d ** (-a - 1)

    g = lambda rho: (u.scalar(x0 + rho) + u.scalar(x0 - rho) - 2 * ux) * ker(rho)
    # the fold loses ~eps * u relative digits against a kernel of size t^{-1-2s}
    q = QuadSpec(tol=tol * max(1.0, t ** (-2 * s)), limit=1000)
    pts = sorted({_NEAR * t, abs(x0)} | {abs(v - x0) for v in (u.tail.radius, -u.tail.radius)})
    edges = [0.0] + [v for v in pts if 0 < v < P] + [P]
    total = 0.0
    for l, r in zip(edges[:-1], edges[1:]):
        total += _quad(g, l, r, q)[0]

    # beyond P: expand the kernel in (t / rho)^2 and integrate the power tails exactly
    tail = u.tail
    for j in range(0, 30):
        cj = 2 * s * _binom_neg(a, j) - ((1 + 2 * s) * _binom_neg(a + 1, j - 1) if j else 0.0)
        sj = s + j
        piece = -2 * ux * P ** (-2 * sj) / (2 * sj)
        if tail.right != 0.0:
            piece += tail.right * power_tail_integral(x0, x0 + P, tail.power, sj).value
        if tail.left != 0.0:
            piece += tail.left * power_tail_integral(-x0, P - x0, tail.power, sj).value
        term = cj * t ** (2 * j) * piece
        total += term
        if j > 1 and abs(term) < 1e-17 * max(abs(total), 1e-300):
            break
    return b_s(s) * total


def _richardson(ts: np.ndarray, vals: np.ndarray, exponents: Sequence[float]):
    """Eliminate ``t^e`` corrections in turn on a geometric sequence of ratio 2."""
    table = [np.asarray(vals, dtype=float)]
    for e in exponents:
        prev = table[-1]
        f = 2.0 ** e
        # prev[i] at t_i, prev[i+1] at t_i / 2
        table.append((f * prev[1:] - prev[:-1]) / (f - 1.0))
        if len(table[-1]) < 2:
            break
    return table


def extension_flux(u: ScalarField, x0: float, s, ks: Sequence[int] = range(3, 13)) -> FluxResult:
    """``lim_{t->0} t^{1-2s} dw/dt`` at ``x0``; equals ``-kappa_bar (-Delta)^s u(x0)``.

    Evaluated at ``t = 2^{-k}`` and Richardson-extrapolated over the correction
    exponents ``2k - 2s`` (near field) and ``2k`` (far field).
    """
    s = as_order(s)
    ts = np.array([2.0 ** (-k) for k in ks])
    raw = np.array([weighted_flux(u, x0, t, s) for t in ts])
    exps = sorted({2 - 2 * s, 2.0, 4 - 2 * s, 4.0, 6 - 2 * s})
    used = exps[: len(ts) - 2]
    table = _richardson(ts, raw, used)
    best = table[-1]
    value = float(best[-1])
    err = float(abs(best[-1] - best[-2])) if len(best) > 1 else math.inf
    if not math.isfinite(value) or err > 1e-3 * max(1.0, abs(value)):
        raise ExtrapolationError(f"flux extrapolation unsettled: value {value}, spread {err}")
    return FluxResult(value, err, tuple(used), raw)


def weighted_harmonic_residual(u: ScalarField, p: HalfPlanePoint, s, h: float = 1e-3) -> float:
    """Five-point ``div(t^{1-2s} grad w)`` at ``p``, divided by the sum of the absolute stencil terms."""
    s = as_order(s)
    x, t = p.x, p.t
    if t <= h:
        raise ValueError("stencil leaves the half-plane")
    w = lambda xx, tt: poisson_extend(u, HalfPlanePoint(xx, tt), s, tol=1e-14)
    c = w(x, t)
    e = 1 - 2 * s
    up, dn = (t + h / 2) ** e, (t - h / 2) ** e
    terms = [t ** e * (w(x + h, t) - c), t ** e * (w(x - h, t) - c),
             up * (w(x, t + h) - c), dn * (w(x, t - h) - c)]
    return abs(sum(terms)) / sum(abs(v) for v in terms)
