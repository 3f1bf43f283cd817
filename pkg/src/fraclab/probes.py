"""Boundary-rate extraction from computed solutions.

All quantities are taken on the mesh nodes themselves. The probe window is
``[delta_min, 0.1 * R]`` where ``delta_min`` is the distance from the boundary
to the ``_LAYER``-th node (twenty elements, as on a uniform mesh) and ``R`` is
the domain radius: closer in, the discrete boundary layer pollutes the
solution, further out the far field does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import solve_banded

from .constants import as_order
from .fields import ScalarField
from .galerkin import (DIRICHLET, NEUMANN, SolveResult, assemble, l2_distance, solve_dirichlet,
                       solve_neumann)
from .mesh import GradedMesh

_LAYER = 20
_OUTER = 0.1
_FLAT = 1e-6                # exponents this close to 0 count as bounded


class WindowError(ValueError):
    """The mesh does not resolve enough of the boundary layer for a fit."""


@dataclass(frozen=True)
class RateFit:
    exponent: float
    constant: float
    window: Tuple[float, float]
    residual: float             # max relative deviation of the fitted power on the window
    count: int

    def __post_init__(self):
        if not self.window[0] < self.window[1]:
            raise ValueError("empty fit window")
        if self.count < 6:
            raise ValueError("a rate fit needs at least 6 points")


def fit_boundary_rate(samples) -> RateFit:
    """Least-squares ``log v = log C + alpha log delta`` on ``(delta, |v|)`` samples."""
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("samples must be (delta, value) pairs")
    d, v = arr[:, 0], np.abs(arr[:, 1])
    if np.any(d <= 0):
        raise ValueError("distances must be positive")
    nz = v > 0
    if np.count_nonzero(~nz) > 0.1 * len(v):
        raise WindowError(f"{np.count_nonzero(~nz)} of {len(v)} samples vanish")
    d, v = d[nz], v[nz]
    if len(d) < 6:
        raise WindowError(f"need at least 6 samples, got {len(d)}")
    slope, icpt = np.polyfit(np.log(d), np.log(v), 1)
    resid = float(np.max(np.abs(np.exp(icpt) * d ** slope / v - 1.0)))
    return RateFit(float(slope), float(math.exp(icpt)), (float(d.min()), float(d.max())),
                   resid, len(d))


def probe_window(mesh: GradedMesh) -> Tuple[float, float]:
    d = np.sort(np.minimum(mesh.nodes - mesh.nodes[0], mesh.nodes[-1] - mesh.nodes))
    # each distance appears twice (once per endpoint)
    if len(d) <= 2 * _LAYER:
        raise WindowError(f"{mesh.n} elements cannot resolve a {_LAYER}-element boundary layer")
    lo = d[2 * _LAYER]
    hi = _OUTER * mesh.radius
    if not lo < hi:
        raise WindowError(f"probe window [{lo:.3e}, {hi:.3e}] is empty; refine the mesh")
    return float(lo), float(hi)


def _side(mesh: GradedMesh, side: str, window):
    """Indices of window nodes on one side and their (exact) boundary distances."""
    x = mesh.nodes
    d = x - x[0] if side == "left" else x[-1] - x
    lo, hi = window
    idx = np.nonzero((d >= lo * (1 - 1e-12)) & (d <= hi))[0]
    idx = idx[np.argsort(d[idx])]
    return idx, d[idx]


def _geometric_pick(d: np.ndarray, hi: float) -> np.ndarray:
    """Positions of the nodes closest to ``hi / 2^k`` (distinct, increasing in k)."""
    picks = []
    target = hi
    while target >= d[0] * 0.75:
        j = int(np.argmin(np.abs(np.log(d / target))))
        if not picks or j != picks[-1]:
            picks.append(j)
        target *= 0.5
    return np.array(picks)


@dataclass(frozen=True)
class Extrapolated:
    value: float
    spread: float               # |difference| of the two most consistent extrapolants
    at: float                   # delta of the chosen pair


def _richardson_limit(d: np.ndarray, q: np.ndarray, order: float) -> Extrapolated:
    """Limit of ``q(delta) = L + c delta^order``, using pairs at consecutive geometric scales.

    Eliminates the leading correction on each pair with the exact node
    distances, then keeps the extrapolant whose neighbour agrees best.
    """
    if len(d) < 3:
        raise WindowError("need at least three scales to extrapolate")
    w1, w2 = d[:-1] ** order, d[1:] ** order
    ext = (q[1:] * w1 - q[:-1] * w2) / (w1 - w2)
    gaps = np.abs(np.diff(ext))
    k = int(np.argmin(gaps))
    return Extrapolated(float(ext[k]), float(gaps[k]), float(d[k]))


@dataclass
class TraceProbe:
    side: str
    trace: Extrapolated
    flatness: Optional[RateFit]          # fit of |r - trace| against delta
    exponent: Optional[RateFit]          # fit of |v| against delta
    window: Tuple[float, float]


def _ratio_samples(res: SolveResult, side: str, window):
    a = 2 * res.s - 1
    idx, d = _side(res.mesh, side, window)
    v = res.values[idx]
    return idx, d, v, v / d ** a


def dirichlet_boundary_ratio(res: SolveResult) -> Dict[str, TraceProbe]:
    """Endpoint limits of ``v / delta^{2s-1}`` with flatness and exponent fits, per side."""
    if res.bc != DIRICHLET:
        raise ValueError("boundary ratio is defined for Dirichlet solutions")
    window = probe_window(res.mesh)
    out = {}
    for side in ("left", "right"):
        idx, d, v, r = _ratio_samples(res, side, window)
        if len(d) < 6:
            raise WindowError(f"only {len(d)} nodes in the probe window on the {side}")
        if not np.any(v):
            out[side] = TraceProbe(side, Extrapolated(0.0, 0.0, float(d[0])), None, None, window)
            continue
        pick = _geometric_pick(d, window[1])
        trace = _richardson_limit(d[pick], r[pick], 1.0)
        dev = np.abs(r - trace.value)
        flat = None
        if np.count_nonzero(dev == 0) <= 0.1 * len(dev):
            flat = fit_boundary_rate(np.column_stack([d, dev]))
        out[side] = TraceProbe(side, trace, flat, fit_boundary_rate(np.column_stack([d, v])), window)
    return out


@dataclass
class GradientRelation:
    side: str
    status: str                      # "ok" or "zero-trace"
    weighted_gradient: Optional[Extrapolated]
    trace: Optional[Extrapolated]
    residual: Optional[float]        # |g - (2s-1) trace| / |(2s-1) trace|


def _inward_gradient(res: SolveResult, side: str, window):
    """``delta^{2-2s} dv/dn`` on each element, at the element midpoint, inward normal."""
    x, v = res.mesh.nodes, res.values
    slope = np.diff(v) / np.diff(x)
    mid = 0.5 * (x[:-1] + x[1:])
    if side == "left":
        d, g = mid - x[0], slope
    else:
        d, g = x[-1] - mid, -slope
    keep = (d >= window[0]) & (d <= window[1])
    order = np.argsort(d[keep])
    d, g = d[keep][order], g[keep][order]
    return d, d ** (2 - 2 * res.s) * g


def dirichlet_weighted_gradient(res: SolveResult) -> Dict[str, GradientRelation]:
    """Check ``delta^{2-2s} dv/dn -> (2s-1) v/delta^{2s-1}`` at each endpoint."""
    if res.bc != DIRICHLET:
        raise ValueError("weighted gradient relation is defined for Dirichlet solutions")
    a = 2 * res.s - 1
    ratios = dirichlet_boundary_ratio(res)
    window = probe_window(res.mesh)
    out = {}
    for side in ("left", "right"):
        tr = ratios[side].trace
        if abs(tr.value) <= 1e-14 * max(1.0, float(np.max(np.abs(res.values)))):
            out[side] = GradientRelation(side, "zero-trace", None, tr, None)
            continue
        d, g = _inward_gradient(res, side, window)
        pick = _geometric_pick(d, window[1])
        lim = _richardson_limit(d[pick], g[pick], 1.0)
        out[side] = GradientRelation(side, "ok", lim, tr, abs(lim.value - a * tr.value) / abs(a * tr.value))
    return out


@dataclass
class QuotientProbe:
    order: float                      # denominator power: 1 or 2s-1
    limit: Optional[float]            # None when the quotient diverges
    spread: float
    fit: Optional[RateFit]            # |quotient| against t


@dataclass
class NormalDerivativeProbe:
    side: str
    first: QuotientProbe              # (u(sigma + t) - u(sigma)) / t
    second: QuotientProbe             # (u(sigma + t) - u(sigma)) / t^{2s-1}
    growth: Optional[RateFit]         # |u(sigma + t) - u(sigma)| against t


def _quotient(t, diff, order, expected) -> QuotientProbe:
    q = diff / t ** order
    if not np.any(q):
        return QuotientProbe(order, 0.0, 0.0, None)
    fit = fit_boundary_rate(np.column_stack([t, q])) if np.count_nonzero(q == 0) <= 0.1 * len(q) else None
    if fit is not None and fit.exponent < -_FLAT:
        # unbounded as t -> 0: report the exponent, not a limit
        return QuotientProbe(order, None, math.inf, fit)
    pick = _geometric_pick(t, t[-1])
    lim = _richardson_limit(t[pick], q[pick], expected)
    return QuotientProbe(order, lim.value, lim.spread, fit)


def neumann_normal_derivative(res: SolveResult) -> Dict[str, NormalDerivativeProbe]:
    """Difference quotients of ``u`` at each endpoint along the inward normal.

    The first quotient is extrapolated with correction exponent ``2s - 1`` and
    the second with exponent 1 (the expected next terms for smooth data).
    """
    s = res.s
    if s <= 0.5:
        raise ValueError("normal-derivative probe needs s > 1/2")
    window = probe_window(res.mesh)
    u = res.values
    out = {}
    for side in ("left", "right"):
        idx, t = _side(res.mesh, side, window)
        if len(t) < 6:
            raise WindowError(f"only {len(t)} nodes in the probe window on the {side}")
        sigma = u[0] if side == "left" else u[-1]
        diff = u[idx] - sigma
        first = _quotient(t, diff, 1.0, 2 * s - 1)
        second = _quotient(t, diff, 2 * s - 1, 1.0)
        growth = None
        if np.count_nonzero(diff == 0) <= 0.1 * len(diff):
            growth = fit_boundary_rate(np.column_stack([t, diff]))
        out[side] = NormalDerivativeProbe(side, first, second, growth)
    return out


def holder_estimate(nodes, values, alpha: float) -> float:
    """``max |u(x) - u(y)| / |x - y|^alpha`` over all node pairs."""
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    x = np.asarray(nodes, dtype=float)
    u = np.asarray(values, dtype=float)
    if x.shape != u.shape:
        raise ValueError("nodes and values differ in length")
    best = 0.0
    for i in range(len(x) - 1):
        q = np.abs(u[i + 1:] - u[i]) / np.abs(x[i + 1:] - x[i]) ** alpha
        best = max(best, float(q.max()))
    return best


def classical_solution(f: ScalarField, a: float, b: float, bc: str, n: int = 8192):
    """Second-order finite differences for ``-u'' = f`` on a uniform grid.

    Dirichlet: ``u(a) = u(b) = 0``. Neumann: ``u'(a) = u'(b) = 0`` through
    ghost points, normalised to zero mean. Returns ``(grid, values)``.
    """
    x = np.linspace(a, b, n + 1)
    h = (b - a) / n
    rhs = np.asarray(f(x), dtype=float) * h * h * np.ones(n + 1)
    if bc == DIRICHLET:
        ab = np.zeros((3, n - 1))
        ab[0, 1:], ab[1, :], ab[2, :-1] = -1.0, 2.0, -1.0
        u = np.zeros(n + 1)
        u[1:-1] = solve_banded((1, 1), ab, rhs[1:-1])
        return x, u
    # ghost-point rows, symmetrised by halving the end rows; pin u(a) and re-centre
    ab = np.zeros((3, n + 1))
    ab[0, 1:], ab[1, :], ab[2, :-1] = -1.0, 2.0, -1.0
    ab[1, 0] = ab[1, -1] = 1.0
    rhs[0] *= 0.5
    rhs[-1] *= 0.5
    # remove the discrete incompatibility before pinning
    wts = np.full(n + 1, h)
    wts[0] = wts[-1] = 0.5 * h
    rhs -= wts * rhs.sum() / wts.sum()
    ab[0, 1] = 0.0
    ab[1, 0] = 1.0
    rhs[0] = 0.0
    u = solve_banded((1, 1), ab, rhs)
    u -= (wts @ u) / (b - a)
    return x, u


@dataclass
class LimitRow:
    s: float
    bc: str
    error: float


def s_to_one_comparison(f_dirichlet: ScalarField, f_neumann: ScalarField, s_list: Sequence[float],
                        mesh: GradedMesh, threads: int = 1) -> List[LimitRow]:
    """L^2 distance between fractional and classical solutions for each s (both problems)."""
    a, b = mesh.nodes[0], mesh.nodes[-1]
    targets = {}
    for bc, f in ((DIRICHLET, f_dirichlet), (NEUMANN, f_neumann)):
        if f is not None:
            grid, vals = classical_solution(f, a, b, bc)
            targets[bc] = (lambda y, g=grid, v=vals: np.interp(y, g, v))
    rows = []
    for s in s_list:
        s = as_order(s)
        for bc, f in ((DIRICHLET, f_dirichlet), (NEUMANN, f_neumann)):
            if f is None:
                continue
            system = assemble(mesh, s, bc, threads=threads)
            solver = solve_dirichlet if bc == DIRICHLET else solve_neumann
            res = solver(mesh, s, f, system=system)
            rows.append(LimitRow(float(s), bc, l2_distance(mesh, res.values, targets[bc])))
    return rows
