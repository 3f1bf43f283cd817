"""Weighted Sturm-Liouville problem on the half circle.

    -(sin^{1-2s} psi')' + ((1-2s)^2/4) sin^{1-2s} psi = lam sin^{1-2s} psi   on (0, pi)
    -lim_{theta->0} sin^{1-2s} psi' = kappa_bar_s a_s psi(0) = b_s psi(0),   psi(pi) = 0

Discretised with P1 elements. Integrating by parts, the flux condition at 0
contributes ``-b_s psi(0) phi(0)`` to the bilinear form.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spl
from scipy import integrate, optimize
from scipy.special import roots_jacobi

from .constants import a_s, as_order, b_s, kappa_bar
from .galerkin import gauss01
from .mesh import graded_mesh

_Q_END = 24
_Q_INNER = 16


@lru_cache(maxsize=None)
def _jacobi01(q: int, beta: float):
    """Nodes/weights on [0, 1] for the weight ``t^beta``."""
    x, w = roots_jacobi(q, 0.0, beta)
    return 0.5 * (x + 1.0), w * 0.5 ** (1.0 + beta)


def _half_nodes(n: int, grading: float) -> np.ndarray:
    """Left half of the symmetric graded grid on [0, pi], ending at pi/2."""
    xi = np.arange(n // 2 + 1) / n
    return 0.5 * math.pi * (2.0 * xi) ** grading


def _element_moments(left: np.ndarray, s: float) -> np.ndarray:
    """``int_e sin^{1-2s} * ((1-t)^2, (1-t)t, t^2)`` on every element; shape (n, 3).

    Only the left half is integrated (from exact distances to theta = 0); the
    weight and the grid are symmetric about pi/2, so the right half is mirrored.
    """
    h = np.diff(left)
    e = 1.0 - 2.0 * s
    half = np.empty((len(h), 3))

    def basis(t):
        return np.stack([(1 - t) ** 2, (1 - t) * t, t * t], axis=-1)

    t, w = gauss01(_Q_INNER)
    th = left[1:-1, None] + h[1:, None] * t[None, :]
    vals = np.sin(th) ** e * w[None, :]
    half[1:] = np.einsum("pk,kb->pb", vals, basis(t)) * h[1:, None]

    # first element: theta = h0 t, sin^e = (h0 t)^e (sin(th)/th)^e
    tj, wj = _jacobi01(_Q_END, e)
    th = h[0] * tj
    smooth = (np.sin(th) / th) ** e
    half[0] = h[0] ** (1 + e) * (wj * smooth) @ basis(tj)
    mirrored = half[::-1, ::-1]
    return np.vstack([half, mirrored])


@dataclass
class AngularProblem:
    s: float
    theta: np.ndarray = field(repr=False)
    stiffness: np.ndarray = field(repr=False)     # on nodes 0..n-1 (node n pinned)
    mass: np.ndarray = field(repr=False)
    flux: float = 0.0
    zeroth_order: float = 0.0
    gradient_weights: np.ndarray = field(default=None, repr=False)   # int_e sin^{1-2s} / h_e^2

    @property
    def n(self) -> int:
        return len(self.theta) - 1


def assemble_angular(s, n: int = 512, grading: float = 2.0) -> AngularProblem:
    s = as_order(s)
    if n < 32:
        raise ValueError(f"need at least 32 elements, got {n}")
    if not 1.0 <= grading <= 3.0:
        # beyond 3 the first element is below 1e-7 and the pencil loses accuracy
        raise ValueError(f"angular grading must lie in [1, 3], got {grading}")
    theta = graded_mesh(0.0, math.pi, n, grading).nodes.copy()
    left = _half_nodes(n, grading)
    hl = np.diff(left)
    h = np.concatenate([hl, hl[::-1]])
    mom = _element_moments(left, s)
    w0 = mom.sum(axis=1) + mom[:, 1]          # int_e sin^{1-2s}
    c0 = (1 - 2 * s) ** 2 / 4
    K = np.zeros((n + 1, n + 1))
    M = np.zeros((n + 1, n + 1))
    for e in range(n):
        loc_m = np.array([[mom[e, 0], mom[e, 1]], [mom[e, 1], mom[e, 2]]]) * 1.0
        loc_k = w0[e] / h[e] ** 2 * np.array([[1.0, -1.0], [-1.0, 1.0]])
        M[e:e + 2, e:e + 2] += loc_m
        K[e:e + 2, e:e + 2] += loc_k + c0 * loc_m
    flux = kappa_bar(s) * a_s(s)
    K[0, 0] -= flux
    K, M = K[:-1, :-1], M[:-1, :-1]
    K = 0.5 * (K + K.T)
    M = 0.5 * (M + M.T)
    return AngularProblem(s, theta, K, M, flux, c0, w0 / h ** 2)


@dataclass
class EigenPair:
    lam: float
    psi: np.ndarray = field(repr=False)   # nodal values on theta, psi[-1] = 0
    theta: np.ndarray = field(repr=False)


def eigenpairs(problem: AngularProblem, k: int = 2) -> List[EigenPair]:
    """Lowest ``k`` eigenpairs, normalised in the weighted L^2 norm with ``psi(0) >= 0``."""
    if k > problem.n // 4:
        raise ValueError(f"k={k} exceeds n/4")
    # shift-invert Lanczos about -1 (the spectrum is bounded below by the Hardy
    # constant); a dense solve only resolves eigenvalues to eps * lam_max ~ eps / h_min^2
    K = sp.csc_matrix(problem.stiffness)
    M = sp.csc_matrix(problem.mass)
    lam, vec = spl.eigsh(K, k=k, M=M, sigma=-1.0, which="LM", tol=1e-14)
    order = np.argsort(lam)
    lam, vec = lam[order], vec[:, order]
    pairs = []
    for j in range(k):
        v = vec[:, j] / math.sqrt(vec[:, j] @ problem.mass @ vec[:, j])
        if v[0] < 0:
            v = -v
        psi = np.append(v, 0.0)
        # the Ritz value carries the LU backward error eps * ||K||; the quotient
        # summed from element differences is accurate to a few ulps
        pairs.append(EigenPair(rayleigh_quotient(problem, psi), psi, problem.theta))
    pairs.sort(key=lambda p: p.lam)
    return pairs


def rayleigh_quotient(problem: AngularProblem, psi: np.ndarray) -> float:
    """Quotient of the pencil at ``psi`` (nodal values including the pinned node).

    The gradient part is summed from element differences: ``v @ K @ v`` cancels
    catastrophically once the end elements are small.
    """
    psi = np.asarray(psi, dtype=float)
    v = psi[:-1]
    mass = float(v @ problem.mass @ v)
    if problem.gradient_weights is None:
        return float(v @ problem.stiffness @ v) / mass
    grad = float(problem.gradient_weights @ np.diff(psi) ** 2)
    return (grad - problem.flux * v[0] ** 2) / mass + problem.zeroth_order


def gap_check(s, n: int = 512):
    """Margin of ``(2s-1)/2 + sqrt(lam_2) >= 2s``; at ``s = 1/2`` the margin of ``sqrt(lam_2) > 1``."""
    s = as_order(s)
    lam2 = eigenpairs(assemble_angular(s, n), 2)[1].lam
    if s == 0.5:
        margin = math.sqrt(lam2) - 1.0
        return margin > 0, margin
    margin = (2 * s - 1) / 2 + math.sqrt(lam2) - 2 * s
    return margin >= 0, margin


def tan_root(k: int = 1) -> float:
    """k-th positive root of ``tan(pi x) = pi x`` by bisection."""
    f = lambda x: math.sin(math.pi * x) - math.pi * x * math.cos(math.pi * x)
    # roots lie in (k, k + 1/2)
    return optimize.bisect(f, k + 1e-9, k + 0.5 - 1e-9, xtol=1e-15, rtol=1e-15)


def w0_angular_profile(theta, s):
    """Angular profile of the extension of the half-line indicator and its derivative.

    Returns ``(value, derivative)``; the value is the quadrature of
    ``b_s int_{-cot theta}^inf (1+t^2)^{-(2s+1)/2} dt`` after ``t = tan(phi)``.
    """
    s = as_order(s)
    theta = float(theta)
    if theta <= 0.0:
        return 1.0, -math.inf if s < 0.5 else (-b_s(s) if s == 0.5 else 0.0)
    if theta >= math.pi:
        return 0.0, -math.inf if s < 0.5 else (-b_s(s) if s == 0.5 else 0.0)
    bs = b_s(s)
    f = lambda phi: math.cos(phi) ** (2 * s - 1)
    lo = theta - math.pi / 2
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(f, lo, math.pi / 2, epsabs=1e-14, epsrel=1e-13, limit=200)
    return bs * val, -bs * math.sin(theta) ** (2 * s - 1)


def w0_rayleigh_excess(problem: AngularProblem) -> float:
    """``RQ(I_h w0) - (2s-1)^2/4`` for the interpolated profile.

    The profile is an exact eigenfunction at ``(2s-1)^2/4``; its interpolant is
    a discrete trial function, so the excess tends to zero under refinement and
    bounds how far the discrete pencil sits from that eigenvalue.
    """
    s = problem.s
    w = np.array([w0_angular_profile(t, s)[0] for t in problem.theta])
    return rayleigh_quotient(problem, w) - (2 * s - 1) ** 2 / 4
