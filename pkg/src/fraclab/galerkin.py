"""P1 Galerkin discretisation of the regional form

    C(u, v) = c_{1,s}/2 int_{Omega x Omega} (u(x)-u(y)) (v(x)-v(y)) |x-y|^{-1-2s} dx dy

and solvers for the Neumann (regional) and Dirichlet (censored) problems.

Element pairs are split three ways:

* identical elements: hat differences are linear in ``x - y``, closed form;
* touching elements: with ``a = x_k - x`` and ``b = y - x_k`` every hat
  difference is linear homogeneous in ``(a, b)``, so the integrand is
  homogeneous and the radial integral is done exactly;
* separated elements: the ``phi_i(x) phi_j(x)`` part is collapsed onto a 1D
  integral against the analytic far-field kernel mass, the cross part uses
  tensor Gauss rules whose order follows the Bernstein-ellipse parameter.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .constants import as_order, c_ns
from .fields import ScalarField
from .mesh import GradedMesh

NEUMANN = "neumann"
DIRICHLET = "dirichlet"

_PAIR_TOL = 1e-14
_Q_TIERS = (4, 6, 8, 10, 12, 16, 20, 24, 32, 40, 48, 64)


class CompatibilityError(ValueError):
    """Neumann data with nonzero mean."""

    def __init__(self, integral: float, l1: float):
        super().__init__(f"Neumann data must have zero mean: int f = {integral:.3e} "
                         f"(||f||_L1 = {l1:.3e})")
        self.integral = integral
        self.l1 = l1


@lru_cache(maxsize=None)
def gauss01(q: int):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(q)
    return 0.5 * (x + 1.0), 0.5 * w


def _order_for(D):
    """Gauss order reaching ``_PAIR_TOL`` for a singularity at normalised distance ``D > 1``."""
    D = np.maximum(np.asarray(D, dtype=float), 1.0 + 1e-12)
    rho = D + np.sqrt(D * D - 1.0)
    need = np.ceil(-math.log(_PAIR_TOL) / (2.0 * np.log(rho))) + 1
    tiers = np.asarray(_Q_TIERS)
    idx = np.searchsorted(tiers, need)
    return tiers[np.minimum(idx, len(tiers) - 1)]


def _int_pow(lo, hi, e):
    """``int_lo^hi t^e dt`` for ``0 <= lo < hi``, stable when ``e`` is near -1."""
    p = e + 1.0
    if lo == 0.0:
        return hi ** p / p
    if p == 0.0:
        return math.log(hi / lo)
    return -(hi ** p) * math.expm1(p * math.log(lo / hi)) / p


def _touch_moments(h1: float, h2: float, s: float):
    """``I_m = int_0^h1 int_0^h2 a^m b^(2-m) (a+b)^(-1-2s) db da`` for m = 0, 1, 2."""
    ts = h1 / (h1 + h2)
    w0 = 1.0 - ts
    out = np.empty(3)
    tq, wq = gauss01(40)
    for m in range(3):
        beta = 2 * s - 1 - m
        alpha = m - 3 + 2 * s
        # piece on [0, ts]: t^m (1-t)^beta
        if ts >= 0.5:
            P = sum(math.comb(m, j) * (-1) ** j * _int_pow(w0, 1.0, beta + j) for j in range(m + 1))
        else:
            t = ts * tq
            P = ts * np.dot(wq, t ** m * (1 - t) ** beta)
        # piece on [ts, 1]: t^alpha (1-t)^(2-m)
        if ts <= 0.5:
            Q = sum(math.comb(2 - m, j) * (-1) ** j * _int_pow(ts, 1.0, alpha + j) for j in range(3 - m))
        else:
            t = ts + w0 * tq
            Q = w0 * np.dot(wq, t ** alpha * (1 - t) ** (2 - m))
        out[m] = (h2 ** (3 - 2 * s) * P + h1 ** (3 - 2 * s) * Q) / (3 - 2 * s)
    return out


def _far_cross_block(x, h, E, F, s, q):
    """``int_{K_e} int_{K_f} phi_i(x) phi_j(y) |x-y|^{-1-2s}`` for i in e, j in f; shape (P, 2, 2)."""
    t, w = gauss01(int(q))
    psi = np.stack([1.0 - t, t], axis=1) * w[:, None]       # (q, 2)
    xe = x[E][:, None] + h[E][:, None] * t[None, :]          # (P, q)
    yf = x[F][:, None] + h[F][:, None] * t[None, :]
    K = np.abs(yf[:, None, :] - xe[:, :, None]) ** (-1.0 - 2.0 * s)  # (P, q, q)
    J = np.einsum("ka,pkl,lb->pab", psi, K, psi, optimize=True)
    return J * (h[E] * h[F])[:, None, None]


def _far_mass_block(x, h, a, b, elems, s, q):
    """``int_K phi_i phi_j W_K`` with ``W_K`` the kernel mass of Omega minus K and its neighbours."""
    n = len(h)
    t, w = gauss01(int(q))
    left = x[np.maximum(elems - 1, 0)]
    right = x[np.minimum(elems + 2, n)]
    xs = x[elems][:, None] + h[elems][:, None] * t[None, :]
    with np.errstate(divide="ignore"):
        WL = ((xs - left[:, None]) ** (-2 * s) - (xs - a) ** (-2 * s)) / (2 * s)
        WR = ((right[:, None] - xs) ** (-2 * s) - (b - xs) ** (-2 * s)) / (2 * s)
    WL[left == a] = 0.0
    WR[right == b] = 0.0
    W = (WL + WR) * w[None, :]
    phi = np.stack([1.0 - t, t], axis=1)                      # (q, 2)
    M = np.einsum("pk,ka,kb->pab", W, phi, phi)
    return M * h[elems][:, None, None]


@dataclass
class NonlocalSystem:
    mesh: GradedMesh
    s: float
    bc: str
    stiffness: np.ndarray = field(repr=False)
    masses: np.ndarray = field(repr=False)
    load: Optional[np.ndarray] = field(default=None, repr=False)
    assembly_time: float = 0.0

    @property
    def free(self) -> np.ndarray:
        """Indices of retained degrees of freedom."""
        n = self.mesh.n
        if self.bc == DIRICHLET:
            return np.arange(1, n)
        return np.arange(n + 1)

    def with_load(self, f: ScalarField) -> "NonlocalSystem":
        return NonlocalSystem(self.mesh, self.s, self.bc, self.stiffness, self.masses,
                              load(self.mesh, f), self.assembly_time)


def assemble(mesh: GradedMesh, s, bc: str = NEUMANN, threads: int = 1) -> NonlocalSystem:
    """Dense stiffness matrix of the regional form on the hat basis of ``mesh``."""
    s = as_order(s)
    if bc not in (NEUMANN, DIRICHLET):
        raise ValueError(f"unknown boundary condition {bc!r}")
    if bc == DIRICHLET and s <= 0.5:
        raise ValueError("the censored Dirichlet problem needs s > 1/2; for s <= 1/2 it "
                         "coincides with the Neumann problem, use solve_neumann")
    t0 = time.perf_counter()
    x = np.asarray(mesh.nodes, dtype=float)
    h = np.diff(x)
    n = len(h)
    a, b = x[0], x[-1]
    c = c_ns(1, s)
    A = np.zeros((n + 1, n + 1))

    # identical elements
    self_int = 2.0 * h ** (3 - 2 * s) / ((2 - 2 * s) * (3 - 2 * s)) / h ** 2
    loc = np.array([[1.0, -1.0], [-1.0, 1.0]])
    for e in range(n):
        A[e:e + 2, e:e + 2] += 0.5 * c * self_int[e] * loc

    # touching elements (e, e+1) sharing node e+1
    for e in range(n - 1):
        h1, h2 = h[e], h[e + 1]
        I = _touch_moments(h1, h2, s)
        G = np.array([[I[2], I[1]], [I[1], I[0]]])
        Mloc = np.array([[1 / h1, 0.0], [-1 / h1, 1 / h2], [0.0, -1 / h2]])
        A[e:e + 3, e:e + 3] += c * (Mloc @ G @ Mloc.T)

    # far-field kernel mass on each element's own block
    elems = np.arange(n)
    D_left = 1.0 + 2.0 * np.where(elems > 0, h[np.maximum(elems - 1, 0)], np.inf) / h
    D_right = 1.0 + 2.0 * np.where(elems < n - 1, h[np.minimum(elems + 1, n - 1)], np.inf) / h
    q_el = _order_for(np.minimum(D_left, D_right))
    for q in np.unique(q_el):
        sel = elems[q_el == q]
        M = _far_mass_block(x, h, a, b, sel, s, q)
        for i in range(2):
            for j in range(2):
                np.add.at(A, (sel + i, sel + j), c * M[:, i, j])

    # separated pairs e < f - 1: cross terms
    E, F = np.triu_indices(n, k=2)
    if len(E):
        gap = x[F] - x[E + 1]
        D = 1.0 + 2.0 * gap / np.maximum(h[E], h[F])
        q_pair = _order_for(D)
        chunks = []
        for q in np.unique(q_pair):
            idx = np.nonzero(q_pair == q)[0]
            step = max(1, 4_000_000 // (q * q))
            chunks.extend((int(q), idx[k:k + step]) for k in range(0, len(idx), step))

        def work(item):
            q, idx = item
            return idx, _far_cross_block(x, h, E[idx], F[idx], s, q)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(work, chunks))
        else:
            results = [work(ch) for ch in chunks]
        # reduction in fixed chunk order keeps the result bitwise reproducible
        for idx, J in results:
            e, f = E[idx], F[idx]
            for i in range(2):
                for j in range(2):
                    np.add.at(A, (e + i, f + j), -c * J[:, i, j])
                    np.add.at(A, (f + j, e + i), -c * J[:, i, j])

    A = 0.5 * (A + A.T)
    masses = np.zeros(n + 1)
    masses[:-1] += 0.5 * h
    masses[1:] += 0.5 * h
    return NonlocalSystem(mesh, s, bc, A, masses, None, time.perf_counter() - t0)


def load(mesh: GradedMesh, f: ScalarField, q: int = 12) -> np.ndarray:
    """Load vector ``int f phi_i`` by per-element Gauss quadrature."""
    x = np.asarray(mesh.nodes, dtype=float)
    h = np.diff(x)
    t, w = gauss01(q)
    pts = x[:-1, None] + h[:, None] * t[None, :]
    fv = np.asarray(f(pts), dtype=float) * np.ones_like(pts)
    F = np.zeros(len(x))
    F[:-1] += h * ((fv * (1 - t)) @ w)
    F[1:] += h * ((fv * t) @ w)
    return F


def _l1_norm(mesh: GradedMesh, f: ScalarField, q: int = 12) -> float:
    x = np.asarray(mesh.nodes, dtype=float)
    h = np.diff(x)
    t, w = gauss01(q)
    pts = x[:-1, None] + h[:, None] * t[None, :]
    fv = np.asarray(f(pts), dtype=float) * np.ones_like(pts)
    return float(h @ (np.abs(fv) @ w))


class SingularSystemError(ArithmeticError):
    pass


@dataclass
class SolveResult:
    values: np.ndarray = field(repr=False)
    bc: str
    s: float
    mesh: GradedMesh = field(repr=False)
    diagnostics: dict = field(default_factory=dict)
    system: Optional[NonlocalSystem] = field(default=None, repr=False)

    @property
    def nodes(self) -> np.ndarray:
        return self.mesh.nodes

    def mean(self) -> float:
        x = self.mesh.nodes
        h = np.diff(x)
        return float(np.sum(0.5 * h * (self.values[:-1] + self.values[1:])) / (x[-1] - x[0]))


def _system_for(mesh, s, bc, system, threads):
    if system is None:
        return assemble(mesh, s, bc, threads=threads)
    if system.mesh is not mesh and not np.array_equal(system.mesh.nodes, mesh.nodes):
        raise ValueError("system was assembled on a different mesh")
    if system.s != as_order(s):
        raise ValueError("system was assembled for a different s")
    return system


def solve_dirichlet(mesh: GradedMesh, s, f: ScalarField, system: Optional[NonlocalSystem] = None,
                    threads: int = 1) -> SolveResult:
    """Censored problem: ``(-Delta)^s_Omega v = f`` in Omega, ``v = 0`` on the boundary (s > 1/2)."""
    s = as_order(s)
    if s <= 0.5:
        raise ValueError("the censored Dirichlet problem needs s > 1/2; use solve_neumann")
    sys_ = _system_for(mesh, s, DIRICHLET, system, threads)
    F = load(mesh, f)
    A = sys_.stiffness[1:-1, 1:-1]
    rhs = F[1:-1]
    try:
        inner = sla.solve(A, rhs, assume_a="pos")
    except sla.LinAlgError as exc:
        raise SingularSystemError(f"interior stiffness is not positive definite: {exc}") from exc
    v = np.zeros(mesh.n + 1)
    v[1:-1] = inner
    res = np.linalg.norm(A @ inner - rhs) / max(np.linalg.norm(rhs), 1e-300)
    diag = {"assembly_time": sys_.assembly_time, "solver_residual": float(res),
            "constraint_residual": 0.0}
    sys_ = NonlocalSystem(sys_.mesh, sys_.s, DIRICHLET, sys_.stiffness, sys_.masses, F,
                          sys_.assembly_time)
    return SolveResult(v, DIRICHLET, s, mesh, diag, sys_)


def solve_neumann(mesh: GradedMesh, s, f: ScalarField, system: Optional[NonlocalSystem] = None,
                  threads: int = 1) -> SolveResult:
    """Regional problem with zero-mean data; returns the zero-mean solution."""
    s = as_order(s)
    sys_ = _system_for(mesh, s, NEUMANN, system, threads)
    F = load(mesh, f)
    total = float(F.sum())
    l1 = _l1_norm(mesh, f)
    if abs(total) > 1e-8 * max(l1, 1e-300) and abs(total) > 1e-300:
        raise CompatibilityError(total, l1)
    n1 = mesh.n + 1
    m = sys_.masses
    K = np.zeros((n1 + 1, n1 + 1))
    K[:n1, :n1] = sys_.stiffness
    K[:n1, n1] = m
    K[n1, :n1] = m
    rhs = np.append(F, 0.0)
    try:
        sol = sla.solve(K, rhs, assume_a="sym")
    except sla.LinAlgError as exc:
        raise SingularSystemError(str(exc)) from exc
    u = sol[:n1]
    res = np.linalg.norm(sys_.stiffness @ u + sol[n1] * m - F) / max(np.linalg.norm(F), 1e-300)
    diag = {"assembly_time": sys_.assembly_time, "solver_residual": float(res),
            "constraint_residual": float(abs(m @ u)), "multiplier": float(sol[n1])}
    sys_ = NonlocalSystem(sys_.mesh, sys_.s, NEUMANN, sys_.stiffness, sys_.masses, F,
                          sys_.assembly_time)
    return SolveResult(u, NEUMANN, s, mesh, diag, sys_)


def energy(system: NonlocalSystem, u, v) -> float:
    """Discrete form ``u^T A v`` on full nodal vectors."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    n1 = system.stiffness.shape[0]
    if u.shape != (n1,) or v.shape != (n1,):
        raise ValueError(f"nodal vectors must have length {n1}, got {u.shape} and {v.shape}")
    return float(u @ system.stiffness @ v)


def interpolate(mesh: GradedMesh, f) -> np.ndarray:
    return np.asarray(f(mesh.nodes), dtype=float) * np.ones(mesh.n + 1)


def l2_distance(mesh: GradedMesh, values, exact, q: int = 12) -> float:
    """``||u_h - exact||_{L^2}`` with ``u_h`` the P1 interpolant of ``values``."""
    x = np.asarray(mesh.nodes, dtype=float)
    h = np.diff(x)
    t, w = gauss01(q)
    pts = x[:-1, None] + h[:, None] * t[None, :]
    uh = values[:-1, None] * (1 - t) + values[1:, None] * t
    d = uh - np.asarray(exact(pts), dtype=float)
    return float(math.sqrt(h @ ((d * d) @ w)))


def weighted_l2_sq(mesh: GradedMesh, values, weight, q: int = 12) -> float:
    """``int weight(x) u_h(x)^2 dx`` with per-element Gauss quadrature."""
    x = np.asarray(mesh.nodes, dtype=float)
    h = np.diff(x)
    t, w = gauss01(q)
    pts = x[:-1, None] + h[:, None] * t[None, :]
    uh = values[:-1, None] * (1 - t) + values[1:, None] * t
    return float(h @ ((weight(pts) * uh * uh) @ w))
