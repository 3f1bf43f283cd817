"""Acceptance criteria 1-10.

Run with pytest (one PASS/FAIL line per criterion is printed) or directly:
``python3 tests/test_acceptance.py``.
"""

import math
import time

import numpy as np
import pytest

from fraclab.angular import assemble_angular, eigenpairs, gap_check, tan_root, w0_angular_profile
from fraclab.constants import a_s, b_s, gamma_n_limit, hardy_constant, kappa_bar, mu
from fraclab.extension import extension_flux
from fraclab.fields import bump, builtin, constant, gaussian, omega_gamma
from fraclab.galerkin import solve_dirichlet, solve_neumann
from fraclab.mesh import Domain1D, default_grading, graded_mesh
from fraclab.operator1d import full_flap, full_flap_zero_ext, killing_potential, regional_flap
from fraclab.probes import (dirichlet_boundary_ratio, dirichlet_weighted_gradient, neumann_normal_derivative,
                            s_to_one_comparison)

S_GRID = (0.3, 0.5, 0.6, 0.75, 0.9)


def criterion_1():
    worst = max(abs(a_s(s) - mu((2 * s - 1) / 2, s) - math.gamma((2 * s + 1) / 2) ** 2 / math.pi)
                for s in S_GRID)
    return worst <= 1e-8, f"max identity residual {worst:.2e} (tol 1e-8)"


def criterion_2():
    worst = max(max(abs(mu(0.0, s)), abs(mu(2 * s - 1, s))) for s in S_GRID)
    return worst <= 1e-8, f"max |mu| at the zeros {worst:.2e} (tol 1e-8)"


def criterion_3():
    half = Domain1D.halfline()
    worst = max(abs(regional_flap(omega_gamma(2 * s - 1), half, x, s).value)
                for s in (0.6, 0.75, 0.9) for x in (0.25, 1.0, 4.0))
    return worst <= 1e-6, f"max |flap omega_(2s-1)| {worst:.2e} (tol 1e-6)"


def criterion_4():
    half = Domain1D.halfline()
    rng = np.random.default_rng(20240601)
    worst, fails = 0.0, 0
    for i in range(50):
        s = S_GRID[i % len(S_GRID)]
        c = rng.uniform(0.5, 4.0)
        w = rng.uniform(0.2, 0.95) * c
        u = bump(c, w, rng.uniform(0.5, 2.0))
        x = rng.uniform(c - 0.95 * w, c + 0.95 * w)
        full = full_flap_zero_ext(u, x, s)
        reg = regional_flap(u, half, x, s)
        gap = abs(full.value - reg.value - killing_potential(x, s) * u.scalar(x))
        bound = 10 * (full.error + reg.error)
        fails += gap > bound
        worst = max(worst, gap / bound if bound > 0 else math.inf)
    return fails == 0, f"{fails}/50 exceed 10x quadrature error; worst gap/bound {worst:.2e}"


def criterion_5():
    errs = {s: abs(eigenpairs(assemble_angular(s, 512), 1)[0].lam - (2 * s - 1) ** 2 / 4) for s in (0.3, 0.75, 0.9)}
    p1, p2 = eigenpairs(assemble_angular(0.5, 512), 2)
    root_err = abs(math.sqrt(p2.lam) - tan_root(1))
    margins = {s: gap_check(s)[1] for s in (0.3, 0.75)}
    ok = (max(errs.values()) <= 1e-3 and abs(p1.lam) <= 1e-6 and root_err <= 1e-3
          and min(margins.values()) >= -1e-3)
    return ok, (f"max |lam1 - target| {max(errs.values()):.2e}; s=1/2 lam1 {p1.lam:.1e}, "
                f"sqrt(lam2) error {root_err:.1e}; min gap margin {min(margins.values()):.3f}")


_dirichlet_runs = {}


def _dirichlet(s):
    if s not in _dirichlet_runs:
        mesh = graded_mesh(-1.0, 1.0, 1024, default_grading(s))
        _dirichlet_runs[s] = solve_dirichlet(mesh, s, constant(1.0))
    return _dirichlet_runs[s]


def criterion_6():
    ok, parts = True, []
    for s in (0.7, 0.8):
        pr = dirichlet_boundary_ratio(_dirichlet(s))
        dev = max(abs(pr[side].exponent.exponent - (2 * s - 1)) for side in ("left", "right"))
        tl, tr = pr["left"].trace.value, pr["right"].trace.value
        asym = abs(tl - tr) / max(abs(tl), abs(tr))
        ok &= dev <= 0.05 and asym <= 0.01
        parts.append(f"s={s}: exponent dev {dev:.3f}, trace asymmetry {asym:.1e}")
    return ok, "; ".join(parts)


def criterion_7():
    ok, parts = True, []
    for s in (0.7, 0.8):
        rel = dirichlet_weighted_gradient(_dirichlet(s))
        worst = max(rel[side].residual if rel[side].status == "ok" else math.inf for side in ("left", "right"))
        ok &= worst <= 0.05
        parts.append(f"s={s}: relative residual {worst:.1e}")
    return ok, "; ".join(parts)


def criterion_8():
    s = 0.8
    mesh = graded_mesh(-1.0, 1.0, 1024, default_grading(s))
    res = solve_neumann(mesh, s, builtin("linear"))
    umax = float(np.max(np.abs(res.values)))
    probe = neumann_normal_derivative(res)
    ok, parts = True, []
    for side in ("left", "right"):
        p = probe[side]
        lim = p.first.limit
        good = lim is not None and abs(lim) <= 1e-2 * umax and p.growth is not None and p.growth.exponent >= 1.2
        ok &= good
        parts.append(f"{side}: first quotient {lim if lim is None else f'{abs(lim) / umax:.1e}'}*|u|, "
                     f"growth exponent {p.growth.exponent if p.growth else float('nan'):.2f}")
    return ok, "; ".join(parts)


def criterion_9():
    mesh = graded_mesh(-1.0, 1.0, 512, 1.0)
    rows = s_to_one_comparison(builtin("const1"), builtin("linear"), (0.9, 0.95, 0.99), mesh)
    ok, parts = True, []
    for bc in ("dirichlet", "neumann"):
        e = [r.error for r in rows if r.bc == bc]
        ok &= all(a > b for a, b in zip(e, e[1:]))
        parts.append(f"{bc} " + " > ".join(f"{v:.2e}" for v in e))
    g = max(abs(gamma_n_limit(N) - 2) for N in (1, 2, 3))
    ok &= g <= 1e-6
    parts.append(f"|gamma_N - 2| {g:.1e}")
    return ok, "; ".join(parts)


def criterion_10():
    u = gaussian(0.2, 0.7)
    rels = {}
    for s in (0.6, 0.8):
        direct = -kappa_bar(s) * full_flap(u, 0.0, s).value
        rels[s] = abs(extension_flux(u, 0.0, s).value - direct) / abs(direct)
    h, fd = 1e-4, 0.0
    for s in (0.6, 0.8):
        for th in np.linspace(0.1, math.pi - 0.1, 25):
            num = (w0_angular_profile(th + h, s)[0] - w0_angular_profile(th - h, s)[0]) / (2 * h)
            fd = max(fd, abs(num + b_s(s) * math.sin(th) ** (2 * s - 1)))
    ok = max(rels.values()) <= 1e-3 and fd <= 1e-6
    return ok, f"flux relative error {max(rels.values()):.1e} (tol 1e-3); w0' FD error {fd:.1e} (tol 1e-6)"


CRITERIA = [
    (1, "constants identity", criterion_1, 1.0),
    (2, "mu zeros", criterion_2, 1.0),
    (3, "harmonic powers", criterion_3, 10.0),
    (4, "killing identity", criterion_4, 60.0),
    (5, "angular eigenvalues", criterion_5, 30.0),
    (6, "Dirichlet boundary rate", criterion_6, 600.0),
    (7, "weighted-gradient relation", criterion_7, 600.0),  # reuses the solves of 6,
    (8, "Neumann normal derivative", criterion_8, 600.0),
    (9, "s -> 1 limits", criterion_9, 600.0),
    (10, "extension consistency", criterion_10, 60.0),
]


def evaluate(number, name, func, budget):
    t0 = time.perf_counter()
    ok, detail = func()
    elapsed = time.perf_counter() - t0
    ok_time = elapsed < budget
    line = (f"criterion {number:2d} {'PASS' if ok and ok_time else 'FAIL'}  {name}: {detail}; "
            f"{elapsed:.2f} s (budget {budget:g} s)")
    return ok and ok_time, line


@pytest.mark.parametrize("number,name,func,budget", CRITERIA, ids=[f"criterion_{c[0]}" for c in CRITERIA])
def test_criterion(number, name, func, budget, capsys):
    ok, line = evaluate(number, name, func, budget)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [evaluate(*c) for c in CRITERIA]
    for _, line in results:
        print(line)
    raise SystemExit(0 if all(ok for ok, _ in results) else 1)
