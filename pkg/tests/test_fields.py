import math

import numpy as np
import pytest

from fraclab.constants import c_ns
from fraclab.fields import PowerTail, builtin, constant, gaussian, manufactured, omega_gamma, polynomial
from fraclab.mesh import Domain1D
from fraclab.operator1d import regional_flap


@pytest.mark.parametrize("s", [0.3, 0.5, 0.75, 0.9])
@pytest.mark.parametrize("x", [-0.9, 0.1, 0.6])
def test_manufactured_matches_folded_pv(s, x):
    # symmetric fold on the inner part, one-sided integral on the rest, in extended precision
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 30
    a, b = -1, 1
    u = lambda y: (y - a) * (b - y)
    X, S = mp.mpf(x), mp.mpf(s)
    m = min(X - a, b - X)
    # below eps the fold cancels to roundoff; there the C^2 leading term -u'' r^{1-2s} is used
    eps = mp.mpf("1e-6")
    fold = lambda r: (2 * u(X) - u(X + r) - u(X - r)) * r ** (-1 - 2 * S)
    core = -mp.diff(u, X, 2) * eps ** (2 - 2 * S) / (2 - 2 * S)
    inner = core + mp.quad(fold, [eps, m])
    if X - a < b - X:
        outer = mp.quad(lambda r: (u(X) - u(X + r)) * r ** (-1 - 2 * S), [m, b - X])
    else:
        outer = mp.quad(lambda r: (u(X) - u(X - r)) * r ** (-1 - 2 * S), [m, X - a])
    ref = float(c_ns(1, s) * (inner + outer))
    f, _ = manufactured(s, a, b)
    assert float(f(x)) == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("s", [0.4, 0.8])
def test_manufactured_matches_operator(s):
    f, u = manufactured(s, 0.0, 2.0)
    quad = polynomial([0.0, 2.0, -1.0])
    dom = Domain1D.interval(0.0, 2.0)
    for x in (0.05, 1.0, 1.7):
        assert regional_flap(quad, dom, x, s).value == pytest.approx(float(f(x)), rel=1e-9)
    assert u(1.0) == 1.0


def test_builtin_names():
    x = np.linspace(-1, 1, 5)
    assert np.all(builtin("const1")(x) == 1.0)
    assert np.all(builtin("zero")(x) == 0.0)
    assert np.allclose(builtin("linear")(x), x)
    assert np.allclose(builtin("sine")(x), np.sin(np.pi * x))
    with pytest.raises(ValueError):
        builtin("manufactured")
    with pytest.raises(KeyError):
        builtin("cosine")


def test_combine_keeps_tails_and_derivatives():
    u = constant(2.0).combine(1.5, gaussian(0.0, 1.0), -1.0)
    assert u.tail.power == 0.0 and u.tail.right == 3.0 and u.tail.left == 3.0
    assert u.tail.radius == 28.0
    assert u.second_derivative(0.3, 1e-3) == pytest.approx(-gaussian(0.0, 1.0).second_derivative(0.3, 1e-3))
    v = omega_gamma(0.5) + gaussian(1.0, 0.5)
    assert v.tail.power == 0.5 and v.tail.left == 0.0


def test_finite_difference_derivatives():
    from fraclab.fields import from_callable
    u = from_callable(np.sin)
    assert u.second_derivative(0.7, 1e-3) == pytest.approx(-math.sin(0.7), rel=1e-6)
    assert u.fourth_derivative(0.7, 1e-2) == pytest.approx(math.sin(0.7), rel=1e-3)


def test_tail_validation():
    with pytest.raises(ValueError):
        PowerTail(0.0, 1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        omega_gamma(-1.0)
