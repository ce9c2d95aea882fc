import numpy as np
import pytest

from hpmpbe import quadrature as quad


def _cubic(x):
    return 1.0 - 2.0 * x + 0.5 * x**2 + 0.25 * x**3


def _cubic_int(a, b):
    F = lambda x: x - x**2 + x**3 / 6 + x**4 / 16
    return F(b) - F(a)


@pytest.mark.parametrize("x", [
    np.linspace(0.1, 3.0, 11),
    np.geomspace(0.05, 4.0, 17),
    np.sort(np.random.default_rng(3).uniform(0.1, 2.0, 13)),
])
def test_cubics_integrated_exactly(x):
    w = quad.node_weights(x)
    assert w @ _cubic(x) == pytest.approx(_cubic_int(x[0], x[-1]), rel=1e-13)
    tails = quad.tail_integrals(x, _cubic(x))
    assert np.allclose(tails, _cubic_int(x, x[-1]), atol=1e-12)
    assert tails[-1] == 0.0


def test_breakpoint_handles_jump():
    x = np.linspace(0.0, 2.0, 21)[1:]
    # step of height one at x = 1, the break node carries the left limit
    y = np.where(x <= 1.0, 1.0 + x, 3.0 * x)
    ib = int(np.argmin(np.abs(x - 1.0)))
    total = np.sum(quad.interval_integrals(x, y, (ib,)))
    exact = (1.5 - (x[0] + x[0] ** 2 / 2)) + 1.5 * (4 - 1)
    assert total == pytest.approx(exact, rel=1e-13)


def test_fourth_order_convergence():
    errs = []
    for n in (80, 160, 320):
        x = np.geomspace(0.1, 5.0, n)
        errs.append(abs(quad.node_weights(x) @ np.exp(-x) - (np.exp(-0.1) - np.exp(-5.0))))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 3.7)


def test_origin_pieces():
    x = np.linspace(0.05, 1.0, 20)
    assert quad.extrapolate_origin(x, 2.0 + x**3) == pytest.approx(2.0, abs=1e-12)
    assert quad.origin_integral(x, 1.0 + x**2) == pytest.approx(0.05 + 0.05**3 / 3, rel=1e-12)


@pytest.mark.parametrize("npts", [2, 3, 4, 5, 6, 7, 12, 40])
def test_uniform_weights_exact_for_cubics(npts):
    x = np.linspace(0.0, 1.0, npts)
    h = x[1] - x[0]
    w = h * quad.uniform_weights(npts)
    deg = 1 if npts == 2 else 3
    for p in range(deg + 1):
        assert w @ x**p == pytest.approx(1.0 / (p + 1), rel=1e-13)


def test_uniform_convolution_matches_direct_rule():
    h = 0.02
    s = h * np.arange(300)
    f, g = np.exp(-s), np.cos(s)
    fast = quad.uniform_convolution(f, g, h)
    assert fast[0] == 0.0
    for p in (1, 2, 5, 9, 150, 299):
        q = np.arange(p + 1)
        slow = h * np.sum(quad.uniform_weights(p + 1) * f[p - q] * g[q])
        assert fast[p] == pytest.approx(slow, rel=1e-12, abs=1e-15)
    # int_0^s e^{-(s-u)} cos u du = (cos s + sin s - e^{-s}) / 2
    exact = 0.5 * (np.cos(s) + np.sin(s) - np.exp(-s))
    assert np.max(np.abs(fast - exact)) < 1e-7
