"""Caputo derivative engines: L1 scheme, adaptive quadrature, moments."""
import math

import numpy as np
import pytest
from scipy.integrate import quad

from fracimpulse.caputo import (
    Convention,
    GridFunction,
    caputo_l1,
    caputo_quad,
    kernel_moments,
)
from fracimpulse.errors import NonUniformGrid, ToleranceNotMet
from fracimpulse.mlf import MLArgs, mlf, mlf_deriv


def power_derivative(q, alpha, t):
    # D^alpha t^q = Gamma(q+1)/Gamma(q+1-alpha) t^(q-alpha), q > 0
    return math.gamma(q + 1.0) / math.gamma(q + 1.0 - alpha) * t ** (q - alpha)


def test_l1_exact_for_affine():
    alpha = 0.6
    nodes = np.linspace(0.0, 2.0, 65)
    f = GridFunction(nodes, 3.0 - 0.5 * nodes)
    out = caputo_l1(f, alpha)
    want = -0.5 * nodes[1:] ** (1.0 - alpha) / math.gamma(2.0 - alpha)
    assert np.max(np.abs(out.values[1:] - want)) < 1e-13


def test_l1_convergence_order():
    # smooth test, order at least 2 - alpha - 0.2
    for alpha in (0.3, 0.5, 0.8):
        errs = []
        for n in (64, 128, 256):
            nodes = np.linspace(0.0, 1.0, n + 1)
            f = GridFunction(nodes, nodes ** 2 + nodes)
            out = caputo_l1(f, alpha)
            want = (power_derivative(2.0, alpha, nodes[1:])
                    + power_derivative(1.0, alpha, nodes[1:]))
            errs.append(np.max(np.abs(out.values[1:] - want)))
        order = math.log2(errs[-2] / errs[-1])
        assert order >= 2.0 - alpha - 0.2, (alpha, order, errs)


def test_l1_rejects_bad_grids():
    with pytest.raises(NonUniformGrid):
        caputo_l1(GridFunction(np.array([0.0, 0.1, 0.3, 0.4]),
                               np.zeros(4)), 0.5)
    with pytest.raises(ValueError):
        caputo_l1(GridFunction(np.linspace(0, 1, 9), np.zeros(9),
                               jumps={4: 1.0}), 0.5)
    with pytest.raises(ValueError):
        caputo_l1(GridFunction(np.linspace(0, 1, 9), np.zeros(9)), 1.2)


def test_quad_matches_power_rule():
    alpha = 2.0 / 3.0
    for q in (1.0, 2.0, 3.0):
        got = caputo_quad(lambda s: s ** q, 0.0, 1.3, alpha, tol=1e-9,
                          fprime=lambda s: q * s ** (q - 1.0))
        assert abs(got - power_derivative(q, alpha, 1.3)) < 1e-8


def test_quad_eigenfunction_identity():
    # D^alpha E_{alpha,1}(rho t^alpha) = rho E_{alpha,1}(rho t^alpha)
    alpha, rho, t = 0.7, -1.2, 1.5

    def f(s):
        return mlf(MLArgs(alpha, 1.0), rho * s ** alpha)

    def fprime(s):
        z = rho * s ** alpha
        return (mlf_deriv(MLArgs(alpha, 1.0), z)
                * rho * alpha * s ** (alpha - 1.0))

    got = caputo_quad(f, 0.0, t, alpha, tol=1e-9, fprime=fprime,
                      singular_points=(0.0,))
    want = rho * f(t)
    assert abs(got - want) < 1e-8


def test_quad_without_derivative():
    alpha = 0.5
    got = caputo_quad(lambda s: s ** 2, 0.0, 1.0, alpha, tol=1e-7)
    assert abs(got - power_derivative(2.0, alpha, 1.0)) < 1e-6


def test_quad_unreachable_tolerance_raises():
    with pytest.raises(ToleranceNotMet):
        caputo_quad(lambda s: np.sin(50.0 * s) * abs(s - 0.31) ** 0.5,
                    0.0, 1.0, 0.5, tol=1e-14)


def test_kernel_moments_match_quadrature():
    rng = np.random.default_rng(5)
    t = 2.0
    for expo in (-0.5, 0.3, 1.0):
        los = np.sort(rng.uniform(0.0, 1.9, 6))
        his = los + rng.uniform(0.01, (t - los) - 0.0, 6) * 0.5
        his = np.minimum(his, t)
        i0, i1 = kernel_moments(t, los, his, expo)
        for k in range(6):
            want0 = quad(lambda s: (t - s) ** expo, los[k], his[k],
                         points=[t] if his[k] == t else None)[0]
            # first moment is taken about the panel's own lower edge
            want1 = quad(lambda s: (s - los[k]) * (t - s) ** expo,
                         los[k], his[k],
                         points=[t] if his[k] == t else None)[0]
            assert abs(i0[k] - want0) < 1e-10
            assert abs(i1[k] - want1) < 1e-10


def test_convention_enum_distinct():
    names = {c.value for c in Convention}
    assert names == {"piecewise_classical", "jump_inclusive",
                     "formula_extension"}
