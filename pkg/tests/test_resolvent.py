"""Solution-family operators: propagators, inverses, sector diagnostic."""
import math

import numpy as np
import pytest

from fracimpulse.errors import NumericallySingular, SingularTime
from fracimpulse.mlf import MLArgs, mlf
from fracimpulse.resolvent import (
    OperatorSpec,
    SectorParams,
    s_alpha,
    s_alpha_inverse,
    sector_check,
    t_alpha,
)

A = np.array([[-1.0, 0.4], [0.2, -2.0]])


def test_scalar_propagators_match_mlf():
    op = OperatorSpec.from_scalar(-1.3)
    for t in (0.2, 1.0, 1.7):
        z = -1.3 * t ** (2.0 / 3.0)
        want_s = mlf(MLArgs(2.0 / 3.0, 1.0), z)
        want_t = t ** (-1.0 / 3.0) * mlf(MLArgs(2.0 / 3.0, 2.0 / 3.0), z)
        assert abs(s_alpha(2.0 / 3.0, op, t) - want_s) < 1e-13
        assert abs(t_alpha(2.0 / 3.0, op, t) - want_t) < 1e-13


def test_matrix_propagator_matches_eigen_composition():
    op = OperatorSpec.from_matrix(A)
    lam, vec = np.linalg.eig(A)
    vinv = np.linalg.inv(vec)
    for t in (0.5, 1.5):
        diag = np.diag([mlf(MLArgs(0.5, 1.0), complex(l) * t ** 0.5)
                        for l in lam])
        want = vec @ diag @ vinv
        got = s_alpha(0.5, op, t)
        assert np.max(np.abs(got - want)) < 1e-12


def test_identity_at_zero_and_kernel_singularity():
    op = OperatorSpec.from_matrix(A)
    assert np.array_equal(s_alpha(0.5, op, 0.0), np.eye(2))
    with pytest.raises(SingularTime):
        t_alpha(0.5, op, 0.0)
    with pytest.raises(ValueError):
        s_alpha(0.5, op, -1.0)


def test_inverse_roundtrip():
    op = OperatorSpec.from_matrix(A)
    for t in (0.4, 1.2):
        s = s_alpha(0.5, op, t)
        sinv = s_alpha_inverse(0.5, op, t)
        assert np.max(np.abs(s @ sinv - np.eye(2))) < 1e-12
    sc = OperatorSpec.from_scalar(-0.7)
    s = s_alpha(2.0 / 3.0, sc, 1.0)
    assert abs(s * s_alpha_inverse(2.0 / 3.0, sc, 1.0) - 1.0) < 1e-14


def test_inverse_rejects_propagator_zero():
    # E_{1/2,1}(z) = exp(z^2) erfc(-z) vanishes exactly where erfc(-z)
    # does; park rho on such a zero so S(1) = 0
    import mpmath as mp
    root = mp.findroot(lambda w: mp.erfc(w), mp.mpc(-1.35, 1.99))
    rho = complex(-root)
    op = OperatorSpec.from_scalar(rho)
    assert abs(s_alpha(0.5, op, 1.0)) < 1e-13
    with pytest.raises(NumericallySingular):
        s_alpha_inverse(0.5, op, 1.0)


def test_operator_spec_shapes():
    op = OperatorSpec.from_scalar(-2.0)
    assert op.kind == "scalar" and op.dim == 1 and op.identity() == 1.0
    mat = OperatorSpec.from_matrix(A)
    assert mat.kind == "matrix" and mat.dim == 2 and mat.diagonalizable
    assert np.array_equal(mat.identity(), np.eye(2))
    defective = OperatorSpec.from_matrix(np.array([[1.0, 1.0], [0.0, 1.0]]))
    assert not defective.diagonalizable
    with pytest.raises(ValueError):
        OperatorSpec.from_matrix(np.zeros((2, 3)))


def test_sector_check_reports():
    # spectrum in the open left half-plane clears a moderate sector
    params = SectorParams(M=5.0, theta=0.35 * math.pi)
    report = sector_check(0.5, A, params)
    assert report.passed and all(report.outside)
    inside = sector_check(0.5, np.array([[1.0, 0.0], [0.0, -1.0]]), params)
    assert not all(inside.outside)
    assert inside.warnings
