"""Candidate evaluators: closed forms, jumps, convolution, Picard."""
import math

import numpy as np
import pytest
from scipy.integrate import quad

from fracimpulse.mlf import MLArgs, cpow, mlf
from fracimpulse.resolvent import OperatorSpec, s_alpha, s_alpha_inverse
from fracimpulse.solutions import (
    AffineImpulse,
    CallbackForcing,
    ConstantJump,
    ImpulsiveProblem,
    PolynomialForcing,
    StateForcing,
    convolve_t_alpha,
    eval_pullback_solution,
    eval_restart_solution,
    eval_shifted_solution,
    solve_picard,
)
from fracimpulse.errors import NotConverged

ALPHA = 2.0 / 3.0
RHO = -1.0


def scalar_problem(**kw):
    defaults = dict(alpha=ALPHA, op=OperatorSpec.from_scalar(RHO),
                    forcing=PolynomialForcing.linear(slope=1.0),
                    x0=1.0, impulse_times=(1.0,),
                    impulse_maps=(ConstantJump(1.0),), horizon=2.0)
    defaults.update(kw)
    return ImpulsiveProblem(**defaults)


def kernel_conv(rho, alpha, f, t):
    # brute-force int_0^t (t-s)^(a-1) E_{a,a}(rho (t-s)^a) f(s) ds
    def g(s):
        w = t - s
        return (w ** (alpha - 1.0)
                * mlf(MLArgs(alpha, alpha), rho * w ** alpha) * f(s)).real

    val, err = quad(g, 0.0, t, points=[0.0, t], limit=200)
    return val, err


def test_single_piece_matches_direct_formula():
    prob = scalar_problem(impulse_times=(), impulse_maps=())
    traj = eval_restart_solution(prob)
    for t in (0.4, 1.1, 1.9):
        want = (mlf(MLArgs(ALPHA, 1.0), RHO * t ** ALPHA)
                + kernel_conv(RHO, ALPHA, lambda s: s, t)[0])
        assert abs(traj.value(t) - want) < 1e-9


def test_candidates_differ_after_impulse():
    prob = scalar_problem()
    tr = [eval_restart_solution(prob), eval_shifted_solution(prob),
          eval_pullback_solution(prob)]
    t = 1.5
    vals = [x.value(t) for x in tr]
    # before the impulse all three coincide
    pre = [x.value(0.5) for x in tr]
    assert max(abs(p - pre[0]) for p in pre) < 1e-13
    assert abs(vals[0] - vals[1]) > 1e-3
    assert abs(vals[1] - vals[2]) > 1e-3


def test_candidate_impulse_terms_against_direct_composition():
    # beyond t1 each candidate adds its own impulse term to the shared
    # no-impulse formula; reconstruct all three from propagator algebra
    prob = scalar_problem()
    base = scalar_problem(impulse_times=(), impulse_maps=())
    smooth = eval_restart_solution(base)
    t1, y1, t = 1.0, 1.0, 1.5
    restart = eval_restart_solution(prob)
    shifted = eval_shifted_solution(prob)
    pullback = eval_pullback_solution(prob)

    # restart re-launches from x(t1-) + y1 with lower limit t1
    x_left = smooth.value(t1)
    re_want = (mlf(MLArgs(ALPHA, 1.0), RHO * (t - t1) ** ALPHA)
               * (x_left + y1)
               + kernel_conv(RHO, ALPHA, lambda s: s + t1, t - t1)[0])
    assert abs(restart.value(t) - re_want) < 1e-9

    # shifted adds S(t - t1) y1 on top of the global formula
    sh_want = (smooth.value(t)
               + mlf(MLArgs(ALPHA, 1.0), RHO * (t - t1) ** ALPHA) * y1)
    assert abs(shifted.value(t) - sh_want) < 1e-9

    # pullback adds S(t) S(t1)^{-1} y1 instead
    op = prob.op
    pb_want = (smooth.value(t)
               + s_alpha(ALPHA, op, t) * s_alpha_inverse(ALPHA, op, t1) * y1)
    assert abs(pullback.value(t) - pb_want) < 1e-9


def test_jump_conditions_exact():
    prob = scalar_problem()
    for ev in (eval_restart_solution, eval_shifted_solution,
               eval_pullback_solution):
        traj = ev(prob)
        gap = traj.right_values[0] - traj.left_values[0] - 1.0
        assert abs(gap) == 0.0
        assert traj.value(0.0) == 1.0 + 0.0j


def test_matrix_affine_impulses():
    a = np.array([[-1.0, 0.0], [0.0, -0.5]])
    imp = AffineImpulse(np.array([[0.2, 0.0], [0.0, 0.1]]),
                        np.array([0.3, -0.2]))
    prob = ImpulsiveProblem(
        alpha=0.5, op=OperatorSpec.from_matrix(a),
        forcing=PolynomialForcing.linear(slope=np.array([1.0, 0.5])),
        x0=np.array([1.0, -0.5]),
        impulse_times=(0.7, 1.4), impulse_maps=(ConstantJump(
            np.array([1.0, 0.5])), imp), horizon=2.0)
    for ev in (eval_restart_solution, eval_shifted_solution,
               eval_pullback_solution):
        traj = ev(prob)
        for k in range(2):
            left = traj.left_values[k]
            jump = traj.right_values[k] - left
            want = prob.impulse_maps[k](left)
            assert np.max(np.abs(jump - want)) < 1e-12


def test_zero_impulse_agreement_and_scalar_matrix_consistency():
    prob = scalar_problem(impulse_times=(), impulse_maps=())
    tr = [eval_restart_solution(prob), eval_shifted_solution(prob),
          eval_pullback_solution(prob)]
    ts = np.linspace(0.05, 1.95, 20)
    for t in ts:
        vals = [x.value(t) for x in tr]
        assert max(abs(v - vals[0]) for v in vals) < 1e-10
    mat = ImpulsiveProblem(
        alpha=ALPHA, op=OperatorSpec.from_matrix([[RHO]]),
        forcing=PolynomialForcing(np.array([[0.0], [1.0]])),
        x0=np.array([1.0]), horizon=2.0)
    trm = eval_restart_solution(mat)
    for t in ts:
        assert abs(trm.value(t)[0] - tr[0].value(t)) < 1e-12


def test_derivative_matches_finite_difference():
    prob = scalar_problem()
    traj = eval_pullback_solution(prob)
    piece = traj.pieces[1]
    t, h = 1.5, 1e-5
    fd = (piece.value(t + h) - piece.value(t - h)) / (2.0 * h)
    assert abs(piece.derivative(t) - fd) < 1e-8


def test_callback_forcing_matches_closed_form():
    closed = scalar_problem()
    sampled = scalar_problem(forcing=CallbackForcing(lambda t: t))
    a = eval_pullback_solution(closed)
    b = eval_pullback_solution(sampled, conv_samples=2048)
    for t in (0.5, 1.2, 1.9):
        assert abs(a.value(t) - b.value(t)) < 1e-5


def test_convolve_t_alpha_closed_identity():
    # conv of f(s)=s has the closed form t^(a+1) E_{a,a+2}(rho t^a);
    # piecewise-linear moments integrate linear f exactly
    t = 1.7
    want = t ** (ALPHA + 1.0) * mlf(MLArgs(ALPHA, ALPHA + 2.0),
                                    RHO * t ** ALPHA)
    got = convolve_t_alpha(ALPHA, OperatorSpec.from_scalar(RHO),
                           lambda s: s, t, h=t / 128)
    assert abs(got - want) < 1e-12


def test_convolve_t_alpha_second_order_on_curved_forcing():
    t = 1.7
    want = kernel_conv(RHO, ALPHA, math.sin, t)[0]
    errs = []
    for n in (128, 256, 512):
        got = convolve_t_alpha(ALPHA, OperatorSpec.from_scalar(RHO),
                               math.sin, t, h=t / n)
        errs.append(abs(got - want))
    order = math.log2(errs[-2] / errs[-1])
    assert order >= 1.8, (order, errs)


def test_picard_pure_time_single_iteration():
    prob = scalar_problem(forcing=StateForcing(lambda t, x: 0.25 * t))
    traj = solve_picard(prob, tol=1e-10)
    assert traj.iterations == 1
    closed = scalar_problem(
        forcing=PolynomialForcing.linear(slope=0.25))
    ref = eval_pullback_solution(closed)
    for t in (0.5, 1.5):
        assert abs(traj.value(t) - ref.value(t)) < 1e-8


def test_picard_semilinear_converges():
    prob = scalar_problem(
        forcing=StateForcing(lambda t, x: 0.1 * np.sin(np.real(x))))
    traj = solve_picard(prob, n_per_piece=128, tol=1e-9)
    assert traj.iterations >= 2
    assert abs(traj.right_values[0] - traj.left_values[0] - 1.0) < 1e-12


def test_picard_not_converged_raises():
    prob = scalar_problem(
        forcing=StateForcing(lambda t, x: 0.5 * np.sin(np.real(x))))
    with pytest.raises(NotConverged):
        solve_picard(prob, n_per_piece=32, tol=1e-12, max_iter=1)


def test_problem_validation():
    with pytest.raises(ValueError):
        scalar_problem(alpha=1.0)
    with pytest.raises(ValueError):
        scalar_problem(impulse_times=(2.5,))
    with pytest.raises(ValueError):
        scalar_problem(impulse_times=(0.8, 0.4),
                       impulse_maps=(ConstantJump(1.0), ConstantJump(1.0)))
    with pytest.raises(ValueError):
        scalar_problem(impulse_times=(0.5, 1.0))
    with pytest.raises(ValueError):
        scalar_problem(x0=np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        scalar_problem(horizon=-1.0)
