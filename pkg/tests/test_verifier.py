"""Residual verdicts, defect integrals, and the candidate comparison."""
import numpy as np
import pytest

from fracimpulse.errors import MissingPieceFormula
from fracimpulse.resolvent import OperatorSpec
from fracimpulse.solutions import (
    ConstantJump,
    ImpulsiveProblem,
    PolynomialForcing,
    eval_restart_solution,
    eval_shifted_solution,
)
from fracimpulse.verifier import (
    Convention,
    Verdict,
    check_generator_identities,
    check_origin_mismatch,
    check_piecewise_restart_residual,
    check_shifted_origin_identity,
    residual_at_times,
    residual_report,
    restart_formula_defect,
    shifted_impulse_defect,
    shifted_state_identity_gap,
    verify_candidate_formulas,
)

ALPHA = 2.0 / 3.0
RHO = -1.0
# small ladders keep the suite fast; verdict margins hold from base 64 up
LADDER = dict(base=64, levels=4)


def scalar_problem():
    return ImpulsiveProblem(
        alpha=ALPHA, op=OperatorSpec.from_scalar(RHO),
        forcing=PolynomialForcing.linear(slope=1.0), x0=1.0,
        impulse_times=(1.0,), impulse_maps=(ConstantJump(1.0),),
        horizon=2.0)


def test_generator_identities_vanish():
    state, forcing = check_generator_identities(
        ALPHA, OperatorSpec.from_scalar(RHO), 1.0,
        forcing=PolynomialForcing.linear(slope=1.0), horizon=2.0, **LADDER)
    for rep in (state, forcing):
        assert rep.verdict is Verdict.VANISHES_UNDER_REFINEMENT
        sups = [s for _, s in rep.trace]
        for a, b in zip(sups, sups[1:]):
            assert b == 0.0 or a / b >= 1.5


def test_shifted_origin_identity_split():
    local, origin = check_shifted_origin_identity(
        ALPHA, OperatorSpec.from_scalar(RHO), 1.0, 1.0, 2.0, **LADDER)
    assert local.verdict is Verdict.VANISHES_UNDER_REFINEMENT
    assert origin.verdict is Verdict.BOUNDED_AWAY_FROM_ZERO
    assert origin.sup_norm >= 10.0 * origin.err_estimate


def test_candidate_comparison_scalar():
    cmp = verify_candidate_formulas(scalar_problem(), **LADDER)
    assert cmp.verdicts == (Verdict.BOUNDED_AWAY_FROM_ZERO,
                            Verdict.BOUNDED_AWAY_FROM_ZERO,
                            Verdict.VANISHES_UNDER_REFINEMENT)
    assert cmp.corrected_formula_confirmed


def test_piecewise_restart_vanishes():
    rep = check_piecewise_restart_residual(scalar_problem(), **LADDER)
    assert rep.verdict is Verdict.VANISHES_UNDER_REFINEMENT
    assert set(rep.piece_verdicts) == {0, 1}
    for v in rep.piece_verdicts.values():
        assert v is Verdict.VANISHES_UNDER_REFINEMENT


def test_restart_defect_properties():
    t1 = 1.0
    ts = (1.2, 1.5, 1.8)
    vals = [restart_formula_defect(RHO, t1, 1.2279, 1.0, t) for t in ts]
    for dv in vals:
        assert abs(dv.value) >= 10.0 * dv.error
    # genuinely a function of t, not a constant offset
    assert abs(vals[0].value - vals[2].value) > 1e-2
    # with x(t1-) + y1 = 0 and zero forcing slope the restarted piece is
    # identically zero, so the defect must vanish
    z = restart_formula_defect(RHO, t1, -1.0, 1.0, 1.5, forcing_slope=0.0)
    assert abs(z.value) <= 10.0 * max(z.error, 1e-13)


def test_shifted_defect_linear_in_jump():
    t1, t = 1.0, 1.5
    one = shifted_impulse_defect(RHO, t1, 1.0, t)
    two = shifted_impulse_defect(RHO, t1, 2.0, t)
    assert abs(one.value) >= 10.0 * one.error
    assert abs(two.value - 2.0 * one.value) <= 10.0 * (two.error + one.error)
    zero = shifted_impulse_defect(RHO, t1, 0.0, t)
    assert zero.value == 0j


def test_restart_defect_reduces_to_shifted_defect():
    # zero restart mass and zero slope isolate the jump term, where the
    # two defects describe the same object
    t1, t = 1.0, 1.6
    f = restart_formula_defect(RHO, t1, 0.0, 1.0, t, forcing_slope=0.0)
    g = shifted_impulse_defect(RHO, t1, 1.0, t)
    assert abs(f.value - g.value) <= 10.0 * (f.error + g.error)


def test_shifted_state_decomposition():
    lhs, rhs, gap = shifted_state_identity_gap(RHO, 1.0, 1.0, 1.5)
    assert abs(lhs) > 0.1
    assert gap <= 1e-7


def test_residual_at_times_bounded_for_wrong_candidates():
    prob = scalar_problem()
    for ev in (eval_restart_solution, eval_shifted_solution):
        traj = ev(prob)
        res, err = residual_at_times(prob, traj, (1.2, 1.5, 1.8),
                                     Convention.FORMULA_EXTENSION, tol=1e-8)
        assert np.min(np.abs(res)) >= 10.0 * err


def test_origin_mismatch_reports():
    reports = check_origin_mismatch(ALPHA, OperatorSpec.from_scalar(RHO),
                                    1.0, 1.0, horizon=2.0, **LADDER)
    assert any(r.bounded_away for r in reports)
    for r in reports:
        assert np.all(np.isfinite(r.gaps))
    trivial = check_origin_mismatch(ALPHA, OperatorSpec.from_scalar(RHO),
                                    1.0, 0.0, horizon=2.0, **LADDER)
    state_gap = trivial[0]
    assert not state_gap.bounded_away
    assert np.max(np.abs(state_gap.gaps)) <= 10.0 * max(
        state_gap.err_estimate, 1e-13)


def test_node_offset_does_not_flip_verdicts():
    prob = scalar_problem()
    traj = eval_shifted_solution(prob)
    a = residual_report(prob, traj, Convention.FORMULA_EXTENSION, **LADDER)
    b = residual_report(prob, traj, Convention.FORMULA_EXTENSION,
                        node_offset=0.3, **LADDER)
    assert a.verdict is b.verdict is Verdict.BOUNDED_AWAY_FROM_ZERO


def test_residual_report_rejects_missing_piece():
    import dataclasses

    prob = scalar_problem()
    traj = eval_restart_solution(prob)
    bad = dataclasses.replace(traj, has_formulas=False)
    with pytest.raises(MissingPieceFormula):
        residual_report(prob, bad, Convention.FORMULA_EXTENSION, **LADDER)
