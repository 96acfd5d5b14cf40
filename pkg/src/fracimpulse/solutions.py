"""Candidate mild-solution formulas for impulsive fractional problems.

An impulsive problem couples a Caputo evolution equation of order
0 < alpha < 1 with state jumps at fixed times.  Three closed-form
candidates circulate for its mild solution; they differ only in how the
impulses enter:

* ``eval_restart_solution``   - restarts the solution family at every
  impulse time (each piece evolves from its own origin),
* ``eval_shifted_solution``   - superposes one time-shifted solution
  family term per impulse,
* ``eval_pullback_solution``  - pulls every impulse back to the global
  origin through the inverse of the solution family.

All three produce :class:`Trajectory` objects carrying closed-form piece
descriptors, so downstream residual checks can evaluate and extend the
formulas without quadrature error in the states themselves.  The
verifier module decides which candidate actually solves the equation.

State-dependent forcing is handled by :func:`solve_picard`, a plain
fixed-point iteration on the pullback formula.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Callable, ClassVar, Optional, Sequence

import numpy as np

from .errors import NotConverged
from .mlf import MLArgs, cpow, cpow_grid, gamma_real, mlf, ml_grid
from .resolvent import OperatorSpec, s_alpha_inverse


# ---------------------------------------------------------------------------
# forcing and impulse descriptors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PolynomialForcing:
    """Pure-time polynomial forcing sum_j coeffs[j] * t**j.

    ``coeffs`` has shape (deg+1,) for scalar problems or (deg+1, dim)
    for vector ones.  Polynomial forcing keeps every evaluator fully
    closed-form.
    """

    coeffs: np.ndarray
    pure_time: ClassVar[bool] = True

    def __post_init__(self):
        arr = np.atleast_1d(np.asarray(self.coeffs, dtype=complex))
        object.__setattr__(self, "coeffs", arr)

    def __call__(self, t: float):
        total = None
        for j in range(self.coeffs.shape[0] - 1, -1, -1):
            c = self.coeffs[j]
            total = c if total is None else total * t + c
        if total is None:
            return 0j
        return total

    @classmethod
    def zero(cls, dim: int = 1):
        shape = (1,) if dim == 1 else (1, dim)
        return cls(np.zeros(shape, dtype=complex))

    @classmethod
    def constant(cls, value):
        return cls(np.asarray([value], dtype=complex))

    @classmethod
    def linear(cls, slope=1.0, offset=0.0):
        slope = np.asarray(slope, dtype=complex)
        offset = np.broadcast_to(np.asarray(offset, dtype=complex),
                                 slope.shape)
        return cls(np.stack([offset, slope]))


@dataclass(frozen=True)
class CallbackForcing:
    """Pure-time forcing given only as a callable; convolutions against
    it are sampled on a grid instead of closed-form."""

    fn: Callable[[float], complex]
    pure_time: ClassVar[bool] = True

    def __call__(self, t: float):
        return self.fn(t)


@dataclass(frozen=True)
class StateForcing:
    """State-dependent forcing f(t, x); only :func:`solve_picard` accepts it."""

    fn: Callable[[float, object], object]
    pure_time: ClassVar[bool] = False

    def __call__(self, t: float, x):
        return self.fn(t, x)


@dataclass(frozen=True)
class ConstantJump:
    """Impulse map returning a fixed state increment."""

    value: object

    def __call__(self, x):
        return self.value


@dataclass(frozen=True)
class AffineImpulse:
    """Impulse map x -> B x + c (B scalar or matrix, c state-shaped)."""

    matrix: object
    offset: object

    def __call__(self, x):
        b = self.matrix
        if np.ndim(b) == 2:
            return np.asarray(b) @ np.asarray(x) + np.asarray(self.offset)
        return b * x + self.offset


@dataclass(frozen=True)
class CallbackImpulse:
    """Impulse map given as an arbitrary callable on the pre-jump state."""

    fn: Callable[[object], object]

    def __call__(self, x):
        return self.fn(x)


# ---------------------------------------------------------------------------
# problem statement
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ImpulsiveProblem:
    """Caputo evolution problem with state jumps at fixed interior times.

    Fields
    ------
    alpha : order in (0, 1)
    op : OperatorSpec for the linear part
    forcing : PolynomialForcing | CallbackForcing | StateForcing
    x0 : initial state (complex scalar for scalar operators, vector else)
    impulse_times : strictly increasing times in (0, horizon)
    impulse_maps : one map per impulse time, applied to the left limit
    horizon : final time T > 0
    """

    alpha: float
    op: OperatorSpec
    forcing: object
    x0: object
    impulse_times: tuple = ()
    impulse_maps: tuple = ()
    horizon: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.horizon <= 0.0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        times = tuple(float(t) for t in self.impulse_times)
        object.__setattr__(self, "impulse_times", times)
        object.__setattr__(self, "impulse_maps", tuple(self.impulse_maps))
        if len(times) != len(self.impulse_maps):
            raise ValueError("one impulse map required per impulse time")
        prev = 0.0
        for t in times:
            if not prev < t < self.horizon:
                raise ValueError(
                    f"impulse times must satisfy 0 < t_1 < ... < t_m < "
                    f"{self.horizon}, got {times}"
                )
            prev = t
        x0v = np.atleast_1d(np.asarray(self.x0, dtype=complex))
        if x0v.shape != (self.op.dim,):
            raise ValueError(
                f"x0 has {x0v.shape[0]} components, operator acts on "
                f"{self.op.dim}"
            )

    @property
    def dim(self) -> int:
        return self.op.dim

    @property
    def is_scalar(self) -> bool:
        return self.op.kind == "scalar"

    def x0_vector(self) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.x0, dtype=complex))


# ---------------------------------------------------------------------------
# closed-form building blocks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MLTerm:
    """One summand coef * (u-base)**power * E_{alpha,beta}(rho*(u-base)**alpha).

    Every term used here keeps power == beta - 1, which makes the time
    derivative another term of the same family (the index-shift rule).
    Negative u-base is evaluated on the principal branch, so piece
    formulas extend below their base time.
    """

    coef: complex
    base: float
    power: float
    beta: float


def _term_derivative(term: MLTerm, alpha: float, rho: complex) -> MLTerm:
    if term.power == 0.0 and term.beta == 1.0:
        return MLTerm(term.coef * rho, term.base, alpha - 1.0, alpha)
    # d/dw [w^(beta-1) E_{a,beta}(rho w^a)] = w^(beta-2) E_{a,beta-1}(rho w^a)
    return MLTerm(term.coef, term.base, term.power - 1.0, term.beta - 1.0)


def _ml_antiderivatives(alpha: float, rho: complex, ws: np.ndarray):
    """M0(w), M1(w) with M0' = w^(a-1) E_{a,a}(rho w^a), M1' = w*M0'(w).

    M1 comes from integration by parts: M1 = w M0 - int_0^w M0, and the
    inner integral is the index-shift antiderivative w^(a+1) E_{a,a+2}.
    """
    ws = np.asarray(ws, dtype=float)
    za = rho * cpow_grid(ws, alpha)
    m0 = cpow_grid(ws, alpha) * ml_grid(alpha, alpha + 1.0, za)
    m00 = cpow_grid(ws, alpha + 1.0) * ml_grid(alpha, alpha + 2.0, za)
    return m0, ws * m0 - m00


def _pl_ml_convolve(alpha: float, rho: complex, nodes: np.ndarray,
                    gvals: np.ndarray, u: float) -> complex:
    """Integral of K(u-theta)*PL(g)(theta) over [nodes[0], u] with the
    full kernel K(tau) = tau^(alpha-1) E_{alpha,alpha}(rho tau^alpha)
    absorbed into closed moments; O(h^2) for smooth g."""
    if u <= nodes[0]:
        return 0j
    m = int(np.searchsorted(nodes, u, side="left"))
    th = np.append(nodes[:m], u)
    # slopes come from the full cells of the sampling grid even when the
    # last cell is truncated at u
    lo = th[:-1]
    hi = th[1:]
    g_lo = gvals[:m]
    widths_full = nodes[1:m + 1] - nodes[:m]
    with np.errstate(divide="ignore", invalid="ignore"):
        slopes = np.where(widths_full > 0.0,
                          (gvals[1:m + 1] - gvals[:m]) / widths_full, 0.0)
    keep = hi > lo
    m0, m1 = _ml_antiderivatives(alpha, rho, u - th)
    d0 = m0[:-1] - m0[1:]
    d1 = m1[:-1] - m1[1:]
    w_lo = u - lo
    contrib = g_lo * d0 + slopes * (w_lo * d0 - d1)
    return complex(np.sum(contrib[keep]))


@dataclass
class SampledConv:
    """Convolution of the singular solution-family kernel with a sampled
    forcing component; value(u) integrates the piecewise-linear
    interpolant of the samples from ``nodes[0]`` to ``u``."""

    alpha: float
    rho: complex
    nodes: np.ndarray
    gvals: np.ndarray

    def value(self, u: float) -> complex:
        if u < self.nodes[0] - 1e-12 * (1.0 + abs(self.nodes[0])):
            raise ValueError(
                "sampled convolution is not extendable below its base time"
            )
        if u > self.nodes[-1] + 1e-9 * (1.0 + abs(self.nodes[-1])):
            raise ValueError(
                f"sampled convolution queried at {u} beyond its grid end "
                f"{self.nodes[-1]}"
            )
        return _pl_ml_convolve(self.alpha, self.rho, self.nodes,
                               self.gvals, min(u, self.nodes[-1]))

    def values(self, us) -> np.ndarray:
        return np.array([self.value(float(u)) for u in np.atleast_1d(us)])


@dataclass
class ComponentFormula:
    """Closed-form (plus optionally sampled-convolution) formula for one
    eigencomponent of a trajectory piece."""

    alpha: float
    rho: complex
    terms: tuple
    conv: Optional[SampledConv] = None
    _dterms: Optional[tuple] = field(default=None, repr=False)

    def value(self, u: float) -> complex:
        total = 0j
        for tm in self.terms:
            w = u - tm.base
            if w == 0.0:
                if tm.power == 0.0:
                    total += tm.coef / gamma_real(tm.beta)
                continue
            z = self.rho * cpow(w, self.alpha)
            total += tm.coef * cpow(w, tm.power) * mlf(
                MLArgs(self.alpha, tm.beta), z)
        if self.conv is not None:
            total += self.conv.value(u)
        return total

    def values(self, us) -> np.ndarray:
        us = np.atleast_1d(np.asarray(us, dtype=float))
        out = np.zeros(us.shape, dtype=complex)
        for tm in self.terms:
            w = us - tm.base
            z = self.rho * cpow_grid(w, self.alpha)
            vals = tm.coef * cpow_grid(w, tm.power) * ml_grid(
                self.alpha, tm.beta, z)
            at_base = w == 0.0
            if at_base.any():
                vals[at_base] = (tm.coef / gamma_real(tm.beta)
                                 if tm.power == 0.0 else 0.0)
            out += vals
        if self.conv is not None:
            out += self.conv.values(us)
        return out

    @property
    def has_closed_derivative(self) -> bool:
        return self.conv is None

    def derivative(self, u: float) -> complex:
        if not self.has_closed_derivative:
            raise ValueError("derivative unavailable for sampled convolution")
        if self._dterms is None:
            self._dterms = tuple(
                _term_derivative(tm, self.alpha, self.rho) for tm in self.terms
            )
        total = 0j
        for tm in self._dterms:
            w = u - tm.base
            if w == 0.0:
                if tm.power == 0.0:
                    total += tm.coef / gamma_real(tm.beta)
                continue
            z = self.rho * cpow(w, self.alpha)
            total += tm.coef * cpow(w, tm.power) * mlf(
                MLArgs(self.alpha, tm.beta), z)
        return total


@dataclass
class Piece:
    """One inter-impulse segment (lo, hi] of a trajectory.

    ``formulas`` hold one ComponentFormula per eigencomponent; ``basis``
    carries (V, Vinv) for matrix problems.  ``origins`` lists the times
    where the piece formula has an algebraic singularity of its
    derivative (the bases of its terms), which quadrature must respect.
    """

    lo: float
    hi: float
    origins: tuple
    formulas: tuple
    basis: Optional[tuple]
    scalar: bool
    nodes: Optional[np.ndarray] = field(default=None, repr=False)
    samples: Optional[np.ndarray] = field(default=None, repr=False)
    start_value: object = None
    end_value: object = None

    def _combine(self, comps: np.ndarray):
        if self.basis is not None:
            v, _ = self.basis
            comps = v @ comps
        return comps

    def value(self, u: float):
        comps = np.array([f.value(u) for f in self.formulas])
        out = self._combine(comps)
        return complex(out[0]) if self.scalar else out

    def values(self, us) -> np.ndarray:
        comps = np.stack([f.values(us) for f in self.formulas])
        if self.basis is not None:
            v, _ = self.basis
            comps = v @ comps
        return comps[0] if self.scalar else comps.T

    @property
    def has_closed_derivative(self) -> bool:
        return all(f.has_closed_derivative for f in self.formulas)

    def derivative(self, u: float):
        comps = np.array([f.derivative(u) for f in self.formulas])
        out = self._combine(comps)
        return complex(out[0]) if self.scalar else out


@dataclass
class Trajectory:
    """Piecewise solution with recorded one-sided limits at impulse times.

    Piece k owns the half-open interval (t_k, t_{k+1}]; value(t_k) is
    the left limit, right limits live in ``right_values``.  Implements
    the sampling protocol expected by :func:`fracimpulse.caputo.
    caputo_piecewise`.
    """

    problem: ImpulsiveProblem
    label: str
    pieces: list
    jump_times: tuple
    jump_sizes: list
    left_values: list
    right_values: list
    has_formulas: bool
    iterations: Optional[int] = None

    def piece_index(self, t: float) -> int:
        if t < 0.0 or t > self.problem.horizon * (1.0 + 1e-12):
            raise ValueError(f"time {t} outside [0, {self.problem.horizon}]")
        return bisect.bisect_left(self.jump_times, t)

    def value(self, t: float):
        if t == 0.0:
            piece = self.pieces[0]
            return piece.start_value
        return self.pieces[self.piece_index(t)].value(t)

    def piece_nodes(self, k: int) -> np.ndarray:
        return self.pieces[k].nodes

    def piece_samples(self, k: int) -> np.ndarray:
        return self.pieces[k].samples


# ---------------------------------------------------------------------------
# shared construction helpers
# ---------------------------------------------------------------------------

def _eigensplit(problem: ImpulsiveProblem):
    op = problem.op
    if op.kind == "scalar":
        return np.array([op.rho], dtype=complex), None
    if not op.diagonalizable:
        raise ValueError(
            "closed-form evaluators require a diagonalizable operator"
        )
    return np.asarray(op.eigenvalues, dtype=complex), (
        np.asarray(op.eigenvectors, dtype=complex),
        np.asarray(op.eigenvectors_inv, dtype=complex),
    )


def _to_eigen(vec: np.ndarray, basis) -> np.ndarray:
    if basis is None:
        return vec
    _, vinv = basis
    return vinv @ vec


def _forcing_eigen_coeffs(problem: ImpulsiveProblem, basis) -> np.ndarray:
    """Polynomial forcing coefficients as an array (deg+1, n_components)
    in eigencoordinates."""
    coeffs = problem.forcing.coeffs
    if coeffs.ndim == 1:
        coeffs = coeffs[:, None]
    if coeffs.shape[1] != problem.dim:
        raise ValueError(
            f"forcing has {coeffs.shape[1]} components, problem has "
            f"{problem.dim}"
        )
    if basis is None:
        return coeffs
    _, vinv = basis
    return coeffs @ vinv.T


def _recenter_poly(coeffs: np.ndarray, b: float) -> np.ndarray:
    """Coefficients of the same polynomial written in powers of (t - b)."""
    deg = len(coeffs) - 1
    out = np.zeros(deg + 1, dtype=complex)
    for q in range(deg + 1):
        acc = 0j
        for j in range(q, deg + 1):
            acc += math.comb(j, q) * coeffs[j] * b ** (j - q)
        out[q] = acc
    return out


def _conv_terms(alpha: float, coeffs: np.ndarray, base: float):
    """Closed convolution of the solution-family kernel with a polynomial
    centered at ``base``: each monomial a_q (theta-base)^q contributes
    a_q q! w^(alpha+q) E_{alpha,alpha+q+1}(rho w^alpha)."""
    terms = []
    for q, a in enumerate(coeffs):
        if a == 0:
            continue
        terms.append(MLTerm(a * math.factorial(q), base,
                            alpha + q, alpha + q + 1.0))
    return terms


def _sample_forcing_eigen(problem: ImpulsiveProblem, basis, nodes: np.ndarray
                          ) -> np.ndarray:
    """Forcing samples per eigencomponent, shape (n_components, len(nodes))."""
    raw = np.array([np.atleast_1d(np.asarray(problem.forcing(float(t)),
                                             dtype=complex))
                    for t in nodes])
    if raw.shape[1] != problem.dim:
        raise ValueError(
            f"forcing returns {raw.shape[1]} components, problem has "
            f"{problem.dim}"
        )
    if basis is not None:
        _, vinv = basis
        raw = raw @ vinv.T
    return raw.T


def _finalize_piece(piece: Piece, n_dense: int):
    piece.nodes = np.linspace(piece.lo, piece.hi, n_dense + 1)
    piece.samples = piece.values(piece.nodes)
    piece.start_value = piece.value(piece.lo)
    piece.end_value = piece.value(piece.hi)


def _require_pure_time(problem: ImpulsiveProblem, who: str):
    if not getattr(problem.forcing, "pure_time", False):
        raise ValueError(
            f"{who} requires pure-time forcing; use solve_picard for "
            f"state-dependent problems"
        )


def _wrap_state(problem: ImpulsiveProblem, vec: np.ndarray):
    return complex(vec[0]) if problem.is_scalar else vec


def _edges(problem: ImpulsiveProblem):
    return [0.0, *problem.impulse_times, problem.horizon]


# ---------------------------------------------------------------------------
# the three candidate evaluators
# ---------------------------------------------------------------------------

def eval_restart_solution(problem: ImpulsiveProblem, n_per_piece: int = 512,
                          conv_samples: int = 1024) -> Trajectory:
    """Candidate that restarts the solution family at every impulse.

    Piece k evolves S(u - t_k) from the post-jump state and convolves
    the forcing from t_k only.  Jumps are exact by construction.
    """
    _require_pure_time(problem, "eval_restart_solution")
    rhos, basis = _eigensplit(problem)
    alpha = problem.alpha
    edges = _edges(problem)
    poly = isinstance(problem.forcing, PolynomialForcing)
    coeffs_eig = _forcing_eigen_coeffs(problem, basis) if poly else None

    state = problem.x0_vector()
    pieces, jumps, lefts, rights = [], [], [], []
    for k in range(len(edges) - 1):
        lo, hi = edges[k], edges[k + 1]
        shat = _to_eigen(state, basis)
        comps = []
        for i, rho in enumerate(rhos):
            terms = [MLTerm(shat[i], lo, 0.0, 1.0)]
            conv = None
            if poly:
                terms += _conv_terms(alpha, _recenter_poly(coeffs_eig[:, i], lo),
                                     lo)
            else:
                nodes = np.linspace(lo, hi, conv_samples + 1)
                gv = _sample_forcing_eigen(problem, basis, nodes)[i]
                conv = SampledConv(alpha, rho, nodes, gv)
            comps.append(ComponentFormula(alpha, complex(rho), tuple(terms),
                                          conv))
        piece = Piece(lo, hi, origins=(lo,), formulas=tuple(comps),
                      basis=basis, scalar=problem.is_scalar)
        _finalize_piece(piece, n_per_piece)
        pieces.append(piece)
        if k < len(problem.impulse_times):
            left = np.atleast_1d(np.asarray(piece.value(hi), dtype=complex))
            jump = np.atleast_1d(np.asarray(
                problem.impulse_maps[k](_wrap_state(problem, left)),
                dtype=complex))
            lefts.append(_wrap_state(problem, left))
            jumps.append(_wrap_state(problem, jump))
            state = left + jump
            rights.append(_wrap_state(problem, state.copy()))
    return Trajectory(problem, "restart", pieces, problem.impulse_times,
                      jumps, lefts, rights, has_formulas=True)


def eval_shifted_solution(problem: ImpulsiveProblem, n_per_piece: int = 512,
                          conv_samples: int = 1024) -> Trajectory:
    """Candidate that adds one time-shifted family term per impulse.

    Piece k evaluates S(u) x0 + sum_{i<=k} S(u - t_i) J_i plus the
    forcing convolution taken from the global origin.
    """
    _require_pure_time(problem, "eval_shifted_solution")
    rhos, basis = _eigensplit(problem)
    alpha = problem.alpha
    edges = _edges(problem)
    poly = isinstance(problem.forcing, PolynomialForcing)

    x0hat = _to_eigen(problem.x0_vector(), basis)
    conv_terms, convs = [], []
    if poly:
        coeffs_eig = _forcing_eigen_coeffs(problem, basis)
        conv_terms = [_conv_terms(alpha, coeffs_eig[:, i], 0.0)
                      for i in range(len(rhos))]
    else:
        m = len(problem.impulse_times) + 1
        nodes = np.linspace(0.0, problem.horizon, conv_samples * m + 1)
        gv = _sample_forcing_eigen(problem, basis, nodes)
        convs = [SampledConv(alpha, complex(r), nodes, gv[i])
                 for i, r in enumerate(rhos)]

    base_terms = [[MLTerm(x0hat[i], 0.0, 0.0, 1.0)] for i in range(len(rhos))]
    pieces, jumps, lefts, rights = [], [], [], []
    for k in range(len(edges) - 1):
        lo, hi = edges[k], edges[k + 1]
        comps = []
        for i, rho in enumerate(rhos):
            terms = list(base_terms[i]) + (conv_terms[i] if poly else [])
            conv = convs[i] if not poly else None
            comps.append(ComponentFormula(alpha, complex(rho), tuple(terms),
                                          conv))
        origins = (0.0,) + problem.impulse_times[:k]
        piece = Piece(lo, hi, origins=origins, formulas=tuple(comps),
                      basis=basis, scalar=problem.is_scalar)
        _finalize_piece(piece, n_per_piece)
        pieces.append(piece)
        if k < len(problem.impulse_times):
            left = np.atleast_1d(np.asarray(piece.value(hi), dtype=complex))
            jump = np.atleast_1d(np.asarray(
                problem.impulse_maps[k](_wrap_state(problem, left)),
                dtype=complex))
            jhat = _to_eigen(jump, basis)
            for i in range(len(rhos)):
                base_terms[i].append(MLTerm(jhat[i], hi, 0.0, 1.0))
            lefts.append(_wrap_state(problem, left))
            jumps.append(_wrap_state(problem, jump))
            rights.append(_wrap_state(problem, left + jump))
    return Trajectory(problem, "shifted", pieces, problem.impulse_times,
                      jumps, lefts, rights, has_formulas=True)


def eval_pullback_solution(problem: ImpulsiveProblem, n_per_piece: int = 512,
                           conv_samples: int = 1024) -> Trajectory:
    """Candidate that pulls impulses back to the origin through the
    inverse of the solution family.

    Piece k evaluates S(u) z_k + forcing convolution from 0, where
    z_k = x0 + sum_{i<=k} S(t_i)^{-1} J_i.  Every piece formula is a
    single function smooth on (0, T], so this candidate is the one
    compatible with the global (origin-based) Caputo derivative.

    Raises NumericallySingular if the family is not invertible at an
    impulse time.
    """
    _require_pure_time(problem, "eval_pullback_solution")
    rhos, basis = _eigensplit(problem)
    alpha = problem.alpha
    edges = _edges(problem)
    poly = isinstance(problem.forcing, PolynomialForcing)

    conv_terms, convs = [], []
    if poly:
        coeffs_eig = _forcing_eigen_coeffs(problem, basis)
        conv_terms = [_conv_terms(alpha, coeffs_eig[:, i], 0.0)
                      for i in range(len(rhos))]
    else:
        m = len(problem.impulse_times) + 1
        nodes = np.linspace(0.0, problem.horizon, conv_samples * m + 1)
        gv = _sample_forcing_eigen(problem, basis, nodes)
        convs = [SampledConv(alpha, complex(r), nodes, gv[i])
                 for i, r in enumerate(rhos)]

    zhat = _to_eigen(problem.x0_vector(), basis).copy()
    pieces, jumps, lefts, rights = [], [], [], []
    for k in range(len(edges) - 1):
        lo, hi = edges[k], edges[k + 1]
        comps = []
        for i, rho in enumerate(rhos):
            terms = [MLTerm(zhat[i], 0.0, 0.0, 1.0)] + (conv_terms[i]
                                                        if poly else [])
            conv = convs[i] if not poly else None
            comps.append(ComponentFormula(alpha, complex(rho), tuple(terms),
                                          conv))
        piece = Piece(lo, hi, origins=(0.0,), formulas=tuple(comps),
                      basis=basis, scalar=problem.is_scalar)
        _finalize_piece(piece, n_per_piece)
        pieces.append(piece)
        if k < len(problem.impulse_times):
            left = np.atleast_1d(np.asarray(piece.value(hi), dtype=complex))
            jump = np.atleast_1d(np.asarray(
                problem.impulse_maps[k](_wrap_state(problem, left)),
                dtype=complex))
            sinv = s_alpha_inverse(alpha, problem.op, hi)
            pulled = sinv @ jump if problem.op.kind == "matrix" else sinv * jump
            zhat = zhat + _to_eigen(np.atleast_1d(pulled), basis)
            lefts.append(_wrap_state(problem, left))
            jumps.append(_wrap_state(problem, jump))
            rights.append(_wrap_state(problem, left + jump))
    return Trajectory(problem, "pullback", pieces, problem.impulse_times,
                      jumps, lefts, rights, has_formulas=True)


# ---------------------------------------------------------------------------
# numeric convolution against the singular family kernel
# ---------------------------------------------------------------------------

def convolve_t_alpha(alpha: float, op: OperatorSpec, f, t: float,
                     h: Optional[float] = None):
    """Convolution of the singular solution-family kernel with forcing f
    over [0, t], by product integration on a uniform grid.

    The full kernel (t-theta)^(alpha-1) E_{alpha,alpha}(op (t-theta)^alpha)
    is absorbed into closed moment weights; only f is interpolated
    piecewise-linearly, so the error is O(h^2) for smooth f.

    Parameters
    ----------
    h : float, optional
        Grid spacing; defaults to t/512.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if t <= 0.0:
        raise ValueError(f"convolution horizon must be positive, got {t}")
    n = 512 if h is None else max(2, int(math.ceil(t / h - 1e-12)))
    nodes = np.linspace(0.0, t, n + 1)
    if op.kind == "scalar":
        gv = np.asarray([complex(f(float(s))) for s in nodes])
        return _pl_ml_convolve(alpha, op.rho, nodes, gv, t)
    if not op.diagonalizable:
        raise ValueError("convolve_t_alpha requires a diagonalizable operator")
    v = np.asarray(op.eigenvectors, dtype=complex)
    vinv = np.asarray(op.eigenvectors_inv, dtype=complex)
    raw = np.array([np.asarray(f(float(s)), dtype=complex) for s in nodes])
    ghat = raw @ vinv.T
    comps = np.array([
        _pl_ml_convolve(alpha, complex(rho), nodes, ghat[:, i], t)
        for i, rho in enumerate(op.eigenvalues)
    ])
    return v @ comps


# ---------------------------------------------------------------------------
# fixed-point solver for state-dependent forcing
# ---------------------------------------------------------------------------

def solve_picard(problem: ImpulsiveProblem, n_per_piece: int = 256,
                 tol: float = 1e-8, max_iter: int = 50) -> Trajectory:
    """Fixed-point iteration on the pullback formula for state-dependent
    forcing.

    Each sweep freezes the forcing along the previous iterate, builds
    the resulting linear trajectory, and measures the sup-norm change on
    the sampling grid.  The returned trajectory's ``iterations`` counts
    the sweeps after the first construction; pure-time forcing therefore
    converges in exactly 1 iteration.

    Raises NotConverged when max_iter sweeps leave the change above tol
    (a Lipschitz constant too large for plain iteration at this horizon).
    """
    rhos, basis = _eigensplit(problem)
    alpha = problem.alpha
    edges = _edges(problem)
    pure = getattr(problem.forcing, "pure_time", False)

    piece_nodes = [np.linspace(edges[k], edges[k + 1], n_per_piece + 1)
                   for k in range(len(edges) - 1)]
    all_nodes = np.concatenate(piece_nodes)

    x0v = problem.x0_vector()
    prev_vals = [np.tile(x0v, (len(nd), 1)) for nd in piece_nodes]

    def forcing_samples(vals_by_piece):
        out = []
        for nd, xv in zip(piece_nodes, vals_by_piece):
            for s, x in zip(nd, xv):
                state = _wrap_state(problem, x)
                fv = problem.forcing(float(s)) if pure else problem.forcing(
                    float(s), state)
                out.append(np.atleast_1d(np.asarray(fv, dtype=complex)))
        raw = np.array(out)
        if basis is not None:
            _, vinv = basis
            raw = raw @ vinv.T
        return raw.T

    last = None
    for sweep in range(1, max_iter + 2):
        ghat = forcing_samples(prev_vals)
        convs = [SampledConv(alpha, complex(r), all_nodes, ghat[i])
                 for i, r in enumerate(rhos)]
        zhat = _to_eigen(x0v, basis).copy()
        pieces, jumps, lefts, rights = [], [], [], []
        new_vals = []
        for k in range(len(edges) - 1):
            lo, hi = edges[k], edges[k + 1]
            comps = [
                ComponentFormula(alpha, complex(rho),
                                 (MLTerm(zhat[i], 0.0, 0.0, 1.0),), convs[i])
                for i, rho in enumerate(rhos)
            ]
            piece = Piece(lo, hi, origins=(0.0,), formulas=tuple(comps),
                          basis=basis, scalar=problem.is_scalar)
            piece.nodes = piece_nodes[k]
            vals = piece.values(piece.nodes)
            piece.samples = vals
            piece.start_value = piece.value(lo)
            piece.end_value = piece.value(hi)
            pieces.append(piece)
            new_vals.append(vals[:, None] if vals.ndim == 1 else vals)
            if k < len(problem.impulse_times):
                left = np.atleast_1d(np.asarray(piece.value(hi),
                                                dtype=complex))
                jump = np.atleast_1d(np.asarray(
                    problem.impulse_maps[k](_wrap_state(problem, left)),
                    dtype=complex))
                sinv = s_alpha_inverse(alpha, problem.op, hi)
                pulled = (sinv @ jump if problem.op.kind == "matrix"
                          else sinv * jump)
                zhat = zhat + _to_eigen(np.atleast_1d(pulled), basis)
                lefts.append(_wrap_state(problem, left))
                jumps.append(_wrap_state(problem, jump))
                rights.append(_wrap_state(problem, left + jump))
        traj = Trajectory(problem, "picard", pieces, problem.impulse_times,
                          jumps, lefts, rights, has_formulas=True)
        diff = max(
            float(np.max(np.abs(nv - pv))) if nv.size else 0.0
            for nv, pv in zip(new_vals, prev_vals)
        )
        prev_vals = new_vals
        if last is not None and diff <= tol:
            traj.iterations = sweep - 1
            return traj
        last = traj
    raise NotConverged(
        f"fixed-point iteration stalled above tol={tol:g} after "
        f"{max_iter} sweeps"
    )
