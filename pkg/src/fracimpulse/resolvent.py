"""Operator families generated by A for the order-alpha evolution problem.

For a scalar rho or a square matrix A this module evaluates

    s_alpha(t)   = E_{alpha,1}(A t**alpha)
    t_alpha(t)   = t**(alpha-1) * E_{alpha,alpha}(A t**alpha)

together with the inverse of s_alpha at impulse times and a
finite-dimensional sectorial-type diagnostic.  Matrix arguments go
through the spectral decomposition when the eigenvector basis is well
conditioned; otherwise a truncated operator power series with a norm
tail bound serves as fallback.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericallySingular, SeriesDivergence, SingularTime
from .mlf import MLArgs, cpow, mlf

__all__ = [
    "OperatorSpec",
    "SectorParams",
    "SectorReport",
    "s_alpha",
    "t_alpha",
    "s_alpha_inverse",
    "sector_check",
]

_COND_EIGENBASIS = 1e8
_COND_SINGULAR = 1e12
_SERIES_TAIL = 1e-11
_SERIES_CAP = 2000


@dataclass(frozen=True)
class OperatorSpec:
    """A scalar or matrix generator with an optional spectral cache.

    Build instances through ``OperatorSpec.from_scalar`` or
    ``OperatorSpec.from_matrix``; the constructor itself performs no
    validation or decomposition.
    """

    kind: str
    rho: complex = 0j
    matrix: np.ndarray | None = None
    eigenvalues: np.ndarray | None = None
    eigenvectors: np.ndarray | None = None
    eigenvectors_inv: np.ndarray | None = None
    diagonalizable: bool = False

    @classmethod
    def from_scalar(cls, rho: complex) -> "OperatorSpec":
        return cls(kind="scalar", rho=complex(rho))

    @classmethod
    def from_matrix(cls, a) -> "OperatorSpec":
        a = np.asarray(a, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError(f"matrix must be square and nonempty, got shape {a.shape}")
        lam, vec = np.linalg.eig(a)
        diagonalizable = False
        vec_inv = None
        cond = np.linalg.cond(vec)
        if np.isfinite(cond) and cond < _COND_EIGENBASIS:
            vec_inv = np.linalg.inv(vec)
            recon = vec @ np.diag(lam) @ vec_inv
            scale = 1.0 + np.linalg.norm(a, 2)
            if np.linalg.norm(recon - a, 2) <= 1e-10 * scale:
                diagonalizable = True
        if not diagonalizable:
            lam = vec = vec_inv = None
        return cls(kind="matrix", matrix=a, eigenvalues=lam, eigenvectors=vec,
                   eigenvectors_inv=vec_inv, diagonalizable=diagonalizable)

    @property
    def dim(self) -> int:
        return 1 if self.kind == "scalar" else self.matrix.shape[0]

    def identity(self):
        if self.kind == "scalar":
            return complex(1.0)
        return np.eye(self.dim, dtype=complex)


@dataclass(frozen=True)
class SectorParams:
    """Sector shape: vertex shift mu, half-angle theta, bound constant M."""

    M: float
    theta: float
    mu: float = 0.0

    def __post_init__(self):
        if not self.M > 0:
            raise ValueError(f"M must be positive, got {self.M}")
        if not 0.0 < self.theta < 0.5 * math.pi:
            raise ValueError(f"theta must lie in (0, pi/2), got {self.theta}")


@dataclass
class SectorReport:
    """Advisory diagnostic from ``sector_check``."""

    eigenvalues: np.ndarray
    outside: list
    angular_margins: list
    bound_ratio_max: float
    sample_count: int
    passed: bool
    warnings: list = field(default_factory=list)


def _ml_matrix_series(b: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    """Sum E_{alpha,beta}(B) = sum_k B**k / Gamma(alpha*k+beta) directly.

    Fallback for matrices without a trustworthy eigenbasis.  The tail is
    bounded through the spectral norm of B; the partial terms must stay
    small enough that double-precision summation can certify the 1e-11
    tail, otherwise SeriesDivergence is raised.
    """
    n = b.shape[0]
    norm_b = float(np.linalg.norm(b, 2))
    if norm_b > 0:
        # largest scalar majorant term norm_b**k / Gamma(alpha*k+beta)
        log_peak = -math.lgamma(beta)
        k = 1
        log_term = math.log(norm_b) - math.lgamma(alpha + beta)
        while log_term > log_peak and k < _SERIES_CAP:
            log_peak = max(log_peak, log_term)
            k += 1
            log_term = k * math.log(norm_b) - math.lgamma(alpha * k + beta)
        if log_peak > math.log(1e12):
            raise SeriesDivergence(
                f"operator series cannot certify its tail bound at ||B|| = {norm_b:.3g}"
            )
    total = np.eye(n, dtype=complex) / math.gamma(beta)
    power = np.eye(n, dtype=complex)
    for k in range(1, _SERIES_CAP):
        power = power @ b
        total += power / math.gamma(alpha * k + beta)
        bound = norm_b ** k / math.gamma(alpha * k + beta)
        ratio = norm_b / math.exp(math.lgamma(alpha * (k + 1) + beta)
                                  - math.lgamma(alpha * k + beta))
        if ratio < 0.5 and bound * ratio / (1.0 - ratio) < _SERIES_TAIL:
            return total
    raise SeriesDivergence(
        f"operator series needed more than {_SERIES_CAP} terms at ||B|| = {norm_b:.3g}"
    )


def _ml_operator(alpha: float, beta: float, op: OperatorSpec, t: float):
    """Evaluate E_{alpha,beta}(A t**alpha) for scalar or matrix A."""
    args = MLArgs(alpha, beta)
    ta = t ** alpha
    if op.kind == "scalar":
        return mlf(args, op.rho * ta)
    if op.diagonalizable:
        values = np.array([mlf(args, lam * ta) for lam in op.eigenvalues])
        return op.eigenvectors @ np.diag(values) @ op.eigenvectors_inv
    return _ml_matrix_series(op.matrix * ta, alpha, beta)


def s_alpha(alpha: float, op: OperatorSpec, t: float):
    """State propagator E_{alpha,1}(A t**alpha); identity at t = 0."""
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    if t == 0:
        return op.identity()
    return _ml_operator(alpha, 1.0, op, t)


def t_alpha(alpha: float, op: OperatorSpec, t: float):
    """Forcing propagator t**(alpha-1) * E_{alpha,alpha}(A t**alpha).

    Raises SingularTime at t = 0 where the kernel blows up (alpha < 1).
    """
    if t <= 0:
        raise SingularTime(f"forcing propagator kernel is singular at t = {t}")
    return t ** (alpha - 1.0) * _ml_operator(alpha, alpha, op, t)


def s_alpha_inverse(alpha: float, op: OperatorSpec, t_i: float):
    """Inverse of the state propagator at an impulse time t_i > 0.

    Raises NumericallySingular when the propagator has no trustworthy
    inverse: a scalar value of modulus below 1e-13 (the entire function
    E_{alpha,1} does have complex zeros) or a matrix condition number
    above 1e12.
    """
    if t_i <= 0:
        raise ValueError(f"t_i must be positive, got {t_i}")
    s = s_alpha(alpha, op, t_i)
    if op.kind == "scalar":
        if abs(s) < 1e-13:
            raise NumericallySingular(
                f"propagator value {s:.3e} at t_i = {t_i} is below 1e-13"
            )
        return 1.0 / s
    cond = np.linalg.cond(s)
    if not np.isfinite(cond) or cond > _COND_SINGULAR:
        raise NumericallySingular(
            f"propagator at t_i = {t_i} has condition estimate {cond:.3e}"
        )
    inv = np.linalg.solve(s, np.eye(op.dim, dtype=complex))
    defect = np.linalg.norm(s @ inv - np.eye(op.dim), 2)
    if defect > 1e-9:
        raise NumericallySingular(
            f"inverse verification failed: ||S S^-1 - I|| = {defect:.3e}"
        )
    return inv


def sector_check(alpha: float, a, params: SectorParams) -> SectorReport:
    """Finite-dimensional sectorial-type diagnostic (advisory only).

    Checks, for each eigenvalue of the matrix, whether it lies outside
    the closed sector {w : |arg(w - mu)| <= theta} around the positive
    real axis, and samples the resolvent-norm bound

        ||lambda**(alpha-1) (lambda**alpha I - A)^-1|| <= M / |w - mu|,
        w = lambda**alpha,

    at 32 points on the sector boundary (16 log-spaced radii per ray).
    The report never raises; violations appear as warnings.
    """
    if isinstance(a, OperatorSpec):
        a = np.array([[a.rho]]) if a.kind == "scalar" else a.matrix
    a = np.asarray(a, dtype=complex)
    lam = np.linalg.eigvals(a)

    outside = []
    margins = []
    warnings = []
    for ev in lam:
        w = ev - params.mu
        if w == 0:
            outside.append(False)
            margins.append(-params.theta)
            warnings.append(f"eigenvalue {ev:.6g} sits at the sector vertex")
            continue
        margin = abs(cmath.phase(w)) - params.theta
        outside.append(margin > 0)
        margins.append(margin)
        if margin <= 0:
            warnings.append(
                f"eigenvalue {ev:.6g} lies inside the sector (margin {margin:.3g} rad)"
            )

    radius_scale = 1.0 + float(np.max(np.abs(lam)))
    radii = np.logspace(-2, 2, 16) * radius_scale
    eye = np.eye(a.shape[0], dtype=complex)
    ratio_max = 0.0
    count = 0
    for sign in (+1.0, -1.0):
        edge = cmath.exp(1j * sign * params.theta)
        for r in radii:
            w = params.mu + r * edge
            lam_pt = cpow(w, 1.0 / alpha)
            try:
                res = np.linalg.inv(w * eye - a)
            except np.linalg.LinAlgError:
                warnings.append(f"resolvent singular at boundary sample w = {w:.6g}")
                ratio_max = math.inf
                count += 1
                continue
            lhs = abs(lam_pt ** (alpha - 1.0)) * np.linalg.norm(res, 2)
            ratio = lhs * abs(w - params.mu) / params.M
            ratio_max = max(ratio_max, float(ratio))
            count += 1
    if ratio_max > 1.0:
        warnings.append(
            f"sampled resolvent bound exceeds M: max ratio {ratio_max:.3g}"
        )
    return SectorReport(
        eigenvalues=lam,
        outside=outside,
        angular_margins=margins,
        bound_ratio_max=ratio_max,
        sample_count=count,
        passed=all(outside),
        warnings=warnings,
    )
