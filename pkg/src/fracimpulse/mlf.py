"""Mittag-Leffler function evaluated by two independent algorithms.

The two-parameter Mittag-Leffler function is

    E_{a,b}(z) = sum_{j>=0} z**j / Gamma(a*j + b),    0 < a <= 1, b > 0,

an entire function that generalizes the exponential (E_{1,1} = exp).
Two evaluation paths cross-validate each other:

* ``mlf_series``: the truncated power series.  A cheap scan of the term
  magnitudes (log-concave in j) locates the largest term up front; when
  double-precision summation would lose the target accuracy to
  cancellation, the same sum is re-run at a fixed higher working
  precision chosen from the peak magnitude.

* ``mlf_contour``: the trapezoidal rule applied to the integral

      E_{a,b}(z) = (1/2*pi*i) * int_H exp(mu) * mu**(a-b) / (mu**a - z) dmu

  on the parabolic Hankel path mu(u) = shift + scale*(i*u + 1)**2,
  u in [-U, U], which wraps the negative real axis and must enclose the
  disc |mu| < |z|**(1/a) containing all poles of the integrand.

Complex powers use the principal branch (arg in (-pi, pi]) throughout.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .errors import NonConvergent, PoleProximity

__all__ = [
    "MLArgs",
    "ContourParams",
    "SERIES_RADIUS",
    "mlf",
    "mlf_series",
    "mlf_contour",
    "mlf_deriv",
    "contour_params_for",
    "ml_grid",
    "ml_deriv_grid",
    "cpow",
    "cpow_grid",
    "gamma_real",
]

# Beyond this radius the series loses digits to cancellation for z with
# negative real part, so the dispatcher hands off to the contour.
SERIES_RADIUS = 8.0

_EPS = 2.2204460492503131e-16
_MAX_TERMS = 60000
# mpmath working precision beyond this means the inputs are far outside
# the regime this library is tuned for
_MAX_DIGITS = 3000


@dataclass(frozen=True)
class MLArgs:
    """Order parameters and accuracy target for E_{alpha,beta}."""

    alpha: float
    beta: float
    tol: float = 1e-12

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must satisfy 0 < alpha <= 1, got {self.alpha}")
        if not self.beta > 0.0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not (self.tol > 0.0 and self.tol >= 1e-14):
            raise ValueError(f"tol must satisfy tol >= 1e-14, got {self.tol}")


@dataclass(frozen=True)
class ContourParams:
    """Parabolic Hankel path mu(u) = shift + scale*(i*u + 1)**2."""

    scale: float
    shift: float = 0.0
    node_count: int = 96

    def __post_init__(self):
        if self.node_count < 8:
            raise ValueError(f"node_count must be >= 8, got {self.node_count}")
        if not self.scale > 0.0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if not self.shift + self.scale > 0.0:
            raise ValueError("contour apex shift + scale must be positive")


def gamma_real(x: float) -> float:
    """Gamma function at real positive arguments (<= 1e-13 relative error)."""
    if x <= 0.0:
        raise ValueError(f"gamma_real requires a positive argument, got {x}")
    return math.gamma(x)


def cpow(w, p: float) -> complex:
    """Principal-branch power w**p with exact phase for real negative w."""
    if isinstance(w, complex):
        if w == 0:
            return 0j if p > 0 else complex(1.0)
        if w.imag == 0.0:
            return cpow(w.real, p)
        return cmath.exp(p * cmath.log(w))
    w = float(w)
    if w == 0.0:
        return 0j if p > 0 else complex(1.0)
    if w > 0.0:
        return complex(w ** p)
    return abs(w) ** p * complex(math.cos(math.pi * p), math.sin(math.pi * p))


def cpow_grid(w, p: float) -> np.ndarray:
    """Vectorized ``cpow`` for a real array; returns a complex array."""
    w = np.asarray(w, dtype=float)
    out = np.zeros(w.shape, dtype=complex)
    pos = w > 0
    neg = w < 0
    out[pos] = w[pos] ** p
    if neg.any():
        out[neg] = np.abs(w[neg]) ** p * complex(
            math.cos(math.pi * p), math.sin(math.pi * p)
        )
    if p == 0.0:
        out[w == 0] = 1.0
    return out


# ---------------------------------------------------------------------------
# series path
# ---------------------------------------------------------------------------

def _term_log(j: int, log_abs_z: float, alpha: float, beta: float,
              deriv: bool) -> float:
    # log magnitude of term j; for the derivative series the weight (j+1)
    # multiplies the term and beta has already been shifted by alpha
    t = j * log_abs_z - math.lgamma(alpha * j + beta)
    if deriv:
        t += math.log1p(j)
    return t


def _peak_index(log_abs_z: float, alpha: float, beta: float, deriv: bool) -> int:
    # the log-term is strictly concave in j, so its discrete slope
    # decreases; exponential bracket then bisect for the last uphill step
    def tl(j):
        return _term_log(j, log_abs_z, alpha, beta, deriv)

    if tl(1) <= tl(0):
        return 0
    lo, hi = 1, 2
    while tl(hi + 1) > tl(hi):
        lo = hi
        hi *= 2
        if hi > 10 ** 8:
            raise NonConvergent("series peak scan exceeded 1e8 terms")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if tl(mid + 1) > tl(mid):
            lo = mid
        else:
            hi = mid
    return hi


def _sum_series_double(z: complex, alpha: float, beta: float, tol: float,
                       deriv: bool, j_peak: int) -> complex:
    log_abs_z = math.log(abs(z))
    phase = cmath.phase(z)
    total = 0.0 + 0.0j
    prev_mag = math.inf
    for j in range(_MAX_TERMS):
        t = _term_log(j, log_abs_z, alpha, beta, deriv)
        mag = math.exp(t)
        arg = j * phase
        total += mag * complex(math.cos(arg), math.sin(arg))
        if j > j_peak:
            if mag == 0.0:
                return total
            ratio = mag / prev_mag
            if ratio < 0.9 and mag * ratio / (1.0 - ratio) < 0.5 * tol:
                return total
        prev_mag = mag
    raise NonConvergent(
        f"series needed more than {_MAX_TERMS} terms at |z| = {abs(z):.3g}"
    )


def _sum_series_mp(z: complex, alpha: float, beta: float, tol: float,
                   deriv: bool, j_peak: int, log_peak: float) -> complex:
    import mpmath as mp

    digits = int(log_peak / math.log(10.0)) + int(-math.log10(tol)) + 12
    digits = max(25, digits)
    if digits > _MAX_DIGITS:
        raise NonConvergent(
            f"series would need {digits} working digits at |z| = {abs(z):.3g}"
        )
    with mp.workdps(digits):
        zmp = mp.mpc(z)
        total = mp.mpc(0)
        zpow = mp.mpc(1)
        tol_mp = mp.mpf(tol)
        prev_mag = mp.inf
        amp = mp.mpf(alpha)
        bmp = mp.mpf(beta)
        for j in range(_MAX_TERMS):
            # the gamma argument must be formed at working precision: a
            # double-precision alpha*j carries an ulp error that psi(.)
            # amplifies into the leading digits of the largest terms
            term = zpow * mp.rgamma(amp * j + bmp)
            if deriv:
                term *= (j + 1)
            total += term
            mag = abs(term)
            if j > j_peak:
                if mag == 0:
                    break
                ratio = mag / prev_mag
                if ratio < mp.mpf("0.9") and mag * ratio / (1 - ratio) < tol_mp / 2:
                    break
            prev_mag = mag
            zpow *= zmp
        else:
            raise NonConvergent(
                f"series needed more than {_MAX_TERMS} terms at |z| = {abs(z):.3g}"
            )
        try:
            result = complex(total)
        except (OverflowError, ValueError):
            raise NonConvergent(
                "function value exceeds the double-precision range"
            ) from None
    if not (math.isfinite(result.real) and math.isfinite(result.imag)):
        raise NonConvergent("function value exceeds the double-precision range")
    return result


def _series_eval(z: complex, alpha: float, beta: float, tol: float,
                 deriv: bool) -> complex:
    z = complex(z)
    if z == 0:
        # only the j = 0 term survives (weight 1 in both series)
        return complex(1.0 / gamma_real(beta))
    log_abs_z = math.log(abs(z))
    j_peak = _peak_index(log_abs_z, alpha, beta, deriv)
    log_peak = _term_log(j_peak, log_abs_z, alpha, beta, deriv)
    # double-precision summation carries roundoff of order eps times the
    # largest term; escalate the working precision when that floor would
    # exceed the requested absolute accuracy
    if log_peak > 700.0 or math.exp(log_peak) * _EPS * 16.0 > tol:
        return _sum_series_mp(z, alpha, beta, tol, deriv, j_peak, log_peak)
    return _sum_series_double(z, alpha, beta, tol, deriv, j_peak)


def mlf_series(args: MLArgs, z: complex) -> complex:
    """Evaluate E_{alpha,beta}(z) by the truncated power series.

    Parameters
    ----------
    args : MLArgs
        Order parameters and target absolute accuracy.
    z : complex
        Argument; intended for |z| <= SERIES_RADIUS, although the
        implementation escalates working precision rather than failing
        beyond it.

    Raises
    ------
    NonConvergent
        If the term cap is exceeded before the tail bound is met, or the
        function value cannot be represented in double precision.
    """
    return _series_eval(z, args.alpha, args.beta, args.tol, deriv=False)


def mlf_deriv(args: MLArgs, z: complex) -> complex:
    """Evaluate the derivative E'_{alpha,beta}(z) of the series termwise.

    Uses E'_{a,b}(z) = sum_{j>=0} (j+1) z**j / Gamma(a*j + a + b), the
    termwise derivative of the defining series.
    """
    if z == 0:
        return complex(1.0 / gamma_real(args.alpha + args.beta))
    return _series_eval(z, args.alpha, args.alpha + args.beta, args.tol,
                        deriv=True)


# ---------------------------------------------------------------------------
# contour path
# ---------------------------------------------------------------------------

def _pole_radius(alpha: float, z: complex) -> float:
    # all poles of 1/(mu**alpha - z) on the principal sheet sit on the
    # circle |mu| = |z|**(1/alpha)
    if z == 0:
        return 0.0
    return abs(z) ** (1.0 / alpha)


def _strip_halfwidth(alpha: float, z: complex, scale: float) -> float:
    # half-width of the strip of analyticity of the integrand as a
    # function of the contour parameter u; limited by the branch cut
    # image at |Im u| = 1 and, when a pole lies on the principal sheet,
    # by the pole preimage
    d = 0.95
    if z != 0:
        psi = cmath.phase(z) / alpha
        if abs(psi) <= math.pi:
            r_pole = _pole_radius(alpha, z)
            d_pole = 1.0 - math.sqrt(r_pole / scale) * math.cos(0.5 * psi)
            d = min(d, d_pole)
    return max(d, 1e-3)


def contour_params_for(args: MLArgs, z: complex, node_count: int = 96) -> ContourParams:
    """Select a parabolic contour for the given argument.

    The scale places the contour apex a safe factor outside the pole
    circle |mu| = |z|**(1/alpha).  The node count comes from the
    trapezoid's strip analysis in the contour parameter u.  Writing
    q = pi/(h*scale) for step h, the two half-strips contribute

    * below the real axis, exp(mu(u)) grows like exp(scale*(1+d)**2), so
      the error term exp(2*pi*d/h - scale*(1+d)**2) is only driven down
      when q > 2, optimally by scale*q*(q-2) nats;
    * above, the strip is limited by the branch-cut image at |Im u| = 1
      and by the pole preimages, giving scale*(2*q*d - (1-d)**2) nats at
      half-width d.

    q is chosen so both sides beat log(100/tol).
    """
    z = complex(z)
    r_pole = _pole_radius(args.alpha, z)
    if z != 0 and abs(cmath.phase(z) / args.alpha) <= math.pi:
        margin = 1.5 + math.cos(0.5 * cmath.phase(z) / args.alpha) ** 2
    else:
        margin = 1.5
    scale = max(1.2, margin * r_pole)
    decay = math.log(100.0 / args.tol)
    d_up = min(0.85 * _strip_halfwidth(args.alpha, z, scale), 0.95)
    q_lower = 1.0 + math.sqrt(1.0 + decay / scale)
    q_upper = (decay / scale + (1.0 - d_up) ** 2) / (2.0 * d_up)
    q = max(q_lower, q_upper)
    big_u = math.sqrt(1.0 + decay / scale)
    step = math.pi / (q * scale)
    needed = int(math.ceil(2.0 * big_u / step)) + 1
    return ContourParams(scale=scale, shift=0.0,
                         node_count=max(node_count, needed))


def _contour_sum_double(mu, dmu, alpha, beta, z, weights, step):
    total = 0.0 + 0.0j
    for m, dm, w in zip(mu, dmu, weights):
        total += w * cmath.exp(m) * m ** (alpha - beta) / (m ** alpha - z) * dm
    return total * step / (2.0j * math.pi)


def _contour_sum_mp(params, alpha, beta, z, tol, digits):
    # the whole quadrature must run at working precision: an ulp-level
    # perturbation of a node u is amplified by exp(mu(u)) into an
    # absolute error of order exp(apex) * |mu'| * ulp, which destroys
    # the cancellation that brings the sum down to the function value
    import mpmath as mp

    if digits > _MAX_DIGITS:
        raise NonConvergent(
            f"contour would need {digits} working digits at |z| = {abs(z):.3g}"
        )
    n = params.node_count
    with mp.workdps(digits):
        scale = mp.mpf(params.scale)
        shift = mp.mpf(params.shift)
        zmp = mp.mpc(z)
        amp = mp.mpf(alpha)
        bmp = mp.mpf(beta)
        decay = mp.log(100.0 / tol)
        big_u = mp.sqrt(1 + max(mp.mpf(0), shift + decay) / scale)
        step = 2 * big_u / (n - 1)
        total = mp.mpc(0)
        for k in range(n):
            u = -big_u + k * step
            m = shift + scale * mp.mpc(1.0, u) ** 2
            dm = 2 * scale * mp.mpc(-u, 1.0)
            w = 0.5 if k in (0, n - 1) else 1.0
            total += w * mp.exp(m) * m ** (amp - bmp) / (m ** amp - zmp) * dm
        total *= step / (2j * mp.pi)
        try:
            result = complex(total)
        except (OverflowError, ValueError):
            raise NonConvergent(
                "function value exceeds the double-precision range"
            ) from None
    if not (math.isfinite(result.real) and math.isfinite(result.imag)):
        raise NonConvergent("function value exceeds the double-precision range")
    return result


def mlf_contour(args: MLArgs, params: ContourParams, z: complex) -> complex:
    """Evaluate E_{alpha,beta}(z) by trapezoidal Hankel-contour quadrature.

    Parameters
    ----------
    args : MLArgs
        Order parameters and target absolute accuracy.
    params : ContourParams
        Contour geometry; must enclose the disc |mu| < |z|**(1/alpha).
        ``contour_params_for`` picks a suitable geometry automatically.
    z : complex
        Argument.

    Raises
    ------
    ValueError
        If the contour does not enclose the pole disc.
    PoleProximity
        If a quadrature node lands within 1e-8*(1+|z|) of a pole of the
        integrand; rescale the contour (or change node_count) to clear it.
    """
    z = complex(z)
    alpha, beta = args.alpha, args.beta
    r_pole = _pole_radius(alpha, z)
    scale, shift = params.scale, params.shift
    # closest approach of the parabola to the origin
    if scale >= shift:
        min_abs_mu = shift + scale
    else:
        min_abs_mu = 2.0 * math.sqrt(scale * shift)
    if min_abs_mu <= r_pole:
        raise ValueError(
            "contour does not enclose the pole disc: "
            f"min |mu| = {min_abs_mu:.6g} <= |z|**(1/alpha) = {r_pole:.6g}"
        )

    n = params.node_count
    big_u = math.sqrt(1.0 + max(0.0, shift + math.log(100.0 / args.tol)) / scale)
    step = 2.0 * big_u / (n - 1)
    u_nodes = [-big_u + k * step for k in range(n)]
    weights = [1.0] * n
    weights[0] = weights[-1] = 0.5

    mu = [shift + scale * (1j * u + 1.0) ** 2 for u in u_nodes]
    dmu = [2.0 * scale * complex(-u, 1.0) for u in u_nodes]
    guard = 1e-8 * (1.0 + abs(z))
    for m in mu:
        if abs(m ** alpha - z) < guard:
            raise PoleProximity(
                f"quadrature node at mu = {m:.6g} lies within {guard:.3g} "
                "of a pole; rescale the contour"
            )

    apex = shift + scale
    # roundoff floor of the double-precision sum is eps * exp(apex)
    if apex > 700.0 or math.exp(max(apex, 0.0)) * _EPS * 64.0 > args.tol:
        digits = max(25, int(apex / math.log(10.0)) + int(-math.log10(args.tol)) + 12)
        return _contour_sum_mp(params, alpha, beta, z, args.tol, digits)
    result = _contour_sum_double(mu, dmu, alpha, beta, z, weights, step)
    if not (math.isfinite(result.real) and math.isfinite(result.imag)):
        raise NonConvergent("contour sum is not finite")
    return result


def mlf(args: MLArgs, z: complex) -> complex:
    """Evaluate E_{alpha,beta}(z), choosing the algorithm by |z|.

    The series handles |z| <= SERIES_RADIUS; beyond that the Hankel
    contour with automatically chosen geometry takes over.  A contour
    node falling near a pole triggers one retry with the node count
    doubled.
    """
    z = complex(z)
    if abs(z) <= SERIES_RADIUS:
        return mlf_series(args, z)
    params = contour_params_for(args, z)
    try:
        return mlf_contour(args, params, z)
    except PoleProximity:
        params = replace(params, node_count=2 * params.node_count)
        return mlf_contour(args, params, z)


# ---------------------------------------------------------------------------
# vectorized grid evaluation
# ---------------------------------------------------------------------------

# eps of the extended accumulator used when plain double would lose the
# target accuracy to cancellation; on platforms without 80-bit long double
# this equals _EPS and the extended path simply never activates
_LD_EPS = float(np.finfo(np.longdouble).eps)


def _next_pow2(n: int) -> int:
    p = 64
    while p < n:
        p <<= 1
    return p


@lru_cache(maxsize=512)
def _rgamma_table(alpha: float, beta: float, size: int):
    """1/Gamma(alpha*j + beta) for j < size, as a read-only longdouble array.

    Built at 96-bit precision: exp(-lgamma) in double is only good to about
    |lgamma|*eps relative, which near the series tail costs more than the
    grid tolerance.  Values within the double range transfer exactly via a
    hi/lo split; smaller ones go through the log at the same split accuracy.
    Returns None when a value cannot be represented, which sends the caller
    to the per-entry path.
    """
    import mpmath as mp

    out = np.empty(size, dtype=np.longdouble)
    with mp.workprec(96):
        amp = mp.mpf(alpha)
        bmp = mp.mpf(beta)
        for j in range(size):
            x = amp * j + bmp
            r = mp.rgamma(x)
            a = abs(r)
            if 1e-280 < a < 1e280:
                hi = float(r)
                lo = float(r - hi)
                out[j] = np.longdouble(hi) + np.longdouble(lo)
            elif a <= 1e-280 and x > 0:
                lg = -mp.loggamma(x)
                hi = float(lg)
                lo = float(lg - hi)
                out[j] = np.exp(np.longdouble(hi) + np.longdouble(lo))
            else:
                return None
    out.flags.writeable = False
    return out


def _ml_grid_impl(zs, alpha: float, beta: float, tol: float,
                  deriv: bool) -> np.ndarray:
    zs = np.asarray(zs, dtype=complex)
    out = np.empty(zs.shape, dtype=complex)
    flat = zs.ravel()
    res = out.ravel()
    at_zero = 1.0 / gamma_real(beta)

    nonzero = flat[flat != 0]
    if nonzero.size == 0:
        res[:] = at_zero
        return out
    zmax = float(np.max(np.abs(nonzero)))
    log_zmax = math.log(zmax)
    j_peak = _peak_index(log_zmax, alpha, beta, deriv)
    log_peak = _term_log(j_peak, log_zmax, alpha, beta, deriv)

    # Horner evaluation of the shared truncated series is safe when the
    # roundoff floor, accumulator eps times the peak term at the largest
    # |z|, stays below tol and no coefficient under/overflows; when double
    # fails that test the 80-bit accumulator buys ~3 more digits of
    # headroom before the slow per-entry path is needed
    j_stop = j_peak
    while j_stop < 4096:
        t = _term_log(j_stop, log_zmax, alpha, beta, deriv)
        if t < math.log(tol) - 3.0:
            break
        j_stop += 1
    horner64 = (
        log_peak < 700.0
        and math.exp(min(log_peak, 700.0)) * _EPS * 64.0 <= tol
        and alpha * j_stop + beta <= 170.0
        and j_stop < 4096
    )
    horner_ld = (
        log_peak < 700.0
        and math.exp(min(log_peak, 700.0)) * _LD_EPS * 64.0 <= tol
        and alpha * j_stop + beta <= 1700.0
        and j_stop < 4096
    )
    table = None
    if horner64 or horner_ld:
        table = _rgamma_table(alpha, beta, _next_pow2(j_stop + 1))
    if table is not None:
        coeffs = table[: j_stop + 1]
        if deriv:
            coeffs = coeffs * np.arange(1, j_stop + 2, dtype=np.longdouble)
        if horner64:
            cs = np.asarray(coeffs, dtype=float)
            acc = np.full(flat.shape, cs[-1], dtype=complex)
            for j in range(j_stop - 1, -1, -1):
                acc *= flat
                acc += cs[j]
            res[:] = acc
        else:
            zl = flat.astype(np.clongdouble)
            accl = np.full(flat.shape, coeffs[-1], dtype=np.clongdouble)
            for j in range(j_stop - 1, -1, -1):
                accl *= zl
                accl += coeffs[j]
            res[:] = accl.astype(complex)
        res[flat == 0] = at_zero
        return out

    for i, z in enumerate(flat):
        if z == 0:
            res[i] = at_zero
        else:
            res[i] = _series_eval(z, alpha, beta, tol, deriv)
    return out


def ml_grid(alpha: float, beta: float, zs, tol: float = 1e-12) -> np.ndarray:
    """E_{alpha,beta} over an array of arguments (shared coefficient table)."""
    return _ml_grid_impl(zs, alpha, beta, tol, deriv=False)


def ml_deriv_grid(alpha: float, beta: float, zs, tol: float = 1e-12) -> np.ndarray:
    """E'_{alpha,beta} over an array of arguments."""
    return _ml_grid_impl(zs, alpha, alpha + beta, tol, deriv=True)
