"""Beta special functions and quantile-transport maps between Beta laws.

The regularized incomplete beta function is evaluated with the continued
fraction of Numerical Recipes / Cephes lineage (modified Lentz recurrence,
symmetry reflection I_x(a,b) = 1 - I_{1-x}(b,a) past the cut
x = (a+1)/(a+b+2)).  Its inverse runs safeguarded Newton iterations inside a
shrinking bisection bracket.  Both come in a scalar fast path (pure ``math``)
and a vectorized path (numpy, convergence masks).

On top of those sit the transport maps between consecutive Beta marginals of
a length-variable sequence: ``upsilon`` pushes v ~ Be(alpha_j, beta_j)
forward to Be(alpha_{j+1}, beta_{j+1}) through F_{j+1}^{-1}(F_j(v)), and
``upsilon_composed`` jumps straight from position 1 to position j with a
single inversion.  Families of marginal shapes are declared with the
``MarginalSeq`` classes at the bottom.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

__all__ = [
    "reg_inc_beta",
    "inv_reg_inc_beta",
    "log_beta",
    "beta_logpdf",
    "rising_factorial",
    "log_rising_factorial",
    "upsilon",
    "upsilon_inv",
    "upsilon_composed",
    "transport",
    "MarginalSeq",
    "PitmanYor",
    "ConstBeta",
    "BetaOneTheta",
    "PowerAlpha",
    "ExplicitList",
]

MACHEP = 1.11022302462515654042e-16  # 2**-53
TINY = 1e-300                        # clamp floor for CF intermediates
XMAX = 1.0 - 1e-16                   # clamp ceiling inside (0,1)
SHAPE_MAX = 1e6
CF_ITMAX = 3000
NEWTON_ITMAX = 200
# Residual targets are relative to the smaller tail mass min(p, 1-p): an
# absolute cut would accept wildly wrong roots when p itself is below it.
NEWTON_FTOL = 1e-12
NEWTON_FACCEPT = 1e-11

_lgamma_vec = np.frompyfunc(math.lgamma, 1, 1)


def _lgamma(x):
    if np.ndim(x) == 0:
        return math.lgamma(float(x))
    return _lgamma_vec(np.asarray(x, dtype=float)).astype(float)


def log_beta(a, b):
    """log B(a,b) via log-gamma differences; a, b > 0 (scalar or array)."""
    _check_shapes(a, b)
    if np.ndim(a) == 0 and np.ndim(b) == 0:
        return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return _lgamma(a) + _lgamma(b) - _lgamma(a + b)


def beta_logpdf(x, a, b):
    """Log density of Be(a,b) at x in (0,1); -inf outside the open interval."""
    _check_shapes(a, b)
    if np.ndim(x) == 0 and np.ndim(a) == 0 and np.ndim(b) == 0:
        x = float(x)
        if not 0.0 < x < 1.0:
            return -math.inf
        return (a - 1.0) * math.log(x) + (b - 1.0) * math.log1p(-x) - log_beta(a, b)
    x = np.asarray(x, dtype=float)
    inside = (x > 0.0) & (x < 1.0)
    xs = np.where(inside, x, 0.5)
    out = (np.asarray(a) - 1.0) * np.log(xs) + (np.asarray(b) - 1.0) * np.log1p(-xs) - log_beta(a, b)
    return np.where(inside, out, -np.inf)


def rising_factorial(x, n: int):
    """Rising factorial (x)_n = x (x+1) ... (x+n-1); (x)_0 = 1."""
    n = _check_order(n)
    out = 1.0
    for i in range(n):
        out *= x + i
    return out


def log_rising_factorial(x, n: int):
    """log (x)_n for x > 0, safe for magnitudes beyond double range."""
    n = _check_order(n)
    if np.ndim(x) == 0 and x <= 0.0:
        raise ValueError("log rising factorial needs x > 0, got %r" % (x,))
    if n == 0:
        return np.zeros_like(np.asarray(x, dtype=float)) if np.ndim(x) else 0.0
    return _lgamma(np.asarray(x) + n if np.ndim(x) else x + n) - _lgamma(x)


def _check_order(n) -> int:
    if not float(n).is_integer() or n < 0:
        raise ValueError("order must be a nonnegative integer, got %r" % (n,))
    return int(n)


def _check_shapes(a, b) -> None:
    if np.ndim(a) == 0 and np.ndim(b) == 0:
        a = float(a)
        b = float(b)
        if (not (math.isfinite(a) and math.isfinite(b))
                or a <= 0.0 or b <= 0.0 or a > SHAPE_MAX or b > SHAPE_MAX):
            raise ValueError("beta shapes must lie in (0, %g], got a=%r b=%r" % (SHAPE_MAX, a, b))
        return
    a_arr = np.asarray(a, dtype=float)
    b_arr = np.asarray(b, dtype=float)
    if (not np.all(np.isfinite(a_arr))) or (not np.all(np.isfinite(b_arr))):
        raise ValueError("beta shapes must be finite, got a=%r b=%r" % (a, b))
    if np.any(a_arr <= 0.0) or np.any(b_arr <= 0.0) or np.any(a_arr > SHAPE_MAX) or np.any(b_arr > SHAPE_MAX):
        raise ValueError("beta shapes must lie in (0, %g], got a=%r b=%r" % (SHAPE_MAX, a, b))


# --------------------------------------------------------------------------
# regularized incomplete beta, scalar path
# --------------------------------------------------------------------------

def _betacf(a: float, b: float, x: float) -> float:
    # modified Lentz recurrence for the NR continued fraction
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < TINY:
        d = TINY
    d = 1.0 / d
    h = d
    for m in range(1, CF_ITMAX + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < TINY:
            d = TINY
        c = 1.0 + aa / c
        if abs(c) < TINY:
            c = TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < TINY:
            d = TINY
        c = 1.0 + aa / c
        if abs(c) < TINY:
            c = TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) <= 3.0 * MACHEP:
            return h
    raise ArithmeticError("incomplete beta continued fraction failed to converge "
                          "(a=%g, b=%g, x=%g)" % (a, b, x))


def _betainc_scalar(a: float, b: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    lfront = (a * math.log(x) + b * math.log1p(-x)
              - (math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)))
    if x < (a + 1.0) / (a + b + 2.0):
        out = math.exp(lfront) * _betacf(a, b, x) / a
    else:
        out = 1.0 - math.exp(lfront) * _betacf(b, a, 1.0 - x) / b
    if out < 0.0:
        return 0.0
    if out > 1.0:
        return 1.0
    return out


# --------------------------------------------------------------------------
# regularized incomplete beta, vector path
# --------------------------------------------------------------------------

def _betacf_vec(a, b, x):
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = np.ones_like(x)
    d = 1.0 - qab * x / qap
    np.copyto(d, TINY, where=np.abs(d) < TINY)
    d = 1.0 / d
    h = d.copy()
    active = np.ones(x.shape, dtype=bool)
    for m in range(1, CF_ITMAX + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        np.copyto(d, TINY, where=np.abs(d) < TINY)
        c = 1.0 + aa / c
        np.copyto(c, TINY, where=np.abs(c) < TINY)
        d = 1.0 / d
        h = np.where(active, h * d * c, h)
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        np.copyto(d, TINY, where=np.abs(d) < TINY)
        c = 1.0 + aa / c
        np.copyto(c, TINY, where=np.abs(c) < TINY)
        d = 1.0 / d
        delta = d * c
        h = np.where(active, h * delta, h)
        active &= np.abs(delta - 1.0) > 3.0 * MACHEP
        if not active.any():
            return h
    raise ArithmeticError("incomplete beta continued fraction failed to converge "
                          "on %d of %d lanes" % (int(active.sum()), active.size))


def _betainc_vec(a, b, x):
    a = np.broadcast_to(np.asarray(a, dtype=float), x.shape).copy()
    b = np.broadcast_to(np.asarray(b, dtype=float), x.shape).copy()
    out = np.empty_like(x)
    lo = x <= 0.0
    hi = x >= 1.0
    out[lo] = 0.0
    out[hi] = 1.0
    mid = ~(lo | hi)
    if mid.any():
        am, bm, xm = a[mid], b[mid], x[mid]
        lfront = am * np.log(xm) + bm * np.log1p(-xm) - log_beta(am, bm)
        direct = xm < (am + 1.0) / (am + bm + 2.0)
        res = np.empty_like(xm)
        if direct.any():
            res[direct] = (np.exp(lfront[direct])
                           * _betacf_vec(am[direct], bm[direct], xm[direct]) / am[direct])
        flip = ~direct
        if flip.any():
            res[flip] = 1.0 - (np.exp(lfront[flip])
                               * _betacf_vec(bm[flip], am[flip], 1.0 - xm[flip]) / bm[flip])
        out[mid] = np.clip(res, 0.0, 1.0)
    return out


def reg_inc_beta(a, b, x):
    """Regularized incomplete beta I_x(a, b).

    Shapes must lie in (0, 1e6]; x outside [0,1] is a domain error (NaN too).
    Returns a float for scalar input, an ndarray otherwise.
    """
    _check_shapes(a, b)
    scalar = np.ndim(a) == 0 and np.ndim(b) == 0 and np.ndim(x) == 0
    x_arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(x_arr)) or np.any(x_arr < 0.0) or np.any(x_arr > 1.0):
        raise ValueError("x must lie in [0, 1], got %r" % (x,))
    if scalar:
        return _betainc_scalar(float(a), float(b), float(x))
    return _betainc_vec(a, b, np.ascontiguousarray(x_arr, dtype=float))


# --------------------------------------------------------------------------
# inverse
# --------------------------------------------------------------------------

# Acklam's rational approximation to the standard normal quantile; only used
# to seed Newton, so its ~1e-9 relative accuracy is more than enough.
_PPF_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
          1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_PPF_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
          6.680131188771972e+01, -1.328068155288572e+01)
_PPF_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
          -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_PPF_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
          3.754408661907416e+00)


def _norm_ppf(p: float) -> float:
    if p <= 0.0:
        return -math.inf
    if p >= 1.0:
        return math.inf
    if p < 0.02425:
        q = math.sqrt(-2.0 * math.log(p))
        return ((((((_PPF_C[0] * q + _PPF_C[1]) * q + _PPF_C[2]) * q + _PPF_C[3]) * q + _PPF_C[4]) * q + _PPF_C[5])
                / ((((_PPF_D[0] * q + _PPF_D[1]) * q + _PPF_D[2]) * q + _PPF_D[3]) * q + 1.0))
    if p > 1.0 - 0.02425:
        return -_norm_ppf(1.0 - p)
    q = p - 0.5
    r = q * q
    return ((((((_PPF_A[0] * r + _PPF_A[1]) * r + _PPF_A[2]) * r + _PPF_A[3]) * r + _PPF_A[4]) * r + _PPF_A[5]) * q
            / (((((_PPF_B[0] * r + _PPF_B[1]) * r + _PPF_B[2]) * r + _PPF_B[3]) * r + _PPF_B[4]) * r + 1.0))


def _invbeta_guess(a: float, b: float, p: float) -> float:
    # Numerical Recipes seeding: normal approximation matched to the Beta
    # mean/variance for a, b >= 1; boundary power-law behaviour otherwise.
    if a >= 1.0 and b >= 1.0:
        y = _norm_ppf(p)
        al = 1.0 / (2.0 * a - 1.0)
        be = 1.0 / (2.0 * b - 1.0)
        h = 2.0 / (al + be)
        lam = (y * y - 3.0) / 6.0
        w = y * math.sqrt(h + lam) / h - (be - al) * (lam + 5.0 / 6.0 - 2.0 / (3.0 * h))
        x = a / (a + b * math.exp(2.0 * w))
    else:
        lna = math.log(a / (a + b))
        lnb = math.log(b / (a + b))
        t = math.exp(a * lna) / a
        u = math.exp(b * lnb) / b
        w = t + u
        if p < t / w:
            x = math.exp((math.log(p * w * a)) / a)
        else:
            x = 1.0 - math.exp(math.log((1.0 - p) * w * b) / b)
    if not (0.0 < x < 1.0) or not math.isfinite(x):
        x = a / (a + b)
    return min(max(x, TINY), XMAX)


def _invbetainc_scalar(a: float, b: float, p: float, ftol: float = None) -> float:
    if p == 0.0:
        return 0.0
    if p == 1.0:
        return 1.0
    ft = NEWTON_FTOL if ftol is None else ftol
    fa = NEWTON_FACCEPT if ftol is None else max(NEWTON_FACCEPT, 4.0 * ftol)
    lo, hi = 0.0, 1.0
    x = _invbeta_guess(a, b, p)
    scale = max(min(p, 1.0 - p), TINY)
    lbeta = math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    f = _betainc_scalar(a, b, x) - p
    for _ in range(NEWTON_ITMAX):
        if f > 0.0:
            hi = x
        else:
            lo = x
        if abs(f) <= ft * scale or math.nextafter(lo, math.inf) >= hi:
            break
        if x <= 0.0 or x >= 1.0:
            lpdf = math.inf
        else:
            lpdf = (a - 1.0) * math.log(x) + (b - 1.0) * math.log1p(-x) - lbeta
        xn = x - f * math.exp(-lpdf) if -700.0 < lpdf < 700.0 else math.nan
        if not (lo < xn < hi):
            xn = 0.5 * (lo + hi)
            if not (lo < xn < hi):
                break  # bracket exhausted at double resolution
        x = xn
        f = _betainc_scalar(a, b, x) - p
    if abs(f) > fa * scale:
        # root sits between adjacent doubles; return the better endpoint
        if math.nextafter(lo, math.inf) >= hi:
            f_lo = _betainc_scalar(a, b, lo) - p
            f_hi = _betainc_scalar(a, b, hi) - p
            return lo if abs(f_lo) <= abs(f_hi) else hi
        raise ArithmeticError("incomplete beta inversion stalled "
                              "(a=%g, b=%g, p=%g, residual=%g)" % (a, b, p, f))
    return x


def _norm_ppf_vec(p):
    out = np.empty_like(p)
    low = p < 0.02425
    high = p > 1.0 - 0.02425
    mid = ~(low | high)
    if low.any():
        q = np.sqrt(-2.0 * np.log(p[low]))
        out[low] = ((((((_PPF_C[0] * q + _PPF_C[1]) * q + _PPF_C[2]) * q + _PPF_C[3]) * q + _PPF_C[4]) * q + _PPF_C[5])
                    / ((((_PPF_D[0] * q + _PPF_D[1]) * q + _PPF_D[2]) * q + _PPF_D[3]) * q + 1.0))
    if high.any():
        q = np.sqrt(-2.0 * np.log1p(-p[high]))
        out[high] = -((((((_PPF_C[0] * q + _PPF_C[1]) * q + _PPF_C[2]) * q + _PPF_C[3]) * q + _PPF_C[4]) * q + _PPF_C[5])
                      / ((((_PPF_D[0] * q + _PPF_D[1]) * q + _PPF_D[2]) * q + _PPF_D[3]) * q + 1.0))
    if mid.any():
        q = p[mid] - 0.5
        r = q * q
        out[mid] = ((((((_PPF_A[0] * r + _PPF_A[1]) * r + _PPF_A[2]) * r + _PPF_A[3]) * r + _PPF_A[4]) * r + _PPF_A[5]) * q
                    / (((((_PPF_B[0] * r + _PPF_B[1]) * r + _PPF_B[2]) * r + _PPF_B[3]) * r + _PPF_B[4]) * r + 1.0))
    return out


def _invbeta_guess_vec(a, b, p):
    x = np.empty_like(p)
    big = (a >= 1.0) & (b >= 1.0)
    if big.any():
        ab, bb, pb = a[big], b[big], p[big]
        y = _norm_ppf_vec(pb)
        al = 1.0 / (2.0 * ab - 1.0)
        be = 1.0 / (2.0 * bb - 1.0)
        h = 2.0 / (al + be)
        lam = (y * y - 3.0) / 6.0
        with np.errstate(over="ignore", invalid="ignore"):
            w = y * np.sqrt(h + lam) / h - (be - al) * (lam + 5.0 / 6.0 - 2.0 / (3.0 * h))
            x[big] = ab / (ab + bb * np.exp(2.0 * w))
    sml = ~big
    if sml.any():
        as_, bs, ps = a[sml], b[sml], p[sml]
        t = np.exp(as_ * np.log(as_ / (as_ + bs))) / as_
        u = np.exp(bs * np.log(bs / (as_ + bs))) / bs
        w = t + u
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            left = np.exp(np.log(ps * w * as_) / as_)
            right = 1.0 - np.exp(np.log((1.0 - ps) * w * bs) / bs)
        x[sml] = np.where(ps < t / w, left, right)
    bad = ~np.isfinite(x) | (x <= 0.0) | (x >= 1.0)
    x = np.where(bad, a / (a + b), x)
    return np.clip(x, TINY, XMAX)


def _invbetainc_vec(a, b, p, ftol=None):
    ft = NEWTON_FTOL if ftol is None else ftol
    fa = NEWTON_FACCEPT if ftol is None else max(NEWTON_FACCEPT, 4.0 * ftol)
    a = np.broadcast_to(np.asarray(a, dtype=float), p.shape).copy()
    b = np.broadcast_to(np.asarray(b, dtype=float), p.shape).copy()
    out = np.empty_like(p)
    at0 = p == 0.0
    at1 = p == 1.0
    out[at0] = 0.0
    out[at1] = 1.0
    mid = ~(at0 | at1)
    if not mid.any():
        return out
    am, bm, pm = a[mid], b[mid], p[mid]
    lo = np.zeros_like(pm)
    hi = np.ones_like(pm)
    x = _invbeta_guess_vec(am, bm, pm)
    scale = np.maximum(np.minimum(pm, 1.0 - pm), TINY)
    lbeta = log_beta(am, bm)
    f = _betainc_vec(am, bm, x) - pm
    active = np.ones(pm.shape, dtype=bool)
    for _ in range(NEWTON_ITMAX):
        np.copyto(hi, x, where=active & (f > 0.0))
        np.copyto(lo, x, where=active & (f <= 0.0))
        done = (np.abs(f) <= ft * scale) | (np.nextafter(lo, np.inf) >= hi)
        active &= ~done
        if not active.any():
            break
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            lpdf = (am - 1.0) * np.log(x) + (bm - 1.0) * np.log1p(-x) - lbeta
            xn = x - f * np.exp(-lpdf)
        bad = ~np.isfinite(xn) | (xn <= lo) | (xn >= hi)
        xn = np.where(bad, 0.5 * (lo + hi), xn)
        stuck = (xn <= lo) | (xn >= hi)  # bracket exhausted at double resolution
        active &= ~stuck
        x = np.where(active, xn, x)
        f = np.where(active, _betainc_vec(am, bm, x) - pm, f)
    rough = np.abs(f) > fa * scale
    if rough.any():
        # roots between adjacent doubles: take the endpoint with smaller residual
        adj = rough & (np.nextafter(lo, np.inf) >= hi)
        if adj.any():
            f_lo = _betainc_vec(am[adj], bm[adj], lo[adj]) - pm[adj]
            f_hi = _betainc_vec(am[adj], bm[adj], hi[adj]) - pm[adj]
            x[adj] = np.where(np.abs(f_lo) <= np.abs(f_hi), lo[adj], hi[adj])
        if (rough & ~adj).any():
            raise ArithmeticError("incomplete beta inversion stalled on %d lanes"
                                  % int(np.sum(rough & ~adj)))
    out[mid] = x
    return out


def inv_reg_inc_beta(a, b, p, tol=None):
    """Inverse of ``reg_inc_beta`` in x: returns x with |I_x(a,b) - p| <= 1e-10.

    Endpoints are exact: p = 0 -> 0, p = 1 -> 1.  When no double satisfies
    the residual bound (the root falls between adjacent floats, which happens
    for tiny shapes near x = 1 where the density is unbounded), the bracket is
    driven to one ulp and the endpoint with the smaller residual is returned,
    i.e. the correctly rounded root.  ``tol`` overrides the solver's relative
    residual target; looser values trade accuracy for fewer iterations.
    """
    _check_shapes(a, b)
    if tol is not None and not tol > 0.0:
        raise ValueError("tol must be positive, got %r" % (tol,))
    scalar = np.ndim(a) == 0 and np.ndim(b) == 0 and np.ndim(p) == 0
    p_arr = np.asarray(p, dtype=float)
    if np.any(np.isnan(p_arr)) or np.any(p_arr < 0.0) or np.any(p_arr > 1.0):
        raise ValueError("p must lie in [0, 1], got %r" % (p,))
    if scalar:
        return _invbetainc_scalar(float(a), float(b), float(p), tol)
    return _invbetainc_vec(a, b, np.ascontiguousarray(p_arr, dtype=float), tol)


# --------------------------------------------------------------------------
# quantile transport between Beta laws
# --------------------------------------------------------------------------

def transport(a1, b1, a2, b2, v):
    """Map v ~ Be(a1,b1) to Be(a2,b2) through F2^{-1}(F1(v)).

    Identity when the shapes coincide; power-map shortcuts for the
    Be(a,1)-only and Be(1,b)-only families; a single forward evaluation plus a
    single inversion otherwise.  Endpoints 0 and 1 are preserved exactly.
    """
    _check_shapes(a1, b1)
    _check_shapes(a2, b2)
    if a1 == a2 and b1 == b2:
        return v if np.ndim(v) == 0 else np.asarray(v, dtype=float).copy()
    scalar = np.ndim(v) == 0
    if b1 == 1.0 and b2 == 1.0:
        if scalar:
            return float(v) ** (a1 / a2)
        return np.asarray(v, dtype=float) ** (a1 / a2)
    if a1 == 1.0 and a2 == 1.0:
        r = b1 / b2
        if scalar:
            return -math.expm1(r * math.log1p(-float(v))) if v < 1.0 else 1.0
        v = np.asarray(v, dtype=float)
        return np.where(v >= 1.0, 1.0, -np.expm1(r * np.log1p(-np.minimum(v, XMAX))))
    p = reg_inc_beta(a1, b1, v)
    if scalar:
        if 0.0 < p < 1.0:
            p = min(max(p, TINY), XMAX)
        return _invbetainc_scalar(a2, b2, p)
    p = np.asarray(p)
    interior = (p > 0.0) & (p < 1.0)
    p = np.where(interior, np.clip(p, TINY, XMAX), p)
    return _invbetainc_vec(a2, b2, p)


def upsilon(marg: "MarginalSeq", j: int, v):
    """Forward transport at position j: Be(shape_j) -> Be(shape_{j+1})."""
    a1, b1 = marg.shape(j)
    a2, b2 = marg.shape(j + 1)
    return transport(a1, b1, a2, b2, v)


def upsilon_inv(marg: "MarginalSeq", j: int, u):
    """Inverse of ``upsilon`` at position j: Be(shape_{j+1}) -> Be(shape_j)."""
    a1, b1 = marg.shape(j)
    a2, b2 = marg.shape(j + 1)
    return transport(a2, b2, a1, b1, u)


def upsilon_composed(marg: "MarginalSeq", j: int, v):
    """Transport from position 1 straight to position j (identity at j = 1).

    Evaluated as F_j^{-1}(F_1(v)) with one inversion, never by iterating the
    per-step maps.
    """
    if j < 1:
        raise ValueError("position must be >= 1, got %r" % (j,))
    if j == 1:
        return v if np.ndim(v) == 0 else np.asarray(v, dtype=float).copy()
    a1, b1 = marg.shape(1)
    aj, bj = marg.shape(j)
    return transport(a1, b1, aj, bj, v)


# --------------------------------------------------------------------------
# marginal shape families
# --------------------------------------------------------------------------

class MarginalSeq:
    """Sequence of Beta shapes (alpha_j, beta_j), j = 1, 2, ...

    Subclasses implement ``_shape``; ``shape`` adds validation and is what
    the samplers call.
    """

    def shape(self, j: int) -> Tuple[float, float]:
        if j < 1 or not float(j).is_integer():
            raise ValueError("position must be a positive integer, got %r" % (j,))
        a, b = self._shape(int(j))
        a, b = float(a), float(b)
        if not (math.isfinite(a) and math.isfinite(b)) or a <= 0.0 or b <= 0.0:
            raise ValueError("marginal %d has invalid beta shapes (%r, %r)" % (j, a, b))
        return a, b

    def _shape(self, j: int) -> Tuple[float, float]:
        raise NotImplementedError

    def is_constant(self) -> bool:
        """True when every position shares the same shapes (stationary chain)."""
        return False


@dataclass(frozen=True)
class PitmanYor(MarginalSeq):
    """Shapes (1 - sigma, theta + j sigma); sigma in [0,1), theta > -sigma."""

    sigma: float
    theta: float

    def __post_init__(self):
        if not 0.0 <= self.sigma < 1.0:
            raise ValueError("sigma must lie in [0, 1), got %r" % (self.sigma,))
        if not self.theta > -self.sigma:
            raise ValueError("theta must exceed -sigma, got %r" % (self.theta,))

    def _shape(self, j):
        return 1.0 - self.sigma, self.theta + j * self.sigma

    def is_constant(self):
        return self.sigma == 0.0


@dataclass(frozen=True)
class ConstBeta(MarginalSeq):
    """The same Be(alpha, beta) at every position."""

    alpha: float
    beta: float

    def __post_init__(self):
        _check_shapes(self.alpha, self.beta)

    def _shape(self, j):
        return self.alpha, self.beta

    def is_constant(self):
        return True


@dataclass(frozen=True)
class BetaOneTheta(MarginalSeq):
    """Be(1, beta_j) with a caller-supplied rule j -> beta_j > 0."""

    beta_rule: Callable[[int], float]

    def _shape(self, j):
        return 1.0, self.beta_rule(j)


@dataclass(frozen=True)
class PowerAlpha(MarginalSeq):
    """Be(1 + gamma/j, 1) with gamma >= 0."""

    gamma: float

    def __post_init__(self):
        if self.gamma < 0.0:
            raise ValueError("gamma must be >= 0, got %r" % (self.gamma,))

    def _shape(self, j):
        return 1.0 + self.gamma / j, 1.0

    def is_constant(self):
        return self.gamma == 0.0


@dataclass(frozen=True)
class ExplicitList(MarginalSeq):
    """Shapes given position by position, with a tail rule past the list.

    ``tail`` may be a fixed (alpha, beta) pair or a callable
    j -> (alpha_j, beta_j); by default the last listed pair repeats forever.
    An empty list requires a tail rule.
    """

    pairs: Tuple[Tuple[float, float], ...]
    tail: Optional[object] = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple((float(a), float(b)) for a, b in self.pairs))
        for a, b in self.pairs:
            _check_shapes(a, b)
        if self.tail is not None and not callable(self.tail):
            a, b = self.tail
            _check_shapes(float(a), float(b))
            object.__setattr__(self, "tail", (float(a), float(b)))
        if not self.pairs and self.tail is None:
            raise ValueError("an empty shape list needs a tail rule")

    def _shape(self, j):
        if j <= len(self.pairs):
            return self.pairs[j - 1]
        if callable(self.tail):
            return self.tail(j)
        if self.tail is not None:
            return self.tail
        return self.pairs[-1]

    def is_constant(self):
        if self.tail is not None:
            return False
        return len(set(self.pairs)) == 1
