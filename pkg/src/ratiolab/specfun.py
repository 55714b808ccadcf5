"""Complex special functions and the zeta machinery.

Everything here works on numpy arrays of complex128 as well as on scalars.
The zeta function is evaluated by Euler-Maclaurin summation; derivatives are
taken by the trapezoidal rule on a Cauchy circle, which keeps the accuracy
uniform near the critical line. Hardy's Z uses the Riemann-Siegel formula
with correction terms C0..C4, whose coefficient polynomials are generated
once at import time from the Taylor series of the Riemann-Siegel kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import mpmath
import numpy as np
from scipy import special as sps

from .errors import GammaPole, MissedZero, OutOfRange, PoleAtOne, PrecisionLoss

EULER_GAMMA = 0.57721566490153286061
TWO_PI = 2.0 * math.pi
FIRST_ZERO = 14.134725141734693


@dataclass(frozen=True)
class ComplexValue:
    """A complex number tagged with its working precision in bits."""

    re: float
    im: float = 0.0
    prec: int = 53

    def __post_init__(self):
        if not (math.isfinite(self.re) and math.isfinite(self.im)):
            raise ValueError("ComplexValue components must be finite")
        if self.prec < 53:
            raise ValueError("precision must be at least 53 bits")

    @classmethod
    def of(cls, z, prec: int = 53) -> "ComplexValue":
        if isinstance(z, ComplexValue):
            return z
        z = complex(z)
        return cls(z.real, z.imag, prec)

    def __complex__(self) -> complex:
        return complex(self.re, self.im)


def as_complex(z):
    """Coerce scalars, ComplexValue and array-likes to complex128."""
    if isinstance(z, ComplexValue):
        return complex(z)
    if np.isscalar(z):
        return complex(z)
    return np.asarray(z, dtype=complex)


@dataclass(frozen=True)
class ZetaEvalPlan:
    euler_maclaurin_terms: int | None = None  # None: max(20, 2|t|)
    bernoulli_order: int = 12
    derivative_radius: float | None = None  # None: min(0.25, |s-1|/2)
    nodes: int = 64

    def __post_init__(self):
        if self.derivative_radius is not None and self.derivative_radius <= 0:
            raise ValueError("derivative_radius must be positive")
        if self.bernoulli_order % 2 or not 2 <= self.bernoulli_order <= 20:
            raise ValueError("bernoulli_order must be even, between 2 and 20")


DEFAULT_PLAN = ZetaEvalPlan()

# B_2, B_4, ..., B_20
_BERNOULLI = [Fraction(1, 6), Fraction(-1, 30), Fraction(1, 42), Fraction(-1, 30),
              Fraction(5, 66), Fraction(-691, 2730), Fraction(7, 6),
              Fraction(-3617, 510), Fraction(43867, 798), Fraction(-174611, 330)]
_EM_COEF = [float(b / math.factorial(2 * k + 2)) for k, b in enumerate(_BERNOULLI)]


def _em_terms(t_abs: float, plan: ZetaEvalPlan) -> int:
    if plan.euler_maclaurin_terms is not None:
        return plan.euler_maclaurin_terms
    return max(20, int(2 * t_abs) + 1)


def _zeta_em_block(s: np.ndarray, N: int, order: int) -> np.ndarray:
    n = np.arange(1, N, dtype=float)
    logn = np.log(n)
    out = np.empty(s.shape, dtype=complex)
    rows = max(1, 4_000_000 // max(N, 1))
    for i in range(0, s.size, rows):
        ss = s[i:i + rows]
        out[i:i + rows] = np.exp(-np.outer(ss, logn)).sum(axis=1)
    logN = math.log(N)
    NS = np.exp(-s * logN)
    out += N * NS / (s - 1.0) + 0.5 * NS
    rising = s.copy()
    power = NS / N
    for k in range(order // 2):
        out += _EM_COEF[k] * rising * power
        rising = rising * (s + 2 * k + 1) * (s + 2 * k + 2)
        power = power / (N * N)
    return out


def _zeta0(s, plan: ZetaEvalPlan = DEFAULT_PLAN):
    """Plain zeta by Euler-Maclaurin; s is an array, grouped by height."""
    s = np.asarray(s, dtype=complex)
    flat = s.ravel()
    if np.any(flat == 1.0):
        raise PoleAtOne("zeta has a pole at s=1")
    out = np.empty_like(flat)
    Ns = np.array([_em_terms(abs(z.imag), plan) for z in flat], dtype=int)
    # bucket heights so each block shares one N
    buckets = (Ns + 63) // 64 * 64 if plan.euler_maclaurin_terms is None else Ns
    for N in np.unique(buckets):
        idx = np.nonzero(buckets == N)[0]
        out[idx] = _zeta_em_block(flat[idx], int(N), plan.bernoulli_order)
    return out.reshape(s.shape)


def _circle(s: np.ndarray, plan: ZetaEvalPlan, avoid_pole: bool = True):
    if plan.derivative_radius is not None:
        r = np.full(s.shape, plan.derivative_radius)
    else:
        r = np.minimum(0.25, np.abs(s - 1.0) / 2) if avoid_pole else np.full(s.shape, 0.25)
    phi = TWO_PI * np.arange(plan.nodes) / plan.nodes
    w = np.exp(1j * phi)
    return r, w


def cauchy_derivatives(f, s, orders, plan: ZetaEvalPlan = DEFAULT_PLAN, radius=None):
    """Derivatives of an analytic vectorized f at s by the trapezoidal rule on a circle.

    Returns a list of arrays matching ``orders``.
    """
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    phi = TWO_PI * np.arange(plan.nodes) / plan.nodes
    w = np.exp(1j * phi)
    r = np.broadcast_to(np.asarray(radius, dtype=float), s.shape) if radius is not None else np.full(s.shape, 0.25)
    nodes = s[:, None] + r[:, None] * w[None, :]
    vals = f(nodes)
    res = []
    for k in orders:
        c = (vals * w[None, :] ** (-k)).mean(axis=1)
        res.append(c * math.factorial(k) / r ** k)
    return res


def zeta_family(s, order: int = 0, plan: ZetaEvalPlan = DEFAULT_PLAN, prec: int = 53):
    """zeta^(order)(s) for order in 0..4. Accepts scalars or arrays."""
    if order not in (0, 1, 2, 3, 4):
        raise OutOfRange("order must be in 0..4")
    scalar = np.isscalar(s) or isinstance(s, ComplexValue)
    if isinstance(s, ComplexValue):
        prec = max(prec, s.prec)
    z = np.atleast_1d(np.asarray(as_complex(s), dtype=complex))
    if np.any(z == 1.0):
        raise PoleAtOne("zeta has a pole at s=1")
    if prec > 53:
        with mpmath.workprec(prec):
            vals = np.array([complex(mpmath.zeta(mpmath.mpc(v.real, v.imag), 1, order)) for v in z])
    elif order == 0:
        vals = _zeta0(z, plan)
    elif plan.derivative_radius is None and np.all(np.abs(z - 1.0) < LAURENT_RADIUS):
        vals = _zeta_near_one(z, order)
    else:
        r, _ = _circle(z, plan)
        if np.any(r < 1e-7):
            raise PrecisionLoss("evaluation point too close to the pole for a Cauchy derivative")
        (vals,) = cauchy_derivatives(lambda x: _zeta0(x, plan), z, [order], plan, radius=r)
        # roundoff amplification of the trapezoidal sum
        est = 1e-15 * math.factorial(order) / np.min(r) ** (order + 1)
        if est > 1e-3:
            raise PrecisionLoss(f"derivative error estimate {est:.2e} too large")
    return complex(vals[0]) if scalar else vals.reshape(np.shape(as_complex(s)))


def zeta(s, plan: ZetaEvalPlan = DEFAULT_PLAN):
    return zeta_family(s, 0, plan)


def _zeta_derivs(z: np.ndarray, orders, plan: ZetaEvalPlan):
    """zeta and its derivatives at z; points near 1 use the Laurent series."""
    near = np.abs(z - 1.0) < LAURENT_RADIUS
    out = [np.empty(z.shape, dtype=complex) for _ in range(len(orders) + 1)]
    if np.any(near):
        zn = z[near]
        out[0][near] = _zeta_near_one(zn, 0)
        for j, k in enumerate(orders):
            out[j + 1][near] = _zeta_near_one(zn, k)
    far = ~near
    if np.any(far):
        zf = z[far]
        r = np.minimum(0.25, np.abs(zf - 1.0) / 2)
        out[0][far] = _zeta0(zf, plan)
        ds = cauchy_derivatives(lambda x: _zeta0(x, plan), zf, list(orders), plan, radius=r)
        for j, d in enumerate(ds):
            out[j + 1][far] = d
    return out


def zeta_logderiv(s, plan: ZetaEvalPlan = DEFAULT_PLAN):
    """zeta'/zeta(s)."""
    scalar = np.isscalar(s) or isinstance(s, ComplexValue)
    z = np.atleast_1d(np.asarray(as_complex(s), dtype=complex))
    if np.any(z == 1.0):
        raise PoleAtOne("zeta has a pole at s=1")
    v0, v1 = _zeta_derivs(z.ravel(), [1], plan)
    out = (v1 / v0).reshape(z.shape)
    return complex(out.ravel()[0]) if scalar else out.reshape(np.shape(as_complex(s)))


def zeta_logderiv_prime(s, plan: ZetaEvalPlan = DEFAULT_PLAN):
    """(zeta'/zeta)'(s) = zeta''/zeta - (zeta'/zeta)^2."""
    scalar = np.isscalar(s) or isinstance(s, ComplexValue)
    z = np.atleast_1d(np.asarray(as_complex(s), dtype=complex))
    if np.any(z == 1.0):
        raise PoleAtOne("zeta has a pole at s=1")
    v0, v1, v2 = _zeta_derivs(z.ravel(), [1, 2], plan)
    out = v2 / v0 - (v1 / v0) ** 2
    return complex(out[0]) if scalar else out.reshape(np.shape(as_complex(s)))


# ---------------------------------------------------------------- gamma, chi

def gamma_family(s, kind: str = "logGamma"):
    """Principal-branch log Gamma or digamma."""
    z = as_complex(s)
    za = np.atleast_1d(z)
    if np.any((za.imag == 0) & (za.real <= 0) & (za.real == np.round(za.real))):
        raise GammaPole("Gamma has poles at non-positive integers")
    if kind == "logGamma":
        out = sps.loggamma(za)
    elif kind == "digamma":
        out = sps.psi(za)
    else:
        raise ValueError(f"unknown kind {kind!r}")
    return complex(out[0]) if np.ndim(z) == 0 else out


def chi_factor(s, log_deriv: bool = False):
    """chi(s) = 2^s pi^(s-1) sin(pi s/2) Gamma(1-s), or chi'/chi(s).

    Both are computed from the equivalent form
    chi(s) = pi^(s-1/2) Gamma((1-s)/2) / Gamma(s/2), which stays well scaled
    for large |t|; the log-derivative is log pi - psi(s/2)/2 - psi((1-s)/2)/2.
    """
    z = as_complex(s)
    za = np.atleast_1d(z)
    if log_deriv:
        out = math.log(math.pi) - 0.5 * sps.psi(za / 2) - 0.5 * sps.psi((1 - za) / 2)
    else:
        one_minus = 1 - za
        if np.any((one_minus.imag == 0) & (one_minus.real <= 0) & (one_minus.real == np.round(one_minus.real))):
            raise GammaPole("Gamma(1-s) has a pole")
        # chi(s) = pi^(s-1/2) Gamma((1-s)/2)/Gamma(s/2), numerically tame in t
        out = np.exp((za - 0.5) * math.log(math.pi) + sps.loggamma((1 - za) / 2) - sps.loggamma(za / 2))
    return complex(out[0]) if np.ndim(z) == 0 else out


# ---------------------------------------------------------------- Riemann-Siegel

def riemann_siegel_theta(t):
    t = np.asarray(t, dtype=float)
    out = sps.loggamma(0.25 + 0.5j * t).imag - 0.5 * t * math.log(math.pi)
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=1)
def _rs_correction_polys():
    """Coefficient arrays (in x = p - 1/2) for C0..C4."""
    with mpmath.workdps(110):
        M = 72
        pi = mpmath.pi
        num = [mpmath.mpf(0)] * M
        den = [mpmath.mpf(0)] * M
        for j in range(M // 2):
            num[2 * j] = (2 * pi) ** j / mpmath.factorial(j) * mpmath.cos(-5 * pi / 8 + j * pi / 2)
            den[2 * j] = -((-1) ** j) * (2 * pi) ** (2 * j) / mpmath.factorial(2 * j)
        psi = [mpmath.mpf(0)] * M
        for n in range(M):
            psi[n] = (num[n] - mpmath.fsum(psi[i] * den[n - i] for i in range(n))) / den[0]

        def deriv(k):
            return [psi[n + k] * mpmath.factorial(n + k) / mpmath.factorial(n) for n in range(M - k)]

        def combo(terms):
            L = max(len(deriv(k)) for k, _ in terms)
            acc = [mpmath.mpf(0)] * L
            for k, c in terms:
                d = deriv(k)
                for i, v in enumerate(d):
                    acc[i] += c * v
            return acc

        p2 = pi ** 2
        polys = [
            combo([(0, 1)]),
            combo([(3, -1 / (96 * p2))]),
            combo([(2, 1 / (64 * p2)), (6, 1 / (18432 * p2 ** 2))]),
            combo([(1, -1 / (64 * p2)), (5, -1 / (3840 * p2 ** 2)), (9, -1 / (5308416 * p2 ** 3))]),
            combo([(0, 1 / (128 * p2)), (4, mpmath.mpf(19) / (24576 * p2 ** 2)),
                   (8, mpmath.mpf(11) / (5898240 * p2 ** 3)), (12, 1 / (2038431744 * p2 ** 4))]),
        ]
        return [np.array([float(c) for c in poly[:48]]) for poly in polys]


# Riemann-Siegel with C0..C4 errs by about 0.016 t^(-11/4): below 1e-10 from t ~ 1000 on.
RS_THRESHOLD = 1000.0


def _hardy_Z_rs(t: np.ndarray, corrections: int = 4) -> np.ndarray:
    tau = np.sqrt(t / TWO_PI)
    m = np.floor(tau).astype(int)
    p = tau - m
    theta = riemann_siegel_theta(t)
    out = np.zeros_like(t)
    mmax = int(m.max()) if m.size else 0
    for n in range(1, mmax + 1):
        mask = m >= n
        out += np.where(mask, np.cos(theta - t * math.log(n)) / math.sqrt(n), 0.0)
    out *= 2.0
    x = p - 0.5
    u = np.sqrt(TWO_PI / t)
    polys = _rs_correction_polys()
    rem = np.zeros_like(t)
    for k in range(corrections + 1):
        rem += np.polynomial.polynomial.polyval(x, polys[k]) * u ** k
    sign = np.where((m - 1) % 2 == 0, 1.0, -1.0)
    return out + sign * np.sqrt(u) * rem


def hardy_Z(t, method: str = "auto", plan: ZetaEvalPlan = DEFAULT_PLAN):
    """Z(t) = exp(i theta(t)) zeta(1/2 + i t), real for real t > 0.

    ``method`` is ``rs`` (Riemann-Siegel with C0..C4), ``em`` (rotated
    Euler-Maclaurin zeta) or ``auto`` (rs above RS_THRESHOLD).
    """
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t <= 0):
        raise OutOfRange("hardy_Z needs t > 0")
    out = np.empty_like(t)
    use_rs = t >= RS_THRESHOLD if method == "auto" else np.full(t.shape, method == "rs")
    if use_rs.any():
        out[use_rs] = _hardy_Z_rs(t[use_rs])
    lo = ~use_rs
    if lo.any():
        tl = t[lo]
        out[lo] = (np.exp(1j * riemann_siegel_theta(tl)) * _zeta0(0.5 + 1j * tl, plan)).real
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------- zeros

def _arg_zeta_on_line(T: float, plan: ZetaEvalPlan = DEFAULT_PLAN) -> float:
    """Continuous arg zeta(1/2 + iT) along the horizontal path from sigma=6."""
    n = 256
    for _ in range(6):
        sig = np.linspace(6.0, 0.5, n)
        vals = _zeta0(sig + 1j * T, plan)
        ang = np.unwrap(np.angle(vals))
        if np.max(np.abs(np.diff(ang))) < 0.5:
            return float(ang[-1])
        n *= 2
    raise PrecisionLoss(f"argument tracking failed at T={T}")


def zero_count(T: float, plan: ZetaEvalPlan = DEFAULT_PLAN) -> int:
    """N(T) = theta(T)/pi + 1 + S(T), from the argument principle.

    No zeros lie below the first ordinate 14.13..., so N(T) = 0 there.
    """
    if T < 14.0:
        return 0
    val = riemann_siegel_theta(T) / math.pi + 1.0 + _arg_zeta_on_line(T, plan) / math.pi
    n = round(val)
    if abs(val - n) > 0.05:
        raise PrecisionLoss(f"N({T}) evaluated to {val}, not near an integer")
    return int(n)


def _bisect_brackets(a: np.ndarray, b: np.ndarray, fa: np.ndarray, tol: float) -> np.ndarray:
    while True:
        width = b - a
        if np.all(width <= tol):
            return 0.5 * (a + b)
        mid = 0.5 * (a + b)
        fm = hardy_Z(mid)
        left = np.sign(fm) == np.sign(fa)
        a = np.where(left, mid, a)
        fa = np.where(left, fm, fa)
        b = np.where(left, b, mid)


def _grid(t0: float, t1: float, shrink: float) -> np.ndarray:
    pts = [t0]
    t = t0
    while t < t1:
        gap = TWO_PI / max(1.0, math.log(t / TWO_PI))
        t = min(t1, t + 0.2 * gap * shrink)
        pts.append(t)
    return np.array(pts)


def find_zeros(t0: float, t1: float, tol: float = 1e-9, retries: int = 4) -> list[float]:
    """Critical-line zero ordinates in (t0, t1], refined to ``tol``.

    Zeros are bracketed by sign changes of Z on a grid whose step is a fifth
    of the mean gap; the count is checked against the argument principle and
    the step halved on a mismatch.
    """
    if not 0 < t0 < t1:
        raise OutOfRange("need 0 < t0 < t1")
    expected = zero_count(t1) - zero_count(t0)
    shrink = 1.0
    for _ in range(retries + 1):
        grid = _grid(t0, t1, shrink)
        z = hardy_Z(grid)
        # exact zeros on grid nodes are nudged off
        z = np.where(z == 0.0, 1e-300, z)
        idx = np.nonzero(np.sign(z[:-1]) != np.sign(z[1:]))[0]
        if idx.size == expected:
            roots = _bisect_brackets(grid[idx], grid[idx + 1], z[idx], tol)
            return [float(r) for r in roots]
        shrink /= 2
    raise MissedZero(f"found {idx.size} sign changes in ({t0}, {t1}], argument principle gives {expected}")


# ---------------------------------------------------------------- constants

@lru_cache(maxsize=None)
def _laurent_regular_part() -> tuple[float, ...]:
    # g(s) = zeta(1+s) - 1/s is entire; returns its Taylor coefficients c_0..c_23
    radius, M = 1.0, 64
    w = np.exp(1j * TWO_PI * np.arange(M) / M)
    s = radius * w
    g = _zeta0(1.0 + s, ZetaEvalPlan(euler_maclaurin_terms=40, bernoulli_order=20)) - 1.0 / s
    return tuple(float(((g * w ** (-n)).mean() / radius ** n).real) for n in range(24))


@lru_cache(maxsize=None)
def _stieltjes_all() -> tuple[float, ...]:
    c = _laurent_regular_part()
    # c_n = (-1)^n gamma_n / n!
    return tuple((-1) ** n * math.factorial(n) * c[n] for n in range(5))


LAURENT_RADIUS = 0.1


def _zeta_near_one(s: np.ndarray, order: int) -> np.ndarray:
    """zeta^(order)(s) from the Laurent expansion at 1; accurate for |s-1| < 0.5."""
    x = np.asarray(s, dtype=complex) - 1.0
    c = _laurent_regular_part()
    out = (-1) ** order * math.factorial(order) / x ** (order + 1)
    acc = np.zeros_like(x)
    for n in range(len(c) - 1, order - 1, -1):
        acc = acc * x + c[n] * math.factorial(n) / math.factorial(n - order)
    return out + acc


def stieltjes(n: int) -> float:
    """Stieltjes constant gamma_n, 0 <= n <= 4."""
    if not 0 <= n <= 4:
        raise OutOfRange("stieltjes supports 0 <= n <= 4")
    return _stieltjes_all()[n]


@dataclass(frozen=True)
class StieltjesTable:
    values: tuple[float, ...]

    @classmethod
    def build(cls) -> "StieltjesTable":
        vals = _stieltjes_all()
        if abs(vals[0] - 0.5772156649) >= 1e-9:
            raise PrecisionLoss("gamma_0 failed its cross-check")
        return cls(vals)

    def __getitem__(self, n: int) -> float:
        return self.values[n]


def barnes_g_int(n: int) -> int:
    """G(n) for integer n >= 1 from G(z+1) = Gamma(z) G(z)."""
    if n < 1:
        raise OutOfRange("barnes_g_int needs n >= 1")
    g = 1
    for k in range(1, n):
        g *= math.factorial(k - 1)
    return g


def barnes_ratio(k: int) -> Fraction:
    """G(k+1)^2 / G(2k+1) as an exact rational."""
    return Fraction(barnes_g_int(k + 1) ** 2, barnes_g_int(2 * k + 1))


def _half_bessel(nu2: int, x: float) -> float:
    """J_{nu2/2}(x) for odd nu2 in {-1, 1, 3, 5, 7} via closed forms."""
    s, c = math.sin(x), math.cos(x)
    pref = math.sqrt(2.0 / (math.pi * x))
    if nu2 == -1:
        return pref * c
    if nu2 == 1:
        return pref * s
    if nu2 == 3:
        return pref * (s / x - c)
    if nu2 == 5:
        return pref * ((3 / x ** 2 - 1) * s - 3 * c / x)
    if nu2 == 7:
        return pref * ((15 / x ** 3 - 6 / x) * s - (15 / x ** 2 - 1) * c)
    raise ValueError(nu2)


def _small_x_bessel_product_form(k: int, x: float) -> float:
    # power series in x for F_k(2x); used where the closed forms cancel badly
    with mpmath.workdps(40):
        X = mpmath.mpf(x)
        a = mpmath.besselj(k + 0.5, X)
        b = mpmath.besselj(k - 0.5, X)
        return float(mpmath.pi / 2 * (X * a * a + X * b * b - 2 * k * a * b))


def bessel_F(k: int, y: float) -> float:
    """F_k(y), where F_k(2x) = (pi/2)(x J_{k+1/2}(x)^2 + x J_{k-1/2}(x)^2 - 2k J_{k+1/2}(x) J_{k-1/2}(x))."""
    if k < 1:
        raise OutOfRange("bessel_F needs k >= 1")
    if y < 0:
        raise OutOfRange("bessel_F needs a non-negative argument")
    x = 0.5 * y
    if x == 0.0:
        return 0.0
    if x < 0.05:
        return _small_x_bessel_product_form(k, x)
    if k <= 3:
        a = _half_bessel(2 * k + 1, x)
        b = _half_bessel(2 * k - 1, x)
    else:
        pref = math.sqrt(2 * x / math.pi)
        a = pref * float(sps.spherical_jn(k, x))
        b = pref * float(sps.spherical_jn(k - 1, x))
    return math.pi / 2 * (x * a * a + x * b * b - 2 * k * a * b)
