"""Predictions from the ratios conjecture and its consequences.

Conventions used throughout:

* t-integrals of log(t/2pi)^k and (t/2pi)^(-z) are done with exact
  antiderivatives on [2 pi e, T]; the stub [0, 2 pi e] contributes its length
  times the integrand frozen at t = 2 pi e.
* 1/zeta(1+x) is taken to be 0 at x = 0.
* Removable singularities (coincident shifts) are evaluated as the mean over a
  small circle around the singular point, which returns the analytic value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import special as sps

from . import arith, specfun
from .arith import DEFAULT_CFG, EulerProductConfig
from .errors import (NonRemovableSingularity, OutOfRange, PoleAtZeroShift, QuadratureFail, ShiftOutOfRange)
from .report import PredictionReport
from .specfun import EULER_GAMMA, TWO_PI, as_complex

T_STUB = TWO_PI * math.e


# ---------------------------------------------------------------- domain types

@dataclass(frozen=True)
class ShiftTuple:
    numer: tuple
    denom: tuple

    def __post_init__(self):
        object.__setattr__(self, "numer", tuple(as_complex(z) for z in self.numer))
        object.__setattr__(self, "denom", tuple(as_complex(z) for z in self.denom))
        for z in self.numer + self.denom:
            if not abs(z.real) < arith.SHIFT_BOUND:
                raise ShiftOutOfRange(f"shift {z} has |Re| >= 1/4")

    @classmethod
    def of(cls, shifts) -> "ShiftTuple":
        if isinstance(shifts, ShiftTuple):
            return shifts
        shifts = tuple(shifts)
        half = len(shifts) // 2
        return cls(shifts[:half], shifts[half:])


@dataclass(frozen=True)
class DiscriminantFamily:
    """Positive fundamental discriminants d <= X."""

    X: float
    discriminants: np.ndarray

    @property
    def X_star(self) -> int:
        return int(self.discriminants.size)

    @classmethod
    def build(cls, X: float) -> "DiscriminantFamily":
        return _family(int(X))

    def log_sum(self, c: float) -> float:
        return math.fsum(np.log(self.discriminants / c).tolist())

    def power_sum(self, c: float, z: np.ndarray) -> np.ndarray:
        """sum_d (d/c)^(-z) for each z."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        logd = np.log(self.discriminants / c)
        out = np.empty(z.shape, dtype=complex)
        step = max(1, 2_000_000 // max(logd.size, 1))
        for i in range(0, z.size, step):
            out[i:i + step] = np.exp(-np.outer(z[i:i + step], logd)).sum(axis=1)
        return out


def is_fundamental(d: int) -> bool:
    def squarefree(m):
        k = 2
        while k * k <= m:
            if m % (k * k) == 0:
                return False
            k += 1
        return True

    if d <= 1:
        return False
    if d % 4 == 1:
        return squarefree(d)
    if d % 4 == 0:
        m = d // 4
        return m % 4 in (2, 3) and squarefree(m)
    return False


@lru_cache(maxsize=4)
def _family(X: int) -> DiscriminantFamily:
    if X < 5:
        return DiscriminantFamily(float(X), np.zeros(0))
    sqf = np.ones(X + 1, dtype=bool)
    for p in arith.primes_upto(math.isqrt(X)):
        sqf[p * p::p * p] = False
    n = np.arange(X + 1)
    odd = (n % 4 == 1) & sqf & (n > 1)
    m = np.arange(X // 4 + 1)
    even_m = m[(m % 4 >= 2) & sqf[: X // 4 + 1]]
    d = np.sort(np.concatenate([n[odd], 4 * even_m]))
    return DiscriminantFamily(float(X), d.astype(float))


@dataclass(frozen=True)
class QuadConfig:
    """Fixed Gauss-Legendre rule on the truncated range, cross-checked by a coarser rule."""

    nodes: int = 192
    check_nodes: int = 144
    rel_tol: float = 1e-7
    tail_tol: float = 1e-16
    pv_eps: float = 1e-3


DEFAULT_QUAD = QuadConfig()


def _gauss(a: float, b: float, n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


# ---------------------------------------------------------------- helpers

def _zeta1(x):
    """zeta(1 + x)."""
    return specfun.zeta(1.0 + np.asarray(x, dtype=complex))


def _inv_zeta1(x):
    """1/zeta(1 + x), with the value 0 at x = 0."""
    x = np.atleast_1d(np.asarray(as_complex(x), dtype=complex))
    out = np.zeros(x.shape, dtype=complex)
    nz = x != 0
    if np.any(nz):
        out[nz] = 1.0 / specfun.zeta(1.0 + x[nz])
    return out


def _scalar(v):
    v = np.asarray(v)
    return complex(v.ravel()[0]) if v.size == 1 else v


def _gamma_ratio(a, b):
    """Gamma(a)/Gamma(b) through log-gamma."""
    return np.exp(sps.loggamma(np.asarray(a, dtype=complex)) - sps.loggamma(np.asarray(b, dtype=complex)))


def log_poly_integral(coeffs, T: float) -> float:
    """int_0^T sum_k coeffs[k] log(t/2pi)^k dt, with the frozen stub below 2 pi e."""
    coeffs = list(coeffs)
    at_stub = sum(coeffs)  # log(t/2pi) = 1 at the stub point

    def F(t):
        ell = math.log(t / TWO_PI)
        total = 0.0
        for k, c in enumerate(coeffs):
            if c == 0:
                continue
            # antiderivative of ell^k is t sum_j (-1)^j k!/(k-j)! ell^(k-j)
            s = 0.0
            fall = 1.0
            for j in range(k + 1):
                s += (-1) ** j * fall * ell ** (k - j)
                fall *= k - j
            total += c * s
        return t * total

    if T <= T_STUB:
        return T * at_stub
    return F(T) - F(T_STUB) + T_STUB * at_stub


def power_integral(z, T: float):
    """int_0^T (t/2pi)^(-z) dt, with the frozen stub below 2 pi e."""
    z = np.asarray(z, dtype=complex)
    at_stub = np.exp(-z)
    if T <= T_STUB:
        return T * at_stub
    return (T * np.exp(-z * math.log(T / TWO_PI)) - T_STUB * at_stub) / (1 - z) + T_STUB * at_stub


_CIRCLE = np.exp(2j * math.pi * (np.arange(8) + 0.5) / 8)


def _removable(fn, args: list, singular, scale: float, which=(0,)):
    """fn(*args), or its mean over small circles when some singular(args) vanish."""
    tol = 1e-7 * scale
    if not any(abs(v) < tol for v in singular(*args)):
        return fn(*args)
    if not which:
        raise NonRemovableSingularity("singular configuration persists after perturbation")
    h = 1e-3 * scale
    i, rest = which[0], which[1:]
    acc = 0.0
    for w in _CIRCLE:
        a = list(args)
        a[i] = a[i] + h * w
        acc = acc + _removable(fn, a, singular, scale, rest)
    return acc / len(_CIRCLE)


# ---------------------------------------------------------------- unitary

def _unitary_parts(al, be, ga, de, cfg):
    main = (_zeta1(al + be) * _zeta1(ga + de) * _inv_zeta1(al + de)[0] * _inv_zeta1(be + ga)[0]
            * arith.a_zeta(al, be, ga, de, cfg))
    swap = (_zeta1(-al - be) * _zeta1(ga + de) * _inv_zeta1(-be + de)[0] * _inv_zeta1(-al + ga)[0]
            * arith.a_zeta(-be, -al, ga, de, cfg))
    return complex(main), complex(swap)


def ratio_unitary(shifts, t: float | None = None, T: float | None = None,
                  cfg: EulerProductConfig = DEFAULT_CFG) -> PredictionReport:
    """Ratio of two zetas over two zetas: the integrand at height t, or its integral over [0, T]."""
    st = ShiftTuple.of(shifts)
    al, be = st.numer
    ga, de = st.denom
    if (t is None) == (T is None):
        raise ValueError("give exactly one of t (integrand) or T (integrated)")
    if abs(ga + de) == 0:
        raise NonRemovableSingularity("gamma + delta = 0 puts a pole in both terms")
    scale = max(abs(al), abs(be), abs(ga), abs(de), 1e-6)

    def parts(a, b):
        main, swap = _unitary_parts(a, b, ga, de, cfg)
        if t is not None:
            return np.array([main, swap * (t / TWO_PI) ** (-(a + b))])
        return np.array([main * T, swap * complex(power_integral(a + b, T))])

    main, osc = _removable(parts, [al, be], lambda a, b: [a + b], scale)
    mode = "integrand" if t is not None else "integrated"
    return PredictionReport("ratio_unitary", {"shifts": [al, be, ga, de], "mode": mode, "t": t, "T": T},
                            {"main": complex(main), "oscillatory": complex(osc)})


def ratio_logderiv_unitary(alpha, beta, t, cfg: EulerProductConfig = DEFAULT_CFG):
    """(zeta'/zeta)'(1+a+b) + (t/2pi)^(-a-b) zeta(1+a+b) zeta(1-a-b) A(a+b) - B(a+b)."""
    al, be = as_complex(alpha), as_complex(beta)
    arith.check_shifts(al, be)
    x = al + be
    t = np.asarray(t, dtype=float)
    val = (specfun.zeta_logderiv_prime(1 + x)
           + (t / TWO_PI) ** (-x) * _zeta1(x) * _zeta1(-x) * arith.pair_A(x, cfg)
           - arith.pair_B(x, cfg))
    return _scalar(val)


# ---------------------------------------------------------------- symplectic

def _gamma_quarter(a):
    return _gamma_ratio(0.25 - np.asarray(a) / 2, 0.25 + np.asarray(a) / 2)


def ratio_symplectic(alpha, gamma, d, cfg: EulerProductConfig = DEFAULT_CFG):
    """Per-discriminant summand of the one-over-one symplectic ratio."""
    al, ga = as_complex(alpha), as_complex(gamma)
    arith.check_shifts(al, ga)
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise OutOfRange("d must be positive")

    def value(a):
        first = _zeta1(2 * a) * _inv_zeta1(a + ga)[0] * arith.a_d_general(a, ga, cfg)
        refl = ((d / math.pi) ** (-a) * _gamma_quarter(a) * _zeta1(-2 * a) * _inv_zeta1(-a + ga)[0]
                * arith.a_d_general(-a, ga, cfg))
        return first + refl

    return _scalar(_removable(value, [al], lambda a: [a], max(abs(al), abs(ga), 1e-6)))


def ratio_logderiv_symplectic(r, d, cfg: EulerProductConfig = DEFAULT_CFG):
    """zeta'/zeta(1+2r) + A'_D(r;r) - (d/pi)^(-r) Gamma-ratio zeta(1-2r) A_D(-r;r)."""
    r = as_complex(r)
    arith.check_shifts(r)
    d = np.asarray(d, dtype=float)
    val = (specfun.zeta_logderiv(1 + 2 * r) + arith.a_d_derivative_diag(r, cfg)
           - (d / math.pi) ** (-r) * _gamma_quarter(r) * _zeta1(-2 * r) * arith.a_d_general(-r, r, cfg))
    return _scalar(val)


# ---------------------------------------------------------------- orthogonal

def _tau(tau, cfg):
    return tau if tau is not None else arith.tau_table(cfg.prime_cutoff)


def ratio_orthogonal(alpha, gamma, d, tau=None, cfg: EulerProductConfig = DEFAULT_CFG):
    """Per-discriminant summand of the one-over-one ratio for quadratic twists of Delta."""
    al, ga = as_complex(alpha), as_complex(gamma)
    arith.check_shifts(al, ga)
    if ga == 0:
        raise NonRemovableSingularity("gamma = 0: zeta(1 + 2 gamma) has a pole")
    tau = _tau(tau, cfg)
    d = np.asarray(d, dtype=float)
    L = lambda s: arith.sym2_L(s, tau, cfg)  # noqa: E731

    def value(a):
        z2g = _zeta1(2 * ga)
        first = z2g * L(2 * a) * _inv_zeta1(a + ga)[0] / L(a + ga) * arith.b_delta(a, ga, tau, cfg)
        refl = ((d / TWO_PI) ** (-2 * a) * _gamma_ratio(6 - a, 6 + a) * z2g * L(-2 * a)
                * _inv_zeta1(-a + ga)[0] / L(-a + ga) * arith.b_delta(-a, ga, tau, cfg))
        return first + refl

    return _scalar(value(al))


def ratio_logderiv_orthogonal(r, d, tau=None, cfg: EulerProductConfig = DEFAULT_CFG):
    """-zeta'/zeta(1+2r) + L'/L(sym^2,1+2r) + B'(r;r) - (d/2pi)^(-2r) Gamma-ratio zeta(1+2r) L(1-2r)/L(1) B(-r;r)."""
    r = as_complex(r)
    arith.check_shifts(r)
    tau = _tau(tau, cfg)
    d = np.asarray(d, dtype=float)
    L1 = arith.sym2_L(0.0, tau, cfg)
    val = (-specfun.zeta_logderiv(1 + 2 * r) + arith.sym2_logderiv(2 * r, tau, cfg)
           + arith.b_delta_alpha_derivative(r, tau, cfg)[0]
           - (d / TWO_PI) ** (-2 * r) * _gamma_ratio(6 - r, 6 + r) * _zeta1(2 * r)
           * arith.sym2_L(-2 * r, tau, cfg) / L1 * arith.b_delta(-r, r, tau, cfg))
    return _scalar(val)


# ---------------------------------------------------------------- two over two

def _symp2(a, b, g, d, X):
    den = 4 * a * b * (g + d)
    return ((a + g) * (a + d) * (b + g) * (b + d) / (den * (a + b))
            - X ** (-a) * (-a + g) * (-a + d) * (b + g) * (b + d) / (den * (-a + b))
            - X ** (-b) * (a + g) * (a + d) * (-b + g) * (-b + d) / (den * (a - b))
            - X ** (-a - b) * (-a + g) * (-a + d) * (-b + g) * (-b + d) / (den * (a + b)))


def _orth2(a, b, g, d, X):
    den = (2 * g) * (g + d) * (2 * d)
    return ((a + g) * (a + d) * (b + g) * (b + d) / ((a + b) * den)
            + X ** (-2 * a) * (-a + g) * (-a + d) * (b + g) * (b + d) / ((-a + b) * den)
            + X ** (-2 * b) * (a + g) * (a + d) * (-b + g) * (-b + d) / ((a - b) * den)
            - X ** (-2 * a - 2 * b) * (-a + g) * (-a + d) * (-b + g) * (-b + d) / ((a + b) * den))


def ratio_two_over_two(family: str, alpha, beta, gamma, delta, X: float) -> complex:
    """Leading-order (1/X*) R(alpha, beta; gamma, delta) for the symplectic or orthogonal family."""
    a, b, g, d = (as_complex(z) for z in (alpha, beta, gamma, delta))
    scale = max(abs(a), abs(b), abs(g), abs(d), 1e-12)
    if family == "symplectic":
        if abs(g + d) < 1e-12 * scale:
            raise NonRemovableSingularity("gamma + delta = 0")
        fn = lambda x, y: _symp2(x, y, g, d, X)  # noqa: E731
        sing = lambda x, y: [x, y, x + y, x - y]  # noqa: E731
    elif family == "orthogonal":
        if min(abs(g), abs(d), abs(g + d)) < 1e-12 * scale:
            raise NonRemovableSingularity("gamma, delta or gamma + delta vanishes")
        fn = lambda x, y: _orth2(x, y, g, d, X)  # noqa: E731
        sing = lambda x, y: [x + y, x - y]  # noqa: E731
    else:
        raise ValueError(f"unknown family {family!r}")
    return complex(_removable(fn, [a, b], sing, scale, which=(0, 1)))


# ---------------------------------------------------------------- one-level density

def _chunked(fn, x, step: int = 16):
    """fn over node chunks, concatenated termwise; keeps prime-axis arrays small."""
    parts = [fn(x[i:i + step]) for i in range(0, x.size, step)]
    return {k: np.concatenate([np.atleast_1d(p[k]) for p in parts]) for k in parts[0]}


def _integrate_even(fn, R: float, quad: QuadConfig):
    """int_{-R}^{R} of an integrand whose values at -t are conjugate to those at t.

    fn maps a node array to a dict of term arrays; returns a dict of real integrals.
    """
    res = {}
    for n in (quad.nodes, quad.check_nodes):
        x, w = _gauss(0.0, R, n)
        vals = _chunked(fn, x)
        res[n] = {k: 2.0 * float(np.sum(w * np.real(v))) for k, v in vals.items()}
    fine, coarse = res[quad.nodes], res[quad.check_nodes]
    tot_f, tot_c = sum(fine.values()), sum(coarse.values())
    if abs(tot_f - tot_c) > quad.rel_tol * max(abs(tot_f), 1e-300):
        raise QuadratureFail(f"rules with {quad.nodes} and {quad.check_nodes} nodes differ: {tot_f} vs {tot_c}")
    return fine


def one_level_density(family: str, f, X: float, quad_cfg: QuadConfig = DEFAULT_QUAD, scaled: bool = False,
                      include_oscillatory: bool = True, tau=None,
                      cfg: EulerProductConfig = DEFAULT_CFG) -> PredictionReport:
    """Predicted sum over d <= X and over zeros gamma_d of f(gamma_d).

    With ``scaled`` the zeros are measured in units of the mean spacing at the
    top of the family: f is applied as g(t L / 2pi) with L = log X
    (symplectic) or 2 log X (orthogonal, whose conductor is d^2).
    """
    if X < 100:
        raise OutOfRange("X must be at least 100")
    fam = DiscriminantFamily.build(X)
    Xs = fam.X_star
    if family == "symplectic":
        L = math.log(X)
    elif family == "orthogonal":
        L = 2 * math.log(X)
        tau = _tau(tau, cfg)
    else:
        raise ValueError(f"unknown family {family!r}")
    ft = f.scaled(L / TWO_PI) if scaled else f
    R = ft.cutoff(quad_cfg.tail_tol)

    if family == "symplectic":
        logs = fam.log_sum(math.pi)

        def integrand(t):
            it = 1j * t
            w = ft(t) / TWO_PI
            dens = logs + Xs * sps.psi(0.25 + it / 2).real
            ar = 2 * Xs * (specfun.zeta_logderiv(1 + 2 * it) + arith.a_d_derivative_diag(it, cfg))
            out = {"density": w * dens, "arithmetic": w * ar}
            if include_oscillatory:
                S = fam.power_sum(math.pi, it)
                out["oscillatory"] = w * (-2 * S * _gamma_quarter(it) * _zeta1(-2 * it)
                                          * arith.a_d_general(-it, it, cfg))
            return out
    else:
        logs = fam.log_sum(TWO_PI)
        L1 = arith.sym2_L(0.0, tau, cfg)

        def integrand(t):
            it = 1j * t
            w = ft(t) / TWO_PI
            dens = 2 * logs + Xs * 2 * sps.psi(6 + it).real
            ar = 2 * Xs * (-specfun.zeta_logderiv(1 + 2 * it) + arith.sym2_logderiv(2 * it, tau, cfg)
                           + arith.b_delta_alpha_derivative(it, tau, cfg))
            out = {"density": w * dens, "arithmetic": w * ar}
            if include_oscillatory:
                S = fam.power_sum(TWO_PI, 2 * it)
                out["oscillatory"] = w * (-2 * S * _gamma_ratio(6 - it, 6 + it) * _zeta1(2 * it)
                                          * arith.sym2_L(-2 * it, tau, cfg) / L1 * arith.b_delta(-it, it, tau, cfg))
            return out

    terms = _integrate_even(integrand, R, quad_cfg)
    rep = PredictionReport(f"one_level_density_{family}",
                           {"X": X, "X_star": Xs, "scaled": scaled, "test_function": [f.kind, list(f.params)],
                            "include_oscillatory": include_oscillatory}, terms)
    rep.notes.append(f"normalized_total={rep.total / Xs!r}")
    return rep


def one_level_limit(family: str, g, quad_nodes: int = 400) -> float:
    """int g(tau) (1 -+ sin(2 pi tau)/(2 pi tau)) dtau, the large-X kernel of the family."""
    sign = -1.0 if family == "symplectic" else 1.0
    R = g.cutoff(1e-16)
    x, w = _gauss(0.0, R, quad_nodes)
    return 2.0 * float(np.sum(w * g(x) * (1 + sign * np.sinc(2 * x))))


# ---------------------------------------------------------------- pair correlation

def pair_correlation_prediction(f, T: float, quad_cfg: QuadConfig = DEFAULT_QUAD, scaled: bool = False,
                                cfg: EulerProductConfig = DEFAULT_CFG) -> PredictionReport:
    """Predicted sum over 0 < gamma, gamma' < T of f(gamma - gamma').

    The r-integral is a principal value at r = 0. Values at r and -r are
    conjugate, so the odd singular part cancels in 2 Re I(r); the window
    (0, eps) is filled with eps times the even integrand at eps, which is
    regular there.
    """
    if T < 50:
        raise OutOfRange("T must be at least 50")
    ell_T = math.log(T / TWO_PI)
    fr = f.scaled(ell_T / TWO_PI) if scaled else f
    W0 = float(T)
    W1 = log_poly_integral([0, 1], T)
    W2 = log_poly_integral([0, 0, 1], T)
    R = min(fr.cutoff(quad_cfg.tail_tol), T)
    eps = quad_cfg.pv_eps

    def I(r):
        ir = 1j * r
        fv = fr(r)
        pole = 2 * (specfun.zeta_logderiv_prime(1 + ir) * W0
                    + _zeta1(-ir) * _zeta1(ir) * arith.pair_A(ir, cfg) * power_integral(ir, T))
        return {"log_squared": fv * W2, "pole_pair": fv * pole, "arithmetic_B": fv * (-2 * arith.pair_B(ir, cfg) * W0)}

    # integrate over [eps, R] and add the regular window
    res = {}
    for n in (quad_cfg.nodes, quad_cfg.check_nodes):
        x, w = _gauss(eps, R, n)
        vals = _chunked(I, x)
        res[n] = {k: 2.0 * float(np.sum(w * np.real(v))) for k, v in vals.items()}
    edge = {k: 2.0 * eps * float(np.real(v[0])) for k, v in I(np.array([eps])).items()}
    fine = {k: res[quad_cfg.nodes][k] + edge[k] for k in edge}
    coarse = {k: res[quad_cfg.check_nodes][k] + edge[k] for k in edge}
    tf, tc = sum(fine.values()), sum(coarse.values())
    if abs(tf - tc) > quad_cfg.rel_tol * abs(tf):
        raise QuadratureFail(f"pair correlation rules disagree: {tf} vs {tc}")
    terms = {"diagonal": float(fr(0.0)) * W1 / TWO_PI}
    terms.update({k: v / TWO_PI ** 2 for k, v in fine.items()})
    rep = PredictionReport("pair_correlation", {"T": T, "scaled": scaled, "test_function": [f.kind, list(f.params)],
                                                "pv_eps": eps}, terms)
    if scaled:
        rep.notes.append(f"normalized_total={rep.total * TWO_PI / (T * ell_T)!r}")
    return rep


def montgomery_limit(g, quad_nodes: int = 400) -> float:
    """g(0) + int g(y) (1 - (sin pi y / pi y)^2) dy."""
    R = g.cutoff(1e-16)
    x, w = _gauss(0.0, R, quad_nodes)
    return float(g(0.0)) + 2.0 * float(np.sum(w * g(x) * (1 - np.sinc(x) ** 2)))


# ---------------------------------------------------------------- discrete moments

def _gammas():
    return [specfun.stieltjes(n) for n in range(5)]


def moment2_zetaprime_coefficients() -> list[float]:
    """Coefficients c_0..c_4 of the integrand polynomial in log(t/2pi)."""
    g, g1, g2, g3, _ = _gammas()
    pi = math.pi
    return [
        g ** 4 / pi + 6 * g * g * g1 / pi + 7 * g1 * g1 / pi + 4 * g * g2 / pi + 5 * g3 / (3 * pi),
        -(g ** 3 / pi + 5 * g * g1 / pi + g2 / (2 * pi)),
        g * g / (2 * pi) - g1 / pi,
        g / (3 * pi),
        1 / (24 * pi),
    ]


def moment2_zetaprime(T: float, leading_only: bool = False) -> PredictionReport:
    """Predicted sum over 0 < gamma < T of |zeta'(rho)|^2."""
    if T < 0:
        raise OutOfRange("T must be non-negative")
    if leading_only:
        # the polynomial's own variable log(T/2pi); log T differs by lower-order terms
        lead = T * math.log(T / TWO_PI) ** 4 / (24 * math.pi) if T > TWO_PI else 0.0
        return PredictionReport("moment2_zetaprime", {"T": T, "leading_only": True}, {"leading": lead})
    c = moment2_zetaprime_coefficients()
    terms = {f"log^{k}": c[k] * log_poly_integral([0] * k + [1], T) if T > 0 else 0.0 for k in range(5)}
    rep = PredictionReport("moment2_zetaprime", {"T": T}, terms)
    return rep


def _zeta2_derivs():
    return [float(specfun.zeta_family(2.0, k).real) for k in range(5)]


def moment4_zetaprime_coefficients() -> list[float]:
    """Coefficients of log^9, log^8, log^7 (t/2pi) inside (1/2pi) int ... dt."""
    g, g1 = specfun.stieltjes(0), specfun.stieltjes(1)
    z, z1, z2, _, _ = _zeta2_derivs()
    c9 = 1 / (8640 * z)
    c8 = -(-2 * g * z + z1) / (480 * z * z)
    c7 = (7 * g * g * z * z - 2 * g1 * z * z - 8 * g * z * z1 + 4 * z1 * z1 - 2 * z * z2) / (120 * z ** 3)
    return [c9, c8, c7]


def moment4_zetaprime(T: float) -> PredictionReport:
    """Predicted sum over 0 < gamma < T of |zeta'(rho)|^4, from the three known leading terms.

    The lower coefficients C_6..C_0 are not known; error_budget is a band for
    them, sized by continuing the last coefficient ratio |c7/c8| geometrically.
    """
    if T < 0:
        raise OutOfRange("T must be non-negative")
    c9, c8, c7 = moment4_zetaprime_coefficients()
    terms = {}
    for k, c in zip((9, 8, 7), (c9, c8, c7)):
        terms[f"log^{k}"] = c * log_poly_integral([0] * k + [1], T) / TWO_PI if T > 0 else 0.0
    ratio = abs(c7 / c8)
    band = 0.0
    if T > 0:
        for j in range(7):
            band += abs(c7) * ratio ** (7 - j) * abs(log_poly_integral([0] * j + [1], T)) / TWO_PI
    rep = PredictionReport("moment4_zetaprime", {"T": T}, terms, error_budget=band)
    rep.notes.append("C6..C0 unavailable; error_budget brackets their contribution")
    return rep


def hko_coefficient(k: int, cfg: EulerProductConfig = DEFAULT_CFG) -> float:
    """(1/2pi) G(k+2)^2/G(2k+3) a(k)."""
    if k not in (1, 2, 3):
        raise OutOfRange("hko_leading supports k in {1, 2, 3}")
    ak = 1.0 if k == 1 else arith.a_k_arithmetic(k, cfg)
    return float(specfun.barnes_ratio(k + 1)) * ak / TWO_PI


def hko_leading(k: int, T: float, cfg: EulerProductConfig = DEFAULT_CFG) -> float:
    """(T/2pi) G^2(k+2)/G(2k+3) a(k) (log T)^(k(k+2)+1)."""
    return hko_coefficient(k, cfg) * T * math.log(T) ** (k * (k + 2) + 1)


def fourth_moment_zeta_coefficients() -> list[float]:
    """Coefficients c_0..c_4 of the quartic in log(t/2pi) for |zeta(1/2+it)|^4."""
    g, g1, g2, g3, _ = _gammas()
    z, z1, z2, z3, z4 = _zeta2_derivs()
    pi = math.pi
    c4 = 1 / (2 * pi ** 2)
    c3 = 8 / pi ** 4 * (g * pi ** 2 - 3 * z1)
    c2 = 6 / pi ** 6 * (-48 * g * z1 * pi ** 2 - 12 * z2 * pi ** 2 + 7 * g * g * pi ** 4 + 144 * z1 * z1
                        - 2 * g1 * pi ** 4)
    c1 = 12 / pi ** 8 * (6 * g ** 3 * pi ** 6 - 84 * g * g * z1 * pi ** 4 + 24 * g1 * z1 * pi ** 4 - 1728 * z1 ** 3
                         + 576 * g * z1 * z1 * pi ** 2 + 288 * z1 * z2 * pi ** 2 - 8 * z3 * pi ** 4
                         - 10 * g1 * g * pi ** 6 - g2 * pi ** 6 - 48 * g * z2 * pi ** 4)
    c0 = 4 / pi ** 10 * (-12 * z4 * pi ** 6 + 36 * g2 * z1 * pi ** 6 + 9 * g ** 4 * pi ** 8 + 21 * g1 * g1 * pi ** 8
                         + 432 * z2 * z2 * pi ** 4 + 3456 * g * z1 * z2 * pi ** 4 + 3024 * g * g * z1 * z1 * pi ** 4
                         - 36 * g * g * g1 * pi ** 8 - 252 * g * g * z2 * pi ** 6 + 3 * g * g2 * pi ** 8
                         + 72 * g1 * z2 * pi ** 6 + 360 * g1 * g * z1 * pi ** 6 - 216 * g ** 3 * z1 * pi ** 6
                         - 864 * g1 * z1 * z1 * pi ** 4 + 5 * g3 * pi ** 8 + 576 * z1 * z3 * pi ** 4
                         - 20736 * g * z1 ** 3 * pi ** 2 - 15552 * z2 * z1 * z1 * pi ** 2 - 96 * g * z3 * pi ** 6
                         + 62208 * z1 ** 4)
    return [c0, c1, c2, c3, c4]


def fourth_moment_zeta(T: float) -> PredictionReport:
    """int_0^T |zeta(1/2+it)|^4 dt from the full quartic; the average is in the notes."""
    if T < 0:
        raise OutOfRange("T must be non-negative")
    c = fourth_moment_zeta_coefficients()
    terms = {f"log^{k}": c[k] * log_poly_integral([0] * k + [1], T) if T > 0 else 0.0 for k in range(5)}
    rep = PredictionReport("fourth_moment_zeta", {"T": T}, terms)
    rep.notes.append(f"average={rep.total / T if T > 0 else 0.0!r}")
    return rep


def moment2_shifted(T: float, a=None, alpha: float | None = None) -> PredictionReport:
    """Predicted sum over 0 < gamma < T of |zeta(rho + a)|^2.

    ``alpha`` selects the scaled form a = 2 pi i alpha / log(T/2pi) and returns
    the three coefficient groups of (T/2pi) log^2, (T/2pi) log, T/2pi.
    """
    if (a is None) == (alpha is None):
        raise ValueError("give exactly one of a or alpha")
    ell = math.log(T / TWO_PI)
    if alpha is not None:
        if alpha == 0:
            raise PoleAtZeroShift("alpha = 0 means a = 0")
        g, g1 = specfun.stieltjes(0), specfun.stieltjes(1)
        s2 = math.sin(2 * math.pi * alpha) / (math.pi * alpha)
        c2 = math.cos(2 * math.pi * alpha)
        lead = 1 - np.sinc(alpha) ** 2
        second = s2 - 2 * g * s2 + 4 * g - 2
        third = 4 * g * c2 - 2 * c2 - 2 * g * g * c2 - 4 * g1 * c2 + 2 * g * g - 4 * g + 2
        base = T / TWO_PI
        rep = PredictionReport("moment2_shifted_scaled", {"T": T, "alpha": alpha},
                               {"log^2": base * ell ** 2 * lead, "log^1": base * ell * second, "log^0": base * third})
        rep.notes.append(f"coefficients={[float(lead), second, third]!r}")
        return rep
    a = as_complex(a)
    if a == 0:
        raise PoleAtZeroShift("a = 0: the sum is the second moment of zeta at its own zeros")
    if a in (0.5 + 0j, -0.5 + 0j):
        raise PoleAtZeroShift("rho + a would reach the pole at 1")
    Lm, Lp = specfun.zeta_logderiv(1 - a), specfun.zeta_logderiv(1 + a)
    zm, zp = specfun.zeta(1 - a), specfun.zeta(1 + a)
    Sm = specfun.zeta_family(1 - a, 2) / zm
    Sp = specfun.zeta_family(1 + a, 2) / zp
    g = EULER_GAMMA
    const = 2 * g * (Lm + Lp) + Sm + Sp - Lm * Lm - Lp * Lp
    terms = {
        "log^2": log_poly_integral([0, 0, 1], T) / TWO_PI,
        "log^1": (Lm + Lp + 2 * g) * log_poly_integral([0, 1], T) / TWO_PI,
        "log^0": const * T / TWO_PI,
        "oscillatory_plus": -zp * zp * complex(power_integral(-a, T)) / TWO_PI,
        "oscillatory_minus": -zm * zm * complex(power_integral(a, T)) / TWO_PI,
    }
    return PredictionReport("moment2_shifted", {"T": T, "a": a}, terms)


# ---------------------------------------------------------------- I_v determinant

def iv_matrix(k: int, theta, u):
    """Entries of the 2k x 2k matrix: row i, block column j has exponent e = 2k - i - j + 1."""
    if k < 1:
        raise OutOfRange("k must be at least 1")
    u = list(u)
    if len(u) != 2 * k:
        raise ValueError("need 2k values of u")
    half = 1 / (2 * theta) if not isinstance(theta, (int, Fraction)) else Fraction(1, 2) / theta
    rows = []
    for i in range(1, 2 * k + 1):
        row = []
        for side in (1, -1):
            for j in range(1, k + 1):
                e = 2 * k - i - j + 1
                c = half + u[j - 1 + (0 if side == 1 else k)]
                row.append(0 if e < 0 else (side * c) ** e / math.factorial(e))
        rows.append(row)
    return rows


def iv_determinant(k: int, theta, u):
    """det of iv_matrix; symbolic inputs give a sympy expression, exact ones a Fraction."""
    rows = iv_matrix(k, theta, u)
    flat = [x for r in rows for x in r]
    if all(isinstance(x, (int, Fraction)) for x in flat):
        import sympy
        return Fraction(str(sympy.Matrix(rows).applyfunc(sympy.Rational).det()))
    if all(isinstance(x, (int, float, Fraction, np.floating)) for x in flat):
        return float(np.linalg.det(np.array(rows, dtype=float)))
    import sympy
    return sympy.expand(sympy.Matrix(rows).det())
