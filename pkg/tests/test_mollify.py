import math
from fractions import Fraction as F

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from ratiolab import arith, mollify, predict, specfun
from ratiolab.errors import ConstraintViolation, DegreeOverflow, MollifierTooLong
from ratiolab.mollify import MollifierSpec, Polynomial, ThetaLaurent, parse_polynomial, poly_calculus

x = Polynomial.monomial(1)
x2 = Polynomial.monomial(2)
x4 = Polynomial.monomial(4)
one = Polynomial((1,))

small_q = st.fractions(min_value=-5, max_value=5, max_denominator=7)
polys = st.lists(small_q, min_size=1, max_size=6).map(lambda c: Polynomial(tuple(c)))
vanishing = polys.map(lambda p: p * x)
positive_theta = st.fractions(min_value=F(1, 10), max_value=3, max_denominator=11)

r, u, eta, a, b = sp.symbols("r u eta a b")


def S(p, v):
    return sum(sp.Rational(c.numerator, c.denominator) * v ** i for i, c in enumerate(p.coefficients))


def to_fraction(e):
    n, d = sp.fraction(sp.nsimplify(e))
    return F(int(n), int(d))


def apply_Q(expr, Q, v):
    out = 0
    for i, c in enumerate(Q.coefficients):
        out += sp.Rational(c.numerator, c.denominator) * (sp.diff(expr, v, i) if i else expr)
    return out


# ---------------------------------------------------------------- polynomial calculus

def test_poly_calculus_examples():
    assert poly_calculus(x4, "derivative") == Polynomial((0, 0, 0, 4))
    assert poly_calculus(x, "product", x).integrate01() == F(1, 3)
    p = parse_polynomial("x^3 + 2*x")
    assert poly_calculus(p, "antiderivative").derivative() == p
    assert poly_calculus(p, "eval", F(1, 2)) == F(9, 8)
    assert poly_calculus(p, "shift_compose", 1)(0) == 3


def test_parse_forms_agree():
    assert parse_polynomial("0, 1, 0, 1/3") == parse_polynomial("x + x^3/3") == parse_polynomial([0, 1, 0, F(1, 3)])
    assert parse_polynomial("2*x^3 - x/2") == Polynomial((0, F(-1, 2), 0, 2))
    assert parse_polynomial("1, 0, 0") == one  # trailing zeros dropped
    with pytest.raises(ValueError):
        parse_polynomial("x^^2")


def test_degree_cap():
    Polynomial.monomial(64)
    with pytest.raises(DegreeOverflow):
        Polynomial.monomial(65)


@settings(max_examples=50)
@given(polys)
def test_antiderivative_has_zero_constant(p):
    assert p.antiderivative()(0) == 0
    assert p.antiderivative().derivative() == p


@settings(max_examples=50)
@given(polys, polys)
def test_integration_by_parts_identities(p1, p2):
    lhs = (p1.derivative() * p2 + p1 * p2.derivative()).integrate01()
    assert lhs == p1(1) * p2(1) - p1(0) * p2(0)
    q1 = p1.antiderivative()
    assert (q1 * p2.derivative()).integrate01() == q1(1) * p2(1) - (p1 * p2).integrate01()


def test_theta_laurent_arithmetic():
    e = ThetaLaurent({0: 1, -1: 2})
    assert (e * e).inverse_coefficients() == [1, 4, 4]
    assert e(F(1, 2)) == 5
    with pytest.raises(ConstraintViolation):
        e(0)
    with pytest.raises(ValueError):
        ThetaLaurent({1: 1}).inverse_coefficients()


# ---------------------------------------------------------------- second-moment forms

def test_unitary_levinson_example():
    assert mollify.unitary_mollified(x, x, one, one, F(1, 2)) == 3


@settings(max_examples=20, deadline=None)
@given(vanishing, vanishing, positive_theta)
def test_unitary_q_constant_is_levinson(p1, p2, th):
    expected = p1(1) * p2(1) + (p1.derivative() * p2.derivative()).integrate01() / th
    assert mollify.unitary_mollified(p1, p2, one, one, th) == expected


@settings(max_examples=20, deadline=None)
@given(vanishing, vanishing, polys, polys, positive_theta)
def test_unitary_slot_symmetry(p1, p2, q1, q2, th):
    assert mollify.unitary_mollified(p1, p2, q1, q2, th) == mollify.unitary_mollified(p2, p1, q2, q1, th)


def test_unitary_against_shift_derivative_oracle():
    # d/dw d/dz of the double integral with shifts w, z fed to P and theta-scaled to Q
    P1, P2 = Polynomial((0, 1, 3)), Polynomial((0, 2, 0, -1))
    Q1, Q2 = Polynomial((1, F(1, 2), 2)), Polynomial((2, 0, 1))
    th = sp.Rational(3, 7)
    w, z = sp.symbols("w z")
    e = S(P1, w + r) * S(P2, z + r) * S(Q1, w * th + u) * S(Q2, z * th + u)
    e = sp.diff(e, w, z).subs({w: 0, z: 0})
    e = sp.integrate(e, (r, 0, 1), (u, 0, 1)) / th + S(P1, 1) * S(P2, 1) * S(Q1, 0) * S(Q2, 0)
    assert to_fraction(e) == mollify.unitary_mollified(P1, P2, Q1, Q2, F(3, 7))


def _hyperbolic_symplectic(P1, P2, Q1, Q2, th):
    """The pre-compact six-term display with Q1(d/da) Q2(d/db) applied, divided by 4.

    Expanded in a, b before the u-integration so every u-integral is polynomial.
    """
    p1, p2 = S(P1, r), S(P2, r)

    def I(f, g):
        return sp.integrate(sp.expand(f * g), (r, 0, 1))

    d = sp.diff
    inner = ((1 / (2 * th ** 3)) * sp.sinh(a * u) / a * sp.sinh(b * u) / b * I(d(p1, r, 2), d(p2, r, 2))
             + (2 / th) * sp.cosh(a * u) * sp.cosh(b * u) * (I(d(p1, r, 2), p2) + I(p1, d(p2, r, 2)))
             + 8 * th * a * b * sp.sinh(a * u) * sp.sinh(b * u) * I(p1, p2))
    edge = ((1 / th ** 2) * sp.sinh(a) / a * sp.sinh(b) / b * (I(d(p1, r, 2), d(p2, r)) + I(d(p1, r), d(p2, r, 2)))
            + (2 / th) * (sp.cosh(a) * sp.sinh(b) / b + sp.cosh(b) * sp.sinh(a) / a) * I(d(p1, r), d(p2, r))
            + 4 * sp.cosh(a) * sp.cosh(b) * (I(d(p1, r), p2) + I(p1, d(p2, r))))
    n = max(Q1.degree, Q2.degree) + 2

    def series(e):
        return sp.series(sp.series(e, a, 0, n).removeO(), b, 0, n).removeO()

    val = 0
    for part, integrate in ((inner, True), (edge, False)):
        e = apply_Q(apply_Q(series(part), Q1, a), Q2, b).subs({a: 0, b: 0})
        val += sp.integrate(sp.expand(e), (u, 0, 1)) if integrate else e
    return to_fraction(sp.simplify(val / 4))


@pytest.mark.parametrize("P1,P2,Q1,Q2", [
    (x2, x2, one, one),
    (Polynomial((0, 0, 1, 2)), Polynomial((0, 0, 3, 0, 1)), Polynomial((1, 0, 3)), Polynomial((2, 0, 0, 0, 1))),
])
def test_symplectic_compact_form_matches_hyperbolic_form(P1, P2, Q1, Q2):
    assert mollify.symplectic_mollified(P1, P2, Q1, Q2, F(3, 7)) == _hyperbolic_symplectic(P1, P2, Q1, Q2,
                                                                                             sp.Rational(3, 7))


def test_symplectic_symmetry_and_linearity():
    P1, P2 = Polynomial((0, 0, 1, 2)), Polynomial((0, 0, 3, 0, 1))
    Q1, Q2 = Polynomial((1, 0, 3)), Polynomial((2, 0, 0, 0, 1))
    th = F(2, 5)
    v = mollify.symplectic_mollified(P1, P2, Q1, Q2, th)
    assert v == mollify.symplectic_mollified(P2, P1, Q2, Q1, th)
    assert mollify.symplectic_mollified(F(3, 4) * P1, P2, Q1, Q2, th) == F(3, 4) * v


def test_symplectic_constraints():
    with pytest.raises(ConstraintViolation):
        mollify.symplectic_mollified(x2, x2, x, one, 1)
    with pytest.raises(ConstraintViolation):
        mollify.symplectic_mollified(x, x2, one, one, 1)


def test_orthogonal_against_expanded_display():
    P1, P2 = Polynomial((0, 1, 2)), Polynomial((0, 3, 0, 1))
    Q1, Q2 = Polynomial((1, 0, 3)), Polynomial((2, 0, 0, 0, 1))
    th = sp.Rational(3, 7)
    t = sp.symbols("t")
    p1, p2, q1, q2 = S(P1, t), S(P2, t), S(Q1, u), S(Q2, u)
    T1, T2 = sp.integrate(p1, (t, 0, t)), sp.integrate(p2, (t, 0, t))

    def It(f, g):
        return sp.integrate(f * g, (t, 0, 1))

    def Iu(f, g):
        return sp.integrate(f * g, (u, 0, 1))

    d = sp.diff
    at1 = {u: 1}
    pre = ((4 / th) * Iu(q1, q2) * It(d(p1, t), d(p2, t))
           + 4 * q1.subs(at1) * q2.subs(at1) * (It(p1, d(p2, t)) + It(d(p1, t), p2))
           + 4 * th * Iu(d(q1, u), d(q2, u)) * (It(d(p1, t), T2) + It(T1, d(p2, t)))
           + 4 * th * (q1.subs(at1) * d(q2, u).subs(at1) + d(q1, u).subs(at1) * q2.subs(at1)) * It(p1, p2)
           + 4 * th ** 2 * d(q1, u).subs(at1) * d(q2, u).subs(at1) * (It(T1, p2) + It(p1, T2))
           + 4 * th ** 3 * Iu(d(q1, u, 2), d(q2, u, 2)) * It(T1, T2))
    assert to_fraction(pre / 4) == mollify.orthogonal_mollified(P1, P2, Q1, Q2, F(3, 7))


def test_orthogonal_properties():
    P1, P2 = Polynomial((0, 1, 2)), Polynomial((0, 3, 0, 1))
    Q1 = Polynomial((1, 0, 3))
    th = F(1, 3)
    # with Q = 1 the third summand has Q'(0) = 0 and the value reduces to the first two parts
    direct = (P1.derivative() * P2.derivative()).integrate01() / th + P1(1) * P2(1)
    assert mollify.orthogonal_mollified(P1, P2, one, one, th) == direct
    v = mollify.orthogonal_mollified(P1, P2, Q1, one, th)
    assert mollify.orthogonal_mollified(5 * P1, P2, Q1, one, th) == 5 * v
    assert mollify.orthogonal_mollified(P1, P2, 5 * Q1, one, th) == 5 * v
    with pytest.raises(ConstraintViolation):
        mollify.orthogonal_mollified(P1, P2, x, one, th)


def test_orthogonal_kmv():
    assert mollify.orthogonal_mollified(x, None, one, None, 1, variant="kmv") == 1
    with pytest.raises(ConstraintViolation):
        mollify.orthogonal_mollified(x, x, one, one, 1, variant="kmv")


# ---------------------------------------------------------------- fourth moment

def test_fourth_diag_example():
    e = mollify.fourth_mollified_diag(x4, x4)
    assert e.inverse_coefficients() == [1, F(208, 35), F(48, 5), F(32, 5), 2]
    assert mollify.fourth_mollified_diag_pre_ibp(x4, x4) == e


@settings(max_examples=10, deadline=None)
@given(polys, polys)
def test_fourth_diag_ibp_and_swap(p, q):
    P, Q = p * x4, q * x4
    e = mollify.fourth_mollified_diag(Q, P)
    assert e == mollify.fourth_mollified_diag_pre_ibp(Q, P)
    assert e == mollify.fourth_mollified_diag(P, Q)
    assert e.terms.get(0, 0) == P(1) * Q(1)


def test_fourth_diag_against_determinant_route():
    P = Polynomial((0, 0, 0, 0, 1, 2))
    Q = Polynomial((0, 0, 0, 0, 3, 0, F(-1, 3)))
    th = sp.symbols("theta", positive=True)
    us = sp.symbols("u1:5")
    det = predict.iv_determinant(2, th, list(us))
    weight = sp.integrate((1 - eta) ** 3 * S(Q, eta + us[2] + us[3]) * S(P, eta + us[0] + us[1]), (eta, 0, 1))
    expr = sp.expand(weight * det) / 6
    for v in us:
        expr = sp.diff(expr, v, 2)
    val = sp.expand(expr.subs({v: 0 for v in us}))
    ours = mollify.fourth_mollified_diag_pre_ibp(Q, P)
    got = {n: to_fraction(val.coeff(th, n)) for n in range(-4, 1)}
    got[0] = to_fraction(val.subs(th, sp.oo)) if not val.coeff(th, 0) else to_fraction(val.coeff(th, 0))
    assert {n: c for n, c in got.items() if c} == ours.terms


def test_fourth_diag_needs_order_four():
    with pytest.raises(ConstraintViolation):
        mollify.fourth_mollified_diag(Polynomial.monomial(3), x4)


def test_fourth_split_example():
    e = mollify.fourth_mollified_split(x2, x2, x2, x2)
    assert e.inverse_coefficients() == [1, F(68, 21), F(10, 3), F(64, 45), F(2, 9)]


def test_fourth_split_relabeling():
    P1, P2 = x2, Polynomial((0, 0, 1, 1))
    Q1, Q2 = Polynomial((0, 0, 2, -1)), x2
    e = mollify.fourth_mollified_split(P1, P2, Q1, Q2)
    assert e == mollify.fourth_mollified_split(P2, P1, Q2, Q1)
    assert e.terms[0] == P1(1) * P2(1) * Q1(1) * Q2(1)


def test_split_cells_against_monte_carlo():
    vols = mollify.split_cell_volumes()
    assert all(v >= 0 for v in vols)  # degenerate orderings leave empty leaves
    assert sum(vols) == F(8, 3)
    rng = np.random.default_rng(20240601)
    hits, n = 0, 0
    for _ in range(20):
        e = rng.uniform(-1, 1, size=(1_000_000, 4))
        ok = (e[:, 0] + e[:, 1] >= 0) & (e[:, 2] + e[:, 3] >= 0) & (e[:, 0] + e[:, 2] >= 0) & (e[:, 1] + e[:, 3] >= 0)
        hits += int(ok.sum())
        n += e.shape[0]
    assert abs(16 * hits / n / (8 / 3) - 1) < 1e-3


def test_i3_linear_p2_kills_two_terms():
    terms = mollify._i3_terms(x2, Polynomial((0, 3)), F(1), F(1, 2))
    assert terms["first"] == 0 and terms["third"] == 0
    assert terms["second"] != 0


def _i3_oracle(P1, P2, t1, t2):
    arg = 1 + (1 - eta) * t2 / t1
    p1d, p1dd = sp.diff(S(P1, r), r).subs(r, arg), sp.diff(S(P1, r), r, 2).subs(r, arg)
    p2d, p2dd = sp.diff(S(P2, eta), eta), sp.diff(S(P2, eta), eta, 2)
    integrand = (p1d * p2dd / t1 + 2 * t2 / t1 ** 2 * p1dd * p2d + p1dd * p2dd / (2 * t1 ** 2)) * (1 - eta)
    return S(P1, 1) * S(P2, 1) + sp.integrate(sp.expand(integrand), (eta, 0, 1))


def test_i3_brute_force():
    assert mollify.i3_mixed(x2, x2, 1, 1) == to_fraction(_i3_oracle(x2, x2, 1, 1)) == F(20, 3)
    P1, P2 = Polynomial((0, 0, 1, 2)), Polynomial((0, 0, 3, -1))
    assert mollify.i3_mixed(P1, P2, F(1, 2), F(1, 5)) == to_fraction(_i3_oracle(P1, P2, sp.Rational(1, 2),
                                                                                  sp.Rational(1, 5)))


def test_i3_small_theta2_limit():
    P1, P2 = Polynomial((0, 0, 1, 2)), Polynomial((0, 0, 3, -1))
    t2 = sp.symbols("t2", positive=True)
    lim = to_fraction(sp.limit(_i3_oracle(P1, P2, sp.Rational(1, 2), t2), t2, 0))
    near = mollify.i3_mixed(P1, P2, F(1, 2), F(1, 10 ** 9))
    assert abs(near - lim) < F(1, 10 ** 6)
    with pytest.raises(ConstraintViolation):
        mollify.i3_mixed(P1, P2, F(1, 5), F(1, 2))


# ---------------------------------------------------------------- non-vanishing

def test_nonvanishing_paper_values():
    assert mollify.nonvanishing_ratio(x, F(1, 2)) == F(1, 3)
    assert mollify.nonvanishing_ratio(x, F(1, 2), scheme="two_piece", a=1) == F(1, 2)


@pytest.mark.parametrize("k", range(1, 11))
@pytest.mark.parametrize("theta", [F(1, 2), F(4, 7)])
def test_nonvanishing_power_formula(k, theta):
    expected = 1 / (1 + (4 * theta + 1 / theta) * F(k * k, 4 * k * k - 1))
    assert mollify.nonvanishing_ratio(Polynomial.monomial(k), theta, k) == expected


@settings(max_examples=30)
@given(vanishing, st.fractions(min_value=F(1, 9), max_value=10, max_denominator=9), st.integers(0, 4))
def test_nonvanishing_scale_invariant(p, c, k):
    if p(1) == 0:
        return
    assert mollify.nonvanishing_ratio(c * p, F(1, 2), k) == mollify.nonvanishing_ratio(p, F(1, 2), k)


def test_sinh_lambda():
    assert mollify.sinh_lambda(F(1, 2), 2) == pytest.approx(2 * math.sqrt(5 / 3), rel=1e-15)


def test_optimizer_against_sinh():
    poly = mollify.optimize_nonvanishing(F(1, 2), 3, 12)
    sinh = mollify.optimize_nonvanishing(F(1, 2), 3, mode="sinh")
    assert abs(poly.ratio - sinh.ratio) < 1e-6
    assert poly.exact_ratio >= mollify.nonvanishing_ratio(Polynomial.monomial(3), F(1, 2), 3)
    assert poly.stationarity < 1e-8
    assert poly.polynomial(1) == 1 and poly.polynomial(0) == 0
    assert mollify.nonvanishing_ratio(poly.polynomial, F(1, 2), 3) == poly.exact_ratio
    assert float(mollify.nonvanishing_ratio(sinh.polynomial, F(1, 2), 3)) == pytest.approx(sinh.ratio, rel=1e-12)


def test_optimizer_large_k_approaches_half():
    ks = (4, 8, 16)
    gaps = [(0.5 - mollify.optimize_nonvanishing(F(1, 2), k, mode="sinh").ratio) * k * k for k in ks]
    assert all(g > 0 for g in gaps)
    # (1/2 - ratio) k^2 settles to a constant
    assert abs(gaps[2] - gaps[1]) < 0.05 * gaps[2]
    assert abs(gaps[2] - gaps[1]) < abs(gaps[1] - gaps[0])


def test_optimizer_errors():
    with pytest.raises(ConstraintViolation):
        mollify.optimize_nonvanishing(F(1, 2), 0, mode="sinh")
    with pytest.raises(DegreeOverflow):
        mollify.optimize_nonvanishing(F(1, 2), 1, 65)


# ---------------------------------------------------------------- empirical cross-check

def _mean_value_oracle(P, theta, T):
    """Mean of |zeta M|^2 on [0, T] from the two-sided mean-value formula for Dirichlet polynomials."""
    y = T ** theta
    N = int(y)
    mu = arith.mobius_table(max(N, 2))
    coef = {h: int(mu[h]) * float(P(math.log(y / h) / math.log(y))) for h in range(1, N + 1) if mu[h]}
    total = 0.0
    for h, ah in coef.items():
        for k, ak in coef.items():
            g = math.gcd(h, k)
            lcm = h * k // g
            total += ah * ak / lcm * (math.log(T * g * g / (2 * math.pi * h * k)) + 2 * specfun.EULER_GAMMA - 1)
    return total


def test_empirical_mollified_moment_against_mean_value_formula():
    val = mollify.empirical_mollified_moment(x, x, one, one, 0.2, 2000.0)
    assert val == pytest.approx(_mean_value_oracle(x, 0.2, 2000.0), rel=0.01)


def test_empirical_short_mollifier_is_constant():
    T = 1000.0
    P = Polynomial((0, 2))
    val = mollify.empirical_mollified_moment(P, P, one, one, 0.05, T)  # y = 1.41
    plain = (math.log(T / (2 * math.pi)) + 2 * specfun.EULER_GAMMA - 1) * float(P(1)) ** 2
    assert val == pytest.approx(plain, rel=0.02)


def test_mollifier_values_at_unit_length():
    mu = arith.mobius_table(10)
    v = mollify.mollifier_values(np.array([3.0, 7.5]), Polynomial((0, 3)), 1.0, mu)
    assert np.all(v == 3)


def test_empirical_limits():
    with pytest.raises(MollifierTooLong):
        mollify.empirical_mollified_moment(x, x, one, one, 0.2, 6000.0)
    with pytest.raises(MollifierTooLong):
        mollify.empirical_mollified_moment(x, x, one, one, 2.0, 5000.0)


# ---------------------------------------------------------------- spec type

def test_mollifier_spec_validation():
    s = MollifierSpec("fourth_diag", theta=F(1, 2), P1=x4, Q1=x4)
    assert s.evaluate() == 1 + F(208, 35) * 2 + F(48, 5) * 4 + F(32, 5) * 8 + 2 * 16
    assert s.evaluate(symbolic=True).inverse_coefficients()[1] == F(208, 35)
    with pytest.raises(ConstraintViolation):
        MollifierSpec("symplectic", theta=1, P1=x2, P2=x2, Q1=x, Q2=one)
    with pytest.raises(ConstraintViolation):
        MollifierSpec("fourth_split", theta=1, P1=x2, P2=x2, Q1=x2)
    with pytest.raises(ConstraintViolation):
        MollifierSpec("cubic")
    assert MollifierSpec("mixed_I3", theta=1, theta2=1, P1=x2, P2=x2).evaluate() == F(20, 3)


def test_symbolic_and_numeric_evaluation_agree():
    P1, P2 = Polynomial((0, 1, 2)), Polynomial((0, 3, 0, 1))
    Q1, Q2 = Polynomial((1, 0, 3)), Polynomial((2, 0, 0, 0, 1))
    for fn in (mollify.unitary_mollified, mollify.orthogonal_mollified):
        assert fn(P1, P2, Q1, Q2, None)(F(5, 9)) == fn(P1, P2, Q1, Q2, F(5, 9))
