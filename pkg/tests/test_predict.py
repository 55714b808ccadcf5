import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from ratiolab import arith, predict, specfun, zerolab
from ratiolab.errors import NonRemovableSingularity, OutOfRange, PoleAtZeroShift
from ratiolab.predict import QuadConfig
from ratiolab.report import PredictionReport

shift = st.builds(complex, st.floats(0.02, 0.2), st.floats(-3, 3))
G = specfun.EULER_GAMMA


def test_ratio_unitary_farmer_limit():
    T = 1e6
    a, b, g, d = (c / math.log(T) for c in (1, 2, 1, 2))
    farmer = (T * (a + d) * (b + g) / ((a + b) * (g + d))
              - T ** (1 - a - b) * (d - b) * (g - a) / ((a + b) * (g + d)))
    rep = predict.ratio_unitary([a, b, g, d], T=T)
    assert rep.total.real == pytest.approx(farmer, rel=0.02)


def test_ratio_unitary_against_direct_formula():
    a, b, g, d = 0.1 + 0.5j, 0.07 - 0.2j, 0.05 + 0.1j, 0.12
    t = 500.0
    z = specfun.zeta
    direct = (z(1 + a + b) * z(1 + g + d) / (z(1 + a + d) * z(1 + b + g)) * arith.a_zeta(a, b, g, d)
              + (t / (2 * math.pi)) ** (-a - b) * z(1 - a - b) * z(1 + g + d)
              / (z(1 - b + d) * z(1 - a + g)) * arith.a_zeta(-b, -a, g, d))
    assert abs(predict.ratio_unitary([a, b, g, d], t=t).total - direct) < 1e-10


def test_ratio_unitary_diagonal_is_one():
    # the reflected term carries 1/zeta(1)^2 = 0
    rep = predict.ratio_unitary([0.1 + 0.5j, 0.07 - 0.2j, 0.1 + 0.5j, 0.07 - 0.2j], t=500.0)
    assert abs(rep.total - 1) < 1e-12


@settings(max_examples=5, deadline=None)
@given(shift, shift, shift, shift)
def test_ratio_unitary_swap_symmetry(a, b, g, d):
    v1 = predict.ratio_unitary([a, b, g, d], t=300.0).total
    v2 = predict.ratio_unitary([b, a, d, g], t=300.0).total
    assert abs(v1 - v2) < 1e-9 * max(1.0, abs(v1))


def test_ratio_unitary_needs_one_mode():
    with pytest.raises(ValueError):
        predict.ratio_unitary([0.1, 0.1, 0.1, 0.1])
    with pytest.raises(NonRemovableSingularity):
        predict.ratio_unitary([0.1, 0.1, 0.1, -0.1], t=10.0)


def test_logderiv_unitary_near_coincidence():
    eta, t = 1e-3, 1e4
    v = predict.ratio_logderiv_unitary(eta / 2, eta / 2, t)
    lead = math.log(t / (2 * math.pi)) / eta
    assert abs(v.real - lead) < 0.01 * lead
    assert v == pytest.approx(predict.ratio_logderiv_unitary(eta / 2, eta / 2, t))


def test_logderiv_unitary_symmetric():
    a, b = 0.05 + 0.2j, 0.12
    assert predict.ratio_logderiv_unitary(a, b, 800.0) == pytest.approx(predict.ratio_logderiv_unitary(b, a, 800.0))


def test_symplectic_collapses_on_diagonal():
    # first term is A_D(r;r) = 1 and the reflected term carries 1/zeta(1) = 0
    assert abs(predict.ratio_symplectic(0.1, 0.1, 1000.0) - 1) < 1e-9


def test_symplectic_oscillation_decays():
    r = 0.1
    far = predict.ratio_logderiv_symplectic(r, 1e300)
    f1 = predict.ratio_logderiv_symplectic(r, 1e3) - far
    f2 = predict.ratio_logderiv_symplectic(r, 1e5) - far
    assert abs(f2 / f1) == pytest.approx(100 ** -r, rel=1e-10)


def test_gamma_ratio_limit():
    assert abs(predict._gamma_ratio(6 - 1e-9, 6 + 1e-9) - 1) < 1e-8


def test_two_over_two_removable():
    X = 1e6
    a = 1 / math.log(X)
    g, d = 0.7 * a, 1.3 * a
    for fam in ("symplectic", "orthogonal"):
        v1 = predict.ratio_two_over_two(fam, a, a * (1 + 1e-6), g, d, X)
        v2 = predict.ratio_two_over_two(fam, a, a * (1 + 1e-8), g, d, X)
        assert abs(v1 - v2) < 1e-4 * abs(v1)


def test_two_over_two_symplectic_symmetry():
    X = 1e5
    a, b, g, d = (c / math.log(X) for c in (0.3, 0.8, 0.5 + 0.2j, 1.1))
    v = predict.ratio_two_over_two("symplectic", a, b, g, d, X)
    assert v == pytest.approx(predict.ratio_two_over_two("symplectic", b, a, g, d, X), rel=1e-12)
    assert v == pytest.approx(predict.ratio_two_over_two("symplectic", a, b, d, g, X), rel=1e-12)


def test_two_over_two_orthogonal_symbolic_limit():
    X = 10 ** 6
    L = sp.log(sp.Integer(X))
    A = sp.Rational(4, 5) / L
    g, d = sp.Rational(3, 2) / L, 1 / L
    B = sp.symbols("B")
    den = 2 * g * (g + d) * 2 * d
    expr = ((A + g) * (A + d) * (B + g) * (B + d) / ((A + B) * den)
            + X ** (-2 * A) * (-A + g) * (-A + d) * (B + g) * (B + d) / ((-A + B) * den)
            + X ** (-2 * B) * (A + g) * (A + d) * (-B + g) * (-B + d) / ((A - B) * den)
            - X ** (-2 * A - 2 * B) * (-A + g) * (-A + d) * (-B + g) * (-B + d) / ((A + B) * den))
    ref = float(sp.N(sp.limit(expr, B, A), 30))
    val = predict.ratio_two_over_two("orthogonal", *(float(v) for v in (A, A, g, d)), X)
    assert val.real == pytest.approx(ref, rel=1e-8)
    generic = float(sp.N(expr.subs(B, 2 / L), 30))
    assert predict.ratio_two_over_two("orthogonal", float(A), float(2 / L), float(g), float(d), X).real == \
        pytest.approx(generic, rel=1e-10)


def test_discriminant_family_small():
    def fundamental(d):
        if d % 4 == 1:
            m = d
        elif d % 16 in (8, 12):
            m = d // 4
        else:
            return False
        return d > 1 and all(m % (p * p) for p in range(2, int(math.isqrt(m)) + 1))

    fam = predict.DiscriminantFamily.build(100)
    expected = [d for d in range(2, 101) if fundamental(d)]
    assert fam.discriminants.astype(int).tolist() == expected
    assert fam.X_star == 30
    assert all(predict.is_fundamental(int(d)) for d in predict.DiscriminantFamily.build(5000).discriminants)


def test_one_level_oscillatory_switch():
    g = zerolab.make_test_function("gaussian")
    full = predict.one_level_density("symplectic", g, 1e4, scaled=True)
    bare = predict.one_level_density("symplectic", g, 1e4, scaled=True, include_oscillatory=False)
    assert set(full.terms) == {"density", "arithmetic", "oscillatory"}
    assert "oscillatory" not in bare.terms
    assert full.total - full.terms["oscillatory"] == pytest.approx(bare.total, rel=1e-9)


def test_pair_correlation_pv_stable():
    f = zerolab.make_test_function("gaussian")
    a = predict.pair_correlation_prediction(f, 1000.0)
    b = predict.pair_correlation_prediction(f, 1000.0, QuadConfig(pv_eps=5e-4))
    assert abs(a.total - b.total) < 1e-6 * abs(a.total)


def test_pair_correlation_steep_gaussian_counts_zeros():
    f = zerolab.make_test_function("gaussian", [100.0])
    rep = predict.pair_correlation_prediction(f, 1000.0)
    assert rep.total == pytest.approx(649, rel=0.10)


def test_moment2_coefficients():
    c = predict.moment2_zetaprime_coefficients()
    assert c[4] == pytest.approx(1 / (24 * math.pi), rel=1e-15)
    assert c[3] == pytest.approx(G / (3 * math.pi), rel=1e-12)
    assert predict.moment2_zetaprime(0.0).total == 0.0
    full = predict.moment2_zetaprime(1e6).total
    lead = predict.moment2_zetaprime(1e6, leading_only=True).total
    assert 0.5 < lead / full < 1.5


def test_moment4_leading_and_band():
    c9, _, _ = predict.moment4_zetaprime_coefficients()
    assert c9 == pytest.approx(1 / (8640 * math.pi ** 2 / 6), rel=1e-12)
    assert predict.moment4_zetaprime(0.0).total == 0.0
    rep = predict.moment4_zetaprime(1000.0)
    assert rep.error_budget > 0 and rep.notes


def test_fourth_moment_leading():
    c = predict.fourth_moment_zeta_coefficients()
    assert c[4] == pytest.approx(1 / (12 * math.pi ** 2 / 6), rel=1e-14)
    assert predict.fourth_moment_zeta(0.0).total == 0.0


def test_zeta_derivatives_at_two():
    ours = predict._zeta2_derivs()
    for k in range(5):
        assert ours[k] == pytest.approx(float(mpmath.zeta(2, 1, k)), abs=1e-8)


def test_hko_monotone():
    vals = [predict.hko_leading(2, T) for T in (100, 1000, 1e4)]
    assert vals == sorted(vals)
    with pytest.raises(OutOfRange):
        predict.hko_leading(4, 100.0)


def test_moment2_shifted_scaled():
    rep = predict.moment2_shifted(1e6, alpha=0.5)
    lead = rep.terms["log^2"] / (1e6 / (2 * math.pi) * math.log(1e6 / (2 * math.pi)) ** 2)
    assert lead == pytest.approx(1 - 4 / math.pi ** 2, abs=1e-12)
    tiny = predict.moment2_shifted(1e6, alpha=1e-6)
    assert abs(tiny.terms["log^2"]) < 1e-8 * abs(rep.terms["log^2"])
    with pytest.raises(PoleAtZeroShift):
        predict.moment2_shifted(1e6, alpha=0.0)


@pytest.mark.parametrize("a", [0.1, 0.2 + 0.05j])
def test_moment2_shifted_reflection(a):
    T = 2000.0
    p = predict.moment2_shifted(T, a=a)
    m = predict.moment2_shifted(T, a=-a)
    assert p.terms["oscillatory_plus"] == pytest.approx(m.terms["oscillatory_minus"], rel=1e-12)
    assert p.total == pytest.approx(m.total, rel=1e-12)


def test_iv_determinant_k2_display():
    th = Fraction(1, 2)
    c = Fraction(1, 2) / th
    fac = math.factorial
    # rows follow the displayed 4x4 block matrix at u = 0
    M = sp.Matrix([
        [c ** 3 / fac(3), c ** 2 / fac(2), -c ** 3 / fac(3), c ** 2 / fac(2)],
        [c ** 2 / fac(2), c, c ** 2 / fac(2), -c],
        [c, 1, -c, 1],
        [1, 0, 1, 0],
    ])
    assert predict.iv_determinant(2, th, [0] * 4) == Fraction(str(M.det()))


def test_iv_matrix_negative_index_zero():
    rows = predict.iv_matrix(2, Fraction(1, 3), [Fraction(1, 7)] * 4)
    assert rows[3][0] == 1 and rows[3][2] == 1
    assert rows[3][1] == 0 and rows[3][3] == 0
    rows3 = predict.iv_matrix(3, Fraction(1, 3), [0] * 6)
    assert rows3[5][1] == 0 and rows3[5][2] == 0 and rows3[4][2] == 0 and rows3[5][5] == 0


def test_report_total_invariant():
    with pytest.raises(ValueError):
        PredictionReport("x", {}, {"a": 1.0, "b": 2.0}, total=4.0)
    rep = predict.moment2_zetaprime(5000.0)
    assert abs(rep.total - math.fsum(rep.terms.values())) < 1e-12 * abs(rep.total)


def test_one_level_without_oscillation_tends_to_integral():
    g = zerolab.make_test_function("gaussian")
    gaps = []
    for X in (1e4, 1e6):
        rep = predict.one_level_density("symplectic", g, X, scaled=True, include_oscillatory=False)
        gap = 1 - rep.total / rep.inputs["X_star"] / math.sqrt(math.pi)
        gaps.append(gap * math.log(X))
    # the shortfall from int g decays like 1/log X
    assert 0 < gaps[0] < 5 and 0 < gaps[1] < 5
    assert abs(gaps[1] - gaps[0]) < 0.2 * gaps[0]
