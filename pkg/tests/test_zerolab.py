import math

import mpmath
import numpy as np
import pytest

from ratiolab import zerolab
from ratiolab.errors import CacheCorrupt, EmptySet, NotAdmissible, NotAscending, OutOfRange, ParseError

ODLYZKO = [14.134725142, 21.022039639, 25.010857580, 30.424876126, 32.935061588,
           37.586178159, 40.918719012, 43.327073281, 48.005150881, 49.773832478]


@pytest.fixture(scope="module")
def zeros100(zero_cache):
    return zerolab.ensure_zeros(100.0, zero_cache)


def test_import_three(tmp_path):
    p = tmp_path / "z.txt"
    p.write_text("14.134725\n21.022040\n25.010858\n")
    zs = zerolab.import_zeros(p)
    assert len(zs) == 3 and zs.source == "imported"
    assert zs.T == pytest.approx(25.010858)


def test_import_errors(tmp_path):
    p = tmp_path / "z.txt"
    p.write_text("# nothing\n")
    with pytest.raises(EmptySet):
        zerolab.import_zeros(p)
    p.write_text("14.1\n21.0\n20.5\n")
    with pytest.raises(NotAscending) as e:
        zerolab.import_zeros(p)
    assert e.value.index == 2
    p.write_text("14.1\nabc\n")
    with pytest.raises(ParseError) as e:
        zerolab.import_zeros(p)
    assert e.value.line == 2


def test_import_agrees_with_computed(tmp_path, zeros100):
    p = tmp_path / "odlyzko.txt"
    p.write_text("".join(f"{g}\n" for g in ODLYZKO))
    ref = zerolab.import_zeros(p)
    assert np.max(np.abs(ref.array - zeros100.array[:10])) < 1e-6


def test_ensure_zeros_and_cache(zero_cache, zeros100):
    assert len(zeros100) == 29
    files = list(zero_cache.rglob("T=*.txt"))
    assert files
    before = {f: f.read_bytes() for f in files}
    again = zerolab.ensure_zeros(100.0, zero_cache)
    assert again == zeros100
    assert {f: f.read_bytes() for f in files} == before
    lower = zerolab.ensure_zeros(50.0, zero_cache)
    assert lower.ordinates == zeros100.ordinates[:len(lower)]
    assert len(lower) == 10


def test_corrupt_cache(tmp_path):
    zerolab.ensure_zeros(30.0, tmp_path)
    (f,) = list(tmp_path.rglob("T=*.txt"))
    f.write_text(f.read_text().replace("# count=", "# count=9"))
    with pytest.raises(CacheCorrupt):
        zerolab.ensure_zeros(30.0, tmp_path)


def test_ensure_zeros_height_limit(tmp_path):
    with pytest.raises(OutOfRange):
        zerolab.ensure_zeros(2e4, tmp_path)


def test_test_functions():
    assert zerolab.make_test_function("gaussian")(0.0) == 1.0
    assert zerolab.make_test_function("fejer")(0.5) == pytest.approx((math.sin(math.pi / 2) / (math.pi / 2)) ** 2)
    with pytest.raises(NotAdmissible):
        zerolab.make_test_function("lorentzian", [1.0])
    with pytest.raises(NotAdmissible):
        zerolab.make_test_function("user-series", [1.0, 1.0, 2.0])
    assert zerolab.make_test_function("lorentzian", [3.0])(0.0) == 1.0


def test_pair_sum_small_cases():
    f = zerolab.make_test_function("gaussian")
    one = zerolab.ZeroSet((14.1347,), 20.0)
    assert zerolab.empirical_pair_sum(one, f) == 1.0
    two = zerolab.ZeroSet((14.0, 15.0), 20.0)
    assert zerolab.empirical_pair_sum(two, f) == pytest.approx(2 + 2 * math.exp(-1.0), abs=1e-15)


def test_pair_sum_brute_force(zeros100):
    f = zerolab.make_test_function("gaussian")
    g = zeros100.ordinates
    brute = math.fsum(math.exp(-(a - b) ** 2) for a in g for b in g)
    assert zerolab.empirical_pair_sum(zeros100, f) == pytest.approx(brute, abs=1e-12)


def test_pair_sum_diagonal_dominance(zeros100):
    f = zerolab.make_test_function("gaussian", [50.0])
    assert zerolab.empirical_pair_sum(zeros100, f) >= len(zeros100) * f(0.0)


def test_discrete_moment_single_zero():
    g = 14.134725141734693
    zs = zerolab.ZeroSet((g,), 15.0)
    ref = abs(complex(mpmath.zeta(mpmath.mpc(0.5, g), 1, 1))) ** 2
    val = zerolab.empirical_discrete_moment(zs, "zprime_sq")
    assert val == pytest.approx(ref, abs=1e-8)
    assert zerolab.empirical_discrete_moment(zs, "zprime_4") == pytest.approx(val ** 2, rel=1e-13)
    assert zerolab.empirical_discrete_moment(zs, "zprime_sq", prec=120) == pytest.approx(ref, abs=1e-10)


def test_shifted_zero_vanishes(zeros100):
    assert zerolab.empirical_discrete_moment(zeros100, "shifted", 0.0) < 1e-10


def test_discrete_moment_monotone(zeros100):
    vals = [zerolab.empirical_discrete_moment(zeros100.up_to(T), "zprime_sq") for T in (30, 50, 70, 100)]
    assert vals == sorted(vals)


def test_power_moment_against_mpmath():
    T = 30.0
    ref = float(mpmath.quad(lambda t: mpmath.siegelz(t) ** 4, mpmath.linspace(0, T, 31)))
    assert zerolab.empirical_power_moment(T, 2) == pytest.approx(ref, rel=1e-9)
    assert zerolab.empirical_power_moment(T, 1) == pytest.approx(
        float(mpmath.quad(lambda t: mpmath.siegelz(t) ** 2, mpmath.linspace(0, T, 31))), rel=1e-9)
