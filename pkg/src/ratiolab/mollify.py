"""Mollified moments in exact rational arithmetic, non-vanishing ratios, and a numerical cross-check."""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import arith, specfun
from .errors import (CellDecompositionFail, ConstraintViolation, DegreeOverflow, MollifierTooLong, SingularForm)

MAX_DEGREE = 64


def rational(x) -> Fraction:
    """Exact rational from int, Fraction, decimal string, 'p/q' string, or float (via its shortest repr)."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("bool is not a rational")
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, (float, np.floating)):
        if not math.isfinite(x):
            raise ValueError(f"{x} is not finite")
        return Fraction(repr(float(x)))
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"cannot read {x!r} as a rational")


# ---------------------------------------------------------------- raw coefficient tuples

def _trim(c) -> tuple:
    c = list(c)
    while c and c[-1] == 0:
        c.pop()
    return tuple(c)


def _pmul(a: tuple, b: tuple) -> tuple:
    if not a or not b:
        return ()
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return _trim(out)


def _pder(a: tuple, n: int = 1) -> tuple:
    for _ in range(n):
        a = tuple(i * a[i] for i in range(1, len(a)))
    return _trim(a)


def _pint01(a: tuple, b: tuple) -> Fraction:
    """int_0^1 a(x) b(x) dx without forming the product."""
    s = Fraction(0)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                if y:
                    s += x * y / (i + j + 1)
    return s


def _peval(a: tuple, x) -> Fraction:
    acc = Fraction(0)
    for c in reversed(a):
        acc = acc * x + c
    return acc


def _pcompose_affine(a: tuple, c0: Fraction, c1: Fraction) -> tuple:
    """a(c0 + c1 x)."""
    out: tuple = ()
    lin = (c0, c1)
    for c in reversed(a):
        out = _padd(_pmul(out, lin), (c,))
    return out


def _padd(a: tuple, b: tuple) -> tuple:
    n = max(len(a), len(b))
    return _trim((a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(n))


# ---------------------------------------------------------------- Polynomial

@dataclass(frozen=True)
class Polynomial:
    """Exact rational polynomial, ascending coefficients, canonical (no trailing zeros)."""

    coefficients: tuple = ()

    def __post_init__(self):
        c = _trim(rational(x) for x in self.coefficients)
        if len(c) - 1 > MAX_DEGREE:
            raise DegreeOverflow(f"degree {len(c) - 1} exceeds {MAX_DEGREE}")
        object.__setattr__(self, "coefficients", c)

    @classmethod
    def monomial(cls, n: int, c=1) -> "Polynomial":
        return cls((0,) * n + (rational(c),))

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1  # -1 for the zero polynomial

    def __call__(self, x):
        return _peval(self.coefficients, rational(x))

    def derivative(self, n: int = 1) -> "Polynomial":
        return Polynomial(_pder(self.coefficients, n))

    def antiderivative(self) -> "Polynomial":
        """The tilde operation: integral from 0, so the constant term is zero."""
        return Polynomial((Fraction(0),) + tuple(c / (i + 1) for i, c in enumerate(self.coefficients)))

    def integrate01(self) -> Fraction:
        return sum((c / (i + 1) for i, c in enumerate(self.coefficients)), Fraction(0))

    def shift_compose(self, c) -> "Polynomial":
        """x -> p(x + c)."""
        return self.compose_affine(c, 1)

    def compose_affine(self, c0, c1) -> "Polynomial":
        """x -> p(c0 + c1 x)."""
        return Polynomial(_pcompose_affine(self.coefficients, rational(c0), rational(c1)))

    def order_at_zero(self) -> int:
        """Number of leading zero coefficients (infinite vanishing is reported as MAX_DEGREE + 1)."""
        for i, c in enumerate(self.coefficients):
            if c:
                return i
        return MAX_DEGREE + 1

    def is_even(self) -> bool:
        return all(c == 0 for c in self.coefficients[1::2])

    def __add__(self, other):
        return Polynomial(_padd(self.coefficients, _as_poly(other).coefficients))

    def __sub__(self, other):
        return self + (-1) * _as_poly(other)

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            return Polynomial(_pmul(self.coefficients, other.coefficients))
        k = rational(other)
        return Polynomial(tuple(k * c for c in self.coefficients))

    __rmul__ = __mul__

    def __neg__(self):
        return (-1) * self

    def __str__(self):
        if not self.coefficients:
            return "0"
        parts = []
        for i, c in enumerate(self.coefficients):
            if c == 0:
                continue
            mono = "" if i == 0 else ("x" if i == 1 else f"x^{i}")
            if mono and c == 1:
                parts.append(mono)
            elif mono:
                parts.append(f"{c}*{mono}")
            else:
                parts.append(str(c))
        return " + ".join(parts)


def _as_poly(p) -> Polynomial:
    return p if isinstance(p, Polynomial) else Polynomial((rational(p),))


_TERM = re.compile(r"^([+-]?[0-9/.]*)\*?(x(?:\^(\d+))?)?(?:/(\d+))?$")


def parse_polynomial(text) -> Polynomial:
    """Read '0, 1, 0, 1/3' (ascending coefficients) or a sum of monomials like 'x^4' or '2*x^3 - x/2'.

    Monomial syntax: terms c*x^n or c*x^n/d joined by + or -, c an optional rational.
    """
    if isinstance(text, Polynomial):
        return text
    if isinstance(text, (list, tuple)):
        return Polynomial(tuple(rational(c) for c in text))
    s = str(text).strip()
    if "x" not in s:
        return Polynomial(tuple(rational(c) for c in s.replace(";", ",").split(",") if c.strip()))
    s = s.replace(" ", "").replace("-", "+-")
    coeffs: dict[int, Fraction] = {}
    for tok in filter(None, s.split("+")):
        m = _TERM.match(tok)
        if not m or (not m.group(1) and not m.group(2)):
            raise ValueError(f"cannot read polynomial term {tok!r}")
        c = m.group(1)
        c = Fraction(1) if c in ("", "+") else Fraction(-1) if c == "-" else rational(c)
        if m.group(4):
            if not m.group(2):
                raise ValueError(f"cannot read polynomial term {tok!r}")
            c /= int(m.group(4))
        n = 0 if not m.group(2) else int(m.group(3) or 1)
        coeffs[n] = coeffs.get(n, Fraction(0)) + c
    top = max(coeffs) if coeffs else -1
    return Polynomial(tuple(coeffs.get(i, Fraction(0)) for i in range(top + 1)))


def poly_calculus(p: Polynomial, op: str, arg=None):
    if op == "derivative":
        return p.derivative()
    if op == "antiderivative":
        return p.antiderivative()
    if op == "product":
        return p * _as_poly(arg)
    if op == "integrate01":
        return p.integrate01()
    if op == "eval":
        return p(arg)
    if op == "shift_compose":
        return p.shift_compose(arg)
    raise ValueError(f"unknown operation {op!r}")


# ---------------------------------------------------------------- Laurent polynomials in theta

class ThetaLaurent:
    """Finite sum of c_n theta^n, n any integer, with exact rational c_n."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms = {int(n): rational(c) for n, c in (terms or {}).items() if c != 0}

    @classmethod
    def const(cls, c) -> "ThetaLaurent":
        return cls({0: c})

    def __add__(self, other):
        other = other if isinstance(other, ThetaLaurent) else ThetaLaurent.const(other)
        out = dict(self.terms)
        for n, c in other.terms.items():
            out[n] = out.get(n, Fraction(0)) + c
        return ThetaLaurent(out)

    __radd__ = __add__

    def __mul__(self, other):
        if not isinstance(other, ThetaLaurent):
            k = rational(other)
            return ThetaLaurent({n: k * c for n, c in self.terms.items()})
        out: dict[int, Fraction] = {}
        for n, c in self.terms.items():
            for m, d in other.terms.items():
                out[n + m] = out.get(n + m, Fraction(0)) + c * d
        return ThetaLaurent(out)

    __rmul__ = __mul__

    def shift(self, n: int) -> "ThetaLaurent":
        """Multiply by theta^n."""
        return ThetaLaurent({m + n: c for m, c in self.terms.items()})

    def __call__(self, theta) -> Fraction:
        th = rational(theta)
        if th <= 0:
            raise ConstraintViolation("theta must be positive")
        return sum((c * th ** n for n, c in self.terms.items()), Fraction(0))

    def __eq__(self, other):
        if not isinstance(other, ThetaLaurent):
            other = ThetaLaurent.const(other)
        return self.terms == other.terms

    def __hash__(self):
        return hash(tuple(sorted(self.terms.items())))

    def inverse_coefficients(self) -> list[Fraction]:
        """[c_0, c_-1, c_-2, ...]: coefficients of 1/theta^j. Positive powers are not allowed here."""
        if any(n > 0 for n in self.terms):
            raise ValueError("expression has positive powers of theta")
        low = min(self.terms, default=0)
        return [self.terms.get(-j, Fraction(0)) for j in range(-low + 1)]

    def to_dict(self) -> dict:
        return {str(n): fraction_json(c) for n, c in sorted(self.terms.items(), reverse=True)}

    def __repr__(self):
        if not self.terms:
            return "0"
        return " + ".join(f"({c})*theta^{n}" for n, c in sorted(self.terms.items(), reverse=True))


def fraction_json(x: Fraction) -> dict:
    x = rational(x)
    return {"numerator": str(x.numerator), "denominator": str(x.denominator)}


def _maybe_eval(expr: ThetaLaurent, theta):
    return expr if theta is None else expr(theta)


# A separable double integrand: list of (theta power, polynomial in r, polynomial in u).
def _sep_inner(a: list, b: list) -> ThetaLaurent:
    """int_0^1 int_0^1 (sum a)(sum b) dr du."""
    out = ThetaLaurent()
    for na, ar, au in a:
        for nb, br, bu in b:
            out = out + ThetaLaurent({na + nb: _pint01(ar, br) * _pint01(au, bu)})
    return out


# ---------------------------------------------------------------- constraints

def _require_vanishing(name: str, p: Polynomial, order: int):
    if p.order_at_zero() < order:
        if order == 1:
            raise ConstraintViolation(f"{name} must vanish at 0")
        raise ConstraintViolation(f"{name} and its first {order - 1} derivative(s) must vanish at 0")


def _require_even(name: str, q: Polynomial):
    if not q.is_even():
        raise ConstraintViolation(f"{name} must be even")


def _theta(theta):
    if theta is None:
        return None
    th = rational(theta)
    if th <= 0:
        raise ConstraintViolation("theta must be positive")
    return th


# ---------------------------------------------------------------- second-moment forms

def unitary_mollified(P1, P2, Q1, Q2, theta=None):
    """P1(1)P2(1)Q1(0)Q2(0) + (1/theta) int int (P1'Q1 + theta P1 Q1')(P2'Q2 + theta P2 Q2') dr du.

    Returns a Fraction, or a ThetaLaurent when theta is None.
    """
    P1, P2, Q1, Q2 = map(parse_polynomial, (P1, P2, Q1, Q2))
    _require_vanishing("P1", P1, 1)
    _require_vanishing("P2", P2, 1)
    th = _theta(theta)

    def form(P, Q):
        return [(0, P.derivative().coefficients, Q.coefficients),
                (1, P.coefficients, Q.derivative().coefficients)]

    expr = ThetaLaurent.const(P1(1) * P2(1) * Q1(0) * Q2(0)) + _sep_inner(form(P1, Q1), form(P2, Q2)).shift(-1)
    return _maybe_eval(expr, th)


def symplectic_mollified(P1, P2, Q1, Q2, theta=None):
    """(1/8theta) int int ((1/theta)P1''Q1~ - 4theta P1 Q1')(same for 2)
    + (1/4)((1/theta)P1'(1)Q1~(1) + 2P1(1)Q1(1))(same for 2).

    Q1, Q2 even; P(0) = P'(0) = 0.
    """
    P1, P2, Q1, Q2 = map(parse_polynomial, (P1, P2, Q1, Q2))
    for name, P in (("P1", P1), ("P2", P2)):
        _require_vanishing(name, P, 2)
    for name, Q in (("Q1", Q1), ("Q2", Q2)):
        _require_even(name, Q)
    th = _theta(theta)

    def form(P, Q):
        return [(-1, P.derivative(2).coefficients, Q.antiderivative().coefficients),
                (1, (-4 * P).coefficients, Q.derivative().coefficients)]

    def edge(P, Q):
        return ThetaLaurent({-1: P.derivative()(1) * Q.antiderivative()(1), 0: 2 * P(1) * Q(1)})

    expr = _sep_inner(form(P1, Q1), form(P2, Q2)).shift(-1) * Fraction(1, 8) + edge(P1, Q1) * edge(P2, Q2) * Fraction(1, 4)
    return _maybe_eval(expr, th)


def orthogonal_mollified(P1, P2=None, Q1=None, Q2=None, theta=None, variant: str = "paper"):
    """Orthogonal-family mollified second moment.

    paper: (1/theta) int int (P1'Q1 - theta^2 P1~ Q1'')(P2'Q2 - theta^2 P2~ Q2'')
           + (P1(1)Q1(1) + theta P1~(1)Q1'(1))(P2(1)Q2(1) + theta P2~(1)Q2'(1))
           + theta (Q1'(0)Q2(0) int P1~ P2' + Q1(0)Q2'(0) int P1' P2~)
    kmv:   single P, Q (pass them as P1, Q1):
           (1/theta^2)((Q(1)P'(1) + theta Q'(1)P(1))^2 + (1/theta) int int (P''Q - theta^2 P Q'')^2)
    """
    th = _theta(theta)
    if variant == "kmv":
        P, Q = parse_polynomial(P1), parse_polynomial(Q1)
        if P2 is not None or Q2 is not None:
            raise ConstraintViolation("the kmv variant takes a single P and Q")
        _require_vanishing("P", P, 1)
        _require_even("Q", Q)
        edge = ThetaLaurent({0: Q(1) * P.derivative()(1), 1: Q.derivative()(1) * P(1)})
        form = [(0, P.derivative(2).coefficients, Q.coefficients),
                (2, (-P).coefficients, Q.derivative(2).coefficients)]
        expr = (edge * edge + _sep_inner(form, form).shift(-1)).shift(-2)
        return _maybe_eval(expr, th)
    if variant != "paper":
        raise ValueError(f"unknown variant {variant!r}")
    P1, P2, Q1, Q2 = map(parse_polynomial, (P1, P2, Q1, Q2))
    _require_vanishing("P1", P1, 1)
    _require_vanishing("P2", P2, 1)
    _require_even("Q1", Q1)
    _require_even("Q2", Q2)

    def form(P, Q):
        return [(0, P.derivative().coefficients, Q.coefficients),
                (2, (-P.antiderivative()).coefficients, Q.derivative(2).coefficients)]

    def edge(P, Q):
        return ThetaLaurent({0: P(1) * Q(1), 1: P.antiderivative()(1) * Q.derivative()(1)})

    T1, T2 = P1.antiderivative(), P2.antiderivative()
    third = (Q1.derivative()(0) * Q2(0) * _pint01(T1.coefficients, P2.derivative().coefficients)
             + Q1(0) * Q2.derivative()(0) * _pint01(P1.derivative().coefficients, T2.coefficients))
    expr = _sep_inner(form(P1, Q1), form(P2, Q2)).shift(-1) + edge(P1, Q1) * edge(P2, Q2) + ThetaLaurent({1: third})
    return _maybe_eval(expr, th)


# ---------------------------------------------------------------- fourth moment, M_2 mollifier

def _weighted(w: tuple, f: tuple, g: tuple) -> Fraction:
    return _pint01(_pmul(w, f), g)


_CUBE_WEIGHT = _pcompose_affine((Fraction(0), Fraction(0), Fraction(0), Fraction(1, 6)), Fraction(1), Fraction(-1))


def fourth_mollified_diag(Q, P, theta=None):
    """Fourth moment of zeta mollified by M_2(s, Q) M_2(1-s, P), after integration by parts.

    P and Q vanish to order 4 at 0. Returns a ThetaLaurent in 1/theta when theta is None.
    """
    Q, P = parse_polynomial(Q), parse_polynomial(P)
    _require_vanishing("Q", Q, 4)
    _require_vanishing("P", P, 4)
    th = _theta(theta)
    q = [Q.derivative(j).coefficients for j in range(5)]
    p = [P.derivative(j).coefficients for j in range(5)]
    w = _CUBE_WEIGHT

    def sym(i, j):
        return _weighted(w, q[i], p[j]) + _weighted(w, q[j], p[i])

    expr = ThetaLaurent({
        0: P(1) * Q(1),
        -1: 2 * sym(4, 1) + 8 * sym(3, 2),
        -2: 2 * sym(4, 2) + 4 * _weighted(w, q[3], p[3]),
        -3: Fraction(2, 3) * sym(4, 3),
        -4: Fraction(1, 12) * _weighted(w, q[4], p[4]),
    })
    return _maybe_eval(expr, th)


def fourth_mollified_diag_pre_ibp(Q, P) -> ThetaLaurent:
    """The same quantity before integration by parts: every term kept under the (1-eta)^3/6 weight."""
    Q, P = parse_polynomial(Q), parse_polynomial(P)
    q = [Q.derivative(j).coefficients for j in range(5)]
    p = [P.derivative(j).coefficients for j in range(5)]
    w = _CUBE_WEIGHT

    def sym(i, j):
        return _weighted(w, q[i], p[j]) + _weighted(w, q[j], p[i])

    return ThetaLaurent({
        0: _weighted(w, q[0], p[4]) + _weighted(w, q[4], p[0]) + 4 * sym(3, 1) + 6 * _weighted(w, q[2], p[2]),
        -1: 2 * sym(4, 1) + 8 * sym(3, 2),
        -2: 2 * sym(4, 2) + 4 * _weighted(w, q[3], p[3]),
        -3: Fraction(2, 3) * sym(4, 3),
        -4: Fraction(1, 12) * _weighted(w, q[4], p[4]),
    })


# ---------------------------------------------------------------- I_v partial derivatives

def _upoly_mul(a: dict, b: dict) -> dict:
    out: dict[int, Fraction] = {}
    for i, x in a.items():
        for j, y in b.items():
            out[i + j] = out.get(i + j, Fraction(0)) + x * y
    return {k: v for k, v in out.items() if v}


def _perm_sign(perm) -> int:
    sign, seen = 1, [False] * len(perm)
    for i in range(len(perm)):
        if not seen[i]:
            j, length = i, 0
            while not seen[j]:
                seen[j] = True
                j = perm[j]
                length += 1
            if length % 2 == 0:
                sign = -sign
    return sign


@lru_cache(maxsize=None)
def iv_partial(k: int, orders: tuple) -> ThetaLaurent:
    """Mixed partial derivative of I_v(u_1..u_2k) at u = 0, as a Laurent polynomial in theta.

    Column j depends on u_j alone, so the derivative acts column by column. Entries are
    (+-c)^e/e! with c = 1/(2 theta) + u_j, e = 2k - i - j + 1, the sign negative in the
    right block.
    """
    n = 2 * k
    if len(orders) != n:
        raise ValueError("need one derivative order per column")
    cells = []
    for i in range(1, n + 1):
        row = []
        for col in range(n):
            j = col % k + 1
            side = 1 if col < k else -1
            e = n - i - j + 1
            m = orders[col]
            if e < 0 or e - m < 0:
                row.append({})
            else:
                row.append({e - m: Fraction(side ** e, math.factorial(e - m))})
        cells.append(row)
    det: dict[int, Fraction] = {}
    for perm in itertools.permutations(range(n)):
        term = {0: Fraction(_perm_sign(perm))}
        for i, col in enumerate(perm):
            term = _upoly_mul(term, cells[i][col])
            if not term:
                break
        for d, v in term.items():
            det[d] = det.get(d, Fraction(0)) + v
    # c^d = 2^-d theta^-d
    return ThetaLaurent({-d: v / 2 ** d for d, v in det.items() if v})


# ---------------------------------------------------------------- polytope integration

# multivariate polynomials: {exponent tuple: Fraction}

def _mv_add(a: dict, b: dict, scale=1) -> dict:
    out = dict(a)
    for e, c in b.items():
        out[e] = out.get(e, Fraction(0)) + scale * c
    return {e: c for e, c in out.items() if c}


def _mv_mul(a: dict, b: dict) -> dict:
    out: dict = {}
    for e1, c1 in a.items():
        for e2, c2 in b.items():
            e = tuple(x + y for x, y in zip(e1, e2))
            out[e] = out.get(e, Fraction(0)) + c1 * c2
    return {e: c for e, c in out.items() if c}


def _mv_linear(vec, const, nvars: int) -> dict:
    out = {(0,) * nvars: rational(const)} if const else {}
    for i, a in enumerate(vec):
        if a:
            e = [0] * nvars
            e[i] = 1
            out[tuple(e)] = rational(a)
    return out


def _mv_of_univariate(coeffs: tuple, lin: dict, nvars: int) -> dict:
    out: dict = {}
    for c in reversed(coeffs):
        out = _mv_mul(out, lin)
        if c:
            out = _mv_add(out, {(0,) * nvars: c})
    return out


@dataclass(frozen=True)
class LinearConstraint:
    """vec . x + const >= 0."""

    vec: tuple
    const: Fraction

    def normalized(self) -> "LinearConstraint":
        scale = next((abs(a) for a in self.vec if a), None)
        if scale is None:
            return self
        return LinearConstraint(tuple(a / scale for a in self.vec), self.const / scale)


def box_constraints(nvars: int, lo=-1, hi=1) -> list[LinearConstraint]:
    out = []
    for i in range(nvars):
        e = tuple(Fraction(1 if j == i else 0) for j in range(nvars))
        out.append(LinearConstraint(e, -rational(lo)))
        out.append(LinearConstraint(tuple(-x for x in e), rational(hi)))
    return out


MAX_CELLS = 200_000


class PolytopeIntegrator:
    """Exact integral of a polynomial over {x : constraints}, by iterated integration.

    The last variable is integrated first. Its lower bound is the max of the linear lower
    bounds and its upper bound the min of the upper ones; the region is split into cells
    according to which bound is active, each cell adding the ordering inequalities to the
    constraints passed to the remaining variables. Cells with inconsistent constant
    constraints are empty and dropped.
    """

    def __init__(self, constraints, nvars: int):
        self.nvars = nvars
        self.constraints = [c.normalized() for c in constraints]
        self.cells: list[tuple[list, Fraction]] = []
        self._count = 0

    def integrate(self, poly: dict, record_cells: bool = False) -> Fraction:
        self._count = 0
        if record_cells:
            self.cells = []
        return self._go(poly, self.constraints, self.nvars - 1, [], record_cells)

    def _go(self, poly, cons, m, path, record):
        self._count += 1
        if self._count > MAX_CELLS:
            raise CellDecompositionFail("too many cells")
        live = []
        for c in cons:
            if not any(c.vec):
                if c.const < 0:
                    return Fraction(0)
                continue
            live.append(c)
        if m < 0:
            val = poly.get((0,) * self.nvars, Fraction(0))
            if record:
                self.cells.append((path, val))
            return val
        lows, ups, rest = [], [], []
        for c in live:
            a = c.vec[m]
            if a == 0:
                rest.append(c)
                continue
            # x_m >= -(const + sum_{i<m} a_i x_i)/a  (a > 0), or <= the same (a < 0)
            vec = tuple(-x / a for x in c.vec[:m]) + (Fraction(0),) * (self.nvars - m)
            bound = (vec, -c.const / a)
            (lows if a > 0 else ups).append(bound)
        if any(c.vec[m + 1:] and any(c.vec[m + 1:]) for c in live):
            raise CellDecompositionFail("constraint involves an already integrated variable")
        lows, ups = sorted(set(lows)), sorted(set(ups))
        if not lows or not ups:
            raise CellDecompositionFail(f"variable {m} is unbounded")
        total = Fraction(0)
        for i, (lv, lc) in enumerate(lows):
            for j, (uv, uc) in enumerate(ups):
                extra = []
                for i2, (v2, c2) in enumerate(lows):
                    if i2 != i:
                        extra.append(LinearConstraint(tuple(x - y for x, y in zip(lv, v2)), lc - c2))
                for j2, (v2, c2) in enumerate(ups):
                    if j2 != j:
                        extra.append(LinearConstraint(tuple(x - y for x, y in zip(v2, uv)), c2 - uc))
                extra.append(LinearConstraint(tuple(x - y for x, y in zip(uv, lv)), uc - lc))
                inner = self._antiderivative_between(poly, m, (lv, lc), (uv, uc))
                total += self._go(inner, rest + [c.normalized() for c in extra], m - 1,
                                  path + [(m, i, j)], record)
        return total

    def _antiderivative_between(self, poly, m, low, up):
        n = self.nvars
        L = _mv_linear(*low, n)
        U = _mv_linear(*up, n)
        out: dict = {}
        powers_L, powers_U = {0: {(0,) * n: Fraction(1)}}, {0: {(0,) * n: Fraction(1)}}
        for e, c in poly.items():
            k = e[m] + 1
            for pw, base in ((powers_L, L), (powers_U, U)):
                while max(pw) < k:
                    top = max(pw)
                    pw[top + 1] = _mv_mul(pw[top], base)
            rest = tuple(0 if i == m else x for i, x in enumerate(e))
            diff = _mv_add(powers_U[k], powers_L[k], -1)
            out = _mv_add(out, _mv_mul({rest: c / k}, diff))
        return out


def split_region() -> list[LinearConstraint]:
    """The subset of [-1, 1]^4 with eta1+eta2, eta3+eta4, eta1+eta3, eta2+eta4 all >= 0."""
    cons = box_constraints(4)
    for i, j in ((0, 1), (2, 3), (0, 2), (1, 3)):
        cons.append(LinearConstraint(tuple(Fraction(1 if k in (i, j) else 0) for k in range(4)), Fraction(0)))
    return cons


@lru_cache(maxsize=1)
def _split_integrator() -> PolytopeIntegrator:
    return PolytopeIntegrator(split_region(), 4)


@lru_cache(maxsize=None)
def _split_monomial(e: tuple) -> Fraction:
    return _split_integrator().integrate({e: Fraction(1)})


def split_cell_volumes() -> list[Fraction]:
    integ = PolytopeIntegrator(split_region(), 4)
    integ.integrate({(0, 0, 0, 0): Fraction(1)}, record_cells=True)
    return [v for _, v in integ.cells]


def _split_integral(poly: dict) -> Fraction:
    return sum((c * _split_monomial(e) for e, c in poly.items()), Fraction(0))


def fourth_mollified_split(P1, P2, Q1, Q2, theta=None):
    """Fourth moment of zeta mollified by M_1(s,P1)M_1(s,P2)M_1(1-s,Q1)M_1(1-s,Q2).

    (1/16) d/du_1..du_4 d/dU_1..dU_4 of the integral over the region of
    P1(e1/2+e2/2+u3+u4) P2(e3/2+e4/2+U3+U4) Q1(e1/2+e3/2+u1+u2) Q2(e2/2+e4/2+U1+U2)
    times I_v(u + U), at zero. Only multilinear terms survive the eight first derivatives:
    each variable is either absorbed by a polynomial (one more derivative on it) or by I_v.
    """
    P1, P2, Q1, Q2 = map(parse_polynomial, (P1, P2, Q1, Q2))
    for name, p in (("P1", P1), ("P2", P2), ("Q1", Q1), ("Q2", Q2)):
        _require_vanishing(name, p, 2)
    th = _theta(theta)
    half = Fraction(1, 2)
    lin = {
        "P1": _mv_linear((half, half, 0, 0), 0, 4),
        "P2": _mv_linear((0, 0, half, half), 0, 4),
        "Q1": _mv_linear((half, 0, half, 0), 0, 4),
        "Q2": _mv_linear((0, half, 0, half), 0, 4),
    }
    polys = {"P1": P1, "P2": P2, "Q1": Q1, "Q2": Q2}
    # which polynomial each shift variable feeds: u1,u2 -> Q1; u3,u4 -> P1; U1,U2 -> Q2; U3,U4 -> P2
    feeds_u = ("Q1", "Q1", "P1", "P1")
    feeds_U = ("Q2", "Q2", "P2", "P2")
    patterns: dict[tuple, int] = {}
    for take in itertools.product((0, 1), repeat=8):
        tu, tU = take[:4], take[4:]
        order = {"P1": 0, "P2": 0, "Q1": 0, "Q2": 0}
        for i in range(4):
            order[feeds_u[i]] += tu[i]
            order[feeds_U[i]] += tU[i]
        m = tuple((1 - tu[i]) + (1 - tU[i]) for i in range(4))
        key = (order["P1"], order["P2"], order["Q1"], order["Q2"], m)
        patterns[key] = patterns.get(key, 0) + 1
    cache: dict = {}

    def piece(name, j):
        if (name, j) not in cache:
            cache[(name, j)] = _mv_of_univariate(polys[name].derivative(j).coefficients, lin[name], 4)
        return cache[(name, j)]

    expr = ThetaLaurent()
    for (jp1, jp2, jq1, jq2, m), count in sorted(patterns.items()):
        dv = iv_partial(2, m)
        if not dv.terms:
            continue
        integrand = _mv_mul(_mv_mul(piece("P1", jp1), piece("P2", jp2)), _mv_mul(piece("Q1", jq1), piece("Q2", jq2)))
        if not integrand:
            continue
        expr = expr + dv * (count * _split_integral(integrand))
    expr = expr * Fraction(1, 16)
    return _maybe_eval(expr, th)


# ---------------------------------------------------------------- mixed third-power term

def _i3_terms(P1: Polynomial, P2: Polynomial, th1: Fraction, th2: Fraction) -> dict:
    r = th2 / th1
    shifted1 = P1.derivative().compose_affine(1 + r, -r).coefficients   # P1'(1 + (1-eta) r)
    shifted2 = P1.derivative(2).compose_affine(1 + r, -r).coefficients
    w = (Fraction(1), Fraction(-1))
    d1, d2 = P2.derivative().coefficients, P2.derivative(2).coefficients
    return {
        "boundary": P1(1) * P2(1),
        "first": _weighted(w, shifted1, d2) / th1,
        "second": 2 * th2 / th1 ** 2 * _weighted(w, shifted2, d1),
        "third": _weighted(w, shifted2, d2) / (2 * th1 ** 2),
    }


def i3_mixed(P1, P2, theta1, theta2) -> Fraction:
    """I_3(0,0,0; P1, P2) / T for mollifier lengths y1 = T^theta1 >= y2 = T^theta2."""
    P1, P2 = parse_polynomial(P1), parse_polynomial(P2)
    _require_vanishing("P1", P1, 2)
    _require_vanishing("P2", P2, 2)
    th1, th2 = rational(theta1), rational(theta2)
    if not th1 >= th2 > 0:
        raise ConstraintViolation("need theta1 >= theta2 > 0")
    return sum(_i3_terms(P1, P2, th1, th2).values(), Fraction(0))


# ---------------------------------------------------------------- non-vanishing

def nonvanishing_ratio(P, theta, k: int = 0, scheme: str = "single", a=None) -> Fraction:
    """Proportion bound from one mollifier (derivative order k), or the k = 0 two-piece mollifier."""
    P = parse_polynomial(P)
    _require_vanishing("P", P, 1)
    th = _theta(theta)
    if th is None:
        raise ConstraintViolation("theta is required")
    if k < 0:
        raise ConstraintViolation("k must be non-negative")
    p1 = P(1)
    dd = _pint01(P.derivative().coefficients, P.derivative().coefficients)
    if scheme == "single":
        pp = _pint01(P.coefficients, P.coefficients)
        den = p1 ** 2 + dd / (th * (2 * k + 1)) + 4 * th * k * k * pp / (2 * k - 1)
        num = p1 ** 2
    elif scheme == "two_piece":
        if k != 0:
            raise ConstraintViolation("the two-piece mollifier is set up for k = 0")
        a = rational(1 if a is None else a)
        num = (1 + a) ** 2 * p1 ** 2
        den = (1 + a * a) * (p1 ** 2 + dd / th) + 2 * a * p1 ** 2
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    if den == 0:
        raise SingularForm("denominator vanishes")
    return num / den


@dataclass(frozen=True)
class QuadraticFormRatio:
    """(n . c)^2 / (c^T D c) over coefficient vectors c in the basis r, r^2, ..., r^d."""

    numerator: tuple
    denominator: tuple  # rows

    def __call__(self, c) -> Fraction:
        c = [rational(x) for x in c]
        nc = sum((a * b for a, b in zip(self.numerator, c)), Fraction(0))
        dc = sum((c[i] * self.denominator[i][j] * c[j] for i in range(len(c)) for j in range(len(c))), Fraction(0))
        return nc * nc / dc


def nonvanishing_form(theta, k: int, degree: int) -> tuple[QuadraticFormRatio, tuple]:
    """The ratio as a quadratic-form quotient, plus the penalty matrix F = D - n n^T."""
    th = rational(theta)
    A = 1 / (th * (2 * k + 1))
    B = 4 * th * k * k / (2 * k - 1)
    d = degree
    F = tuple(tuple(A * Fraction(i * j, i + j - 1) + B * Fraction(1, i + j + 1) for j in range(1, d + 1))
              for i in range(1, d + 1))
    n = (Fraction(1),) * d
    D = tuple(tuple(F[i][j] + 1 for j in range(d)) for i in range(d))
    return QuadraticFormRatio(n, D), F


def _solve_exact(M, b) -> list[Fraction]:
    n = len(b)
    A = [list(row) + [b[i]] for i, row in enumerate(M)]
    for col in range(n):
        piv = next((r for r in range(col, n) if A[r][col] != 0), None)
        if piv is None:
            raise SingularForm("quadratic form is singular")
        A[col], A[piv] = A[piv], A[col]
        inv = 1 / A[col][col]
        for r in range(n):
            if r != col and A[r][col] != 0:
                f = A[r][col] * inv
                A[r] = [x - f * y for x, y in zip(A[r], A[col])]
    return [A[i][n] / A[i][i] for i in range(n)]


@dataclass(frozen=True)
class NonvanishingOptimum:
    polynomial: Polynomial
    ratio: float
    exact_ratio: Fraction | None
    lam: float | None
    stationarity: float

    def __iter__(self):
        return iter((self.polynomial, self.ratio))


def sinh_lambda(theta, k: int) -> float:
    th = float(rational(theta))
    return 2 * th * k * math.sqrt((2 * k + 1) / (2 * k - 1))


def optimize_nonvanishing(theta, k: int, degree: int = 12, mode: str = "polynomial") -> NonvanishingOptimum:
    """Best single-mollifier ratio.

    polynomial: minimize the penalty c^T F c subject to P(1) = sum c = 1, solved exactly
    (F c = lambda 1), so the result is stationary to the last digit.
    sinh: P = sinh(Lambda r)/sinh(Lambda), the optimum over smooth P, returned as its
    Taylor polynomial; ratio 1/(1 + A Lambda coth Lambda).
    """
    th = _theta(theta)
    if th is None:
        raise ConstraintViolation("theta is required")
    if mode == "sinh":
        if k < 1:
            raise ConstraintViolation("the sinh optimum needs k >= 1")
        lam = sinh_lambda(th, k)
        A = 1.0 / (float(th) * (2 * k + 1))
        ratio = 1.0 / (1.0 + A * lam / math.tanh(lam))
        coeffs = [Fraction(0)] * (MAX_DEGREE + 1)
        term, n = lam / math.sinh(lam), 1
        while n <= MAX_DEGREE and abs(term) > 1e-20:
            coeffs[n] = Fraction(term)
            term *= lam * lam / ((n + 1) * (n + 2))
            n += 2
        return NonvanishingOptimum(Polynomial(tuple(coeffs)), ratio, None, lam, 0.0)
    if mode != "polynomial":
        raise ValueError(f"unknown mode {mode!r}")
    if not 1 <= degree <= MAX_DEGREE:
        raise DegreeOverflow(f"degree must lie in 1..{MAX_DEGREE}")
    if k < 0:
        raise ConstraintViolation("k must be non-negative")
    _, F = nonvanishing_form(th, k, degree)
    x = _solve_exact(F, [Fraction(1)] * degree)
    s = sum(x, Fraction(0))
    if s <= 0:
        raise SingularForm("penalty form is not positive definite")
    c = [xi / s for xi in x]
    penalty = 1 / s
    exact = 1 / (1 + penalty)
    grad = [2 * sum((F[i][j] * c[j] for j in range(degree)), Fraction(0)) for i in range(degree)]
    mean = sum(grad, Fraction(0)) / degree
    resid = max(abs(float(g - mean)) for g in grad)
    P = Polynomial((Fraction(0),) + tuple(c))
    return NonvanishingOptimum(P, float(exact), exact, None, resid)


# ---------------------------------------------------------------- numerical cross-check

MAX_MOLLIFIER_LENGTH = 10 ** 6
MAX_EMPIRICAL_T = 5000.0


def mollifier_values(t: np.ndarray, P: Polynomial, y: float, mu: np.ndarray) -> np.ndarray:
    """M(1/2 + it, P) = sum_{n <= y} mu(n) P(log(y/n)/log y) n^{-1/2-it}."""
    N = int(math.floor(y + 1e-12))
    if N <= 1 or y <= 1.0:
        return np.full(t.shape, float(P(1)), dtype=complex)
    n = np.arange(1, N + 1)
    keep = mu[1:N + 1] != 0
    n = n[keep]
    x = np.log(y / n) / math.log(y)
    coef = np.polyval([float(c) for c in reversed(P.coefficients)], x) * mu[n] / np.sqrt(n)
    out = np.empty(t.shape, dtype=complex)
    logn = np.log(n)
    step = max(1, 2_000_000 // max(n.size, 1))
    for i in range(0, t.size, step):
        tt = t[i:i + step]
        out[i:i + step] = np.exp(-1j * np.outer(tt, logn)) @ coef
    return out


def _q_differentiated_zeta(t: np.ndarray, Q: Polynomial, L: float) -> np.ndarray:
    """Q(-(1/log T) d/dalpha) zeta(1/2 + it + alpha) at alpha = 0."""
    s = 0.5 + 1j * t
    out = np.zeros(t.shape, dtype=complex)
    for j, q in enumerate(Q.coefficients):
        if q:
            out += float(q) * (-1.0 / L) ** j * specfun.zeta_family(s, j)
    return out


def empirical_mollified_moment(P1, P2, Q1, Q2, theta, T: float, panel: float = 1.0, nodes: int = 40) -> float:
    """(1/T) int_0^T of the Q-differentiated zeta(s)zeta(1-s) M(s,P1) M(1-s,P2), by panel Gauss-Legendre."""
    P1, P2, Q1, Q2 = map(parse_polynomial, (P1, P2, Q1, Q2))
    th = float(rational(theta))
    T = float(T)
    if not 0 < T <= MAX_EMPIRICAL_T:
        raise MollifierTooLong(f"T must lie in (0, {MAX_EMPIRICAL_T:g}]")
    if th <= 0:
        raise ConstraintViolation("theta must be positive")
    y = T ** th
    if y > MAX_MOLLIFIER_LENGTH:
        raise MollifierTooLong(f"mollifier length {y:.3g} exceeds {MAX_MOLLIFIER_LENGTH:g}")
    if max(Q1.degree, Q2.degree) > 4:
        raise ConstraintViolation("Q of degree above 4 needs zeta derivatives beyond order 4")
    mu = arith.mobius_table(max(int(y) + 1, 2))
    L = math.log(T)
    x, w = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(0.0, T, max(1, int(math.ceil(T / panel))) + 1)
    a, b = edges[:-1], edges[1:]
    tt = (0.5 * (b - a)[:, None] * x[None, :] + 0.5 * (a + b)[:, None]).ravel()
    ww = (0.5 * (b - a)[:, None] * w[None, :]).ravel()
    plain = Q1.coefficients == (1,) and Q2.coefficients == (1,)
    if plain:
        zz = specfun.hardy_Z(tt) ** 2
    else:
        zz = _q_differentiated_zeta(tt, Q1, L) * np.conj(_q_differentiated_zeta(tt, Q2, L))
    m1 = mollifier_values(tt, P1, y, mu)
    m2 = m1 if P2 == P1 else mollifier_values(tt, P2, y, mu)
    vals = np.real(zz * m1 * np.conj(m2))
    return math.fsum((ww * vals).tolist()) / T


# ---------------------------------------------------------------- spec type

FAMILIES = ("unitary", "symplectic", "orthogonal", "orthogonal_kmv", "fourth_diag", "fourth_split", "mixed_I3")


@dataclass(frozen=True)
class MollifierSpec:
    family: str
    theta: Fraction | None = None
    P1: Polynomial | None = None
    P2: Polynomial | None = None
    Q1: Polynomial | None = None
    Q2: Polynomial | None = None
    theta2: Fraction | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConstraintViolation(f"unknown mollifier family {self.family!r}")
        for f in ("P1", "P2", "Q1", "Q2"):
            v = getattr(self, f)
            if v is not None:
                object.__setattr__(self, f, parse_polynomial(v))
        for f in ("theta", "theta2"):
            v = getattr(self, f)
            if v is not None:
                object.__setattr__(self, f, _theta(v))
        # evaluating symbolically runs every constraint check
        self.evaluate(symbolic=True)

    def _need(self, *names):
        for n in names:
            if getattr(self, n) is None:
                raise ConstraintViolation(f"family {self.family} needs {n}")
        return [getattr(self, n) for n in names]

    def evaluate(self, symbolic: bool = False):
        """Exact value; with symbolic=True the Laurent polynomial in theta where one exists."""
        th = None if symbolic else self.theta
        fam = self.family
        if fam == "unitary":
            return unitary_mollified(*self._need("P1", "P2", "Q1", "Q2"), th)
        if fam == "symplectic":
            return symplectic_mollified(*self._need("P1", "P2", "Q1", "Q2"), th)
        if fam == "orthogonal":
            return orthogonal_mollified(*self._need("P1", "P2", "Q1", "Q2"), theta=th)
        if fam == "orthogonal_kmv":
            P, Q = self._need("P1", "Q1")
            return orthogonal_mollified(P, None, Q, None, theta=th, variant="kmv")
        if fam == "fourth_diag":
            Q, P = self._need("Q1", "P1")
            return fourth_mollified_diag(Q, P, th)
        if fam == "fourth_split":
            return fourth_mollified_split(*self._need("P1", "P2", "Q1", "Q2"), th)
        P1, P2 = self._need("P1", "P2")
        t1, t2 = self._need("theta", "theta2")
        return i3_mixed(P1, P2, t1, t2)
