"""Zeros of zeta: computing, importing, caching, and the empirical statistics built on them."""

from __future__ import annotations

import math
import os
import re
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import specfun
from .errors import (CacheCorrupt, EmptySet, IoError, NonPositive, NotAdmissible, NotAscending, OutOfRange,
                     ParseError, PrecisionLoss)

DESK_HEIGHT = 1.0e4
CACHE_VERSION = 1
_HEADER = "# ratiolab zeros v{version}\n# T={T!r}\n# count={count}\n# tol={tol!r}\n"


@dataclass(frozen=True)
class ZeroSet:
    ordinates: tuple
    T: float
    source: str = "computed"
    refinement_tol: float = 1e-9

    def __post_init__(self):
        g = self.ordinates
        if self.source not in ("computed", "imported"):
            raise ValueError(f"unknown source {self.source!r}")
        for i in range(1, len(g)):
            if not g[i] > g[i - 1]:
                raise NotAscending("ordinates must be strictly ascending", i)
        if g and (g[0] <= 0):
            raise NonPositive("ordinates must be positive")
        if g and g[-1] > self.T:
            raise ValueError("ordinate above the height T")

    def __len__(self):
        return len(self.ordinates)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.ordinates, dtype=float)

    def up_to(self, T: float) -> "ZeroSet":
        arr = self.ordinates
        k = int(np.searchsorted(np.asarray(arr), T, side="right"))
        return ZeroSet(tuple(arr[:k]), float(T), self.source, self.refinement_tol)


# ---------------------------------------------------------------- import

def _decimals(token: str) -> int:
    return len(token.split(".", 1)[1]) if "." in token else 0


def parse_zeros(text: str, source: str = "imported") -> ZeroSet:
    vals: list[float] = []
    digits = 30
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            v = float(line)
        except ValueError:
            raise ParseError(f"not a decimal number: {line!r}", lineno) from None
        if not math.isfinite(v):
            raise ParseError(f"not a finite number: {line!r}", lineno)
        if v <= 0:
            raise NonPositive(f"line {lineno}: ordinate {v} is not positive")
        if vals and v <= vals[-1]:
            raise NotAscending(f"{v} does not exceed {vals[-1]}", len(vals))
        digits = min(digits, _decimals(line))
        vals.append(v)
    if not vals:
        raise EmptySet("no ordinates in input")
    return ZeroSet(tuple(vals), vals[-1], source, 0.5 * 10.0 ** (-digits))


def import_zeros(path) -> ZeroSet:
    """Read an Odlyzko-style file: one ascending decimal ordinate per line, '#' comments allowed."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise IoError(str(e)) from e
    return parse_zeros(text)


# ---------------------------------------------------------------- cache

def _cache_name(T: float) -> str:
    return f"T={T!r}.txt"


def _render(zs: ZeroSet) -> str:
    body = "".join(f"{g:.12f}\n" for g in zs.ordinates)
    return _HEADER.format(version=CACHE_VERSION, T=float(zs.T), count=len(zs), tol=zs.refinement_tol) + body


def _read_cache(path: Path) -> ZeroSet:
    text = path.read_text(encoding="utf-8")
    head = text.split("\n", 4)
    try:
        if head[0] != f"# ratiolab zeros v{CACHE_VERSION}":
            raise ValueError("bad version line")
        T = float(head[1].removeprefix("# T="))
        count = int(head[2].removeprefix("# count="))
        tol = float(head[3].removeprefix("# tol="))
        vals = tuple(float(x) for x in head[4].split())
    except (IndexError, ValueError) as e:
        raise CacheCorrupt(f"{path}: {e}") from e
    if len(vals) != count:
        raise CacheCorrupt(f"{path}: header says {count} ordinates, file has {len(vals)}")
    try:
        return ZeroSet(vals, T, "computed", tol)
    except (NotAscending, NonPositive, ValueError) as e:
        raise CacheCorrupt(f"{path}: {e}") from e


class _Lock:
    """Exclusive lock file around cache writes (single writer)."""

    def __init__(self, path: Path):
        self.path = path

    def __enter__(self):
        import fcntl
        self.fh = open(self.path, "w")
        fcntl.flock(self.fh, fcntl.LOCK_EX)
        return self

    def __exit__(self, *exc):
        import fcntl
        fcntl.flock(self.fh, fcntl.LOCK_UN)
        self.fh.close()


def ensure_zeros(T: float, cache_dir, tol: float = 1e-9) -> ZeroSet:
    """Zeros in (0, T], from the cache when some cached height covers T."""
    T = float(T)
    if not 0 < T <= DESK_HEIGHT:
        raise OutOfRange(f"T must lie in (0, {DESK_HEIGHT:g}]")
    zdir = Path(cache_dir) / "zeros"
    try:
        zdir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise IoError(str(e)) from e
    cached = []
    for p in zdir.glob("T=*.txt"):
        m = re.fullmatch(r"T=(.+)\.txt", p.name)
        try:
            cached.append((float(m.group(1)), p))
        except (AttributeError, ValueError):
            continue
    covering = sorted(c for c in cached if c[0] >= T)
    if covering:
        zs = _read_cache(covering[0][1])
        return zs if zs.T == T else zs.up_to(T)
    zs = ZeroSet(tuple(specfun.find_zeros(1.0, T, tol=tol) if T > 1.0 else []), T, "computed", tol)
    target = zdir / _cache_name(T)
    with _Lock(zdir / ".lock"):
        fd, tmp = tempfile.mkstemp(dir=zdir, prefix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(_render(zs))
        os.replace(tmp, target)
    # hand back exactly what a later cache read produces
    return _read_cache(target)


# ---------------------------------------------------------------- test functions

@dataclass(frozen=True)
class TestFunction:
    """Even test function, holomorphic in |Im z| < strip_halfwidth, decaying like 1/x^2.

    kinds:
      gaussian     params (a,):           exp(-a x^2)
      fejer        params (w,):           (sin(pi x/w) / (pi x/w))^2
      user-series  params (a, c0, c1, ...): (c0 + c1 x + c2 x^2 + ...) exp(-a x^2)
      lorentzian   params (b,):           b^2 / (b^2 + x^2), admissible only for b >= strip
    """

    __test__ = False  # not a pytest class

    kind: str
    params: tuple = ()
    strip_halfwidth: float = 2.0

    def __call__(self, x):
        x = np.asarray(x)
        if self.kind == "gaussian":
            return np.exp(-self.params[0] * x * x)
        if self.kind == "fejer":
            return np.sinc(x / self.params[0]) ** 2
        if self.kind == "user-series":
            a, coefs = self.params[0], self.params[1:]
            poly = np.zeros_like(x, dtype=np.result_type(x, float))
            for c in reversed(coefs):
                poly = poly * x + c
            return poly * np.exp(-a * x * x)
        if self.kind == "lorentzian":
            b = self.params[0]
            return b * b / (b * b + x * x)
        raise ValueError(self.kind)

    def cutoff(self, tol: float = 1e-16) -> float:
        """R with |f(x)| < tol for |x| > R."""
        if self.kind == "gaussian":
            return math.sqrt(math.log(1.0 / tol) / self.params[0])
        if self.kind == "fejer":
            return self.params[0] / (math.pi * math.sqrt(tol))
        if self.kind == "user-series":
            a, coefs = self.params[0], self.params[1:]
            R = math.sqrt(math.log(1.0 / tol) / a)
            while abs(float(self(R))) > tol or abs(float(self(2 * R))) > tol:
                R *= 1.2
            return R
        if self.kind == "lorentzian":
            return self.params[0] / math.sqrt(tol)
        raise ValueError(self.kind)

    def scaled(self, factor: float) -> "ScaledTestFunction":
        return ScaledTestFunction(self, factor)


@dataclass(frozen=True)
class ScaledTestFunction:
    """x -> g(factor * x)."""

    base: TestFunction
    factor: float

    def __call__(self, x):
        return self.base(self.factor * np.asarray(x))

    def cutoff(self, tol: float = 1e-16) -> float:
        return self.base.cutoff(tol) / self.factor

    @property
    def kind(self):
        return self.base.kind

    @property
    def params(self):
        return self.base.params


def make_test_function(kind: str, params=(), strip_halfwidth: float = 2.0) -> TestFunction:
    params = tuple(float(p) for p in params)
    if kind == "gaussian":
        params = params or (1.0,)
        if len(params) != 1 or params[0] <= 0:
            raise NotAdmissible("gaussian needs one positive width parameter")
    elif kind == "fejer":
        params = params or (1.0,)
        if len(params) != 1 or params[0] <= 0:
            raise NotAdmissible("fejer needs one positive scale parameter")
    elif kind == "user-series":
        if len(params) < 2 or params[0] <= 0:
            raise NotAdmissible("user-series needs a > 0 and at least one coefficient")
        if any(c != 0 for c in params[2::2]):
            raise NotAdmissible("user-series has odd-degree terms; the test function must be even")
    elif kind == "lorentzian":
        params = params or (1.0,)
        if len(params) != 1 or params[0] <= 0:
            raise NotAdmissible("lorentzian needs one positive parameter")
        if params[0] < strip_halfwidth:
            raise NotAdmissible(f"poles at +-{params[0]:g}i lie inside the strip |Im z| < {strip_halfwidth:g}")
    else:
        raise NotAdmissible(f"unknown test function kind {kind!r}")
    return TestFunction(kind, params, strip_halfwidth)


# ---------------------------------------------------------------- empirical side

def empirical_pair_sum(zeros: ZeroSet, f, block: int = 512) -> float:
    """sum over ordered pairs (gamma, gamma') of f(gamma - gamma'), diagonal included."""
    g = zeros.array
    if g.size == 0:
        raise EmptySet("no zeros")
    partial = []
    for i in range(0, g.size, block):
        d = g[i:i + block, None] - g[None, :]
        partial.append(float(np.sum(np.real(f(d)))))
    return math.fsum(partial)


def _critical_points(zeros: ZeroSet) -> np.ndarray:
    return 0.5 + 1j * zeros.array


def empirical_discrete_moment(zeros: ZeroSet, observable: str, a=None, prec: int = 53) -> float:
    """Sum over zeros of |zeta'(rho)|^2, |zeta'(rho)|^4 or |zeta(rho + a)|^2.

    prec > 53 evaluates zeta through mpmath at that many bits.
    """
    if len(zeros) == 0:
        raise EmptySet("no zeros")
    rho = _critical_points(zeros)
    if observable in ("zprime_sq", "zprime_4"):
        if zeros.refinement_tol > 1e-6:
            raise PrecisionLoss(f"ordinates only known to {zeros.refinement_tol:g}; |zeta'| would be inaccurate")
        v = np.abs(specfun.zeta_family(rho, 1, prec=prec)) ** 2
        if observable == "zprime_4":
            v = v * v
    elif observable == "shifted":
        if a is None:
            raise ValueError("shifted needs the shift a")
        a = specfun.as_complex(a)
        v = np.abs(specfun.zeta_family(rho + a, 0, prec=prec)) ** 2
    else:
        raise ValueError(f"unknown observable {observable!r}")
    return math.fsum(v.tolist())


def empirical_power_moment(T: float, k: int = 2, panel: float = 1.0, nodes: int = 40) -> float:
    """int_0^T |zeta(1/2 + it)|^(2k) dt as int Z(t)^(2k) dt, by panel Gauss-Legendre."""
    if not 0 < T <= DESK_HEIGHT:
        raise OutOfRange(f"T must lie in (0, {DESK_HEIGHT:g}]")
    x, w = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(0.0, T, max(1, int(math.ceil(T / panel))) + 1)
    a, b = edges[:-1], edges[1:]
    t = (0.5 * (b - a)[:, None] * x[None, :] + 0.5 * (a + b)[:, None]).ravel()
    wt = (0.5 * (b - a)[:, None] * w[None, :]).ravel()
    return math.fsum((wt * specfun.hardy_Z(t) ** (2 * k)).tolist())
