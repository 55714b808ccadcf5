"""Arithmetic factors: coefficient tables, Ramanujan tau, and truncated Euler products.

Every product over primes goes through :func:`euler_product`. The partial
product is taken over p <= cutoff, and the remaining primes are accounted
for by expanding log(factor(p)) as a sum of c_j p^(-s_j) and adding
c_j * sum_{p > cutoff} p^(-s_j). Those prime-zeta tails come from the Moebius
inversion P(s) = sum_k mu(k)/k log zeta(ks) minus the explicit partial sum.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import specfun
from .errors import (CacheCorrupt, Divergent, MissingTauTable, OutOfRange, Overflow,
                     ShiftOutOfRange, TolExceeded)

SHIFT_BOUND = 0.25


@dataclass(frozen=True)
class EulerProductConfig:
    prime_cutoff: int = 100_000
    tail_order: int = 3
    abs_tol: float = 1e-9

    def __post_init__(self):
        if self.prime_cutoff < 1000:
            raise ValueError("prime_cutoff must be at least 1000")
        if self.abs_tol <= 0:
            raise ValueError("abs_tol must be positive")


DEFAULT_CFG = EulerProductConfig()


def check_shifts(*shifts, bound: float = SHIFT_BOUND) -> None:
    for z in shifts:
        re = np.real(np.asarray(specfun.as_complex(z)))
        if np.any(np.abs(re) >= bound):
            raise ShiftOutOfRange(f"shift real part must lie in (-{bound}, {bound})")


# ---------------------------------------------------------------- sieves

@lru_cache(maxsize=8)
def primes_upto(n: int) -> np.ndarray:
    if n < 2:
        return np.zeros(0, dtype=np.int64)
    sieve = np.ones(n + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, int(n ** 0.5) + 1):
        if sieve[p]:
            sieve[p * p::p] = False
    return np.nonzero(sieve)[0].astype(np.int64)


@lru_cache(maxsize=4)
def smallest_prime_factor(n: int) -> np.ndarray:
    spf = np.zeros(n + 1, dtype=np.int64)
    for p in primes_upto(n):
        blk = spf[p::p]
        blk[blk == 0] = p
    spf[1] = 1
    return spf


def mobius_table(n: int) -> np.ndarray:
    mu = np.ones(n + 1, dtype=np.int64)
    mu[0] = 0
    for p in primes_upto(n):
        mu[p::p] *= -1
        mu[p * p::p * p] = 0
    return mu


def dirichlet_convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(a*b)(n) = sum_{d|n} a(d) b(n/d) for 1-indexed arrays (index 0 unused)."""
    n = len(a) - 1
    out = np.zeros_like(a)
    for d in range(1, n + 1):
        if a[d]:
            out[d::d] += a[d] * b[1:n // d + 1]
    return out


# ---------------------------------------------------------------- tau

_TAU_MAGIC = b"RLTAU\x00\x01\x00"
_MODULI = (2147483629, 2147483587, 2147483579, 2147483563, 2147483549)


def _eta_cubed_sparse(n_max: int) -> list[tuple[int, int]]:
    """prod (1-q^n)^3 = sum_m (-1)^m (2m+1) q^{m(m+1)/2} (Jacobi)."""
    out, m = [], 0
    while m * (m + 1) // 2 <= n_max:
        out.append((m * (m + 1) // 2, (-1) ** m * (2 * m + 1)))
        m += 1
    return out


def _tau_mod(n_max: int, mod: int) -> np.ndarray:
    L = n_max  # coefficients of q^0..q^{n_max-1} in eta^24 / q
    sparse = _eta_cubed_sparse(L)
    series = np.zeros(L, dtype=np.int64)
    for e, c in sparse:
        if e < L:
            series[e] = c % mod
    for _ in range(7):
        acc = np.zeros(L, dtype=np.int64)
        for e, c in sparse:
            if e >= L:
                break
            acc[e:] = (acc[e:] + (c % mod) * series[:L - e]) % mod
        series = acc
    return series


@dataclass(frozen=True)
class TauTable:
    n_max: int
    values: tuple[int, ...]  # index 0 unused
    normalized: np.ndarray = field(repr=False, compare=False)

    def tau(self, n: int) -> int:
        return self.values[n]

    def tau_star(self, n):
        return self.normalized[n]

    def save(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as fh:
            fh.write(_TAU_MAGIC)
            fh.write(struct.pack("<Q", self.n_max))
            for v in self.values[1:]:
                fh.write(int(v).to_bytes(16, "little", signed=True))

    @classmethod
    def load(cls, path) -> "TauTable":
        data = Path(path).read_bytes()
        if data[:8] != _TAU_MAGIC:
            raise CacheCorrupt(f"{path}: bad magic")
        (n_max,) = struct.unpack("<Q", data[8:16])
        body = data[16:]
        if len(body) != 16 * n_max:
            raise CacheCorrupt(f"{path}: truncated tau cache")
        vals = [0] + [int.from_bytes(body[16 * i:16 * i + 16], "little", signed=True) for i in range(n_max)]
        return _make_tau(vals)


def _make_tau(vals: list[int]) -> TauTable:
    n = np.arange(len(vals), dtype=float)
    n[0] = 1.0
    norm = np.array([float(v) for v in vals]) / n ** 5.5
    norm[0] = 0.0
    return TauTable(len(vals) - 1, tuple(vals), norm)


@lru_cache(maxsize=4)
def _tau_table_cached(n_max: int) -> TauTable:
    residues = [_tau_mod(n_max, m) for m in _MODULI]
    M = math.prod(_MODULI)
    # CRT weights
    weights = []
    for m in _MODULI:
        Mi = M // m
        weights.append(Mi * pow(Mi, -1, m))
    vals = [0]
    half = M // 2
    for i in range(n_max):
        v = sum(int(r[i]) * w for r, w in zip(residues, weights)) % M
        if v > half:
            v -= M
        vals.append(v)
    # Deligne: |tau(n)| <= d(n) n^{11/2} < 2^120 for n <= 1e6, far inside M/2 ~ 2^154
    if n_max > 1_000_000:
        raise Overflow("tau table limited to n_max <= 1e6")
    return _make_tau(vals)


def tau_table(n_max: int, cache_dir=None) -> TauTable:
    """tau(1..n_max) from Delta = q prod (1-q^n)^24 = q (eta^3)^8.

    Exact integers are recovered by the Chinese remainder theorem from
    residues modulo five 31-bit primes.
    """
    if not 1 <= n_max <= 1_000_000:
        raise OutOfRange("tau_table needs 1 <= n_max <= 1e6")
    if cache_dir is not None:
        path = Path(cache_dir) / f"tau_{n_max}.bin"
        if path.exists():
            return TauTable.load(path)
        table = _tau_table_cached(n_max)
        table.save(path)
        return table
    return _tau_table_cached(n_max)


def tau_star_prime_powers(tau_p: np.ndarray, kmax: int) -> np.ndarray:
    """tau*(p^k) for k = 0..kmax by the Hecke recursion; rows indexed by k."""
    out = np.zeros((kmax + 1,) + np.shape(tau_p))
    out[0] = 1.0
    if kmax >= 1:
        out[1] = tau_p
    for k in range(1, kmax):
        out[k + 1] = tau_p * out[k] - out[k - 1]
    return out


# ---------------------------------------------------------------- coefficient tables

@dataclass(frozen=True)
class CoefficientTable:
    kind: str
    n_max: int
    values: np.ndarray  # index 0 unused

    def __getitem__(self, n: int):
        return self.values[n]


def coefficient_table(kind: str, n_max: int, tau: TauTable | None = None, k: int = 2) -> CoefficientTable:
    """Tables of mu, mu_k (coefficients of zeta^-k) or mu_Delta (of 1/L_Delta)."""
    if n_max < 1:
        raise OutOfRange("n_max must be >= 1")
    if kind == "mu":
        return CoefficientTable(kind, n_max, mobius_table(n_max))
    if kind == "mu_k":
        mu = mobius_table(n_max)
        acc = mu.copy()
        for _ in range(k - 1):
            acc = dirichlet_convolve(acc, mu)
        return CoefficientTable(f"mu_{k}", n_max, acc)
    if kind == "mu_delta":
        if tau is None or tau.n_max < n_max:
            raise MissingTauTable("mu_delta needs a tau table covering n_max")
        spf = smallest_prime_factor(n_max)
        vals = np.zeros(n_max + 1)
        vals[1] = 1.0
        for n in range(2, n_max + 1):
            p = int(spf[n])
            m, e = n, 0
            while m % p == 0:
                m //= p
                e += 1
            local = -tau.normalized[p] if e == 1 else (1.0 if e == 2 else 0.0)
            vals[n] = vals[m] * local
        return CoefficientTable(kind, n_max, vals)
    raise ValueError(f"unknown coefficient kind {kind!r}")


# ---------------------------------------------------------------- prime zeta

def prime_zeta(s, m: int = 0):
    """sum_p (log p)^m p^(-s) for Re s > 1 and m in {0, 1, 2}."""
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    if np.any(s.real <= 1.0):
        raise Divergent("prime zeta needs Re s > 1")
    if np.any(s.real < 1.05) and np.any(np.abs(s.imag) > 0):
        pass  # log zeta stays on the principal branch for Re s >= 1.05; closer needs care
    K = int(math.ceil(60.0 / np.min(s.real))) + 1
    mu = mobius_table(K)
    total = np.zeros(s.shape, dtype=complex)
    for k in range(1, K + 1):
        if mu[k] == 0:
            continue
        ks = k * s
        if m == 0:
            term = np.log(specfun._zeta0(ks)) / k
        elif m == 1:
            term = -specfun.zeta_logderiv(ks)
        else:
            term = k * specfun.zeta_logderiv_prime(ks)
        total += mu[k] * term
    return total


def prime_zeta_tail(s, cutoff: int, m: int = 0):
    """sum_{p > cutoff} (log p)^m p^(-s)."""
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    ps = primes_upto(cutoff).astype(float)
    logp = np.log(ps)
    weight = logp ** m
    partial = np.empty(s.shape, dtype=complex)
    for i, si in enumerate(s):
        partial[i] = np.sum(weight * np.exp(-si * logp))
    return prime_zeta(s, m) - partial


@dataclass(frozen=True)
class TailTerm:
    """coef * sum_{p > cutoff} (log p)^m p^(-s); coef and s broadcast with the shift shape."""

    coef: complex | np.ndarray
    s: complex | np.ndarray
    m: int = 0
    order: int = 1


def _tail_value(terms: Sequence[TailTerm], cfg: EulerProductConfig, shape) -> np.ndarray:
    total = np.zeros(shape, dtype=complex)
    used = [t for t in terms if t.order <= cfg.tail_order]
    dropped = [t for t in terms if t.order > cfg.tail_order]
    for t in used:
        s = np.broadcast_to(np.asarray(t.s, dtype=complex), shape)
        if np.any(s.real <= 1.0):
            raise Divergent("tail exponent with Re s <= 1: product does not converge")
        flat = s.ravel()
        uniq, inv = np.unique(flat, return_inverse=True)
        vals = prime_zeta_tail(uniq, cfg.prime_cutoff, t.m)[inv].reshape(shape)
        total += np.asarray(t.coef) * vals
    # crude size of the first dropped order, by the prime number theorem
    c = cfg.prime_cutoff
    for t in dropped:
        s = np.broadcast_to(np.asarray(t.s, dtype=complex), shape)
        sig = float(np.min(s.real))
        est = float(np.max(np.abs(t.coef))) * math.log(c) ** t.m * c ** (1 - sig) / ((sig - 1) * math.log(c))
        if est > cfg.abs_tol:
            raise TolExceeded(f"neglected tail of order {t.order} is about {est:.1e} > abs_tol")
    return total


def euler_product(factor: Callable[[np.ndarray], np.ndarray], cfg: EulerProductConfig = DEFAULT_CFG,
                  tail: Sequence[TailTerm] = (), shape=()):
    """prod_{p <= cutoff} factor(p) * exp(tail).

    ``factor`` maps the prime array (shape (P,)) to values of shape
    ``shape + (P,)``.
    """
    ps = primes_upto(cfg.prime_cutoff)
    vals = np.asarray(factor(ps.astype(float)), dtype=complex)
    logs = np.log(vals).sum(axis=-1)
    out = np.exp(logs + _tail_value(tail, cfg, np.shape(logs)))
    return complex(out) if np.ndim(out) == 0 else out


def prime_sum(term: Callable[[np.ndarray], np.ndarray], cfg: EulerProductConfig = DEFAULT_CFG,
              tail: Sequence[TailTerm] = ()):
    """sum_{p <= cutoff} term(p) plus the prime-zeta tail."""
    ps = primes_upto(cfg.prime_cutoff)
    vals = np.asarray(term(ps.astype(float)), dtype=complex).sum(axis=-1)
    out = vals + _tail_value(tail, cfg, np.shape(vals))
    return complex(out) if np.ndim(out) == 0 else out


def _col(z):
    """Shift as a column so it broadcasts against the prime axis."""
    z = np.asarray(specfun.as_complex(z), dtype=complex)
    return z[..., None]


def _pw(p, e):
    return np.exp(-e * np.log(p))


# ---------------------------------------------------------------- A_zeta

def a_zeta(alpha, beta, gamma, delta, cfg: EulerProductConfig = DEFAULT_CFG):
    """Arithmetic factor of the unitary ratio of two zetas over two zetas."""
    check_shifts(alpha, beta, gamma, delta)
    al, be, ga, de = (_col(z) for z in (alpha, beta, gamma, delta))
    shape = np.broadcast_shapes(al.shape, be.shape, ga.shape, de.shape)[:-1]

    def factor(p):
        a = _pw(p, 1 + ga + de)
        b = _pw(p, 1 + be + ga)
        c = _pw(p, 1 + al + de)
        return (1 - a) * (1 - b - c + a) / ((1 - b) * (1 - c))

    # log factor = -(a-b)(a-c) + third-order terms, with
    # a, b, c carrying exponents ea, eb, ec
    ea, eb, ec = (np.asarray(x)[..., 0] for x in (1 + ga + de, 1 + be + ga, 1 + al + de))
    tail = [
        TailTerm(-1, 2 * ea, 0, 2), TailTerm(-1, eb + ec, 0, 2),
        TailTerm(1, ea + eb, 0, 2), TailTerm(1, ea + ec, 0, 2),
        TailTerm(-1, 2 * eb + ec, 0, 3), TailTerm(-1, eb + 2 * ec, 0, 3),
        TailTerm(1, ea + 2 * eb, 0, 3), TailTerm(1, ea + 2 * ec, 0, 3),
        TailTerm(-1, 2 * ea + eb, 0, 3), TailTerm(-1, 2 * ea + ec, 0, 3),
        TailTerm(2, ea + eb + ec, 0, 3),
    ]
    return euler_product(factor, cfg, tail, shape)


# ---------------------------------------------------------------- A_D

def a_d_general(alpha, gamma, cfg: EulerProductConfig = DEFAULT_CFG):
    """A_D(alpha; gamma) for the symplectic (quadratic character) family."""
    check_shifts(alpha, gamma)
    al, ga = _col(alpha), _col(gamma)
    shape = np.broadcast_shapes(al.shape, ga.shape)[:-1]

    def factor(p):
        return (1 - _pw(p, 1 + 2 * al) / (p + 1) - _pw(p, al + ga) / (p + 1)) / (1 - _pw(p, 1 + al + ga))

    a, g = (np.asarray(x)[..., 0] for x in (al, ga))
    tail = [
        TailTerm(1, 2 + a + g, 0, 2), TailTerm(-1, 2 + 2 * a, 0, 2),
        TailTerm(-1, 3 + a + g, 0, 3), TailTerm(1, 3 + 2 * a, 0, 3),
        TailTerm(1, 3 + 2 * a + 2 * g, 0, 3), TailTerm(-1, 3 + 3 * a + g, 0, 3),
    ]
    return euler_product(factor, cfg, tail, shape)


def a_d_derivative_diag(r, cfg: EulerProductConfig = DEFAULT_CFG):
    """A'_D(r; r) = sum_p log p / ((p+1)(p^(1+2r) - 1))."""
    check_shifts(r)
    rr = _col(r)

    def term(p):
        return np.log(p) / ((p + 1) * (_pw(p, -(1 + 2 * rr)) - 1))

    r0 = rr[..., 0]
    tail = [TailTerm(1, 2 + 2 * r0, 1, 2), TailTerm(-1, 3 + 2 * r0, 1, 3), TailTerm(1, 3 + 4 * r0, 1, 3)]
    return prime_sum(term, cfg, tail)


def a_d_family(r, which: str = "diag", cfg: EulerProductConfig = DEFAULT_CFG):
    """A_D(r;r), A_D(-r;r) or A'_D(r;r)."""
    if which == "diag":
        return a_d_general(r, r, cfg)
    if which == "reflected":
        return a_d_general(-np.asarray(specfun.as_complex(r)), r, cfg)
    if which == "diag_deriv":
        return a_d_derivative_diag(r, cfg)
    raise ValueError(f"unknown A_D variant {which!r}")


# ---------------------------------------------------------------- B_Delta and sym^2

def _tau_for_primes(tau: TauTable, cfg: EulerProductConfig) -> np.ndarray:
    ps = primes_upto(cfg.prime_cutoff)
    if tau is None or tau.n_max < cfg.prime_cutoff:
        raise MissingTauTable("tau table must cover the prime cutoff")
    return tau.normalized[ps]


def b_delta_factor(p, tp, alpha, gamma):
    """Local factor of B_Delta at primes p with tau*(p) = tp; shifts broadcast."""
    x = _pw(p, 0.5 + alpha)
    x2 = x * x
    inv_m = 1.0 / (1 - tp * x + x2)
    inv_p = 1.0 / (1 + tp * x + x2)
    even = 0.5 * (inv_m + inv_p)            # sum_m tau*(p^2m) x^2m
    odd_over_x = 0.5 * (inv_m - inv_p) / x  # sum_m tau*(p^(2m+1)) x^2m
    t2 = tp * tp - 1.0
    first = 1 + p / (p + 1) * (even - 1 - tp * _pw(p, 1 + alpha + gamma) * odd_over_x
                               + _pw(p, 1 + 2 * gamma) * even)
    A, G, M = _pw(p, 1 + 2 * alpha), _pw(p, 1 + 2 * gamma), _pw(p, 1 + alpha + gamma)
    num = (1 - t2 * A + t2 * A * A - A ** 3) * (1 - G)
    den = (1 - t2 * M + t2 * M * M - M ** 3) * (1 - M)
    return first * num / den


def b_delta(alpha, gamma, tau: TauTable, cfg: EulerProductConfig = DEFAULT_CFG):
    """B_Delta(alpha; gamma) for the quadratic-twist family of Delta.

    Beyond the tau table the second-order log coefficients are replaced by
    their Sato-Tate averages.
    """
    check_shifts(alpha, gamma)
    al, ga = _col(alpha), _col(gamma)
    shape = np.broadcast_shapes(al.shape, ga.shape)[:-1]
    tp = _tau_for_primes(tau, cfg)

    def factor(p):
        return b_delta_factor(p, tp, al, ga)

    a, g = (np.asarray(x)[..., 0] for x in (al, ga))
    tail = [
        TailTerm(-1, 2 + 4 * a, 0, 2), TailTerm(1, 2 + 3 * a + g, 0, 2),
        TailTerm(-1, 2 + 4 * g, 0, 2), TailTerm(1, 2 + a + 3 * g, 0, 2),
        TailTerm(-1, 2 + 2 * g, 0, 2), TailTerm(1, 2 + a + g, 0, 2),
    ]
    return euler_product(factor, cfg, tail, shape)


def b_delta_alpha_derivative(r, tau: TauTable, cfg: EulerProductConfig = DEFAULT_CFG, radius: float | None = None):
    """d/d alpha B_Delta(alpha; r) at alpha = r, by a Cauchy circle in alpha."""
    r = np.atleast_1d(np.asarray(specfun.as_complex(r), dtype=complex))
    if radius is None:
        radius = float(min(0.05, (SHIFT_BOUND - np.max(np.abs(r.real))) / 2))
    nodes = 32
    w = np.exp(2j * math.pi * np.arange(nodes) / nodes)
    out = np.empty(r.shape, dtype=complex)
    step = 4  # bounds the (shifts x nodes x primes) working set
    for i in range(0, r.size, step):
        rr = r[i:i + step]
        alphas = rr[:, None] + radius * w[None, :]
        vals = b_delta(alphas, np.broadcast_to(rr[:, None], alphas.shape), tau, cfg)
        out[i:i + step] = (vals * w[None, :] ** -1).mean(axis=1) / radius
    return out


def sym2_local_factor(p, tp, s):
    t2 = tp * tp - 1.0
    x = _pw(p, s)
    return 1.0 / (1 - t2 * x + t2 * x * x - x ** 3)


def sym2_L(s_offset, tau: TauTable, cfg: EulerProductConfig = DEFAULT_CFG, mode: str = "euler"):
    """L_Delta(sym^2, 1 + s_offset).

    ``euler`` multiplies local factors over p <= cutoff; ``dirichlet`` forms
    zeta(2s) sum_{n <= cutoff} tau*(n^2) n^-s (sum tau*(n^2) n^-s = L/zeta(2s)). Beyond the table the first
    log coefficient tau*(p^2) averages to zero (Sato-Tate), so no tail is
    added; the truncation error is a fluctuating O(cutoff^(-Re s + 1/2)).
    """
    s = 1.0 + np.asarray(specfun.as_complex(s_offset), dtype=complex)
    tp = _tau_for_primes(tau, cfg)
    if mode == "euler":
        ss = s[..., None]
        return euler_product(lambda p: sym2_local_factor(p, tp, ss), cfg, (), np.shape(s))
    if mode == "dirichlet":
        n_max = cfg.prime_cutoff
        sq = _tau_star_of_squares(tau, n_max)
        logn = np.log(np.arange(1, n_max + 1, dtype=float))
        flat = np.atleast_1d(s).ravel()
        vals = np.array([np.sum(sq[1:] * np.exp(-z * logn)) for z in flat])
        out = (vals * specfun._zeta0(2 * flat)).reshape(np.shape(s))
        return complex(out) if np.ndim(out) == 0 else out
    raise ValueError(f"unknown mode {mode!r}")


@lru_cache(maxsize=2)
def _tau_star_of_squares_cached(tau_id: int, n_max: int, tau: TauTable) -> np.ndarray:
    spf = smallest_prime_factor(n_max)
    out = np.zeros(n_max + 1)
    out[1] = 1.0
    for n in range(2, n_max + 1):
        p = int(spf[n])
        m, e = n, 0
        while m % p == 0:
            m //= p
            e += 1
        local = tau_star_prime_powers(np.array(tau.normalized[p]), 2 * e)[2 * e]
        out[n] = out[m] * local
    return out


def _tau_star_of_squares(tau: TauTable, n_max: int) -> np.ndarray:
    return _tau_star_of_squares_cached(id(tau), n_max, tau)


def sym2_logderiv(s_offset, tau: TauTable, cfg: EulerProductConfig = DEFAULT_CFG):
    """L'/L(sym^2, 1 + s_offset), the exact log-derivative of the truncated product."""
    s = 1.0 + np.asarray(specfun.as_complex(s_offset), dtype=complex)
    tp = _tau_for_primes(tau, cfg)
    t2 = tp * tp - 1.0
    ps = primes_upto(cfg.prime_cutoff).astype(float)
    logp = np.log(ps)
    flat = np.atleast_1d(s).ravel()
    out = np.empty(flat.shape, dtype=complex)
    for i, z in enumerate(flat):
        x = np.exp(-z * logp)
        den = 1 - t2 * x + t2 * x * x - x ** 3
        out[i] = np.sum(logp * x * (-t2 + 2 * t2 * x - 3 * x * x) / den)
    out = out.reshape(np.shape(s))
    return complex(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------- pair correlation A, B

def pair_A(eta, cfg: EulerProductConfig = DEFAULT_CFG):
    """A(eta) = prod_p (1 - p^(-1-eta))(1 - 2/p + p^(-1-eta)) / (1 - 1/p)^2."""
    e = _col(eta)
    if np.any(e.real <= -SHIFT_BOUND):
        raise ShiftOutOfRange("pair_A needs Re eta > -1/4")

    def factor(p):
        x = _pw(p, 1 + e)
        return (1 - x) * (1 - 2 / p + x) / (1 - 1 / p) ** 2

    e0 = e[..., 0]
    # log factor = -(x - y)^2 (1 + 2y + ...), y = 1/p
    tail = [
        TailTerm(-1, 2 + 2 * e0, 0, 2), TailTerm(2, 2 + e0, 0, 2), TailTerm(-1, 2 + 0 * e0, 0, 2),
        TailTerm(-2, 3 + 2 * e0, 0, 3), TailTerm(4, 3 + e0, 0, 3), TailTerm(-2, 3 + 0 * e0, 0, 3),
    ]
    return euler_product(factor, cfg, tail, e0.shape)


def pair_B(eta, cfg: EulerProductConfig = DEFAULT_CFG):
    """B(eta) = sum_p (log p / (p^(1+eta) - 1))^2."""
    e = _col(eta)
    if np.any(e.real <= -0.5):
        raise ShiftOutOfRange("pair_B needs Re eta > -1/2")

    def term(p):
        return (np.log(p) / (_pw(p, -(1 + e)) - 1)) ** 2

    e0 = e[..., 0]
    tail = [TailTerm(1, 2 + 2 * e0, 2, 2), TailTerm(2, 3 + 3 * e0, 2, 3), TailTerm(3, 4 + 4 * e0, 2, 4)]
    return prime_sum(term, cfg, tail)


def pair_AB(eta, which: str, cfg: EulerProductConfig = DEFAULT_CFG):
    if which == "A":
        return pair_A(eta, cfg)
    if which == "B":
        return pair_B(eta, cfg)
    raise ValueError(which)


# ---------------------------------------------------------------- a(k)

def _a_k_log_series(k: int, order: int) -> list[Fraction]:
    """Coefficients d_j of log[(1-y)^{k^2} sum_m binom(m+k-1,m)^2 y^m] = sum_j d_j y^j."""
    c = [Fraction(math.comb(m + k - 1, m) ** 2) for m in range(order + 1)]
    # log of the hypergeometric series
    logc = [Fraction(0)] * (order + 1)
    for n in range(1, order + 1):
        acc = n * c[n]
        for j in range(1, n):
            acc -= j * logc[j] * c[n - j]
        logc[n] = acc / n
    return [Fraction(0)] + [logc[j] - Fraction(k * k, j) for j in range(1, order + 1)]


def a_k_arithmetic(k: int, cfg: EulerProductConfig = DEFAULT_CFG) -> float:
    """a(k) = prod_p (1-1/p)^{k^2} sum_m (Gamma(m+k)/(m! Gamma(k)))^2 p^{-m}."""
    if k < 1:
        raise OutOfRange("a(k) needs k >= 1")

    def factor(p):
        y = 1.0 / p
        total = np.zeros_like(p)
        term = np.ones_like(p)
        m = 0
        while True:
            coef = math.comb(m + k - 1, m) ** 2
            contrib = coef * term
            total += contrib
            if np.max(contrib) < 1e-18 * np.min(total) and m > 2:
                break
            m += 1
            term = term * y
        return (1 - y) ** (k * k) * total

    d = _a_k_log_series(k, 4)
    tail = [TailTerm(float(d[j]), complex(j), 0, j) for j in (2, 3, 4) if d[j] != 0]
    return float(euler_product(factor, cfg, tail).real)
