"""Command line: ratiolab <command> [statistic] [key=value ...]."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable

from . import mollify, predict, specfun, zerolab
from .arith import EulerProductConfig
from .config import ExperimentConfig
from .errors import ConfigError, IoError, RatioLabError
from .report import PredictionReport, _num

COMMANDS = ("zeros", "predict", "empirical", "compare", "mollify", "optimize")
DEFAULT_CACHE = ".ratiolab-cache"

# relative tolerance quoted alongside a comparison: how far apart the two sides may sit at desk
# heights from lower-order terms and fluctuations alone
FLUCTUATION = {
    "pair-correlation": 0.03,
    "moment2-zetaprime": 0.05,
    "moment4-zetaprime": 0.25,
    "moment2-shifted": 0.05,
    "fourth-moment-zeta": 0.02,
    "mollified-moment": 0.05,
}


@dataclass
class Context:
    cfg: ExperimentConfig
    euler: EulerProductConfig
    cache_dir: Path
    precision: int = 53


@dataclass(frozen=True)
class Statistic:
    id: str
    predict: Callable | None = None      # Context -> PredictionReport
    empirical: Callable | None = None    # Context -> (value, details)
    mollify: Callable | None = None      # Context -> dict
    optimize: Callable | None = None     # Context -> dict
    targets: tuple = field(default_factory=tuple)


REGISTRY: dict[str, Statistic] = {}


def register(stat: Statistic) -> Statistic:
    if stat.id in REGISTRY:
        raise RuntimeError(f"statistic {stat.id} registered twice")
    REGISTRY[stat.id] = stat
    return stat


# ---------------------------------------------------------------- helpers

def _test_function(ctx: Context):
    c = ctx.cfg
    kind = c.get("f", "gaussian")
    params = [float(p) for p in c.get("f_params", [])]
    return zerolab.make_test_function(kind, params, c.get("strip", 2.0))


def _value_report(name: str, inputs: dict, value) -> PredictionReport:
    return PredictionReport(name, inputs, {"value": value})


def _shifts(ctx: Context, names):
    return [ctx.cfg.require(n) for n in names]


def _poly(ctx: Context, *names):
    for n in names:
        if ctx.cfg.has(n):
            return mollify.parse_polynomial(ctx.cfg.get(n))
    return None


def _poly_or(ctx: Context, default, *names):
    p = _poly(ctx, *names)
    return mollify.Polynomial(tuple(default)) if p is None else p


def _exact(v) -> dict:
    if isinstance(v, mollify.ThetaLaurent):
        out = {"laurent_in_theta": v.to_dict()}
        if all(n <= 0 for n in v.terms):
            out["coefficients_inverse_theta"] = [str(c) for c in v.inverse_coefficients()]
        return out
    v = Fraction(v)
    return {"value": mollify.fraction_json(v), "value_str": str(v), "value_float": float(v)}


def _zeros(ctx: Context, T: float) -> zerolab.ZeroSet:
    path = ctx.cfg.get("zeros_file")
    if path:
        return zerolab.import_zeros(path).up_to(T)
    return zerolab.ensure_zeros(T, ctx.cache_dir, ctx.cfg.get("tol", 1e-9))


def _shifted_a(ctx: Context, T: float):
    c = ctx.cfg
    if c.has("scaled_alpha"):
        return 2j * math.pi * c.get("scaled_alpha") / math.log(T / specfun.TWO_PI)
    return c.require("shift")


# ---------------------------------------------------------------- statistics: ratios

register(Statistic(
    "ratio-unitary",
    predict=lambda ctx: predict.ratio_unitary(_shifts(ctx, ("alpha", "beta", "gamma", "delta")),
                                              t=ctx.cfg.get("t"), T=ctx.cfg.get("T"), cfg=ctx.euler),
    targets=(predict.ratio_unitary,)))

register(Statistic(
    "ratio-logderiv-unitary",
    predict=lambda ctx: _value_report(
        "ratio_logderiv_unitary", {"alpha": ctx.cfg.require("alpha"), "beta": ctx.cfg.require("beta"),
                                   "t": ctx.cfg.require("t")},
        predict.ratio_logderiv_unitary(ctx.cfg.require("alpha"), ctx.cfg.require("beta"), ctx.cfg.require("t"),
                                       ctx.euler)),
    targets=(predict.ratio_logderiv_unitary,)))

register(Statistic(
    "ratio-symplectic",
    predict=lambda ctx: _value_report(
        "ratio_symplectic", {"alpha": ctx.cfg.require("alpha"), "gamma": ctx.cfg.require("gamma"),
                             "d": ctx.cfg.require("d")},
        predict.ratio_symplectic(ctx.cfg.require("alpha"), ctx.cfg.require("gamma"), ctx.cfg.require("d"),
                                 ctx.euler)),
    targets=(predict.ratio_symplectic,)))

register(Statistic(
    "ratio-logderiv-symplectic",
    predict=lambda ctx: _value_report(
        "ratio_logderiv_symplectic", {"r": ctx.cfg.require("alpha"), "d": ctx.cfg.require("d")},
        predict.ratio_logderiv_symplectic(ctx.cfg.require("alpha"), ctx.cfg.require("d"), ctx.euler)),
    targets=(predict.ratio_logderiv_symplectic,)))

register(Statistic(
    "ratio-orthogonal",
    predict=lambda ctx: _value_report(
        "ratio_orthogonal", {"alpha": ctx.cfg.require("alpha"), "gamma": ctx.cfg.require("gamma"),
                             "d": ctx.cfg.require("d")},
        predict.ratio_orthogonal(ctx.cfg.require("alpha"), ctx.cfg.require("gamma"), ctx.cfg.require("d"),
                                 cfg=ctx.euler)),
    targets=(predict.ratio_orthogonal,)))

register(Statistic(
    "ratio-logderiv-orthogonal",
    predict=lambda ctx: _value_report(
        "ratio_logderiv_orthogonal", {"r": ctx.cfg.require("alpha"), "d": ctx.cfg.require("d")},
        predict.ratio_logderiv_orthogonal(ctx.cfg.require("alpha"), ctx.cfg.require("d"), cfg=ctx.euler)),
    targets=(predict.ratio_logderiv_orthogonal,)))

register(Statistic(
    "ratio-two-over-two",
    predict=lambda ctx: _value_report(
        "ratio_two_over_two", {"family": ctx.cfg.require("family"), "X": ctx.cfg.require("X"),
                               "shifts": _shifts(ctx, ("alpha", "beta", "gamma", "delta"))},
        predict.ratio_two_over_two(ctx.cfg.require("family"), *_shifts(ctx, ("alpha", "beta", "gamma", "delta")),
                                   ctx.cfg.require("X"))),
    targets=(predict.ratio_two_over_two,)))


# ---------------------------------------------------------------- statistics: zeros of families

def _one_level(ctx: Context) -> PredictionReport:
    c = ctx.cfg
    return predict.one_level_density(c.require("family"), _test_function(ctx), c.require("X"),
                                     scaled=c.get("scaled", False), include_oscillatory=c.get("oscillatory", True),
                                     cfg=ctx.euler)


register(Statistic("one-level-density", predict=_one_level, targets=(predict.one_level_density,)))

register(Statistic(
    "one-level-limit",
    predict=lambda ctx: _value_report(
        "one_level_limit", {"family": ctx.cfg.require("family"), "f": ctx.cfg.get("f", "gaussian")},
        predict.one_level_limit(ctx.cfg.require("family"), _test_function(ctx))),
    targets=(predict.one_level_limit,)))


def _pair_predict(ctx: Context) -> PredictionReport:
    return predict.pair_correlation_prediction(_test_function(ctx), ctx.cfg.require("T"),
                                               scaled=ctx.cfg.get("scaled", False), cfg=ctx.euler)


def _pair_empirical(ctx: Context):
    T = ctx.cfg.require("T")
    zs = _zeros(ctx, T)
    return zerolab.empirical_pair_sum(zs, _test_function(ctx)), {"zeros": len(zs)}


register(Statistic("pair-correlation", predict=_pair_predict, empirical=_pair_empirical,
                   targets=(predict.pair_correlation_prediction, zerolab.empirical_pair_sum)))

register(Statistic(
    "montgomery-limit",
    predict=lambda ctx: _value_report("montgomery_limit", {"f": ctx.cfg.get("f", "gaussian")},
                                      predict.montgomery_limit(_test_function(ctx))),
    targets=(predict.montgomery_limit,)))


# ---------------------------------------------------------------- statistics: moments

def _discrete(observable: str):
    def run(ctx: Context):
        T = ctx.cfg.require("T")
        zs = _zeros(ctx, T)
        a = _shifted_a(ctx, T) if observable == "shifted" else None
        v = zerolab.empirical_discrete_moment(zs, observable, a, prec=ctx.precision)
        return v, {"zeros": len(zs)}
    return run


register(Statistic(
    "moment2-zetaprime",
    predict=lambda ctx: predict.moment2_zetaprime(ctx.cfg.require("T"), ctx.cfg.get("leading_only", False)),
    empirical=_discrete("zprime_sq"),
    targets=(predict.moment2_zetaprime,)))

register(Statistic(
    "moment4-zetaprime",
    predict=lambda ctx: predict.moment4_zetaprime(ctx.cfg.require("T")),
    empirical=_discrete("zprime_4"),
    targets=(predict.moment4_zetaprime,)))


def _shifted_predict(ctx: Context) -> PredictionReport:
    T = ctx.cfg.require("T")
    if ctx.cfg.has("scaled_alpha"):
        return predict.moment2_shifted(T, alpha=ctx.cfg.get("scaled_alpha"))
    return predict.moment2_shifted(T, a=ctx.cfg.require("shift"))


register(Statistic("moment2-shifted", predict=_shifted_predict, empirical=_discrete("shifted"),
                   targets=(predict.moment2_shifted,)))

register(Statistic(
    "hko-leading",
    predict=lambda ctx: _value_report("hko_leading", {"k": ctx.cfg.require("k"), "T": ctx.cfg.require("T")},
                                      predict.hko_leading(ctx.cfg.require("k"), ctx.cfg.require("T"), ctx.euler)),
    targets=(predict.hko_leading,)))

register(Statistic(
    "fourth-moment-zeta",
    predict=lambda ctx: predict.fourth_moment_zeta(ctx.cfg.require("T")),
    empirical=lambda ctx: (zerolab.empirical_power_moment(ctx.cfg.require("T"), 2), {}),
    targets=(predict.fourth_moment_zeta,)))


def _iv(ctx: Context) -> PredictionReport:
    k = ctx.cfg.require("k")
    theta = ctx.cfg.require("theta")
    u = [Fraction(x) for x in ctx.cfg.get("u", [])] or [Fraction(0)] * (2 * k)
    v = predict.iv_determinant(k, theta, u)
    rep = _value_report("iv_determinant", {"k": k, "theta": str(theta), "u": [str(x) for x in u]}, float(v))
    rep.notes.append(f"exact={v}")
    return rep


register(Statistic("iv-determinant", predict=_iv, targets=(predict.iv_determinant,)))


# ---------------------------------------------------------------- statistics: mollifiers

def _theta(ctx: Context):
    return ctx.cfg.get("theta")


def _unitary_parts(ctx: Context):
    P1 = _poly_or(ctx, (0, 1), "P1", "P")
    P2 = _poly_or(ctx, P1.coefficients, "P2")
    Q1 = _poly_or(ctx, (1,), "Q1", "Q")
    Q2 = _poly_or(ctx, Q1.coefficients, "Q2")
    return P1, P2, Q1, Q2


def _mollify_stat(name: str, fn: Callable, defaults: tuple):
    def run(ctx: Context) -> dict:
        P1 = _poly_or(ctx, defaults[0], "P1", "P")
        P2 = _poly_or(ctx, P1.coefficients, "P2")
        Q1 = _poly_or(ctx, defaults[1], "Q1", "Q")
        Q2 = _poly_or(ctx, Q1.coefficients, "Q2")
        th = _theta(ctx)
        out = {"statistic": name, "inputs": {"P1": str(P1), "P2": str(P2), "Q1": str(Q1), "Q2": str(Q2),
                                             "theta": None if th is None else str(th)}}
        out.update(_exact(fn(P1, P2, Q1, Q2, None)))
        if th is not None:
            out.update(_exact(fn(P1, P2, Q1, Q2, th)))
        return out
    return run


register(Statistic("unitary", mollify=_mollify_stat("unitary", mollify.unitary_mollified, ((0, 1), (1,))),
                   targets=(mollify.unitary_mollified,)))
register(Statistic("symplectic", mollify=_mollify_stat("symplectic", mollify.symplectic_mollified,
                                                         ((0, 0, 1), (1,))),
                   targets=(mollify.symplectic_mollified,)))
register(Statistic("orthogonal", mollify=_mollify_stat(
    "orthogonal", lambda a, b, c, d, th: mollify.orthogonal_mollified(a, b, c, d, theta=th), ((0, 1), (1,))),
    targets=(mollify.orthogonal_mollified,)))
register(Statistic("orthogonal-kmv", mollify=_mollify_stat(
    "orthogonal-kmv", lambda a, b, c, d, th: mollify.orthogonal_mollified(a, None, c, None, theta=th, variant="kmv"),
    ((0, 1), (1,))), targets=(mollify.orthogonal_mollified,)))
register(Statistic("fourth-diag", mollify=_mollify_stat(
    "fourth-diag", lambda a, b, c, d, th: mollify.fourth_mollified_diag(c, a, th), ((0, 0, 0, 0, 1), (0, 0, 0, 0, 1))),
    targets=(mollify.fourth_mollified_diag,)))
register(Statistic("fourth-split", mollify=_mollify_stat("fourth-split", mollify.fourth_mollified_split,
                                                           ((0, 0, 1), (0, 0, 1))),
                   targets=(mollify.fourth_mollified_split,)))


def _mixed(ctx: Context) -> dict:
    P1 = _poly_or(ctx, (0, 0, 1), "P1", "P")
    P2 = _poly_or(ctx, P1.coefficients, "P2")
    t1, t2 = ctx.cfg.require("theta"), ctx.cfg.require("theta2")
    out = {"statistic": "mixed-i3", "inputs": {"P1": str(P1), "P2": str(P2), "theta": str(t1), "theta2": str(t2)}}
    out.update(_exact(mollify.i3_mixed(P1, P2, t1, t2)))
    return out


register(Statistic("mixed-i3", mollify=_mixed, targets=(mollify.i3_mixed,)))


def _ratio(ctx: Context) -> dict:
    P = _poly_or(ctx, (0, 1), "P", "P1")
    k = ctx.cfg.get("k", 0)
    scheme = ctx.cfg.get("scheme", "single")
    th = ctx.cfg.require("theta")
    a = ctx.cfg.get("weight")
    out = {"statistic": "nonvanishing-ratio",
           "inputs": {"P": str(P), "theta": str(th), "k": k, "scheme": scheme, "weight": None if a is None else str(a)}}
    out.update(_exact(mollify.nonvanishing_ratio(P, th, k, scheme, a)))
    return out


register(Statistic("nonvanishing-ratio", mollify=_ratio, targets=(mollify.nonvanishing_ratio,)))


def _mollified_predict(ctx: Context) -> PredictionReport:
    P1, P2, Q1, Q2 = _unitary_parts(ctx)
    th = ctx.cfg.require("theta")
    v = mollify.unitary_mollified(P1, P2, Q1, Q2, th)
    rep = PredictionReport("mollified_moment", {"theta": str(th), "P1": str(P1), "P2": str(P2), "Q1": str(Q1),
                                                "Q2": str(Q2)}, {"closed_form": float(v)})
    rep.notes.append(f"exact={v}")
    return rep


def _mollified_empirical(ctx: Context):
    P1, P2, Q1, Q2 = _unitary_parts(ctx)
    return mollify.empirical_mollified_moment(P1, P2, Q1, Q2, ctx.cfg.require("theta"), ctx.cfg.require("T")), {}


register(Statistic("mollified-moment", predict=_mollified_predict, empirical=_mollified_empirical,
                   targets=(mollify.empirical_mollified_moment,)))


def _optimize(ctx: Context) -> dict:
    th = ctx.cfg.require("theta")
    k = ctx.cfg.get("k", 1)
    mode = ctx.cfg.get("mode", "polynomial")
    res = mollify.optimize_nonvanishing(th, k, ctx.cfg.get("degree", 12), mode)
    out = {"statistic": "nonvanishing", "inputs": {"theta": str(th), "k": k, "mode": mode},
           "ratio": res.ratio, "stationarity": res.stationarity,
           "polynomial": [str(c) for c in res.polynomial.coefficients]}
    if res.exact_ratio is not None:
        out["exact_ratio"] = mollify.fraction_json(res.exact_ratio)
    if res.lam is not None:
        out["lambda"] = res.lam
    return out


register(Statistic("nonvanishing", optimize=_optimize, targets=(mollify.optimize_nonvanishing,)))


# ---------------------------------------------------------------- commands

def _zeros_command(ctx: Context) -> dict:
    T = ctx.cfg.require("T")
    zs = _zeros(ctx, T)
    out = {"T": T, "count": len(zs), "source": zs.source, "refinement_tol": zs.refinement_tol,
           "first": zs.ordinates[0] if len(zs) else None, "last": zs.ordinates[-1] if len(zs) else None}
    if zs.source == "computed" and T >= specfun.FIRST_ZERO:
        out["argument_principle_count"] = specfun.zero_count(T)
    return out


def _lookup(statistic: str | None, slot: str) -> Statistic:
    if not statistic:
        raise ConfigError("missing statistic id")
    stat = REGISTRY.get(statistic)
    if stat is None:
        raise ConfigError(f"unknown statistic {statistic!r}")
    if getattr(stat, slot) is None:
        raise ConfigError(f"statistic {statistic!r} has no {slot} side")
    return stat


def run(command: str, ctx: Context):
    """Execute one command; returns a PredictionReport or a plain dict."""
    stat_id = ctx.cfg.get("statistic")
    if command == "zeros":
        return _zeros_command(ctx)
    if command == "predict":
        return _lookup(stat_id, "predict").predict(ctx)
    if command == "empirical":
        value, details = _lookup(stat_id, "empirical").empirical(ctx)
        return {"statistic": stat_id, "inputs": _inputs(ctx), "empirical": value, **details}
    if command == "compare":
        stat = _lookup(stat_id, "empirical")
        if stat.predict is None:
            raise ConfigError(f"statistic {stat_id!r} has no prediction to compare with")
        value, details = stat.empirical(ctx)
        rep = stat.predict(ctx)
        pred = rep.total
        diff = value - pred
        rel = abs(diff) / abs(pred) if pred != 0 else math.inf
        budget = rep.error_budget + FLUCTUATION.get(stat_id, 0.0) * abs(pred)
        return {"statistic": stat_id, "inputs": _inputs(ctx), "empirical": value, "predicted": pred,
                "prediction_terms": rep.terms, "absolute_discrepancy": abs(diff), "relative_discrepancy": rel,
                "fluctuation_budget": budget, "within_budget": abs(diff) <= budget, "notes": rep.notes, **details}
    if command == "mollify":
        return _lookup(stat_id, "mollify").mollify(ctx)
    if command == "optimize":
        return _lookup(stat_id or "nonvanishing", "optimize").optimize(ctx)
    raise ConfigError(f"unknown command {command!r}")


def _inputs(ctx: Context) -> dict:
    return {k: _plain(ctx.cfg.get(k)) for sec in ("inputs", "test_function", "mollifier")
            for k in sorted(ctx.cfg.values.get(sec, {}))}


# ---------------------------------------------------------------- output

def _plain(x):
    if isinstance(x, PredictionReport):
        return x.to_dict()
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return _num(x)


def render(report, fmt: str = "json") -> str:
    """Deterministic text for a report: sorted keys, floats as their shortest round-trip form."""
    if fmt == "json":
        return json.dumps(_plain(report), sort_keys=True, indent=2) + "\n"
    if fmt != "csv":
        raise ConfigError(f"unknown format {fmt!r}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if isinstance(report, PredictionReport):
        w.writerow(["term", "real", "imag"])
        for k, v in list(report.terms.items()) + [("total", report.total)]:
            z = complex(v)
            w.writerow([k, format(z.real, ".17g"), format(z.imag, ".17g")])
        return buf.getvalue()
    w.writerow(["key", "value"])
    for k, v in _flatten(_plain(report)):
        w.writerow([k, format(v, ".17g") if isinstance(v, float) else json.dumps(v) if not isinstance(v, str) else v])
    return buf.getvalue()


def _flatten(d, prefix=""):
    if isinstance(d, dict):
        for k in sorted(d):
            yield from _flatten(d[k], f"{prefix}{k}.")
    elif isinstance(d, list) and d and all(isinstance(x, dict) for x in d):
        for i, x in enumerate(d):
            yield from _flatten(x, f"{prefix}{i}.")
    else:
        yield prefix[:-1], d


def emit_report(report, fmt: str = "json", path=None) -> str:
    text = render(report, fmt)
    if path is None:
        sys.stdout.write(text)
        return text
    try:
        Path(path).write_bytes(text.encode("utf-8"))
    except OSError as e:
        raise IoError(str(e)) from e
    return text


# ---------------------------------------------------------------- entry point

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ratiolab", description="Ratios-conjecture predictions against zeta data.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("args", nargs="*", help="statistic id followed by key=value overrides")
    p.add_argument("--config", help="sectioned key = value file")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"))
    p.add_argument("--cache-dir")
    p.add_argument("--prime-cutoff", type=int)
    p.add_argument("--precision", type=int, help="bits for zeta evaluations at zeros (53 = double)")
    return p


def build_context(ns: argparse.Namespace) -> tuple[Context, str, str | None]:
    cfg = ExperimentConfig.from_file(ns.config) if ns.config else ExperimentConfig()
    args = list(ns.args)
    if args and "=" not in args[0]:
        cfg = cfg.with_overrides([("statistic", args.pop(0))])
    cfg = cfg.with_overrides(args)
    for key, val in (("format", ns.format), ("out", ns.out), ("cache_dir", ns.cache_dir),
                     ("prime_cutoff", ns.prime_cutoff), ("precision", ns.precision)):
        if val is not None:
            cfg = cfg.with_overrides([(key, str(val))])
    cfg = cfg.with_overrides([("command", ns.command)])
    euler_kw = {k: cfg.get(k) for k in ("prime_cutoff", "tail_order", "abs_tol") if cfg.has(k)}
    try:
        euler = EulerProductConfig(**euler_kw)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    prec = cfg.get("precision", 53)
    if prec < 53:
        raise ConfigError("precision must be at least 53 bits")
    ctx = Context(cfg, euler, Path(cfg.get("cache_dir", DEFAULT_CACHE)), prec)
    return ctx, cfg.get("format", "json"), cfg.get("out")


def main(argv=None) -> int:
    ns = _parser().parse_intermixed_args(argv)
    try:
        ctx, fmt, out = build_context(ns)
        if fmt not in ("json", "csv"):
            raise ConfigError(f"unknown format {fmt!r}")
        result = run(ns.command, ctx)
        emit_report(result, fmt, out)
    except RatioLabError as e:
        print(f"ratiolab: {type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code
    except ValueError as e:
        print(f"ratiolab: ConfigError: {e}", file=sys.stderr)
        return ConfigError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
